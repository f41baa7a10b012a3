//! Axisymmetric boundary functions on `S^{n-1}`: Gauss quadrature in the
//! colatitude, an orthonormal zonal harmonic basis, and the boundary operators
//! of the harmonic extension into the ball.

mod function;
mod grid;
pub mod quadrature;

pub use function::{
    analyze, curvature_on, dtn_apply, energy, energy_checked, j_functional, mass_center, residual, robin_apply,
    synthesize, AxisymmetricFunction, ZonalSpectrum, ALIASING_THRESHOLD,
};
pub(crate) use function::check_exponent;
pub use grid::{make_grid, RadialGrid, MIN_NODES};
pub use quadrature::{sine_power_integral, sphere_area};
