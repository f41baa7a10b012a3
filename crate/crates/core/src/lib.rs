//! Numerical study of conformal metrics on the unit ball with zero scalar
//! curvature and prescribed axisymmetric boundary mean curvature `h`.
//!
//! The boundary equation `du/deta + gamma_n u = mu gamma_n h u^p` is solved for
//! axisymmetric `u` by a spectral discretization in the colatitude, a
//! mountain-pass search between two concentrated bubbles, and Newton refinement.

pub mod bubbles;
pub mod checks;
pub mod curvature;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
