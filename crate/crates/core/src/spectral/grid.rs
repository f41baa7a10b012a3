use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::quadrature::{gauss_gegenbauer, sphere_area, Recurrence};
use crate::error::{Error, Result};
use crate::geometry::{dilate_colatitude, dilation_stretch};

/// Smallest admissible node count.
pub const MIN_NODES: usize = 8;

/// The undilated Gauss rule and zonal basis, shared between dilated grids.
#[derive(Debug)]
pub struct BaseGrid {
    n: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `|S^{n-2}| * weights`: quadrature weights for the surface measure.
    surface_weights: Vec<f64>,
    equator_area: f64,
    sphere_area: f64,
    recurrence: Recurrence,
    /// `basis[(j, k)] = Y_k(s_j)`, orthonormal zonal harmonics on `S^{n-1}`.
    basis: DMatrix<f64>,
    /// `basis^T diag(surface_weights)`, the analysis operator.
    analysis: DMatrix<f64>,
}

impl BaseGrid {
    fn new(n: usize, m: usize, k_max: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Dimension(n));
        }
        if m < MIN_NODES {
            return Err(Error::GridTooSmall { nodes: m, min: MIN_NODES });
        }
        if k_max + 1 > m {
            return Err(Error::Truncation { k_max, nodes: m });
        }
        let (nodes, weights) = gauss_gegenbauer(n, m);
        let equator_area = sphere_area(n - 2);
        let recurrence = Recurrence::new(n, k_max + 1);
        let norm = 1.0 / equator_area.sqrt();
        let mut basis = DMatrix::zeros(m, k_max + 1);
        let mut row = vec![0.0; k_max + 1];
        for (j, s) in nodes.iter().enumerate() {
            recurrence.eval(s.cos(), &mut row);
            for (k, v) in row.iter().enumerate() {
                basis[(j, k)] = v * norm;
            }
        }
        let surface_weights: Vec<f64> = weights.iter().map(|w| w * equator_area).collect();
        let mut analysis = basis.transpose();
        for (j, w) in surface_weights.iter().enumerate() {
            analysis.column_mut(j).scale_mut(*w);
        }
        Ok(Self {
            n,
            nodes,
            weights,
            surface_weights,
            equator_area,
            sphere_area: sphere_area(n - 1),
            recurrence,
            basis,
            analysis,
        })
    }
}

/// Quadrature grid on the colatitude interval, optionally conformally dilated.
///
/// A grid with dilation `beta` places its physical nodes at
/// `r_j = 2 atan(beta tan(s_j / 2))`, where `s_j` are the Gauss nodes of the
/// base rule. `beta < 1` concentrates nodes at the south pole, `beta > 1` at the
/// north pole. Spectral operations act on the pulled-back values
/// `stretch_j^{(n-2)/2} u(r_j)`, which is exact because the boundary operator
/// `dtn + gamma_n` is conformally covariant.
#[derive(Debug, Clone)]
pub struct RadialGrid {
    base: Arc<BaseGrid>,
    dilation: f64,
    nodes: Vec<f64>,
    stretch: Vec<f64>,
    weights: Vec<f64>,
    surface_weights: Vec<f64>,
}

/// Gauss grid with `m` nodes for dimension `n`, resolving degrees up to `m - 1`.
pub fn make_grid(n: usize, m: usize) -> Result<RadialGrid> {
    RadialGrid::new(n, m, m.saturating_sub(1))
}

impl RadialGrid {
    pub fn new(n: usize, m: usize, k_max: usize) -> Result<Self> {
        let base = Arc::new(BaseGrid::new(n, m, k_max)?);
        Ok(Self::from_base(base, 1.0))
    }

    fn from_base(base: Arc<BaseGrid>, dilation: f64) -> Self {
        let dim = base.n as i32;
        let stretch: Vec<f64> = base.nodes.iter().map(|s| dilation_stretch(*s, dilation)).collect();
        let nodes = base.nodes.iter().map(|s| dilate_colatitude(*s, dilation)).collect();
        let jac: Vec<f64> = stretch.iter().map(|l| l.powi(dim - 1)).collect();
        let weights = base.weights.iter().zip(&jac).map(|(w, j)| w * j).collect();
        let surface_weights = base.surface_weights.iter().zip(&jac).map(|(w, j)| w * j).collect();
        Self { base, dilation, nodes, stretch, weights, surface_weights }
    }

    /// Same base rule with a different dilation (not composed with the current one).
    pub fn with_dilation(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::Domain(format!("dilation {beta} must be positive")));
        }
        Ok(Self::from_base(self.base.clone(), beta))
    }

    pub fn undilated(&self) -> Self {
        Self::from_base(self.base.clone(), 1.0)
    }

    pub fn n(&self) -> usize {
        self.base.n
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn k_max(&self) -> usize {
        self.base.basis.ncols() - 1
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    /// `gamma_n = (n - 2) / 2`.
    pub fn gamma(&self) -> f64 {
        0.5 * (self.base.n as f64 - 2.0)
    }

    /// Critical exponent `n / (n - 2)`.
    pub fn tau(&self) -> f64 {
        let n = self.base.n as f64;
        n / (n - 2.0)
    }

    /// Physical colatitudes `r_j`.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Undilated Gauss nodes `s_j`.
    pub fn base_nodes(&self) -> &[f64] {
        &self.base.nodes
    }

    /// Weights for `int_0^pi f(r) sin^{n-2}(r) dr` at the physical nodes.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weights for the surface measure on `S^{n-1}` at the physical nodes.
    pub fn surface_weights(&self) -> &[f64] {
        &self.surface_weights
    }

    /// Conformal stretch `dr/ds` at each node (all ones when undilated).
    pub fn stretch(&self) -> &[f64] {
        &self.stretch
    }

    /// `|S^{n-2}|`.
    pub fn equator_area(&self) -> f64 {
        self.base.equator_area
    }

    /// `|S^{n-1}|`.
    pub fn sphere_area(&self) -> f64 {
        self.base.sphere_area
    }

    /// `int_{S^{n-1}} f dsigma` for nodal values `f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.surface_weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `stretch^gamma * u`: the values seen by the spectral basis.
    pub fn pull_back(&self, u: &[f64]) -> Vec<f64> {
        self.scaled(u, self.gamma())
    }

    /// Inverse of [`RadialGrid::pull_back`].
    pub fn push_forward(&self, g: &[f64]) -> Vec<f64> {
        self.scaled(g, -self.gamma())
    }

    /// `stretch^power * f`.
    pub fn scaled(&self, f: &[f64], power: f64) -> Vec<f64> {
        if self.dilation == 1.0 {
            return f.to_vec();
        }
        f.iter().zip(&self.stretch).map(|(v, l)| v * l.powf(power)).collect()
    }

    /// Orthonormal zonal coefficients of pulled-back nodal values.
    pub fn analyze_values(&self, g: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(g);
        (&self.base.analysis * v).as_slice().to_vec()
    }

    /// Nodal values of a zonal expansion (pulled-back frame).
    pub fn synthesize_values(&self, coeffs: &[f64]) -> Vec<f64> {
        let k = self.k_max() + 1;
        let mut c = DVector::zeros(k);
        for (dst, src) in c.iter_mut().zip(coeffs) {
            *dst = *src;
        }
        (&self.base.basis * c).as_slice().to_vec()
    }

    /// `Y_k(s_j)` for the base nodes.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.base.basis
    }

    /// Analysis matrix `Y^T diag(surface weights)` of the base rule.
    pub fn analysis(&self) -> &DMatrix<f64> {
        &self.base.analysis
    }

    /// Undilated surface weights.
    pub fn base_surface_weights(&self) -> &[f64] {
        &self.base.surface_weights
    }

    /// Evaluates a zonal expansion at an undilated colatitude `s`.
    pub fn eval_series(&self, coeffs: &[f64], s: f64) -> f64 {
        let mut q = vec![0.0; coeffs.len().min(self.k_max() + 1)];
        self.base.recurrence.eval(s.cos(), &mut q);
        let norm = 1.0 / self.base.equator_area.sqrt();
        q.iter().zip(coeffs).map(|(a, b)| a * b).sum::<f64>() * norm
    }

    /// Maps a physical colatitude back to the base coordinate.
    pub fn base_coordinate(&self, r: f64) -> f64 {
        dilate_colatitude(r, 1.0 / self.dilation)
    }

    pub(crate) fn same_base(&self, other: &RadialGrid) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
    }

    pub(crate) fn same_frame(&self, other: &RadialGrid) -> bool {
        self.same_base(other) && self.dilation == other.dilation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn weight_sums() {
        let g3 = make_grid(3, 64).unwrap();
        assert_relative_eq!(g3.weights().iter().sum::<f64>(), 2.0, max_relative = 1e-14);
        let g4 = make_grid(4, 64).unwrap();
        assert_relative_eq!(g4.weights().iter().sum::<f64>(), PI / 2.0, max_relative = 1e-14);
        assert_relative_eq!(g3.equator_area() * 2.0, 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(g3.sphere_area(), 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert_eq!(make_grid(3, 4).unwrap_err(), Error::GridTooSmall { nodes: 4, min: MIN_NODES });
        assert_eq!(make_grid(2, 64).unwrap_err(), Error::Dimension(2));
        assert!(matches!(RadialGrid::new(3, 16, 16), Err(Error::Truncation { .. })));
    }

    #[test]
    fn basis_is_orthonormal() {
        let g = make_grid(5, 48).unwrap();
        let y = g.basis();
        let gram = g.analysis() * y;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - expect).abs() < 1e-12, "({i},{j}) = {}", gram[(i, j)]);
            }
        }
    }

    #[test]
    fn dilation_preserves_total_measure() {
        let g = make_grid(4, 128).unwrap();
        for beta in [0.3, 1.0, 4.0] {
            let d = g.with_dilation(beta).unwrap();
            let ones = vec![1.0; d.len()];
            assert_relative_eq!(d.integrate(&ones), d.sphere_area(), max_relative = 1e-12);
            assert!(d.nodes().iter().all(|r| *r > 0.0 && *r < PI));
        }
        assert!(g.with_dilation(0.0).is_err());
    }
}
