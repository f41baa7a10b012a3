use std::sync::Arc;

use super::grid::RadialGrid;
use crate::curvature::CurvatureProfile;
use crate::error::{Error, Result};

/// Relative tail mass above which a function counts as unresolved.
pub const ALIASING_THRESHOLD: f64 = 1e-8;

/// Coefficients in the orthonormal zonal basis `Y_0, ..., Y_K` of
/// `L^2(S^{n-1})`. On a dilated grid these describe the pulled-back function.
#[derive(Debug, Clone, PartialEq)]
pub struct ZonalSpectrum {
    pub n: usize,
    pub coeffs: Vec<f64>,
}

impl ZonalSpectrum {
    pub fn zeros(n: usize, len: usize) -> Self {
        Self { n, coeffs: vec![0.0; len] }
    }

    pub fn gamma(&self) -> f64 {
        0.5 * (self.n as f64 - 2.0)
    }

    /// `sum (k + gamma_n) a_k^2`.
    pub fn energy(&self) -> f64 {
        let g = self.gamma();
        self.coeffs.iter().enumerate().map(|(k, a)| (k as f64 + g) * a * a).sum()
    }

    /// `sum (k + gamma_n) a_k b_k`.
    pub fn inner(&self, other: &ZonalSpectrum) -> f64 {
        let g = self.gamma();
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .enumerate()
            .map(|(k, (a, b))| (k as f64 + g) * a * b)
            .sum()
    }

    /// Dirichlet energy of the harmonic extension, `sum k a_k^2`.
    pub fn dirichlet(&self) -> f64 {
        self.coeffs.iter().enumerate().map(|(k, a)| k as f64 * a * a).sum()
    }

    /// Share of `sum a_k^2` carried by degrees above `K/2`.
    pub fn tail_mass(&self) -> f64 {
        let total: f64 = self.coeffs.iter().map(|a| a * a).sum();
        if total == 0.0 {
            return 0.0;
        }
        let cut = self.coeffs.len() / 2;
        self.coeffs[cut + 1..].iter().map(|a| a * a).sum::<f64>() / total
    }
}

/// A boundary function depending only on the colatitude, stored by its values
/// at the physical nodes of a grid.
#[derive(Debug, Clone)]
pub struct AxisymmetricFunction {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl AxisymmetricFunction {
    pub fn from_values(grid: Arc<RadialGrid>, values: Vec<f64>) -> Self {
        assert_eq!(grid.len(), values.len(), "value count must match the grid");
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|r| f(*r)).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Arc<RadialGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    /// Builds a function from pulled-back values.
    pub fn from_pulled_back(grid: Arc<RadialGrid>, g: &[f64]) -> Self {
        let values = grid.push_forward(g);
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn pulled_back(&self) -> Vec<f64> {
        self.grid.pull_back(&self.values)
    }

    pub fn spectrum(&self) -> ZonalSpectrum {
        analyze(self)
    }

    pub fn energy(&self) -> f64 {
        energy(self)
    }

    /// Energy inner product; both functions must live on the same grid frame.
    pub fn inner_e(&self, other: &AxisymmetricFunction) -> f64 {
        debug_assert!(self.grid.same_frame(&other.grid));
        self.spectrum().inner(&other.spectrum())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| f(*v)).collect() }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &AxisymmetricFunction, b: f64) -> Self {
        debug_assert!(self.grid.same_frame(&other.grid));
        let values = self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn integrate(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// `int f(u) dsigma`.
    pub fn integrate_map(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.grid.surface_weights().iter().zip(&self.values).map(|(w, v)| w * f(*v)).sum()
    }

    /// Evaluates the band-limited interpolant at an arbitrary colatitude.
    pub fn eval(&self, r: f64) -> f64 {
        let coeffs = self.spectrum().coeffs;
        let s = self.grid.base_coordinate(r);
        let g = self.grid.eval_series(&coeffs, s);
        if self.grid.dilation() == 1.0 {
            g
        } else {
            let l = crate::geometry::dilation_stretch(s, self.grid.dilation());
            g * l.powf(-self.grid.gamma())
        }
    }

    /// Re-samples onto another grid through the spectral interpolant.
    pub fn regrid(&self, target: Arc<RadialGrid>) -> Self {
        if self.grid.same_frame(&target) {
            return Self { grid: target, values: self.values.clone() };
        }
        let coeffs = self.spectrum().coeffs;
        let (gamma, beta) = (self.grid.gamma(), self.grid.dilation());
        let values = target
            .nodes()
            .iter()
            .map(|r| {
                let s = self.grid.base_coordinate(*r);
                let l = crate::geometry::dilation_stretch(s, beta);
                self.grid.eval_series(&coeffs, s) * l.powf(-gamma)
            })
            .collect();
        Self { grid: target, values }
    }

    pub(crate) fn check_nonnegative(&self) -> Result<()> {
        match self.values.iter().enumerate().find(|(_, v)| **v < 0.0 || v.is_nan()) {
            Some((node, value)) => Err(Error::Negative { node, value: *value }),
            None => Ok(()),
        }
    }
}

/// Orthonormal zonal coefficients of `u` (pulled back to the base frame).
pub fn analyze(u: &AxisymmetricFunction) -> ZonalSpectrum {
    let g = u.pulled_back();
    ZonalSpectrum { n: u.grid.n(), coeffs: u.grid.analyze_values(&g) }
}

/// Nodal function with the given zonal coefficients.
pub fn synthesize(spec: &ZonalSpectrum, grid: &Arc<RadialGrid>) -> Result<AxisymmetricFunction> {
    if spec.coeffs.len() > grid.k_max() + 1 {
        return Err(Error::Truncation { k_max: spec.coeffs.len() - 1, nodes: grid.len() });
    }
    let g = grid.synthesize_values(&spec.coeffs);
    Ok(AxisymmetricFunction::from_pulled_back(grid.clone(), &g))
}

/// Dirichlet-to-Neumann map of the unit ball: degree-`k` harmonics scale by `k`.
pub fn dtn_apply(spec: &ZonalSpectrum) -> ZonalSpectrum {
    let coeffs = spec.coeffs.iter().enumerate().map(|(k, a)| k as f64 * a).collect();
    ZonalSpectrum { n: spec.n, coeffs }
}

/// `E(u) = int |grad u|^2 dv + gamma_n int u^2 dsigma`, computed as
/// `sum (k + gamma_n) a_k^2`. Logs a warning when `u` is under-resolved.
pub fn energy(u: &AxisymmetricFunction) -> f64 {
    let spec = analyze(u);
    let tail = spec.tail_mass();
    if tail > ALIASING_THRESHOLD {
        log::warn!("energy of an under-resolved function (tail mass {tail:.2e})");
    }
    spec.energy()
}

/// Like [`energy`] but fails when the tail mass exceeds the aliasing threshold.
pub fn energy_checked(u: &AxisymmetricFunction) -> Result<f64> {
    let spec = analyze(u);
    let tail = spec.tail_mass();
    if tail > ALIASING_THRESHOLD {
        return Err(Error::Aliasing { tail, threshold: ALIASING_THRESHOLD });
    }
    Ok(spec.energy())
}

/// The Robin boundary operator `dtn(u) + gamma_n u` at the physical nodes.
pub fn robin_apply(u: &AxisymmetricFunction) -> Vec<f64> {
    let grid = &u.grid;
    let g = grid.gamma();
    // the map sends constants to gamma times themselves; transforming only the
    // deviation from the mean keeps round-off proportional to that deviation
    let pulled = u.pulled_back();
    let w = grid.base_surface_weights();
    let mean = pulled.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / grid.sphere_area();
    let dev: Vec<f64> = pulled.iter().map(|v| v - mean).collect();
    let mut coeffs = grid.analyze_values(&dev);
    coeffs[0] = 0.0;
    for (k, a) in coeffs.iter_mut().enumerate() {
        *a *= k as f64;
    }
    let d = grid.synthesize_values(&coeffs);
    let out: Vec<f64> = d.iter().zip(&pulled).map(|(a, v)| a + g * v).collect();
    grid.scaled(&out, -0.5 * grid.n() as f64)
}

pub(crate) fn check_exponent(p: f64, tau: f64) -> Result<()> {
    if !(p > 1.0 && p <= tau * (1.0 + 1e-12)) {
        return Err(Error::Exponent { p, tau });
    }
    Ok(())
}

/// Nodal values of `h` on the grid of `u`.
pub fn curvature_on(u: &AxisymmetricFunction, h: &CurvatureProfile) -> Vec<f64> {
    u.grid.nodes().iter().map(|r| h.value(*r)).collect()
}

/// `J_p(u) = int h u^{p+1} dsigma` (no `gamma_n` prefactor).
pub fn j_functional(u: &AxisymmetricFunction, h: &CurvatureProfile, p: f64) -> Result<f64> {
    check_exponent(p, u.grid.tau())?;
    u.check_nonnegative()?;
    Ok(j_nodal(u, &curvature_on(u, h), p))
}

pub(crate) fn j_nodal(u: &AxisymmetricFunction, h: &[f64], p: f64) -> f64 {
    let w = u.grid.surface_weights();
    u.values
        .iter()
        .zip(h)
        .zip(w)
        .map(|((v, hv), wj)| wj * hv * v.max(0.0).powf(p + 1.0))
        .sum()
}

/// Pointwise residual `dtn(u) + gamma_n u - mu gamma_n h u^p`.
pub fn residual(
    u: &AxisymmetricFunction,
    h: &CurvatureProfile,
    p: f64,
    mu: f64,
) -> Result<AxisymmetricFunction> {
    u.check_nonnegative()?;
    Ok(residual_nodal(u, &curvature_on(u, h), p, mu))
}

pub(crate) fn residual_nodal(u: &AxisymmetricFunction, h: &[f64], p: f64, mu: f64) -> AxisymmetricFunction {
    let g = u.grid.gamma();
    let robin = robin_apply(u);
    let values = robin
        .iter()
        .zip(&u.values)
        .zip(h)
        .map(|((b, v), hv)| b - mu * g * hv * v.max(0.0).powf(p))
        .collect();
    AxisymmetricFunction { grid: u.grid.clone(), values }
}

/// Axial component of the boundary mass centre,
/// `int (1 - cos r) u^{tau+1} dsigma / int u^{tau+1} dsigma`, in coordinates
/// with the south pole at the origin. Lies in `[0, 2]`.
pub fn mass_center(u: &AxisymmetricFunction) -> Result<f64> {
    u.check_nonnegative()?;
    let e = u.grid.tau() + 1.0;
    let w = u.grid.surface_weights();
    let (mut num, mut den) = (0.0, 0.0);
    for ((v, r), wj) in u.values.iter().zip(u.grid.nodes()).zip(w) {
        let m = wj * v.powf(e);
        // 1 - cos r = 2 sin^2(r/2) avoids cancellation near the south pole
        num += m * 2.0 * (0.5 * r).sin().powi(2);
        den += m;
    }
    if den <= 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::make_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(n: usize, m: usize) -> Arc<RadialGrid> {
        Arc::new(make_grid(n, m).unwrap())
    }

    fn zonal(grid: &Arc<RadialGrid>, k: usize) -> AxisymmetricFunction {
        let mut spec = ZonalSpectrum::zeros(grid.n(), grid.k_max() + 1);
        spec.coeffs[k] = 1.0;
        synthesize(&spec, grid).unwrap()
    }

    #[test]
    fn constant_has_single_mode() {
        for n in 3..7 {
            let g = grid(n, 32);
            let spec = AxisymmetricFunction::constant(g.clone(), 1.0).spectrum();
            assert_relative_eq!(spec.coeffs[0], g.sphere_area().sqrt(), max_relative = 1e-13);
            assert!(spec.coeffs[1..].iter().all(|a| a.abs() < 1e-13));
        }
    }

    #[test]
    fn degree_one_is_single_mode() {
        let g = grid(4, 32);
        let u = AxisymmetricFunction::from_fn(g, |r| r.cos());
        let spec = u.spectrum();
        assert!(spec.coeffs[1].abs() > 0.1);
        for (k, a) in spec.coeffs.iter().enumerate() {
            if k != 1 {
                assert!(a.abs() < 1e-13, "a_{k} = {a}");
            }
        }
    }

    #[test]
    fn dtn_on_modes() {
        let g = grid(3, 32);
        let c = AxisymmetricFunction::constant(g.clone(), 2.5);
        assert!(dtn_apply(&c.spectrum()).coeffs.iter().all(|a| a.abs() < 1e-12));
        for k in [1usize, 2, 7, 31] {
            let y = zonal(&g, k);
            let out = synthesize(&dtn_apply(&y.spectrum()), &g).unwrap();
            for (a, b) in out.values().iter().zip(y.values()) {
                assert!((a - k as f64 * b).abs() < 1e-12 * k as f64 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn energy_examples() {
        let g = grid(3, 64);
        assert_relative_eq!(energy(&AxisymmetricFunction::constant(g.clone(), 1.0)), 2.0 * PI, max_relative = 1e-13);
        assert_relative_eq!(energy(&zonal(&g, 1)), 1.5, max_relative = 1e-13);
        assert_eq!(energy(&AxisymmetricFunction::constant(g, 0.0)), 0.0);
    }

    #[test]
    fn aliasing_is_flagged() {
        let g = grid(3, 16);
        let spiky = AxisymmetricFunction::from_fn(g, |r| (1.0 / (0.001 + r * r)).sqrt());
        assert!(matches!(energy_checked(&spiky), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn j_and_residual_for_constant() {
        let g = grid(4, 32);
        let one = AxisymmetricFunction::constant(g.clone(), 1.0);
        let h = CurvatureProfile::constant(1.0);
        assert_relative_eq!(j_functional(&one, &h, 1.5).unwrap(), g.sphere_area(), max_relative = 1e-13);
        let res = residual(&one, &h, 1.7, 1.0).unwrap();
        assert!(res.sup_norm() < 1e-12, "{}", res.sup_norm());
        let neg = one.map(|v| v - 2.0);
        assert!(matches!(j_functional(&neg, &h, 1.5), Err(Error::Negative { .. })));
        assert!(matches!(j_functional(&one, &h, 2.5), Err(Error::Exponent { .. })));
    }

    #[test]
    fn mass_center_of_constant() {
        for n in 3..7 {
            let g = grid(n, 32);
            let q = mass_center(&AxisymmetricFunction::constant(g, 1.0)).unwrap();
            assert_relative_eq!(q, 1.0, max_relative = 1e-13);
        }
        let g = grid(3, 16);
        assert_eq!(mass_center(&AxisymmetricFunction::constant(g, 0.0)), Err(Error::ZeroFunction));
    }

    #[test]
    fn green_identity() {
        // int |grad u|^2 = sum k a_k^2 = int u dtn(u) dsigma
        let g = grid(5, 64);
        let u = AxisymmetricFunction::from_fn(g.clone(), |r| (0.3 * r.cos()).exp() + 0.2 * (2.0 * r).sin().powi(2));
        let spec = u.spectrum();
        let du = synthesize(&dtn_apply(&spec), &g).unwrap();
        let pairing: f64 = g.integrate(&u.values().iter().zip(du.values()).map(|(a, b)| a * b).collect::<Vec<_>>());
        assert_relative_eq!(spec.dirichlet(), pairing, max_relative = 1e-10);
    }

    #[test]
    fn eval_and_regrid_reproduce_smooth_function() {
        let g = grid(4, 64);
        let f = |r: f64| 1.0 + 0.4 * r.cos() + 0.1 * (3.0 * r).cos();
        let u = AxisymmetricFunction::from_fn(g.clone(), f);
        for r in [0.0, 0.3, 1.7, PI] {
            assert!((u.eval(r) - f(r)).abs() < 1e-12);
        }
        let d = Arc::new(g.with_dilation(0.6).unwrap());
        let v = u.regrid(d.clone());
        for (r, val) in d.nodes().iter().zip(v.values()) {
            assert!((val - f(*r)).abs() < 1e-11);
        }
        assert_relative_eq!(v.energy(), u.energy(), max_relative = 1e-9);
    }

    proptest! {
        #[test]
        fn analyze_synthesize_round_trip(coeffs in prop::collection::vec(-1.0f64..1.0, 24)) {
            let g = grid(4, 32);
            let spec = ZonalSpectrum { n: 4, coeffs: coeffs.clone() };
            let back = analyze(&synthesize(&spec, &g).unwrap());
            for (a, b) in back.coeffs.iter().zip(&coeffs) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn mass_center_reflection(c1 in -0.5f64..0.5, c2 in -0.3f64..0.3) {
            let g = grid(4, 48);
            let f = move |r: f64| (c1 * r.cos() + c2 * (2.0 * r).cos()).exp();
            let u = AxisymmetricFunction::from_fn(g.clone(), f);
            let flipped = AxisymmetricFunction::from_fn(g, move |r| f(PI - r));
            let q = mass_center(&u).unwrap();
            let qf = mass_center(&flipped).unwrap();
            prop_assert!((q + qf - 2.0).abs() < 1e-10);
            prop_assert!((0.0..=2.0).contains(&q));
        }
    }
}
