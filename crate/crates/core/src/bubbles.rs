//! The explicit solutions of the `h = 1` critical problem, their conformal
//! reparametrization, and the decomposition `u = t u_lambda + v` near a bubble.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureProfile;
use crate::error::{Error, Result};
use crate::geometry::BallPoint;
use crate::spectral::{mass_center, AxisymmetricFunction, RadialGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    South,
    North,
}

impl Pole {
    pub fn opposite(self) -> Self {
        match self {
            Pole::South => Pole::North,
            Pole::North => Pole::South,
        }
    }

    /// Colatitude of the pole.
    pub fn colatitude(self) -> f64 {
        match self {
            Pole::South => 0.0,
            Pole::North => PI,
        }
    }
}

/// A pole-centred bubble. `lambda -> 0` concentrates it at `pole`; `lambda = 1`
/// is the constant `1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bubble {
    pub lambda: f64,
    pub pole: Pole,
    pub n: usize,
}

impl Bubble {
    pub fn new(lambda: f64, pole: Pole, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::Dimension(n));
        }
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Domain(format!("bubble scale {lambda} outside (0, 1]")));
        }
        Ok(Self { lambda, pole, n })
    }

    pub fn south(lambda: f64, n: usize) -> Result<Self> {
        Self::new(lambda, Pole::South, n)
    }

    /// Bubble whose profile is `(L / (L^2 cos^2(r/2) + sin^2(r/2)))^gamma` in the
    /// south-pole colatitude; `L > 1` is a north bubble with `lambda = 1/L`.
    pub fn from_south_scale(scale: f64, n: usize) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Domain(format!("bubble scale {scale} must be positive")));
        }
        if scale <= 1.0 {
            Self::new(scale, Pole::South, n)
        } else {
            Self::new(1.0 / scale, Pole::North, n)
        }
    }

    /// The scale `L` with `value(r) = (L / (L^2 cos^2(r/2) + sin^2(r/2)))^gamma`.
    pub fn south_scale(&self) -> f64 {
        match self.pole {
            Pole::South => self.lambda,
            Pole::North => 1.0 / self.lambda,
        }
    }

    pub fn gamma(&self) -> f64 {
        0.5 * (self.n as f64 - 2.0)
    }

    /// Boundary value at colatitude `r` (from the south pole).
    pub fn value(&self, r: f64) -> f64 {
        bubble_boundary(self, r)
    }

    /// The bubble sampled at the nodes of `grid`.
    pub fn on_grid(&self, grid: &Arc<RadialGrid>) -> AxisymmetricFunction {
        AxisymmetricFunction::from_fn(grid.clone(), |r| self.value(r))
    }

    /// The bubble on its own substituted grid built from `grid`'s base rule.
    pub fn on_substituted(&self, grid: &RadialGrid) -> AxisymmetricFunction {
        let g = Arc::new(substituted_grid(self, grid));
        self.on_grid(&g)
    }
}

/// `(lambda / (lambda^2 cos^2(r/2) + sin^2(r/2)))^gamma`, reflected `r -> pi - r`
/// for north bubbles.
pub fn bubble_boundary(b: &Bubble, r: f64) -> f64 {
    let rr = match b.pole {
        Pole::South => r,
        Pole::North => PI - r,
    };
    let (sn, cs) = (0.5 * rr).sin_cos();
    let l = b.lambda;
    (l / (l * l * cs * cs + sn * sn)).powf(b.gamma())
}

/// Harmonic extension of the bubble into the ball,
/// `(4 beta / ((beta-1)^2 |z|_S^2 + 4 s (beta-1) + 4 beta))^gamma` with
/// `beta = 1 / L`, `L` the south scale and `|z|_S` the distance to the south pole.
pub fn bubble_interior(b: &Bubble, z: &BallPoint) -> f64 {
    let beta = 1.0 / b.south_scale();
    let bm = beta - 1.0;
    let d = bm * bm * z.south_dist_sq() + 4.0 * z.s * bm + 4.0 * beta;
    (4.0 * beta / d).powf(b.gamma())
}

/// The base rule of `grid` dilated so that the bubble pulls back to the constant
/// `1`: nodes `r = 2 atan(L tan(s/2))`. Replaces any dilation `grid` carries.
pub fn substituted_grid(b: &Bubble, grid: &RadialGrid) -> RadialGrid {
    grid.with_dilation(b.south_scale()).expect("bubble scale is positive")
}

/// Conformal reparametrization `(T u)(r) = stretch(r)^gamma u(2 atan(beta tan(r/2)))`.
///
/// The result lives on the grid whose dilation is `dilation(u) / beta` and
/// shares `u`'s pulled-back values, so the map is exact on grid data.
pub fn t_phi(u: &AxisymmetricFunction, beta: f64) -> Result<AxisymmetricFunction> {
    let grid = u.grid();
    let target = Arc::new(grid.with_dilation(grid.dilation() / beta)?);
    Ok(AxisymmetricFunction::from_pulled_back(target, &u.pulled_back()))
}

/// Settings for the best-bubble fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaOptions {
    /// Radius of the neighbourhood; `None` uses `0.1 sqrt(gamma_n |S^{n-1}|)`.
    pub rho0: Option<f64>,
    /// Additionally require `|t0 - 1| <= t_tolerance`.
    pub require_t_near_one: bool,
    pub t_tolerance: f64,
    /// Smallest bubble scale searched.
    pub lambda_min: f64,
}

impl Default for SigmaOptions {
    fn default() -> Self {
        Self { rho0: None, require_t_near_one: false, t_tolerance: 0.1, lambda_min: 1e-4 }
    }
}

/// `0.1 sqrt(gamma_n |S^{n-1}|)`.
pub fn default_rho0(n: usize) -> f64 {
    let gamma = 0.5 * (n as f64 - 2.0);
    0.1 * (gamma * crate::spectral::sphere_area(n - 1)).sqrt()
}

/// Best approximation of `u` by a multiple of a bubble at `pole`.
#[derive(Debug, Clone)]
pub struct SigmaReport {
    pub t0: f64,
    pub lambda_star: f64,
    pub pole: Pole,
    /// `||v||_E`.
    pub rho_v: f64,
    /// Axial mass centre, measured from the south pole.
    pub q_n: f64,
    /// Distance of the mass centre from `pole`.
    pub q_distance: f64,
    pub rho0: f64,
    pub inside_sigma: bool,
    /// `<v, u_{lambda*}>_E`.
    pub fit_inner: f64,
    /// True when the optimum sits at the edge of the searched scale range.
    pub at_search_edge: bool,
    pub v: AxisymmetricFunction,
}

impl SigmaReport {
    pub fn bubble(&self, n: usize) -> Bubble {
        Bubble { lambda: self.lambda_star, pole: self.pole, n }
    }
}

struct Fit {
    inner: f64,
    self_energy: f64,
    bubble: AxisymmetricFunction,
}

fn fit_at(u: &AxisymmetricFunction, u_spec: &crate::spectral::ZonalSpectrum, lambda: f64, pole: Pole, n: usize) -> Fit {
    let b = Bubble { lambda, pole, n };
    let bubble = b.on_grid(u.grid());
    let bs = bubble.spectrum();
    Fit { inner: u_spec.inner(&bs), self_energy: bs.energy(), bubble }
}

/// Minimizes `||u - t u_lambda||_E` over `t` and `lambda in [lambda_min, 1]`.
/// The optimal `t` is `<u, u_lambda>_E / E(u_lambda)` for each `lambda`, so the
/// outer search maximizes `<u, u_lambda>_E^2 / E(u_lambda)`: a coarse scan in
/// `log lambda` followed by golden section. Ties go to the larger `lambda`.
pub fn sigma_decompose(u: &AxisymmetricFunction, pole: Pole, opts: &SigmaOptions) -> Result<SigmaReport> {
    let n = u.grid().n();
    let u_spec = u.spectrum();
    let lo = opts.lambda_min.max(1e-12).ln();
    let score = |x: f64| {
        let f = fit_at(u, &u_spec, x.exp().min(1.0), pole, n);
        if f.self_energy > 0.0 {
            f.inner * f.inner / f.self_energy
        } else {
            0.0
        }
    };
    const SCAN: usize = 96;
    let xs: Vec<f64> = (0..=SCAN).map(|i| lo * (1.0 - i as f64 / SCAN as f64)).collect();
    let vals: Vec<f64> = xs.iter().map(|x| score(*x)).collect();
    // scan from the largest lambda down; only a strict improvement moves the pick
    let mut best = SCAN;
    for i in (0..SCAN).rev() {
        if vals[i] > vals[best] * (1.0 + 1e-13) {
            best = i;
        }
    }
    let at_search_edge = best == 0;
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(SCAN)]);
    let mut x_star = xs[best];
    if best > 0 && best < SCAN {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (score(c), score(d));
        while b - a > 1e-10 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = score(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = score(d);
            }
        }
        let mid = 0.5 * (a + b);
        if score(mid) >= vals[best] {
            x_star = mid;
        }
    }
    if at_search_edge {
        log::warn!("best bubble fit at the smallest searched scale {:.3e}", x_star.exp());
    }
    let lambda_star = x_star.exp().min(1.0);
    let fit = fit_at(u, &u_spec, lambda_star, pole, n);
    if fit.self_energy <= 0.0 {
        return Err(Error::NoConvergence(format!("bubble fit degenerate at lambda {lambda_star:.3e}")));
    }
    let t0 = fit.inner / fit.self_energy;
    let v = u.combine(1.0, &fit.bubble, -t0);
    let v_spec = v.spectrum();
    let rho_v = v_spec.energy().max(0.0).sqrt();
    let fit_inner = v_spec.inner(&fit.bubble.spectrum());
    let q_n = mass_center(u)?;
    let q_distance = match pole {
        Pole::South => q_n,
        Pole::North => 2.0 - q_n,
    };
    let rho0 = opts.rho0.unwrap_or_else(|| default_rho0(n));
    let mut inside_sigma = rho_v <= rho0 && q_distance <= rho0;
    if opts.require_t_near_one {
        inside_sigma &= (t0 - 1.0).abs() <= opts.t_tolerance;
    }
    Ok(SigmaReport { t0, lambda_star, pole, rho_v, q_n, q_distance, rho0, inside_sigma, fit_inner, at_search_edge, v })
}

/// `<T v, 1>_E` and `<T v, x_n>_E` where `T` carries `u_{lambda*}` to the
/// constant and `x_n = -cos r` is the axial coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrthogonalityReport {
    pub constant: f64,
    pub axial: f64,
}

pub fn orthogonality_check(v: &AxisymmetricFunction, bubble: &Bubble) -> Result<OrthogonalityReport> {
    let tv = t_phi(v, bubble.south_scale())?;
    let g = tv.grid();
    let gamma = g.gamma();
    let vals = tv.values();
    let constant = gamma * g.integrate(vals);
    let axial_vals: Vec<f64> = vals.iter().zip(g.nodes()).map(|(a, r)| -a * r.cos()).collect();
    let axial = (1.0 + gamma) * g.integrate(&axial_vals);
    Ok(OrthogonalityReport { constant, axial })
}

/// `int u_{lambda*}^tau v dsigma` by quadrature on `v`'s grid.
pub fn critical_secondary_check(v: &AxisymmetricFunction, bubble: &Bubble) -> f64 {
    let g = v.grid();
    let tau = g.tau();
    let f: Vec<f64> = g.nodes().iter().zip(v.values()).map(|(r, a)| bubble.value(*r).powf(tau) * a).collect();
    g.integrate(&f)
}

/// `J_p(u_lambda)` for the bubble on its substituted grid.
pub fn bubble_j(h: &CurvatureProfile, p: f64, bubble: &Bubble, grid: &RadialGrid) -> f64 {
    let g = substituted_grid(bubble, grid);
    g.nodes()
        .iter()
        .zip(g.surface_weights())
        .map(|(r, w)| w * h.value(*r) * bubble.value(*r).powf(p + 1.0))
        .sum()
}

/// The bubble at `pole` with the largest `J_p` among scales in `[lambda_min, 1]`
/// (golden section in `log lambda` after a coarse scan).
pub fn best_bubble(h: &CurvatureProfile, p: f64, pole: Pole, lambda_min: f64, grid: &RadialGrid) -> (Bubble, f64) {
    let n = grid.n();
    let j = |x: f64| bubble_j(h, p, &Bubble { lambda: x.exp().min(1.0), pole, n }, grid);
    let lo = lambda_min.ln();
    const SCAN: usize = 64;
    let xs: Vec<f64> = (0..=SCAN).map(|i| lo * (1.0 - i as f64 / SCAN as f64)).collect();
    let vals: Vec<f64> = xs.iter().map(|x| j(*x)).collect();
    let mut best = SCAN;
    for i in (0..SCAN).rev() {
        if vals[i] > vals[best] {
            best = i;
        }
    }
    let (mut a, mut b) = (xs[best.saturating_sub(1)], xs[(best + 1).min(SCAN)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (j(c), j(d));
    while b - a > 1e-9 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = j(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = j(d);
        }
    }
    let mut x = 0.5 * (a + b);
    let mut val = j(x);
    if vals[best] > val {
        x = xs[best];
        val = vals[best];
    }
    (Bubble { lambda: x.exp().min(1.0), pole, n }, val)
}

/// Which part of the boundary of the neighbourhood a sample sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryFamily {
    /// `||v||_E = rho0`.
    Residual,
    /// Mass-centre distance `= rho0`.
    MassCenter,
}

#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub u: AxisymmetricFunction,
    pub lambda: f64,
    pub rho_v: f64,
    pub q_distance: f64,
    pub family: BoundaryFamily,
}

/// Settings for [`boundary_samples`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySampling {
    pub count: usize,
    pub rho0: f64,
    pub pole: Pole,
    /// Scale range for the residual family.
    pub lambda_range: (f64, f64),
    /// Highest harmonic degree in the perturbation.
    pub max_degree: usize,
    pub seed: u64,
}

/// Functions in the constraint set on the boundary of the neighbourhood of the
/// bubbles at `pole`. Each is built in the frame where its bubble is the
/// constant: `t + w` with `w` spanned by degrees `2..=max_degree` (so it is
/// E-orthogonal to the constant and the axial coordinate, which makes
/// `(t, lambda)` the best fit) and `t^2 gamma |S| + E(w) = gamma |S|`.
/// Half the samples have `||w||_E = rho0`; the rest have a smaller `w` and a
/// scale chosen by bisection so that the mass centre sits at distance `rho0`.
pub fn boundary_samples(grid: &RadialGrid, cfg: &BoundarySampling) -> Result<Vec<BoundarySample>> {
    let n = grid.n();
    let gamma = grid.gamma();
    let total = gamma * grid.sphere_area();
    if !(cfg.rho0 > 0.0 && cfg.rho0 * cfg.rho0 < total) {
        return Err(Error::Domain(format!("rho0 = {} outside (0, sqrt(gamma |S|))", cfg.rho0)));
    }
    let kmax = cfg.max_degree.clamp(2, grid.k_max());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    let (llo, lhi) = (cfg.lambda_range.0.ln(), cfg.lambda_range.1.ln());
    let mut attempts = 0;
    while out.len() < cfg.count {
        attempts += 1;
        if attempts > 50 * cfg.count + 100 {
            return Err(Error::NoConvergence("could not draw nonnegative boundary samples".into()));
        }
        let family = if out.len() % 2 == 0 { BoundaryFamily::Residual } else { BoundaryFamily::MassCenter };
        let norm = match family {
            BoundaryFamily::Residual => cfg.rho0,
            BoundaryFamily::MassCenter => cfg.rho0 * rng.gen_range(0.0..1.0),
        };
        // perturbation coefficients with a decaying envelope
        let mut coeffs = vec![0.0; grid.k_max() + 1];
        let mut e = 0.0;
        for (k, c) in coeffs.iter_mut().enumerate().take(kmax + 1).skip(2) {
            *c = rng.gen_range(-1.0..1.0) / (k as f64 - 1.0);
            e += (k as f64 + gamma) * *c * *c;
        }
        if e == 0.0 {
            continue;
        }
        let s = norm / e.sqrt();
        let t = (1.0 - norm * norm / total).sqrt();
        let pulled: Vec<f64> = grid.synthesize_values(&coeffs).iter().map(|w| t + s * w).collect();
        if pulled.iter().any(|v| *v < 0.0) {
            continue;
        }
        let build = |scale: f64| -> AxisymmetricFunction {
            let b = Bubble::from_south_scale(scale, n).unwrap();
            let g = Arc::new(substituted_grid(&b, grid));
            AxisymmetricFunction::from_pulled_back(g, &pulled)
        };
        let to_scale = |lambda: f64| match cfg.pole {
            Pole::South => lambda,
            Pole::North => 1.0 / lambda,
        };
        let q_dist = |u: &AxisymmetricFunction| -> Result<f64> {
            let q = mass_center(u)?;
            Ok(match cfg.pole {
                Pole::South => q,
                Pole::North => 2.0 - q,
            })
        };
        let (u, lambda) = match family {
            BoundaryFamily::Residual => {
                let lambda = rng.gen_range(llo..lhi).exp();
                (build(to_scale(lambda)), lambda)
            }
            BoundaryFamily::MassCenter => {
                let (mut a, mut b) = (1e-6f64.ln(), 0.0);
                if q_dist(&build(to_scale(1.0)))? < cfg.rho0 {
                    continue;
                }
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    if q_dist(&build(to_scale(mid.exp())))? < cfg.rho0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let lambda = (0.5 * (a + b)).exp();
                (build(to_scale(lambda)), lambda)
            }
        };
        let q_distance = q_dist(&u)?;
        if family == BoundaryFamily::Residual && q_distance > cfg.rho0 {
            continue;
        }
        out.push(BoundarySample { u, lambda, rho_v: norm, q_distance, family });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{energy, make_grid, residual, synthesize, ZonalSpectrum};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn base(n: usize, m: usize) -> RadialGrid {
        make_grid(n, m).unwrap()
    }

    #[test]
    fn closed_form_values() {
        for n in 3..6 {
            let g = 0.5 * (n as f64 - 2.0);
            let one = Bubble::south(1.0, n).unwrap();
            for r in [0.0, 0.4, 2.0, PI] {
                assert_relative_eq!(one.value(r), 1.0, max_relative = 1e-15);
            }
            let b = Bubble::south(0.3, n).unwrap();
            assert_relative_eq!(b.value(0.0), 0.3f64.powf(-g), max_relative = 1e-14);
            assert_relative_eq!(b.value(PI), 0.3f64.powf(g), max_relative = 1e-14);
        }
        let b = Bubble::south(0.5, 3).unwrap();
        assert_relative_eq!(b.value(0.5 * PI), 0.8f64.sqrt(), max_relative = 1e-14);
        let north = Bubble::new(0.5, Pole::North, 3).unwrap();
        assert_relative_eq!(north.value(0.7), b.value(PI - 0.7), max_relative = 1e-14);
        assert!(Bubble::south(1.5, 3).is_err());
        assert!(Bubble::south(0.0, 3).is_err());
    }

    #[test]
    fn interior_matches_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 4, 5] {
            for pole in [Pole::South, Pole::North] {
                let b = Bubble::new(0.3, pole, n).unwrap();
                for _ in 0..50 {
                    let r = rng.gen_range(0.0..PI);
                    let z = BallPoint::on_sphere(n, r);
                    assert_relative_eq!(bubble_interior(&b, &z), b.value(r), max_relative = 1e-10);
                }
            }
        }
        let one = Bubble::south(1.0, 4).unwrap();
        assert_relative_eq!(bubble_interior(&one, &BallPoint::new(vec![0.1, 0.2, 0.0], 0.3)), 1.0);
    }

    #[test]
    fn interior_is_harmonic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 4;
        let b = Bubble::south(0.4, n).unwrap();
        let h = 1e-3;
        for _ in 0..10 {
            let mut z = [0.0; 4];
            loop {
                for c in z.iter_mut() {
                    *c = rng.gen_range(-0.6..0.6);
                }
                if z.iter().map(|c| c * c).sum::<f64>() < 0.36 {
                    break;
                }
            }
            let f = |p: &[f64; 4]| bubble_interior(&b, &BallPoint::new(p[..3].to_vec(), p[3]));
            let mut lap = -2.0 * n as f64 * f(&z);
            for i in 0..n {
                let mut a = z;
                a[i] += h;
                let mut c = z;
                c[i] -= h;
                lap += f(&a) + f(&c);
            }
            lap /= h * h;
            assert!(lap.abs() < 1e-4 * f(&z), "laplacian {lap}");
        }
    }

    #[test]
    fn substituted_grid_normalizes_bubbles() {
        for n in [3usize, 4, 5] {
            let grid = base(n, 64);
            let gamma = grid.gamma();
            let tau = grid.tau();
            for lambda in [0.01, 0.05, 0.1, 0.3, 0.5, 0.9, 1.0] {
                let b = Bubble::south(lambda, n).unwrap();
                let u = b.on_substituted(&grid);
                assert!(u.grid().nodes().iter().all(|r| *r > 0.0 && *r < PI));
                let target = gamma * grid.sphere_area();
                assert_relative_eq!(energy(&u), target, max_relative = 1e-10);
                let lp: Vec<f64> = u.values().iter().map(|v| v.powf(tau + 1.0)).collect();
                assert_relative_eq!(u.grid().integrate(&lp), grid.sphere_area(), max_relative = 1e-10);
                let res = residual(&u, &CurvatureProfile::constant(1.0), tau, 1.0).unwrap();
                let scale = u.sup_norm().powf(tau);
                assert!(res.sup_norm() < 1e-8 * scale.max(1.0), "n={n} lambda={lambda}");
            }
        }
        let g = base(3, 16);
        let same = substituted_grid(&Bubble::south(1.0, 3).unwrap(), &g);
        assert_eq!(same.nodes(), g.nodes());
    }

    #[test]
    fn undilated_grid_agrees_for_mild_bubbles() {
        // independent route: plain Gauss rule, no substitution
        let grid = Arc::new(base(4, 256));
        let u = Bubble::south(0.5, 4).unwrap().on_grid(&grid);
        assert_relative_eq!(energy(&u), grid.sphere_area(), max_relative = 1e-10);
    }

    #[test]
    fn bubble_fails_subcritical_equation() {
        let grid = base(4, 64);
        let u = Bubble::south(0.3, 4).unwrap().on_substituted(&grid);
        let res = residual(&u, &CurvatureProfile::constant(1.0), 1.5, 1.0).unwrap();
        assert!(res.sup_norm() > 1e-3);
    }

    #[test]
    fn t_phi_maps_bubbles() {
        let grid = Arc::new(base(4, 64));
        let one = AxisymmetricFunction::constant(grid.clone(), 1.0);
        let tb = t_phi(&one, 1.0 / 0.3).unwrap();
        let b = Bubble::south(0.3, 4).unwrap();
        for (r, v) in tb.grid().nodes().iter().zip(tb.values()) {
            assert_relative_eq!(*v, b.value(*r), max_relative = 1e-12);
        }
        let u = b.on_grid(&Arc::new(substituted_grid(&b, &grid)));
        let back = t_phi(&u, 0.3).unwrap();
        assert!(back.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let same = t_phi(&u, 1.0).unwrap();
        for (a, b) in same.values().iter().zip(u.values()) {
            assert_relative_eq!(*a, *b, max_relative = 1e-14);
        }
    }

    #[test]
    fn decompose_exact_bubble() {
        let grid = base(4, 128);
        let u = Bubble::south(0.4, 4).unwrap().on_substituted(&grid);
        let rep = sigma_decompose(&u, Pole::South, &SigmaOptions::default()).unwrap();
        assert_relative_eq!(rep.t0, 1.0, max_relative = 1e-8);
        assert_relative_eq!(rep.lambda_star, 0.4, max_relative = 1e-6);
        assert!(rep.rho_v < 1e-6);
    }

    fn perturbed(lambda: f64, amp: f64, degree: usize, n: usize) -> AxisymmetricFunction {
        let grid = Arc::new(substituted_grid(&Bubble::south(lambda, n).unwrap(), &base(n, 128)));
        let mut spec = ZonalSpectrum::zeros(n, grid.k_max() + 1);
        spec.coeffs[degree] = amp;
        let w = synthesize(&spec, &grid).unwrap();
        let b = Bubble::south(lambda, n).unwrap().on_grid(&grid);
        b.combine(0.9, &w, 1.0)
    }

    #[test]
    fn decomposition_recovers_orthogonal_part() {
        let n = 4;
        let u = perturbed(0.4, 0.3, 5, n);
        let rep = sigma_decompose(&u, Pole::South, &SigmaOptions::default()).unwrap();
        assert_relative_eq!(rep.lambda_star, 0.4, max_relative = 1e-6);
        assert_relative_eq!(rep.t0, 0.9, max_relative = 1e-6);
        // E-norm of the planted degree-5 mode in the pulled-back frame
        let expect = 0.3 * (5.0 + 1.0f64).sqrt();
        assert_relative_eq!(rep.rho_v, expect, max_relative = 1e-6);
        assert!(rep.fit_inner.abs() < 1e-8);
        let b = rep.bubble(n);
        assert!(critical_secondary_check(&rep.v, &b).abs() < 1e-7);
        let orth = orthogonality_check(&rep.v, &b).unwrap();
        assert!(orth.constant.abs() < 1e-6 && orth.axial.abs() < 1e-6, "{orth:?}");
    }

    #[test]
    fn orthogonality_negative_control() {
        let grid = Arc::new(base(4, 64));
        let b = Bubble::south(1.0, 4).unwrap();
        let c = AxisymmetricFunction::constant(grid.clone(), 0.2);
        let orth = orthogonality_check(&c, &b).unwrap();
        assert!(orth.constant.abs() > 0.1);
        let zero = AxisymmetricFunction::constant(grid.clone(), 0.0);
        let o = orthogonality_check(&zero, &b).unwrap();
        assert_eq!((o.constant, o.axial), (0.0, 0.0));
        assert_eq!(critical_secondary_check(&zero, &b), 0.0);
        let x = AxisymmetricFunction::from_fn(grid, |r| r.cos());
        assert!(critical_secondary_check(&x, &b).abs() < 1e-13);
    }

    #[test]
    fn mass_center_limits() {
        let grid = base(4, 128);
        let q1 = mass_center(&Bubble::south(1.0, 4).unwrap().on_substituted(&grid)).unwrap();
        assert_relative_eq!(q1, 1.0, max_relative = 1e-12);
        let mut prev = q1;
        for lambda in [0.3, 0.1, 0.01, 0.001] {
            let q = mass_center(&Bubble::south(lambda, 4).unwrap().on_substituted(&grid)).unwrap();
            assert!(q < prev);
            prev = q;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn boundary_samples_are_on_the_boundary() {
        let n = 4;
        let grid = base(n, 96);
        let rho0 = default_rho0(n);
        let cfg = BoundarySampling {
            count: 12,
            rho0,
            pole: Pole::South,
            lambda_range: (1e-3, 0.1),
            max_degree: 8,
            seed: 3,
        };
        let samples = boundary_samples(&grid, &cfg).unwrap();
        assert_eq!(samples.len(), 12);
        let target = grid.gamma() * grid.sphere_area();
        for s in &samples {
            assert_relative_eq!(energy(&s.u), target, max_relative = 1e-10);
            assert!(s.u.min_value() >= 0.0);
            let rep = sigma_decompose(&s.u, Pole::South, &SigmaOptions::default()).unwrap();
            assert_relative_eq!(rep.rho_v, s.rho_v, max_relative = 1e-5, epsilon = 1e-9);
            match s.family {
                BoundaryFamily::Residual => assert_relative_eq!(rep.rho_v, rho0, max_relative = 1e-5),
                BoundaryFamily::MassCenter => assert_relative_eq!(rep.q_distance, rho0, max_relative = 1e-8),
            }
            // triangle bound rho0 <= q + C ||v|| with C = 1 on this family
            assert!(rho0 <= s.q_distance + rep.rho_v + 1e-9);
        }
    }

    #[test]
    fn best_bubble_for_constant_curvature_is_flat() {
        let grid = base(4, 64);
        let h = CurvatureProfile::constant(1.0);
        let tau = grid.tau();
        let (_, j) = best_bubble(&h, tau, Pole::South, 1e-3, &grid);
        assert_relative_eq!(j, grid.sphere_area(), max_relative = 1e-10);
    }

    proptest! {
        #[test]
        fn t_phi_group_and_invariance(seed in 0u64..1000, beta in 0.2f64..5.0) {
            let grid = Arc::new(base(4, 64));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-0.2..0.2)).collect();
            let u = AxisymmetricFunction::from_fn(grid.clone(), |r| {
                1.0 + c.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * r).cos()).sum::<f64>()
            });
            let t = t_phi(&u, beta).unwrap();
            prop_assert!((energy(&t) - energy(&u)).abs() < 1e-8 * energy(&u));
            let tau = grid.tau();
            let pw = |f: &AxisymmetricFunction| f.integrate_map(|v| v.abs().powf(tau + 1.0));
            prop_assert!((pw(&t) - pw(&u)).abs() < 1e-8 * pw(&u));
            let back = t_phi(&t, 1.0 / beta).unwrap();
            for (a, b) in back.values().iter().zip(u.values()) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }
    }
}
