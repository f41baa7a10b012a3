//! The discrete problem on one grid, in pulled-back coefficients.
//!
//! On a grid with dilation `L`, a function `u` is carried by its pulled-back
//! values `g = stretch^gamma u` and their zonal coefficients `c`. Energy is
//! `sum (k + gamma) c_k^2`, and every integral of `h u^{p+1}` becomes a base-rule
//! sum with the modified weight `h~ = h stretch^{gamma (tau - p)}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::curvature::CurvatureProfile;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::spectral::{check_exponent, AxisymmetricFunction, RadialGrid};

/// Relative size below which negative nodal values count as round-off.
pub(crate) const ROUNDOFF: f64 = 1e-13;

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub grid: Arc<RadialGrid>,
    pub p: f64,
    pub gamma: f64,
    /// `h stretch^{gamma (tau - p)}` at the nodes.
    pub htilde: Vec<f64>,
    /// `k + gamma`.
    pub diag: Vec<f64>,
    /// `gamma |S^{n-1}|`.
    pub target: f64,
    /// `stretch^{-n/2}`, converting pulled-back residuals to physical ones.
    pub residual_scale: Vec<f64>,
}

impl Problem {
    pub fn new(grid: Arc<RadialGrid>, h: &CurvatureProfile, p: f64) -> Result<Self> {
        check_exponent(p, grid.tau())?;
        let gamma = grid.gamma();
        let weight = gamma * (grid.tau() - p);
        let hv: Vec<f64> = grid.nodes().iter().map(|r| h.value(*r)).collect();
        let htilde = grid.scaled(&hv, weight);
        let diag = (0..=grid.k_max()).map(|k| k as f64 + gamma).collect();
        let residual_scale = grid.scaled(&vec![1.0; grid.len()], -0.5 * grid.n() as f64);
        let target = gamma * grid.sphere_area();
        Ok(Self { grid, p, gamma, htilde, diag, target, residual_scale })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn coeffs_of(&self, u: &AxisymmetricFunction) -> Vec<f64> {
        let u = if u.grid().same_frame(&self.grid) { u.clone() } else { u.regrid(self.grid.clone()) };
        self.grid.analyze_values(&u.pulled_back())
    }

    pub fn nodal(&self, c: &[f64]) -> Vec<f64> {
        self.grid.synthesize_values(c)
    }

    pub fn analyze(&self, g: &[f64]) -> Vec<f64> {
        self.grid.analyze_values(g)
    }

    /// Nodal function of `c`; round-off negatives next to clipped zeros are set to zero.
    pub fn function(&self, c: &[f64]) -> AxisymmetricFunction {
        let mut g = self.nodal(c);
        let floor = -ROUNDOFF * g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for v in g.iter_mut() {
            if *v < 0.0 && *v >= floor {
                *v = 0.0;
            }
        }
        AxisymmetricFunction::from_pulled_back(self.grid.clone(), &g)
    }

    /// No node below `-ROUNDOFF * max |g|`.
    pub fn is_nonnegative(&self, g: &[f64]) -> bool {
        let floor = -ROUNDOFF * g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        g.iter().all(|v| *v >= floor)
    }

    pub fn energy(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.diag).map(|(a, d)| d * a * a).sum()
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.diag).map(|((x, y), d)| d * x * y).sum()
    }

    pub fn norm(&self, c: &[f64]) -> f64 {
        self.energy(c).max(0.0).sqrt()
    }

    /// `J_p` from pulled-back nodal values.
    pub fn j(&self, g: &[f64]) -> f64 {
        let w = self.grid.base_surface_weights();
        g.iter()
            .zip(&self.htilde)
            .zip(w)
            .map(|((v, h), w)| w * h * v.max(0.0).powf(self.p + 1.0))
            .sum()
    }

    /// `h~ g^p` at the nodes.
    fn nonlinearity(&self, g: &[f64]) -> Vec<f64> {
        g.iter().zip(&self.htilde).map(|(v, h)| h * v.max(0.0).powf(self.p)).collect()
    }

    /// `J_p` and the E-Riesz representative of `dJ_p` (coefficients).
    pub fn gradient(&self, c: &[f64]) -> (f64, Vec<f64>) {
        let g = self.nodal(c);
        let j = self.j(&g);
        let f = self.analyze(&self.nonlinearity(&g));
        let grad = f.iter().zip(&self.diag).map(|(a, d)| (self.p + 1.0) * a / d).collect();
        (j, grad)
    }

    /// Gradient minus its E-projection onto `c`.
    pub fn tangent_gradient(&self, c: &[f64]) -> (f64, Vec<f64>) {
        let (j, mut grad) = self.gradient(c);
        let e = self.energy(c);
        if e > 0.0 {
            let coef = self.inner(&grad, c) / e;
            for (gk, ck) in grad.iter_mut().zip(c) {
                *gk -= coef * ck;
            }
        }
        (j, grad)
    }

    /// Clips negative nodes and rescales onto the energy sphere.
    pub fn project(&self, c: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.nodal(c);
        let clipped = g.iter().any(|v| *v < 0.0);
        let mut c = if clipped {
            for v in g.iter_mut() {
                *v = v.max(0.0);
            }
            self.analyze(&g)
        } else {
            c.to_vec()
        };
        let e = self.energy(&c);
        if !(e > 0.0) {
            return Err(Error::ZeroFunction);
        }
        let s = (self.target / e).sqrt();
        for v in c.iter_mut() {
            *v *= s;
        }
        Ok(c)
    }

    /// Pulled-back coefficient residual `(k + gamma) c - mu gamma analyze(h~ g^p)`.
    pub fn coefficient_residual(&self, c: &[f64], mu: f64) -> Vec<f64> {
        let g = self.nodal(c);
        let f = self.analyze(&self.nonlinearity(&g));
        c.iter().zip(&self.diag).zip(&f).map(|((ck, d), fk)| d * ck - mu * self.gamma * fk).collect()
    }

    /// Physical residual `dtn(u) + gamma u - mu gamma h u^p` at the nodes, and the
    /// size of the nonlinear term `max |mu gamma h u^p|` for relative tolerances.
    pub fn physical_residual(&self, c: &[f64], mu: f64) -> (Vec<f64>, f64) {
        let g = self.nodal(c);
        let lin: Vec<f64> = c.iter().zip(&self.diag).map(|(a, d)| a * d).collect();
        let bg = self.nodal(&lin);
        let nl = self.nonlinearity(&g);
        let mut scale = 0.0f64;
        let res = bg
            .iter()
            .zip(&nl)
            .zip(&self.residual_scale)
            .map(|((b, f), s)| {
                scale = scale.max((mu * self.gamma * f * s).abs());
                (b - mu * self.gamma * f) * s
            })
            .collect();
        (res, scale)
    }

    /// Jacobian of `(coefficient residual, (E(c) - target) / 2)` in `(c, mu)`.
    pub fn jacobian(&self, c: &[f64], mu: f64, exec: Execution) -> DMatrix<f64> {
        let m = self.len();
        let g = self.nodal(c);
        let p = self.p;
        let dn: Vec<f64> = g.iter().zip(&self.htilde).map(|(v, h)| p * h * v.max(0.0).powf(p - 1.0)).collect();
        let y = self.grid.basis();
        let a = self.grid.analysis();
        // column k of A diag(dn) Y
        let cols = map_range(exec, m, |k| {
            let col: Vec<f64> = (0..y.nrows()).map(|j| dn[j] * y[(j, k)]).collect();
            (a * DVector::from_vec(col)).data.as_vec().clone()
        });
        let nl = self.analyze(&self.nonlinearity(&g));
        let mut jac = DMatrix::zeros(m + 1, m + 1);
        for (k, col) in cols.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                jac[(i, k)] = -mu * self.gamma * v;
            }
            jac[(k, k)] += self.diag[k];
            jac[(m, k)] = self.diag[k] * c[k];
        }
        for i in 0..m {
            jac[(i, m)] = -self.gamma * nl[i];
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::{substituted_grid, Bubble};
    use crate::spectral::{energy, j_functional, make_grid, residual};
    use approx::assert_relative_eq;

    #[test]
    fn dilated_frame_matches_physical_quantities() {
        let base = make_grid(4, 96).unwrap();
        let h = CurvatureProfile::two_bump(1.5, 0.5).unwrap();
        let p = 1.8;
        let grid = Arc::new(substituted_grid(&Bubble::south(0.2, 4).unwrap(), &base));
        let u = AxisymmetricFunction::from_fn(grid.clone(), |r| 1.0 + 0.3 * r.cos());
        let prob = Problem::new(grid.clone(), &h, p).unwrap();
        let c = prob.coeffs_of(&u);
        assert_relative_eq!(prob.energy(&c), energy(&u), max_relative = 1e-12);
        assert_relative_eq!(prob.j(&prob.nodal(&c)), j_functional(&u, &h, p).unwrap(), max_relative = 1e-12);
        let (res, _) = prob.physical_residual(&c, 0.7);
        let direct = residual(&u, &h, p, 0.7).unwrap();
        for (a, b) in res.iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn projection_lands_on_sphere() {
        let grid = Arc::new(make_grid(3, 32).unwrap());
        let prob = Problem::new(grid.clone(), &CurvatureProfile::constant(1.0), 2.0).unwrap();
        let u = AxisymmetricFunction::from_fn(grid, |r| r.cos() + 0.2);
        let c = prob.project(&prob.coeffs_of(&u)).unwrap();
        assert_relative_eq!(prob.energy(&c), prob.target, max_relative = 1e-12);
        assert!(prob.function(&c).min_value() >= 0.0);
    }
}
