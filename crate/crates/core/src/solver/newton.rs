use nalgebra::DVector;

use super::problem::Problem;
use super::SolverConfig;
use crate::curvature::CurvatureProfile;
use crate::error::{Error, Result};
use crate::spectral::AxisymmetricFunction;

/// A refined critical point of `J_p` on the constraint set.
#[derive(Debug, Clone)]
pub struct NewtonResult {
    /// The critical point, on the energy sphere.
    pub u: AxisymmetricFunction,
    /// Lagrange multiplier.
    pub mu: f64,
    /// Max-norm of the physical residual.
    pub residual: f64,
    /// Residual max-norm before each iteration and after the last one.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// Total step halvings.
    pub halvings: usize,
}

fn merit(prob: &Problem, c: &[f64], mu: f64) -> f64 {
    let f = prob.coefficient_residual(c, mu);
    let cons = 0.5 * (prob.energy(c) - prob.target);
    f.iter().map(|v| v * v).sum::<f64>() + cons * cons
}

fn residual_norm(prob: &Problem, c: &[f64], mu: f64) -> (f64, f64) {
    let (res, scale) = prob.physical_residual(c, mu);
    (res.iter().fold(0.0f64, |m, v| m.max(v.abs())), scale)
}

pub(crate) fn refine(prob: &Problem, c0: &[f64], mu0: Option<f64>, cfg: &SolverConfig) -> Result<(Vec<f64>, f64, Vec<f64>, usize, usize)> {
    let m = prob.len();
    let mut c = prob.project(c0)?;
    let mut mu = match mu0 {
        Some(mu) => mu,
        None => {
            let j = prob.j(&prob.nodal(&c));
            if !(j > 0.0) {
                return Err(Error::NonPositiveMultiplier(f64::NAN));
            }
            prob.energy(&c) / (prob.gamma * j)
        }
    };
    let mut history = Vec::new();
    let mut halvings = 0;
    for it in 0..cfg.newton_max_iter {
        let (res, scale) = residual_norm(prob, &c, mu);
        history.push(res);
        if res <= cfg.newton_tol * scale.max(1.0) {
            return Ok((c, mu, history, it, halvings));
        }
        let jac = prob.jacobian(&c, mu, cfg.exec);
        let mut rhs = prob.coefficient_residual(&c, mu);
        rhs.push(0.5 * (prob.energy(&c) - prob.target));
        let rhs = -DVector::from_vec(rhs);
        let step = jac.lu().solve(&rhs).ok_or(Error::SingularJacobian { iteration: it })?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { iteration: it });
        }
        let base = merit(prob, &c, mu);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..m).map(|k| c[k] + t * step[k]).collect();
            let trial_mu = mu + t * step[m];
            let nonneg = prob.is_nonnegative(&prob.nodal(&trial));
            if nonneg && merit(prob, &trial, trial_mu) < base {
                c = trial;
                mu = trial_mu;
                accepted = true;
                break;
            }
            t *= 0.5;
            halvings += 1;
        }
        if !accepted {
            let (res, scale) = residual_norm(prob, &c, mu);
            // a stalled line search at round-off level still counts as converged
            if res <= 100.0 * cfg.newton_tol * scale.max(1.0) {
                history.push(res);
                return Ok((c, mu, history, it + 1, halvings));
            }
            return Err(Error::NoConvergence(format!(
                "Newton line search failed at iteration {it}; residual history {history:?}, {halvings} halvings"
            )));
        }
    }
    let (res, scale) = residual_norm(prob, &c, mu);
    history.push(res);
    if res <= cfg.newton_tol * scale.max(1.0) {
        return Ok((c, mu, history, cfg.newton_max_iter, halvings));
    }
    Err(Error::NoConvergence(format!(
        "Newton did not reach {:.1e} in {} iterations; residual history {history:?}",
        cfg.newton_tol, cfg.newton_max_iter
    )))
}

/// Damped Newton on the Lagrange system `dtn(u) + gamma u = mu gamma h u^p`,
/// `E(u) = gamma |S^{n-1}|`, in the spectral coefficients of `u` and `mu`.
/// Steps that create negative nodes or raise the residual are halved.
/// Converged when the physical residual max-norm is below
/// `tol * max(1, max |mu gamma h u^p|)`.
pub fn newton_refine(u0: &AxisymmetricFunction, h: &CurvatureProfile, p: f64, cfg: &SolverConfig) -> Result<NewtonResult> {
    let prob = Problem::new(u0.grid().clone(), h, p)?;
    let c0 = prob.coeffs_of(u0);
    let (c, mu, history, iterations, halvings) = refine(&prob, &c0, None, cfg)?;
    let u = prob.function(&c);
    check_positive(&u)?;
    Ok(NewtonResult { u, mu, residual: *history.last().unwrap(), history, iterations, halvings })
}

fn check_positive(u: &AxisymmetricFunction) -> Result<()> {
    match u.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        Some((node, v)) => Err(Error::Negative { node, value: *v }),
        None => Ok(()),
    }
}

/// `w = mu^{1/(p-1)} u`, which solves the equation with multiplier one.
pub fn rescale_to_solution(u: &AxisymmetricFunction, mu: f64, p: f64) -> Result<AxisymmetricFunction> {
    if !(mu > 0.0) {
        return Err(Error::NonPositiveMultiplier(mu));
    }
    if !(p > 1.0) {
        return Err(Error::Exponent { p, tau: u.grid().tau() });
    }
    Ok(u.scale(mu.powf(1.0 / (p - 1.0))))
}
