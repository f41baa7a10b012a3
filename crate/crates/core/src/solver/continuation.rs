use std::sync::Arc;

use serde::Serialize;

use super::mountain_pass::{maximize, mountain_pass};
use super::newton::{newton_refine, rescale_to_solution};
use super::SolverConfig;
use crate::bubbles::{sigma_decompose, substituted_grid, Bubble, Pole, SigmaOptions};
use crate::curvature::CurvatureProfile;
use crate::error::{Error, Result};
use crate::spectral::{j_functional, make_grid, mass_center, residual, AxisymmetricFunction, RadialGrid};

/// Smallest allowed gap between the last exponent and the critical one.
pub const FINAL_GAP: f64 = 1e-3;

/// How a continuation step obtained its solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    /// Newton warm-started from the previous step.
    Continued,
    MountainPass,
    /// Maximization of `J_p` (profiles without two positive polar maxima).
    Maximized,
    Failed,
}

impl StepStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            StepStatus::Continued => "continued",
            StepStatus::MountainPass => "mountain_pass",
            StepStatus::Maximized => "maximized",
            StepStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationStep {
    pub p: f64,
    pub c_p: f64,
    /// Sup-norm of the rescaled solution `mu^{1/(p-1)} u`.
    pub sup_norm: f64,
    /// `sup_norm^{-(p-1)/2}`.
    pub lambda_conc: f64,
    pub lambda_star: f64,
    pub pole: Pole,
    pub q_n: f64,
    /// Max-norm residual of the rescaled solution with multiplier one.
    pub residual: f64,
    pub mu: f64,
    pub status: StepStatus,
    pub message: Option<String>,
    #[serde(skip)]
    pub solution: Option<AxisymmetricFunction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuationReport {
    pub profile: String,
    pub n: usize,
    pub steps: Vec<ContinuationStep>,
    /// Sup-norm grew by more than the blow-up ratio, monotonically, over the
    /// last three steps while the fitted bubble scale shrank monotonically.
    pub concentration: bool,
    /// Index of the step at which the flag was first raised.
    pub concentration_step: Option<usize>,
}

fn check_schedule(schedule: &[f64], tau: f64) -> Result<()> {
    if schedule.is_empty() {
        return Err(Error::Schedule("empty schedule".into()));
    }
    if !schedule.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Schedule("exponents must be strictly increasing".into()));
    }
    if !(schedule[0] > 1.0) {
        return Err(Error::Schedule(format!("first exponent {} must exceed 1", schedule[0])));
    }
    let last = schedule[schedule.len() - 1];
    if last > tau - FINAL_GAP {
        return Err(Error::Schedule(format!("last exponent {last} exceeds tau - {FINAL_GAP} = {}", tau - FINAL_GAP)));
    }
    Ok(())
}

struct Solved {
    u: AxisymmetricFunction,
    mu: f64,
    status: StepStatus,
}

/// Grid adapted to a solution: dilated by the fitted bubble when it concentrates.
fn adapted_grid(base: &RadialGrid, u: &AxisymmetricFunction) -> Result<Arc<RadialGrid>> {
    let q = mass_center(u)?;
    let pole = if q <= 1.0 { Pole::South } else { Pole::North };
    let rep = sigma_decompose(u, pole, &SigmaOptions::default())?;
    if rep.lambda_star < 0.5 {
        Ok(Arc::new(substituted_grid(&rep.bubble(base.n()), base)))
    } else {
        Ok(Arc::new(base.undilated()))
    }
}

fn fresh_solve(h: &CurvatureProfile, p: f64, base: &RadialGrid, cfg: &SolverConfig) -> Result<Solved> {
    let n = base.n();
    let grid = Arc::new(base.undilated());
    if h.value(0.0) > 0.0 && h.value(std::f64::consts::PI) > 0.0 {
        let psi1 = Bubble::new(cfg.lambda0, Pole::South, n)?.on_grid(&grid);
        let psi2 = Bubble::new(cfg.lambda0, Pole::North, n)?.on_grid(&grid);
        let res = mountain_pass(h, p, &psi1, &psi2, cfg)?;
        Ok(Solved { u: res.u_star, mu: res.mu, status: StepStatus::MountainPass })
    } else {
        let pole = if h.value(0.0) >= h.value(std::f64::consts::PI) { Pole::South } else { Pole::North };
        let (b, _) = crate::bubbles::best_bubble(h, p, pole, 1e-3, base);
        let start = b.on_substituted(base);
        let res = maximize(h, p, &start, cfg)?;
        Ok(Solved { u: res.u, mu: res.mu, status: StepStatus::Maximized })
    }
}

/// Follows solutions along an increasing exponent schedule. The first step is
/// solved from scratch (mountain pass between polar bubbles when `h` is positive
/// at both poles, otherwise maximization from the best bubble); later steps
/// warm-start Newton from the previous solution on a grid adapted to it and
/// fall back to a fresh solve on failure.
pub fn continuation(
    h: &CurvatureProfile,
    n: usize,
    nodes: usize,
    schedule: &[f64],
    cfg: &SolverConfig,
) -> Result<ContinuationReport> {
    let base = make_grid(n, nodes)?;
    check_schedule(schedule, base.tau())?;
    let mut steps: Vec<ContinuationStep> = Vec::with_capacity(schedule.len());
    let mut previous: Option<AxisymmetricFunction> = None;
    let mut concentration_step = None;
    for &p in schedule {
        let warm = previous.as_ref().and_then(|u| {
            let grid = adapted_grid(&base, u).ok()?;
            let start = u.regrid(grid);
            match newton_refine(&start, h, p, cfg) {
                Ok(r) => Some(Solved { u: r.u, mu: r.mu, status: StepStatus::Continued }),
                Err(e) => {
                    log::warn!("warm start failed at p = {p}: {e}");
                    None
                }
            }
        });
        let solved = match warm {
            Some(s) => Ok(s),
            None => fresh_solve(h, p, &base, cfg),
        };
        let step = match solved.and_then(|s| record(h, p, s)) {
            Ok(step) => step,
            Err(e) => ContinuationStep {
                p,
                c_p: f64::NAN,
                sup_norm: f64::NAN,
                lambda_conc: f64::NAN,
                lambda_star: f64::NAN,
                pole: Pole::South,
                q_n: f64::NAN,
                residual: f64::NAN,
                mu: f64::NAN,
                status: StepStatus::Failed,
                message: Some(e.to_string()),
                solution: None,
            },
        };
        if step.status != StepStatus::Failed {
            previous = step.solution.clone();
        }
        steps.push(step);
        if concentration_step.is_none() && concentrating(&steps, cfg.blowup_ratio) {
            concentration_step = Some(steps.len() - 1);
        }
    }
    Ok(ContinuationReport {
        profile: h.name().to_string(),
        n,
        steps,
        concentration: concentration_step.is_some(),
        concentration_step,
    })
}

fn record(h: &CurvatureProfile, p: f64, s: Solved) -> Result<ContinuationStep> {
    let w = rescale_to_solution(&s.u, s.mu, p)?;
    let sup_norm = w.sup_norm();
    let res = residual(&w, h, p, 1.0)?.sup_norm();
    let q_n = mass_center(&s.u)?;
    let pole = if q_n <= 1.0 { Pole::South } else { Pole::North };
    let sigma = sigma_decompose(&s.u, pole, &SigmaOptions::default())?;
    Ok(ContinuationStep {
        p,
        c_p: j_functional(&s.u, h, p)?,
        sup_norm,
        lambda_conc: sup_norm.powf(-(p - 1.0) / 2.0),
        lambda_star: sigma.lambda_star,
        pole,
        q_n,
        residual: res,
        mu: s.mu,
        status: s.status,
        message: None,
        solution: Some(s.u),
    })
}

/// Last four records (three steps): sup-norm strictly increasing with total
/// growth above `ratio`, fitted scale strictly decreasing.
fn concentrating(steps: &[ContinuationStep], ratio: f64) -> bool {
    if steps.len() < 4 {
        return false;
    }
    let w = &steps[steps.len() - 4..];
    if w.iter().any(|s| s.status == StepStatus::Failed) {
        return false;
    }
    let rising = w.windows(2).all(|p| p[1].sup_norm > p[0].sup_norm);
    let shrinking = w.windows(2).all(|p| p[1].lambda_star < p[0].lambda_star);
    rising && shrinking && w[3].sup_norm > ratio * w[0].sup_norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        let tau = 2.0;
        assert!(check_schedule(&[1.5, 1.9], tau).is_ok());
        assert!(check_schedule(&[], tau).is_err());
        assert!(check_schedule(&[1.5, 1.5], tau).is_err());
        assert!(check_schedule(&[1.0, 1.5], tau).is_err());
        assert!(check_schedule(&[1.5, 1.9995], tau).is_err());
    }

    #[test]
    fn constant_curvature_stays_flat() {
        let h = CurvatureProfile::constant(1.0);
        let tau = 2.0;
        let sched: Vec<f64> = [0.9, 0.95, 0.99].iter().map(|f| f * tau).collect();
        let rep = continuation(&h, 4, 64, &sched, &SolverConfig::default()).unwrap();
        assert!(!rep.concentration);
        for s in &rep.steps {
            assert!((s.sup_norm - 1.0).abs() < 1e-8, "{s:?}");
            assert!(s.residual < 1e-8);
        }
    }

    fn fake(sup: f64, lam: f64) -> ContinuationStep {
        ContinuationStep {
            p: 1.5,
            c_p: 0.0,
            sup_norm: sup,
            lambda_conc: 0.0,
            lambda_star: lam,
            pole: Pole::South,
            q_n: 0.0,
            residual: 0.0,
            mu: 1.0,
            status: StepStatus::Continued,
            message: None,
            solution: None,
        }
    }

    #[test]
    fn concentration_rule() {
        let up = [fake(1.0, 0.5), fake(3.0, 0.2), fake(8.0, 0.1), fake(20.0, 0.05)];
        assert!(concentrating(&up, 10.0));
        assert!(!concentrating(&up, 30.0));
        let wobble = [fake(1.0, 0.5), fake(3.0, 0.2), fake(2.0, 0.1), fake(20.0, 0.05)];
        assert!(!concentrating(&wobble, 10.0));
        let wide = [fake(1.0, 0.5), fake(3.0, 0.6), fake(8.0, 0.1), fake(20.0, 0.05)];
        assert!(!concentrating(&wide, 10.0));
        assert!(!concentrating(&up[..3], 1.0));
    }
}
