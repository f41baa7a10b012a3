//! Variational search for solutions: projection onto the energy sphere, the
//! maximin (mountain-pass) path between two bubbles, Newton refinement of the
//! Lagrange system, rescaling, and continuation in the exponent.

mod continuation;
mod mountain_pass;
mod newton;
mod problem;

use serde::{Deserialize, Serialize};

use crate::curvature::CurvatureProfile;
use crate::error::Result;
use crate::exec::Execution;
use crate::spectral::AxisymmetricFunction;

pub use continuation::{continuation, ContinuationReport, ContinuationStep, StepStatus};
pub use mountain_pass::{maximize, mountain_pass, MaximizeResult, MountainPassResult, PassOutcome};
pub use newton::{newton_refine, rescale_to_solution, NewtonResult};

use problem::Problem;

/// Solver settings. Defaults: 33 path nodes, `tol_mp = 1e-5`, Newton residual
/// `1e-9`, blow-up ratio `10`, endpoint bubbles at `lambda0 = 0.05`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub path_nodes: usize,
    /// Stop the path ascent when the min node's gradient across the path is below this.
    pub tol_mp: f64,
    pub max_ascent_iter: usize,
    /// Stop when the path minimum gains less than this (relative) over `stall_window` iterations.
    pub stall_tol: f64,
    pub stall_window: usize,
    pub initial_step: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub blowup_ratio: f64,
    pub lambda0: f64,
    pub exec: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            path_nodes: 33,
            tol_mp: 1e-5,
            max_ascent_iter: 20_000,
            stall_tol: 1e-12,
            stall_window: 200,
            initial_step: 0.2,
            newton_tol: 1e-9,
            newton_max_iter: 60,
            blowup_ratio: 10.0,
            lambda0: 0.05,
            exec: Execution::default(),
        }
    }
}

/// Clips negative values to zero and scales onto `E(u) = gamma_n |S^{n-1}|`.
pub fn project_to_s(u: &AxisymmetricFunction) -> Result<AxisymmetricFunction> {
    let prob = Problem::new(u.grid().clone(), &CurvatureProfile::constant(1.0), u.grid().tau())?;
    let c = prob.project(&prob.coeffs_of(u))?;
    Ok(prob.function(&c))
}

/// E-Riesz representative of `dJ_p` at `u`, minus its E-projection onto `u`:
/// the ascent direction of `J_p` within the tangent space of the energy sphere.
pub fn constrained_gradient(u: &AxisymmetricFunction, h: &CurvatureProfile, p: f64) -> Result<AxisymmetricFunction> {
    let prob = Problem::new(u.grid().clone(), h, p)?;
    let (_, g) = prob.tangent_gradient(&prob.coeffs_of(u));
    Ok(AxisymmetricFunction::from_pulled_back(prob.grid.clone(), &prob.nodal(&g)))
}
