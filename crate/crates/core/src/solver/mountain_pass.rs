use serde::Serialize;

use super::newton::refine;
use super::problem::Problem;
use super::SolverConfig;
use crate::bubbles::{sigma_decompose, Pole, SigmaOptions, SigmaReport};
use crate::curvature::{kazdan_warner_check, CurvatureProfile};
use crate::error::{Error, Result};
use crate::exec::map_range;
use crate::spectral::{mass_center, AxisymmetricFunction};

/// How the path ascent ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PassOutcome {
    /// Gradient across the path at the min node fell below `tol_mp`.
    Converged,
    /// The path minimum stopped improving.
    Stalled,
    IterationCap,
    /// The path minimum sits at an endpoint; the interior maximum was refined instead.
    EndpointMinimum,
    /// `psi1 = psi2`: constant path.
    IdenticalEndpoints,
}

#[derive(Debug, Clone)]
pub struct MountainPassResult {
    /// `J_p(u*)`, or the endpoint value when the path is degenerate.
    pub c_p: f64,
    /// Final discrete path minimum.
    pub path_min: f64,
    pub endpoint_values: (f64, f64),
    /// Refined critical point on the energy sphere.
    pub u_star: AxisymmetricFunction,
    pub mu: f64,
    pub residual: f64,
    pub ascent_iterations: usize,
    pub newton_iterations: usize,
    pub outcome: PassOutcome,
    /// Path minimum after each accepted ascent step.
    pub min_history: Vec<f64>,
    /// `J_p` along the final path.
    pub path_values: Vec<f64>,
    pub sigma: SigmaReport,
}

struct Path {
    nodes: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl Path {
    fn evaluate(prob: &Problem, nodes: &[Vec<f64>], cfg: &SolverConfig) -> Vec<f64> {
        map_range(cfg.exec, nodes.len(), |i| prob.j(&prob.nodal(&nodes[i])))
    }

    fn interior_min(&self) -> usize {
        let n = self.values.len();
        (1..n - 1).min_by(|a, b| self.values[*a].total_cmp(&self.values[*b])).unwrap()
    }

    fn interior_max(&self) -> usize {
        let n = self.values.len();
        (1..n - 1).max_by(|a, b| self.values[*a].total_cmp(&self.values[*b])).unwrap()
    }

    fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Moves interior nodes to equal E-arclength along the polyline, then projects.
    fn reparametrize(prob: &Problem, nodes: &mut [Vec<f64>]) -> Result<()> {
        let n = nodes.len();
        let mut cum = vec![0.0; n];
        for i in 1..n {
            let d: Vec<f64> = nodes[i].iter().zip(&nodes[i - 1]).map(|(a, b)| a - b).collect();
            cum[i] = cum[i - 1] + prob.norm(&d);
        }
        let total = cum[n - 1];
        if total <= 0.0 {
            return Ok(());
        }
        let old = nodes.to_vec();
        let mut seg = 0;
        for (i, node) in nodes.iter_mut().enumerate().take(n - 1).skip(1) {
            let target = total * i as f64 / (n - 1) as f64;
            while seg + 1 < n - 1 && cum[seg + 1] < target {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
            let interp: Vec<f64> = old[seg].iter().zip(&old[seg + 1]).map(|(a, b)| a + t * (b - a)).collect();
            *node = prob.project(&interp)?;
        }
        Ok(())
    }
}

fn unit_tangent(prob: &Problem, prev: &[f64], at: &[f64], next: &[f64]) -> Vec<f64> {
    let mut t: Vec<f64> = next.iter().zip(prev).map(|(a, b)| a - b).collect();
    let coef = prob.inner(&t, at) / prob.energy(at);
    for (tk, ak) in t.iter_mut().zip(at) {
        *tk -= coef * ak;
    }
    let norm = prob.norm(&t);
    if norm > 0.0 {
        for v in t.iter_mut() {
            *v /= norm;
        }
    }
    t
}

fn nearest_pole(u: &AxisymmetricFunction) -> Result<Pole> {
    Ok(if mass_center(u)? <= 1.0 { Pole::South } else { Pole::North })
}

fn finish(prob: &Problem, c: Vec<f64>) -> Result<(AxisymmetricFunction, SigmaReport, f64)> {
    let u = prob.function(&c);
    if let Some((node, v)) = u.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::Negative { node, value: *v });
    }
    let sigma = sigma_decompose(&u, nearest_pole(&u)?, &SigmaOptions::default())?;
    let j = prob.j(&prob.nodal(&c));
    Ok((u, sigma, j))
}

/// Maximin search `c_p = sup over paths from psi1 to psi2 of min J_p`.
///
/// The path is discretized by `cfg.path_nodes` functions on the energy sphere,
/// initialized along the great circle from `psi1` to `psi2`. Each ascent step
/// moves every interior node along the part of its constrained gradient normal
/// to the path, and the current minimal node along its full constrained
/// gradient; nodes are then re-spaced to equal E-arclength and projected.
/// Steps that lower the path minimum are rejected and the step size halved.
/// The final minimal node is refined by Newton.
pub fn mountain_pass(
    h: &CurvatureProfile,
    p: f64,
    psi1: &AxisymmetricFunction,
    psi2: &AxisymmetricFunction,
    cfg: &SolverConfig,
) -> Result<MountainPassResult> {
    let grid = psi1.grid().clone();
    let prob = Problem::new(grid, h, p)?;
    if !kazdan_warner_check(h, 2048).holds {
        log::warn!("profile {} fails the sign-change condition; a mountain pass may not exist", h.name());
    }
    let a = prob.project(&prob.coeffs_of(psi1))?;
    let b = prob.project(&prob.coeffs_of(psi2))?;
    let ja = prob.j(&prob.nodal(&a));
    let jb = prob.j(&prob.nodal(&b));
    let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let radius = prob.target.sqrt();

    if prob.norm(&diff) <= 1e-12 * radius {
        let mu = prob.energy(&a) / (prob.gamma * ja);
        let (res, _) = prob.physical_residual(&a, mu);
        let (u, sigma, _) = finish(&prob, a)?;
        return Ok(MountainPassResult {
            c_p: ja,
            path_min: ja,
            endpoint_values: (ja, jb),
            u_star: u,
            mu,
            residual: res.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            ascent_iterations: 0,
            newton_iterations: 0,
            outcome: PassOutcome::IdenticalEndpoints,
            min_history: vec![ja],
            path_values: vec![ja, jb],
            sigma,
        });
    }

    let nn = cfg.path_nodes.max(3);
    let cos_theta = (prob.inner(&a, &b) / prob.target).clamp(-1.0, 1.0);
    let theta = cos_theta.acos();
    let mut nodes: Vec<Vec<f64>> = (0..nn)
        .map(|i| {
            let s = i as f64 / (nn - 1) as f64;
            let (wa, wb) = if theta > 1e-8 {
                (((1.0 - s) * theta).sin() / theta.sin(), (s * theta).sin() / theta.sin())
            } else {
                (1.0 - s, s)
            };
            a.iter().zip(&b).map(|(x, y)| wa * x + wb * y).collect()
        })
        .collect();
    for node in nodes.iter_mut().take(nn - 1).skip(1) {
        *node = prob.project(node)?;
    }
    let values = Path::evaluate(&prob, &nodes, cfg);
    let mut path = Path { nodes, values };

    let end_min = ja.min(jb);
    if path.values[path.interior_min()] >= end_min {
        return endpoint_minimum(&prob, &path, (ja, jb), cfg);
    }

    let mut step = cfg.initial_step;
    let mut min_history = vec![path.min_value()];
    let mut outcome = PassOutcome::IterationCap;
    let mut iterations = 0;
    for it in 0..cfg.max_ascent_iter {
        iterations = it;
        let m = path.interior_min();
        let grads = map_range(cfg.exec, nn, |i| {
            if i == 0 || i == nn - 1 {
                Vec::new()
            } else {
                prob.tangent_gradient(&path.nodes[i]).1
            }
        });
        let mut dirs = Vec::with_capacity(nn);
        let mut perp_at_min = f64::INFINITY;
        for i in 0..nn {
            if i == 0 || i == nn - 1 {
                dirs.push(Vec::new());
                continue;
            }
            let t = unit_tangent(&prob, &path.nodes[i - 1], &path.nodes[i], &path.nodes[i + 1]);
            let along = prob.inner(&grads[i], &t);
            let perp: Vec<f64> = grads[i].iter().zip(&t).map(|(g, tk)| g - along * tk).collect();
            if i == m {
                perp_at_min = prob.norm(&perp);
                dirs.push(grads[i].clone());
            } else {
                dirs.push(perp);
            }
        }
        if perp_at_min < cfg.tol_mp {
            outcome = PassOutcome::Converged;
            break;
        }
        if path.values[path.interior_min()] >= end_min {
            return endpoint_minimum(&prob, &path, (ja, jb), cfg);
        }
        let current = path.min_value();
        let mut trial = path.nodes.clone();
        let mut failed = false;
        for i in 1..nn - 1 {
            let moved: Vec<f64> = trial[i].iter().zip(&dirs[i]).map(|(c, d)| c + step * d).collect();
            match prob.project(&moved) {
                Ok(c) => trial[i] = c,
                Err(_) => failed = true,
            }
        }
        if !failed {
            Path::reparametrize(&prob, &mut trial)?;
        }
        let trial_values = if failed { Vec::new() } else { Path::evaluate(&prob, &trial, cfg) };
        let trial_min = trial_values.iter().copied().fold(f64::INFINITY, f64::min);
        if !failed && trial_min >= current - 1e-15 * current.abs() {
            path.nodes = trial;
            path.values = trial_values;
            min_history.push(trial_min);
            step = (step * 1.25).min(4.0);
            let w = cfg.stall_window;
            if min_history.len() > w {
                let old = min_history[min_history.len() - 1 - w];
                if trial_min - old <= cfg.stall_tol * trial_min.abs() {
                    outcome = PassOutcome::Stalled;
                    break;
                }
            }
        } else {
            step *= 0.5;
            if step < 1e-14 {
                outcome = PassOutcome::Stalled;
                break;
            }
        }
    }
    if outcome == PassOutcome::IterationCap {
        log::warn!(
            "mountain pass hit the iteration cap; path values {:?}",
            path.values.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>()
        );
    }

    let m = path.interior_min();
    let path_min = path.min_value();
    let mut starts = vec![path.nodes[m].clone()];
    // parabolic estimate of the continuous minimum between the neighbours of m
    let (f0, f1, f2) = (path.values[m - 1], path.values[m], path.values[m + 1]);
    let denom = f0 - 2.0 * f1 + f2;
    if denom > 0.0 {
        let off = (0.5 * (f0 - f2) / denom).clamp(-0.5, 0.5);
        let other = if off < 0.0 { m - 1 } else { m + 1 };
        let t = off.abs();
        let mix: Vec<f64> = path.nodes[m].iter().zip(&path.nodes[other]).map(|(x, y)| (1.0 - t) * x + t * y).collect();
        starts.push(prob.project(&mix)?);
    }
    let mut last_err = None;
    for start in starts {
        match refine(&prob, &start, None, cfg) {
            Ok((c, mu, history, newton_iterations, _)) => {
                let residual = *history.last().unwrap();
                let (u, sigma, j) = finish(&prob, c)?;
                return Ok(MountainPassResult {
                    c_p: j,
                    path_min,
                    endpoint_values: (ja, jb),
                    u_star: u,
                    mu,
                    residual,
                    ascent_iterations: iterations,
                    newton_iterations,
                    outcome,
                    min_history,
                    path_values: path.values.clone(),
                    sigma,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::NoConvergence(format!(
        "refinement of the path minimum failed ({}); ascent outcome {outcome:?} after {iterations} iterations, path values {:?}",
        last_err.map(|e| e.to_string()).unwrap_or_default(),
        path.values
    )))
}

/// The path minimum sits at an endpoint, so the sup-min value is the smaller
/// endpoint value; the interior maximum is refined to a critical point instead.
fn endpoint_minimum(prob: &Problem, path: &Path, ends: (f64, f64), cfg: &SolverConfig) -> Result<MountainPassResult> {
    let end_min = ends.0.min(ends.1);
    let start = path.nodes[path.interior_max()].clone();
    let (c, ascent) = ascend(prob, start, cfg)?;
    let (c, mu, history, newton_iterations, _) = refine(prob, &c, None, cfg)?;
    let residual = *history.last().unwrap();
    let (u, sigma, _) = finish(prob, c)?;
    Ok(MountainPassResult {
        c_p: end_min,
        path_min: end_min,
        endpoint_values: ends,
        u_star: u,
        mu,
        residual,
        ascent_iterations: ascent,
        newton_iterations,
        outcome: PassOutcome::EndpointMinimum,
        min_history: vec![end_min],
        path_values: path.values.clone(),
        sigma,
    })
}

/// Projected gradient ascent of `J_p` on the energy sphere.
fn ascend(prob: &Problem, start: Vec<f64>, cfg: &SolverConfig) -> Result<(Vec<f64>, usize)> {
    let mut c = prob.project(&start)?;
    let (mut j, mut g) = prob.tangent_gradient(&c);
    let mut step = cfg.initial_step;
    let mut history = vec![j];
    for it in 0..cfg.max_ascent_iter {
        if prob.norm(&g) < cfg.tol_mp {
            return Ok((c, it));
        }
        let moved: Vec<f64> = c.iter().zip(&g).map(|(a, d)| a + step * d).collect();
        let trial = prob.project(&moved)?;
        let (tj, tg) = prob.tangent_gradient(&trial);
        if tj >= j {
            c = trial;
            j = tj;
            g = tg;
            history.push(j);
            step = (step * 1.25).min(4.0);
            let w = cfg.stall_window;
            if history.len() > w && j - history[history.len() - 1 - w] <= cfg.stall_tol * j.abs() {
                return Ok((c, it));
            }
        } else {
            step *= 0.5;
            if step < 1e-14 {
                return Ok((c, it));
            }
        }
    }
    Ok((c, cfg.max_ascent_iter))
}

/// A local maximizer of `J_p` on the constraint set.
#[derive(Debug, Clone)]
pub struct MaximizeResult {
    pub u: AxisymmetricFunction,
    pub j: f64,
    pub mu: f64,
    pub residual: f64,
    pub ascent_iterations: usize,
    pub newton_iterations: usize,
}

/// Projected gradient ascent from `u0` followed by Newton refinement.
pub fn maximize(h: &CurvatureProfile, p: f64, u0: &AxisymmetricFunction, cfg: &SolverConfig) -> Result<MaximizeResult> {
    let prob = Problem::new(u0.grid().clone(), h, p)?;
    let (c, ascent_iterations) = ascend(&prob, prob.coeffs_of(u0), cfg)?;
    let (c, mu, history, newton_iterations, _) = refine(&prob, &c, None, cfg)?;
    let u = prob.function(&c);
    if let Some((node, v)) = u.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::Negative { node, value: *v });
    }
    Ok(MaximizeResult {
        j: prob.j(&prob.nodal(&c)),
        u,
        mu,
        residual: *history.last().unwrap(),
        ascent_iterations,
        newton_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bubbles::Bubble;
    use crate::spectral::make_grid;
    use std::sync::Arc;

    #[test]
    fn constant_curvature_finds_the_constant() {
        let grid = Arc::new(make_grid(4, 64).unwrap());
        let h = CurvatureProfile::constant(1.0);
        let p = 0.95 * grid.tau();
        let psi1 = Bubble::new(0.2, Pole::South, 4).unwrap().on_grid(&grid);
        let psi2 = Bubble::new(0.2, Pole::North, 4).unwrap().on_grid(&grid);
        let res = mountain_pass(&h, p, &psi1, &psi2, &SolverConfig::default()).unwrap();
        assert_eq!(res.outcome, PassOutcome::EndpointMinimum);
        assert!((res.mu - 1.0).abs() < 1e-8);
        assert!(res.u_star.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
        assert!(res.c_p <= res.endpoint_values.0.min(res.endpoint_values.1));
    }

    #[test]
    fn identical_endpoints() {
        let grid = Arc::new(make_grid(4, 64).unwrap());
        let h = CurvatureProfile::two_bump(1.5, 0.5).unwrap();
        let psi = Bubble::south(0.3, 4).unwrap().on_grid(&grid);
        let p = 0.95 * grid.tau();
        let res = mountain_pass(&h, p, &psi, &psi, &SolverConfig::default()).unwrap();
        assert_eq!(res.outcome, PassOutcome::IdenticalEndpoints);
        assert!((res.c_p - res.endpoint_values.0).abs() < 1e-12);
    }

    #[test]
    fn maximizer_of_constant_curvature() {
        let grid = Arc::new(make_grid(3, 32).unwrap());
        let u0 = AxisymmetricFunction::from_fn(grid, |r| 1.0 + 0.2 * r.cos());
        let res = maximize(&CurvatureProfile::constant(1.0), 2.5, &u0, &SolverConfig::default()).unwrap();
        assert!(res.u.values().iter().all(|v| (v - 1.0).abs() < 1e-8));
    }
}
