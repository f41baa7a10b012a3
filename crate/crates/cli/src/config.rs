//! Run configuration: a JSON document plus command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use meancurv::curvature::{CurvatureProfile, ProfileSpec};
use meancurv::solver::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Fractions of the critical exponent used when no schedule is given.
pub const DEFAULT_SCHEDULE: [f64; 5] = [0.90, 0.925, 0.95, 0.975, 0.999];
pub const DEFAULT_P_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    /// Number of Gauss nodes `M`.
    pub grid: usize,
    /// Zonal degree cutoff; only `grid - 1` is supported.
    pub k_max: Option<usize>,
    pub profile: ProfileSpec,
    /// Single exponent for `solve`; defaults to `0.95 tau`.
    pub p: Option<f64>,
    /// Increasing exponents for `continue`; defaults to `{0.9, 0.925, 0.95, 0.975, 0.999} tau`.
    pub schedule: Option<Vec<f64>>,
    pub solver: SolverConfig,
    pub rho0: Option<f64>,
    pub barrier_samples: usize,
    pub seed: u64,
    /// Interior samples for the sign-change test.
    pub kw_samples: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 3,
            grid: 256,
            k_max: None,
            profile: ProfileSpec::Builtin {
                name: "two_bump".into(),
                params: BTreeMap::from([("alpha".into(), 1.5), ("a".into(), 0.5)]),
            },
            p: None,
            schedule: None,
            solver: SolverConfig::default(),
            rho0: None,
            barrier_samples: 200,
            seed: 20_240_917,
            kw_samples: 2048,
            out: PathBuf::from("results"),
        }
    }
}

/// Command-line values that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub n: Option<usize>,
    pub grid: Option<usize>,
    pub p: Option<f64>,
    pub out: Option<PathBuf>,
    /// `NAME k=v ...`
    pub profile: Option<Vec<String>>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse_profile_args(args: &[String]) -> Result<ProfileSpec, CliError> {
    let (name, rest) = args.split_first().ok_or_else(|| config_err("--profile needs a name"))?;
    let mut params = BTreeMap::new();
    for kv in rest {
        let (k, v) = kv.split_once('=').ok_or_else(|| config_err(format!("profile parameter {kv:?} is not k=v")))?;
        let v: f64 = v.trim().parse().map_err(|_| config_err(format!("profile parameter {k} has non-numeric value {v:?}")))?;
        params.insert(k.trim().to_string(), v);
    }
    Ok(ProfileSpec::Builtin { name: name.clone(), params })
}

impl RunConfig {
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(n) = ov.n {
            cfg.n = n;
        }
        if let Some(m) = ov.grid {
            cfg.grid = m;
        }
        if let Some(p) = ov.p {
            cfg.p = Some(p);
        }
        if let Some(out) = &ov.out {
            cfg.out = out.clone();
        }
        if let Some(args) = &ov.profile {
            cfg.profile = parse_profile_args(args)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tau(&self) -> f64 {
        self.n as f64 / (self.n as f64 - 2.0)
    }

    pub fn p(&self) -> f64 {
        self.p.unwrap_or(DEFAULT_P_FRACTION * self.tau())
    }

    pub fn schedule(&self) -> Vec<f64> {
        self.schedule.clone().unwrap_or_else(|| DEFAULT_SCHEDULE.iter().map(|f| f * self.tau()).collect())
    }

    pub fn curvature(&self) -> Result<CurvatureProfile, CliError> {
        self.profile.build().map_err(|e| config_err(format!("profile: {e}")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n < 3 {
            return Err(config_err(format!("n = {} is not allowed: n must be at least 3 (gamma_n = (n-2)/2 vanishes at n = 2)", self.n)));
        }
        if self.grid < 4 {
            return Err(config_err(format!("grid = {} is too small (need at least 4 nodes)", self.grid)));
        }
        if let Some(k) = self.k_max {
            if k != self.grid - 1 {
                return Err(config_err(format!("k_max = {k}: only k_max = grid - 1 = {} is supported", self.grid - 1)));
            }
        }
        let tau = self.tau();
        let in_range = |p: f64| p.is_finite() && p > 1.0 && p < tau;
        if let Some(p) = self.p {
            if !in_range(p) {
                return Err(config_err(format!("p = {p} must lie in (1, tau = {tau})")));
            }
        }
        if let Some(s) = &self.schedule {
            if s.is_empty() || !s.iter().all(|p| in_range(*p)) {
                return Err(config_err(format!("schedule values must lie in (1, tau = {tau})")));
            }
            if !s.windows(2).all(|w| w[0] < w[1]) {
                return Err(config_err("schedule must be strictly increasing"));
            }
        }
        let s = &self.solver;
        let positive = [
            ("solver.tol_mp", s.tol_mp),
            ("solver.stall_tol", s.stall_tol),
            ("solver.initial_step", s.initial_step),
            ("solver.newton_tol", s.newton_tol),
            ("solver.lambda0", s.lambda0),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(config_err(format!("{name} = {v} must be positive")));
        }
        if !(s.blowup_ratio > 1.0) {
            return Err(config_err(format!("solver.blowup_ratio = {} must exceed 1", s.blowup_ratio)));
        }
        if s.path_nodes < 3 || s.newton_max_iter == 0 || s.max_ascent_iter == 0 || s.stall_window == 0 {
            return Err(config_err("solver.path_nodes must be at least 3 and iteration limits positive"));
        }
        if let Some(r) = self.rho0 {
            if !(r > 0.0 && r.is_finite()) {
                return Err(config_err(format!("rho0 = {r} must be positive")));
            }
        }
        if self.barrier_samples == 0 || self.kw_samples < 16 {
            return Err(config_err("barrier_samples must be positive and kw_samples at least 16"));
        }
        self.curvature()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_dimension_two() {
        let cfg = RunConfig { n: 2, ..RunConfig::default() };
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn profile_arguments() {
        let spec = parse_profile_args(&["cos2".into(), "amp=0.2".into()]).unwrap();
        assert_eq!(spec, ProfileSpec::Builtin { name: "cos2".into(), params: BTreeMap::from([("amp".into(), 0.2)]) });
        assert!(parse_profile_args(&["cos2".into(), "amp".into()]).is_err());
        assert!(parse_profile_args(&[]).is_err());
    }

    #[test]
    fn json_round_trip_and_partial_documents() {
        let cfg: RunConfig = serde_json::from_str(r#"{"n": 4, "profile": {"name": "monotone"}, "solver": {"newton_tol": 1e-10}}"#).unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.grid, 256);
        assert_eq!(cfg.solver.newton_tol, 1e-10);
        assert_eq!(cfg.solver.path_nodes, 33);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back.profile, cfg.profile);
        assert!(serde_json::from_str::<RunConfig>(r#"{"dimension": 4}"#).is_err());
    }

    #[test]
    fn schedule_bounds() {
        let cfg = RunConfig { n: 4, schedule: Some(vec![1.5, 1.4]), ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { n: 4, p: Some(2.0), ..RunConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig { n: 4, ..RunConfig::default() };
        assert_eq!(cfg.schedule().len(), 5);
        assert!((cfg.p() - 1.9).abs() < 1e-15);
    }
}
