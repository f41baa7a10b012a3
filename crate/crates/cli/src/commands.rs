use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use meancurv::bubbles::{sigma_decompose, SigmaOptions};
use meancurv::checks::{run_checks, CheckSettings};
use meancurv::curvature::{find_critical_points, flatness_fit, kazdan_warner_check, CurvatureProfile};
use meancurv::solver::{continuation, rescale_to_solution, ContinuationStep, StepStatus};
use meancurv::spectral::residual;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA: u32 = 1;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn prepare_out(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::Io(format!("cannot create {}: {e}", cfg.out.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    let mut f = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    writeln!(f, "{text}").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn header(cfg: &RunConfig, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(command));
    m.insert("n".into(), json!(cfg.n));
    m.insert("grid".into(), json!(cfg.grid));
    m.insert("k_max".into(), json!(cfg.grid - 1));
    m.insert("profile".into(), json!(cfg.profile));
    m
}

fn kw_warning(h: &CurvatureProfile, cfg: &RunConfig) {
    let kw = kazdan_warner_check(h, cfg.kw_samples);
    if !kw.holds {
        log::warn!(
            "profile {} fails the Kazdan-Warner sign-change test (h' does not take both signs where h > 0); solutions may not exist",
            h.name()
        );
    }
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let settings = CheckSettings {
        n: cfg.n,
        nodes: cfg.grid,
        profile: cfg.curvature()?,
        barrier_samples: cfg.barrier_samples,
        seed: cfg.seed,
        rho0: cfg.rho0,
        exec: cfg.solver.exec,
    };
    let outcomes = run_checks(&settings).map_err(|e| CliError::Config(e.to_string()))?;
    let passed = outcomes.iter().all(|c| c.passed);
    for c in &outcomes {
        println!(
            "{} {:<24} measured {:>10.3e}  threshold {:>9.2e}  {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.threshold,
            c.detail
        );
    }
    prepare_out(cfg)?;
    let mut doc = header(cfg, "verify");
    doc.insert("passed".into(), json!(passed));
    doc.insert("checks".into(), json!(outcomes));
    write_json(&cfg.out.join("verify.json"), &Value::Object(doc))?;
    if passed {
        Ok(())
    } else {
        let failed: Vec<&str> = outcomes.iter().filter(|c| !c.passed).map(|c| c.name).collect();
        Err(CliError::Check(format!("failed checks: {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct SigmaSummary {
    t0: f64,
    lambda_star: f64,
    pole: meancurv::bubbles::Pole,
    rho_v: f64,
    q_n: f64,
    q_distance: f64,
    rho0: f64,
    inside_sigma: bool,
    fit_inner: f64,
    at_search_edge: bool,
}

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let h = cfg.curvature()?;
    let p = cfg.p();
    kw_warning(&h, cfg);
    prepare_out(cfg)?;
    let report = continuation(&h, cfg.n, cfg.grid, &[p], &cfg.solver).map_err(|e| CliError::Config(e.to_string()))?;
    let step = &report.steps[0];
    let mut doc = header(cfg, "solve");
    doc.insert("p".into(), json!(p));
    doc.insert("tau".into(), json!(cfg.tau()));
    doc.insert("status".into(), json!(step.status));
    let Some(u) = step.solution.as_ref().filter(|_| step.status != StepStatus::Failed) else {
        let msg = step.message.clone().unwrap_or_default();
        doc.insert("error".into(), json!(msg));
        write_json(&cfg.out.join("summary.json"), &Value::Object(doc))?;
        return Err(CliError::Solver(msg));
    };
    let solver_err = |e: meancurv::Error| CliError::Solver(e.to_string());
    let w = rescale_to_solution(u, step.mu, p).map_err(solver_err)?;
    let res = residual(&w, &h, p, 1.0).map_err(solver_err)?;
    let mut out = csv_writer(&cfg.out.join("solution.csv"))?;
    out.write_record(["r", "u", "w", "residual"]).map_err(csv_err)?;
    for (((r, a), b), c) in w.grid().nodes().iter().zip(u.values()).zip(w.values()).zip(res.values()) {
        out.write_record([num(*r), num(*a), num(*b), num(*c)]).map_err(csv_err)?;
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    let opts = SigmaOptions { rho0: cfg.rho0, ..SigmaOptions::default() };
    let sigma = sigma_decompose(u, step.pole, &opts).map_err(solver_err)?;
    doc.insert("dilation".into(), json!(w.grid().dilation()));
    doc.insert("c_p".into(), json!(step.c_p));
    doc.insert("mu".into(), json!(step.mu));
    doc.insert("residual".into(), json!(res.sup_norm()));
    doc.insert("sup_norm".into(), json!(step.sup_norm));
    doc.insert("lambda_conc".into(), json!(step.lambda_conc));
    doc.insert(
        "sigma".into(),
        json!(SigmaSummary {
            t0: sigma.t0,
            lambda_star: sigma.lambda_star,
            pole: sigma.pole,
            rho_v: sigma.rho_v,
            q_n: sigma.q_n,
            q_distance: sigma.q_distance,
            rho0: sigma.rho0,
            inside_sigma: sigma.inside_sigma,
            fit_inner: sigma.fit_inner,
            at_search_edge: sigma.at_search_edge,
        }),
    );
    write_json(&cfg.out.join("summary.json"), &Value::Object(doc))?;
    println!(
        "{}: p = {p:.6}, c_p = {:.10}, mu = {:.10}, sup-norm {:.6}, residual {:.3e}",
        step.status.as_str(),
        step.c_p,
        step.mu,
        step.sup_norm,
        res.sup_norm()
    );
    Ok(())
}

fn step_record(s: &ContinuationStep) -> [String; 8] {
    [num(s.p), num(s.c_p), num(s.sup_norm), num(s.lambda_conc), num(s.lambda_star), num(s.q_n), num(s.residual), s.status.as_str().into()]
}

pub fn continue_run(cfg: &RunConfig) -> Result<(), CliError> {
    let h = cfg.curvature()?;
    kw_warning(&h, cfg);
    prepare_out(cfg)?;
    let schedule = cfg.schedule();
    let report = continuation(&h, cfg.n, cfg.grid, &schedule, &cfg.solver).map_err(|e| CliError::Config(e.to_string()))?;
    let mut out = csv_writer(&cfg.out.join("continuation.csv"))?;
    out.write_record(["p", "c_p", "sup_norm", "lambda_conc", "lambda_star", "q_n", "residual", "status"]).map_err(csv_err)?;
    for s in &report.steps {
        out.write_record(step_record(s)).map_err(csv_err)?;
        println!(
            "p = {:.6}  c_p = {:.8}  sup = {:.6}  lambda* = {:.4e}  q_n = {:.4}  residual = {:.2e}  {}",
            s.p,
            s.c_p,
            s.sup_norm,
            s.lambda_star,
            s.q_n,
            s.residual,
            s.status.as_str()
        );
    }
    out.flush().map_err(|e| CliError::Io(e.to_string()))?;
    if report.concentration {
        println!("CONCENTRATION flagged at step {}", report.concentration_step.unwrap_or_default());
    }
    let mut doc = header(cfg, "continue");
    doc.insert("tau".into(), json!(cfg.tau()));
    doc.insert("concentration".into(), json!(report.concentration));
    doc.insert("concentration_step".into(), json!(report.concentration_step));
    doc.insert("steps".into(), json!(report.steps));
    write_json(&cfg.out.join("summary.json"), &Value::Object(doc))?;
    let failed = report.steps.iter().filter(|s| s.status == StepStatus::Failed).count();
    if failed > 0 {
        return Err(CliError::Solver(format!("{failed} of {} continuation steps failed", report.steps.len())));
    }
    Ok(())
}

#[derive(Serialize)]
struct FlatnessRow {
    r0: f64,
    h: f64,
    alpha: Option<f64>,
    a: Option<f64>,
    uncertainty: Option<f64>,
    admissible: bool,
    error: Option<String>,
}

pub fn kwcheck(cfg: &RunConfig) -> Result<(), CliError> {
    let h = cfg.curvature()?;
    let kw = kazdan_warner_check(&h, cfg.kw_samples);
    let rows: Vec<FlatnessRow> = find_critical_points(&h, cfg.kw_samples)
        .into_iter()
        .map(|r0| match flatness_fit(&h, r0, cfg.n) {
            Ok(f) => FlatnessRow {
                r0,
                h: h.value(r0),
                alpha: Some(f.alpha),
                a: Some(f.a),
                uncertainty: Some(f.uncertainty),
                admissible: f.admissible,
                error: None,
            },
            Err(e) => FlatnessRow { r0, h: h.value(r0), alpha: None, a: None, uncertainty: None, admissible: false, error: Some(e.to_string()) },
        })
        .collect();
    println!(
        "sign-change condition: {} (rising at {:?}, falling at {:?})",
        if kw.holds { "holds" } else { "violated" },
        kw.rising,
        kw.falling
    );
    println!("{:>10} {:>12} {:>8} {:>12} {:>10}  admissible", "r0", "h(r0)", "alpha", "a", "+/-");
    for row in &rows {
        match (row.alpha, row.a, row.uncertainty) {
            (Some(al), Some(a), Some(u)) => {
                println!("{:>10.6} {:>12.6} {:>8.4} {:>12.4e} {:>10.2e}  {}", row.r0, row.h, al, a, u, row.admissible)
            }
            _ => println!("{:>10.6} {:>12.6}  fit failed: {}", row.r0, row.h, row.error.as_deref().unwrap_or("")),
        }
    }
    prepare_out(cfg)?;
    let mut doc = header(cfg, "kwcheck");
    doc.insert("kazdan_warner".into(), json!(kw));
    doc.insert("critical_points".into(), json!(rows));
    write_json(&cfg.out.join("kwcheck.json"), &Value::Object(doc))
}
