//! Prescribed boundary curvature profiles `h(r)` on the colatitude interval.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `|h'|` below this counts as a critical point.
pub const CRITICAL_TOL: f64 = 1e-8;

/// Local model `h(r) = h(r0) + a |r - r0|^alpha + o(|r - r0|^alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub r0: f64,
    pub a: f64,
    pub alpha: f64,
}

impl CriticalPoint {
    pub fn is_max(&self) -> bool {
        self.a < 0.0
    }
}

/// Natural cubic spline through tabulated samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::ProfileParameter(format!(
                "tabulated profile needs at least 3 matching samples, got {} r and {} h",
                n,
                y.len()
            )));
        }
        if !x.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::ProfileParameter("tabulated r must be strictly increasing".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::ProfileParameter("tabulated samples must be finite".into()));
        }
        // tridiagonal solve for the interior second derivatives (Thomas algorithm)
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let rhs = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (rhs - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { x, y, m })
    }

    fn segment(&self, t: f64) -> usize {
        let k = self.x.partition_point(|v| *v <= t);
        k.clamp(1, self.x.len() - 1) - 1
    }

    pub fn value(&self, t: f64) -> f64 {
        let t = t.clamp(self.x[0], self.x[self.x.len() - 1]);
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let t = t.clamp(self.x[0], self.x[self.x.len() - 1]);
        let i = self.segment(t);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h
            + ((1.0 - 3.0 * a * a) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) * h / 6.0
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Constant(f64),
    /// `cos r`.
    Monotone,
    /// `1 - a sin^alpha r`.
    TwoBump { alpha: f64, a: f64 },
    /// `1 + amp cos 2r`.
    Cos2 { amp: f64 },
    /// `h0 + a r^alpha + k2 r^2`.
    Power { h0: f64, a: f64, alpha: f64, k2: f64 },
    Tabulated(CubicSpline),
}

/// An axisymmetric curvature function `h(r)`, `r` the colatitude from the south pole.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureProfile {
    name: String,
    shape: Shape,
    scale: f64,
    critical: Vec<CriticalPoint>,
}

impl CurvatureProfile {
    pub fn constant(c: f64) -> Self {
        Self { name: format!("constant(c={c})"), shape: Shape::Constant(c), scale: 1.0, critical: Vec::new() }
    }

    pub fn monotone() -> Self {
        Self {
            name: "monotone".into(),
            shape: Shape::Monotone,
            scale: 1.0,
            critical: vec![
                CriticalPoint { r0: 0.0, a: -0.5, alpha: 2.0 },
                CriticalPoint { r0: PI, a: 0.5, alpha: 2.0 },
            ],
        }
    }

    /// `1 - a sin^alpha r`: equal maxima `1` at both poles, a dip to `1 - a` at the equator.
    pub fn two_bump(alpha: f64, a: f64) -> Result<Self> {
        if !(alpha > 0.0) || a == 0.0 || !a.is_finite() {
            return Err(Error::ProfileParameter(format!("two_bump needs alpha > 0 and a != 0, got alpha={alpha}, a={a}")));
        }
        Ok(Self {
            name: format!("two_bump(alpha={alpha}, a={a})"),
            shape: Shape::TwoBump { alpha, a },
            scale: 1.0,
            critical: vec![
                CriticalPoint { r0: 0.0, a: -a, alpha },
                CriticalPoint { r0: 0.5 * PI, a: 0.5 * a * alpha, alpha: 2.0 },
                CriticalPoint { r0: PI, a: -a, alpha },
            ],
        })
    }

    pub fn cos2(amp: f64) -> Result<Self> {
        if amp == 0.0 || !amp.is_finite() {
            return Err(Error::ProfileParameter(format!("cos2 needs amp != 0, got {amp}")));
        }
        Ok(Self {
            name: format!("cos2(amp={amp})"),
            shape: Shape::Cos2 { amp },
            scale: 1.0,
            critical: vec![
                CriticalPoint { r0: 0.0, a: -2.0 * amp, alpha: 2.0 },
                CriticalPoint { r0: 0.5 * PI, a: 2.0 * amp, alpha: 2.0 },
                CriticalPoint { r0: PI, a: -2.0 * amp, alpha: 2.0 },
            ],
        })
    }

    /// `h0 + a r^alpha + k2 r^2`, used to plant a known flatness exponent at `r = 0`.
    pub fn power(h0: f64, a: f64, alpha: f64, k2: f64) -> Result<Self> {
        if !(alpha > 0.0) || a == 0.0 || !a.is_finite() || !h0.is_finite() || !k2.is_finite() {
            return Err(Error::ProfileParameter(format!("power needs alpha > 0 and a != 0, got alpha={alpha}, a={a}")));
        }
        let critical = if alpha > 1.0 { vec![CriticalPoint { r0: 0.0, a, alpha }] } else { Vec::new() };
        Ok(Self { name: format!("power(h0={h0}, a={a}, alpha={alpha}, k2={k2})"), shape: Shape::Power { h0, a, alpha, k2 }, scale: 1.0, critical })
    }

    /// Spline through `(r_i, h_i)` samples; critical points are detected, not declared.
    pub fn tabulated(r: Vec<f64>, h: Vec<f64>) -> Result<Self> {
        let spline = CubicSpline::new(r, h)?;
        let mut prof = Self { name: "tabulated".into(), shape: Shape::Tabulated(spline), scale: 1.0, critical: Vec::new() };
        let found = find_critical_points(&prof, 4096);
        prof.critical = found
            .into_iter()
            .filter_map(|r0| flatness_fit(&prof, r0, 3).ok().map(|f| CriticalPoint { r0, a: f.a, alpha: f.alpha }))
            .collect();
        Ok(prof)
    }

    /// `c * h` with the same critical points.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale *= c;
        for cp in &mut out.critical {
            cp.a *= c;
        }
        out.name = format!("{c}*{}", self.name);
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn critical_points(&self) -> &[CriticalPoint] {
        &self.critical
    }

    /// Declared local maxima with positive value.
    pub fn positive_maxima(&self) -> Vec<CriticalPoint> {
        self.critical.iter().copied().filter(|c| c.is_max() && self.value(c.r0) > 0.0).collect()
    }

    pub fn value(&self, r: f64) -> f64 {
        let v = match &self.shape {
            Shape::Constant(c) => *c,
            Shape::Monotone => r.cos(),
            Shape::TwoBump { alpha, a } => 1.0 - a * r.sin().abs().powf(*alpha),
            Shape::Cos2 { amp } => 1.0 + amp * (2.0 * r).cos(),
            Shape::Power { h0, a, alpha, k2 } => h0 + a * r.abs().powf(*alpha) + k2 * r * r,
            Shape::Tabulated(s) => s.value(r),
        };
        self.scale * v
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let d = match &self.shape {
            Shape::Constant(_) => 0.0,
            Shape::Monotone => -r.sin(),
            Shape::TwoBump { alpha, a } => {
                let s = r.sin().abs();
                if s == 0.0 {
                    if *alpha > 1.0 {
                        0.0
                    } else {
                        f64::NAN
                    }
                } else {
                    -a * alpha * s.powf(alpha - 1.0) * r.cos()
                }
            }
            Shape::Cos2 { amp } => -2.0 * amp * (2.0 * r).sin(),
            Shape::Power { a, alpha, k2, .. } => {
                let x = r.abs();
                let lead = if x == 0.0 {
                    if *alpha > 1.0 {
                        0.0
                    } else {
                        f64::NAN
                    }
                } else {
                    a * alpha * x.powf(alpha - 1.0)
                };
                lead + 2.0 * k2 * r
            }
            Shape::Tabulated(s) => s.derivative(r),
        };
        self.scale * d
    }

    /// Smallest value among the declared positive maxima.
    pub fn min_max_value(&self) -> Option<f64> {
        self.positive_maxima().iter().map(|c| self.value(c.r0)).reduce(f64::min)
    }
}

/// Serializable profile description: a builtin name with parameters, or samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProfileSpec {
    Builtin {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, f64>,
    },
    Tabulated {
        r: Vec<f64>,
        h: Vec<f64>,
    },
}

impl ProfileSpec {
    pub fn build(&self) -> Result<CurvatureProfile> {
        match self {
            ProfileSpec::Builtin { name, params } => builtin_profile(name, params),
            ProfileSpec::Tabulated { r, h } => CurvatureProfile::tabulated(r.clone(), h.clone()),
        }
    }
}

/// Names accepted by [`builtin_profile`].
pub const BUILTIN_NAMES: [&str; 5] = ["two_bump", "monotone", "constant", "cos2", "power"];

/// Builds a named profile:
/// `two_bump(alpha=1.5, a=0.5)`, `monotone`, `constant(c=1)`, `cos2(amp=0.3)`,
/// `power(h0=1, a=-1, alpha=1.5, k2=0)`.
pub fn builtin_profile(name: &str, params: &BTreeMap<String, f64>) -> Result<CurvatureProfile> {
    let allowed: &[(&str, f64)] = match name {
        "two_bump" => &[("alpha", 1.5), ("a", 0.5)],
        "monotone" => &[],
        "constant" => &[("c", 1.0)],
        "cos2" => &[("amp", 0.3)],
        "power" => &[("h0", 1.0), ("a", -1.0), ("alpha", 1.5), ("k2", 0.0)],
        _ => return Err(Error::UnknownProfile(name.to_string())),
    };
    if let Some(bad) = params.keys().find(|k| !allowed.iter().any(|(a, _)| a == k)) {
        return Err(Error::ProfileParameter(format!("{name} has no parameter {bad}")));
    }
    let get = |key: &str| params.get(key).copied().unwrap_or_else(|| allowed.iter().find(|(k, _)| *k == key).unwrap().1);
    match name {
        "two_bump" => CurvatureProfile::two_bump(get("alpha"), get("a")),
        "monotone" => Ok(CurvatureProfile::monotone()),
        "constant" => {
            let c = get("c");
            if !c.is_finite() {
                return Err(Error::ProfileParameter(format!("constant needs a finite c, got {c}")));
            }
            Ok(CurvatureProfile::constant(c))
        }
        "cos2" => CurvatureProfile::cos2(get("amp")),
        _ => CurvatureProfile::power(get("h0"), get("a"), get("alpha"), get("k2")),
    }
}

/// Outcome of the sign-change test on `h'` over `{h > 0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KazdanWarnerReport {
    pub holds: bool,
    /// A point with `h > 0` and `h' > 0`.
    pub rising: Option<f64>,
    /// A point with `h > 0` and `h' < 0`.
    pub falling: Option<f64>,
    /// Refined zeros of `h'` inside `{h > 0}`.
    pub sign_changes: Vec<f64>,
}

/// Checks whether `h'` takes both signs on `{h > 0}`, sampling `samples`
/// interior points and refining sign changes of `h'` by bisection.
pub fn kazdan_warner_check(h: &CurvatureProfile, samples: usize) -> KazdanWarnerReport {
    let samples = samples.max(16);
    let mut rising: Option<(f64, f64)> = None;
    let mut falling: Option<(f64, f64)> = None;
    for i in 1..samples {
        let r = PI * i as f64 / samples as f64;
        if h.value(r) <= 0.0 {
            continue;
        }
        let d = h.derivative(r);
        // keep the steepest witness of each sign
        if d > 0.0 && rising.map_or(true, |(_, best)| d > best) {
            rising = Some((r, d));
        }
        if d < 0.0 && falling.map_or(true, |(_, best)| d < best) {
            falling = Some((r, d));
        }
    }
    let sign_changes = find_critical_points(h, samples)
        .into_iter()
        .filter(|r| *r > 0.0 && *r < PI && h.value(*r) > 0.0)
        .collect();
    KazdanWarnerReport {
        holds: rising.is_some() && falling.is_some(),
        rising: rising.map(|w| w.0),
        falling: falling.map(|w| w.0),
        sign_changes,
    }
}

/// Zeros of `h'` on `[0, pi]`: interior sign changes refined by bisection, plus
/// the poles when `|h'|` is below tolerance there.
pub fn find_critical_points(h: &CurvatureProfile, samples: usize) -> Vec<f64> {
    let samples = samples.max(16);
    let mut out = Vec::new();
    if h.derivative(0.0).abs() < CRITICAL_TOL {
        out.push(0.0);
    }
    let grid: Vec<f64> = (0..=samples).map(|i| PI * i as f64 / samples as f64).collect();
    let mut prev = (grid[1], h.derivative(grid[1]));
    for r in &grid[2..samples] {
        let cur = (*r, h.derivative(*r));
        if prev.1 == 0.0 {
            out.push(prev.0);
        } else if prev.1 * cur.1 < 0.0 {
            let (mut lo, mut hi) = (prev.0, cur.0);
            let lo_sign = prev.1.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let dm = h.derivative(mid);
                if dm == 0.0 {
                    lo = mid;
                    hi = mid;
                    break;
                }
                if dm.signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let root = 0.5 * (lo + hi);
            if h.derivative(root).abs() < CRITICAL_TOL {
                out.push(root);
            }
        }
        prev = cur;
    }
    if h.derivative(PI).abs() < CRITICAL_TOL {
        out.push(PI);
    }
    out
}

/// Estimated local exponent and coefficient at a critical point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatnessFit {
    pub alpha: f64,
    pub a: f64,
    pub uncertainty: f64,
    pub admissible: bool,
}

/// Smallest offset sampled by [`flatness_fit`].
pub const FIT_MIN: f64 = 1e-4;
/// Largest offset sampled by [`flatness_fit`].
pub const FIT_MAX: f64 = 1e-1;
pub const FIT_SAMPLES: usize = 32;
/// Floor on the reported uncertainty, so a boundary exponent is never admitted
/// through round-off.
pub const FIT_UNCERTAINTY_FLOOR: f64 = 1e-3;
/// Differences below this fraction of `|h(r0)|` are treated as round-off.
pub const FIT_NOISE: f64 = 1e-11;
/// Fewest usable offsets for a fit.
pub const FIT_MIN_USABLE: usize = 8;

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits `log|h(r) - h(r0)|` against `log|r - r0|` on 32 log-spaced offsets in
/// `[1e-4, 1e-1]`. Offsets where the difference is within round-off of `h(r0)`
/// are dropped. The exponent comes from the smaller half of the remaining
/// offsets, where the remainder is weakest; the uncertainty is its distance
/// from the slope over all of them. Admissible iff `n - 3 < alpha < n - 1`
/// holds with the uncertainty margin on both sides.
pub fn flatness_fit(h: &CurvatureProfile, r0: f64, n: usize) -> Result<FlatnessFit> {
    let slope0 = h.derivative(r0);
    if !(slope0.abs() < CRITICAL_TOL) {
        return Err(Error::NotCritical { r0, slope: slope0 });
    }
    let side = if r0 + FIT_MAX <= PI { 1.0 } else { -1.0 };
    let h0 = h.value(r0);
    let floor = FIT_NOISE * h0.abs().max(f64::MIN_POSITIVE);
    let ratio = (FIT_MAX / FIT_MIN).ln() / (FIT_SAMPLES - 1) as f64;
    let mut lx = Vec::with_capacity(FIT_SAMPLES);
    let mut ly = Vec::with_capacity(FIT_SAMPLES);
    let mut sign = 0.0;
    for i in 0..FIT_SAMPLES {
        let d = FIT_MIN * (ratio * i as f64).exp();
        let diff = h.value(r0 + side * d) - h0;
        if diff.abs() <= floor {
            continue;
        }
        if sign == 0.0 {
            sign = diff.signum();
        } else if diff.signum() != sign {
            return Err(Error::DegenerateFit(d));
        }
        lx.push(d.ln());
        ly.push(diff.abs().ln());
    }
    if lx.len() < FIT_MIN_USABLE {
        return Err(Error::DegenerateFit(FIT_MAX));
    }
    let half = lx.len() / 2;
    let (alpha, intercept) = least_squares(&lx[..half], &ly[..half]);
    let (full, _) = least_squares(&lx, &ly);
    let uncertainty = (alpha - full).abs().max(FIT_UNCERTAINTY_FLOOR);
    let nf = n as f64;
    let admissible = nf - 3.0 < alpha - uncertainty && alpha + uncertainty < nf - 1.0;
    Ok(FlatnessFit { alpha, a: sign * intercept.exp(), uncertainty, admissible })
}
