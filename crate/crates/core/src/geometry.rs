//! Coordinate machinery on the closed unit ball `B^n`.
//!
//! Chart: `B^n` is the unit ball centred at the origin, written `z = (y, s)` with
//! `y` the `n-1` tangential coordinates and `s` the axial one. The south pole is
//! `(0, -1)`, the north pole `(0, 1)`. The stereographic extension sends the
//! ball onto the half-space `{t <= -1}` and the boundary sphere onto the plane
//! `t = -1`, the south pole landing on `(0, -1)`.
//!
//! Distances "from the south pole" use `|z|_S^2 = |y|^2 + (s + 1)^2`; on the
//! boundary sphere a point at colatitude `r` (measured from the south pole) has
//! `|z|_S = 2 sin(r/2)` and axial height `1 - cos r` above the south pole.

use crate::error::{Error, Result};

/// Boundary identities hold to this tolerance.
pub const GEOMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BallPoint {
    pub y: Vec<f64>,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

impl BallPoint {
    pub fn new(y: Vec<f64>, s: f64) -> Self {
        Self { y, s }
    }

    /// Ambient dimension `n`.
    pub fn dim(&self) -> usize {
        self.y.len() + 1
    }

    pub fn norm_sq(&self) -> f64 {
        norm2(&self.y) + self.s * self.s
    }

    /// Squared distance to the south pole `(0, -1)`.
    pub fn south_dist_sq(&self) -> f64 {
        norm2(&self.y) + (self.s + 1.0) * (self.s + 1.0)
    }

    /// The boundary point at colatitude `r` along the first tangential axis.
    pub fn on_sphere(n: usize, r: f64) -> Self {
        let mut y = vec![0.0; n - 1];
        y[0] = r.sin();
        Self { y, s: -r.cos() }
    }
}

impl HalfSpacePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn dim(&self) -> usize {
        self.x.len() + 1
    }

    /// Squared distance to `(0, -1)`, the image of the south pole.
    pub fn base_dist_sq(&self) -> f64 {
        norm2(&self.x) + (self.t + 1.0) * (self.t + 1.0)
    }
}

/// The shared rational map `(a, b) -> (4a / D, (|a|^2 + (b+1)^2 - 4) / D)` with
/// `D = |a|^2 + (b-1)^2`. It is an involution, so it realizes both directions.
fn stereo_involution(a: &[f64], b: f64) -> (Vec<f64>, f64) {
    let a2 = norm2(a);
    let d = a2 + (b - 1.0) * (b - 1.0);
    let x = a.iter().map(|v| 4.0 * v / d).collect();
    let t = (a2 + (b + 1.0) * (b + 1.0) - 4.0) / d;
    (x, t)
}

/// Stereographic extension from the north pole, ball to half-space.
pub fn stereo_to_halfspace(z: &BallPoint) -> Result<HalfSpacePoint> {
    let d = norm2(&z.y) + (z.s - 1.0) * (z.s - 1.0);
    if d < 1e-300 {
        return Err(Error::Singular("north pole"));
    }
    let (x, t) = stereo_involution(&z.y, z.s);
    Ok(HalfSpacePoint { x, t })
}

/// Inverse of [`stereo_to_halfspace`].
pub fn stereo_to_ball(zp: &HalfSpacePoint) -> Result<BallPoint> {
    if zp.t > -1.0 + GEOMETRY_TOL {
        return Err(Error::Domain(format!("t = {} > -1", zp.t)));
    }
    let (y, s) = stereo_involution(&zp.x, zp.t);
    Ok(BallPoint { y, s })
}

/// Scalar of the pulled-back Euclidean metric, `16 / (|x|^2 + (t-1)^2)^2`.
pub fn conformal_factor(zp: &HalfSpacePoint) -> f64 {
    let d = norm2(&zp.x) + (zp.t - 1.0) * (zp.t - 1.0);
    16.0 / (d * d)
}

/// Axis dilation `(x, t) -> (beta x, beta (t + 1) - 1)`.
pub fn dilation(zp: &HalfSpacePoint, beta: f64) -> Result<HalfSpacePoint> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::Domain(format!("dilation factor {beta} must be positive")));
    }
    Ok(HalfSpacePoint {
        x: zp.x.iter().map(|v| beta * v).collect(),
        t: beta * (zp.t + 1.0) - 1.0,
    })
}

/// Colatitude of a boundary point from its chordal distance to the south pole.
pub fn chordal_to_geodesic(chordal: f64) -> Result<f64> {
    if !(-GEOMETRY_TOL..=2.0 + GEOMETRY_TOL).contains(&chordal) {
        return Err(Error::Domain(format!("chordal distance {chordal} outside [0, 2]")));
    }
    Ok(2.0 * (chordal.clamp(0.0, 2.0) / 2.0).asin())
}

/// Inversion in the unit sphere: returns `x / |x|^2` and the Kelvin weight
/// `|x|^{2-n}`, `n = x.len()`. Composing `weight * f(point)` realizes the
/// Kelvin transform of `f`.
pub fn kelvin_point(x: &[f64]) -> Result<(Vec<f64>, f64)> {
    let r2 = norm2(x);
    if r2 < 1e-300 {
        return Err(Error::Singular("origin"));
    }
    let n = x.len() as i32;
    let inv = x.iter().map(|v| v / r2).collect();
    Ok((inv, r2.sqrt().powi(2 - n)))
}

/// Boundary form of the half-space dilation: the colatitude map
/// `r -> 2 atan(beta tan(r/2))`.
pub fn dilate_colatitude(r: f64, beta: f64) -> f64 {
    let half = 0.5 * r;
    2.0 * (beta * half.sin()).atan2(half.cos())
}

/// Linear stretch `dr'/dr` of [`dilate_colatitude`]; the map is conformal, so
/// this is also the tangential scale factor.
pub fn dilation_stretch(r: f64, beta: f64) -> f64 {
    let (sn, cs) = (0.5 * r).sin_cos();
    beta / (cs * cs + beta * beta * sn * sn)
}
