//! Gauss quadrature for the weight `sin^{n-2}(s) ds` on `[0, pi]`, i.e. the
//! Gegenbauer weight `(1 - x^2)^{(n-3)/2}` in `x = cos s`.
//!
//! Nodes come from the eigenvalues of the Jacobi matrix (implicit QL), polished
//! by Newton on `q_M(cos s)`; weights use the Christoffel sum `1 / sum q_k^2`
//! over the orthonormal polynomials.

use std::f64::consts::PI;

/// `int_0^pi sin^m(s) ds`, via the Wallis recursion.
pub fn sine_power_integral(m: usize) -> f64 {
    let (mut val, start) = if m % 2 == 0 { (PI, 0) } else { (2.0, 1) };
    let mut k = start + 2;
    while k <= m {
        val *= (k - 1) as f64 / k as f64;
        k += 2;
    }
    val
}

/// Area of the unit sphere `S^m` in `R^{m+1}`.
pub fn sphere_area(m: usize) -> f64 {
    let (mut a, start) = if m % 2 == 0 { (2.0, 0) } else { (2.0 * PI, 1) };
    let mut k = start + 2;
    while k <= m {
        a *= 2.0 * PI / (k - 1) as f64;
        k += 2;
    }
    a
}

/// Three-term recurrence for the polynomials orthonormal against
/// `(1 - x^2)^{nu - 1/2}`, with `nu = (n-2)/2`:
/// `b_{k+1} q_{k+1} = x q_k - b_k q_{k-1}`.
#[derive(Debug, Clone)]
pub struct Recurrence {
    /// `b[k]` for `k = 0..len`; `b[0]` is unused (zero).
    pub b: Vec<f64>,
    /// Constant polynomial value, `1 / sqrt(int weight)`.
    pub q0: f64,
}

impl Recurrence {
    pub fn new(n: usize, len: usize) -> Self {
        let nu = 0.5 * (n as f64 - 2.0);
        let mut b = vec![0.0; len + 1];
        for (k, bk) in b.iter_mut().enumerate().skip(1) {
            let kf = k as f64;
            let beta = kf * (kf + 2.0 * nu - 1.0) / (4.0 * (kf + nu) * (kf + nu - 1.0));
            *bk = beta.sqrt();
        }
        let q0 = 1.0 / sine_power_integral(n - 2).sqrt();
        Self { b, q0 }
    }

    /// Fills `out[k] = q_k(x)` for `k < out.len()`.
    pub fn eval(&self, x: f64, out: &mut [f64]) {
        if out.is_empty() {
            return;
        }
        out[0] = self.q0;
        if out.len() > 1 {
            out[1] = x * self.q0 / self.b[1];
        }
        for k in 1..out.len().saturating_sub(1) {
            out[k + 1] = (x * out[k] - self.b[k] * out[k - 1]) / self.b[k + 1];
        }
    }

    /// `q_m(x)` and `q_m'(x)`.
    fn eval_with_derivative(&self, x: f64, m: usize) -> (f64, f64) {
        let (mut p_prev, mut p) = (0.0, self.q0);
        let (mut d_prev, mut d) = (0.0, 0.0);
        for k in 0..m {
            let bk = if k == 0 { 0.0 } else { self.b[k] };
            let p_next = (x * p - bk * p_prev) / self.b[k + 1];
            let d_next = (p + x * d - bk * d_prev) / self.b[k + 1];
            p_prev = p;
            p = p_next;
            d_prev = d;
            d = d_next;
        }
        (p, d)
    }
}

/// Eigenvalues of a symmetric tridiagonal matrix with zero diagonal and
/// off-diagonal `off[1..m]` (implicit QL with Wilkinson shifts).
fn tridiagonal_eigenvalues(off: &[f64], m: usize) -> Vec<f64> {
    let mut d = vec![0.0f64; m];
    let mut e = vec![0.0; m];
    e[..m - 1].copy_from_slice(&off[1..m]);
    for l in 0..m {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < m {
                let dd = d[mm].abs() + d[mm + 1].abs();
                if e[mm].abs() <= f64::EPSILON * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            iter += 1;
            assert!(iter < 100, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[mm] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = mm;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }
    d
}

/// Gauss rule with `m` nodes: returns colatitudes `s_j` (increasing) and
/// weights for `int_0^pi f(s) sin^{n-2}(s) ds`. Exact for polynomials in
/// `cos s` of degree `<= 2m - 1`.
pub fn gauss_gegenbauer(n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    let rec = Recurrence::new(n, m);
    let mut x = tridiagonal_eigenvalues(&rec.b, m);
    x.sort_by(|a, b| b.partial_cmp(a).unwrap());

    // Newton in the angle keeps full relative accuracy near the poles.
    let mut theta: Vec<f64> = x.iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect();
    for th in theta.iter_mut() {
        for _ in 0..4 {
            let c = th.cos();
            let (q, dq) = rec.eval_with_derivative(c, m);
            let slope = -th.sin() * dq;
            if slope == 0.0 {
                break;
            }
            let step = q / slope;
            *th -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
    }
    // Symmetrize about the equator.
    for j in 0..m / 2 {
        let avg = 0.5 * (theta[j] + (PI - theta[m - 1 - j]));
        theta[j] = avg;
        theta[m - 1 - j] = PI - avg;
    }
    if m % 2 == 1 {
        theta[m / 2] = 0.5 * PI;
    }

    let mut q = vec![0.0; m];
    let weights = theta
        .iter()
        .map(|th| {
            rec.eval(th.cos(), &mut q);
            1.0 / q.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    (theta, weights)
}
