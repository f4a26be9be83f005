//! Airy function, its integrals, the Airy kernel and the soft-edge limit
//! kernels for β = 1, 2, 4.
//!
//! `Ai` and `Ai′` are tabulated at checkpoints spaced 0.25 apart by Taylor
//! stepping of `y″ = xy`: backward from the exponentially small asymptotic
//! values at `x = 9`, and forward from the exact values at `x = 0` into the
//! oscillatory region. Arbitrary arguments are reached by a short Taylor step
//! from the nearest checkpoint. Right of the table the large-argument
//! asymptotic series is used, and far left the oscillatory one.
//!
//! The β = 4 limit kernel is returned as `K^(4)` itself, i.e. half of the
//! matrix whose entries involve `K_Airy` without prefactor.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::Beta;
use crate::quadrature::GaussLegendre;

pub const AI_ZERO: f64 = 0.355_028_053_887_817_239_26;
pub const AI_PRIME_ZERO: f64 = -0.258_819_403_792_806_798_405;

/// Supported argument range of [`airy_eval`].
pub const SUPPORTED_RANGE: (f64, f64) = (-15.0, 30.0);

const TABLE_LO: f64 = -20.0;
const TABLE_HI: f64 = 9.0;
const TABLE_STEP: f64 = 0.25;

/// Switch from ratio to integral representation of `K_Airy`.
pub const KERNEL_DIAGONAL_TAU: f64 = 1e-3;
/// Switch for `∂_η K_Airy`, whose ratio form loses two powers of the gap.
pub const KERNEL_DERIVATIVE_TAU: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AiryValue {
    pub ai: f64,
    pub ai_prime: f64,
    /// `∫_x^∞ Ai(t) dt`.
    pub tail_integral: f64,
}

impl AiryValue {
    /// `∫_{-∞}^x Ai(t) dt`.
    pub fn head_integral(&self) -> f64 {
        1.0 - self.tail_integral
    }
}

struct Table {
    ai: Vec<f64>,
    aip: Vec<f64>,
    tail: Vec<f64>,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(build_table)
}

fn table_len() -> usize {
    ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize + 1
}

fn table_x(k: usize) -> f64 {
    TABLE_LO + TABLE_STEP * k as f64
}

/// Taylor coefficients of the solution of `y″ = xy` about `x0` with
/// `y(x0) = y0`, `y′(x0) = y1`, truncated once they no longer contribute at
/// radius `r`.
fn taylor_coefficients(x0: f64, y0: f64, y1: f64, r: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(y0);
    out.push(y1);
    out.push(0.5 * x0 * y0);
    let scale = y0.abs().max(y1.abs()).max(f64::MIN_POSITIVE);
    let mut small = 0;
    let mut n = 1;
    while n < 120 {
        let c = (x0 * out[n] + out[n - 1]) / ((n + 2) * (n + 1)) as f64;
        out.push(c);
        n += 1;
        if (c * r.powi(n as i32 + 1)).abs() < 1e-19 * scale {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
}

/// Evaluates the series at offset `s`: value, derivative and `∫_0^s`.
fn taylor_eval(c: &[f64], s: f64) -> (f64, f64, f64) {
    let mut y = 0.0;
    let mut dy = 0.0;
    let mut iy = 0.0;
    for (n, &cn) in c.iter().enumerate().rev() {
        y = y * s + cn;
        iy = iy * s + cn / (n + 1) as f64;
        if n >= 1 {
            dy = dy * s + n as f64 * cn;
        }
    }
    (y, dy, iy * s)
}

fn build_table() -> Table {
    let n = table_len();
    let mut ai = vec![0.0; n];
    let mut aip = vec![0.0; n];
    let mut tail = vec![0.0; n];
    let k0 = ((0.0 - TABLE_LO) / TABLE_STEP).round() as usize;
    let mut c = Vec::with_capacity(64);

    // positive side, marching left from the asymptotic region
    let top = n - 1;
    let (a, ap) = asymptotic_positive(TABLE_HI);
    ai[top] = a;
    aip[top] = ap;
    tail[top] = asymptotic_tail(TABLE_HI);
    for k in (k0..top).rev() {
        let x1 = table_x(k + 1);
        taylor_coefficients(x1, ai[k + 1], aip[k + 1], TABLE_STEP, &mut c);
        let (y, dy, iy) = taylor_eval(&c, -TABLE_STEP);
        ai[k] = y;
        aip[k] = dy;
        // ∫_{x1-h}^{x1} = -∫_0^{-h}
        tail[k] = tail[k + 1] - iy;
    }

    // negative side, marching left from the exact values at the origin
    ai[k0] = AI_ZERO;
    aip[k0] = AI_PRIME_ZERO;
    for k in (0..k0).rev() {
        let x1 = table_x(k + 1);
        taylor_coefficients(x1, ai[k + 1], aip[k + 1], TABLE_STEP, &mut c);
        let (y, dy, iy) = taylor_eval(&c, -TABLE_STEP);
        ai[k] = y;
        aip[k] = dy;
        tail[k] = tail[k + 1] - iy;
    }
    Table { ai, aip, tail }
}

/// Large positive argument expansion of `(Ai, Ai′)`.
fn asymptotic_positive(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x.powf(1.5);
    let mut u = 1.0;
    let mut su = 1.0;
    let mut sv = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let kf = k as f64;
        u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
        let v = -(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * u;
        let zk = zeta.powi(k);
        let tu = u / zk;
        if tu.abs() > last {
            break;
        }
        last = tu.abs();
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        su += sign * tu;
        sv += sign * v / zk;
        if tu.abs() < 1e-18 {
            break;
        }
    }
    let e = (-zeta).exp() / (2.0 * PI.sqrt());
    let q = x.powf(0.25);
    (e / q * su, -e * q * sv)
}

/// `∫_x^∞ Ai` for large positive `x` by quadrature of the asymptotic series.
fn asymptotic_tail(x: f64) -> f64 {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    let rule = RULE.get_or_init(|| GaussLegendre::new(20));
    let len = (40.0 / x.sqrt()).max(2.0);
    rule.integrate_composite(x, x + len, 4, |t| asymptotic_positive(t).0)
}

/// Large negative argument expansion, returns `(Ai(x), Ai′(x))` for `x < 0`.
fn asymptotic_negative(x: f64) -> (f64, f64) {
    let y = -x;
    let zeta = 2.0 / 3.0 * y.powf(1.5);
    // u_k, v_k
    let mut u = vec![1.0];
    let mut v = vec![1.0];
    for k in 1..40 {
        let kf = k as f64;
        let uk = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        u.push(uk);
        v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk);
    }
    let sum = |c: &[f64], offset: usize| {
        let mut s = 0.0;
        let mut last = f64::INFINITY;
        let mut k = 0;
        while 2 * k + offset < c.len() {
            let i = 2 * k + offset;
            let t = c[i] / zeta.powi(i as i32);
            if t.abs() > last {
                break;
            }
            last = t.abs();
            s += if k % 2 == 0 { t } else { -t };
            k += 1;
        }
        s
    };
    let phase = zeta + PI / 4.0;
    let (sn, cs) = phase.sin_cos();
    let q = y.powf(0.25);
    let ai = (sn * sum(&u, 0) - cs * sum(&u, 1)) / (PI.sqrt() * q);
    let aip = -q / PI.sqrt() * (cs * sum(&v, 0) + sn * sum(&v, 1));
    (ai, aip)
}

/// `∫_{-∞}^x Ai` for large negative `x`, by repeated integration by parts of
/// `Ai = Ai″/t`.
fn asymptotic_head(x: f64, ai: f64, aip: f64) -> f64 {
    // F_k = Ai' x^{-k-1} + (k+1) Ai x^{-k-2} + (k+1)(k+2) F_{k+3}
    let mut total = 0.0;
    let mut factor = 1.0;
    let mut k = 0.0f64;
    let mut last = f64::INFINITY;
    loop {
        let term = factor * (aip * x.powf(-k - 1.0) + (k + 1.0) * ai * x.powf(-k - 2.0));
        if term.abs() > last || k > 300.0 {
            break;
        }
        last = term.abs();
        total += term;
        if term.abs() < 1e-18 {
            break;
        }
        factor *= (k + 1.0) * (k + 2.0);
        k += 3.0;
    }
    total
}

/// `Ai`, `Ai′` and `∫_x^∞ Ai` without a range check. Accurate on the whole
/// real line; below the tabulated range the oscillatory asymptotics are used.
pub fn airy_unchecked(x: f64) -> AiryValue {
    if x >= TABLE_HI {
        let (ai, ai_prime) = asymptotic_positive(x);
        let tail_integral = if ai == 0.0 { 0.0 } else { asymptotic_tail(x) };
        return AiryValue { ai, ai_prime, tail_integral };
    }
    if x < TABLE_LO {
        let (ai, ai_prime) = asymptotic_negative(x);
        let head = asymptotic_head(x, ai, ai_prime);
        return AiryValue { ai, ai_prime, tail_integral: 1.0 - head };
    }
    let t = table();
    let k = (((x - TABLE_LO) / TABLE_STEP).round() as usize).min(table_len() - 1);
    let x0 = table_x(k);
    let s = x - x0;
    if s == 0.0 {
        return AiryValue { ai: t.ai[k], ai_prime: t.aip[k], tail_integral: t.tail[k] };
    }
    let mut c = Vec::with_capacity(64);
    taylor_coefficients(x0, t.ai[k], t.aip[k], s.abs(), &mut c);
    let (ai, ai_prime, iy) = taylor_eval(&c, s);
    AiryValue { ai, ai_prime, tail_integral: t.tail[k] - iy }
}

/// `Ai(x)`, `Ai′(x)` and `∫_x^∞ Ai` for `x` in [`SUPPORTED_RANGE`].
pub fn airy_eval(x: f64) -> Result<AiryValue> {
    let (lo, hi) = SUPPORTED_RANGE;
    if !(lo..=hi).contains(&x) {
        return Err(Error::OutOfRange { value: x, lo, hi });
    }
    Ok(airy_unchecked(x))
}

pub fn ai(x: f64) -> f64 {
    airy_unchecked(x).ai
}

fn kernel_rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Upper cutoff of the `z`-integrals: beyond it `Ai(z + min(ξ, η))` is below
/// `e^{-2/3 · 14^{3/2}} ≈ 1e-15`.
fn z_cutoff(xi: f64, eta: f64) -> f64 {
    (14.0 - xi.min(eta)).max(6.0)
}

/// `∫_0^Z f(z) dz` with unit-width 16-point panels.
fn integrate_z<F: FnMut(f64) -> f64>(zmax: f64, f: F) -> f64 {
    let panels = zmax.ceil() as usize;
    kernel_rule().integrate_composite(0.0, zmax, panels, f)
}

/// `K_Airy(ξ, η)` from the ratio `(Ai(ξ)Ai′(η) − Ai′(ξ)Ai(η)) / (ξ − η)`.
pub fn airy_kernel_ratio(xi: f64, eta: f64) -> f64 {
    let a = airy_unchecked(xi);
    let b = airy_unchecked(eta);
    (a.ai * b.ai_prime - a.ai_prime * b.ai) / (xi - eta)
}

/// `K_Airy(ξ, η)` from `∫_0^∞ Ai(z + ξ) Ai(z + η) dz`.
pub fn airy_kernel_integral(xi: f64, eta: f64) -> f64 {
    integrate_z(z_cutoff(xi, eta), |z| ai(z + xi) * ai(z + eta))
}

pub fn airy_kernel(xi: f64, eta: f64) -> f64 {
    if (xi - eta).abs() > KERNEL_DIAGONAL_TAU {
        airy_kernel_ratio(xi, eta)
    } else if xi == eta {
        let a = airy_unchecked(xi);
        a.ai_prime * a.ai_prime - xi * a.ai * a.ai
    } else {
        airy_kernel_integral(xi, eta)
    }
}

/// `∂_η K_Airy(ξ, η)`.
pub fn airy_kernel_deta(xi: f64, eta: f64) -> f64 {
    let d = xi - eta;
    if d.abs() > KERNEL_DERIVATIVE_TAU {
        let a = airy_unchecked(xi);
        let b = airy_unchecked(eta);
        let num = a.ai * b.ai_prime - a.ai_prime * b.ai;
        let dnum = a.ai * eta * b.ai - a.ai_prime * b.ai_prime;
        dnum / d + num / (d * d)
    } else if d == 0.0 {
        let a = ai(xi);
        -0.5 * a * a
    } else {
        integrate_z(z_cutoff(xi, eta), |z| {
            ai(z + xi) * airy_unchecked(z + eta).ai_prime
        })
    }
}

/// `∫_ξ^∞ K_Airy(t, η) dt = ∫_0^∞ Ai(z + η) ∫_{z+ξ}^∞ Ai dz`.
pub fn airy_kernel_tail(xi: f64, eta: f64) -> f64 {
    integrate_z(z_cutoff(xi, eta), |z| {
        ai(z + eta) * airy_unchecked(z + xi).tail_integral
    })
}

/// Kernel values on all pairs of a point set, computed through a shared
/// `z`-grid so that every entry is a matrix product.
#[derive(Clone, Debug)]
pub struct AiryMatrices {
    /// `K_Airy(x_i, x_j)`.
    pub kernel: DMatrix<f64>,
    /// `∂_η K_Airy(x_i, x_j)`.
    pub deta: DMatrix<f64>,
    /// `∫_{x_i}^∞ K_Airy(t, x_j) dt`.
    pub tail: DMatrix<f64>,
    /// `Ai(x_i)`, `∫_{x_i}^∞ Ai`.
    pub ai: Vec<f64>,
    pub tail_integral: Vec<f64>,
}

pub fn airy_matrices(points: &[f64]) -> AiryMatrices {
    let n = points.len();
    let lo = points.iter().cloned().fold(f64::INFINITY, f64::min);
    let zmax = z_cutoff(lo, lo);
    let panels = zmax.ceil() as usize;
    let rule = kernel_rule();
    let mut z = Vec::with_capacity(panels * rule.len());
    let mut w = Vec::with_capacity(z.capacity());
    let h = zmax / panels as f64;
    for p in 0..panels {
        let (x, wt) = rule.mapped(h * p as f64, h * (p + 1) as f64);
        z.extend(x);
        w.extend(wt);
    }
    let nz = z.len();
    let mut a = DMatrix::zeros(n, nz);
    let mut ap = DMatrix::zeros(n, nz);
    let mut it = DMatrix::zeros(n, nz);
    for (i, &x) in points.iter().enumerate() {
        for (k, &zk) in z.iter().enumerate() {
            let v = airy_unchecked(zk + x);
            a[(i, k)] = v.ai * w[k];
            ap[(i, k)] = v.ai_prime;
            it[(i, k)] = v.tail_integral;
        }
    }
    let mut plain = a.clone();
    for k in 0..nz {
        let wk = w[k];
        for i in 0..n {
            plain[(i, k)] /= wk;
        }
    }
    let kernel = &a * plain.transpose();
    let deta = &a * ap.transpose();
    let tail = &it * a.transpose();
    let vals: Vec<AiryValue> = points.iter().map(|&x| airy_unchecked(x)).collect();
    AiryMatrices {
        kernel,
        deta,
        tail,
        ai: vals.iter().map(|v| v.ai).collect(),
        tail_integral: vals.iter().map(|v| v.tail_integral).collect(),
    }
}

/// One evaluation of a limiting kernel. For β = 2 `entries` has a single
/// element; otherwise it is `[11, 12, 21, 22]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitKernelSample {
    pub beta: Beta,
    pub xi: f64,
    pub eta: f64,
    pub entries: Vec<f64>,
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Entries `[11, 12, 21, 22]` of `K^(1)` from precomputed pieces.
pub(crate) fn beta1_entries(
    k_xy: f64,
    k_yx: f64,
    deta: f64,
    tail: f64,
    (ai_x, int_x): (f64, f64),
    (ai_y, int_y): (f64, f64),
    diff: f64,
) -> [f64; 4] {
    let e11 = k_xy + 0.5 * ai_x * (1.0 - int_y);
    let e22 = k_yx + 0.5 * ai_y * (1.0 - int_x);
    let e12 = -deta - 0.5 * ai_x * ai_y;
    let e21 = -tail - 0.5 * (int_x - int_y) + 0.5 * int_x * int_y - 0.5 * sgn(diff);
    [e11, e12, e21, e22]
}

/// Entries `[11, 12, 21, 22]` of `K^(4)`.
pub(crate) fn beta4_entries(
    k_xy: f64,
    k_yx: f64,
    deta: f64,
    tail: f64,
    (ai_x, int_x): (f64, f64),
    (ai_y, int_y): (f64, f64),
) -> [f64; 4] {
    let e11 = k_xy - 0.5 * ai_x * int_y;
    let e22 = k_yx - 0.5 * ai_y * int_x;
    let e12 = -deta - 0.5 * ai_x * ai_y;
    let e21 = -tail + 0.5 * int_x * int_y;
    [0.5 * e11, 0.5 * e12, 0.5 * e21, 0.5 * e22]
}

pub fn limit_kernel(beta: Beta, xi: f64, eta: f64) -> LimitKernelSample {
    let entries = match beta {
        Beta::Unitary => vec![airy_kernel(xi, eta)],
        _ => {
            let k = airy_kernel(xi, eta);
            let a = airy_unchecked(xi);
            let b = airy_unchecked(eta);
            let deta = airy_kernel_deta(xi, eta);
            let tail = airy_kernel_tail(xi, eta);
            let px = (a.ai, a.tail_integral);
            let py = (b.ai, b.tail_integral);
            if beta == Beta::Orthogonal {
                beta1_entries(k, k, deta, tail, px, py, xi - eta).to_vec()
            } else {
                beta4_entries(k, k, deta, tail, px, py).to_vec()
            }
        }
    };
    LimitKernelSample { beta, xi, eta, entries }
}

/// Limiting density of eigenvalues near the edge in the scaled variable.
pub fn edge_density(beta: Beta, t: f64) -> f64 {
    let a = airy_unchecked(t);
    let k = a.ai_prime * a.ai_prime - t * a.ai * a.ai;
    match beta {
        Beta::Unitary => k,
        Beta::Orthogonal => k + 0.5 * a.ai * a.head_integral(),
        Beta::Symplectic => 0.25 * k - 0.125 * a.ai * a.tail_integral,
    }
}

/// Both sides of the identity
/// `−∫_ξ^η K(t,η)dt + ½(∫_ξ^η Ai)(∫_η^∞ Ai) = −∫_ξ^∞ K(t,η)dt + ½(∫_ξ^∞ Ai)(∫_η^∞ Ai)`.
#[derive(Clone, Copy, Debug)]
pub struct SkewIdentity {
    pub finite_form: f64,
    pub tail_form: f64,
}

impl SkewIdentity {
    pub fn residual(&self) -> f64 {
        (self.finite_form - self.tail_form).abs()
    }
}

pub fn skew_identity_sides(xi: f64, eta: f64) -> SkewIdentity {
    let a = airy_unchecked(xi);
    let b = airy_unchecked(eta);
    let finite_form = if xi == eta {
        0.0
    } else {
        let panels = ((eta - xi).abs().ceil() as usize).max(1) * 2;
        let k = kernel_rule().integrate_composite(xi, eta, panels, |t| airy_kernel(t, eta));
        -k + 0.5 * (a.tail_integral - b.tail_integral) * b.tail_integral
    };
    let tail_form = -airy_kernel_tail(xi, eta) + 0.5 * a.tail_integral * b.tail_integral;
    SkewIdentity { finite_form, tail_form }
}

/// Absolute difference of the two sides of the skew identity.
pub fn check_skew_identity(xi: f64, eta: f64) -> f64 {
    skew_identity_sides(xi, eta).residual()
}
