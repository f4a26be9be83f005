//! Nyström discretizations of scalar and 2×2 block kernels on a truncated
//! half-line, their Fredholm and regularized determinants, finite-N gap
//! probabilities and the limiting largest-eigenvalue distributions.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::airy::{airy_matrices, beta1_entries, beta4_entries};
use crate::error::{Error, Result};
use crate::potential::Beta;
use crate::quadrature::{legendre_sign_matrix, GaussLegendre};
use crate::widom::{EdgeSystem, KernelBlocks};

pub const DEFAULT_ORDER: usize = 60;
/// Determinants in `(−NEGATIVE_CLAMP, 0)` are treated as zero before a square root.
pub const NEGATIVE_CLAMP: f64 = 1e-10;

/// Right end of the truncated half-line `[L0, T]`.
pub fn default_truncation(l0: f64) -> f64 {
    (l0 + 14.0).max(10.0)
}

/// Default conjugating weight `g(ξ) = √(1 + ξ²)` for the β = 1 determinant.
pub fn default_g(xi: f64) -> f64 {
    (1.0 + xi * xi).sqrt()
}

#[derive(Clone, Copy, Debug)]
pub struct GapSettings {
    pub order: usize,
    /// `None` selects [`default_truncation`].
    pub truncation: Option<f64>,
    pub g: fn(f64) -> f64,
}

impl Default for GapSettings {
    fn default() -> Self {
        GapSettings { order: DEFAULT_ORDER, truncation: None, g: default_g }
    }
}

impl GapSettings {
    pub fn with_order(order: usize) -> Self {
        GapSettings { order, ..Default::default() }
    }

    pub fn truncation_for(&self, l0: f64) -> f64 {
        self.truncation.unwrap_or_else(|| default_truncation(l0))
    }
}

/// Discretized operator `K` on `L²([L0, T])` (or its 2×2 block version),
/// stored in the weight-symmetrized form `W^{1/2} K W^{1/2}`.
#[derive(Clone, Debug)]
pub struct NystromOperator {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub kernel_matrix: DMatrix<f64>,
    pub block: bool,
    pub truncation: f64,
    pub order: usize,
}

/// Gauss–Legendre nodes and weights on `[l0, t]`.
pub fn half_line_rule(l0: f64, t: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    GaussLegendre::new(order).mapped(l0, t)
}

impl NystromOperator {
    /// Scalar operator from kernel values `k[(i, l)] = K(x_i, x_l)`.
    pub fn scalar(l0: f64, t: f64, order: usize, k: &DMatrix<f64>) -> Self {
        let (nodes, weights) = half_line_rule(l0, t, order);
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let kernel_matrix = DMatrix::from_fn(order, order, |i, l| sw[i] * k[(i, l)] * sw[l]);
        NystromOperator { nodes, weights, kernel_matrix, block: false, truncation: t, order }
    }

    pub fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(l0: f64, t: f64, order: usize, f: F) -> Self {
        let (nodes, _) = half_line_rule(l0, t, order);
        let k = DMatrix::from_fn(order, order, |i, l| f(nodes[i], nodes[l]));
        Self::scalar(l0, t, order, &k)
    }

    /// Block operator conjugated by `diag(g, g^{−1})`. When `sign_jump` is set
    /// the 21 block is taken to contain `−½ sgn(ξ − η)`, which is integrated
    /// exactly against the interpolant of the integrand instead of being
    /// sampled at the nodes.
    pub fn block(
        l0: f64,
        t: f64,
        order: usize,
        k: &KernelBlocks,
        g: Option<fn(f64) -> f64>,
        sign_jump: bool,
    ) -> Self {
        let rule = GaussLegendre::new(order);
        let (nodes, weights) = rule.mapped(l0, t);
        let m = order;
        let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
        let gv: Vec<f64> = nodes.iter().map(|&x| g.map_or(1.0, |g| g(x))).collect();
        let mut a = DMatrix::zeros(2 * m, 2 * m);
        let sign = if sign_jump { Some(legendre_sign_matrix(&rule)) } else { None };
        let half = 0.5 * (t - l0);
        for i in 0..m {
            for l in 0..m {
                let wl = sw[i] * sw[l];
                a[(i, l)] = wl * gv[i] * k.k11[(i, l)] / gv[l];
                a[(i, m + l)] = wl * gv[i] * k.k12[(i, l)] * gv[l];
                a[(m + i, m + l)] = wl * k.k22[(i, l)] * gv[l] / gv[i];
                let mut k21 = k.k21[(i, l)];
                if let Some(s) = &sign {
                    let jump = 0.5 * sgn(nodes[i] - nodes[l]);
                    k21 += jump;
                    // −½ ∫ sgn(ξ_i − η) f(η) dη ≈ −½ Σ_l S_il f(η_l)
                    let product = -0.5 * half * s[i][l];
                    a[(m + i, l)] = (wl * k21 + product * sw[i] / sw[l]) / (gv[i] * gv[l]);
                } else {
                    a[(m + i, l)] = wl * k21 / (gv[i] * gv[l]);
                }
            }
        }
        NystromOperator { nodes, weights, kernel_matrix: a, block: true, truncation: t, order }
    }

    pub fn dim(&self) -> usize {
        self.kernel_matrix.nrows()
    }

    /// `tr K` of the discretization.
    pub fn trace(&self) -> f64 {
        self.kernel_matrix.trace()
    }
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

/// `det(I − K)` by LU factorization.
pub fn det_trace(op: &NystromOperator) -> f64 {
    let n = op.dim();
    (DMatrix::identity(n, n) - &op.kernel_matrix).lu().determinant()
}

/// Regularized 2-determinant `det₂(I − K) = det((I − K)e^{K}) e^{−tr(K_11 + K_22)}`,
/// which for the discretized operator reduces to `det(I − K)`.
pub fn det2_block(op: &NystromOperator) -> f64 {
    det_trace(op)
}

/// Carleman determinant `det(I − K) e^{tr K}`.
pub fn det2_carleman(op: &NystromOperator) -> f64 {
    det_trace(op) * op.trace().exp()
}

/// Square root of a determinant that should be a squared probability.
pub fn sqrt_probability(det: f64) -> Result<f64> {
    if det >= 0.0 {
        Ok(det.sqrt())
    } else if det > -NEGATIVE_CLAMP {
        log::warn!("determinant {det:.3e} clamped to zero");
        Ok(0.0)
    } else {
        Err(Error::NegativeDeterminant { value: det })
    }
}

/// Limit kernel blocks on a node set.
pub fn limit_kernel_blocks(beta: Beta, nodes: &[f64]) -> KernelBlocks {
    let m = airy_matrices(nodes);
    let n = nodes.len();
    let mut out = KernelBlocks {
        k11: DMatrix::zeros(n, n),
        k12: DMatrix::zeros(n, n),
        k21: DMatrix::zeros(n, n),
        k22: DMatrix::zeros(n, n),
    };
    for i in 0..n {
        for l in 0..n {
            let px = (m.ai[i], m.tail_integral[i]);
            let py = (m.ai[l], m.tail_integral[l]);
            let e = match beta {
                Beta::Unitary => [m.kernel[(i, l)], 0.0, 0.0, 0.0],
                Beta::Orthogonal => beta1_entries(
                    m.kernel[(i, l)],
                    m.kernel[(l, i)],
                    m.deta[(i, l)],
                    m.tail[(i, l)],
                    px,
                    py,
                    nodes[i] - nodes[l],
                ),
                Beta::Symplectic => beta4_entries(
                    m.kernel[(i, l)],
                    m.kernel[(l, i)],
                    m.deta[(i, l)],
                    m.tail[(i, l)],
                    px,
                    py,
                ),
            };
            out.k11[(i, l)] = e[0];
            out.k12[(i, l)] = e[1];
            out.k21[(i, l)] = e[2];
            out.k22[(i, l)] = e[3];
        }
    }
    out
}

fn probability_from_blocks(
    beta: Beta,
    l0: f64,
    t: f64,
    settings: &GapSettings,
    k: &KernelBlocks,
) -> Result<f64> {
    let order = settings.order;
    match beta {
        Beta::Unitary => Ok(det_trace(&NystromOperator::scalar(l0, t, order, &k.k11))),
        Beta::Symplectic => {
            let op = NystromOperator::block(l0, t, order, k, None, false);
            sqrt_probability(det_trace(&op))
        }
        Beta::Orthogonal => {
            let op = NystromOperator::block(l0, t, order, k, Some(settings.g), true);
            sqrt_probability(det2_block(&op))
        }
    }
}

/// `F^(β)(L0)`: the limiting probability that the scaled largest eigenvalue
/// is at most `L0`.
pub fn tw_limit_with(beta: Beta, l0: f64, settings: &GapSettings) -> Result<f64> {
    let t = settings.truncation_for(l0);
    if t <= l0 {
        return Err(Error::InvalidArgument("truncation must exceed L0".into()));
    }
    let (nodes, _) = half_line_rule(l0, t, settings.order);
    let k = limit_kernel_blocks(beta, &nodes);
    probability_from_blocks(beta, l0, t, settings, &k)
}

pub fn tw_limit(beta: Beta, l0: f64, order: usize) -> Result<f64> {
    tw_limit_with(beta, l0, &GapSettings::with_order(order))
}

/// `Prob{λ₁ ≤ ξ^(N)}` for the finite-N ensemble, with `ξ = L0`.
pub fn gap_finite_with(system: &EdgeSystem, beta: Beta, l0: f64, settings: &GapSettings) -> Result<f64> {
    let t = settings.truncation_for(l0);
    if t <= l0 {
        return Err(Error::InvalidArgument("truncation must exceed L0".into()));
    }
    let (nodes, _) = half_line_rule(l0, t, settings.order);
    let k = system.scaled_kernel_blocks(beta, &nodes)?;
    probability_from_blocks(beta, l0, t, settings, &k)
}

pub fn gap_finite(system: &EdgeSystem, beta: Beta, l0: f64, order: usize) -> Result<f64> {
    gap_finite_with(system, beta, l0, &GapSettings::with_order(order))
}

/// A tabulated probability with an order-doubling error estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapEstimate {
    pub beta: Beta,
    #[serde(rename = "L0")]
    pub l0: f64,
    pub value: f64,
    pub order: usize,
    pub truncation_t: f64,
    pub est_error: f64,
}

/// `F^(β)` on a ladder, each value paired with `|F_M − F_{2M}|`.
pub fn tw_table(beta: Beta, ladder: &[f64], settings: &GapSettings) -> Result<Vec<GapEstimate>> {
    ladder
        .par_iter()
        .map(|&l0| {
            let value = tw_limit_with(beta, l0, settings)?;
            let fine = GapSettings { order: 2 * settings.order, ..*settings };
            let refined = tw_limit_with(beta, l0, &fine)?;
            Ok(GapEstimate {
                beta,
                l0,
                value,
                order: settings.order,
                truncation_t: settings.truncation_for(l0),
                est_error: (value - refined).abs(),
            })
        })
        .collect()
}

/// Finite-N probabilities on a ladder with order-doubling error estimates.
pub fn gap_table(
    system: &EdgeSystem,
    beta: Beta,
    ladder: &[f64],
    settings: &GapSettings,
) -> Result<Vec<GapEstimate>> {
    ladder
        .iter()
        .map(|&l0| {
            let value = gap_finite_with(system, beta, l0, settings)?;
            let fine = GapSettings { order: 2 * settings.order, ..*settings };
            let refined = gap_finite_with(system, beta, l0, &fine)?;
            Ok(GapEstimate {
                beta,
                l0,
                value,
                order: settings.order,
                truncation_t: settings.truncation_for(l0),
                est_error: (value - refined).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airy::{ai, airy_kernel};
    use crate::potential::Potential;

    #[test]
    fn trivial_determinants() {
        let op = NystromOperator::from_fn(0.0, 1.0, 20, |_, _| 0.0);
        assert_eq!(det_trace(&op), 1.0);
        assert!((op.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // rank one: det(I − u⊗v) = 1 − ∫uv
        let op = NystromOperator::from_fn(-1.0, 2.0, 30, |x, y| x.sin() * (-y * y).exp());
        let r = GaussLegendre::new(30);
        let inner = r.integrate(-1.0, 2.0, |x| x.sin() * (-x * x).exp());
        assert!((det_trace(&op) - (1.0 - inner)).abs() < 1e-10);
    }

    #[test]
    fn deep_tail_is_empty() {
        let op = NystromOperator::from_fn(5.0, default_truncation(5.0), 40, airy_kernel);
        let trace = GaussLegendre::new(40).integrate(5.0, 19.0, |t| airy_kernel(t, t));
        assert!(trace < 1e-5);
        assert!((det_trace(&op) - 1.0).abs() < 1e-10 + 1.01 * trace);
        assert!((det_trace(&op) - (1.0 - trace)).abs() < 1e-10);
    }

    #[test]
    fn block_determinant_variants() {
        let zero = KernelBlocks {
            k11: DMatrix::zeros(10, 10),
            k12: DMatrix::zeros(10, 10),
            k21: DMatrix::zeros(10, 10),
            k22: DMatrix::zeros(10, 10),
        };
        let op = NystromOperator::block(0.0, 1.0, 10, &zero, None, false);
        assert_eq!(det2_block(&op), 1.0);
        assert_eq!(det2_carleman(&op), 1.0);
        // off-diagonal only: zero trace correction
        let mut off = zero.clone();
        off.k12 = DMatrix::from_fn(10, 10, |i, l| 0.1 * (i as f64 - l as f64).cos());
        off.k21 = DMatrix::from_fn(10, 10, |i, l| 0.2 * ((i + l) as f64).sin());
        let op = NystromOperator::block(0.0, 1.0, 10, &off, None, false);
        assert!((det2_carleman(&op) - det_trace(&op)).abs() < 1e-15);
        // smooth trace-class kernel: Carleman × e^{−tr} = det
        let mut smooth = off.clone();
        smooth.k11 = DMatrix::from_fn(10, 10, |i, l| 0.3 / (1.0 + (i + l) as f64));
        smooth.k22 = DMatrix::from_fn(10, 10, |i, l| 0.2 / (2.0 + (i * l) as f64));
        let op = NystromOperator::block(0.0, 1.0, 10, &smooth, None, false);
        assert!((det2_carleman(&op) * (-op.trace()).exp() - det_trace(&op)).abs() < 1e-10);
    }

    #[test]
    fn gue_limit_values() {
        assert!((tw_limit(Beta::Unitary, 8.0, 40).unwrap() - 1.0).abs() < 1e-8);
        let a = tw_limit(Beta::Unitary, 0.0, 40).unwrap();
        let b = tw_limit(Beta::Unitary, 0.0, 80).unwrap();
        assert!((a - b).abs() < 1e-8);
        // F2(−2) ≈ 0.4132 (tabulated to four digits)
        assert!((tw_limit(Beta::Unitary, -2.0, 60).unwrap() - 0.4132).abs() < 2e-4);
    }

    /// `F^(1)(s) = det(I − B_s)` on `L²(0, ∞)` with `B_s(x, y) = Ai(x + y + s)`.
    fn goe_oracle(s: f64) -> f64 {
        let len = (16.0 - s).max(8.0) / 2.0;
        let op = NystromOperator::from_fn(0.0, len, 80, |x, y| ai(x + y + s));
        det_trace(&op)
    }

    /// `F^(4)(s) = ½(det(I − B_s) + det(I + B_s))` with the same `B_s`.
    fn gse_oracle(s: f64) -> f64 {
        let len = (16.0 - s).max(8.0) / 2.0;
        let op = NystromOperator::from_fn(0.0, len, 80, |x, y| ai(x + y + s));
        let n = op.dim();
        let plus = (DMatrix::identity(n, n) + &op.kernel_matrix).lu().determinant();
        0.5 * (det_trace(&op) + plus)
    }

    #[test]
    fn gse_limit_matches_independent_formula() {
        for s in [-4.0, -2.0, 0.0, 1.0] {
            let f = tw_limit(Beta::Symplectic, s, 60).unwrap();
            let o = gse_oracle(s);
            assert!((f - o).abs() < 1e-8, "s={s}: {f} vs {o}");
        }
    }

    #[test]
    fn goe_limit_matches_independent_formula() {
        for s in [-3.0, -1.0, 0.0, 1.5] {
            let f = tw_limit(Beta::Orthogonal, s, 60).unwrap();
            let o = goe_oracle(s);
            assert!((f - o).abs() < 1e-8, "s={s}: {f} vs {o}");
        }
    }

    #[test]
    fn limits_are_monotone_probabilities() {
        for beta in Beta::ALL {
            let ladder = [-4.0, -2.5, -1.0, 0.5, 2.0];
            let v: Vec<f64> = ladder.iter().map(|&l| tw_limit(beta, l, 50).unwrap()).collect();
            assert!(v.iter().all(|&p| (0.0..=1.0 + 1e-9).contains(&p)), "{beta}: {v:?}");
            assert!(v.windows(2).all(|w| w[0] <= w[1]), "{beta}: {v:?}");
        }
    }

    #[test]
    fn truncation_and_g_freedom() {
        for beta in Beta::ALL {
            for l0 in [-4.0, 0.0] {
                let base = tw_limit(beta, l0, 60).unwrap();
                let moved = GapSettings {
                    truncation: Some(default_truncation(l0) + 4.0),
                    ..GapSettings::default()
                };
                let shifted = tw_limit_with(beta, l0, &moved).unwrap();
                assert!((base - shifted).abs() < 1e-8, "{beta} {l0}: {base} {shifted}");
            }
        }
        let other = GapSettings { g: |x| (2.0 + x * x).sqrt(), ..GapSettings::default() };
        let a = tw_limit(Beta::Orthogonal, 0.0, 60).unwrap();
        let b = tw_limit_with(Beta::Orthogonal, 0.0, &other).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn negative_determinants() {
        assert_eq!(sqrt_probability(-1e-12).unwrap(), 0.0);
        assert!(sqrt_probability(-1e-6).is_err());
        assert_eq!(sqrt_probability(0.25).unwrap(), 0.5);
    }

    #[test]
    fn finite_n_gap_probabilities() {
        let s = EdgeSystem::new(&Potential::hermite(), 20).unwrap();
        for beta in Beta::ALL {
            let far = gap_finite(&s, beta, 8.0, 40).unwrap();
            assert!((far - 1.0).abs() < 1e-6, "{beta}: {far}");
            let ladder = [-3.0, -1.5, 0.0, 1.5, 3.0];
            let v: Vec<f64> = ladder.iter().map(|&l| gap_finite(&s, beta, l, 40).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[0] <= w[1]), "{beta}: {v:?}");
            assert!(v.iter().all(|&p| (0.0..=1.0 + 1e-9).contains(&p)));
        }
    }
}
