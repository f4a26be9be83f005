//! Gauss–Legendre rules, composite panels and the Legendre tail/sign matrices
//! used for product integration.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess
            let theta = PI * (i as f64 + 0.75) / (nf + 0.5);
            let mut x = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let x = self.nodes.iter().map(|t| mid + half * t).collect();
        let w = self.weights.iter().map(|w| half * w).collect();
        (x, w)
    }

    /// `∫_a^b f` with this rule.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut s = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * t);
        }
        s * half
    }

    /// `∫_a^b f` over `panels` equal subintervals.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// `P_0(x), …, P_n(x)`.
pub fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; n + 1];
    p[0] = 1.0;
    if n >= 1 {
        p[1] = x;
    }
    for k in 2..=n {
        let kf = k as f64;
        p[k] = ((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
    }
    p
}

/// Weights `q_l(s)` such that `∫_s^1 f(t) dt ≈ Σ_l q_l(s) f(t_l)` for the
/// Gauss–Legendre nodes `t_l`, exact for polynomials of degree `< n`.
pub fn legendre_tail_weights(rule: &GaussLegendre, s: f64) -> Vec<f64> {
    let n = rule.len();
    let ps = legendre_all(n, s);
    // ∫_s^1 P_k
    let mut tail = vec![0.0; n];
    tail[0] = 1.0 - s;
    for k in 1..n {
        tail[k] = -(ps[k + 1] - ps[k - 1]) / (2 * k + 1) as f64;
    }
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&t, &w)| {
            let pt = legendre_all(n - 1, t);
            let mut acc = 0.0;
            for k in 0..n {
                acc += 0.5 * (2 * k + 1) as f64 * pt[k] * tail[k];
            }
            w * acc
        })
        .collect()
}

/// Tail matrix `Q[i][l]` with `Σ_l Q[i][l] f(t_l) ≈ ∫_{t_i}^1 f`.
pub fn legendre_tail_matrix(rule: &GaussLegendre) -> Vec<Vec<f64>> {
    rule.nodes.iter().map(|&s| legendre_tail_weights(rule, s)).collect()
}

/// Sign matrix `S[i][l] = w_l − 2 Q[i][l]`, so that
/// `Σ_l S[i][l] f(t_l) ≈ ∫_{-1}^1 sgn(t_i − t) f(t) dt`.
pub fn legendre_sign_matrix(rule: &GaussLegendre) -> Vec<Vec<f64>> {
    legendre_tail_matrix(rule)
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&rule.weights)
                .map(|(q, w)| w - 2.0 * q)
                .collect()
        })
        .collect()
}

/// Composite rule built from panels with the given breakpoints.
#[derive(Clone, Debug)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Panel boundaries, `panels.len() == number_of_panels + 1`.
    pub breaks: Vec<f64>,
    pub per_panel: usize,
}

impl CompositeRule {
    pub fn new(rule: &GaussLegendre, breaks: Vec<f64>) -> Self {
        let mut nodes = Vec::with_capacity(rule.len() * (breaks.len() - 1));
        let mut weights = Vec::with_capacity(nodes.capacity());
        for w in breaks.windows(2) {
            let (x, wt) = rule.mapped(w[0], w[1]);
            nodes.extend(x);
            weights.extend(wt);
        }
        CompositeRule { nodes, weights, breaks, per_panel: rule.len() }
    }

    pub fn uniform(rule: &GaussLegendre, a: f64, b: f64, panels: usize) -> Self {
        let breaks = (0..=panels)
            .map(|p| a + (b - a) * p as f64 / panels as f64)
            .collect();
        Self::new(rule, breaks)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn panel_count(&self) -> usize {
        self.breaks.len() - 1
    }

    /// Index of the panel containing `x`, clamped to the valid range.
    pub fn panel_of(&self, x: f64) -> usize {
        let p = self.breaks.partition_point(|&b| b <= x);
        p.saturating_sub(1).min(self.panel_count() - 1)
    }
}

/// Nodes of the `n`-point Chebyshev–Gauss rule (first kind) on `[-1, 1]`,
/// `cos((2i+1)π/(2n))`.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| ((2 * i + 1) as f64 * PI / (2 * n) as f64).cos())
        .collect()
}
