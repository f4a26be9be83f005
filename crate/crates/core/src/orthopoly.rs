//! Orthonormal polynomials for `e^{−V}`: recurrence coefficients by a
//! discretized Stieltjes procedure, evaluation of `φ_j = p_j e^{−V/2}`, the
//! Christoffel–Darboux kernel and β = 2 correlation functions.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibrium::EdgeScaling;
use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::{legendre_tail_matrix, legendre_tail_weights, CompositeRule, GaussLegendre};

/// Nodes per panel of the composite Gauss–Legendre grids.
pub const PANEL_ORDER: usize = 24;
/// Drop in `V` below its minimum at which the weight is treated as zero,
/// `e^{−70} < 1e−30`.
const WEIGHT_CUTOFF: f64 = 70.0;

/// Three-term recurrence `x φ_j = b_j φ_{j+1} + a_j φ_j + b_{j−1} φ_{j−1}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecurrenceTable {
    pub potential: Potential,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `∫ e^{−V}`, so that `p_0 = norm0^{−1/2}`.
    pub norm0: f64,
    /// Interval outside which all tabulated `φ_j` are negligible.
    pub domain: (f64, f64),
    /// `max |(φ_j, φ_k) − δ_jk|` on an independent quadrature.
    pub orthonormality_residual: f64,
}

/// Layout of the quadrature grid that resolves `φ_0, …, φ_J`.
#[derive(Clone, Copy, Debug)]
pub struct GridPlan {
    pub lo: f64,
    pub hi: f64,
    pub inner_lo: f64,
    pub inner_hi: f64,
    /// Panel width inside `[inner_lo, inner_hi]`.
    pub width: f64,
}

impl GridPlan {
    pub fn new(p: &Potential, jmax: usize) -> Self {
        let nj = jmax.max(1) as f64;
        let (c, d, k_max) = match EdgeScaling::new(p, jmax.max(1)) {
            Ok(s) => {
                let h_max = (0..=200)
                    .map(|i| {
                        let x = -1.0 + i as f64 / 100.0;
                        crate::potential::horner(&s.h_n, x)
                    })
                    .fold(0.0, f64::max);
                let k = nj * h_max / (2.0 * s.c_n);
                (s.c_n, s.d_n, k)
            }
            Err(_) => {
                let c = p.leading_mrs_scale(nj);
                (c, p.leading_mrs_center(), 2.0 * nj / c)
            }
        };
        let k_max = k_max.max(1.0);
        let vmin = p.minimum();
        let mut lo = d - 1.5 * c - 2.0;
        let mut hi = d + 1.5 * c + 2.0;
        let step = 0.25 * (1.0 + c / 4.0);
        while p.eval(lo) - vmin < WEIGHT_CUTOFF {
            lo -= step;
        }
        while p.eval(hi) - vmin < WEIGHT_CUTOFF {
            hi += step;
        }
        GridPlan {
            lo,
            hi,
            inner_lo: (d - 1.1 * c).max(lo),
            inner_hi: (d + 1.1 * c).min(hi),
            width: 4.0 / k_max,
        }
    }

    /// Panel breakpoints with the inner width scaled by `refine`.
    pub fn breaks(&self, refine: f64) -> Vec<f64> {
        let inner = self.width * refine;
        let outer = 4.0 * inner;
        let mut b = Vec::new();
        let segment = |b: &mut Vec<f64>, a: f64, z: f64, w: f64| {
            let n = ((z - a) / w).ceil().max(1.0) as usize;
            for i in 0..n {
                b.push(a + (z - a) * i as f64 / n as f64);
            }
        };
        if self.inner_lo > self.lo {
            segment(&mut b, self.lo, self.inner_lo, outer);
        }
        segment(&mut b, self.inner_lo, self.inner_hi, inner);
        if self.hi > self.inner_hi {
            segment(&mut b, self.inner_hi, self.hi, outer);
        }
        b.push(self.hi);
        b
    }

    pub fn rule(&self, order: usize, refine: f64) -> CompositeRule {
        CompositeRule::new(&GaussLegendre::new(order), self.breaks(refine))
    }
}

/// Lanczos run on the discrete measure `Σ_i gl_i e^{−V(x_i)} δ_{x_i}`.
fn lanczos(p: &Potential, rule: &CompositeRule, jmax: usize) -> (Vec<f64>, Vec<f64>, f64) {
    let m = rule.len();
    let vmin = p.minimum();
    let mut mu0 = 0.0;
    let mut q0 = vec![0.0; m];
    for i in 0..m {
        // scaled by e^{vmin} to stay representable; undone in norm0
        let w = rule.weights[i] * (-(p.eval(rule.nodes[i]) - vmin)).exp();
        mu0 += w;
        q0[i] = w.sqrt();
    }
    let s = mu0.sqrt();
    q0.iter_mut().for_each(|v| *v /= s);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(jmax + 1);
    basis.push(q0);
    let mut a = Vec::with_capacity(jmax);
    let mut b = Vec::with_capacity(jmax);
    for j in 0..jmax {
        let qj = &basis[j];
        let aj: f64 = (0..m).map(|i| rule.nodes[i] * qj[i] * qj[i]).sum();
        let mut r: Vec<f64> = (0..m)
            .map(|i| {
                let prev = if j > 0 { b[j - 1] * basis[j - 1][i] } else { 0.0 };
                (rule.nodes[i] - aj) * qj[i] - prev
            })
            .collect();
        for q in basis.iter() {
            let dot: f64 = q.iter().zip(&r).map(|(u, v)| u * v).sum();
            r.iter_mut().zip(q).for_each(|(v, u)| *v -= dot * u);
        }
        let bj = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.iter_mut().for_each(|v| *v /= bj);
        a.push(aj);
        b.push(bj);
        basis.push(r);
    }
    (a, b, mu0 * (-vmin).exp())
}

/// `(φ_j, φ_k) − δ_jk` on a grid with different panels and order.
fn orthonormality_check(t: &RecurrenceTable, plan: &GridPlan) -> f64 {
    let rule = plan.rule(31, 0.77);
    let jmax = t.len();
    let mut gram = DMatrix::<f64>::zeros(jmax + 1, jmax + 1);
    let mut phi = vec![0.0; jmax + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        t.fill_phi(x, &mut phi);
        let v = DVector::from_column_slice(&phi);
        gram.ger(w, &v, &v, 1.0);
    }
    let mut worst: f64 = 0.0;
    for j in 0..=jmax {
        for k in 0..=jmax {
            let target = if j == k { 1.0 } else { 0.0 };
            worst = worst.max((gram[(j, k)] - target).abs());
        }
    }
    worst
}

/// Recurrence coefficients `a_0..a_{J−1}`, `b_0..b_{J−1}` with the grid
/// refined until successive runs agree to `tol`.
pub fn compute_recurrence(p: &Potential, jmax: usize, tol: f64) -> Result<RecurrenceTable> {
    if jmax == 0 {
        return Err(Error::InvalidArgument("Jmax must be at least 1".into()));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let plan = GridPlan::new(p, jmax + 1);
    let mut refine = 1.0;
    let (mut a, mut b, mut norm0) = lanczos(p, &plan.rule(PANEL_ORDER, refine), jmax);
    let mut change = f64::INFINITY;
    for _ in 0..5 {
        refine *= 0.5;
        let (a2, b2, n2) = lanczos(p, &plan.rule(PANEL_ORDER, refine), jmax);
        change = a
            .iter()
            .zip(&a2)
            .chain(b.iter().zip(&b2))
            .map(|(u, v)| (u - v).abs() / (1.0 + v.abs()))
            .fold(0.0, f64::max);
        a = a2;
        b = b2;
        norm0 = n2;
        if change <= tol {
            break;
        }
    }
    if change > tol {
        return Err(Error::NoConvergence { what: "Stieltjes grid refinement", residual: change });
    }
    let mut table = RecurrenceTable {
        potential: p.clone(),
        a,
        b,
        norm0,
        domain: (plan.lo, plan.hi),
        orthonormality_residual: f64::NAN,
    };
    table.orthonormality_residual = orthonormality_check(&table, &plan);
    let orth_tol = tol.max(1e-12) * 100.0;
    if table.orthonormality_residual > orth_tol {
        return Err(Error::NoConvergence {
            what: "orthonormality check",
            residual: table.orthonormality_residual,
        });
    }
    Ok(table)
}

impl RecurrenceTable {
    /// Capacity `J`: the table determines `φ_0, …, φ_J`.
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    fn start(&self, x: f64) -> (f64, f64) {
        let half = 0.5 * self.potential.eval(x);
        let shift = (half - 600.0).max(0.0);
        ((shift - half).exp() / self.norm0.sqrt(), shift)
    }

    /// Fills `out[j] = φ_j(x)` for `j < out.len()`.
    pub fn fill_phi(&self, x: f64, out: &mut [f64]) {
        let n = out.len();
        if n == 0 {
            return;
        }
        assert!(n <= self.len() + 1, "index beyond recurrence capacity");
        let (phi0, shift) = self.start(x);
        out[0] = phi0;
        if n > 1 {
            out[1] = (x - self.a[0]) * phi0 / self.b[0];
        }
        for j in 1..n - 1 {
            out[j + 1] = ((x - self.a[j]) * out[j] - self.b[j - 1] * out[j - 1]) / self.b[j];
        }
        if shift > 0.0 {
            let f = (-shift).exp();
            out.iter_mut().for_each(|v| *v *= f);
        }
    }

    /// Fills `phi[j] = φ_j(x)` and `dphi[j] = φ_j′(x)`.
    pub fn fill_phi_derivative(&self, x: f64, phi: &mut [f64], dphi: &mut [f64]) {
        let n = phi.len();
        assert_eq!(n, dphi.len());
        if n == 0 {
            return;
        }
        assert!(n <= self.len() + 1, "index beyond recurrence capacity");
        let (phi0, shift) = self.start(x);
        // chi_j = p_j' e^{-V/2}
        let mut chi = vec![0.0; n];
        phi[0] = phi0;
        if n > 1 {
            phi[1] = (x - self.a[0]) * phi0 / self.b[0];
            chi[1] = phi0 / self.b[0];
        }
        for j in 1..n - 1 {
            phi[j + 1] = ((x - self.a[j]) * phi[j] - self.b[j - 1] * phi[j - 1]) / self.b[j];
            chi[j + 1] =
                ((x - self.a[j]) * chi[j] + phi[j] - self.b[j - 1] * chi[j - 1]) / self.b[j];
        }
        let half_dv = 0.5 * self.potential.derivative(x);
        let f = (-shift).exp();
        for j in 0..n {
            dphi[j] = (chi[j] - half_dv * phi[j]) * f;
            phi[j] *= f;
        }
    }

    /// `φ_0(x), …, φ_jmax(x)`.
    pub fn eval_phi(&self, jmax: usize, x: f64) -> Result<Vec<f64>> {
        if jmax > self.len() {
            return Err(Error::InvalidArgument(format!(
                "index {jmax} beyond recurrence capacity {}",
                self.len()
            )));
        }
        let mut out = vec![0.0; jmax + 1];
        self.fill_phi(x, &mut out);
        Ok(out)
    }

    /// `(φ_j(x), φ_j′(x))` for `j ≤ jmax`.
    pub fn eval_phi_derivative(&self, jmax: usize, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if jmax > self.len() {
            return Err(Error::InvalidArgument(format!(
                "index {jmax} beyond recurrence capacity {}",
                self.len()
            )));
        }
        let mut phi = vec![0.0; jmax + 1];
        let mut dphi = vec![0.0; jmax + 1];
        self.fill_phi_derivative(x, &mut phi, &mut dphi);
        Ok((phi, dphi))
    }

    /// Switch distance between the two forms of the CD kernel.
    pub fn diagonal_tau(&self, n: usize) -> f64 {
        1e-4 * self.potential.leading_mrs_scale(n as f64) / n as f64
    }

    /// `K_N(x, y) = Σ_{j<N} φ_j(x) φ_j(y)`.
    pub fn cd_kernel(&self, n: usize, x: f64, y: f64) -> f64 {
        assert!(n >= 1 && n <= self.len(), "N outside recurrence capacity");
        if (x - y).abs() > self.diagonal_tau(n) {
            self.cd_kernel_ratio(n, x, y)
        } else {
            self.cd_kernel_sum(n, x, y)
        }
    }

    /// Christoffel–Darboux ratio form.
    pub fn cd_kernel_ratio(&self, n: usize, x: f64, y: f64) -> f64 {
        let mut px = vec![0.0; n + 1];
        let mut py = vec![0.0; n + 1];
        self.fill_phi(x, &mut px);
        self.fill_phi(y, &mut py);
        self.b[n - 1] * (px[n] * py[n - 1] - px[n - 1] * py[n]) / (x - y)
    }

    pub fn cd_kernel_sum(&self, n: usize, x: f64, y: f64) -> f64 {
        let mut px = vec![0.0; n];
        let mut py = vec![0.0; n];
        self.fill_phi(x, &mut px);
        self.fill_phi(y, &mut py);
        px.iter().zip(&py).map(|(u, v)| u * v).sum()
    }

    /// `∂_y K_N(x, y)`.
    pub fn cd_kernel_dy(&self, n: usize, x: f64, y: f64) -> f64 {
        let mut px = vec![0.0; n];
        let mut py = vec![0.0; n];
        let mut dpy = vec![0.0; n];
        self.fill_phi(x, &mut px);
        self.fill_phi_derivative(y, &mut py, &mut dpy);
        px.iter().zip(&dpy).map(|(u, v)| u * v).sum()
    }

    /// `R_{N,l,2}(x_1, …, x_l) = det(K_N(x_i, x_k))`.
    pub fn correlation_det(&self, n: usize, points: &[f64]) -> f64 {
        self.kernel_matrix(n, points).determinant()
    }

    pub fn kernel_matrix(&self, n: usize, points: &[f64]) -> DMatrix<f64> {
        let l = points.len();
        DMatrix::from_fn(l, l, |i, k| self.cd_kernel(n, points[i], points[k]))
    }

    /// `max_j |b_j (V′(J))_{j+1,j} − (j+1)| / (j+1)` over the rows unaffected by
    /// truncating the Jacobi matrix `J`.
    pub fn string_equation_residual(&self) -> f64 {
        let l = self.len();
        let jac = DMatrix::from_fn(l, l, |i, k| {
            if i == k {
                self.a[i]
            } else if i + 1 == k {
                self.b[i]
            } else if k + 1 == i {
                self.b[k]
            } else {
                0.0
            }
        });
        let mut vp = DMatrix::zeros(l, l);
        for c in self.potential.derivative_coefficients().iter().rev() {
            vp = &vp * &jac;
            for i in 0..l {
                vp[(i, i)] += c;
            }
        }
        let reach = self.potential.degree();
        (0..l.saturating_sub(reach + 1))
            .map(|j| {
                let k = (j + 1) as f64;
                (self.b[j] * vp[(j + 1, j)] - k).abs() / k
            })
            .fold(0.0, f64::max)
    }

    /// Writes `j,a_j,b_j` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "j,a_j,b_j")?;
        for (j, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            writeln!(w, "{j},{a:.16e},{b:.16e}")?;
        }
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv); the
    /// normalization of `p_0` is recomputed for the given potential.
    pub fn read_csv<R: BufRead>(p: &Potential, r: R) -> Result<Self> {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (line_no, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line_no == 0 && line.starts_with('j') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", line_no + 1)));
            }
            let j: usize = fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad index", line_no + 1)))?;
            if j != a.len() {
                return Err(Error::Parse(format!("line {}: index {j} out of order", line_no + 1)));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("line {}: bad number {s:?}", line_no + 1)))
            };
            a.push(parse(fields[1])?);
            let bj = parse(fields[2])?;
            if bj <= 0.0 {
                return Err(Error::Parse(format!("line {}: b_j must be positive", line_no + 1)));
            }
            b.push(bj);
        }
        if a.is_empty() {
            return Err(Error::Parse("empty recurrence table".into()));
        }
        let plan = GridPlan::new(p, a.len() + 1);
        let rule = plan.rule(PANEL_ORDER, 0.5);
        let norm0 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * (-p.eval(x)).exp())
            .sum();
        let mut t = RecurrenceTable {
            potential: p.clone(),
            a,
            b,
            norm0,
            domain: (plan.lo, plan.hi),
            orthonormality_residual: f64::NAN,
        };
        t.orthonormality_residual = orthonormality_check(&t, &plan);
        Ok(t)
    }
}

/// Values of `φ_j`, `φ_j′` and `Ψ_j = ∫_x^∞ φ_j` at one point.
#[derive(Clone, Debug)]
pub struct PointData {
    pub x: f64,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub tail: Vec<f64>,
}

/// `φ_0, …, φ_{J}` tabulated on a composite quadrature grid that resolves
/// them, together with derivatives and tail integrals.
#[derive(Clone, Debug)]
pub struct PhiGrid {
    pub rule: CompositeRule,
    /// `phi[(j, i)] = φ_j(x_i)`.
    pub phi: DMatrix<f64>,
    pub dphi: DMatrix<f64>,
    /// `tail[(j, i)] = ∫_{x_i}^∞ φ_j`.
    pub tail: DMatrix<f64>,
    /// `∫_{b_p}^∞ φ_j` at each panel boundary, column `p`.
    panel_tail: DMatrix<f64>,
    /// `∫_ℝ φ_j`.
    pub totals: Vec<f64>,
    local: GaussLegendre,
}

impl PhiGrid {
    pub fn new(table: &RecurrenceTable, count: usize) -> Self {
        let plan = GridPlan::new(&table.potential, count);
        Self::with_plan(table, count, &plan, 1.0)
    }

    pub fn with_plan(table: &RecurrenceTable, count: usize, plan: &GridPlan, refine: f64) -> Self {
        let local = GaussLegendre::new(PANEL_ORDER);
        let rule = CompositeRule::new(&local, plan.breaks(refine));
        let m = rule.len();
        let mut phi = DMatrix::zeros(count, m);
        let mut dphi = DMatrix::zeros(count, m);
        let mut p = vec![0.0; count];
        let mut dp = vec![0.0; count];
        for (i, &x) in rule.nodes.iter().enumerate() {
            table.fill_phi_derivative(x, &mut p, &mut dp);
            phi.column_mut(i).copy_from_slice(&p);
            dphi.column_mut(i).copy_from_slice(&dp);
        }
        let q = legendre_tail_matrix(&local);
        let panels = rule.panel_count();
        let per = local.len();
        let mut panel_tail = DMatrix::zeros(count, panels + 1);
        let mut tail = DMatrix::zeros(count, m);
        for pidx in (0..panels).rev() {
            let half = 0.5 * (rule.breaks[pidx + 1] - rule.breaks[pidx]);
            let base = pidx * per;
            for j in 0..count {
                let after = panel_tail[(j, pidx + 1)];
                let mut whole = 0.0;
                for l in 0..per {
                    whole += rule.weights[base + l] * phi[(j, base + l)];
                }
                panel_tail[(j, pidx)] = after + whole;
                for i in 0..per {
                    let mut s = 0.0;
                    for l in 0..per {
                        s += q[i][l] * phi[(j, base + l)];
                    }
                    tail[(j, base + i)] = after + half * s;
                }
            }
        }
        let totals = (0..count).map(|j| panel_tail[(j, 0)]).collect();
        PhiGrid { rule, phi, dphi, tail, panel_tail, totals, local }
    }

    pub fn count(&self) -> usize {
        self.phi.nrows()
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    /// Tail integrals `∫_x^∞ φ_j` at an arbitrary point.
    pub fn tail_at(&self, x: f64) -> Vec<f64> {
        let count = self.count();
        let lo = self.rule.breaks[0];
        let hi = *self.rule.breaks.last().unwrap();
        if x <= lo {
            return self.totals.clone();
        }
        if x >= hi {
            return vec![0.0; count];
        }
        let p = self.rule.panel_of(x);
        let a = self.rule.breaks[p];
        let b = self.rule.breaks[p + 1];
        let s = (2.0 * x - a - b) / (b - a);
        let w = legendre_tail_weights(&self.local, s);
        let half = 0.5 * (b - a);
        let base = p * self.local.len();
        (0..count)
            .map(|j| {
                let mut acc = 0.0;
                for (l, wl) in w.iter().enumerate() {
                    acc += wl * self.phi[(j, base + l)];
                }
                self.panel_tail[(j, p + 1)] + half * acc
            })
            .collect()
    }

    /// Tabulated data at quadrature node `i`.
    pub fn node_point(&self, i: usize) -> PointData {
        PointData {
            x: self.rule.nodes[i],
            phi: self.phi.column(i).iter().copied().collect(),
            dphi: self.dphi.column(i).iter().copied().collect(),
            tail: self.tail.column(i).iter().copied().collect(),
        }
    }

    pub fn point(&self, table: &RecurrenceTable, x: f64) -> PointData {
        let count = self.count();
        let mut phi = vec![0.0; count];
        let mut dphi = vec![0.0; count];
        table.fill_phi_derivative(x, &mut phi, &mut dphi);
        PointData { x, phi, dphi, tail: self.tail_at(x) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hermite(j: usize) -> RecurrenceTable {
        compute_recurrence(&Potential::hermite(), j, 1e-13).unwrap()
    }

    /// Lanczos approximation of Γ, accurate to ~1e−15 for moderate arguments.
    fn gamma(x: f64) -> f64 {
        const G: [f64; 9] = [
            0.999_999_999_999_809_9,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_1,
            -176.615_029_162_140_6,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_572e-6,
            1.505_632_735_149_311_6e-7,
        ];
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }

    /// `b_n² = H_n H_{n+2} / H_{n+1}²` from Hankel determinants of moments.
    fn moment_b(moments: &[f64], n: usize) -> f64 {
        let hankel = |k: usize| {
            if k == 0 {
                1.0
            } else {
                DMatrix::from_fn(k, k, |i, l| moments[i + l]).determinant()
            }
        };
        (hankel(n) * hankel(n + 2) / hankel(n + 1).powi(2)).sqrt()
    }

    #[test]
    fn hermite_coefficients() {
        let t = hermite(64);
        for j in 0..=60 {
            assert!(t.a[j].abs() < 1e-12, "a_{j} = {}", t.a[j]);
            let exact = ((j + 1) as f64 / 2.0).sqrt();
            assert!((t.b[j] - exact).abs() < 1e-10, "b_{j}");
        }
        assert!((t.norm0 - std::f64::consts::PI.sqrt()).abs() < 1e-13);
        assert!(t.orthonormality_residual < 1e-11);
    }

    #[test]
    fn moment_oracle_at_small_index() {
        let p = Potential::quartic();
        let t = compute_recurrence(&p, 10, 1e-13).unwrap();
        let moments: Vec<f64> = (0..16)
            .map(|k| if k % 2 == 1 { 0.0 } else { 0.5 * gamma((k as f64 + 1.0) / 4.0) })
            .collect();
        for n in 0..6 {
            let mb = moment_b(&moments, n);
            assert!((t.b[n] - mb).abs() < 1e-8 * mb, "n={n}: {} vs {mb}", t.b[n]);
        }
    }

    #[test]
    fn quartic_string_equation() {
        let t = compute_recurrence(&Potential::quartic(), 44, 1e-13).unwrap();
        // in terms of r_j = b_{j−1}: 4 r_j² (r_{j−1}² + r_j² + r_{j+1}²) = j
        let r2 = |j: usize| t.b[j - 1].powi(2);
        for j in 2..=40 {
            let lhs = 4.0 * r2(j) * (r2(j - 1) + r2(j) + r2(j + 1));
            assert!((lhs - j as f64).abs() < 1e-8, "j={j}: {lhs}");
        }
        assert!(t.string_equation_residual() < 1e-10);
        let general = Potential::new(vec![0.2, -0.5, 0.3, 0.4, 1.0]).unwrap();
        assert!(compute_recurrence(&general, 30, 1e-12).unwrap().string_equation_residual() < 1e-9);
    }

    #[test]
    fn nonsymmetric_potential_has_nonzero_centers() {
        let p = Potential::new(vec![0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let t = compute_recurrence(&p, 30, 1e-12).unwrap();
        assert!(t.a.iter().any(|a| a.abs() > 1e-3));
        assert!(t.b.iter().all(|&b| b > 0.0));
        assert!(t.orthonormality_residual < 1e-10);
    }

    #[test]
    fn b_grows_like_power() {
        let t = compute_recurrence(&Potential::quartic(), 60, 1e-12).unwrap();
        for j in 10..59 {
            assert!(t.b[j + 1] > t.b[j]);
        }
        let ratio = t.b[59] / t.b[29];
        assert!((ratio - 2f64.powf(0.25)).abs() < 0.02);
    }

    #[test]
    fn phi0_closed_form_and_parity() {
        let t = hermite(40);
        for i in -50..=50 {
            let x = i as f64 * 0.17;
            let phi = t.eval_phi(40, x).unwrap();
            let exact = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
            assert!((phi[0] - exact).abs() < 1e-12);
            let neg = t.eval_phi(40, -x).unwrap();
            for j in 0..=40 {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                assert!((neg[j] - s * phi[j]).abs() < 1e-12);
            }
        }
        assert!(t.eval_phi(41, 0.0).is_err());
    }

    #[test]
    fn no_overflow_far_out() {
        let t = compute_recurrence(&Potential::quartic(), 30, 1e-12).unwrap();
        let phi = t.eval_phi(30, 12.0).unwrap();
        assert!(phi.iter().all(|v| v.is_finite() && v.abs() < 1e-100));
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let p = Potential::new(vec![0.0, 0.5, 1.0, -0.3, 1.0]).unwrap();
        let t = compute_recurrence(&p, 20, 1e-12).unwrap();
        let h = 1e-5;
        for x in [-1.7, -0.2, 0.9, 2.1] {
            let (_, d) = t.eval_phi_derivative(20, x).unwrap();
            let up = t.eval_phi(20, x + h).unwrap();
            let dn = t.eval_phi(20, x - h).unwrap();
            for j in 0..=20 {
                let fd = (up[j] - dn[j]) / (2.0 * h);
                assert!((fd - d[j]).abs() < 1e-7, "x={x} j={j}");
            }
        }
    }

    #[test]
    fn kernel_forms_and_trace() {
        let t = hermite(30);
        let n = 24;
        let tau = t.diagonal_tau(n);
        for x in [-3.0, 0.1, 5.5] {
            let y = x + 2.0 * tau;
            let r = t.cd_kernel_ratio(n, x, y);
            let s = t.cd_kernel_sum(n, x, y);
            assert!((r - s).abs() < 1e-9 * s.abs());
        }
        let plan = GridPlan::new(&t.potential, n);
        let rule = plan.rule(PANEL_ORDER, 1.0);
        let trace: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &w)| w * t.cd_kernel(n, x, x))
            .sum();
        assert!((trace - n as f64).abs() < 1e-8);
    }

    #[test]
    fn correlation_determinants() {
        let t = compute_recurrence(&Potential::quartic(), 20, 1e-12).unwrap();
        let n = 16;
        let (x, y) = (0.3, 1.1);
        assert_eq!(t.correlation_det(n, &[x]), t.cd_kernel(n, x, x));
        let two = t.correlation_det(n, &[x, y]);
        let direct = t.cd_kernel(n, x, x) * t.cd_kernel(n, y, y) - t.cd_kernel(n, x, y).powi(2);
        assert!((two - direct).abs() < 1e-14);
        let scale = t.cd_kernel(n, x, x).powi(2);
        assert!(t.correlation_det(n, &[x, x]).abs() < 1e-10 * scale);
    }

    #[test]
    fn csv_roundtrip() {
        let t = compute_recurrence(&Potential::quartic(), 12, 1e-12).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = RecurrenceTable::read_csv(&t.potential, buf.as_slice()).unwrap();
        assert_eq!(back.a, t.a);
        assert_eq!(back.b, t.b);
        assert!((back.norm0 - t.norm0).abs() < 1e-14 * t.norm0);
        assert!(RecurrenceTable::read_csv(&t.potential, "j,a_j,b_j\n0,0,-1\n".as_bytes()).is_err());
    }

    #[test]
    fn grid_tail_integrals() {
        let t = hermite(12);
        let g = PhiGrid::new(&t, 12);
        // ∫φ_0 = √2 π^{1/4}
        let total0 = 2f64.sqrt() * std::f64::consts::PI.powf(0.25);
        assert!((g.totals[0] - total0).abs() < 1e-13);
        for j in (1..12).step_by(2) {
            assert!(g.totals[j].abs() < 1e-13);
        }
        // ∫_x^∞ φ_1 = φ_0(x)/√2·... : φ_1 = √2 x φ_0, ∫_x^∞ √2 t π^{-1/4} e^{-t²/2} = √2 φ_0(x)
        for x in [-2.3, 0.0, 0.77, 3.1] {
            let tail = g.tail_at(x);
            let phi0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
            assert!((tail[1] - 2f64.sqrt() * phi0).abs() < 1e-13, "x={x}");
        }
        for i in 0..g.len() {
            let x = g.rule.nodes[i];
            let phi0 = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
            assert!((g.tail[(1, i)] - 2f64.sqrt() * phi0).abs() < 1e-13);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn kernel_symmetric_and_psd(x in -6.0f64..6.0, y in -6.0f64..6.0, z in -6.0f64..6.0) {
            let t = compute_recurrence(&Potential::hermite(), 20, 1e-12).unwrap();
            prop_assert_eq!(t.cd_kernel(20, x, y), t.cd_kernel(20, y, x));
            prop_assert!(t.cd_kernel(20, x, x) >= 0.0);
            let m = t.kernel_matrix(20, &[x, y, z]);
            let tr = m.trace();
            let eig = m.symmetric_eigenvalues();
            prop_assert!(eig.iter().all(|&e| e >= -1e-10 * tr));
        }
    }
}
