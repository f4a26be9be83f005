//! Finite-N kernels for β = 1 and β = 4 through Widom's rank-`2n` correction
//! of the Christoffel–Darboux kernel, the 2×2 matrix kernels built from them,
//! their edge scaling and cluster functions.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::EdgeScaling;
use crate::error::{Error, Result};
use crate::orthopoly::{compute_recurrence, PhiGrid, PointData, RecurrenceTable};
use crate::potential::{Beta, Potential};

/// Condition number above which a block solve is reported as singular.
const SINGULAR_CONDITION: f64 = 1e13;

#[derive(Clone, Debug)]
pub struct SystemOptions {
    /// Recurrence capacity; defaults to `N + 2n + 4`.
    pub jmax: Option<usize>,
    /// Stability tolerance of the recurrence coefficients.
    pub tol: f64,
}

impl Default for SystemOptions {
    fn default() -> Self {
        SystemOptions { jmax: None, tol: 1e-12 }
    }
}

/// Inner products `(Dφ_j, φ_k)` and `(εφ_j, φ_k)` for `0 ≤ j, k ≤ N + n`.
#[derive(Clone, Debug)]
pub struct InnerProducts {
    pub derivative: DMatrix<f64>,
    pub epsilon: DMatrix<f64>,
}

/// Widom's window blocks for indices `N − n ≤ j, k ≤ N + n − 1`.
#[derive(Clone, Debug)]
pub struct WidomBlocks {
    pub n_size: usize,
    pub band: usize,
    /// `((Dφ_j, φ_k))` on the window.
    pub d: DMatrix<f64>,
    /// `((εφ_j, φ_k))` on the window.
    pub b: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g11: DMatrix<f64>,
    pub g12: DMatrix<f64>,
    /// `C_11^{-1} B_11 D_12`.
    pub c11_inv_b11_d12: DMatrix<f64>,
    /// `D_21 C_11^{-1} B_11 D_12`.
    pub m4: DMatrix<f64>,
    pub eps_phi1_inf: Vec<f64>,
    pub eps_phi2_inf: Vec<f64>,
    pub condition_i_bac: f64,
    pub condition_c11: f64,
}

fn block(m: &DMatrix<f64>, r: usize, c: usize, n: usize) -> DMatrix<f64> {
    m.view((r, c), (n, n)).into_owned()
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

impl WidomBlocks {
    pub fn d11(&self) -> DMatrix<f64> {
        block(&self.d, 0, 0, self.band)
    }
    pub fn d12(&self) -> DMatrix<f64> {
        block(&self.d, 0, self.band, self.band)
    }
    pub fn d21(&self) -> DMatrix<f64> {
        block(&self.d, self.band, 0, self.band)
    }
    pub fn b11(&self) -> DMatrix<f64> {
        block(&self.b, 0, 0, self.band)
    }
    pub fn b12(&self) -> DMatrix<f64> {
        block(&self.b, 0, self.band, self.band)
    }
    pub fn c11(&self) -> DMatrix<f64> {
        block(&self.c, 0, 0, self.band)
    }

    /// Dumps every block as nested row lists.
    pub fn to_json(&self) -> serde_json::Value {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
        };
        serde_json::json!({
            "N": self.n_size,
            "n": self.band,
            "D": rows(&self.d),
            "B": rows(&self.b),
            "A": rows(&self.a),
            "C": rows(&self.c),
            "G11": rows(&self.g11),
            "G12": rows(&self.g12),
            "D21_C11inv_B11_D12": rows(&self.m4),
            "epsPhi1_inf": self.eps_phi1_inf,
            "epsPhi2_inf": self.eps_phi2_inf,
            "condition_I_minus_BAC": self.condition_i_bac,
            "condition_C11": self.condition_c11,
        })
    }
}

pub fn inner_products(grid: &PhiGrid) -> InnerProducts {
    let count = grid.count();
    let m = grid.len();
    let mut weighted = grid.phi.clone();
    for i in 0..m {
        let w = grid.rule.weights[i];
        weighted.column_mut(i).scale_mut(w);
    }
    let derivative = &grid.dphi * weighted.transpose();
    let mut eps = DMatrix::zeros(count, m);
    for j in 0..count {
        let half_total = 0.5 * grid.totals[j];
        for i in 0..m {
            eps[(j, i)] = half_total - grid.tail[(j, i)];
        }
    }
    let epsilon = eps * weighted.transpose();
    InnerProducts { derivative, epsilon }
}

/// Assembles the window blocks and the correction matrices `G_11`, `G_12`.
pub fn build_blocks(inner: &InnerProducts, grid: &PhiGrid, n_size: usize, band: usize) -> Result<WidomBlocks> {
    if n_size % 2 != 0 {
        return Err(Error::InvalidArgument(format!("N must be even, got {n_size}")));
    }
    if n_size <= band {
        return Err(Error::InvalidArgument(format!("N = {n_size} must exceed n = {band}")));
    }
    if n_size + band > grid.count() {
        return Err(Error::InvalidArgument("window exceeds tabulated functions".into()));
    }
    let w0 = n_size - band;
    let size = 2 * band;
    let d = inner.derivative.view((w0, w0), (size, size)).into_owned();
    let b = inner.epsilon.view((w0, w0), (size, size)).into_owned();
    let mut a = DMatrix::zeros(size, size);
    for i in 0..band {
        for k in 0..band {
            a[(i, band + k)] = d[(i, band + k)];
            a[(band + i, k)] = -d[(band + i, k)];
        }
    }
    let mut c = &b * &a;
    for i in 0..band {
        c[(i, i)] += 1.0;
    }
    let ac = &a * &c;
    let i_bac = DMatrix::identity(size, size) - &b * &ac;
    let condition_i_bac = condition(&i_bac);
    if condition_i_bac > SINGULAR_CONDITION {
        return Err(Error::Singular { what: "I - BAC", condition: condition_i_bac });
    }
    // (AC (I-BAC)^{-1})^T = (I-BAC)^{-T} (AC)^T
    let gt = i_bac
        .transpose()
        .col_piv_qr()
        .solve(&ac.transpose())
        .ok_or(Error::Singular { what: "I - BAC", condition: condition_i_bac })?;
    let g11 = block(&gt, 0, 0, band);
    let g12 = block(&gt, 0, band, band);
    let c11 = block(&c, 0, 0, band);
    let condition_c11 = condition(&c11);
    if condition_c11 > SINGULAR_CONDITION {
        return Err(Error::Singular { what: "C_11", condition: condition_c11 });
    }
    let b11 = block(&b, 0, 0, band);
    let d12 = block(&d, 0, band, band);
    let d21 = block(&d, band, 0, band);
    let c11_inv_b11_d12 = c11
        .col_piv_qr()
        .solve(&(&b11 * &d12))
        .ok_or(Error::Singular { what: "C_11", condition: condition_c11 })?;
    let m4 = &d21 * &c11_inv_b11_d12;
    log::debug!(
        "Widom blocks N={n_size}: cond(I-BAC)={condition_i_bac:.3e}, cond(C11)={condition_c11:.3e}"
    );
    let eps_phi1_inf = (w0..n_size).map(|j| 0.5 * grid.totals[j]).collect();
    let eps_phi2_inf = (n_size..n_size + band).map(|j| 0.5 * grid.totals[j]).collect();
    Ok(WidomBlocks {
        n_size,
        band,
        d,
        b,
        a,
        c,
        g11,
        g12,
        c11_inv_b11_d12,
        m4,
        eps_phi1_inf,
        eps_phi2_inf,
        condition_i_bac,
        condition_c11,
    })
}

/// One evaluation of a finite-N kernel at physical points. `entries` holds
/// `[11, 12, 21, 22]` for β = 1, 4 and a single value for β = 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixKernelSample {
    pub beta: Beta,
    pub x: f64,
    pub y: f64,
    pub entries: Vec<f64>,
}

/// Kernel entries on all pairs of a node set.
#[derive(Clone, Debug)]
pub struct KernelBlocks {
    pub k11: DMatrix<f64>,
    pub k12: DMatrix<f64>,
    pub k21: DMatrix<f64>,
    pub k22: DMatrix<f64>,
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

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|k| m[(i, k)] * v[k]).sum()).collect()
}

fn add(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    a.into_iter().zip(b).map(|(u, v)| u + v).collect()
}

/// Everything needed to evaluate the finite-N kernels of one ensemble size.
#[derive(Clone, Debug)]
pub struct EdgeSystem {
    pub n_size: usize,
    pub band: usize,
    pub table: RecurrenceTable,
    pub grid: PhiGrid,
    pub scaling: EdgeScaling,
    pub inner: InnerProducts,
    /// Present when `N` is even and exceeds `n`.
    pub blocks: Option<WidomBlocks>,
}

impl EdgeSystem {
    pub fn new(p: &Potential, n_size: usize) -> Result<Self> {
        Self::with_options(p, n_size, &SystemOptions::default())
    }

    pub fn with_options(p: &Potential, n_size: usize, opts: &SystemOptions) -> Result<Self> {
        if n_size == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        let band = p.band();
        let count = n_size + band + 1;
        let jmax = opts.jmax.unwrap_or(n_size + 2 * band + 4);
        if jmax < count {
            return Err(Error::InvalidArgument(format!(
                "Jmax = {jmax} too small, need at least N + n + 1 = {count}"
            )));
        }
        let table = compute_recurrence(p, jmax, opts.tol)?;
        Self::from_table(table, n_size)
    }

    pub fn from_table(table: RecurrenceTable, n_size: usize) -> Result<Self> {
        let p = table.potential.clone();
        let band = p.band();
        let count = n_size + band + 1;
        if table.len() < count {
            return Err(Error::InvalidArgument(format!(
                "recurrence capacity {} below N + n + 1 = {count}",
                table.len()
            )));
        }
        let scaling = EdgeScaling::new(&p, n_size)?;
        let grid = PhiGrid::new(&table, count);
        let inner = inner_products(&grid);
        let blocks = if n_size % 2 == 0 && n_size > band {
            Some(build_blocks(&inner, &grid, n_size, band)?)
        } else {
            None
        };
        Ok(EdgeSystem { n_size, band, table, grid, scaling, inner, blocks })
    }

    pub fn potential(&self) -> &Potential {
        &self.table.potential
    }

    pub fn blocks(&self) -> Result<&WidomBlocks> {
        self.blocks.as_ref().ok_or_else(|| {
            Error::InvalidArgument(format!(
                "β = 1, 4 kernels need even N > n, got N = {}",
                self.n_size
            ))
        })
    }

    pub fn point(&self, x: f64) -> PointData {
        self.grid.point(&self.table, x)
    }

    /// Right end of the quadrature domain, beyond which every `φ_j` is
    /// negligible.
    pub fn cutoff(&self) -> f64 {
        *self.grid.rule.breaks.last().unwrap()
    }

    /// `(εφ_j)(y) = ½∫_ℝ φ_j − ∫_y^∞ φ_j`.
    pub fn epsilon_phi(&self, j: usize, y: f64) -> Result<f64> {
        if j >= self.grid.count() {
            return Err(Error::InvalidArgument(format!("index {j} beyond tabulated functions")));
        }
        Ok(0.5 * self.grid.totals[j] - self.grid.tail_at(y)[j])
    }

    fn window1<'a>(&self, v: &'a [f64]) -> &'a [f64] {
        &v[self.n_size - self.band..self.n_size]
    }

    fn window2<'a>(&self, v: &'a [f64]) -> &'a [f64] {
        &v[self.n_size..self.n_size + self.band]
    }

    fn eps_window(&self, p: &PointData, lo: usize) -> Vec<f64> {
        (lo..lo + self.band).map(|j| 0.5 * self.grid.totals[j] - p.tail[j]).collect()
    }

    /// `K_N(x, y)` by summation.
    pub fn cd_kernel_at(&self, px: &PointData, py: &PointData) -> f64 {
        dot(&px.phi[..self.n_size], &py.phi[..self.n_size])
    }

    fn cd_kernel_dy_at(&self, px: &PointData, py: &PointData) -> f64 {
        dot(&px.phi[..self.n_size], &py.dphi[..self.n_size])
    }

    /// `∫_x^y K_N(t, y) dt`.
    fn cd_kernel_integral_at(&self, px: &PointData, py: &PointData) -> f64 {
        (0..self.n_size).map(|k| (px.tail[k] - py.tail[k]) * py.phi[k]).sum()
    }

    /// `G_11 εΦ_1(y) + G_12 εΦ_2(y)`.
    fn beta1_correction(&self, w: &WidomBlocks, py: &PointData) -> Vec<f64> {
        let e1 = self.eps_window(py, self.n_size - self.band);
        let e2 = self.eps_window(py, self.n_size);
        add(mat_vec(&w.g11, &e1), mat_vec(&w.g12, &e2))
    }

    /// `D_21 ∫_y^∞ Φ_1 + D_21 C_11^{-1} B_11 D_12 ∫_y^∞ Φ_2`.
    fn beta4_correction(&self, w: &WidomBlocks, py: &PointData) -> Vec<f64> {
        add(
            mat_vec(&w.d21(), self.window1(&py.tail)),
            mat_vec(&w.m4, self.window2(&py.tail)),
        )
    }

    pub fn s_beta1_at(&self, px: &PointData, py: &PointData) -> Result<f64> {
        let w = self.blocks()?;
        let u = self.beta1_correction(w, py);
        Ok(self.cd_kernel_at(px, py) - dot(self.window1(&px.phi), &u))
    }

    /// `S_{N,1}(x, y)`.
    pub fn s_beta1(&self, x: f64, y: f64) -> Result<f64> {
        self.s_beta1_at(&self.point(x), &self.point(y))
    }

    pub fn s_beta4_at(&self, px: &PointData, py: &PointData) -> Result<f64> {
        let w = self.blocks()?;
        let v = self.beta4_correction(w, py);
        Ok(self.cd_kernel_at(px, py) - dot(self.window2(&px.phi), &v))
    }

    /// `S_{N/2,4}(x, y)` in the form built from tail integrals.
    pub fn s_beta4(&self, x: f64, y: f64) -> Result<f64> {
        self.s_beta4_at(&self.point(x), &self.point(y))
    }

    /// `S_{N/2,4}(x, y)` in the form built from `εΦ_1`, `εΦ_2`.
    pub fn s_beta4_eps_form(&self, x: f64, y: f64) -> Result<f64> {
        let w = self.blocks()?;
        let px = self.point(x);
        let py = self.point(y);
        let e1 = self.eps_window(&py, self.n_size - self.band);
        let e2 = self.eps_window(&py, self.n_size);
        let v = add(mat_vec(&w.d21(), &e1), mat_vec(&w.m4, &e2));
        Ok(self.cd_kernel_at(&px, &py) + dot(self.window2(&px.phi), &v))
    }

    /// `εΦ_1(+∞) + C_11^{-1} B_11 D_12 εΦ_2(+∞)`, which vanishes for large N.
    pub fn beta4_infinity_residual(&self) -> Result<Vec<f64>> {
        let w = self.blocks()?;
        Ok(add(w.eps_phi1_inf.clone(), mat_vec(&w.c11_inv_b11_d12, &w.eps_phi2_inf)))
    }

    /// Unscaled entries `[11, 12, 21, 22]` (β = 1, 4) or `[K_N]` (β = 2).
    pub fn matrix_kernel_at(&self, beta: Beta, px: &PointData, py: &PointData) -> Result<Vec<f64>> {
        match beta {
            Beta::Unitary => Ok(vec![self.cd_kernel_at(px, py)]),
            Beta::Orthogonal => {
                let w = self.blocks()?;
                let ux = self.beta1_correction(w, px);
                let uy = self.beta1_correction(w, py);
                let phi1x = self.window1(&px.phi);
                let phi1y = self.window1(&py.phi);
                let e11 = self.cd_kernel_at(px, py) - dot(phi1x, &uy);
                let e22 = self.cd_kernel_at(py, px) - dot(phi1y, &ux);
                let dv = add(
                    mat_vec(&w.g11, self.window1(&py.phi)),
                    mat_vec(&w.g12, self.window2(&py.phi)),
                );
                let e12 = -(self.cd_kernel_dy_at(px, py) - dot(phi1x, &dv));
                let tail1: Vec<f64> = self
                    .window1(&px.tail)
                    .iter()
                    .zip(self.window1(&py.tail))
                    .map(|(a, b)| a - b)
                    .collect();
                let integral = self.cd_kernel_integral_at(px, py) - dot(&tail1, &uy);
                let e21 = -integral - 0.5 * sgn(px.x - py.x);
                Ok(vec![e11, e12, e21, e22])
            }
            Beta::Symplectic => {
                let w = self.blocks()?;
                let vx = self.beta4_correction(w, px);
                let vy = self.beta4_correction(w, py);
                let phi2x = self.window2(&px.phi);
                let e11 = self.cd_kernel_at(px, py) - dot(phi2x, &vy);
                let e22 = self.cd_kernel_at(py, px) - dot(self.window2(&py.phi), &vx);
                let dv = add(
                    mat_vec(&w.d21(), self.window1(&py.phi)),
                    mat_vec(&w.m4, self.window2(&py.phi)),
                );
                let e12 = -(self.cd_kernel_dy_at(px, py) + dot(phi2x, &dv));
                let tails: f64 = (0..self.n_size).map(|k| px.tail[k] * py.phi[k]).sum();
                let e21 = -(tails - dot(self.window2(&px.tail), &vy));
                Ok(vec![0.5 * e11, 0.5 * e12, 0.5 * e21, 0.5 * e22])
            }
        }
    }

    pub fn matrix_kernel(&self, beta: Beta, x: f64, y: f64) -> Result<MatrixKernelSample> {
        let entries = self.matrix_kernel_at(beta, &self.point(x), &self.point(y))?;
        Ok(MatrixKernelSample { beta, x, y, entries })
    }

    /// Applies `λ_(N)^{-2}` and the conjugation by `diag(λ^{-1}, λ)` to unscaled
    /// entries.
    fn scale_entries(&self, mut e: Vec<f64>) -> Vec<f64> {
        let s = self.scaling.jacobian();
        if e.len() == 1 {
            e[0] *= s;
        } else {
            e[0] *= s;
            e[1] *= s * s;
            e[3] *= s;
        }
        e
    }

    /// Kernel at `x = ξ^(N)`, `y = η^(N)` with the edge normalization under
    /// which it converges to the Airy-type limit.
    pub fn scaled_matrix_kernel(&self, beta: Beta, xi: f64, eta: f64) -> Result<MatrixKernelSample> {
        let x = self.scaling.edge_map(xi);
        let y = self.scaling.edge_map(eta);
        let e = self.matrix_kernel_at(beta, &self.point(x), &self.point(y))?;
        Ok(MatrixKernelSample { beta, x: xi, y: eta, entries: self.scale_entries(e) })
    }

    /// Scaled kernel on all pairs of edge coordinates.
    pub fn scaled_kernel_blocks(&self, beta: Beta, xis: &[f64]) -> Result<KernelBlocks> {
        self.blocks_for(beta, xis, true)
    }

    fn blocks_for(&self, beta: Beta, coords: &[f64], scaled: bool) -> Result<KernelBlocks> {
        if beta != Beta::Unitary {
            self.blocks()?;
        }
        let points: Vec<PointData> = coords
            .par_iter()
            .map(|&c| self.point(if scaled { self.scaling.edge_map(c) } else { c }))
            .collect();
        let n = coords.len();
        let rows: Vec<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let e = self.matrix_kernel_at(beta, &points[i], &points[j]).unwrap();
                        if scaled {
                            self.scale_entries(e)
                        } else {
                            e
                        }
                    })
                    .collect()
            })
            .collect();
        let pick = |k: usize| {
            DMatrix::from_fn(n, n, |i, j| {
                let e = &rows[i][j];
                if e.len() == 1 {
                    if k == 0 {
                        e[0]
                    } else {
                        0.0
                    }
                } else {
                    e[k]
                }
            })
        };
        Ok(KernelBlocks { k11: pick(0), k12: pick(1), k21: pick(2), k22: pick(3) })
    }

    /// Brute-force kernel from inverting the full moment matrix.
    pub fn direct_oracle(&self, beta: Beta) -> Result<DirectOracle> {
        let n = self.n_size;
        let m = match beta {
            // (φ_j, εφ_k) = (εφ_k, φ_j)
            Beta::Orthogonal => self.inner.epsilon.view((0, 0), (n, n)).transpose(),
            // (φ_j, φ_k') = (Dφ_k, φ_j)
            Beta::Symplectic => self.inner.derivative.view((0, 0), (n, n)).transpose(),
            Beta::Unitary => {
                return Err(Error::InvalidArgument("direct oracle is for β = 1, 4".into()))
            }
        };
        if n % 2 != 0 {
            return Err(Error::InvalidArgument("direct oracle needs even N".into()));
        }
        let cond = condition(&m);
        if cond > SINGULAR_CONDITION {
            return Err(Error::Singular { what: "moment matrix", condition: cond });
        }
        let mu = m
            .clone()
            .try_inverse()
            .ok_or(Error::Singular { what: "moment matrix", condition: cond })?;
        Ok(DirectOracle { beta, n_size: n, m, mu, totals: self.grid.totals[..n].to_vec() })
    }

    /// Cluster function `T_{N,l,β}` of the (conjugated) finite-N kernel at
    /// physical points.
    pub fn cluster_function(&self, beta: Beta, points: &[f64], lambda: f64) -> Result<f64> {
        let data: Vec<PointData> = points.iter().map(|&x| self.point(x)).collect();
        cluster_function(beta, points.len(), |i, j| {
            let mut e = self.matrix_kernel_at(beta, &data[i], &data[j])?;
            if e.len() == 4 {
                e[1] /= lambda * lambda;
                e[2] *= lambda * lambda;
            }
            Ok(e)
        })
    }
}

/// Kernel from `M_{N,1}` or `M_{N,4}` and its inverse.
#[derive(Clone, Debug)]
pub struct DirectOracle {
    pub beta: Beta,
    pub n_size: usize,
    pub m: DMatrix<f64>,
    pub mu: DMatrix<f64>,
    totals: Vec<f64>,
}

impl DirectOracle {
    pub fn eval(&self, px: &PointData, py: &PointData) -> f64 {
        let n = self.n_size;
        let mut s = 0.0;
        match self.beta {
            Beta::Orthogonal => {
                let eps: Vec<f64> = (0..n).map(|k| 0.5 * self.totals[k] - py.tail[k]).collect();
                for j in 0..n {
                    for k in 0..n {
                        s -= px.phi[j] * self.mu[(j, k)] * eps[k];
                    }
                }
            }
            _ => {
                for j in 0..n {
                    for k in 0..n {
                        s += px.dphi[j] * self.mu[(j, k)] * py.phi[k];
                    }
                }
            }
        }
        s
    }
}

/// `epsilon_phi` over a system; see [`EdgeSystem::epsilon_phi`].
pub fn epsilon_phi(system: &EdgeSystem, j: usize, y: f64) -> Result<f64> {
    system.epsilon_phi(j, y)
}

/// Largest supported cluster size.
pub const MAX_CLUSTER: usize = 8;

/// `T_l = (1/2l) Σ_σ tr Π K(y_σ_i, y_σ_{i+1})` for matrix kernels and
/// `(1/l) Σ_σ Π K(y_σ_i, y_σ_{i+1})` for scalar ones. `kernel(i, j)` returns
/// the entries at the `i`-th and `j`-th points.
pub fn cluster_function<F>(beta: Beta, l: usize, kernel: F) -> Result<f64>
where
    F: Fn(usize, usize) -> Result<Vec<f64>>,
{
    if l < 2 {
        return Err(Error::InvalidArgument("cluster functions need l >= 2".into()));
    }
    if l > MAX_CLUSTER {
        return Err(Error::InvalidArgument(format!("l = {l} exceeds {MAX_CLUSTER}")));
    }
    let mut values = Vec::with_capacity(l * l);
    for i in 0..l {
        for j in 0..l {
            let e = kernel(i, j)?;
            let m = if e.len() == 1 {
                nalgebra::Matrix2::new(e[0], 0.0, 0.0, 0.0)
            } else {
                nalgebra::Matrix2::new(e[0], e[1], e[2], e[3])
            };
            values.push(m);
        }
    }
    let mut perm: Vec<usize> = (0..l).collect();
    let mut total = 0.0;
    let mut visit = |p: &[usize]| {
        let mut prod = nalgebra::Matrix2::<f64>::identity();
        for k in 0..l {
            prod *= values[p[k] * l + p[(k + 1) % l]];
        }
        total += prod.trace();
    };
    // Heap's algorithm
    let mut c = vec![0usize; l];
    visit(&perm);
    let mut i = 0;
    while i < l {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(match beta {
        Beta::Unitary => total / l as f64,
        _ => total / (2 * l) as f64,
    })
}
