//! Sup-norm distance between the edge-scaled finite-N kernels and their
//! Airy limits, and log-log rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fredholm::limit_kernel_blocks;
use crate::potential::Beta;
use crate::widom::EdgeSystem;

/// Entrywise sup errors `[11, 12, 21, 22]` over a square grid; β = 2 only fills `11`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryErrors {
    pub beta: Beta,
    #[serde(rename = "N")]
    pub n: usize,
    pub sup: [f64; 4],
}

impl EntryErrors {
    pub fn entries(&self) -> &'static [&'static str] {
        match self.beta {
            Beta::Unitary => &["11"],
            _ => &["11", "12", "21", "22"],
        }
    }

    pub fn max(&self) -> f64 {
        self.sup.iter().cloned().fold(0.0, f64::max)
    }
}

/// Evenly spaced points `lo, lo + step, …` up to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo < hi && step > 0.0) {
        return Err(Error::InvalidArgument(format!("bad grid [{lo}, {hi}] step {step}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| lo + step * k as f64).collect())
}

pub fn sup_errors(system: &EdgeSystem, beta: Beta, grid: &[f64]) -> Result<EntryErrors> {
    let finite = system.scaled_kernel_blocks(beta, grid)?;
    let limit = limit_kernel_blocks(beta, grid);
    let diff = |a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>| (a - b).amax();
    let sup = match beta {
        Beta::Unitary => [diff(&finite.k11, &limit.k11), 0.0, 0.0, 0.0],
        _ => [
            diff(&finite.k11, &limit.k11),
            diff(&finite.k12, &limit.k12),
            diff(&finite.k21, &limit.k21),
            diff(&finite.k22, &limit.k22),
        ],
    };
    Ok(EntryErrors { beta, n: system.n_size, sup })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || ys.iter().chain(xs).any(|v| *v <= 0.0) {
        return Err(Error::InvalidArgument("slope fit needs ≥ 2 positive pairs".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}
