//! Random-walk Metropolis sampling of the joint eigenvalue density
//! `∏|x_j − x_k|^β ∏ w_β(x_j)` and empirical largest-eigenvalue statistics.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{mrs_numbers, EdgeScaling};
use crate::error::{Error, Result};
use crate::fredholm::{gap_finite_with, GapSettings};
use crate::potential::{Beta, Potential};
use crate::widom::EdgeSystem;

pub const RNG_NAME: &str = "ChaCha8Rng::seed_from_u64(seed), set_stream(chain)";
const MIN_SEPARATION: f64 = 1e-12;
const TUNING_WINDOW: usize = 50;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub burn_in: usize,
    /// Sweeps between retained samples; `None` means one per particle.
    pub thinning: Option<usize>,
    pub chains: usize,
    pub target_acceptance: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings { burn_in: 5000, thinning: None, chains: 4, target_acceptance: 0.23 }
    }
}

/// Retained eigenvalue configurations, chain after chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenSample {
    pub beta: Beta,
    /// Ensemble size; β = 4 draws `N/2` eigenvalues.
    #[serde(rename = "N")]
    pub n: usize,
    pub potential: Potential,
    pub samples: Vec<Vec<f64>>,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub burn_in: usize,
    pub thinning: usize,
    pub chain_lengths: Vec<usize>,
    pub proposal_scales: Vec<f64>,
    pub flagged: bool,
}

/// Number of eigenvalues in the joint density for ensemble size `n`.
pub fn particle_count(beta: Beta, n: usize) -> Result<usize> {
    match beta {
        Beta::Symplectic if n % 2 == 1 => {
            Err(Error::InvalidArgument("β = 4 needs an even ensemble size".into()))
        }
        Beta::Symplectic => Ok(n / 2),
        _ => Ok(n),
    }
}

struct Chain<'a> {
    p: &'a Potential,
    beta: f64,
    weight: f64,
    x: Vec<f64>,
    sigma: f64,
    rng: ChaCha8Rng,
}

impl Chain<'_> {
    /// One systematic sweep; returns the number of accepted moves.
    fn sweep(&mut self) -> usize {
        let mut accepted = 0;
        for j in 0..self.x.len() {
            let old = self.x[j];
            let step: f64 = self.rng.sample(StandardNormal);
            let new = old + self.sigma * step;
            let mut log_ratio = -self.weight * (self.p.eval(new) - self.p.eval(old));
            // ratios are bounded by ~1e15, so chunks of 8 cannot overflow
            let mut pair = 0.0;
            let mut product = 1.0;
            let mut pending = 0;
            let mut collide = false;
            for (k, &xk) in self.x.iter().enumerate() {
                if k == j {
                    continue;
                }
                let dn = (new - xk).abs();
                if dn < MIN_SEPARATION {
                    collide = true;
                    break;
                }
                product *= dn / (old - xk).abs();
                pending += 1;
                if pending == 8 {
                    pair += product.ln();
                    product = 1.0;
                    pending = 0;
                }
            }
            if collide {
                continue;
            }
            pair += product.ln();
            log_ratio += self.beta * pair;
            let u: f64 = self.rng.random();
            if log_ratio >= 0.0 || u.ln() < log_ratio {
                self.x[j] = new;
                accepted += 1;
            }
        }
        accepted
    }
}

fn initial_configuration(p: &Potential, n_eff: usize, n: usize) -> Vec<f64> {
    let (c, d) = mrs_numbers(p, n).unwrap_or_else(|_| (p.leading_mrs_scale(n as f64), p.minimum()));
    (0..n_eff)
        .map(|k| d - 0.9 * c * (std::f64::consts::PI * (k as f64 + 0.5) / n_eff as f64).cos())
        .collect()
}

struct ChainOutput {
    samples: Vec<Vec<f64>>,
    accepted: usize,
    proposed: usize,
    sigma: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    p: &Potential,
    beta: Beta,
    n: usize,
    n_eff: usize,
    count: usize,
    seed: u64,
    chain: usize,
    settings: &SamplerSettings,
    thinning: usize,
) -> ChainOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    let x = initial_configuration(p, n_eff, n);
    let spread = x.last().unwrap() - x[0];
    let mut state = Chain {
        p,
        beta: beta.as_f64(),
        weight: p.log_weight_factor(beta),
        x,
        sigma: if n_eff > 1 { spread / n_eff as f64 } else { 0.5 },
        rng,
    };
    let mut window = 0;
    for sweep in 1..=settings.burn_in {
        window += state.sweep();
        if sweep % TUNING_WINDOW == 0 {
            let rate = window as f64 / (TUNING_WINDOW * n_eff) as f64;
            state.sigma *= (2.0 * (rate - settings.target_acceptance)).exp();
            window = 0;
        }
    }
    let mut samples = Vec::with_capacity(count);
    let mut accepted = 0;
    for _ in 0..count {
        for _ in 0..thinning {
            accepted += state.sweep();
        }
        let mut v = state.x.clone();
        v.sort_by(f64::total_cmp);
        samples.push(v);
    }
    ChainOutput { samples, accepted, proposed: count * thinning * n_eff, sigma: state.sigma }
}

pub fn sample(p: &Potential, beta: Beta, n: usize, count: usize, seed: u64) -> Result<EigenSample> {
    sample_with(p, beta, n, count, seed, &SamplerSettings::default())
}

/// Runs `settings.chains` independent chains in parallel and keeps `count`
/// configurations in total.
pub fn sample_with(
    p: &Potential,
    beta: Beta,
    n: usize,
    count: usize,
    seed: u64,
    settings: &SamplerSettings,
) -> Result<EigenSample> {
    if count == 0 || n == 0 || settings.chains == 0 {
        return Err(Error::InvalidArgument("count, N and chains must be positive".into()));
    }
    let n_eff = particle_count(beta, n)?;
    let thinning = settings.thinning.unwrap_or(n_eff).max(1);
    let chains = settings.chains.min(count);
    let lengths: Vec<usize> =
        (0..chains).map(|c| count / chains + usize::from(c < count % chains)).collect();
    let outputs: Vec<ChainOutput> = lengths
        .par_iter()
        .enumerate()
        .map(|(c, &len)| run_chain(p, beta, n, n_eff, len, seed, c, settings, thinning))
        .collect();
    let accepted: usize = outputs.iter().map(|o| o.accepted).sum();
    let proposed: usize = outputs.iter().map(|o| o.proposed).sum();
    let acceptance_rate = accepted as f64 / proposed as f64;
    let flagged = !(0.05..0.8).contains(&acceptance_rate);
    if flagged {
        log::warn!("acceptance rate {acceptance_rate:.3} outside (0.05, 0.8)");
    }
    Ok(EigenSample {
        beta,
        n,
        potential: p.clone(),
        proposal_scales: outputs.iter().map(|o| o.sigma).collect(),
        samples: outputs.into_iter().flat_map(|o| o.samples).collect(),
        seed,
        acceptance_rate,
        burn_in: settings.burn_in,
        thinning,
        chain_lengths: lengths,
        flagged,
    })
}

impl EigenSample {
    pub fn largest(&self) -> Vec<f64> {
        self.samples.iter().map(|v| *v.last().unwrap()).collect()
    }

    /// Largest eigenvalues in edge coordinates.
    pub fn scaled_largest(&self, scaling: &EdgeScaling) -> Vec<f64> {
        self.largest().into_iter().map(|x| scaling.inverse_edge_map(x)).collect()
    }

    /// One row per retained sample, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.samples {
            let row: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn manifest(&self) -> serde_json::Value {
        serde_json::json!({
            "beta": self.beta,
            "N": self.n,
            "potential": self.potential,
            "count": self.samples.len(),
            "seed": self.seed,
            "rng": RNG_NAME,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "chain_lengths": self.chain_lengths,
            "proposal_scales": self.proposal_scales,
            "acceptance_rate": self.acceptance_rate,
            "flagged": self.flagged,
            "split_rhat_largest": split_rhat(&self.chains_of(&self.largest())),
        })
    }

    /// Splits a per-sample statistic back into its chains.
    pub fn chains_of(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        let mut start = 0;
        for &len in &self.chain_lengths {
            out.push(values[start..start + len].to_vec());
            start += len;
        }
        out
    }
}

/// Fraction of samples with largest eigenvalue `≤ s`, for each `s`.
pub fn largest_cdf(e: &EigenSample, s_values: &[f64]) -> Vec<f64> {
    let mut top = e.largest();
    top.sort_by(f64::total_cmp);
    let n = top.len() as f64;
    s_values.iter().map(|&s| top.partition_point(|&x| x <= s) as f64 / n).collect()
}

/// `sup |F_emp − F|` over the sample points of a statistic.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], model_cdf: F) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut worst: f64 = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        let empirical = (j + 1) as f64 / n;
        worst = worst.max((empirical - model_cdf(v[i])).abs());
        i = j + 1;
    }
    worst
}

/// KS distance of the largest eigenvalue against a model CDF in physical units.
pub fn ks_distance<F: Fn(f64) -> f64>(e: &EigenSample, model_cdf: F) -> f64 {
    ks_statistic(&e.largest(), model_cdf)
}

/// Split-chain potential scale reduction factor.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[h..2 * h]]
        })
        .filter(|h| h.len() > 1)
        .collect();
    if halves.len() < 2 {
        return f64::NAN;
    }
    let len = halves[0].len().min(halves.iter().map(|h| h.len()).min().unwrap());
    let means: Vec<f64> = halves.iter().map(|h| h[..len].iter().sum::<f64>() / len as f64).collect();
    let within: f64 = halves
        .iter()
        .zip(&means)
        .map(|(h, m)| h[..len].iter().map(|x| (x - m).powi(2)).sum::<f64>() / (len - 1) as f64)
        .sum::<f64>()
        / halves.len() as f64;
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let between = len as f64 * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>()
        / (means.len() - 1) as f64;
    let var_plus = (len - 1) as f64 / len as f64 * within + between / len as f64;
    (var_plus / within).sqrt()
}

/// A CDF tabulated on an increasing grid, linearly interpolated and clamped
/// to its end values outside.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CdfTable {
    pub points: Vec<f64>,
    pub values: Vec<f64>,
}

impl CdfTable {
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.points.partition_point(|&p| p <= x);
        if k == 0 {
            return self.values[0];
        }
        if k == self.points.len() {
            return *self.values.last().unwrap();
        }
        let (x0, x1) = (self.points[k - 1], self.points[k]);
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        f0 + (f1 - f0) * (x - x0) / (x1 - x0)
    }

    /// `E[X] = a + ∫_a^b (1 − F)` for a distribution essentially supported on the grid.
    pub fn mean(&self) -> f64 {
        let mut acc = self.points[0];
        for k in 1..self.points.len() {
            let h = self.points[k] - self.points[k - 1];
            acc += h * (1.0 - 0.5 * (self.values[k] + self.values[k - 1]));
        }
        acc
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let k = self.values.partition_point(|&v| v < q);
        if k == 0 {
            return self.points[0];
        }
        if k == self.values.len() {
            return *self.points.last().unwrap();
        }
        let (f0, f1) = (self.values[k - 1], self.values[k]);
        let (x0, x1) = (self.points[k - 1], self.points[k]);
        if f1 == f0 {
            x0
        } else {
            x0 + (x1 - x0) * (q - f0) / (f1 - f0)
        }
    }
}

/// `gap_finite` tabulated over edge coordinates `lo, lo + step, …, hi`.
pub fn gap_curve(
    system: &EdgeSystem,
    beta: Beta,
    lo: f64,
    hi: f64,
    step: f64,
    settings: &GapSettings,
) -> Result<CdfTable> {
    if !(step > 0.0 && lo < hi) {
        return Err(Error::InvalidArgument("gap curve needs lo < hi and step > 0".into()));
    }
    let count = ((hi - lo) / step).round() as usize + 1;
    let points: Vec<f64> = (0..count).map(|k| lo + step * k as f64).collect();
    let values = points
        .par_iter()
        .map(|&l0| gap_finite_with(system, beta, l0, settings))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CdfTable { points, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mean and its standard error by 50 batch means.
    fn mean_se(v: &[f64]) -> (f64, f64) {
        let batches = 50;
        let len = v.len() / batches;
        let means: Vec<f64> =
            v.chunks(len).take(batches).map(|c| c.iter().sum::<f64>() / len as f64).collect();
        let m = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
        (m, (var / batches as f64).sqrt())
    }

    #[test]
    fn single_particle_is_the_weight() {
        let s = sample(&Potential::hermite(), Beta::Unitary, 1, 10_000, 7).unwrap();
        let x = s.largest();
        let (m, _) = mean_se(&x);
        let sq: Vec<f64> = x.iter().map(|v| (v - m).powi(2)).collect();
        let (var, se) = mean_se(&sq);
        assert!((var - 0.5).abs() < 3.0 * se, "variance {var} ± {se}");
        assert!(!s.flagged);
    }

    #[test]
    fn two_particles_are_symmetric() {
        let s = sample(&Potential::hermite(), Beta::Orthogonal, 2, 10_000, 11).unwrap();
        let sums: Vec<f64> = s.samples.iter().map(|v| v[0] + v[1]).collect();
        let (m, se) = mean_se(&sums);
        assert!(m.abs() < 3.0 * se, "{m} ± {se}");
        assert!(s.samples.iter().all(|v| v[0] <= v[1]));
    }

    #[test]
    fn reproducible_streams() {
        let settings = SamplerSettings { burn_in: 200, ..Default::default() };
        let a = sample_with(&Potential::quartic(), Beta::Symplectic, 8, 40, 3, &settings).unwrap();
        let b = sample_with(&Potential::quartic(), Beta::Symplectic, 8, 40, 3, &settings).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.samples[0].len(), 4);
        let c = sample_with(&Potential::quartic(), Beta::Symplectic, 8, 40, 4, &settings).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(particle_count(Beta::Symplectic, 7).is_err());
    }

    #[test]
    fn empirical_cdf_edges() {
        let settings = SamplerSettings { burn_in: 100, ..Default::default() };
        let s = sample_with(&Potential::hermite(), Beta::Unitary, 4, 200, 5, &settings).unwrap();
        let top = s.largest();
        let lo = top.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = top.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let grid: Vec<f64> = (0..50).map(|k| lo - 1.0 + (hi - lo + 2.0) * k as f64 / 49.0).collect();
        let cdf = largest_cdf(&s, &grid);
        assert_eq!(cdf[0], 0.0);
        assert_eq!(*cdf.last().unwrap(), 1.0);
        assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(ks_distance(&s, |x| largest_cdf(&s, &[x])[0]), 0.0);
        assert_eq!(ks_distance(&s, |_| 0.0), 1.0);
    }

    #[test]
    fn rhat_of_identical_chains() {
        let base: Vec<f64> = (0..200).map(|k| ((k * 37) % 101) as f64).collect();
        let r = split_rhat(&[base.clone(), base.clone()]);
        assert!((r - 1.0).abs() < 0.02, "{r}");
        let shifted: Vec<f64> = base.iter().map(|x| x + 500.0).collect();
        assert!(split_rhat(&[base, shifted]) > 1.5);
    }

    #[test]
    fn cdf_table_moments() {
        // uniform on [0, 1]
        let points: Vec<f64> = (0..=20).map(|k| -1.0 + 0.15 * k as f64).collect();
        let values = points.iter().map(|&x| x.clamp(0.0, 1.0)).collect();
        let t = CdfTable { points, values };
        assert!((t.mean() - 0.5).abs() < 1e-12);
        assert!((t.quantile(0.5) - 0.5).abs() < 1e-12);
        assert!((t.eval(0.25) - 0.25).abs() < 1e-12);
        assert_eq!(t.eval(-5.0), 0.0);
    }
}
