//! Sampled largest eigenvalues against the Fredholm gap probability at the same N.

use airy_edge::fredholm::GapSettings;
use airy_edge::montecarlo::{gap_curve, sample};
use airy_edge::{Beta, EdgeSystem, Potential};

/// Standard error of the mean of `values` from 50 contiguous batches.
fn batch_se(values: &[f64]) -> f64 {
    let batches = 50;
    let len = values.len() / batches;
    let means: Vec<f64> = values.chunks_exact(len).take(batches).map(|c| c.iter().sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

#[test]
fn unitary_largest_eigenvalue_matches_gap_curve() {
    let n = 40;
    let p = Potential::hermite();
    let system = EdgeSystem::new(&p, n).unwrap();
    let curve = gap_curve(&system, Beta::Unitary, -6.0, 4.0, 0.05, &GapSettings::default()).unwrap();
    let draws = sample(&p, Beta::Unitary, n, 5000, 7).unwrap();
    let scaled = draws.scaled_largest(&system.scaling);

    let below: Vec<f64> = scaled.iter().map(|&x| if x <= 0.0 { 1.0 } else { 0.0 }).collect();
    let cdf0 = below.iter().sum::<f64>() / below.len() as f64;
    assert!((cdf0 - curve.eval(0.0)).abs() < 3.0 * batch_se(&below), "{cdf0} vs {}", curve.eval(0.0));

    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    assert!((mean - curve.mean()).abs() < 3.0 * batch_se(&scaled), "{mean} vs {}", curve.mean());

    let median = curve.quantile(0.5);
    let indicator: Vec<f64> = scaled.iter().map(|&x| if x <= median { 1.0 } else { 0.0 }).collect();
    let frac = indicator.iter().sum::<f64>() / indicator.len() as f64;
    assert!((frac - 0.5).abs() < 3.0 * batch_se(&indicator), "{frac}");
}
