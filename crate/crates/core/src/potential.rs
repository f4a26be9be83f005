//! Polynomial potentials `V(x) = κ_{2m} x^{2m} + … + κ_0` and the ensemble
//! weights derived from them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dyson index of the invariant ensemble.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Beta {
    Orthogonal,
    Unitary,
    Symplectic,
}

impl Beta {
    pub const ALL: [Beta; 3] = [Beta::Orthogonal, Beta::Unitary, Beta::Symplectic];

    pub fn value(self) -> u32 {
        match self {
            Beta::Orthogonal => 1,
            Beta::Unitary => 2,
            Beta::Symplectic => 4,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.value() as f64
    }
}

impl TryFrom<u32> for Beta {
    type Error = Error;

    fn try_from(v: u32) -> Result<Self> {
        match v {
            1 => Ok(Beta::Orthogonal),
            2 => Ok(Beta::Unitary),
            4 => Ok(Beta::Symplectic),
            other => Err(Error::InvalidBeta(other)),
        }
    }
}

impl From<Beta> for u32 {
    fn from(b: Beta) -> u32 {
        b.value()
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Even-degree polynomial with positive leading coefficient.
///
/// Coefficients are stored lowest degree first, so `coefficients[k]` is κ_k.
/// Serializes as the bare coefficient list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Potential {
    coefficients: Vec<f64>,
}

impl Potential {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        let mut coefficients = coefficients;
        while coefficients.len() > 1 && coefficients.last() == Some(&0.0) {
            coefficients.pop();
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPotential("non-finite coefficient".into()));
        }
        let degree = coefficients.len().saturating_sub(1);
        if degree < 2 || degree % 2 != 0 {
            return Err(Error::InvalidPotential(format!(
                "degree must be even and at least 2, got {degree}"
            )));
        }
        if coefficients[degree] <= 0.0 {
            return Err(Error::InvalidPotential(format!(
                "leading coefficient must be positive, got {}",
                coefficients[degree]
            )));
        }
        Ok(Potential { coefficients })
    }

    /// `V(x) = x²`, the Gaussian (Hermite) case.
    pub fn hermite() -> Self {
        Potential { coefficients: vec![0.0, 0.0, 1.0] }
    }

    /// `V(x) = x⁴`.
    pub fn quartic() -> Self {
        Potential { coefficients: vec![0.0, 0.0, 0.0, 0.0, 1.0] }
    }

    /// Looks up a named preset (`hermite`, `quartic`).
    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "hermite" | "gaussian" => Some(Self::hermite()),
            "quartic" => Some(Self::quartic()),
            _ => None,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Degree `2m`.
    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// `m`, half the degree.
    pub fn half_degree(&self) -> usize {
        self.degree() / 2
    }

    /// Width `n = 2m − 1` of the band of the differentiation matrix.
    pub fn band(&self) -> usize {
        self.degree() - 1
    }

    pub fn leading(&self) -> f64 {
        self.coefficients[self.degree()]
    }

    /// `κ_k`, zero above the degree.
    pub fn coefficient(&self, k: usize) -> f64 {
        self.coefficients.get(k).copied().unwrap_or(0.0)
    }

    pub fn is_even(&self) -> bool {
        self.coefficients.iter().skip(1).step_by(2).all(|&c| c == 0.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        horner(&self.coefficients, x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coefficients.iter().enumerate().skip(1).rev() {
            acc = acc * x + k as f64 * c;
        }
        acc
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coefficients.iter().enumerate().skip(2).rev() {
            acc = acc * x + (k * (k - 1)) as f64 * c;
        }
        acc
    }

    /// Coefficients of `V′`, lowest degree first.
    pub fn derivative_coefficients(&self) -> Vec<f64> {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| k as f64 * c)
            .collect()
    }

    /// Ensemble weight `w_β`: `e^{−V}` for β = 2, 4 and `e^{−V/2}` for β = 1.
    pub fn weight(&self, beta: Beta, x: f64) -> f64 {
        (-self.log_weight_factor(beta) * self.eval(x)).exp()
    }

    /// Factor `s` with `w_β = e^{−sV}`.
    pub fn log_weight_factor(&self, beta: Beta) -> f64 {
        match beta {
            Beta::Orthogonal => 0.5,
            Beta::Unitary | Beta::Symplectic => 1.0,
        }
    }

    /// Leading-order Mhaskar–Rakhmanov–Saff half-width,
    /// `(κ_{2m}^{-1} (2m)!! / (m (2m−1)!!))^{1/(2m)} N^{1/(2m)}`.
    pub fn leading_mrs_scale(&self, n: f64) -> f64 {
        let m = self.half_degree();
        // (2m)!! / (2m-1)!! = prod_{k=1}^{m} 2k / (2k-1)
        let ratio: f64 = (1..=m).map(|k| (2 * k) as f64 / (2 * k - 1) as f64).product();
        let base = ratio / (m as f64 * self.leading());
        (base * n).powf(1.0 / self.degree() as f64)
    }

    /// Leading-order MRS center, `−κ_{2m−1} / (2m κ_{2m})`.
    pub fn leading_mrs_center(&self) -> f64 {
        -self.coefficient(self.degree() - 1) / (self.degree() as f64 * self.leading())
    }

    /// Minimum of `V` over the real line, located by scanning the critical
    /// points of `V` near the MRS window.
    pub fn minimum(&self) -> f64 {
        let scale = self.leading_mrs_scale(1.0).max(1.0);
        let center = self.leading_mrs_center();
        let lo = center - 4.0 * scale - 4.0;
        let hi = center + 4.0 * scale + 4.0;
        let steps = 4000;
        let mut best = f64::INFINITY;
        let mut best_x = 0.0;
        for i in 0..=steps {
            let x = lo + (hi - lo) * i as f64 / steps as f64;
            let v = self.eval(x);
            if v < best {
                best = v;
                best_x = x;
            }
        }
        // polish with Newton on V'
        let mut x = best_x;
        for _ in 0..50 {
            let d2 = self.second_derivative(x);
            if d2 <= 0.0 {
                break;
            }
            let step = self.derivative(x) / d2;
            x -= step;
            if step.abs() < 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        best.min(self.eval(x))
    }
}

impl TryFrom<Vec<f64>> for Potential {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Potential::new(v)
    }
}

impl From<Potential> for Vec<f64> {
    fn from(p: Potential) -> Vec<f64> {
        p.coefficients
    }
}

impl fmt::Display for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, &c) in self.coefficients.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " {} ", if c < 0.0 { '-' } else { '+' })?;
            } else if c < 0.0 {
                write!(f, "-")?;
            }
            first = false;
            let a = c.abs();
            match k {
                0 => write!(f, "{a}")?,
                _ => {
                    if a != 1.0 {
                        write!(f, "{a}")?;
                    }
                    write!(f, "x")?;
                    if k > 1 {
                        write!(f, "^{k}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn horner(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_matches_direct_substitution() {
        let p = Potential::hermite();
        assert_eq!(p.eval(0.0), 0.0);
        assert_eq!(p.eval(2.0), 4.0);
        let q = Potential::new(vec![0.0, 0.0, -2.0, 0.0, 1.0]).unwrap();
        assert_eq!(q.eval(1.0), -1.0);
    }

    #[test]
    fn rejects_odd_degree_and_nonpositive_leading() {
        assert!(Potential::new(vec![0.0, 1.0, 0.0, 1.0]).is_err());
        assert!(Potential::new(vec![0.0, 0.0, -1.0]).is_err());
        assert!(Potential::new(vec![1.0]).is_err());
        // trailing zeros are trimmed before the degree check
        assert_eq!(Potential::new(vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap().degree(), 2);
    }

    #[test]
    fn weights_are_consistent_across_beta() {
        let p = Potential::new(vec![0.3, -0.2, 1.0, 0.5, 1.0]).unwrap();
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let w1 = p.weight(Beta::Orthogonal, x);
            let w2 = p.weight(Beta::Unitary, x);
            let w4 = p.weight(Beta::Symplectic, x);
            assert_eq!(w2, w4);
            assert!((w1 * w1 - w2).abs() <= 1e-14 * w2);
        }
        assert_eq!(Potential::hermite().weight(Beta::Unitary, 0.0), 1.0);
    }

    #[test]
    fn weight_decays_far_out() {
        for p in [Potential::hermite(), Potential::quartic()] {
            let scale = (50.0 / p.leading()).powf(1.0 / p.degree() as f64);
            for beta in Beta::ALL {
                assert!(p.weight(beta, 10.0 * scale) < 1e-30);
                assert!(p.weight(beta, -10.0 * scale) < 1e-30);
                assert!(p.weight(beta, 0.0) > 0.0);
            }
        }
    }

    #[test]
    fn derivatives() {
        let p = Potential::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let x = 0.7;
        let h = 1e-5;
        let fd = (p.eval(x + h) - p.eval(x - h)) / (2.0 * h);
        assert!((fd - p.derivative(x)).abs() < 1e-8);
        let fd2 = (p.derivative(x + h) - p.derivative(x - h)) / (2.0 * h);
        assert!((fd2 - p.second_derivative(x)).abs() < 1e-7);
        assert_eq!(p.derivative_coefficients(), vec![2.0, 6.0, 12.0, 20.0]);
    }

    #[test]
    fn beta_parsing() {
        assert_eq!(Beta::try_from(4).unwrap(), Beta::Symplectic);
        assert!(matches!(Beta::try_from(3), Err(Error::InvalidBeta(3))));
    }

    #[test]
    fn serde_roundtrip_is_verbatim() {
        let p = Potential::new(vec![0.5, 0.0, 1.0, 0.25, 2.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[0.5,0.0,1.0,0.25,2.0]");
        let back: Potential = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Potential>("[0.0, 1.0, -1.0]").is_err());
    }

    #[test]
    fn leading_mrs_scale_matches_closed_forms() {
        // m = 1: sqrt(2N); m = 2: (4N/3)^{1/4}
        assert!((Potential::hermite().leading_mrs_scale(50.0) - 10.0).abs() < 1e-12);
        let q = Potential::quartic().leading_mrs_scale(30.0);
        assert!((q - 40f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn display() {
        let p = Potential::new(vec![1.0, 0.0, -2.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.to_string(), "x^4 - 2x^2 + 1");
    }
}
