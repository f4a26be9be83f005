//! Mhaskar–Rakhmanov–Saff numbers, the equilibrium density of the rescaled
//! potential and the soft-edge scaling map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{horner, Potential};
use crate::quadrature::chebyshev_nodes;

/// Edge-scaling constants for a potential at size `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeScaling {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "cN")]
    pub c_n: f64,
    #[serde(rename = "dN")]
    pub d_n: f64,
    /// Monomial coefficients of `h_N`, lowest degree first.
    #[serde(rename = "hN")]
    pub h_n: Vec<f64>,
    #[serde(rename = "alphaN")]
    pub alpha_n: f64,
    #[serde(rename = "lambdaN")]
    pub lambda_n: f64,
}

impl EdgeScaling {
    pub fn new(p: &Potential, n: usize) -> Result<Self> {
        let (c_n, d_n) = mrs_numbers(p, n)?;
        let h_n = equilibrium_h(p, n, c_n, d_n)?;
        let alpha_n = (horner(&h_n, 1.0).powi(2) / 2.0).cbrt();
        let jac = c_n / (alpha_n * (n as f64).powf(2.0 / 3.0));
        Ok(EdgeScaling { n, c_n, d_n, h_n, alpha_n, lambda_n: jac.powf(-0.5) })
    }

    /// `ξ ↦ ξ^(N) = c_N(1 + ξ/(α_N N^{2/3})) + d_N`.
    pub fn edge_map(&self, xi: f64) -> f64 {
        self.c_n * (1.0 + xi / (self.alpha_n * (self.n as f64).powf(2.0 / 3.0))) + self.d_n
    }

    pub fn inverse_edge_map(&self, x: f64) -> f64 {
        ((x - self.d_n) / self.c_n - 1.0) * self.alpha_n * (self.n as f64).powf(2.0 / 3.0)
    }

    /// `dξ^(N)/dξ = λ_(N)^{-2}`.
    pub fn jacobian(&self) -> f64 {
        self.c_n / (self.alpha_n * (self.n as f64).powf(2.0 / 3.0))
    }

    /// The soft edge `c_N + d_N`.
    pub fn edge(&self) -> f64 {
        self.c_n + self.d_n
    }

    /// Equilibrium density `ψ_N(x) = (1/2π)√(1 − x²) h_N(x)` on `[−1, 1]`.
    pub fn density(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            return 0.0;
        }
        (1.0 - x * x).sqrt() * horner(&self.h_n, x) / (2.0 * std::f64::consts::PI)
    }
}

pub fn edge_map(s: &EdgeScaling, xi: f64) -> f64 {
    s.edge_map(xi)
}

pub fn inverse_edge_map(s: &EdgeScaling, x: f64) -> f64 {
    s.inverse_edge_map(x)
}

/// Chebyshev coefficients `v_0, …, v_{2m−1}` of `V_N′(x) = c V′(cx + d)/N`,
/// with their partial derivatives in `c` and `d`.
struct ChebyshevExpansion {
    v: Vec<f64>,
    dv_dc: Vec<f64>,
    dv_dd: Vec<f64>,
}

fn expand_derivative(p: &Potential, n: f64, c: f64, d: f64) -> ChebyshevExpansion {
    let order = p.degree();
    let q = 2 * order + 2;
    let nodes = chebyshev_nodes(q);
    let mut v = vec![0.0; order];
    let mut dv_dc = vec![0.0; order];
    let mut dv_dd = vec![0.0; order];
    for (i, &x) in nodes.iter().enumerate() {
        let y = c * x + d;
        let d1 = p.derivative(y);
        let d2 = p.second_derivative(y);
        let f = c * d1 / n;
        let fc = (d1 + c * x * d2) / n;
        let fd = c * d2 / n;
        let theta = (2 * i + 1) as f64 * std::f64::consts::PI / (2 * q) as f64;
        for k in 0..order {
            let t = (k as f64 * theta).cos();
            let scale = if k == 0 { 1.0 } else { 2.0 } / q as f64;
            v[k] += scale * f * t;
            dv_dc[k] += scale * fc * t;
            dv_dd[k] += scale * fd * t;
        }
    }
    ChebyshevExpansion { v, dv_dc, dv_dd }
}

/// Residuals of the two support conditions `v_0 = 0`, `v_1 = 4`.
pub fn mrs_residuals(p: &Potential, n: usize, c: f64, d: f64) -> (f64, f64) {
    let e = expand_derivative(p, n as f64, c, d);
    (e.v[0], e.v[1] - 4.0)
}

/// `(c_N, d_N)` such that the equilibrium measure of `V(cx + d)/N` is
/// supported on exactly `[−1, 1]`.
pub fn mrs_numbers(p: &Potential, n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let nf = n as f64;
    let mut c = p.leading_mrs_scale(nf);
    let mut d = p.leading_mrs_center();
    let mut residual = f64::INFINITY;
    for _ in 0..200 {
        let e = expand_derivative(p, nf, c, d);
        let f0 = e.v[0];
        let f1 = e.v[1] - 4.0;
        residual = f0.abs().max(f1.abs());
        let (a, b) = (e.dv_dc[0], e.dv_dd[0]);
        let (cc, dd) = (e.dv_dc[1], e.dv_dd[1]);
        let det = a * dd - b * cc;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let mut dc = (f0 * dd - b * f1) / det;
        let dd_step = (a * f1 - cc * f0) / det;
        // keep the half-width positive
        while c - dc <= 0.0 {
            dc *= 0.5;
        }
        c -= dc;
        d -= dd_step;
        if dc.abs() <= 1e-15 * c && dd_step.abs() <= 1e-15 * (c + d.abs()) {
            let (r0, r1) = mrs_residuals(p, n, c, d);
            residual = r0.abs().max(r1.abs());
            break;
        }
    }
    if residual < 1e-10 && c.is_finite() && d.is_finite() {
        Ok((c, d))
    } else {
        Err(Error::NoConvergence { what: "MRS Newton iteration", residual })
    }
}

/// Monomial coefficients of `U_0, …, U_{k}`.
fn chebyshev_u_monomials(k: usize) -> Vec<Vec<f64>> {
    let mut u: Vec<Vec<f64>> = vec![vec![1.0]];
    if k >= 1 {
        u.push(vec![0.0, 2.0]);
    }
    for j in 2..=k {
        let mut next = vec![0.0; j + 1];
        for (i, &a) in u[j - 1].iter().enumerate() {
            next[i + 1] += 2.0 * a;
        }
        for (i, &a) in u[j - 2].iter().enumerate() {
            next[i] -= a;
        }
        u.push(next);
    }
    u
}

/// The polynomial `h_N` of degree `2m − 2` with
/// `ψ_N(x) = (1/2π)√(1 − x²) h_N(x)`.
pub fn equilibrium_h(p: &Potential, n: usize, c: f64, d: f64) -> Result<Vec<f64>> {
    let e = expand_derivative(p, n as f64, c, d);
    let order = p.degree();
    let u = chebyshev_u_monomials(order);
    let mut h = vec![0.0; order - 1];
    for k in 1..order {
        for (i, &a) in u[k - 1].iter().enumerate() {
            h[i] += e.v[k] * a;
        }
    }
    let grid = 4001;
    let mut min = f64::INFINITY;
    for i in 0..grid {
        let x = -1.0 + 2.0 * i as f64 / (grid - 1) as f64;
        min = min.min(horner(&h, x));
    }
    if min <= 0.0 {
        return Err(Error::NonPositiveDensity { min });
    }
    if let Some(at) = exterior_violation(&h) {
        return Err(Error::NotOneCut { at });
    }
    let mass = equilibrium_mass(&h);
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::NoConvergence { what: "equilibrium normalization", residual: mass - 1.0 });
    }
    Ok(h)
}

/// Outside `[−1, 1]` the effective potential grows like
/// `∫_1^x h(t)√(t² − 1) dt`; returns a point where it drops below its value on
/// the support, which means the true equilibrium measure is not one-cut.
fn exterior_violation(h: &[f64]) -> Option<f64> {
    let lead = *h.last().unwrap();
    let bound = 1.0 + h.iter().map(|a| (a / lead).abs()).fold(0.0, f64::max);
    let reach = 2.0 * bound + 2.0;
    let steps = 20_000;
    let dx = (reach - 1.0) / steps as f64;
    for sign in [1.0, -1.0] {
        let mut acc = 0.0;
        let mut prev = 0.0;
        for i in 1..=steps {
            let t = 1.0 + dx * i as f64;
            let f = horner(h, sign * t) * (t * t - 1.0).sqrt();
            acc += 0.5 * dx * (prev + f);
            prev = f;
            if acc < -1e-12 {
                return Some(sign * t);
            }
        }
    }
    None
}

/// `∫_{-1}^1 (1/2π)√(1 − x²) h(x) dx` by Chebyshev–Gauss of the second kind.
pub fn equilibrium_mass(h: &[f64]) -> f64 {
    let q = h.len() + 4;
    let mut s = 0.0;
    for i in 1..=q {
        let theta = i as f64 * std::f64::consts::PI / (q + 1) as f64;
        let x = theta.cos();
        let w = std::f64::consts::PI / (q + 1) as f64 * theta.sin().powi(2);
        s += w * horner(h, x);
    }
    s / (2.0 * std::f64::consts::PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_closed_forms() {
        let p = Potential::hermite();
        for n in [1, 10, 50, 100] {
            let s = EdgeScaling::new(&p, n).unwrap();
            assert!((s.c_n - (2.0 * n as f64).sqrt()).abs() < 1e-10 * s.c_n);
            assert!(s.d_n.abs() < 1e-12);
            assert_eq!(s.h_n.len(), 1);
            assert!((s.h_n[0] - 4.0).abs() < 1e-12);
            assert!((s.alpha_n - 2.0).abs() < 1e-12);
        }
        let s = EdgeScaling::new(&p, 50).unwrap();
        assert!((s.c_n - 10.0).abs() < 1e-10);
        assert!((s.edge_map(0.0) - 10.0).abs() < 1e-10);
    }

    #[test]
    fn quartic_closed_forms() {
        let p = Potential::quartic();
        for n in [10, 50, 100] {
            let s = EdgeScaling::new(&p, n).unwrap();
            let c = (4.0 * n as f64 / 3.0).powf(0.25);
            assert!((s.c_n - c).abs() < 1e-9 * c);
            assert!(s.d_n.abs() < 1e-12);
            assert!((s.h_n[0] - 8.0 / 3.0).abs() < 1e-12);
            assert!(s.h_n[1].abs() < 1e-12);
            assert!((s.h_n[2] - 16.0 / 3.0).abs() < 1e-12);
            assert!((s.alpha_n - 2.0 * 2f64.powf(2.0 / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn mrs_residuals_vanish() {
        for coeffs in [vec![0.0, 0.0, 1.0, 1.0, 1.0], vec![0.0, 0.3, -1.0, 0.0, 0.5, 0.2, 1.0]] {
            let p = Potential::new(coeffs).unwrap();
            for n in [5, 40, 200] {
                let (c, d) = mrs_numbers(&p, n).unwrap();
                let (r0, r1) = mrs_residuals(&p, n, c, d);
                assert!(r0.abs() < 1e-10 && r1.abs() < 1e-10);
                let h = equilibrium_h(&p, n, c, d).unwrap();
                assert!((equilibrium_mass(&h) - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn center_tends_to_leading_order() {
        let p = Potential::new(vec![0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let (_, d) = mrs_numbers(&p, 100).unwrap();
        assert!((d + 0.25).abs() < 0.025, "d = {d}");
    }

    #[test]
    fn density_integrates_to_one_by_quadrature() {
        let p = Potential::new(vec![0.0, -0.5, 0.2, 0.4, 1.0]).unwrap();
        let s = EdgeScaling::new(&p, 30).unwrap();
        let r = crate::quadrature::GaussLegendre::new(40);
        // substitute x = sin θ to remove the square-root endpoints
        let m = r.integrate(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, |t| {
            s.density(t.sin()) * t.cos()
        });
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_well_is_rejected_at_small_n() {
        // V = x^4 - 10 x^2 has a two-cut equilibrium measure for small N
        let p = Potential::new(vec![0.0, 0.0, -10.0, 0.0, 1.0]).unwrap();
        let r = EdgeScaling::new(&p, 2);
        assert!(matches!(r, Err(Error::NotOneCut { .. })), "{r:?}");
        // at the symmetric point h(0) = 4 − c⁴/N < 0
        let c = 7.041_f64.sqrt();
        assert!(matches!(equilibrium_h(&p, 2, c, 0.0), Err(Error::NonPositiveDensity { .. })));
        assert!(EdgeScaling::new(&p, 200).is_ok());
    }

    #[test]
    fn alpha_is_stationary_for_monomial_and_converges_otherwise() {
        let q = Potential::quartic();
        let target = 2.0 * 2f64.powf(2.0 / 3.0);
        let errs: Vec<f64> = [20, 40, 80, 160]
            .iter()
            .map(|&n| (EdgeScaling::new(&q, n).unwrap().alpha_n - target).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let p = Potential::new(vec![0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        let errs: Vec<f64> = [20, 40, 80, 160]
            .iter()
            .map(|&n| (EdgeScaling::new(&p, n).unwrap().alpha_n - target).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn edge_map_roundtrip_and_lambda() {
        let s = EdgeScaling::new(&Potential::quartic(), 37).unwrap();
        for i in -100..=100 {
            let xi = i as f64 * 0.1;
            assert!((s.inverse_edge_map(s.edge_map(xi)) - xi).abs() < 1e-12);
        }
        assert_eq!(s.edge_map(0.0), s.c_n + s.d_n);
        assert!((s.lambda_n.powi(-2) - s.jacobian()).abs() < 1e-14 * s.jacobian());
    }

    #[test]
    fn json_field_names() {
        let s = EdgeScaling::new(&Potential::hermite(), 8).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["N", "cN", "dN", "hN", "alphaN", "lambdaN"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
