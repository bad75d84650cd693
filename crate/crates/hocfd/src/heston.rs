//! Semi-analytic Heston pricing oracle (the alpha = 0 member of the model
//! family): European put/call by characteristic-function integration, used
//! to validate the PDE solver end to end.
//!
//! Implements the two-probability representation with the
//! numerically stable branch ("little trap") of the characteristic
//! function, integrated by panel-wise Gauss-Legendre quadrature with a
//! tail-convergence check.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Heston model inputs for the oracle.
#[derive(Debug, Clone, Copy)]
pub struct HestonParams {
    /// Mean-reversion speed.
    pub kappa: f64,
    /// Long-run variance mean.
    pub theta: f64,
    /// Volatility of volatility.
    pub sigma: f64,
    /// Spot/variance correlation.
    pub rho: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Strike.
    pub strike: f64,
}

/// A priced point: spot, spot variance and the option value.
#[derive(Debug, Clone, Copy)]
pub struct HestonQuote {
    pub spot: f64,
    pub variance: f64,
    pub price: f64,
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on the
/// Legendre recurrence). Shared with the payoff-smoothing quadrature.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let mut p0 = 1.0f64;
            let mut p1 = 0.0f64;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                x[i] = -z;
                x[n - 1 - i] = z;
                let wi = 2.0 / ((1.0 - z * z) * dp * dp);
                w[i] = wi;
                w[n - 1 - i] = wi;
                break;
            }
        }
    }
    (x, w)
}

/// Integrand of P_j at frequency phi.
fn p_integrand(j: u8, phi: f64, p: &HestonParams, s: f64, v: f64, tau: f64) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let (u, b) = match j {
        1 => (0.5, p.kappa - p.rho * p.sigma),
        _ => (-0.5, p.kappa),
    };
    let a = p.kappa * p.theta;
    let sigma2 = p.sigma * p.sigma;
    let rsp = i * (p.rho * p.sigma * phi);
    let d = ((rsp - b) * (rsp - b) - sigma2 * (2.0 * u * phi * i - phi * phi)).sqrt();
    let g2 = (b - rsp - d) / (b - rsp + d);
    let e = (-d * tau).exp();
    let c = i * (p.r * phi * tau)
        + (a / sigma2) * ((b - rsp - d) * tau - 2.0 * ((1.0 - g2 * e) / (1.0 - g2)).ln());
    let dd = ((b - rsp - d) / sigma2) * ((1.0 - e) / (1.0 - g2 * e));
    let f = (c + dd * v + i * (phi * s.ln())).exp();
    ((-i * (phi * p.strike.ln())).exp() * f / (i * phi)).re
}

/// The in-the-money probabilities P1 (share measure) and P2 (risk-neutral).
fn probabilities(p: &HestonParams, s: f64, v: f64, tau: f64) -> Result<(f64, f64)> {
    let (nodes, weights) = gauss_legendre(48);
    let mut total = [0.0f64; 2];
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut converged = false;
    for _panel in 0..16 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut panel = [0.0f64; 2];
        for (x, w) in nodes.iter().zip(&weights) {
            let phi = mid + half * x;
            panel[0] += w * p_integrand(1, phi, p, s, v, tau);
            panel[1] += w * p_integrand(2, phi, p, s, v, tau);
        }
        panel[0] *= half;
        panel[1] *= half;
        total[0] += panel[0];
        total[1] += panel[1];
        if !total[0].is_finite() || !total[1].is_finite() {
            return Err(Error::QuadratureNonConvergence(
                "non-finite characteristic-function panel".into(),
            ));
        }
        if hi >= 8.0 && panel[0].abs().max(panel[1].abs()) < 1e-13 {
            converged = true;
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    if !converged {
        return Err(Error::QuadratureNonConvergence(format!(
            "tail contribution still significant at phi = {hi}"
        )));
    }
    Ok((0.5 + total[0] / PI, 0.5 + total[1] / PI))
}

/// European put price. Absolute quadrature error is far below the
/// 1e-6 * strike contract.
pub fn put_price(p: &HestonParams, s: f64, v: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !(s > 0.0) || !(v > 0.0) {
        return Err(Error::InvalidInput(format!(
            "oracle needs s, v, tau > 0 (got s = {s}, v = {v}, tau = {tau})"
        )));
    }
    let (p1, p2) = probabilities(p, s, v, tau)?;
    let df = (-p.r * tau).exp();
    Ok(p.strike * df * (1.0 - p2) - s * (1.0 - p1))
}

/// European call price.
pub fn call_price(p: &HestonParams, s: f64, v: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) || !(s > 0.0) || !(v > 0.0) {
        return Err(Error::InvalidInput(format!(
            "oracle needs s, v, tau > 0 (got s = {s}, v = {v}, tau = {tau})"
        )));
    }
    let (p1, p2) = probabilities(p, s, v, tau)?;
    let df = (-p.r * tau).exp();
    Ok(s * p1 - p.strike * df * p2)
}

pub fn put_quote(p: &HestonParams, s: f64, v: f64, tau: f64) -> Result<HestonQuote> {
    Ok(HestonQuote {
        spot: s,
        variance: v,
        price: put_price(p, s, v, tau)?,
    })
}
