//! Mapping of the stochastic-volatility pricing problem onto the model PDE.
//!
//! Under the transformations tau = T - t, u = e^{r tau} V / K,
//! s_hat = ln(S/K), y = v/sigma and s_hat = phi(x), the pricing equation for
//! the variance process dv = kappa v^alpha (theta - v) dt + sigma sqrt(v) dW
//! becomes the model PDE with
//!
//!   d   = phi_x^3,
//!   a1  = -(sigma y / 2) phi_x,
//!   a2  = -(sigma y / 2) phi_x^3,
//!   b12 = -rho sigma y phi_x^2,
//!   c1  =  sigma y phi_xx / 2 + (sigma y / 2 - r) phi_x^2,
//!   c2  = -kappa sigma^(alpha-1) y^alpha (theta - sigma y) phi_x^3,
//!
//! which satisfies the a_i < 0, d > 0 convention (diffusion on the
//! convention-consistent side; the sign set is validated against the
//! Heston oracle end to end). Initial condition: the put payoff
//! u(x, y, 0) = max(1 - e^{phi(x)}, 0), smoothed in x by the fourth-order
//! kernel with support [-3h, 3h]; Dirichlet data in x frozen at the payoff
//! values; the y-boundaries use ghost-point extrapolation in the assembled
//! system.

use crate::coeffs::{sample_coefficients, CoeffSet, CoefficientField, CoefficientModel, Jet2};
use crate::error::{Error, Result};
use crate::grid::{build_grid, make_transform, Grid2D, SinhTransform};
use crate::heston;
use crate::schemes::DirichletBc;

/// Stochastic-volatility model and domain parameters.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct SVParams {
    /// Variance-drift exponent: 0 is Heston, 1 is the SQRN model.
    pub alpha: f64,
    /// Mean-reversion speed.
    pub kappa: f64,
    /// Long-run mean of the variance.
    pub theta: f64,
    /// Volatility of volatility.
    pub sigma: f64,
    /// Spot/variance correlation.
    pub rho: f64,
    /// Risk-free rate.
    pub r: f64,
    /// Strike.
    pub strike: f64,
    /// Maturity T.
    pub maturity: f64,
    /// Truncated spot domain.
    pub s_min: f64,
    pub s_max: f64,
    /// Truncated variance domain; v_min > 0 keeps the diffusion
    /// coefficients bounded away from zero.
    pub v_min: f64,
    pub v_max: f64,
}

impl SVParams {
    pub fn validate(&self) -> Result<()> {
        let p = self;
        if !(p.kappa > 0.0 && p.theta > 0.0 && p.sigma > 0.0) {
            return Err(Error::InvalidInput(
                "kappa, theta, sigma must be positive".into(),
            ));
        }
        if p.alpha < 0.0 {
            return Err(Error::InvalidInput("alpha must be >= 0".into()));
        }
        if !(-1.0..=1.0).contains(&p.rho) {
            return Err(Error::InvalidInput("rho must lie in [-1, 1]".into()));
        }
        if !(p.v_min > 0.0 && p.v_max > p.v_min) {
            return Err(Error::InvalidInput("need 0 < v_min < v_max".into()));
        }
        if !(p.s_min > 0.0 && p.s_max > p.s_min) {
            return Err(Error::InvalidInput("need 0 < s_min < s_max".into()));
        }
        if !(p.strike > 0.0 && p.maturity >= 0.0) {
            return Err(Error::InvalidInput(
                "need strike > 0 and maturity >= 0".into(),
            ));
        }
        Ok(())
    }

    /// y = v / sigma domain.
    pub fn y_min(&self) -> f64 {
        self.v_min / self.sigma
    }

    pub fn y_max(&self) -> f64 {
        self.v_max / self.sigma
    }

    /// The Heston (alpha = 0) semi-analytic put price at (S, v, tau).
    pub fn heston_reference_price(&self, s: f64, v: f64, tau: f64) -> Result<f64> {
        if self.alpha != 0.0 {
            return Err(Error::InvalidInput(format!(
                "the semi-analytic oracle covers alpha = 0 only (alpha = {})",
                self.alpha
            )));
        }
        heston::put_price(
            &heston::HestonParams {
                kappa: self.kappa,
                theta: self.theta,
                sigma: self.sigma,
                rho: self.rho,
                r: self.r,
                strike: self.strike,
            },
            s,
            v,
            tau,
        )
    }
}

/// Coefficient model of the transformed SV PDE.
pub struct SvCoefficients {
    pub params: SVParams,
    pub transform: SinhTransform,
}

impl CoefficientModel for SvCoefficients {
    fn eval(&self, x: f64, y: f64) -> CoeffSet {
        let p = &self.params;
        let t = self
            .transform
            .derivatives(x)
            .expect("finite grid coordinate");

        // jets of phi_x and phi_xx as functions of (x, y)
        let phix = Jet2 {
            v: t.d1,
            d1: t.d2,
            d11: t.d3,
            ..Jet2::default()
        };
        let phixx = Jet2 {
            v: t.d2,
            d1: t.d3,
            d11: t.d4,
            ..Jet2::default()
        };
        let yj = Jet2::var_y(y);
        let phix2 = phix * phix;
        let phix3 = phix2 * phix;

        // y^alpha jet (y > 0 on the truncated domain)
        let ypow = Jet2 {
            v: y.powf(p.alpha),
            d2: p.alpha * y.powf(p.alpha - 1.0),
            d22: p.alpha * (p.alpha - 1.0) * y.powf(p.alpha - 2.0),
            ..Jet2::default()
        };
        let drift = ypow * (Jet2::constant(p.theta) - yj.scale(p.sigma));

        CoeffSet {
            a1: (yj * phix).scale(-0.5 * p.sigma),
            a2: (yj * phix3).scale(-0.5 * p.sigma),
            b12: (yj * phix2).scale(-p.rho * p.sigma),
            c1: (yj * phixx).scale(0.5 * p.sigma)
                + (yj.scale(0.5 * p.sigma) - Jet2::constant(p.r)) * phix2,
            c2: (drift * phix3).scale(-p.kappa * p.sigma.powf(p.alpha - 1.0)),
            d: phix3,
        }
    }
}

/// A fully assembled pricing problem on one grid level.
pub struct TransformedProblem {
    pub coeffs: CoefficientField,
    /// Smoothed initial condition on the grid.
    pub u0: Vec<f64>,
    pub bc: DirichletBc,
    pub transform: SinhTransform,
    pub grid: Grid2D,
    pub params: SVParams,
}

/// Raw put payoff in the computational coordinate.
fn payoff(t: &SinhTransform, x: f64) -> f64 {
    (1.0 - t.eval(x).exp()).max(0.0)
}

/// Cubic B-spline (support [-2, 2], unit integral).
fn bspline3(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        2.0 / 3.0 - a * a + 0.5 * a * a * a
    } else if a < 2.0 {
        let b = 2.0 - a;
        b * b * b / 6.0
    } else {
        0.0
    }
}

/// Fourth-order smoothing kernel with support [-3, 3]:
/// Phi4 = (4/3) B3(x) - (1/6) B3(x+1) - (1/6) B3(x-1).
/// Its Fourier transform is (sin(w/2)/(w/2))^4 (1 + (2/3) sin^2(w/2)), so
/// convolution reproduces cubics exactly and smoothing vanishes as h -> 0.
fn kernel4(x: f64) -> f64 {
    4.0 / 3.0 * bspline3(x) - (bspline3(x + 1.0) + bspline3(x - 1.0)) / 6.0
}

/// Smooths the payoff profile in the x direction (the kink is
/// y-independent): each node within 3h of the kink is replaced by the
/// convolution with the fourth-order kernel, evaluated by Gauss-Legendre
/// quadrature on the smooth pieces between the kernel knots and the kink.
/// Nodes farther than 3h from the kink keep the exact payoff.
pub fn smooth_initial(t: &SinhTransform, grid: &Grid2D) -> Result<Vec<f64>> {
    let h = grid.h;
    let x_kink = t.kink_location();
    let mut profile: Vec<f64> = (0..grid.nx()).map(|i| payoff(t, grid.x(i))).collect();
    if x_kink < grid.x_min || x_kink > grid.x_max {
        // kink outside the domain: the payoff is smooth on it, nothing to do
        return Ok(profile);
    }
    let (nodes, weights) = heston::gauss_legendre(20);
    for (i, value) in profile.iter_mut().enumerate() {
        let xi = grid.x(i);
        let s_star = (xi - x_kink) / h;
        if s_star.abs() >= 3.0 {
            continue;
        }
        // breakpoints: kernel knots and the payoff kink
        let mut brk = vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
        if s_star > -3.0 && s_star < 3.0 && brk.iter().all(|b| (b - s_star).abs() > 1e-14) {
            brk.push(s_star);
            brk.sort_by(|a, b| a.partial_cmp(b).unwrap());
        }
        let mut acc = 0.0;
        for seg in brk.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            let mut seg_sum = 0.0;
            for (xn, wn) in nodes.iter().zip(&weights) {
                let s = mid + half * xn;
                seg_sum += wn * kernel4(s) * payoff(t, xi - s * h);
            }
            acc += half * seg_sum;
        }
        *value = acc;
    }
    Ok(profile)
}

/// Builds the transformed problem on an n-interval grid (computational
/// x domain [0, 1]; y domain [v_min, v_max]/sigma with the same step).
pub fn build_problem(p: &SVParams, zeta: f64, n: usize) -> Result<TransformedProblem> {
    p.validate()?;
    let transform = make_transform(zeta, (p.s_min / p.strike).ln(), (p.s_max / p.strike).ln())?;
    let h = 1.0 / n as f64;
    let y_span = p.y_max() - p.y_min();
    let n2 = (y_span / h).round() as usize;
    if n2 == 0 || (n2 as f64 * h - y_span).abs() > 1e-9 * y_span {
        return Err(Error::InvalidInput(format!(
            "y span {y_span} is not an integer multiple of h = {h}; \
             the schemes require dx = dy"
        )));
    }
    let grid = build_grid(n, n2, ((0.0, 1.0), (p.y_min(), p.y_max())))?;
    let coeffs = sample_coefficients(
        &SvCoefficients {
            params: *p,
            transform,
        },
        &grid,
    )?;

    let profile = smooth_initial(&transform, &grid)?;
    let mut u0 = Vec::with_capacity(grid.n_nodes());
    for _j in 0..grid.ny() {
        u0.extend_from_slice(&profile);
    }
    let bc = DirichletBc {
        left: vec![profile[0]; grid.ny()],
        right: vec![profile[grid.n1]; grid.ny()],
    };
    Ok(TransformedProblem {
        coeffs,
        u0,
        bc,
        transform,
        grid,
        params: *p,
    })
}

/// Back-transforms a u value at backward time tau to an option price:
/// V = K e^{-r tau} u.
pub fn untransform(u: f64, tau: f64, p: &SVParams) -> f64 {
    p.strike * (-p.r * tau).exp() * u
}

/// Market coordinates of a grid node: (S, v) = (K e^{phi(x)}, sigma y).
pub fn node_market_coords(problem: &TransformedProblem, i: usize, j: usize) -> (f64, f64) {
    let s = problem.params.strike * problem.transform.eval(problem.grid.x(i)).exp();
    let v = problem.params.sigma * problem.grid.y(j);
    (s, v)
}

/// Bilinear read-off of a grid function at market coordinates (S, v).
pub fn read_off(problem: &TransformedProblem, u: &[f64], s: f64, v: f64) -> Result<f64> {
    let g = &problem.grid;
    if u.len() != g.n_nodes() {
        return Err(Error::InvalidInput("grid function size mismatch".into()));
    }
    let x = problem.transform.inverse((s / problem.params.strike).ln());
    let y = v / problem.params.sigma;
    let tol = 1e-9;
    if x < g.x_min - tol || x > g.x_max + tol || y < g.y_min - tol || y > g.y_max + tol {
        return Err(Error::InvalidInput(format!(
            "query point (S = {s}, v = {v}) lies outside the truncated domain"
        )));
    }
    let fx = ((x - g.x_min) / g.h).clamp(0.0, g.n1 as f64);
    let fy = ((y - g.y_min) / g.h).clamp(0.0, g.n2 as f64);
    let i0 = (fx.floor() as usize).min(g.n1 - 1);
    let j0 = (fy.floor() as usize).min(g.n2 - 1);
    let tx = fx - i0 as f64;
    let ty = fy - j0 as f64;
    let val = (1.0 - tx) * (1.0 - ty) * u[g.index(i0, j0)]
        + tx * (1.0 - ty) * u[g.index(i0 + 1, j0)]
        + (1.0 - tx) * ty * u[g.index(i0, j0 + 1)]
        + tx * ty * u[g.index(i0 + 1, j0 + 1)];
    Ok(val)
}

/// Parameters of the published benchmark experiment (sigma recovered
/// from the unit y span).
pub fn benchmark_params(alpha: f64, rho: f64) -> SVParams {
    SVParams {
        alpha,
        kappa: 1.1,
        theta: 0.2,
        sigma: 0.2,
        rho,
        r: 0.05,
        strike: 100.0,
        maturity: 0.25,
        s_min: 1.5,
        s_max: 250.0,
        v_min: 0.1,
        v_max: 0.3,
    }
}
