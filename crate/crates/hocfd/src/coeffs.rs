//! PDE coefficient sampling.
//!
//! The model PDE is
//!
//!   d u_tau + a1 u_xx + a2 u_yy + b12 u_xy + c1 u_x + c2 u_y = 0,
//!
//! with a1, a2 < 0 and d != 0. The auxiliary relations differentiate this
//! equation, so every coefficient is carried together with its first and
//! second spatial derivatives. Derivatives are supplied analytically by the
//! application (coefficients must be C^2); nothing is differenced here.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// A scalar value with its first and second partial derivatives in (x, y).
/// Arithmetic follows the product/sum rules, which keeps hand-derived
/// coefficient jets short and mistake-free.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

impl Jet2 {
    pub const fn constant(v: f64) -> Self {
        Jet2 {
            v,
            d1: 0.0,
            d2: 0.0,
            d11: 0.0,
            d12: 0.0,
            d22: 0.0,
        }
    }

    /// The coordinate function x.
    pub const fn var_x(x: f64) -> Self {
        Jet2 {
            v: x,
            d1: 1.0,
            d2: 0.0,
            d11: 0.0,
            d12: 0.0,
            d22: 0.0,
        }
    }

    /// The coordinate function y.
    pub const fn var_y(y: f64) -> Self {
        Jet2 {
            v: y,
            d1: 0.0,
            d2: 1.0,
            d11: 0.0,
            d12: 0.0,
            d22: 0.0,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Jet2 {
            v: c * self.v,
            d1: c * self.d1,
            d2: c * self.d2,
            d11: c * self.d11,
            d12: c * self.d12,
            d22: c * self.d22,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.d1.is_finite()
            && self.d2.is_finite()
            && self.d11.is_finite()
            && self.d12.is_finite()
            && self.d22.is_finite()
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
            d11: self.d11 + o.d11,
            d12: self.d12 + o.d12,
            d22: self.d22 + o.d22,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + self.v * o.d2,
            d11: self.d11 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d11,
            d12: self.d12 * o.v + self.d1 * o.d2 + self.d2 * o.d1 + self.v * o.d12,
            d22: self.d22 * o.v + 2.0 * self.d2 * o.d2 + self.v * o.d22,
        }
    }
}

/// The six coefficients of the model PDE at one point, each with
/// derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoeffSet {
    pub a1: Jet2,
    pub a2: Jet2,
    pub b12: Jet2,
    pub c1: Jet2,
    pub c2: Jet2,
    pub d: Jet2,
}

impl CoeffSet {
    pub fn is_finite(&self) -> bool {
        self.a1.is_finite()
            && self.a2.is_finite()
            && self.b12.is_finite()
            && self.c1.is_finite()
            && self.c2.is_finite()
            && self.d.is_finite()
    }
}

/// Supplies coefficient jets anywhere on the closed domain. The SV
/// application implements this; tests use `FnCoefficients`.
pub trait CoefficientModel {
    fn eval(&self, x: f64, y: f64) -> CoeffSet;
}

/// Closure-backed coefficient model.
pub struct FnCoefficients<F: Fn(f64, f64) -> CoeffSet>(pub F);

impl<F: Fn(f64, f64) -> CoeffSet> CoefficientModel for FnCoefficients<F> {
    fn eval(&self, x: f64, y: f64) -> CoeffSet {
        (self.0)(x, y)
    }
}

/// Coefficients and their derivatives sampled at every grid node.
///
/// The coefficients of the SV application do not depend on tau, so the
/// field is sampled once per grid level. Time-dependent coefficients can be
/// supported by resampling per step.
///
/// Immutable after construction.
pub struct CoefficientField {
    pub grid: Grid2D,
    data: Vec<CoeffSet>,
    max_abs_a: f64,
    cross_term_excess: f64,
}

/// Samples a coefficient model on the grid and validates the sign
/// conventions of the model PDE (a1, a2 < 0, d != 0 at every node).
pub fn sample_coefficients(
    model: &impl CoefficientModel,
    grid: &Grid2D,
) -> Result<CoefficientField> {
    let mut data = Vec::with_capacity(grid.n_nodes());
    let mut max_abs_a = 0.0f64;
    let mut excess = f64::NEG_INFINITY;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let cs = model.eval(grid.x(i), grid.y(j));
            if !cs.is_finite() {
                return Err(Error::NonFinite("coefficient sample".into()).at_node(i, j));
            }
            if cs.a1.v >= 0.0 || cs.a2.v >= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "ellipticity violated: a1 = {:.3e}, a2 = {:.3e} (need a_i < 0)",
                    cs.a1.v, cs.a2.v
                ))
                .at_node(i, j));
            }
            if cs.d.v == 0.0 {
                return Err(Error::InvalidInput("mass coefficient d = 0".into()).at_node(i, j));
            }
            max_abs_a = max_abs_a.max(cs.a1.v.abs()).max(cs.a2.v.abs());
            excess = excess.max(cs.b12.v * cs.b12.v - 4.0 * cs.a1.v * cs.a2.v);
            data.push(cs);
        }
    }
    Ok(CoefficientField {
        grid: *grid,
        data,
        max_abs_a,
        cross_term_excess: excess,
    })
}

impl CoefficientField {
    pub fn at(&self, i: usize, j: usize) -> &CoeffSet {
        &self.data[self.grid.index(i, j)]
    }

    /// Largest |a_i| over the grid; denominators are compared against this.
    pub fn max_abs_a(&self) -> f64 {
        self.max_abs_a
    }

    /// Max over nodes of b12^2 - 4 a1 a2. Non-positive means the
    /// cross-derivative dominance bound holds everywhere. Monitored and
    /// reported, not enforced.
    pub fn cross_term_excess(&self) -> f64 {
        self.cross_term_excess
    }
}
