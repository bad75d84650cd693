//! Uniform computational grid and the sinh stretching map.
//!
//! The stretching map
//!
//!   phi(x) = sinh(gamma2 * x + gamma1 * (1 - x)) / zeta
//!
//! takes the uniform computational coordinate x in [0, 1] to log-moneyness
//! and concentrates physical grid points around the strike (phi = 0).
//! The anchoring constants are gamma1 = asinh(zeta * s_hat_min) and
//! gamma2 = asinh(zeta * s_hat_max), so that phi(0) = s_hat_min and
//! phi(1) = s_hat_max exactly.
//!
//! Note on naming: the anchoring constants are called c1, c2 in the source
//! material; they are renamed gamma1, gamma2 here to avoid a collision with
//! the convection coefficients c1, c2 of the PDE.

use crate::error::{Error, Result};

/// Sinh stretching map with endpoint anchoring.
///
/// Immutable after construction; safe to share across grid levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinhTransform {
    /// Stretching strength (> 0). Larger zeta concentrates more points near phi = 0.
    pub zeta: f64,
    /// Lower log-moneyness bound, phi(0).
    pub s_hat_min: f64,
    /// Upper log-moneyness bound, phi(1).
    pub s_hat_max: f64,
    /// asinh(zeta * s_hat_min).
    pub gamma1: f64,
    /// asinh(zeta * s_hat_max).
    pub gamma2: f64,
}

/// phi and its first four derivatives at a point.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransformJet {
    pub phi: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

/// Builds the stretching map with the anchoring constants set so that
/// phi(0) = s_hat_min and phi(1) = s_hat_max.
pub fn make_transform(zeta: f64, s_hat_min: f64, s_hat_max: f64) -> Result<SinhTransform> {
    if !zeta.is_finite() || !s_hat_min.is_finite() || !s_hat_max.is_finite() {
        return Err(Error::NonFinite("make_transform arguments".into()));
    }
    if zeta <= 0.0 {
        return Err(Error::InvalidInput(format!("zeta must be > 0, got {zeta}")));
    }
    if s_hat_min >= s_hat_max {
        return Err(Error::InvalidInput(format!(
            "degenerate interval: s_hat_min = {s_hat_min} >= s_hat_max = {s_hat_max}"
        )));
    }
    Ok(SinhTransform {
        zeta,
        s_hat_min,
        s_hat_max,
        gamma1: (zeta * s_hat_min).asinh(),
        gamma2: (zeta * s_hat_max).asinh(),
    })
}

impl SinhTransform {
    /// phi(x).
    pub fn eval(&self, x: f64) -> f64 {
        let w = self.gamma2 * x + self.gamma1 * (1.0 - x);
        w.sinh() / self.zeta
    }

    /// Closed-form derivatives of phi up to fourth order.
    ///
    /// With w(x) = gamma1 + (gamma2 - gamma1) x and dg = gamma2 - gamma1:
    /// phi^(n)(x) = dg^n * sinh/cosh(w) / zeta, alternating cosh for odd n.
    pub fn derivatives(&self, x: f64) -> Result<TransformJet> {
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("transform argument x = {x}")));
        }
        let dg = self.gamma2 - self.gamma1;
        let w = self.gamma1 + dg * x;
        let (sh, ch) = (w.sinh(), w.cosh());
        Ok(TransformJet {
            phi: sh / self.zeta,
            d1: dg * ch / self.zeta,
            d2: dg * dg * sh / self.zeta,
            d3: dg * dg * dg * ch / self.zeta,
            d4: dg * dg * dg * dg * sh / self.zeta,
        })
    }

    /// Inverse map: the computational coordinate x with phi(x) = s_hat.
    pub fn inverse(&self, s_hat: f64) -> f64 {
        ((self.zeta * s_hat).asinh() - self.gamma1) / (self.gamma2 - self.gamma1)
    }

    /// Computational location of the payoff kink phi(x) = 0.
    pub fn kink_location(&self) -> f64 {
        -self.gamma1 / (self.gamma2 - self.gamma1)
    }
}

/// Uniform tensor grid on a rectangle with equal steps in both directions.
///
/// `n1`, `n2` count grid intervals per direction, so there are
/// (n1 + 1) x (n2 + 1) nodes. Nodes are ordered lexicographically with the
/// x index running fastest: `index(i, j) = j * (n1 + 1) + i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D {
    pub n1: usize,
    pub n2: usize,
    pub h: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// Builds a uniform grid. The schemes assume dx1 = dx2 = h, so the domain
/// lengths divided by the interval counts must agree to round-off.
pub fn build_grid(n1: usize, n2: usize, bounds: ((f64, f64), (f64, f64))) -> Result<Grid2D> {
    let ((x_min, x_max), (y_min, y_max)) = bounds;
    for v in [x_min, x_max, y_min, y_max] {
        if !v.is_finite() {
            return Err(Error::NonFinite("grid bounds".into()));
        }
    }
    if n1 < 4 || n2 < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 intervals per direction (3x3 stencils, BDF4 history), got {n1} x {n2}"
        )));
    }
    if x_min >= x_max || y_min >= y_max {
        return Err(Error::InvalidInput("empty grid rectangle".into()));
    }
    let h1 = (x_max - x_min) / n1 as f64;
    let h2 = (y_max - y_min) / n2 as f64;
    if (h1 - h2).abs() > 1e-12 * h1.max(h2) {
        return Err(Error::InvalidInput(format!(
            "unequal steps: dx1 = {h1:.6e}, dx2 = {h2:.6e}; the schemes require dx1 = dx2"
        )));
    }
    Ok(Grid2D {
        n1,
        n2,
        h: h1,
        x_min,
        x_max,
        y_min,
        y_max,
    })
}

impl Grid2D {
    /// Number of nodes in the x direction.
    pub fn nx(&self) -> usize {
        self.n1 + 1
    }

    /// Number of nodes in the y direction.
    pub fn ny(&self) -> usize {
        self.n2 + 1
    }

    /// Total node count.
    pub fn n_nodes(&self) -> usize {
        self.nx() * self.ny()
    }

    /// Lexicographic node index, x fastest.
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx() && j < self.ny());
        j * self.nx() + i
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.h
    }

    /// True for nodes not on any boundary.
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        i > 0 && i < self.n1 && j > 0 && j < self.n2
    }

    /// Samples a function of (x, y) at every node, in node order.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_nodes());
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                out.push(f(self.x(i), self.y(j)));
            }
        }
        out
    }
}
