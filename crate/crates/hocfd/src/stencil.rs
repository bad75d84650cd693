//! Compact 3x3 stencil algebra.
//!
//! All central differences that the schemes compose are tensor products of
//! the 1D operators (-1/2, 0, 1/2)/h and (1, -2, 1)/h^2. Pure third or
//! fourth derivatives in one direction are not representable on the 3x3
//! stencil; requesting one is an error that signals the auxiliary relations
//! must be used instead.

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Derivative requested from `central_stencil`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivKind {
    D1,
    D2,
    D11,
    D22,
    D12,
    D112,
    D122,
    D1122,
    // Not representable on the compact stencil:
    D111,
    D222,
    D1111,
    D2222,
    D1112,
    D1222,
}

/// Nine stencil weights with the power of h they are scaled by on
/// application. Weights are stored unscaled so one table serves all grid
/// levels; `scaled(h)` divides by h^h_power.
///
/// Index convention: `w[di][dj]` with di, dj in {0, 1, 2} mapping to node
/// offsets {-1, 0, +1} in x and y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil3x3 {
    pub w: [[f64; 3]; 3],
    pub h_power: i32,
}

const ID_1D: [f64; 3] = [0.0, 1.0, 0.0];
const D1_1D: [f64; 3] = [-0.5, 0.0, 0.5];
const D2_1D: [f64; 3] = [1.0, -2.0, 1.0];

fn tensor(sx: [f64; 3], sy: [f64; 3], h_power: i32) -> Stencil3x3 {
    let mut w = [[0.0; 3]; 3];
    for (di, wx) in sx.iter().enumerate() {
        for (dj, wy) in sy.iter().enumerate() {
            w[di][dj] = wx * wy;
        }
    }
    Stencil3x3 { w, h_power }
}

/// Second-order central difference approximation of the requested
/// derivative on the compact stencil.
pub fn central_stencil(kind: DerivKind) -> Result<Stencil3x3> {
    use DerivKind::*;
    match kind {
        D1 => Ok(tensor(D1_1D, ID_1D, 1)),
        D2 => Ok(tensor(ID_1D, D1_1D, 1)),
        D11 => Ok(tensor(D2_1D, ID_1D, 2)),
        D22 => Ok(tensor(ID_1D, D2_1D, 2)),
        D12 => Ok(tensor(D1_1D, D1_1D, 2)),
        D112 => Ok(tensor(D2_1D, D1_1D, 3)),
        D122 => Ok(tensor(D1_1D, D2_1D, 3)),
        D1122 => Ok(tensor(D2_1D, D2_1D, 4)),
        D111 | D222 | D1111 | D2222 | D1112 | D1222 => Err(Error::NonCompactDerivative(kind)),
    }
}

impl Stencil3x3 {
    pub fn zero() -> Self {
        Stencil3x3 {
            w: [[0.0; 3]; 3],
            h_power: 0,
        }
    }

    /// Single-point identity (weight 1 at the center).
    pub fn identity() -> Self {
        let mut s = Self::zero();
        s.w[1][1] = 1.0;
        s
    }

    /// Weights divided by h^h_power, ready for application on a grid of
    /// step h. The returned stencil has h_power 0.
    pub fn scaled(&self, h: f64) -> Stencil3x3 {
        let factor = h.powi(-self.h_power);
        let mut w = self.w;
        for row in &mut w {
            for v in row {
                *v *= factor;
            }
        }
        Stencil3x3 { w, h_power: 0 }
    }

    /// Applies the (already scaled) stencil to a grid function at (i, j).
    pub fn apply(&self, u: &[f64], grid: &Grid2D, i: usize, j: usize) -> f64 {
        debug_assert_eq!(self.h_power, 0, "apply expects h-scaled weights");
        let mut acc = 0.0;
        for di in 0..3usize {
            for dj in 0..3usize {
                let w = self.w[di][dj];
                if w != 0.0 {
                    let ii = i + di - 1;
                    let jj = j + dj - 1;
                    acc += w * u[grid.index(ii, jj)];
                }
            }
        }
        acc
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().flatten().sum()
    }
}

/// Table of h-scaled central stencils for steps (h1, h2), built once per
/// assembly. The scheme formulas are kept in general (dx1, dx2) form even
/// though `build_grid` enforces dx1 = dx2.
#[derive(Debug, Clone, Copy)]
pub struct ScaledOps {
    pub id: Stencil3x3,
    pub d1: Stencil3x3,
    pub d2: Stencil3x3,
    pub d11: Stencil3x3,
    pub d22: Stencil3x3,
    pub d12: Stencil3x3,
    pub d112: Stencil3x3,
    pub d122: Stencil3x3,
    pub d1122: Stencil3x3,
}

impl ScaledOps {
    pub fn new(h1: f64, h2: f64) -> Self {
        let sc = |s: [f64; 3], h: f64, p: i32| {
            let f = h.powi(-p);
            [s[0] * f, s[1] * f, s[2] * f]
        };
        let d1x = sc(D1_1D, h1, 1);
        let d1y = sc(D1_1D, h2, 1);
        let d2x = sc(D2_1D, h1, 2);
        let d2y = sc(D2_1D, h2, 2);
        ScaledOps {
            id: tensor(ID_1D, ID_1D, 0),
            d1: tensor(d1x, ID_1D, 0),
            d2: tensor(ID_1D, d1y, 0),
            d11: tensor(d2x, ID_1D, 0),
            d22: tensor(ID_1D, d2y, 0),
            d12: tensor(d1x, d1y, 0),
            d112: tensor(d2x, d1y, 0),
            d122: tensor(d1x, d2y, 0),
            d1122: tensor(d2x, d2y, 0),
        }
    }
}

/// Weight pair at one node: `space` multiplies the solution U, `mass`
/// multiplies U_tau. The mass side is nontrivial in the HOC schemes because
/// f = -d u_tau and its derivatives enter the auxiliary relations.
///
/// Both members hold h-scaled weights (h_power 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualStencil {
    pub space: Stencil3x3,
    pub mass: Stencil3x3,
}

impl DualStencil {
    pub fn zero() -> Self {
        DualStencil {
            space: Stencil3x3::zero(),
            mass: Stencil3x3::zero(),
        }
    }

    /// self += c * (space stencil term).
    pub fn add_space(&mut self, c: f64, s: &Stencil3x3) {
        for di in 0..3 {
            for dj in 0..3 {
                self.space.w[di][dj] += c * s.w[di][dj];
            }
        }
    }

    /// self += c * (mass stencil term).
    pub fn add_mass(&mut self, c: f64, s: &Stencil3x3) {
        for di in 0..3 {
            for dj in 0..3 {
                self.mass.w[di][dj] += c * s.w[di][dj];
            }
        }
    }

    /// self += c * other (both sides).
    pub fn add_scaled(&mut self, c: f64, other: &DualStencil) {
        self.add_space(c, &other.space);
        self.add_mass(c, &other.mass);
    }

    pub fn scale(&mut self, c: f64) {
        for di in 0..3 {
            for dj in 0..3 {
                self.space.w[di][dj] *= c;
                self.mass.w[di][dj] *= c;
            }
        }
    }
}

/// Sum of mass weights applied to U_tau plus space weights applied to U over
/// the 3x3 neighborhood of (i, j).
pub fn apply_dual(
    s: &DualStencil,
    u: &[f64],
    u_tau: &[f64],
    grid: &Grid2D,
    i: usize,
    j: usize,
) -> Result<f64> {
    if i == 0 || i >= grid.n1 || j == 0 || j >= grid.n2 {
        return Err(Error::InvalidInput(format!(
            "apply_dual needs an interior node, got ({i}, {j}) on {} x {}",
            grid.n1, grid.n2
        )));
    }
    Ok(s.mass.apply(u_tau, grid, i, j) + s.space.apply(u, grid, i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    fn grid(n: usize) -> Grid2D {
        build_grid(n, n, ((0.0, 1.0), (0.0, 1.0))).unwrap()
    }

    #[test]
    fn d11_exact_on_quadratic() {
        let g = grid(10);
        let u = g.sample(|x, _| x * x);
        let s = central_stencil(DerivKind::D11).unwrap().scaled(g.h);
        for i in 1..g.n1 {
            for j in 1..g.n2 {
                assert!((s.apply(&u, &g, i, j) - 2.0).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn d12_exact_on_bilinear() {
        let g = grid(10);
        let u = g.sample(|x, y| x * y);
        let s = central_stencil(DerivKind::D12).unwrap().scaled(g.h);
        assert!((s.apply(&u, &g, 5, 5) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exactness_classes() {
        // D1/D2 exact on degree <= 2 per direction, D11/D22 on degree <= 3,
        // mixed compositions on the corresponding tensor monomials.
        let g = grid(8);
        let u3 = g.sample(|x, y| x * x * x + y * y * y);
        let d1 = central_stencil(DerivKind::D1).unwrap().scaled(g.h);
        let d11 = central_stencil(DerivKind::D11).unwrap().scaled(g.h);
        let (i, j) = (4, 3);
        let x = g.x(i);
        // D1 on x^3 is NOT exact (degree 3), D11 is
        assert!((d1.apply(&u3, &g, i, j) - 3.0 * x * x).abs() > 1e-6);
        assert!((d11.apply(&u3, &g, i, j) - 6.0 * x).abs() < 1e-10);

        let u2 = g.sample(|x, y| 1.0 + 2.0 * x + 0.5 * x * x - y + 0.25 * y * y + x * y);
        assert!((d1.apply(&u2, &g, i, j) - (2.0 + x + g.y(j))).abs() < 1e-12);

        let uxy = g.sample(|x, y| x * x * y * y);
        let d1122 = central_stencil(DerivKind::D1122).unwrap().scaled(g.h);
        assert!((d1122.apply(&uxy, &g, i, j) - 4.0).abs() < 1e-9);
    }

    #[test]
    fn d1122_second_order_on_smooth_function() {
        // analytic oracle: d^4/dx^2dy^2 sin(x)sin(y) = sin(x)sin(y)
        let err = |n: usize| {
            let g = grid(n);
            let u = g.sample(|x, y| x.sin() * y.sin());
            let s = central_stencil(DerivKind::D1122).unwrap().scaled(g.h);
            let (i, j) = (n / 2, n / 2);
            (s.apply(&u, &g, i, j) - g.x(i).sin() * g.y(j).sin()).abs()
        };
        let (e1, e2) = (err(10), err(20));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn derivative_stencils_annihilate_constants() {
        use DerivKind::*;
        for kind in [D1, D2, D11, D22, D12, D112, D122, D1122] {
            let s = central_stencil(kind).unwrap();
            assert!(
                s.sum().abs() < 1e-15,
                "{kind:?} does not annihilate constants"
            );
        }
    }

    #[test]
    fn non_compact_requests_are_rejected() {
        use DerivKind::*;
        for kind in [D111, D222, D1111, D2222, D1112, D1222] {
            assert!(matches!(
                central_stencil(kind),
                Err(Error::NonCompactDerivative(_))
            ));
        }
    }

    #[test]
    fn consistency_order_of_each_stencil() {
        // truncation error on a fixed smooth test function decays with
        // observed order >= 1.9 under five h-halvings
        use DerivKind::*;
        type DerivFn = fn(f64, f64) -> f64;
        let f = |x: f64, y: f64| (x + 0.3).sin() * (y + 0.7).cos();
        let exact: &[(DerivKind, DerivFn)] = &[
            (D1, |x, y| (x + 0.3).cos() * (y + 0.7).cos()),
            (D2, |x, y| -(x + 0.3).sin() * (y + 0.7).sin()),
            (D11, |x, y| -(x + 0.3).sin() * (y + 0.7).cos()),
            (D22, |x, y| -(x + 0.3).sin() * (y + 0.7).cos()),
            (D12, |x, y| -(x + 0.3).cos() * (y + 0.7).sin()),
            (D112, |x, y| (x + 0.3).sin() * (y + 0.7).sin()),
            (D122, |x, y| -(x + 0.3).cos() * (y + 0.7).cos()),
            (D1122, |x, y| (x + 0.3).sin() * (y + 0.7).cos()),
        ];
        for (kind, dexact) in exact {
            let mut errs = Vec::new();
            let mut hs = Vec::new();
            for k in 0..=5 {
                let n = 10 << k;
                let g = grid(n);
                let u = g.sample(f);
                let s = central_stencil(*kind).unwrap().scaled(g.h);
                let (i, j) = (n / 2 + 1, n / 2 - 1);
                errs.push((s.apply(&u, &g, i, j) - dexact(g.x(i), g.y(j))).abs());
                hs.push(g.h);
            }
            // least-squares slope in log-log
            let n = errs.len() as f64;
            let (lx, ly): (Vec<f64>, Vec<f64>) = hs
                .iter()
                .map(|h| h.ln())
                .zip(errs.iter().map(|e| e.ln()))
                .unzip();
            let mx = lx.iter().sum::<f64>() / n;
            let my = ly.iter().sum::<f64>() / n;
            let slope = lx
                .iter()
                .zip(&ly)
                .map(|(x, y)| (x - mx) * (y - my))
                .sum::<f64>()
                / lx.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
            assert!(slope >= 1.9, "{kind:?}: observed order {slope}");
        }
    }

    #[test]
    fn apply_dual_identity_and_space() {
        let g = grid(6);
        let u = g.sample(|x, _| x * x);
        let u_tau = vec![5.0; g.n_nodes()];

        let mut dual = DualStencil::zero();
        dual.mass = Stencil3x3::identity();
        assert_eq!(apply_dual(&dual, &u, &u_tau, &g, 3, 3).unwrap(), 5.0);

        let mut dual = DualStencil::zero();
        dual.space = central_stencil(DerivKind::D11).unwrap().scaled(g.h);
        let v = apply_dual(&dual, &u, &vec![0.0; g.n_nodes()], &g, 3, 3).unwrap();
        assert!((v - 2.0).abs() < 1e-11);

        assert!(apply_dual(&dual, &u, &u_tau, &g, 0, 3).is_err());
    }
}
