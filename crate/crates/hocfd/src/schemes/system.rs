//! Global operator assembly: interior rows from the node stencils,
//! y-boundary rows with ghost points eliminated by third-order
//! extrapolation, x-boundary rows pinned as Dirichlet identity rows.

use std::io::Write;

use crate::coeffs::CoefficientField;
use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::stencil::{DualStencil, ScaledOps, Stencil3x3};

use super::version::{assemble_version_with_ops, SchemeVersion};

/// Dirichlet data on the x-boundaries, one value per y row. Constant in
/// time for the pricing problem (payoff values).
#[derive(Debug, Clone)]
pub struct DirichletBc {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// The semi-discrete system  M U_tau + K U = rhs.
///
/// Rows and columns are ordered lexicographically with x fastest.
/// Dirichlet rows have a zero M row, an identity K row, and the boundary
/// value in `rhs`; all other rows have rhs 0.
pub struct OperatorPair {
    pub mass: CsrMatrix,
    pub space: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dirichlet: Vec<bool>,
    /// (nx, ny) node counts when the system lives on a tensor grid; lets
    /// the direct solver pick a bandwidth-reducing ordering. None for
    /// surrogate systems.
    pub grid_shape: Option<(usize, usize)>,
}

impl OperatorPair {
    /// Wraps raw parts (used by surrogate systems in tests and by callers
    /// with their own discretisation).
    pub fn from_parts(
        mass: CsrMatrix,
        space: CsrMatrix,
        rhs: Vec<f64>,
        dirichlet: Vec<bool>,
    ) -> Result<Self> {
        let n = rhs.len();
        if mass.n_rows != n || space.n_rows != n || dirichlet.len() != n {
            return Err(Error::InvalidInput("inconsistent system dimensions".into()));
        }
        Ok(OperatorPair {
            mass,
            space,
            rhs,
            dirichlet,
            grid_shape: None,
        })
    }
}

/// Ghost-point redistribution targets:
/// U_{i,-1} = 3 U_{i,0} - 3 U_{i,1} + U_{i,2} and mirrored at j = n2.
/// Third-order extrapolation, exact on data quadratic in y.
pub fn ghost_targets(j_ghost: i64, n2: usize) -> Result<[(usize, f64); 3]> {
    if j_ghost == -1 {
        Ok([(0, 3.0), (1, -3.0), (2, 1.0)])
    } else if j_ghost == n2 as i64 + 1 {
        Ok([(n2, 3.0), (n2 - 1, -3.0), (n2 - 2, 1.0)])
    } else {
        Err(Error::InvalidInput(format!(
            "column j = {j_ghost} is not a ghost column for n2 = {n2}"
        )))
    }
}

/// One raw row entry before ghost elimination: node (i, j) may have
/// j = -1 or j = n2 + 1, with a mass and a space weight.
pub type RawEntry = (i64, i64, f64, f64);

/// Resolved row entry: in-range node plus mass/space weights.
pub type RowEntry = (usize, usize, f64, f64);

/// Eliminates ghost columns from a stencil row at j = 0 or j = n2 by
/// redistributing each ghost weight onto the three nearest interior
/// columns, identically for mass and space weights. Duplicate targets are
/// combined.
pub fn eliminate_ghosts(entries: &[RawEntry], n1: usize, n2: usize) -> Result<Vec<RowEntry>> {
    let mut out: Vec<RowEntry> = Vec::with_capacity(entries.len() + 3);
    let mut push = |i: usize, j: usize, m: f64, s: f64| {
        if let Some(e) = out.iter_mut().find(|e| e.0 == i && e.1 == j) {
            e.2 += m;
            e.3 += s;
        } else {
            out.push((i, j, m, s));
        }
    };
    for &(i, j, m, s) in entries {
        if i < 0 || i > n1 as i64 {
            return Err(Error::InvalidInput(format!(
                "row references x-ghost column i = {i}; x-boundaries are Dirichlet"
            )));
        }
        let i = i as usize;
        if j >= 0 && j <= n2 as i64 {
            push(i, j as usize, m, s);
        } else {
            for (jt, factor) in ghost_targets(j, n2)? {
                if m != 0.0 || s != 0.0 {
                    push(i, jt, factor * m, factor * s);
                }
            }
        }
    }
    Ok(out)
}

fn dual_to_raw_entries(dual: &DualStencil, i: usize, j: usize) -> Vec<RawEntry> {
    let mut entries = Vec::with_capacity(9);
    for dj in 0..3usize {
        for di in 0..3usize {
            let m = dual.mass.w[di][dj];
            let s = dual.space.w[di][dj];
            if m != 0.0 || s != 0.0 {
                entries.push((i as i64 + di as i64 - 1, j as i64 + dj as i64 - 1, m, s));
            }
        }
    }
    entries
}

/// Assembles the global mass/space operator pair for a scheme version.
///
/// Interior rows come from `assemble_version`; rows at j = 0 and j = n2 use
/// the interior discretisation with ghost points eliminated; rows at i = 0
/// and i = n1 are Dirichlet-pinned. Assembly is deterministic: two
/// assemblies of the same inputs are bit-identical.
pub fn assemble_system(
    v: SchemeVersion,
    cf: &CoefficientField,
    bc: &DirichletBc,
) -> Result<OperatorPair> {
    let grid = cf.grid;
    let (n1, n2) = (grid.n1, grid.n2);
    if n1 < 5 || n2 < 5 {
        return Err(Error::InvalidInput(format!(
            "assembly needs at least 4 interior nodes per direction, got {} x {}",
            n1 - 1,
            n2 - 1
        )));
    }
    if bc.left.len() != grid.ny() || bc.right.len() != grid.ny() {
        return Err(Error::InvalidInput(
            "Dirichlet data length must equal the number of y rows".into(),
        ));
    }

    let ops = ScaledOps::new(grid.h, grid.h);
    let n = grid.n_nodes();
    let mut mass_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut space_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut rhs = vec![0.0; n];
    let mut dirichlet = vec![false; n];

    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let row = grid.index(i, j);
            if i == 0 || i == n1 {
                mass_rows.push(Vec::new());
                space_rows.push(vec![(row, 1.0)]);
                rhs[row] = if i == 0 { bc.left[j] } else { bc.right[j] };
                dirichlet[row] = true;
                continue;
            }
            let dual = assemble_version_with_ops(v, cf, &ops, i, j).map_err(|e| e.at_node(i, j))?;
            let raw = dual_to_raw_entries(&dual, i, j);
            let resolved = eliminate_ghosts(&raw, n1, n2).map_err(|e| e.at_node(i, j))?;
            debug_assert!(resolved.len() <= 12);

            let mut m_row: Vec<(usize, f64)> = Vec::with_capacity(resolved.len());
            let mut k_row: Vec<(usize, f64)> = Vec::with_capacity(resolved.len());
            for (ei, ej, m, s) in resolved {
                let col = grid.index(ei, ej);
                if m != 0.0 {
                    m_row.push((col, m));
                }
                if s != 0.0 {
                    k_row.push((col, s));
                }
            }
            m_row.sort_by_key(|e| e.0);
            k_row.sort_by_key(|e| e.0);
            mass_rows.push(m_row);
            space_rows.push(k_row);
        }
    }

    Ok(OperatorPair {
        mass: CsrMatrix::from_rows(n, &mass_rows),
        space: CsrMatrix::from_rows(n, &space_rows),
        rhs,
        dirichlet,
        grid_shape: Some((grid.nx(), grid.ny())),
    })
}

impl OperatorPair {
    pub fn n(&self) -> usize {
        self.rhs.len()
    }

    /// Largest nonzero count over interior (non-Dirichlet) rows, for the
    /// compactness checks.
    pub fn max_row_nnz(&self) -> usize {
        (0..self.n())
            .filter(|&r| !self.dirichlet[r])
            .map(|r| self.space.row(r).0.len().max(self.mass.row(r).0.len()))
            .max()
            .unwrap_or(0)
    }
}

/// Writes the node stencils in the debug dump format: one row per node with
/// the node index, the 9 mass weights and the 9 space weights, full
/// precision. Weights are listed with the x offset fastest, i.e. in the
/// order (-1,-1), (0,-1), (+1,-1), (-1,0), ..., (+1,+1). Dirichlet nodes
/// carry the identity space row. Ghost elimination is a row operation on
/// the global system and is not applied here; boundary-row stencils are
/// dumped as assembled at the node.
pub fn dump_stencils(
    v: SchemeVersion,
    cf: &CoefficientField,
    out: &mut impl Write,
) -> std::io::Result<()> {
    let grid = cf.grid;
    let ops = ScaledOps::new(grid.h, grid.h);
    writeln!(
        out,
        "# scheme {} stencil dump: node_index 9*mass 9*space (x offset fastest)",
        v.name()
    )?;
    writeln!(
        out,
        "# grid {} x {} intervals, h = {}",
        grid.n1, grid.n2, grid.h
    )?;
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let dual = if i == 0 || i == grid.n1 {
                DualStencil {
                    space: Stencil3x3::identity(),
                    mass: Stencil3x3::zero(),
                }
            } else {
                match assemble_version_with_ops(v, cf, &ops, i, j) {
                    Ok(d) => d,
                    Err(e) => return Err(std::io::Error::other(format!("node ({i}, {j}): {e}"))),
                }
            };
            write!(out, "{}", grid.index(i, j))?;
            for dj in 0..3 {
                for di in 0..3 {
                    write!(out, " {}", dual.mass.w[di][dj])?;
                }
            }
            for dj in 0..3 {
                for di in 0..3 {
                    write!(out, " {}", dual.space.w[di][dj])?;
                }
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
