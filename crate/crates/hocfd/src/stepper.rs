//! Time integration of the semi-discrete system M U_tau + K U = rhs:
//! implicit BDF4 on an equidistant grid with step k, started by
//! Crank-Nicolson substeps of size k' that subdivide each of the first
//! three BDF4 intervals. With k in O(h) and k' in O(h^2) the combined
//! discretisation is fourth order in h.

use std::io::Write;

use crate::csr::CsrMatrix;
use crate::error::{Error, Result};
use crate::linalg::{prepare_solver, LinearSolveContract, PreparedSolver};
use crate::schemes::OperatorPair;

/// Time discretisation derived from the spatial step and the configured
/// ratios k/h and k'/h^2.
///
/// k is adjusted to the nearest value making T/k an integer; k' subdivides
/// each BDF4 interval an integer number of times, so the Crank-Nicolson
/// phase tiles [0, 3k] exactly and lands on the BDF4 levels k, 2k, 3k.
#[derive(Debug, Clone, Copy)]
pub struct TimeGrid {
    /// BDF4 step.
    pub k: f64,
    /// CN substep (k / cn_per_bdf).
    pub k_prime: f64,
    /// Horizon T.
    pub t_end: f64,
    /// Number of BDF4 levels: T = n_bdf * k.
    pub n_bdf: usize,
    /// CN substeps per BDF4 interval.
    pub cn_per_bdf: usize,
    /// Realized ratio k / h.
    pub ratio_bdf: f64,
    /// Realized ratio k' / h^2.
    pub ratio_cn: f64,
}

impl TimeGrid {
    pub fn from_ratios(h: f64, t_end: f64, ratio_bdf: f64, ratio_cn: f64) -> Result<TimeGrid> {
        if !(h > 0.0) || !h.is_finite() || !t_end.is_finite() || t_end < 0.0 {
            return Err(Error::InvalidInput(format!(
                "bad time grid inputs: h = {h}, T = {t_end}"
            )));
        }
        if !(ratio_bdf > 0.0) || !(ratio_cn > 0.0) {
            return Err(Error::InvalidInput(
                "time step ratios must be positive".into(),
            ));
        }
        if t_end == 0.0 {
            return Ok(TimeGrid {
                k: 0.0,
                k_prime: 0.0,
                t_end,
                n_bdf: 0,
                cn_per_bdf: 0,
                ratio_bdf: 0.0,
                ratio_cn: 0.0,
            });
        }
        let k_nominal = ratio_bdf * h;
        let n_bdf = (t_end / k_nominal).round().max(1.0) as usize;
        if n_bdf < 4 {
            return Err(Error::InvalidInput(format!(
                "horizon too short for BDF4: T/k rounds to {n_bdf} < 4 levels"
            )));
        }
        let k = t_end / n_bdf as f64;
        let kp_nominal = ratio_cn * h * h;
        let cn_per_bdf = (k / kp_nominal).round().max(1.0) as usize;
        let k_prime = k / cn_per_bdf as f64;
        Ok(TimeGrid {
            k,
            k_prime,
            t_end,
            n_bdf,
            cn_per_bdf,
            ratio_bdf: k / h,
            ratio_cn: k_prime / (h * h),
        })
    }

    /// Total CN substeps covering [0, 3k].
    pub fn n_cn(&self) -> usize {
        3 * self.cn_per_bdf
    }
}

/// A prepared one-kind stepping system with reusable factorization.
struct StepSystem {
    lhs: CsrMatrix,
    solver: PreparedSolver,
}

impl StepSystem {
    /// lhs = alpha M + beta K with Dirichlet rows replaced by identity.
    fn prepare(
        ops: &OperatorPair,
        alpha: f64,
        beta: f64,
        contract: &LinearSolveContract,
    ) -> Result<StepSystem> {
        let mut lhs = ops.mass.add_scaled(alpha, &ops.space, beta);
        lhs.set_identity_rows(&ops.dirichlet);
        let solver = prepare_solver(&lhs, ops.grid_shape, contract)?;
        Ok(StepSystem { lhs, solver })
    }

    fn pin_rhs(rhs: &mut [f64], ops: &OperatorPair, bc: &[f64]) {
        for (r, &is_dir) in ops.dirichlet.iter().enumerate() {
            if is_dir {
                rhs[r] = bc[r];
            }
        }
    }

    fn solve_pinned(&self, mut rhs: Vec<f64>, ops: &OperatorPair, bc: &[f64]) -> Result<Vec<f64>> {
        Self::pin_rhs(&mut rhs, ops, bc);
        let mut x = self.solver.solve(&rhs)?;
        for (r, &is_dir) in ops.dirichlet.iter().enumerate() {
            if is_dir {
                x[r] = bc[r];
            }
        }
        Ok(x)
    }

    fn residual_norm(&self, x: &[f64], rhs: &[f64]) -> f64 {
        let ax = self.lhs.matvec(x);
        ax.iter()
            .zip(rhs)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub(crate) struct CnStepper<'o> {
    ops: &'o OperatorPair,
    sys: StepSystem,
    rhs_mat: CsrMatrix,
}

impl<'o> CnStepper<'o> {
    pub(crate) fn new(
        ops: &'o OperatorPair,
        k_prime: f64,
        contract: &LinearSolveContract,
    ) -> Result<Self> {
        let sys = StepSystem::prepare(ops, 1.0, 0.5 * k_prime, contract)?;
        let rhs_mat = ops.mass.add_scaled(1.0, &ops.space, -0.5 * k_prime);
        Ok(CnStepper { ops, sys, rhs_mat })
    }

    pub(crate) fn step(&self, u: &[f64], bc: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.rhs_mat.matvec(u);
        self.sys.solve_pinned(rhs, self.ops, bc)
    }
}

struct Bdf4Stepper<'o> {
    ops: &'o OperatorPair,
    sys: StepSystem,
}

impl<'o> Bdf4Stepper<'o> {
    fn new(ops: &'o OperatorPair, k: f64, contract: &LinearSolveContract) -> Result<Self> {
        let sys = StepSystem::prepare(ops, 25.0 / 12.0, k, contract)?;
        Ok(Bdf4Stepper { ops, sys })
    }

    /// M (4 U_n - 3 U_{n-1} + 4/3 U_{n-2} - 1/4 U_{n-3}) from history
    /// ordered oldest first.
    fn rhs(&self, history: &[Vec<f64>]) -> Vec<f64> {
        let n = history[0].len();
        let mut combo = vec![0.0f64; n];
        for i in 0..n {
            combo[i] = 4.0 * history[3][i] - 3.0 * history[2][i] + (4.0 / 3.0) * history[1][i]
                - 0.25 * history[0][i];
        }
        self.ops.mass.matvec(&combo)
    }

    /// history ordered oldest first: [U_{n-3}, U_{n-2}, U_{n-1}, U_n].
    fn step(&self, history: &[Vec<f64>], bc: &[f64]) -> Result<Vec<f64>> {
        self.sys.solve_pinned(self.rhs(history), self.ops, bc)
    }
}

/// One Crank-Nicolson step: solves
/// (M + k'/2 K) U_new = (M - k'/2 K) U + boundary pinning.
pub fn cn_step(
    ops: &OperatorPair,
    u: &[f64],
    k_prime: f64,
    bc: &[f64],
    contract: &LinearSolveContract,
) -> Result<Vec<f64>> {
    CnStepper::new(ops, k_prime, contract)?.step(u, bc)
}

/// One BDF4 step from four history levels at uniform spacing k
/// (ordered oldest first): solves
/// (25/12 M + k K) U_{n+1} = M (4 U_n - 3 U_{n-1} + 4/3 U_{n-2} - 1/4 U_{n-3}).
pub fn bdf4_step(
    ops: &OperatorPair,
    history: &[Vec<f64>],
    k: f64,
    bc: &[f64],
    contract: &LinearSolveContract,
) -> Result<Vec<f64>> {
    if history.len() != 4 {
        return Err(Error::InvalidInput(format!(
            "BDF4 needs exactly 4 history levels, got {}",
            history.len()
        )));
    }
    Bdf4Stepper::new(ops, k, contract)?.step(history, bc)
}

/// Integration controls: divergence guard and optional per-step trace.
#[derive(Default)]
pub struct IntegrateOptions<'a> {
    /// Abort with `Error::Diverged` when the state max-norm exceeds this.
    pub max_norm_guard: Option<f64>,
    /// Per-step trace: step index, time, linear-solve residual norm.
    pub trace: Option<&'a mut dyn Write>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_state(u: &[f64], step: usize, time: f64, guard: Option<f64>) -> Result<()> {
    let norm = max_abs(u);
    if !norm.is_finite() || guard.is_some_and(|g| norm > g) {
        return Err(Error::Diverged { step, time, norm });
    }
    Ok(())
}

/// Integrates from U0 at tau = 0 to tau = T.
///
/// The first three BDF4 intervals are covered by CN substeps of size k',
/// recording the levels at k, 2k, 3k as BDF4 history; BDF4 then runs to T
/// with the factorization reused across all steps (the coefficients are
/// time-independent).
pub fn integrate(
    ops: &OperatorPair,
    u0: &[f64],
    tg: &TimeGrid,
    bc: &[f64],
    contract: &LinearSolveContract,
    opts: &mut IntegrateOptions,
) -> Result<Vec<f64>> {
    if u0.len() != ops.n() || bc.len() != ops.n() {
        return Err(Error::InvalidInput("state/operator size mismatch".into()));
    }
    if tg.t_end == 0.0 {
        return Ok(u0.to_vec());
    }
    if tg.n_bdf < 4 {
        return Err(Error::InvalidInput(
            "time grid has fewer than 4 BDF4 levels".into(),
        ));
    }

    let mut history: Vec<Vec<f64>> = Vec::with_capacity(4);
    history.push(u0.to_vec());

    // CN startup over [0, 3k]; the stepper (and its factorization) is
    // dropped before the BDF4 factorization is built
    {
        let cn = CnStepper::new(ops, tg.k_prime, contract)?;
        let mut u = u0.to_vec();
        let mut step_idx = 0usize;
        for level in 1..=3usize {
            for sub in 0..tg.cn_per_bdf {
                let mut rhs = cn.rhs_mat.matvec(&u);
                StepSystem::pin_rhs(&mut rhs, ops, bc);
                u = cn
                    .sys
                    .solve_pinned(rhs.clone(), ops, bc)
                    .map_err(|e| annotate_step(e, step_idx))?;
                step_idx += 1;
                let t = (level - 1) as f64 * tg.k + (sub + 1) as f64 * tg.k_prime;
                check_state(&u, step_idx, t, opts.max_norm_guard)?;
                if let Some(w) = opts.trace.as_deref_mut() {
                    let res = cn.sys.residual_norm(&u, &rhs);
                    writeln!(w, "cn {step_idx} {t:.12e} {res:.3e}")
                        .map_err(|e| Error::SolveFailure(format!("trace write: {e}")))?;
                }
            }
            history.push(u.clone());
        }
    }

    // BDF4 to T
    let bdf = Bdf4Stepper::new(ops, tg.k, contract)?;
    for level in 4..=tg.n_bdf {
        let mut rhs = bdf.rhs(&history);
        StepSystem::pin_rhs(&mut rhs, ops, bc);
        let u_new = bdf
            .sys
            .solve_pinned(rhs.clone(), ops, bc)
            .map_err(|e| annotate_step(e, level))?;
        let t = level as f64 * tg.k;
        check_state(&u_new, level, t, opts.max_norm_guard)?;
        if let Some(w) = opts.trace.as_deref_mut() {
            let res = bdf.sys.residual_norm(&u_new, &rhs);
            writeln!(w, "bdf4 {level} {t:.12e} {res:.3e}")
                .map_err(|e| Error::SolveFailure(format!("trace write: {e}")))?;
        }
        history.rotate_left(1);
        history[3] = u_new;
    }
    Ok(history.pop().unwrap())
}

fn annotate_step(e: Error, step: usize) -> Error {
    match e {
        Error::Diverged { .. } | Error::AtNode { .. } => e,
        other => Error::SolveFailure(format!("step {step}: {other}")),
    }
}
