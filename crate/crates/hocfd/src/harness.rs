//! Convergence-study harness: runs pricing jobs over nested grid levels,
//! compares against a fine-grid reference solution, fits convergence
//! orders, and emits machine-readable reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::linalg::LinearSolveContract;
use crate::model::{build_problem, SVParams, TransformedProblem};
use crate::schemes::{assemble_system, remainder_coefficient_max, SchemeVersion};
use crate::stepper::{integrate, IntegrateOptions, TimeGrid};

/// Divergence threshold: the transformed solution satisfies |u| <= 1
/// initially, so a max-norm above this is unambiguous blow-up.
pub const DIVERGENCE_MAX_NORM: f64 = 1e3;

/// A convergence-study specification.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub problem: SVParams,
    pub zeta: f64,
    pub schemes: Vec<SchemeVersion>,
    /// Grid levels as intervals per unit length; h = 1/n.
    pub levels: Vec<usize>,
    /// Reference level; must be strictly finer than and divisible by every
    /// study level.
    pub ref_level: usize,
    /// k / h for BDF4.
    pub bdf4_ratio: f64,
    /// k' / h^2 for the CN startup.
    pub cn_ratio: f64,
    /// When false, walltime is reported as zero, which makes repeated runs
    /// byte-identical.
    pub measure_walltime: bool,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() || self.levels.is_empty() {
            return Err(Error::Config("empty scheme or level list".into()));
        }
        let coarsest = *self.levels.iter().min().unwrap();
        for &n in &self.levels {
            if n < 5 {
                return Err(Error::Config(format!("level n = {n} too coarse")));
            }
            if n % coarsest != 0 {
                return Err(Error::Config(format!(
                    "levels must be nested refinements of the coarsest: {n} vs {coarsest}"
                )));
            }
            if self.ref_level <= n || !self.ref_level.is_multiple_of(n) {
                return Err(Error::Config(format!(
                    "reference level {} must be strictly finer than and divisible by level {n}",
                    self.ref_level
                )));
            }
        }
        if !(self.bdf4_ratio > 0.0 && self.cn_ratio > 0.0) {
            return Err(Error::Config("time ratios must be positive".into()));
        }
        Ok(())
    }
}

/// Per-level outcome.
#[derive(Debug, Clone)]
pub struct LevelResult {
    pub n: usize,
    pub h: f64,
    pub l2_error: Option<f64>,
    pub walltime_s: f64,
    pub flags: Vec<String>,
    /// Max remainder coefficient over the grid (EHOC diagnostic; None for
    /// the standard scheme).
    pub remainder_max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SchemeReport {
    pub scheme: SchemeVersion,
    pub levels: Vec<LevelResult>,
    pub fitted_order: Option<f64>,
}

/// Study output: per-scheme errors and fitted orders plus run metadata.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub schemes: Vec<SchemeReport>,
    pub ref_level: usize,
    pub ref_scheme: SchemeVersion,
    /// Convention note recorded with every report.
    pub error_norm_note: String,
    /// Max over the reference grid of b12^2 - 4 a1 a2 (monitored bound).
    pub cross_term_excess: f64,
    pub config_echo: String,
}

/// Absolute l2 error of a coarse-level solution against the restriction of
/// a reference solution on a nested finer grid:
/// sqrt( h^2 * sum over interior coarse nodes of (U - U_ref)^2 ).
///
/// Only interior nodes enter: boundary rows are pinned data shared by all
/// schemes.
pub fn l2_error(u: &[f64], grid: &Grid2D, u_ref: &[f64], grid_ref: &Grid2D) -> Result<f64> {
    if u.len() != grid.n_nodes() || u_ref.len() != grid_ref.n_nodes() {
        return Err(Error::InvalidInput("grid function size mismatch".into()));
    }
    if !grid_ref.n1.is_multiple_of(grid.n1) || !grid_ref.n2.is_multiple_of(grid.n2) {
        return Err(Error::InvalidInput(format!(
            "grids are not nested: {}x{} vs {}x{}",
            grid.n1, grid.n2, grid_ref.n1, grid_ref.n2
        )));
    }
    let rx = grid_ref.n1 / grid.n1;
    let ry = grid_ref.n2 / grid.n2;
    let mut sum = 0.0f64;
    for j in 1..grid.n2 {
        for i in 1..grid.n1 {
            let diff = u[grid.index(i, j)] - u_ref[grid_ref.index(i * rx, j * ry)];
            sum += diff * diff;
        }
    }
    Ok((grid.h * grid.h * sum).sqrt())
}

/// Least-squares slope of log(error) against log(h).
pub fn fit_order(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "order fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    let mut lx = Vec::with_capacity(points.len());
    let mut ly = Vec::with_capacity(points.len());
    for &(h, e) in points {
        if !(e > 0.0) || !(h > 0.0) {
            return Err(Error::InvalidInput(format!(
                "order fit needs positive (h, error), got ({h}, {e})"
            )));
        }
        lx.push(h.ln());
        ly.push(e.ln());
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all h values are identical".into()));
    }
    Ok(sxy / sxx)
}

/// Soft monotonicity check: for a converging scheme the error at a finer
/// level should be smaller; violations are flagged, not fatal.
fn flag_nonmonotone(levels: &mut [LevelResult]) {
    for w in 0..levels.len().saturating_sub(1) {
        if let (Some(e0), Some(e1)) = (levels[w].l2_error, levels[w + 1].l2_error) {
            if levels[w + 1].n > levels[w].n && e1 >= e0 {
                levels[w + 1].flags.push("nonmonotone".to_string());
            }
        }
    }
}

fn solve_level(
    problem: &TransformedProblem,
    scheme: SchemeVersion,
    bdf4_ratio: f64,
    cn_ratio: f64,
) -> Result<Vec<f64>> {
    let ops = assemble_system(scheme, &problem.coeffs, &problem.bc)?;
    let tg = TimeGrid::from_ratios(
        problem.grid.h,
        problem.params.maturity,
        bdf4_ratio,
        cn_ratio,
    )?;
    let contract = LinearSolveContract::default();
    integrate(
        &ops,
        &problem.u0,
        &tg,
        &ops.rhs,
        &contract,
        &mut IntegrateOptions {
            max_norm_guard: Some(DIVERGENCE_MAX_NORM),
            trace: None,
        },
    )
}

/// Runs a full study: the reference solution once (Version 3, which is the
/// plain HOC scheme when b12 = 0), then every scheme on every level.
/// Per-level failures are recorded and skipped; a reference failure aborts.
pub fn run_convergence(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let ref_scheme = SchemeVersion::V3;

    let ref_problem = build_problem(&cfg.problem, cfg.zeta, cfg.ref_level)?;
    let cross_term_excess = ref_problem.coeffs.cross_term_excess();
    let u_ref = solve_level(&ref_problem, ref_scheme, cfg.bdf4_ratio, cfg.cn_ratio)?;

    // problems per level, built once and shared across schemes
    let mut problems: Vec<(usize, TransformedProblem)> = Vec::new();
    for &n in &cfg.levels {
        if !problems.iter().any(|(m, _)| *m == n) {
            problems.push((n, build_problem(&cfg.problem, cfg.zeta, n)?));
        }
    }
    let problem_at = |n: usize| &problems.iter().find(|(m, _)| *m == n).unwrap().1;

    let mut schemes = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let mut levels = Vec::with_capacity(cfg.levels.len());
        for &n in &cfg.levels {
            let problem = problem_at(n);
            let started = Instant::now();
            let mut flags = Vec::new();
            let outcome = solve_level(problem, scheme, cfg.bdf4_ratio, cfg.cn_ratio);
            let l2 = match outcome {
                Ok(u) => {
                    let e = l2_error(&u, &problem.grid, &u_ref, &ref_problem.grid)?;
                    if e.is_finite() && e > 0.0 {
                        Some(e)
                    } else {
                        flags.push("nonpositive-error".to_string());
                        None
                    }
                }
                Err(Error::Diverged { .. }) => {
                    flags.push("diverged".to_string());
                    None
                }
                Err(e) => {
                    flags.push(format!("failed:{}", e.category()));
                    None
                }
            };
            let walltime_s = if cfg.measure_walltime {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            };
            let remainder_max = if scheme.is_hoc() {
                Some(remainder_coefficient_max(scheme, &problem.coeffs)?)
            } else {
                None
            };
            levels.push(LevelResult {
                n,
                h: 1.0 / n as f64,
                l2_error: l2,
                walltime_s,
                flags,
                remainder_max,
            });
        }

        flag_nonmonotone(&mut levels);

        let pts: Vec<(f64, f64)> = levels
            .iter()
            .filter_map(|l| l.l2_error.map(|e| (l.h, e)))
            .collect();
        let fitted_order = if pts.len() >= 2 {
            Some(fit_order(&pts)?)
        } else {
            for l in &mut levels {
                l.flags.push("insufficient-points".to_string());
            }
            None
        };
        schemes.push(SchemeReport {
            scheme,
            levels,
            fitted_order,
        });
    }

    Ok(ConvergenceReport {
        schemes,
        ref_level: cfg.ref_level,
        ref_scheme,
        error_norm_note: "l2_error = sqrt(h^2 * sum_{interior coarse nodes} (U - U_ref|coarse)^2)"
            .to_string(),
        cross_term_excess,
        config_echo: config_echo(cfg),
    })
}

fn config_echo(cfg: &StudyConfig) -> String {
    let p = &cfg.problem;
    format!(
        "alpha = {}\nkappa = {}\ntheta = {}\nsigma = {}\nrho = {}\nr = {}\nstrike = {}\n\
         maturity = {}\ns_min = {}\ns_max = {}\nv_min = {}\nv_max = {}\nzeta = {}\n\
         bdf4_ratio = {}\ncn_ratio = {}\nlevels = {:?}\nref_level = {}\nschemes = {:?}\n\
         measure_walltime = {}",
        p.alpha,
        p.kappa,
        p.theta,
        p.sigma,
        p.rho,
        p.r,
        p.strike,
        p.maturity,
        p.s_min,
        p.s_max,
        p.v_min,
        p.v_max,
        cfg.zeta,
        cfg.bdf4_ratio,
        cfg.cn_ratio,
        cfg.levels,
        cfg.ref_level,
        cfg.schemes.iter().map(|s| s.name()).collect::<Vec<_>>(),
        cfg.measure_walltime
    )
}

fn fmt(v: f64) -> String {
    // 12 significant digits, deterministic
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_else(|| "nan".to_string())
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Emitted study artifacts.
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub plot_data: Vec<PathBuf>,
    pub metadata: PathBuf,
}

/// Writes the CSV table, one log-log-ready data file per scheme, and the
/// run-metadata file. Writes are atomic (temp file, then rename) and
/// deterministic: re-emitting the same report reproduces identical bytes.
pub fn emit_report(report: &ConvergenceReport, dir: &Path) -> Result<EmittedFiles> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut csv = String::from("scheme,h,l2_error,order_fit,walltime_s,flags\n");
    for sr in &report.schemes {
        for level in &sr.levels {
            let flags = if level.flags.is_empty() {
                "ok".to_string()
            } else {
                level.flags.join(";")
            };
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                sr.scheme.name(),
                fmt(level.h),
                fmt_opt(level.l2_error),
                fmt_opt(sr.fitted_order),
                fmt(level.walltime_s),
                flags
            ));
        }
    }
    let csv_path = dir.join("report.csv");
    write_atomic(&csv_path, csv.as_bytes())?;

    let mut plot_paths = Vec::new();
    for sr in &report.schemes {
        let mut data = format!(
            "# {} vs reference (v{} at n = {})\n# {}\n# h l2_error\n",
            sr.scheme.name(),
            report.ref_scheme.name().trim_start_matches('v'),
            report.ref_level,
            report.error_norm_note
        );
        for level in &sr.levels {
            if let Some(e) = level.l2_error {
                data.push_str(&format!("{} {}\n", fmt(level.h), fmt(e)));
            }
        }
        let path = dir.join(format!("{}.dat", sr.scheme.name()));
        write_atomic(&path, data.as_bytes())?;
        plot_paths.push(path);
    }

    let mut meta = String::new();
    meta.push_str(&format!(
        "code_version = \"{}\"\n",
        env!("CARGO_PKG_VERSION")
    ));
    meta.push_str(&format!("error_norm = \"{}\"\n", report.error_norm_note));
    meta.push_str(&format!(
        "reference_scheme = \"{}\"\n",
        report.ref_scheme.name()
    ));
    meta.push_str(&format!("reference_level = {}\n", report.ref_level));
    meta.push_str(&format!(
        "cross_term_excess_max = {}\n",
        fmt(report.cross_term_excess)
    ));
    meta.push_str("\n[config]\n");
    for line in report.config_echo.lines() {
        if let Some((key, value)) = line.split_once(" = ") {
            if value.starts_with('[') {
                meta.push_str(&format!("{key} = {}\n", value.replace('"', "")));
            } else if value.parse::<f64>().is_ok() || value == "true" || value == "false" {
                meta.push_str(&format!("{key} = {value}\n"));
            } else {
                meta.push_str(&format!("{key} = \"{value}\"\n"));
            }
        }
    }
    meta.push_str("\n[remainder_coefficient_max]\n");
    for sr in &report.schemes {
        if sr.scheme.is_hoc() {
            let per_level: Vec<String> =
                sr.levels.iter().map(|l| fmt_opt(l.remainder_max)).collect();
            meta.push_str(&format!(
                "{} = [{}]\n",
                sr.scheme.name(),
                per_level.join(", ")
            ));
        }
    }
    let meta_path = dir.join("metadata.toml");
    write_atomic(&meta_path, meta.as_bytes())?;

    Ok(EmittedFiles {
        csv: csv_path,
        plot_data: plot_paths,
        metadata: meta_path,
    })
}

/// Prints a human-readable study summary.
pub fn print_report(
    report: &ConvergenceReport,
    out: &mut impl std::io::Write,
) -> std::io::Result<()> {
    writeln!(
        out,
        "reference: {} at n = {}",
        report.ref_scheme.name(),
        report.ref_level
    )?;
    writeln!(out, "{}", report.error_norm_note)?;
    for sr in &report.schemes {
        let order = sr
            .fitted_order
            .map(|o| format!("{o:.3}"))
            .unwrap_or_else(|| "n/a".to_string());
        writeln!(out, "scheme {:<9} fitted order {order}", sr.scheme.name())?;
        for level in &sr.levels {
            let err = level
                .l2_error
                .map(|e| format!("{e:.6e}"))
                .unwrap_or_else(|| "-".to_string());
            let flags = if level.flags.is_empty() {
                String::new()
            } else {
                format!("  [{}]", level.flags.join(";"))
            };
            writeln!(out, "  h = 1/{:<4} l2 = {err}{flags}", level.n)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn l2_error_basics() {
        let coarse = build_grid(10, 10, ((0.0, 1.0), (0.0, 1.0))).unwrap();
        let fine = build_grid(20, 20, ((0.0, 1.0), (0.0, 1.0))).unwrap();
        let u_ref = fine.sample(|x, y| x + y);
        let u = coarse.sample(|x, y| x + y);
        assert_eq!(
            l2_error(&u, &coarse, &u_ref, &fine).unwrap(),
            0.0,
            "restriction of the reference must give zero error"
        );

        // constant offset c: sqrt(h^2 (n-1)^2 c^2) = h (n-1) |c|
        let c = 0.25;
        let u_off = coarse.sample(|x, y| x + y + c);
        let e = l2_error(&u_off, &coarse, &u_ref, &fine).unwrap();
        assert!((e - coarse.h * 9.0 * c).abs() < 1e-12);

        // homogeneity: doubling errors doubles l2
        let u_off2 = coarse.sample(|x, y| x + y + 2.0 * c);
        let e2 = l2_error(&u_off2, &coarse, &u_ref, &fine).unwrap();
        assert!((e2 - 2.0 * e).abs() < 1e-12);

        // non-nested levels are rejected
        let odd = build_grid(15, 15, ((0.0, 1.0), (0.0, 1.0))).unwrap();
        let u_odd = odd.sample(|x, y| x + y);
        assert!(l2_error(&u_odd, &odd, &u_ref, &fine).is_err());
    }

    #[test]
    fn fit_order_exact_cases() {
        let pts = [(0.1, 1e-2), (0.05, 2.5e-3), (0.025, 6.25e-4)];
        assert!((fit_order(&pts).unwrap() - 2.0).abs() < 1e-12);

        let flat = [(0.1, std::f64::consts::E), (0.05, std::f64::consts::E)];
        assert!(fit_order(&flat).unwrap().abs() < 1e-12);

        let fourth = [(0.1, 16.0 * 3e-4), (0.05, 3e-4)];
        assert!((fit_order(&fourth).unwrap() - 4.0).abs() < 1e-12);

        assert!(fit_order(&[(0.1, 1e-2)]).is_err());
        assert!(fit_order(&[(0.1, 0.0), (0.05, 1e-3)]).is_err());
    }

    #[test]
    fn study_config_validation() {
        let mut cfg = StudyConfig {
            problem: crate::model::benchmark_params(0.5, 0.0),
            zeta: 7.5,
            schemes: vec![SchemeVersion::Standard],
            levels: vec![10, 20],
            ref_level: 40,
            bdf4_ratio: 0.1,
            cn_ratio: 0.4,
            measure_walltime: false,
        };
        cfg.validate().unwrap();
        cfg.ref_level = 20; // not strictly finer than every level
        assert!(cfg.validate().is_err());
        cfg.ref_level = 50; // not divisible by 20
        assert!(cfg.validate().is_err());
        cfg.ref_level = 40;
        cfg.levels = vec![10, 15];
        assert!(cfg.validate().is_err()); // not nested
    }

    #[test]
    fn nonmonotone_levels_are_flagged() {
        let level = |n: usize, e: Option<f64>| LevelResult {
            n,
            h: 1.0 / n as f64,
            l2_error: e,
            walltime_s: 0.0,
            flags: vec![],
            remainder_max: None,
        };
        let mut levels = vec![
            level(10, Some(1e-2)),
            level(20, Some(2e-2)), // grew: flagged
            level(40, None),       // skipped levels do not participate
            level(80, Some(1e-3)),
        ];
        flag_nonmonotone(&mut levels);
        assert!(levels[0].flags.is_empty());
        assert_eq!(levels[1].flags, vec!["nonmonotone".to_string()]);
        assert!(levels[2].flags.is_empty());
        assert!(levels[3].flags.is_empty());
    }

    #[test]
    fn emit_report_shapes_and_determinism() {
        let report = ConvergenceReport {
            schemes: vec![
                SchemeReport {
                    scheme: SchemeVersion::Standard,
                    levels: vec![
                        LevelResult {
                            n: 10,
                            h: 0.1,
                            l2_error: Some(1e-2),
                            walltime_s: 0.0,
                            flags: vec![],
                            remainder_max: None,
                        },
                        LevelResult {
                            n: 20,
                            h: 0.05,
                            l2_error: Some(2.5e-3),
                            walltime_s: 0.0,
                            flags: vec![],
                            remainder_max: None,
                        },
                        LevelResult {
                            n: 40,
                            h: 0.025,
                            l2_error: None,
                            walltime_s: 0.0,
                            flags: vec!["diverged".to_string()],
                            remainder_max: None,
                        },
                    ],
                    fitted_order: Some(2.0),
                },
                SchemeReport {
                    scheme: SchemeVersion::V3,
                    levels: vec![
                        LevelResult {
                            n: 10,
                            h: 0.1,
                            l2_error: Some(1e-3),
                            walltime_s: 0.0,
                            flags: vec![],
                            remainder_max: Some(0.01),
                        },
                        LevelResult {
                            n: 20,
                            h: 0.05,
                            l2_error: Some(6.25e-5),
                            walltime_s: 0.0,
                            flags: vec![],
                            remainder_max: Some(0.0025),
                        },
                        LevelResult {
                            n: 40,
                            h: 0.025,
                            l2_error: Some(3.9e-6),
                            walltime_s: 0.0,
                            flags: vec![],
                            remainder_max: Some(0.000625),
                        },
                    ],
                    fitted_order: Some(4.0),
                },
            ],
            ref_level: 80,
            ref_scheme: SchemeVersion::V3,
            error_norm_note: "test".to_string(),
            cross_term_excess: -1.0,
            config_echo: "alpha = 0.5".to_string(),
        };
        let dir = std::env::temp_dir().join("hocfd_emit_test");
        let _ = fs::remove_dir_all(&dir);
        let files = emit_report(&report, &dir).unwrap();
        let csv = fs::read_to_string(&files.csv).unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scheme,h,l2_error,order_fit,walltime_s,flags"
        );
        assert_eq!(csv.lines().count(), 1 + 6, "2 schemes x 3 levels");
        assert!(csv.contains("diverged"));
        // re-emitting is byte-identical
        let first = fs::read(&files.csv).unwrap();
        emit_report(&report, &dir).unwrap();
        assert_eq!(first, fs::read(&files.csv).unwrap());
        // plot data: two columns for valid levels only
        let dat = fs::read_to_string(&files.plot_data[0]).unwrap();
        let rows: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].split_whitespace().count(), 2);
        // metadata parses as TOML
        let meta = fs::read_to_string(&files.metadata).unwrap();
        let parsed: toml::Value = toml::from_str(&meta).unwrap();
        assert!(parsed.get("code_version").is_some());
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn empty_report_emits_header_only_csv() {
        let report = ConvergenceReport {
            schemes: vec![],
            ref_level: 80,
            ref_scheme: SchemeVersion::V3,
            error_norm_note: "test".to_string(),
            cross_term_excess: 0.0,
            config_echo: String::new(),
        };
        let dir = std::env::temp_dir().join("hocfd_emit_empty");
        let _ = fs::remove_dir_all(&dir);
        let files = emit_report(&report, &dir).unwrap();
        let csv = fs::read_to_string(&files.csv).unwrap();
        assert_eq!(csv, "scheme,h,l2_error,order_fit,walltime_s,flags\n");
        let _ = fs::remove_dir_all(&dir);
    }
}
