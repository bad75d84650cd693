//! Command-line front end: single-solve pricing, convergence studies, and
//! stencil dumps, driven by a TOML configuration file.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hocfd::config::FileConfig;
use hocfd::harness::{emit_report, print_report, run_convergence};
use hocfd::linalg::LinearSolveContract;
use hocfd::model::{build_problem, read_off, untransform};
use hocfd::schemes::{assemble_system, dump_stencils, SchemeVersion};
use hocfd::stepper::{integrate, IntegrateOptions, TimeGrid};
use hocfd::Error;

#[derive(Parser)]
#[command(
    name = "hocfd",
    about = "High-order compact finite-difference option pricing and convergence studies",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one pricing problem and print the option value at a query
    /// point (bilinear read-off on the grid).
    Price {
        /// TOML problem configuration.
        #[arg(long)]
        config: PathBuf,
        /// Scheme: standard, v1, v2, v3 or v4.
        #[arg(long, default_value = "v3")]
        scheme: String,
        /// Grid intervals per unit length (h = 1/level).
        #[arg(long, default_value_t = 80)]
        level: usize,
        /// Query spot price; defaults to the strike.
        #[arg(long)]
        spot: Option<f64>,
        /// Query spot variance; defaults to v_max.
        #[arg(long)]
        variance: Option<f64>,
        /// Write a per-step trace log to this file.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run a convergence study and write report.csv, per-scheme plot data
    /// and metadata.toml.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured scheme list (repeatable).
        #[arg(long = "scheme")]
        schemes: Vec<String>,
        /// Override the configured levels, comma separated (e.g. 10,20,40).
        #[arg(long, value_delimiter = ',')]
        levels: Vec<usize>,
        /// Override the reference level (the published study uses 320).
        #[arg(long)]
        ref_level: Option<usize>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Dump the per-node dual stencils of a scheme (debug aid).
    StencilDump {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "v3")]
        scheme: String,
        #[arg(long, default_value_t = 10)]
        level: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Price {
            config,
            scheme,
            level,
            spot,
            variance,
            trace,
        } => {
            let cfg = FileConfig::load(&config)?;
            let params = cfg.params()?;
            let scheme = SchemeVersion::parse(&scheme)?;
            let problem = build_problem(&params, cfg.zeta(), level)?;
            let ops = assemble_system(scheme, &problem.coeffs, &problem.bc)?;
            let tg = TimeGrid::from_ratios(
                problem.grid.h,
                params.maturity,
                cfg.time.bdf4_ratio,
                cfg.time.cn_ratio,
            )?;
            let mut trace_file = match &trace {
                Some(path) => Some(BufWriter::new(
                    File::create(path).map_err(|e| Error::io(path, e))?,
                )),
                None => None,
            };
            let mut opts = IntegrateOptions {
                max_norm_guard: Some(hocfd::harness::DIVERGENCE_MAX_NORM),
                trace: trace_file.as_mut().map(|w| w as &mut dyn Write),
            };
            let u = integrate(
                &ops,
                &problem.u0,
                &tg,
                &ops.rhs,
                &LinearSolveContract::default(),
                &mut opts,
            )?;
            let s = spot.unwrap_or(params.strike);
            let v = variance.unwrap_or(params.v_max);
            let u_val = read_off(&problem, &u, s, v)?;
            let price = untransform(u_val, params.maturity, &params);
            println!(
                "scheme {} on {}x{} grid (h = 1/{level}), {} BDF4 steps after {} CN substeps",
                scheme.name(),
                problem.grid.nx(),
                problem.grid.ny(),
                tg.n_bdf - 3,
                tg.n_cn()
            );
            println!(
                "European put V(S = {s}, v = {v}, T = {}) = {price:.6}",
                params.maturity
            );
            Ok(())
        }
        Command::Converge {
            config,
            schemes,
            levels,
            ref_level,
            out,
        } => {
            let cfg = FileConfig::load(&config)?;
            let study = cfg.study_config(
                if schemes.is_empty() {
                    None
                } else {
                    Some(&schemes)
                },
                if levels.is_empty() {
                    None
                } else {
                    Some(&levels)
                },
                ref_level,
            )?;
            let report = run_convergence(&study)?;
            let files = emit_report(&report, &out)?;
            print_report(&report, &mut std::io::stdout()).map_err(|e| Error::io(&out, e))?;
            println!("wrote {}", files.csv.display());
            for p in &files.plot_data {
                println!("wrote {}", p.display());
            }
            println!("wrote {}", files.metadata.display());
            Ok(())
        }
        Command::StencilDump {
            config,
            scheme,
            level,
            out,
        } => {
            let cfg = FileConfig::load(&config)?;
            let params = cfg.params()?;
            let scheme = SchemeVersion::parse(&scheme)?;
            let problem = build_problem(&params, cfg.zeta(), level)?;
            match out {
                Some(path) => {
                    let mut w =
                        BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
                    dump_stencils(scheme, &problem.coeffs, &mut w)
                        .map_err(|e| Error::io(&path, e))?;
                    println!("wrote {}", path.display());
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut w = stdout.lock();
                    dump_stencils(scheme, &problem.coeffs, &mut w)
                        .map_err(|e| Error::io("stdout", e))?;
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.category() {
                "config" => 2,
                "solver" => 3,
                "io" => 4,
                _ => 5,
            };
            ExitCode::from(code)
        }
    }
}
