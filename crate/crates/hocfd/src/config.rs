//! TOML problem/study configuration shared by the library and the CLI.
//!
//! Schema (values shown are the reference experiment defaults):
//!
//! ```toml
//! [problem]
//! alpha = 0.5        # variance-drift exponent (0 = Heston, 1 = SQRN)
//! kappa = 1.1
//! theta = 0.2
//! sigma = 0.2        # optional when y_span is given: sigma = (v_max - v_min) / y_span
//! # y_span = 1.0
//! rho = -0.4
//! r = 0.05
//! strike = 100.0
//! maturity = 0.25
//! s_min = 1.5
//! s_max = 250.0
//! v_min = 0.1
//! v_max = 0.3
//!
//! [grid]
//! zeta = 7.5
//!
//! [time]
//! bdf4_ratio = 0.1   # k / h
//! cn_ratio = 0.4     # k' / h^2
//!
//! [study]
//! schemes = ["standard", "v1", "v2", "v3", "v4"]
//! levels = [10, 20, 40, 80]
//! ref_level = 160
//! measure_walltime = true
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::StudyConfig;
use crate::model::SVParams;
use crate::schemes::SchemeVersion;

#[derive(Debug, Deserialize)]
pub struct ProblemSection {
    pub alpha: f64,
    pub kappa: f64,
    pub theta: f64,
    pub sigma: Option<f64>,
    /// Alternative to sigma: the y = v/sigma domain length.
    pub y_span: Option<f64>,
    pub rho: f64,
    pub r: f64,
    pub strike: f64,
    pub maturity: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

#[derive(Debug, Deserialize)]
pub struct GridSection {
    pub zeta: f64,
}

#[derive(Debug, Deserialize)]
pub struct TimeSection {
    pub bdf4_ratio: f64,
    pub cn_ratio: f64,
}

#[derive(Debug, Deserialize)]
pub struct StudySection {
    pub schemes: Vec<String>,
    pub levels: Vec<usize>,
    pub ref_level: usize,
    #[serde(default = "default_true")]
    pub measure_walltime: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
pub struct FileConfig {
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub time: TimeSection,
    pub study: Option<StudySection>,
}

impl FileConfig {
    pub fn from_toml_str(text: &str) -> Result<FileConfig> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Resolves sigma (given directly, or recovered from the y span) and
    /// builds the model parameters.
    pub fn params(&self) -> Result<SVParams> {
        let p = &self.problem;
        let sigma = match (p.sigma, p.y_span) {
            (Some(s), None) => s,
            (None, Some(span)) => {
                if !(span > 0.0) {
                    return Err(Error::Config("y_span must be positive".into()));
                }
                (p.v_max - p.v_min) / span
            }
            (Some(s), Some(span)) => {
                let derived = (p.v_max - p.v_min) / span;
                if (derived - s).abs() > 1e-9 * s.abs().max(derived.abs()) {
                    return Err(Error::Config(format!(
                        "sigma = {s} conflicts with y_span = {span} \
                         (which implies sigma = {derived})"
                    )));
                }
                s
            }
            (None, None) => {
                return Err(Error::Config(
                    "give either problem.sigma or problem.y_span".into(),
                ))
            }
        };
        let params = SVParams {
            alpha: p.alpha,
            kappa: p.kappa,
            theta: p.theta,
            sigma,
            rho: p.rho,
            r: p.r,
            strike: p.strike,
            maturity: p.maturity,
            s_min: p.s_min,
            s_max: p.s_max,
            v_min: p.v_min,
            v_max: p.v_max,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn zeta(&self) -> f64 {
        self.grid.zeta
    }

    /// Builds the study configuration, applying any CLI overrides.
    pub fn study_config(
        &self,
        scheme_override: Option<&[String]>,
        levels_override: Option<&[usize]>,
        ref_level_override: Option<usize>,
    ) -> Result<StudyConfig> {
        let study = self.study.as_ref();
        let scheme_names: Vec<String> = match (scheme_override, study) {
            (Some(names), _) if !names.is_empty() => names.to_vec(),
            (_, Some(s)) => s.schemes.clone(),
            _ => {
                return Err(Error::Config(
                    "no [study] section and no --scheme override".into(),
                ))
            }
        };
        let schemes = scheme_names
            .iter()
            .map(|s| SchemeVersion::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let levels = match (levels_override, study) {
            (Some(l), _) if !l.is_empty() => l.to_vec(),
            (_, Some(s)) => s.levels.clone(),
            _ => return Err(Error::Config("no levels configured".into())),
        };
        let ref_level = match (ref_level_override, study) {
            (Some(r), _) => r,
            (_, Some(s)) => s.ref_level,
            _ => return Err(Error::Config("no reference level configured".into())),
        };
        let cfg = StudyConfig {
            problem: self.params()?,
            zeta: self.zeta(),
            schemes,
            levels,
            ref_level,
            bdf4_ratio: self.time.bdf4_ratio,
            cn_ratio: self.time.cn_ratio,
            measure_walltime: study.map(|s| s.measure_walltime).unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The benchmark experiment configuration as a ready-to-edit TOML document.
pub const BENCHMARK_TOML: &str = r#"[problem]
alpha = 0.5
kappa = 1.1
theta = 0.2
sigma = 0.2
rho = -0.4
r = 0.05
strike = 100.0
maturity = 0.25
s_min = 1.5
s_max = 250.0
v_min = 0.1
v_max = 0.3

[grid]
zeta = 7.5

[time]
bdf4_ratio = 0.1
cn_ratio = 0.4

[study]
schemes = ["standard", "v1", "v2", "v3", "v4"]
levels = [10, 20, 40, 80]
ref_level = 160
measure_walltime = true
"#;
