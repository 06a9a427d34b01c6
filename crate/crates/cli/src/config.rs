use std::path::{Path, PathBuf};

use osc_lab::funcspace::FunctionDescriptor;
use osc_lab::martingale::LilMode;
use osc_lab::measure::make_classical;
use osc_lab::oscillation::DEFAULT_QUAD_TOL;
use osc_lab::{FunctionSpec, MeasureDescriptor, NamedMeasure, Route, SignedMeasure};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Environment variable capping function evaluations.
pub const BUDGET_ENV: &str = "OSC_LAB_BUDGET";

fn default_quad_tol() -> f64 {
    DEFAULT_QUAD_TOL
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Cap on function evaluations; the library default applies when absent.
    #[serde(default)]
    pub budget: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub svg: Option<PathBuf>,
}

/// Descriptor references are file paths, inline JSON, or (for measures) a
/// builder name: `sym1`, `sym2`, `sphere`, `classical:<l>` with an optional
/// `@<dim>` suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Moments {
        measure: String,
        order: u32,
    },
    FnCheck {
        function: String,
        m: u32,
        alpha: f64,
        ell: u32,
    },
    ThetaSweep {
        function: String,
        measure: String,
        /// Explicit points; seeded uniform samples in [0,1)^d are drawn when empty.
        #[serde(default)]
        x: Vec<Vec<f64>>,
        #[serde(default)]
        samples: usize,
        eps: Vec<f64>,
        m: u32,
        alpha: f64,
        #[serde(default)]
        route: Route,
    },
    Martingale {
        function: String,
        measure: String,
        nmax: u32,
        m: u32,
        alpha: f64,
        samples: usize,
    },
    Lil {
        mode: LilMode,
        function: String,
        measure: String,
        nmax: u32,
        m: u32,
        alpha: f64,
        samples: usize,
    },
    KernelReport {
        measure: String,
    },
    KernelCompare {
        function: String,
        measure: String,
        /// Evaluation points; −1..1 in steps of 1/8 when empty.
        #[serde(default)]
        x: Vec<f64>,
        eps: Vec<f64>,
    },
    Sharpness {
        b: f64,
        nmax: u32,
        samples: usize,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Moments { .. } => "moments",
            Experiment::FnCheck { .. } => "fn-check",
            Experiment::ThetaSweep { .. } => "theta-sweep",
            Experiment::Martingale { .. } => "martingale",
            Experiment::Lil { .. } => "lil",
            Experiment::KernelReport { .. } => "kernel-report",
            Experiment::KernelCompare { .. } => "kernel-compare",
            Experiment::Sharpness { .. } => "sharpness",
        }
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        ExperimentConfig { experiment, quad_tol: DEFAULT_QUAD_TOL, seed: 0, budget: None, out: None, svg: None }
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.quad_tol > 0.0 && self.quad_tol.is_finite()) {
            return Err(CliError::config("quad_tol must be positive"));
        }
        if self.budget == Some(0) {
            return Err(CliError::config("budget must be positive"));
        }
        let positive = |v: &[f64]| v.iter().all(|e| *e > 0.0 && *e < 1.0);
        match &self.experiment {
            Experiment::ThetaSweep { x, samples, eps, .. } => {
                if x.is_empty() && *samples == 0 {
                    return Err(CliError::config("theta sweep needs --x points or --samples"));
                }
                if eps.is_empty() || !positive(eps) {
                    return Err(CliError::config("epsilon grid must be non-empty and inside (0, 1)"));
                }
            }
            Experiment::KernelCompare { eps, .. } => {
                if eps.is_empty() || !positive(eps) {
                    return Err(CliError::config("epsilon grid must be non-empty and inside (0, 1)"));
                }
            }
            Experiment::Martingale { samples, .. } | Experiment::Lil { samples, .. } | Experiment::Sharpness { samples, .. } => {
                if *samples == 0 {
                    return Err(CliError::config("--samples must be positive"));
                }
            }
            _ => {}
        }
        if let Experiment::Lil { mode, nmax, .. } = &self.experiment {
            let first = lil_first_generation(*mode);
            if *nmax < first + 3 {
                return Err(CliError::config(format!("lil needs --nmax >= {}", first + 3)));
            }
        }
        Ok(())
    }
}

pub fn lil_first_generation(mode: LilMode) -> u32 {
    match mode {
        LilMode::Theta => 4,
        LilMode::Martingale => 3,
    }
}

/// Budget from [`BUDGET_ENV`], if set.
pub fn budget_from_env() -> CliResult<Option<usize>> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|b| *b > 0)
            .map(Some)
            .ok_or_else(|| CliError::config(format!("{BUDGET_ENV} must be a positive integer, got '{v}'"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(CliError::config(format!("{BUDGET_ENV}: {e}"))),
    }
}

fn read_source(source: &str) -> CliResult<String> {
    if source.trim_start().starts_with('{') {
        return Ok(source.to_string());
    }
    std::fs::read_to_string(Path::new(source)).map_err(|e| CliError::config(format!("cannot read '{source}': {e}")))
}

pub fn load_function(source: &str) -> CliResult<(FunctionSpec, FunctionDescriptor)> {
    let text = read_source(source)?;
    let d: FunctionDescriptor =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("bad function descriptor '{source}': {e}")))?;
    let f = FunctionSpec::from_descriptor(&d)?;
    Ok((f, d))
}

fn named_measure(source: &str) -> CliResult<Option<SignedMeasure>> {
    let (name, dim) = match source.split_once('@') {
        Some((n, d)) => (n, d.parse::<usize>().map_err(|_| CliError::config(format!("bad dimension in '{source}'")))?),
        None => (source, 1),
    };
    let s = match name {
        "sym1" => osc_lab::measure::make_named(NamedMeasure::Sym1, dim)?,
        "sym2" => osc_lab::measure::make_named(NamedMeasure::Sym2, dim)?,
        "sphere" => osc_lab::measure::make_named(NamedMeasure::SphereMinusDelta, dim)?,
        _ => match name.strip_prefix("classical:") {
            Some(l) if dim == 1 => make_classical(l.parse().map_err(|_| CliError::config(format!("bad order in '{source}'")))?)?,
            Some(_) => return Err(CliError::config("classical measures live on the line")),
            None => return Ok(None),
        },
    };
    Ok(Some(s))
}

pub fn load_measure(source: &str) -> CliResult<(SignedMeasure, MeasureDescriptor)> {
    if !Path::new(source).exists() {
        if let Some(s) = named_measure(source.trim())? {
            let d = s.descriptor();
            return Ok((s, d));
        }
    }
    let text = read_source(source)?;
    let d: MeasureDescriptor =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("bad measure descriptor '{source}': {e}")))?;
    let s = SignedMeasure::from_descriptor(&d)?;
    Ok((s, d))
}
