use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use osc_lab::martingale::LilMode;
use osc_lab::Route;
use osc_lab_cli::config::budget_from_env;
use osc_lab_cli::grid::{parse_eps_grid, parse_point};
use osc_lab_cli::{run, CliError, CliResult, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "osc-lab", version, about = "Oscillation functionals, dyadic martingales and singular kernels")]
struct Cli {
    /// Worker threads for sweeps (default: hardware parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Quadrature tolerance.
    #[arg(long, default_value_t = osc_lab::oscillation::DEFAULT_QUAD_TOL)]
    quad_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Primary output (CSV or JSON); a manifest is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG chart.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Measure descriptors.
    Measure {
        #[command(subcommand)]
        command: MeasureCommand,
    },
    /// Function descriptors.
    Fn {
        #[command(subcommand)]
        command: FnCommand,
    },
    /// Theta_eps f(x) over points and an epsilon grid.
    Theta {
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        measure: String,
        /// Point as comma-separated coordinates; repeatable.
        #[arg(long = "x")]
        x: Vec<String>,
        /// Seeded uniform points in [0,1)^d, used when no --x is given.
        #[arg(long, default_value_t = 0)]
        samples: usize,
        #[arg(long, conflicts_with = "eps_grid")]
        eps: Option<f64>,
        #[arg(long)]
        eps_grid: Option<String>,
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
        route: RouteArg,
        #[command(flatten)]
        common: Common,
    },
    /// Dyadic martingale S_n with comparison gaps.
    Martingale {
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        measure: String,
        #[arg(long)]
        nmax: u32,
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long)]
        alpha: f64,
        /// Seeded sample points for the comparison gap.
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Law-of-the-iterated-logarithm ratios.
    Lil {
        #[arg(long, value_enum, default_value_t = ModeArg::Theta)]
        mode: ModeArg,
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        measure: String,
        #[arg(long, default_value_t = 16)]
        nmax: u32,
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Kernel K_0 of a measure on the line.
    Kernel {
        #[command(subcommand)]
        command: KernelCommand,
    },
    /// Lower-ratio experiment for the lacunary Zygmund function.
    Sharpness {
        #[arg(long, default_value_t = 2.0)]
        b: f64,
        #[arg(long, default_value_t = 16)]
        nmax: u32,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Runs a saved experiment configuration (as stored in a manifest).
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MeasureCommand {
    /// Checks that all moments up to --order vanish.
    Check {
        #[arg(long)]
        file: String,
        #[arg(long)]
        order: u32,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum FnCommand {
    /// Empirical membership in C^{m,alpha} through the ell-th difference.
    Check {
        #[arg(long)]
        file: String,
        #[arg(long, default_value_t = 0)]
        m: u32,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        ell: u32,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum KernelCommand {
    /// Size, smoothness and cancellation constants.
    Report {
        #[arg(long)]
        measure: String,
        #[command(flatten)]
        common: Common,
    },
    /// Theta-tilde against the truncated singular integral.
    Compare {
        #[arg(long = "fn")]
        function: String,
        #[arg(long)]
        measure: String,
        #[arg(long, default_value = "2^-1..2^-14")]
        eps_grid: String,
        /// Evaluation point; repeatable (default -1..1 in steps of 1/8).
        #[arg(long = "x", allow_negative_numbers = true)]
        x: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RouteArg {
    Auto,
    Direct,
    Spectral,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Theta,
    Martingale,
}

fn with_common(experiment: Experiment, c: Common) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(experiment);
    cfg.quad_tol = c.quad_tol;
    cfg.seed = c.seed;
    cfg.out = c.out;
    cfg.svg = c.svg;
    cfg
}

fn build_config(command: Command) -> CliResult<ExperimentConfig> {
    let cfg = match command {
        Command::Measure { command: MeasureCommand::Check { file, order, common } } => {
            with_common(Experiment::Moments { measure: file, order }, common)
        }
        Command::Fn { command: FnCommand::Check { file, m, alpha, ell, common } } => {
            with_common(Experiment::FnCheck { function: file, m, alpha, ell }, common)
        }
        Command::Theta { function, measure, x, samples, eps, eps_grid, m, alpha, route, common } => {
            let eps = match (eps, eps_grid) {
                (Some(e), None) => parse_eps_grid(&e.to_string())?,
                (None, Some(g)) => parse_eps_grid(&g)?,
                _ => return Err(CliError::config("give --eps or --eps-grid")),
            };
            let dim = osc_lab_cli::config::load_function(&function)?.0.dim();
            let x = x.iter().map(|p| parse_point(p, dim)).collect::<CliResult<Vec<_>>>()?;
            let route = match route {
                RouteArg::Auto => Route::Auto,
                RouteArg::Direct => Route::Direct,
                RouteArg::Spectral => Route::Spectral,
            };
            with_common(Experiment::ThetaSweep { function, measure, x, samples, eps, m, alpha, route }, common)
        }
        Command::Martingale { function, measure, nmax, m, alpha, samples, common } => {
            with_common(Experiment::Martingale { function, measure, nmax, m, alpha, samples }, common)
        }
        Command::Lil { mode, function, measure, nmax, m, alpha, samples, common } => {
            let mode = match mode {
                ModeArg::Theta => LilMode::Theta,
                ModeArg::Martingale => LilMode::Martingale,
            };
            with_common(Experiment::Lil { mode, function, measure, nmax, m, alpha, samples }, common)
        }
        Command::Kernel { command: KernelCommand::Report { measure, common } } => with_common(Experiment::KernelReport { measure }, common),
        Command::Kernel { command: KernelCommand::Compare { function, measure, eps_grid, x, common } } => {
            let eps = parse_eps_grid(&eps_grid)?;
            with_common(Experiment::KernelCompare { function, measure, x, eps }, common)
        }
        Command::Sharpness { b, nmax, samples, common } => with_common(Experiment::Sharpness { b, nmax, samples }, common),
        Command::Run { config, out, svg } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::config(format!("cannot read {}: {e}", config.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::config(e.to_string()))?;
            // A manifest carries the configuration under "config".
            let inner = value.get("config").filter(|_| value.get("experiment").is_some_and(|e| e.is_string())).cloned().unwrap_or(value);
            let mut cfg: ExperimentConfig = serde_json::from_value(inner).map_err(|e| CliError::config(format!("bad configuration: {e}")))?;
            if out.is_some() {
                cfg.out = out;
            }
            if svg.is_some() {
                cfg.svg = svg;
            }
            cfg
        }
    };
    Ok(cfg)
}

fn execute(cli: Cli) -> CliResult<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    let mut cfg = build_config(cli.command)?;
    if let Some(b) = budget_from_env()? {
        cfg.budget = Some(b);
    }
    let outcome = run(&cfg)?;
    for c in &outcome.checks {
        println!("{}", c.line());
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
