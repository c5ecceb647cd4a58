//! The `cglisp` command: benchmark campaigns, single headless runs and the
//! interactive session service.

use std::fs;
use std::path::{Path, PathBuf};

use cglisp_core::optimizer::default_recalibration_steps;
use cglisp_core::sampling::default_n_init;
use cglisp_core::{
    run_headless, run_monte_carlo, AcquisitionConfig, BenchmarkProblem, RbfKind, RngSeed,
    RunConfig, SolverMode,
};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<cglisp_core::Error> for CliError {
    fn from(e: cglisp_core::Error) -> Self {
        match e {
            cglisp_core::Error::InvalidConfig(_) | cglisp_core::Error::InvalidDomain(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

fn runtime(context: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(
    name = "cglisp",
    version,
    about = "Preference-based optimization with unknown constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo campaign on a benchmark problem with a synthetic decision-maker.
    Bench(BenchArgs),
    /// One headless run on a benchmark problem.
    Run(ExperimentArgs),
    /// HTTP service for interactive sessions.
    Serve(ServeArgs),
}

/// Solver settings; unset ones keep the bundled values of the chosen problem.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
pub struct Tuning {
    /// Evaluation budget [problem default: 50 for mbc/chsc, 100 for chc]
    #[arg(long)]
    pub n_max: Option<usize>,
    /// Initial Latin hypercube samples [default: round(n_max/4)]
    #[arg(long)]
    pub n_init: Option<usize>,
    /// Exploration weight [problem default: 1, 2 for chc]
    #[arg(long)]
    pub delta_e: Option<f64>,
    /// Infeasibility penalty before adaptation [default: delta_e]
    #[arg(long)]
    pub delta_g: Option<f64>,
    /// Unsatisfaction penalty before adaptation [default: delta_g/2]
    #[arg(long)]
    pub delta_s: Option<f64>,
    /// Preference tie margin [default: 1/n_max]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Slack weight [default: 1]
    #[arg(long)]
    pub c_weight: Option<f64>,
    /// Ridge regularization [default: 1e-6]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Initial RBF shape parameter [default: 1]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// RBF kind: inverse-quadratic, gaussian or thin-plate-spline [default: inverse-quadratic]
    #[arg(long)]
    pub rbf: Option<RbfKind>,
    /// Sample counts at which epsilon is recalibrated, comma separated [default: n_init plus quarters of the active phase]
    #[arg(long, value_delimiter = ',')]
    pub recal_steps: Option<Vec<usize>>,
    /// Cross-validation folds for recalibration [default: 3]
    #[arg(long)]
    pub cv_folds: Option<usize>,
    /// Particle swarm size [default: max(20·dimension, 30)]
    #[arg(long)]
    pub pso_swarm: Option<usize>,
    /// Particle swarm iterations [default: 200]
    #[arg(long)]
    pub pso_iterations: Option<usize>,
}

impl Tuning {
    fn or(self, other: Tuning) -> Tuning {
        Tuning {
            n_max: self.n_max.or(other.n_max),
            n_init: self.n_init.or(other.n_init),
            delta_e: self.delta_e.or(other.delta_e),
            delta_g: self.delta_g.or(other.delta_g),
            delta_s: self.delta_s.or(other.delta_s),
            sigma: self.sigma.or(other.sigma),
            c_weight: self.c_weight.or(other.c_weight),
            lambda: self.lambda.or(other.lambda),
            epsilon: self.epsilon.or(other.epsilon),
            rbf: self.rbf.or(other.rbf),
            recal_steps: self.recal_steps.or(other.recal_steps),
            cv_folds: self.cv_folds.or(other.cv_folds),
            pso_swarm: self.pso_swarm.or(other.pso_swarm),
            pso_iterations: self.pso_iterations.or(other.pso_iterations),
        }
    }

    /// Applies the set fields to `base`; budget changes rederive the settings that
    /// depend on the budget unless those are given too.
    pub fn apply(&self, base: RunConfig) -> Result<RunConfig, CliError> {
        let mut cfg = base;
        if self.n_max.is_some() || self.n_init.is_some() {
            let n_max = self.n_max.unwrap_or(cfg.n_max);
            let n_init = self.n_init.unwrap_or(if n_max == cfg.n_max {
                cfg.n_init
            } else {
                default_n_init(n_max)
            });
            if n_init < 2 || n_init >= n_max {
                return Err(CliError::Usage(format!(
                    "need 2 <= n_init < n_max, got n_init={n_init} n_max={n_max}"
                )));
            }
            cfg.n_max = n_max;
            cfg.n_init = n_init;
            cfg.fit.sigma = 1.0 / n_max as f64;
            cfg.acquisition.n_max = n_max;
            cfg.epsilon_recalibration_steps = default_recalibration_steps(n_init, n_max);
        }
        if let Some(d) = self.delta_e {
            cfg.set_delta_e(d);
        }
        let a = cfg.acquisition;
        let delta_g = self.delta_g.unwrap_or(a.delta_g_default);
        let delta_s = self.delta_s.unwrap_or(if self.delta_g.is_some() {
            delta_g / 2.0
        } else {
            a.delta_s_default
        });
        cfg.acquisition =
            AcquisitionConfig::with_defaults(a.delta_e, delta_g, delta_s, a.n_max, a.exploration);
        if let Some(v) = self.sigma {
            cfg.fit.sigma = v;
        }
        if let Some(v) = self.c_weight {
            cfg.fit.c_weight = v;
        }
        if let Some(v) = self.lambda {
            cfg.fit.lambda = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon_initial = v;
        }
        if let Some(v) = self.rbf {
            cfg.rbf_kind = v;
        }
        if let Some(v) = &self.recal_steps {
            cfg.epsilon_recalibration_steps = v.clone();
        }
        if let Some(v) = self.cv_folds {
            cfg.cv_folds = v;
        }
        if let Some(v) = self.pso_swarm {
            cfg.pso.swarm_size = v;
        }
        if let Some(v) = self.pso_iterations {
            cfg.pso.iterations = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct ExperimentArgs {
    /// Benchmark problem: mbc, chc or chsc (required here or in the config file)
    #[arg(long)]
    pub problem: Option<BenchmarkProblem>,
    /// Base random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Solver variant: cglisp, or glisp for the preference-only ablation [default: cglisp]
    #[arg(long)]
    pub mode: Option<SolverMode>,
    /// Output directory [default: cglisp-out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Key-value settings file using the flag names (underscores); flags take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: Tuning,
}

#[derive(Debug, Clone, Default, PartialEq, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Number of runs; run i uses seed + i [default: 20]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Parallel runs [default: logical CPU count]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ServeArgs {
    /// Port to listen on; 0 picks a free one
    #[arg(long, env = "CGLISP_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Address to bind
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Directory holding one JSON document per session
    #[arg(long, default_value = "cglisp-data")]
    pub data: PathBuf,
    /// Directory of static web assets served at / [default: built-in placeholder page]
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
pub struct FileConfig {
    pub problem: Option<BenchmarkProblem>,
    pub seed: Option<u64>,
    pub mode: Option<SolverMode>,
    pub out: Option<PathBuf>,
    pub runs: Option<usize>,
    pub jobs: Option<usize>,
    #[serde(flatten)]
    pub tuning: Tuning,
}

const FILE_KEYS: &[&str] = &[
    "problem",
    "seed",
    "mode",
    "out",
    "runs",
    "jobs",
    "n_max",
    "n_init",
    "delta_e",
    "delta_g",
    "delta_s",
    "sigma",
    "c_weight",
    "lambda",
    "epsilon",
    "rbf",
    "recal_steps",
    "cv_folds",
    "pso_swarm",
    "pso_iterations",
];

/// Parses a settings file of `key = value` lines (TOML syntax).
pub fn parse_config_file(text: &str) -> Result<FileConfig, CliError> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config file: {e}")))?;
    if let Some(k) = table.keys().find(|k| !FILE_KEYS.contains(&k.as_str())) {
        return Err(CliError::Usage(format!("config file: unknown key '{k}'")));
    }
    table
        .try_into()
        .map_err(|e| CliError::Usage(format!("config file: {e}")))
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            parse_config_file(&text)
        }
    }
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub problem: BenchmarkProblem,
    pub seed: u64,
    pub mode: SolverMode,
    pub out: PathBuf,
    pub runs: usize,
    pub jobs: Option<usize>,
    pub config: RunConfig,
}

pub fn resolve(args: &BenchArgs) -> Result<Experiment, CliError> {
    let exp = &args.experiment;
    let file = load_config(exp.config.as_deref())?;
    let problem = exp
        .problem
        .or(file.problem)
        .ok_or_else(|| CliError::Usage("--problem is required (mbc, chc or chsc)".into()))?;
    let seed = exp.seed.or(file.seed).unwrap_or(0);
    let mode = exp.mode.or(file.mode).unwrap_or_default();
    let tuning = exp.tuning.clone().or(file.tuning);
    let config = mode.apply(tuning.apply(RunConfig::for_problem(problem, RngSeed(seed)))?);
    let runs = args.runs.or(file.runs).unwrap_or(20);
    if runs == 0 {
        return Err(CliError::Usage("--runs must be positive".into()));
    }
    let jobs = args.jobs.or(file.jobs);
    if jobs == Some(0) {
        return Err(CliError::Usage("--jobs must be positive".into()));
    }
    Ok(Experiment {
        problem,
        seed,
        mode,
        out: exp
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from("cglisp-out")),
        runs,
        jobs,
        config,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let e = resolve(args)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = e.jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|err| runtime("thread pool", err))?;
    let report = pool.install(|| run_monte_carlo(e.problem, &e.config, e.runs, e.seed, e.mode))?;
    report.write(&e.out)?;
    println!("{}", report.summary);
    for r in report.runs.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "run with seed {} failed: {}",
            r.seed,
            r.error.as_deref().unwrap_or_default()
        );
    }
    println!("reports written to {}", e.out.display());
    if report.summary.failed == report.runs.len() {
        return Err(CliError::Runtime("every run failed".into()));
    }
    Ok(())
}

pub fn cmd_run(args: &ExperimentArgs) -> Result<(), CliError> {
    let e = resolve(&BenchArgs {
        experiment: args.clone(),
        ..BenchArgs::default()
    })?;
    let mut dm = e.problem;
    let result = run_headless(e.config, &mut dm)?;
    let eval = e.problem.evaluate(&result.best_point)?;

    fs::create_dir_all(&e.out).map_err(|err| runtime("creating output directory", err))?;
    let stem = format!("{}_{}_seed{}", e.problem, e.mode, e.seed);
    fs::write(
        e.out.join(format!("{stem}_dataset.json")),
        result.dataset.to_json(),
    )
    .map_err(|err| runtime("writing dataset", err))?;
    let json =
        serde_json::to_string_pretty(&result).map_err(|err| runtime("encoding result", err))?;
    fs::write(e.out.join(format!("{stem}_result.json")), json)
        .map_err(|err| runtime("writing result", err))?;
    let csv = fs::File::create(e.out.join(format!("{stem}_history.csv")))
        .map_err(|err| runtime("writing history", err))?;
    result.write_history_csv(csv)?;

    println!("best point: {:?}", result.best_point);
    println!(
        "f = {}  feasible = {}{}",
        eval.f,
        eval.feasible,
        eval.satisfactory
            .map(|s| format!("  satisfactory = {s}"))
            .unwrap_or_default()
    );
    println!("outputs written to {}", e.out.display());
    Ok(())
}

pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    use cglisp_service::{router, serve, AppState, Store};

    let store = Store::at(&args.data).map_err(|e| runtime("data directory", e))?;
    let (state, skipped) = AppState::open(store).map_err(|e| runtime("loading sessions", e))?;
    for (path, why) in &skipped {
        eprintln!("skipping {}: {why}", path.display());
    }
    let rt = tokio::runtime::Runtime::new().map_err(|e| runtime("starting runtime", e))?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| runtime(&format!("binding {}:{}", args.host, args.port), e))?;
        let addr = listener
            .local_addr()
            .map_err(|e| runtime("listener address", e))?;
        println!(
            "listening on http://{addr} ({} sessions loaded)",
            state.session_count()
        );
        serve(listener, router(state, args.assets.clone()))
            .await
            .map_err(|e| runtime("serving", e))
    })
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Bench(a) => cmd_bench(a),
        Command::Run(a) => cmd_run(a),
        Command::Serve(a) => cmd_serve(a),
    }
}
