//! Monte Carlo runs on the benchmark problems with a synthetic decision-maker.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{run_headless, RunConfig};
use crate::oracles::BenchmarkProblem;
use crate::sampling::RngSeed;

/// A run counts as a success when feasible and within this many percent of the reference.
pub const SUCCESS_PERCENT: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    /// Feasibility/satisfaction penalties with blended exploration.
    #[default]
    Cglisp,
    /// Preferences only, plain exploration.
    Glisp,
}

impl SolverMode {
    pub fn name(self) -> &'static str {
        match self {
            SolverMode::Cglisp => "cglisp",
            SolverMode::Glisp => "glisp",
        }
    }

    pub fn apply(self, config: RunConfig) -> RunConfig {
        match self {
            SolverMode::Cglisp => config,
            SolverMode::Glisp => config.unconstrained(),
        }
    }
}

impl fmt::Display for SolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cglisp" | "c-glisp" => Ok(SolverMode::Cglisp),
            "glisp" => Ok(SolverMode::Glisp),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub best_point: Vec<f64>,
    pub f: f64,
    pub feasible: bool,
    pub satisfactory: Option<bool>,
    pub wall_time_s: f64,
    /// `100·(f − f*)/|f*|`.
    pub pct_diff: f64,
    /// Samples of the active-learning phase, and how many of them were labeled feasible.
    pub active_samples: usize,
    pub active_feasible: usize,
    /// Set when the run failed; the other fields are then placeholders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    fn failed(seed: u64, error: Error, wall_time_s: f64) -> Self {
        RunRecord {
            seed,
            best_point: Vec::new(),
            f: f64::NAN,
            feasible: false,
            satisfactory: None,
            wall_time_s,
            pct_diff: f64::NAN,
            active_samples: 0,
            active_feasible: 0,
            error: Some(error.to_string()),
        }
    }

    pub fn within(&self, percent: f64) -> bool {
        self.feasible && self.pct_diff.abs() <= percent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub problem: BenchmarkProblem,
    pub mode: SolverMode,
    pub runs: usize,
    pub failed: usize,
    pub feasible: usize,
    pub satisfactory: Option<usize>,
    pub median_f: f64,
    pub median_pct_diff: f64,
    pub within_5pct: usize,
    pub fraction_within_5pct: f64,
    pub reference_optimum: f64,
    /// Share of all active-phase samples labeled feasible.
    pub active_feasible_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub summary: BenchSummary,
    pub runs: Vec<RunRecord>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Percent difference from the reference optimum.
pub fn pct_diff(f: f64, reference: f64) -> f64 {
    100.0 * (f - reference) / reference.abs()
}

/// Runs `runs` independent optimizations with seeds `base_seed + i`. `config`
/// supplies everything but the seed; `mode` is applied on top of it.
pub fn run_monte_carlo(
    problem: BenchmarkProblem,
    config: &RunConfig,
    runs: usize,
    base_seed: u64,
    mode: SolverMode,
) -> Result<BenchReport> {
    if runs == 0 {
        return Err(Error::InvalidConfig("at least one run is required".into()));
    }
    if config.domain != problem.domain()
        || config.has_satisfaction_oracle != problem.has_satisfaction()
    {
        return Err(Error::InvalidConfig(format!(
            "configuration does not match problem {problem}"
        )));
    }
    let reference = problem.reference_optimum();
    let records = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i);
            let mut cfg = mode.apply(config.clone());
            let n_init = cfg.n_init;
            cfg.seed = RngSeed(seed);
            cfg.pso.seed = RngSeed(seed);
            let started = Instant::now();
            let mut dm = problem;
            let outcome = run_headless(cfg, &mut dm).and_then(|result| {
                problem
                    .evaluate(&result.best_point)
                    .map(|eval| (result, eval))
            });
            let (result, eval) = match outcome {
                Ok(v) => v,
                Err(e) => return RunRecord::failed(seed, e, started.elapsed().as_secs_f64()),
            };
            let active = &result.dataset.g_labels[n_init.min(result.dataset.len())..];
            RunRecord {
                active_samples: active.len(),
                active_feasible: active.iter().filter(|&&g| g).count(),
                seed,
                best_point: result.best_point,
                f: eval.f,
                feasible: eval.feasible,
                satisfactory: eval.satisfactory,
                wall_time_s: started.elapsed().as_secs_f64(),
                pct_diff: pct_diff(eval.f, reference),
                error: None,
            }
        })
        .collect::<Vec<_>>();
    Ok(BenchReport {
        summary: summarize(problem, mode, &records),
        runs: records,
    })
}

pub fn summarize(problem: BenchmarkProblem, mode: SolverMode, runs: &[RunRecord]) -> BenchSummary {
    let ok = || runs.iter().filter(|r| r.error.is_none());
    let fs: Vec<f64> = ok().map(|r| r.f).collect();
    let pcts: Vec<f64> = ok().map(|r| r.pct_diff).collect();
    let within = runs.iter().filter(|r| r.within(SUCCESS_PERCENT)).count();
    BenchSummary {
        problem,
        mode,
        runs: runs.len(),
        feasible: runs.iter().filter(|r| r.feasible).count(),
        satisfactory: problem
            .has_satisfaction()
            .then(|| runs.iter().filter(|r| r.satisfactory == Some(true)).count()),
        median_f: median(&fs),
        median_pct_diff: median(&pcts),
        within_5pct: within,
        failed: runs.len() - fs.len(),
        fraction_within_5pct: within as f64 / runs.len().max(1) as f64,
        reference_optimum: problem.reference_optimum(),
        active_feasible_fraction: runs.iter().map(|r| r.active_feasible).sum::<usize>() as f64
            / runs.iter().map(|r| r.active_samples).sum::<usize>().max(1) as f64,
    }
}

impl BenchSummary {
    /// Feasible count, with the satisfactory count in brackets when tracked.
    pub fn feasible_cell(&self) -> String {
        match self.satisfactory {
            Some(s) => format!("{}/{} [{}]", self.feasible, self.runs, s),
            None => format!("{}/{}", self.feasible, self.runs),
        }
    }
}

impl fmt::Display for BenchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<8} {:<7} {:>12} {:>12} {:>12} {:>10} {:>10}",
            "problem", "mode", "feasible", "median f", "reference", "median %", "within 5%"
        )?;
        write!(
            f,
            "{:<8} {:<7} {:>12} {:>12.4} {:>12.4} {:>10.2} {:>10}",
            self.problem.name(),
            self.mode.name(),
            self.feasible_cell(),
            self.median_f,
            self.reference_optimum,
            self.median_pct_diff,
            format!("{}/{}", self.within_5pct, self.runs),
        )
    }
}

/// Counts of best objective values in `bins` equal-width bins.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    if values.is_empty() || bins == 0 {
        return Vec::new();
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo {
        (hi - lo) / bins as f64
    } else {
        1.0
    };
    let mut counts = vec![0; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + i as f64 * width, lo + (i + 1) as f64 * width, c))
        .collect()
}

impl BenchReport {
    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.runs.first().map_or(0, |r| r.best_point.len());
        let mut header = vec!["seed".to_string()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        header.extend(
            [
                "f",
                "feasible",
                "satisfactory",
                "pct_diff",
                "wall_time_s",
                "active_samples",
                "active_feasible",
                "error",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for r in &self.runs {
            let mut row = vec![r.seed.to_string()];
            row.extend(r.best_point.iter().map(|v| v.to_string()));
            row.push(r.f.to_string());
            row.push(u8::from(r.feasible).to_string());
            row.push(
                r.satisfactory
                    .map(|s| u8::from(s).to_string())
                    .unwrap_or_default(),
            );
            row.push(r.pct_diff.to_string());
            row.push(r.wall_time_s.to_string());
            row.push(r.active_samples.to_string());
            row.push(r.active_feasible.to_string());
            row.push(r.error.clone().unwrap_or_default());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn histogram_text(&self, bins: usize) -> String {
        let fs: Vec<f64> = self.runs.iter().map(|r| r.f).collect();
        let mut out = format!(
            "best f over {} runs ({} {})\n",
            self.runs.len(),
            self.summary.problem,
            self.summary.mode
        );
        for (lo, hi, c) in histogram(&fs, bins) {
            out.push_str(&format!(
                "[{lo:>10.4}, {hi:>10.4}) {c:>4} {}\n",
                "#".repeat(c)
            ));
        }
        out
    }

    /// Writes `<stem>_runs.csv`, `<stem>_summary.txt`, `<stem>_summary.json` and
    /// `<stem>_histogram.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let stem = format!("{}_{}", self.summary.problem, self.summary.mode);
        self.write_runs_csv(fs::File::create(dir.join(format!("{stem}_runs.csv")))?)?;
        fs::write(
            dir.join(format!("{stem}_summary.txt")),
            format!("{}\n", self.summary),
        )?;
        fs::write(
            dir.join(format!("{stem}_summary.json")),
            serde_json::to_string_pretty(&self.summary)?,
        )?;
        fs::write(
            dir.join(format!("{stem}_histogram.txt")),
            self.histogram_text(10),
        )?;
        Ok(())
    }
}
