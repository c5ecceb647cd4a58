//! The optimization loop: an initial Latin hypercube phase followed by active
//! learning, one decision-maker query per sample.
//!
//! [`Optimizer`] is a resumable state machine. `next_query` proposes (and
//! caches) the pending sample, `submit` records the answer. The whole state
//! serializes, so an interrupted session resumes at the same pending query.
//! Randomness is drawn from per-iteration sub-streams of the run seed, which
//! keeps every proposal a pure function of the seed and the answers so far.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{adapt_deltas, Acquisition, AcquisitionConfig};
use crate::dataset::{Dataset, QueryResponse, DUPLICATE_TOLERANCE};
use crate::domain::{sq_dist, Domain};
use crate::error::{Error, Result};
use crate::idw::IdwModel;
use crate::oracles::BenchmarkProblem;
use crate::pso::{self, PsoParams};
use crate::sampling::{default_n_init, latin_hypercube, RngSeed};
use crate::surrogate::{self, calibrate_epsilon, default_epsilon_grid, FitConfig, RbfKind};

const LHS_STREAM: u64 = 0;
const PSO_STREAM: u64 = 1 << 32;
const CV_STREAM: u64 = 2 << 32;
const PERTURB_STREAM: u64 = 3 << 32;

/// Half-width (unit box) of the jitter applied to a proposal that duplicates a sample.
pub const DUPLICATE_PERTURBATION: f64 = 1e-3;

/// Cross-validation folds used to recalibrate the RBF shape parameter.
pub const DEFAULT_CV_FOLDS: usize = 3;

/// Recalibration at `n_init` and at one, two and three quarters of the active phase.
pub fn default_recalibration_steps(n_init: usize, n_max: usize) -> Vec<usize> {
    let span = n_max.saturating_sub(n_init) as f64;
    (0..4)
        .map(|k| (n_init as f64 + k as f64 * span / 4.0).round() as usize)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub domain: Domain,
    pub n_max: usize,
    pub n_init: usize,
    pub acquisition: AcquisitionConfig,
    pub fit: FitConfig,
    pub rbf_kind: RbfKind,
    pub epsilon_initial: f64,
    pub epsilon_recalibration_steps: Vec<usize>,
    pub cv_folds: usize,
    pub has_satisfaction_oracle: bool,
    pub pso: PsoParams,
    pub seed: RngSeed,
}

impl RunConfig {
    /// Defaults derived from the evaluation budget: a quarter of it for the
    /// initial design, `σ = 1/n_max`, `δ_E = 1`, inverse quadratic RBF with `ε = 1`.
    pub fn new(domain: Domain, n_max: usize, has_satisfaction_oracle: bool, seed: RngSeed) -> Self {
        let n_init = default_n_init(n_max);
        let pso = PsoParams::for_dimension(domain.dim(), seed);
        Self {
            domain,
            n_max,
            n_init,
            acquisition: AcquisitionConfig::constrained(1.0, n_max),
            fit: FitConfig::for_budget(n_max),
            rbf_kind: RbfKind::InverseQuadratic,
            epsilon_initial: 1.0,
            epsilon_recalibration_steps: default_recalibration_steps(n_init, n_max),
            cv_folds: DEFAULT_CV_FOLDS,
            has_satisfaction_oracle,
            pso,
            seed,
        }
    }

    /// Solver settings used for each benchmark.
    pub fn for_problem(problem: BenchmarkProblem, seed: RngSeed) -> Self {
        let n_max = match problem {
            BenchmarkProblem::Chc => 100,
            BenchmarkProblem::Mbc | BenchmarkProblem::Chsc => 50,
        };
        let mut cfg = Self::new(problem.domain(), n_max, problem.has_satisfaction(), seed);
        if problem == BenchmarkProblem::Chc {
            cfg.set_delta_e(2.0);
        }
        cfg
    }

    /// Resets the exploration weight and the penalty defaults tied to it.
    pub fn set_delta_e(&mut self, delta_e: f64) {
        let mode = self.acquisition.exploration;
        let constrained =
            self.acquisition.delta_g_default > 0.0 || self.acquisition.delta_s_default > 0.0;
        self.acquisition = if constrained {
            AcquisitionConfig::constrained(delta_e, self.n_max)
        } else {
            AcquisitionConfig::unconstrained(delta_e, self.n_max)
        };
        self.acquisition.exploration = mode;
    }

    /// Switches to the unconstrained ablation: no penalty terms, plain exploration.
    pub fn unconstrained(mut self) -> Self {
        self.acquisition = AcquisitionConfig::unconstrained(self.acquisition.delta_e, self.n_max);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_init < 2 || self.n_init >= self.n_max {
            return bad(format!(
                "need 2 <= n_init < n_max, got n_init={} n_max={}",
                self.n_init, self.n_max
            ));
        }
        if let Some(s) = self
            .epsilon_recalibration_steps
            .iter()
            .find(|&&s| s < self.n_init || s > self.n_max)
        {
            return bad(format!(
                "recalibration step {s} outside [{}, {}]",
                self.n_init, self.n_max
            ));
        }
        if self.acquisition.n_max != self.n_max {
            return bad("acquisition n_max differs from run n_max".into());
        }
        if !(self.epsilon_initial > 0.0 && self.epsilon_initial.is_finite()) {
            return bad(format!(
                "epsilon_initial must be positive, got {}",
                self.epsilon_initial
            ));
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2".into());
        }
        self.acquisition.validate()?;
        self.fit.validate()?;
        self.pso.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    InitialSampling,
    ActiveLearning,
    Finished,
}

/// A sample awaiting the decision-maker's answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    /// Zero-based index the candidate will take in the dataset.
    pub iteration: usize,
    pub candidate: Vec<f64>,
    pub incumbent: Option<Vec<f64>>,
    pub phase: Phase,
}

/// Weights in force when a sample was proposed, plus its answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub point: Vec<f64>,
    pub response: QueryResponse,
    pub delta_g: f64,
    pub delta_s: f64,
    pub epsilon: f64,
    pub recalibrated: bool,
    /// Incumbent after the answer was applied.
    pub incumbent_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Pending {
    query: Query,
    delta_g: f64,
    delta_s: f64,
    epsilon: f64,
    recalibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    config: RunConfig,
    dataset: Dataset,
    initial_design: Vec<Vec<f64>>,
    acquisition: AcquisitionConfig,
    epsilon: f64,
    pending: Option<Pending>,
    history: Vec<IterationRecord>,
}

impl Optimizer {
    /// Validates `config` and draws the initial design.
    pub fn start(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let unit = latin_hypercube(
            config.n_init,
            config.domain.dim(),
            config.seed.derive(LHS_STREAM),
        )?;
        let initial_design = unit
            .iter()
            .map(|u| config.domain.unscale(u))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dataset: Dataset::new(config.domain.clone(), config.has_satisfaction_oracle),
            acquisition: config.acquisition,
            epsilon: config.epsilon_initial,
            config,
            initial_design,
            pending: None,
            history: Vec::new(),
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn acquisition(&self) -> &AcquisitionConfig {
        &self.acquisition
    }

    pub fn phase(&self) -> Phase {
        let n = self.dataset.len();
        if n >= self.config.n_max {
            Phase::Finished
        } else if n < self.config.n_init {
            Phase::InitialSampling
        } else {
            Phase::ActiveLearning
        }
    }

    pub fn is_finished(&self) -> bool {
        self.phase() == Phase::Finished
    }

    pub fn pending_query(&self) -> Option<&Query> {
        self.pending.as_ref().map(|p| &p.query)
    }

    /// The sample to submit next; computed on first call and cached until answered.
    pub fn next_query(&mut self) -> Result<Query> {
        if let Some(p) = &self.pending {
            return Ok(p.query.clone());
        }
        let n = self.dataset.len();
        if n >= self.config.n_max {
            return Err(Error::Completed);
        }
        let phase = self.phase();
        let pending = if phase == Phase::InitialSampling {
            Pending {
                query: Query {
                    iteration: n,
                    candidate: self.initial_design[n].clone(),
                    incumbent: self.dataset.best_point().map(<[f64]>::to_vec),
                    phase,
                },
                delta_g: self.acquisition.delta_g,
                delta_s: self.acquisition.delta_s,
                epsilon: self.epsilon,
                recalibrated: false,
            }
        } else {
            self.propose()?
        };
        let query = pending.query.clone();
        self.pending = Some(pending);
        Ok(query)
    }

    fn propose(&mut self) -> Result<Pending> {
        let cfg = &self.config;
        let n = self.dataset.len();
        let unit = self.dataset.unit_points();
        let best = self
            .dataset
            .best_index
            .ok_or(Error::Empty("no incumbent"))?;

        let g_model = IdwModel::new(unit.clone(), &self.dataset.g_labels)?;
        let s_model = match &self.dataset.s_labels {
            Some(labels) => Some(IdwModel::new(unit.clone(), labels)?),
            None => None,
        };
        // penalty weights first, then the RBF shape parameter
        self.acquisition = adapt_deltas(&g_model, s_model.as_ref(), &self.acquisition);

        let mut recalibrated = false;
        if cfg.epsilon_recalibration_steps.contains(&n)
            && self.dataset.preferences.len() >= cfg.cv_folds
        {
            self.epsilon = calibrate_epsilon(
                &self.dataset,
                cfg.rbf_kind,
                &default_epsilon_grid(self.epsilon),
                cfg.cv_folds,
                &cfg.fit,
                cfg.seed.derive(CV_STREAM + n as u64),
            )?;
            recalibrated = true;
        }

        let fitted = surrogate::fit(&self.dataset, cfg.rbf_kind, self.epsilon, &cfg.fit)?;
        let acq = Acquisition::new(
            &fitted,
            &g_model,
            s_model.as_ref(),
            &unit,
            best,
            self.acquisition,
        )?;
        let unit_box = Domain::unit(cfg.domain.dim())?;
        let params = PsoParams {
            seed: cfg.pso.seed.derive(PSO_STREAM + n as u64),
            ..cfg.pso
        };
        let found = pso::minimize(|x| acq.evaluate(x), &unit_box, &params)?;

        let u = self.separate_from_samples(found.point, &unit)?;
        let mut candidate = cfg.domain.unscale(&u)?;
        cfg.domain.clamp(&mut candidate);
        Ok(Pending {
            query: Query {
                iteration: n,
                candidate,
                incumbent: Some(self.dataset.points[best].clone()),
                phase: Phase::ActiveLearning,
            },
            delta_g: self.acquisition.delta_g,
            delta_s: self.acquisition.delta_s,
            epsilon: self.epsilon,
            recalibrated,
        })
    }

    /// Jitters a unit-box proposal until it is distinct from every sample.
    fn separate_from_samples(&self, mut u: Vec<f64>, unit: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.dataset.len() as u64;
        let mut rng = self.config.seed.derive(PERTURB_STREAM + n).rng();
        let origin = u.clone();
        for _ in 0..1000 {
            let distinct = unit.iter().all(|p| sq_dist(p, &u) > DUPLICATE_TOLERANCE)
                && self
                    .dataset
                    .find_duplicate(&self.config.domain.unscale(&u)?)?
                    .is_none();
            if distinct {
                return Ok(u);
            }
            for (v, o) in u.iter_mut().zip(&origin) {
                *v = (o + rng.random_range(-DUPLICATE_PERTURBATION..=DUPLICATE_PERTURBATION))
                    .clamp(0.0, 1.0);
            }
        }
        Err(Error::DuplicateSample {
            existing: unit
                .iter()
                .position(|p| sq_dist(p, &u) <= DUPLICATE_TOLERANCE)
                .unwrap_or(0),
        })
    }

    /// Records the answer to the pending query.
    pub fn submit(&mut self, response: QueryResponse) -> Result<()> {
        let pending = self.pending.as_ref().ok_or(Error::NoPendingQuery)?;
        if pending.query.incumbent.is_none() && response.preference.is_some() {
            return Err(Error::InvalidResponse(
                "first sample has no incumbent; send labels only".into(),
            ));
        }
        self.dataset
            .append_sample(pending.query.candidate.clone(), &response)?;
        let pending = self.pending.take().expect("checked above");
        self.history.push(IterationRecord {
            iteration: pending.query.iteration,
            point: pending.query.candidate,
            response,
            delta_g: pending.delta_g,
            delta_s: pending.delta_s,
            epsilon: pending.epsilon,
            recalibrated: pending.recalibrated,
            incumbent_index: self.dataset.best_index.expect("nonempty after append"),
        });
        Ok(())
    }

    /// Consistency check for state restored from storage.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.dataset.validate()?;
        let bad = |m: &str| Err(Error::InvalidDataset(m.to_string()));
        if self.dataset.domain != self.config.domain {
            return bad("dataset domain differs from the configured domain");
        }
        if self.dataset.tracks_satisfaction() != self.config.has_satisfaction_oracle {
            return bad("satisfaction tracking differs from the configuration");
        }
        if self.dataset.len() > self.config.n_max {
            return bad("more samples than the evaluation budget");
        }
        if self.initial_design.len() != self.config.n_init
            || self
                .initial_design
                .iter()
                .any(|p| !self.config.domain.contains(p))
        {
            return bad("initial design does not match the configuration");
        }
        if self.history.len() != self.dataset.len()
            || self
                .history
                .iter()
                .enumerate()
                .any(|(i, h)| h.iteration != i)
        {
            return bad("history does not match the dataset");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        self.acquisition.validate()?;
        if self.acquisition.delta_g_default != self.config.acquisition.delta_g_default
            || self.acquisition.delta_s_default != self.config.acquisition.delta_s_default
        {
            return bad("acquisition defaults differ from the configuration");
        }
        if let Some(p) = &self.pending {
            let q = &p.query;
            if q.iteration != self.dataset.len()
                || !self.config.domain.contains(&q.candidate)
                || q.incumbent.as_deref() != self.dataset.best_point()
            {
                return bad("pending query is inconsistent with the dataset");
            }
        }
        Ok(())
    }

    pub fn into_result(self) -> RunResult {
        RunResult {
            best_point: self
                .dataset
                .best_point()
                .map(<[f64]>::to_vec)
                .unwrap_or_default(),
            dataset: self.dataset,
            history: self.history,
        }
    }

    pub fn result(&self) -> RunResult {
        self.clone().into_result()
    }
}

/// Anything able to answer queries.
pub trait DecisionMaker {
    fn respond(&mut self, query: &Query) -> Result<QueryResponse>;
}

impl DecisionMaker for BenchmarkProblem {
    fn respond(&mut self, query: &Query) -> Result<QueryResponse> {
        self.synthetic_response(&query.candidate, query.incumbent.as_deref())
    }
}

impl<F: FnMut(&Query) -> Result<QueryResponse>> DecisionMaker for F {
    fn respond(&mut self, query: &Query) -> Result<QueryResponse> {
        self(query)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best_point: Vec<f64>,
    pub dataset: Dataset,
    pub history: Vec<IterationRecord>,
}

impl RunResult {
    /// One row per sample: iteration, coordinates, answer, weights, incumbent.
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let dim = self.dataset.domain.dim();
        let mut header = vec!["iteration".to_string()];
        header.extend((0..dim).map(|k| format!("x{k}")));
        header.extend(
            [
                "preference",
                "feasible",
                "satisfactory",
                "delta_G",
                "delta_S",
                "epsilon",
                "incumbent_index",
            ]
            .map(String::from),
        );
        w.write_record(&header)?;
        for h in &self.history {
            let mut row = vec![h.iteration.to_string()];
            row.extend(h.point.iter().map(|v| v.to_string()));
            row.push(
                h.response
                    .preference
                    .map(|p| p.as_i64().to_string())
                    .unwrap_or_default(),
            );
            row.push(u8::from(h.response.feasible).to_string());
            row.push(
                h.response
                    .satisfactory
                    .map(|s| u8::from(s).to_string())
                    .unwrap_or_default(),
            );
            row.push(h.delta_g.to_string());
            row.push(h.delta_s.to_string());
            row.push(h.epsilon.to_string());
            row.push(h.incumbent_index.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Drives a run to completion against `decision_maker`.
pub fn run_headless<D: DecisionMaker + ?Sized>(
    config: RunConfig,
    decision_maker: &mut D,
) -> Result<RunResult> {
    let mut opt = Optimizer::start(config)?;
    loop {
        let query = match opt.next_query() {
            Ok(q) => q,
            Err(Error::Completed) => break,
            Err(e) => return Err(e),
        };
        let response = decision_maker.respond(&query)?;
        opt.submit(response)?;
    }
    Ok(opt.into_result())
}
