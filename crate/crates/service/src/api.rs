//! Request and response bodies of the HTTP API, and their parsers.

use cglisp_core::dataset::label;
use cglisp_core::optimizer::IterationRecord;
use cglisp_core::{
    AcquisitionConfig, BenchmarkProblem, Dataset, Domain, Optimizer, Phase, Preference,
    QueryResponse, RbfKind, RngSeed, RunConfig, SolverMode,
};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::session::Session;

/// Body of `POST /sessions`.
///
/// Either give `lower`/`upper` (plus optional tuning fields), name a bundled
/// benchmark `problem`, or pass a complete `config`.
#[derive(Debug, Clone, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionRequest {
    #[serde(default)]
    pub lower: Option<Vec<f64>>,
    #[serde(default)]
    pub upper: Option<Vec<f64>>,
    #[serde(default)]
    pub names: Option<Vec<String>>,
    #[serde(default)]
    pub units: Option<Vec<String>>,
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub n_init: Option<usize>,
    #[serde(default)]
    pub satisfaction: Option<bool>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub delta_e: Option<f64>,
    #[serde(default)]
    pub rbf_kind: Option<RbfKind>,
    #[serde(default)]
    pub mode: Option<SolverMode>,
    #[serde(default)]
    pub problem: Option<BenchmarkProblem>,
    #[serde(default)]
    pub config: Option<RunConfig>,
}

pub fn parse_create_request(bytes: &[u8]) -> Result<CreateSessionRequest> {
    serde_json::from_slice(bytes)
        .map_err(|e| ServiceError::bad_request(format!("malformed body: {e}")))
}

impl CreateSessionRequest {
    /// Resolves the request into a validated configuration plus dimension names and units.
    pub fn into_config(self) -> Result<(RunConfig, Vec<String>, Vec<String>)> {
        let sources = [
            self.config.is_some(),
            self.problem.is_some(),
            self.lower.is_some() || self.upper.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(ServiceError::bad_request(
                "give exactly one of `config`, `problem` or `lower`/`upper`",
            ));
        }
        let seed = RngSeed(self.seed.unwrap_or(0));
        let mut cfg = if let Some(cfg) = self.config {
            if self.n_max.is_some()
                || self.n_init.is_some()
                || self.satisfaction.is_some()
                || self.seed.is_some()
            {
                return Err(ServiceError::bad_request(
                    "`config` cannot be combined with n_max, n_init, satisfaction or seed",
                ));
            }
            cfg
        } else if let Some(problem) = self.problem {
            let mut cfg = RunConfig::for_problem(problem, seed);
            if let Some(s) = self.satisfaction {
                if s != problem.has_satisfaction() {
                    return Err(ServiceError::field(
                        "satisfaction",
                        "fixed by the chosen problem",
                    ));
                }
            }
            if let Some(n_max) = self.n_max {
                resize_budget(&mut cfg, n_max, self.n_init)?;
            } else if let Some(n_init) = self.n_init {
                cfg.n_init = n_init;
            }
            cfg
        } else {
            let lower = self
                .lower
                .ok_or_else(|| ServiceError::field("lower", "lower bounds required"))?;
            let upper = self
                .upper
                .ok_or_else(|| ServiceError::field("upper", "upper bounds required"))?;
            let domain = Domain::new(lower, upper)
                .map_err(|e| ServiceError::field("bounds", e.to_string()))?;
            let n_max = self
                .n_max
                .ok_or_else(|| ServiceError::field("n_max", "n_max required"))?;
            if n_max < 3 {
                return Err(ServiceError::field("n_max", "n_max must be at least 3"));
            }
            let mut cfg = RunConfig::new(domain, n_max, self.satisfaction.unwrap_or(false), seed);
            if let Some(n_init) = self.n_init {
                resize_budget(&mut cfg, n_max, Some(n_init))?;
            }
            cfg
        };
        if let Some(d) = self.delta_e {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(ServiceError::field(
                    "delta_e",
                    "must be finite and nonnegative",
                ));
            }
            cfg.set_delta_e(d);
        }
        if let Some(k) = self.rbf_kind {
            cfg.rbf_kind = k;
        }
        if let Some(mode) = self.mode {
            cfg = mode.apply(cfg);
        }
        if cfg.n_init < 2 || cfg.n_init >= cfg.n_max {
            return Err(ServiceError::field(
                "n_init",
                format!(
                    "need 2 <= n_init < n_max, got n_init={} n_max={}",
                    cfg.n_init, cfg.n_max
                ),
            ));
        }
        cfg.validate()?;

        let dim = cfg.domain.dim();
        let names = labels_for("names", self.names, dim, |k| format!("x{}", k + 1))?;
        let units = labels_for("units", self.units, dim, |_| String::new())?;
        Ok((cfg, names, units))
    }
}

fn resize_budget(cfg: &mut RunConfig, n_max: usize, n_init: Option<usize>) -> Result<()> {
    if n_max < 3 {
        return Err(ServiceError::field("n_max", "n_max must be at least 3"));
    }
    let n_init = n_init.unwrap_or_else(|| cglisp_core::sampling::default_n_init(n_max));
    if n_init < 2 || n_init >= n_max {
        return Err(ServiceError::field(
            "n_init",
            format!("need 2 <= n_init < n_max, got n_init={n_init} n_max={n_max}"),
        ));
    }
    let constrained = cfg.acquisition.delta_g_default > 0.0;
    let delta_e = cfg.acquisition.delta_e;
    cfg.n_max = n_max;
    cfg.n_init = n_init;
    cfg.fit = cglisp_core::FitConfig::for_budget(n_max);
    cfg.epsilon_recalibration_steps =
        cglisp_core::optimizer::default_recalibration_steps(n_init, n_max);
    cfg.acquisition = if constrained {
        AcquisitionConfig::constrained(delta_e, n_max)
    } else {
        AcquisitionConfig::unconstrained(delta_e, n_max)
    };
    Ok(())
}

fn labels_for(
    field: &str,
    given: Option<Vec<String>>,
    dim: usize,
    default: impl Fn(usize) -> String,
) -> Result<Vec<String>> {
    match given {
        Some(v) if v.len() != dim => Err(ServiceError::field(
            field,
            format!("expected {dim} entries, got {}", v.len()),
        )),
        Some(v) => Ok(v),
        None => Ok((0..dim).map(default).collect()),
    }
}

/// Body of `POST /sessions/{id}/response`.
///
/// `iteration`, when present, must match the pending query; a stale or repeated
/// submission is then rejected as a conflict.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseBody {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preference: Option<Preference>,
    #[serde(with = "label")]
    pub feasible: bool,
    #[serde(
        default,
        with = "label::option",
        skip_serializing_if = "Option::is_none"
    )]
    pub satisfactory: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
}

impl ResponseBody {
    pub fn response(&self) -> QueryResponse {
        QueryResponse {
            preference: self.preference,
            feasible: self.feasible,
            satisfactory: self.satisfactory,
        }
    }
}

pub fn parse_response_body(bytes: &[u8]) -> Result<ResponseBody> {
    serde_json::from_slice(bytes)
        .map_err(|e| ServiceError::bad_request(format!("malformed body: {e}")))
}

/// Answers expected for the pending query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Required {
    pub preference: bool,
    pub feasible: bool,
    pub satisfactory: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryStatus {
    Pending,
    Completed,
}

/// Body of `GET /sessions/{id}/query` and of a successful response post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryView {
    pub session_id: String,
    pub status: QueryStatus,
    pub phase: Phase,
    /// Samples answered so far.
    pub answered: usize,
    pub n_max: usize,
    pub names: Vec<String>,
    pub units: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<Vec<f64>>,
    pub incumbent: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub required: Option<Required>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_point: Option<Vec<f64>>,
}

impl QueryView {
    pub fn of(session: &Session) -> Self {
        let opt = &session.optimizer;
        let pending = opt.pending_query();
        let base = QueryView {
            session_id: session.id.clone(),
            status: QueryStatus::Completed,
            phase: opt.phase(),
            answered: opt.dataset().len(),
            n_max: opt.config().n_max,
            names: session.names.clone(),
            units: session.units.clone(),
            iteration: None,
            candidate: None,
            incumbent: opt.dataset().best_point().map(<[f64]>::to_vec),
            required: None,
            best_point: None,
        };
        match pending {
            Some(q) => QueryView {
                status: QueryStatus::Pending,
                iteration: Some(q.iteration),
                candidate: Some(q.candidate.clone()),
                incumbent: q.incumbent.clone(),
                required: Some(Required {
                    preference: q.incumbent.is_some(),
                    feasible: true,
                    satisfactory: opt.config().has_satisfaction_oracle,
                }),
                ..base
            },
            None => QueryView {
                best_point: opt.dataset().best_point().map(<[f64]>::to_vec),
                ..base
            },
        }
    }
}

/// One entry of `GET /sessions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub phase: Phase,
    pub answered: usize,
    pub n_max: usize,
    pub dimension: usize,
    pub names: Vec<String>,
    pub created_at: u64,
    pub updated_at: u64,
}

impl SessionSummary {
    pub fn of(session: &Session) -> Self {
        let opt = &session.optimizer;
        SessionSummary {
            id: session.id.clone(),
            phase: opt.phase(),
            answered: opt.dataset().len(),
            n_max: opt.config().n_max,
            dimension: opt.config().domain.dim(),
            names: session.names.clone(),
            created_at: session.created_at,
            updated_at: session.updated_at,
        }
    }
}

/// Probability surfaces on a regular lattice of a 2-D domain.
///
/// `feasibility[j][i]` is the value at `(x[i], y[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub resolution: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub feasibility: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfaction: Option<Vec<Vec<f64>>>,
}

/// Body of `GET /sessions/{id}/state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateView {
    pub id: String,
    pub names: Vec<String>,
    pub units: Vec<String>,
    pub phase: Phase,
    pub config: RunConfig,
    pub dataset: Dataset,
    pub incumbent: Option<Vec<f64>>,
    pub history: Vec<IterationRecord>,
    pub epsilon: f64,
    pub delta_g: f64,
    pub delta_s: f64,
    pub pending_query: Option<cglisp_core::Query>,
    pub created_at: u64,
    pub updated_at: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

pub const GRID_RESOLUTION: usize = 50;

impl StateView {
    pub fn of(session: &Session) -> Result<Self> {
        let opt: &Optimizer = &session.optimizer;
        Ok(StateView {
            id: session.id.clone(),
            names: session.names.clone(),
            units: session.units.clone(),
            phase: opt.phase(),
            config: opt.config().clone(),
            dataset: opt.dataset().clone(),
            incumbent: opt.dataset().best_point().map(<[f64]>::to_vec),
            history: opt.history().to_vec(),
            epsilon: opt.epsilon(),
            delta_g: opt.acquisition().delta_g,
            delta_s: opt.acquisition().delta_s,
            pending_query: opt.pending_query().cloned(),
            created_at: session.created_at,
            updated_at: session.updated_at,
            grid: grid(opt.dataset(), GRID_RESOLUTION)?,
        })
    }
}

/// IDW surfaces of the feasibility (and satisfaction) labels; only for 2-D
/// domains with at least one sample.
pub fn grid(dataset: &Dataset, resolution: usize) -> Result<Option<Grid>> {
    if dataset.domain.dim() != 2 || dataset.is_empty() || resolution < 2 {
        return Ok(None);
    }
    let unit = dataset.unit_points();
    let g = cglisp_core::idw::IdwModel::new(unit.clone(), &dataset.g_labels)?;
    let s = match &dataset.s_labels {
        Some(l) => Some(cglisp_core::idw::IdwModel::new(unit, l)?),
        None => None,
    };
    let ticks: Vec<f64> = (0..resolution)
        .map(|i| i as f64 / (resolution - 1) as f64)
        .collect();
    let surface = |m: &cglisp_core::idw::IdwModel| -> Vec<Vec<f64>> {
        ticks
            .iter()
            .map(|&v| ticks.iter().map(|&u| m.predict(&[u, v])).collect())
            .collect()
    };
    let (lo, hi) = (dataset.domain.lower(), dataset.domain.upper());
    Ok(Some(Grid {
        resolution,
        x: ticks.iter().map(|t| lo[0] + t * (hi[0] - lo[0])).collect(),
        y: ticks.iter().map(|t| lo[1] + t * (hi[1] - lo[1])).collect(),
        feasibility: surface(&g),
        satisfaction: s.as_ref().map(surface),
    }))
}
