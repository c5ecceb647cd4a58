//! Acquisition function trading off the preference surrogate, exploration and
//! the estimated probabilities of infeasibility and unsatisfaction.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::idw::{self, IdwModel};
use crate::surrogate::PreferenceSurrogate;

/// Below this the surrogate is treated as flat over the samples.
pub const FLAT_RANGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplorationMode {
    /// Distance-to-incumbent weighting blended into the plain term over the run.
    #[default]
    Blended,
    /// Plain inverse-distance exploration.
    Plain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub delta_e: f64,
    pub delta_g_default: f64,
    pub delta_s_default: f64,
    pub delta_g: f64,
    pub delta_s: f64,
    pub n_max: usize,
    pub exploration: ExplorationMode,
}

impl AcquisitionConfig {
    /// Constrained defaults: `δ_G = δ_E` and `δ_S = δ_G / 2`.
    pub fn constrained(delta_e: f64, n_max: usize) -> Self {
        Self::with_defaults(
            delta_e,
            delta_e,
            delta_e / 2.0,
            n_max,
            ExplorationMode::Blended,
        )
    }

    /// Unconstrained ablation: penalty weights zero, plain exploration.
    pub fn unconstrained(delta_e: f64, n_max: usize) -> Self {
        Self::with_defaults(delta_e, 0.0, 0.0, n_max, ExplorationMode::Plain)
    }

    pub fn with_defaults(
        delta_e: f64,
        delta_g_default: f64,
        delta_s_default: f64,
        n_max: usize,
        exploration: ExplorationMode,
    ) -> Self {
        Self {
            delta_e,
            delta_g_default,
            delta_s_default,
            delta_g: delta_g_default,
            delta_s: delta_s_default,
            n_max,
            exploration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta_e", self.delta_e),
            ("delta_g_default", self.delta_g_default),
            ("delta_s_default", self.delta_s_default),
            ("delta_g", self.delta_g),
            ("delta_s", self.delta_s),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if self.delta_g > self.delta_g_default || self.delta_s > self.delta_s_default {
            return Err(Error::InvalidConfig(
                "current deltas exceed their defaults".into(),
            ));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidConfig("n_max must be positive".into()));
        }
        Ok(())
    }
}

/// Range of the surrogate over the samples, or 1 when it is flat.
pub fn surrogate_range(surrogate: &PreferenceSurrogate, unit_points: &[Vec<f64>]) -> f64 {
    let (lo, hi) = unit_points
        .iter()
        .map(|x| surrogate.predict(x))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(v), hi.max(v))
        });
    let range = hi - lo;
    if range.is_finite() && range >= FLAT_RANGE {
        range
    } else {
        1.0
    }
}

/// Acquisition prepared for repeated evaluation at one iteration.
#[derive(Debug, Clone)]
pub struct Acquisition<'a> {
    surrogate: &'a PreferenceSurrogate,
    g_model: &'a IdwModel,
    s_model: Option<&'a IdwModel>,
    anchors: &'a [Vec<f64>],
    config: AcquisitionConfig,
    range: f64,
    incumbent_sum: f64,
    progress: f64,
}

impl<'a> Acquisition<'a> {
    /// `anchors` are the unit-box samples; `best_index` the incumbent.
    pub fn new(
        surrogate: &'a PreferenceSurrogate,
        g_model: &'a IdwModel,
        s_model: Option<&'a IdwModel>,
        anchors: &'a [Vec<f64>],
        best_index: usize,
        config: AcquisitionConfig,
    ) -> Result<Self> {
        let n = anchors.len();
        if n == 0 {
            return Err(Error::Empty("acquisition needs at least one sample"));
        }
        if best_index >= n {
            return Err(Error::InvalidConfig(format!(
                "best index {best_index} >= {n}"
            )));
        }
        if n > config.n_max {
            return Err(Error::InvalidConfig(format!(
                "{n} samples exceed n_max {}",
                config.n_max
            )));
        }
        Ok(Self {
            surrogate,
            g_model,
            s_model,
            anchors,
            config,
            range: surrogate_range(surrogate, anchors),
            incumbent_sum: idw::incumbent_sum(anchors, best_index),
            progress: n as f64 / config.n_max as f64,
        })
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn exploration(&self, x: &[f64]) -> f64 {
        match self.config.exploration {
            ExplorationMode::Blended => {
                idw::blended(x, self.anchors, self.incumbent_sum, self.progress)
            }
            ExplorationMode::Plain => idw::exploration_z(x, self.anchors),
        }
    }

    /// `f̂/ΔF̂ − δ_E z + δ_G (1 − Ĝ) + δ_S (1 − Ŝ)`; the last term is dropped
    /// without a satisfaction model.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let c = &self.config;
        let mut a = self.surrogate.predict(x) / self.range;
        if c.delta_e != 0.0 {
            a -= c.delta_e * self.exploration(x);
        }
        if c.delta_g != 0.0 {
            a += c.delta_g * (1.0 - self.g_model.predict(x));
        }
        if let Some(s) = self.s_model {
            if c.delta_s != 0.0 {
                a += c.delta_s * (1.0 - s.predict(x));
            }
        }
        a
    }
}

/// One-shot evaluation of the acquisition at a unit-box point `x`.
pub fn evaluate(
    x: &[f64],
    surrogate: &PreferenceSurrogate,
    g_model: &IdwModel,
    s_model: Option<&IdwModel>,
    dataset: &Dataset,
    config: &AcquisitionConfig,
) -> Result<f64> {
    let anchors = dataset.unit_points();
    let best = dataset
        .best_index
        .ok_or(Error::Empty("dataset has no incumbent"))?;
    Ok(Acquisition::new(surrogate, g_model, s_model, &anchors, best, *config)?.evaluate(x))
}

/// Shrinks the penalty weights by the leave-one-out error of their surrogates.
pub fn adapt_deltas(
    g_model: &IdwModel,
    s_model: Option<&IdwModel>,
    config: &AcquisitionConfig,
) -> AcquisitionConfig {
    let mut out = *config;
    if g_model.len() < 2 {
        return out;
    }
    out.delta_g =
        ((1.0 - g_model.loo_error()) * config.delta_g_default).clamp(0.0, config.delta_g_default);
    if let Some(s) = s_model {
        out.delta_s =
            ((1.0 - s.loo_error()) * config.delta_s_default).clamp(0.0, config.delta_s_default);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::RbfKind;

    fn surrogate(centers: Vec<Vec<f64>>, beta: Vec<f64>) -> PreferenceSurrogate {
        PreferenceSurrogate {
            kind: RbfKind::InverseQuadratic,
            epsilon: 1.0,
            centers,
            beta,
        }
    }

    #[test]
    fn range_examples() {
        let pts = vec![vec![0.1], vec![0.5], vec![0.9]];
        assert_eq!(
            surrogate_range(&surrogate(pts.clone(), vec![0.0; 3]), &pts),
            1.0
        );
        assert_eq!(
            surrogate_range(&surrogate(vec![vec![0.2]], vec![3.0]), &[vec![0.2]]),
            1.0
        );
        // values {-1, 0, 3}: a surrogate whose kernel is ~identity on far-apart centers
        let far = vec![vec![0.0], vec![100.0], vec![200.0]];
        let s = surrogate(far.clone(), vec![-1.0, 0.0, 3.0]);
        assert!((surrogate_range(&s, &far) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn pure_exploitation() {
        let pts = vec![vec![0.1, 0.1], vec![0.6, 0.4], vec![0.3, 0.9]];
        let s = surrogate(pts.clone(), vec![1.0, -0.5, 0.25]);
        let g = IdwModel::new(pts.clone(), &[true, false, true]).unwrap();
        let cfg = AcquisitionConfig::with_defaults(0.0, 0.0, 0.0, 10, ExplorationMode::Blended);
        let acq = Acquisition::new(&s, &g, None, &pts, 1, cfg).unwrap();
        let x = [0.42, 0.77];
        assert_eq!(acq.evaluate(&x), s.predict(&x) / acq.range());
    }

    #[test]
    fn value_at_feasible_sample() {
        let pts = vec![vec![0.1, 0.1], vec![0.6, 0.4], vec![0.3, 0.9]];
        let s = surrogate(pts.clone(), vec![1.0, -0.5, 0.25]);
        let g = IdwModel::new(pts.clone(), &[true, false, true]).unwrap();
        let sat = IdwModel::new(pts.clone(), &[false, true, true]).unwrap();
        let cfg = AcquisitionConfig::constrained(1.0, 10);
        let acq = Acquisition::new(&s, &g, Some(&sat), &pts, 1, cfg).unwrap();
        let a = acq.evaluate(&pts[0]);
        assert_eq!(a, s.predict(&pts[0]) / acq.range() + cfg.delta_s);
    }

    #[test]
    fn four_term_value_matches_straight_line() {
        let pts = vec![vec![0.1, 0.1], vec![0.6, 0.4], vec![0.3, 0.9]];
        let beta = [1.0, -0.5, 0.25];
        let s = surrogate(pts.clone(), beta.to_vec());
        let gl = [true, false, true];
        let sl = [false, true, true];
        let g = IdwModel::new(pts.clone(), &gl).unwrap();
        let sat = IdwModel::new(pts.clone(), &sl).unwrap();
        let cfg = AcquisitionConfig::with_defaults(1.3, 1.1, 0.4, 12, ExplorationMode::Blended);
        let best = 1;
        let acq = Acquisition::new(&s, &g, Some(&sat), &pts, best, cfg).unwrap();
        let x = [0.72, 0.18];

        // independent evaluation from the raw formulas
        let d = |a: &[f64], b: &[f64]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let f = |y: &[f64]| -> f64 {
            (0..3)
                .map(|k| beta[k] / (1.0 + d(y, &pts[k]).powi(2)))
                .sum()
        };
        let fv: Vec<f64> = pts.iter().map(|p| f(p)).collect();
        let range = fv.iter().cloned().fold(f64::MIN, f64::max)
            - fv.iter().cloned().fold(f64::MAX, f64::min);
        let w: Vec<f64> = pts.iter().map(|p| (-d(&x, p)).exp() / d(&x, p)).collect();
        let wsum: f64 = w.iter().sum();
        let ghat: f64 = (0..3)
            .map(|i| w[i] / wsum * if gl[i] { 1.0 } else { 0.0 })
            .sum();
        let shat: f64 = (0..3)
            .map(|i| w[i] / wsum * if sl[i] { 1.0 } else { 0.0 })
            .sum();
        let sx: f64 = pts.iter().map(|p| 1.0 / d(&x, p)).sum();
        let sbest: f64 = [0usize, 2]
            .iter()
            .map(|&i| 1.0 / d(&pts[best], &pts[i]))
            .sum();
        let t = 3.0 / 12.0;
        let z = (1.0 - t) * (sbest / sx).atan() + t * (1.0 / sx).atan();
        let expected = f(&x) / range - 1.3 * z + 1.1 * (1.0 - ghat) + 0.4 * (1.0 - shat);
        assert!((acq.evaluate(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn adaptation_rules() {
        let pts = vec![vec![0.0], vec![1.0]];
        let cfg = AcquisitionConfig::constrained(1.0, 10);
        // LOO predictions [0, 1] against labels [1, 0]: clipped to 1
        let g = IdwModel::new(pts.clone(), &[true, false]).unwrap();
        assert_eq!(adapt_deltas(&g, None, &cfg).delta_g, 0.0);
        // perfect LOO predictions keep the defaults
        let g = IdwModel::new(pts.clone(), &[true, true]).unwrap();
        let s = IdwModel::new(pts.clone(), &[false, false]).unwrap();
        let out = adapt_deltas(&g, Some(&s), &cfg);
        assert_eq!(
            (out.delta_g, out.delta_s),
            (cfg.delta_g_default, cfg.delta_s_default)
        );
        // a single sample leaves the config untouched
        let one = IdwModel::new(vec![vec![0.5]], &[false]).unwrap();
        assert_eq!(adapt_deltas(&one, None, &cfg), cfg);
    }

    #[test]
    fn validation() {
        assert!(AcquisitionConfig::constrained(1.0, 50).validate().is_ok());
        let mut c = AcquisitionConfig::constrained(1.0, 50);
        c.delta_g = 2.0;
        assert!(c.validate().is_err());
        c = AcquisitionConfig::constrained(-1.0, 50);
        assert!(c.validate().is_err());
    }
}
