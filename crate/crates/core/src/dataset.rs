//! The samples, labels and pairwise preferences collected over a run.

use serde::{Deserialize, Serialize};

use crate::domain::{sq_dist, Domain};
use crate::error::{Error, Result};

/// Two samples closer than this (squared, unit-box coordinates) are the same point.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// Outcome of comparing a first decision vector against a second one.
///
/// Serialized as the integer `-1` (first is better), `0` (equivalent) or `1` (second is better).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Preference {
    Better,
    Tie,
    Worse,
}

impl Preference {
    pub fn as_i64(self) -> i64 {
        match self {
            Preference::Better => -1,
            Preference::Tie => 0,
            Preference::Worse => 1,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Preference::Better => Preference::Worse,
            Preference::Tie => Preference::Tie,
            Preference::Worse => Preference::Better,
        }
    }
}

impl TryFrom<i64> for Preference {
    type Error = String;

    fn try_from(v: i64) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Preference::Better),
            0 => Ok(Preference::Tie),
            1 => Ok(Preference::Worse),
            other => Err(format!("preference must be -1, 0 or 1, got {other}")),
        }
    }
}

impl From<Preference> for i64 {
    fn from(p: Preference) -> i64 {
        p.as_i64()
    }
}

/// Binary labels travel as the integers 0 and 1.
pub mod label {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(u8::from(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match i64::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "label must be 0 or 1, got {other}"
            ))),
        }
    }

    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<bool>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(b) => s.serialize_some(&u8::from(*b)),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<bool>, D::Error> {
            match Option::<i64>::deserialize(d)? {
                None => Ok(None),
                Some(0) => Ok(Some(false)),
                Some(1) => Ok(Some(true)),
                Some(other) => Err(serde::de::Error::custom(format!(
                    "label must be 0 or 1, got {other}"
                ))),
            }
        }
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[bool], s: S) -> Result<S::Ok, S::Error> {
            v.iter()
                .map(|b| u8::from(*b))
                .collect::<Vec<_>>()
                .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
            Vec::<i64>::deserialize(d)?
                .into_iter()
                .map(|v| match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(serde::de::Error::custom(format!(
                        "label must be 0 or 1, got {other}"
                    ))),
                })
                .collect()
        }
    }

    pub mod option_vec {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(v: &Option<Vec<bool>>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => s.serialize_some(&v.iter().map(|b| u8::from(*b)).collect::<Vec<_>>()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<bool>>, D::Error> {
            let Some(raw) = Option::<Vec<i64>>::deserialize(d)? else {
                return Ok(None);
            };
            raw.into_iter()
                .map(|v| match v {
                    0 => Ok(false),
                    1 => Ok(true),
                    other => Err(serde::de::Error::custom(format!(
                        "label must be 0 or 1, got {other}"
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
        }
    }
}

/// One answer from the decision-maker about a proposed sample.
///
/// `preference` compares the new sample (first argument) against the incumbent
/// and is absent for the very first sample, which has nothing to be compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryResponse {
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
}

impl QueryResponse {
    pub fn new(preference: Preference, feasible: bool, satisfactory: Option<bool>) -> Self {
        Self {
            preference: Some(preference),
            feasible,
            satisfactory,
        }
    }

    /// Labels-only answer for the first sample of a run.
    pub fn labels(feasible: bool, satisfactory: Option<bool>) -> Self {
        Self {
            preference: None,
            feasible,
            satisfactory,
        }
    }
}

/// Expressed preference `π(x_first, x_second) = outcome` between two stored samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(
    from = "(usize, usize, Preference)",
    into = "(usize, usize, Preference)"
)]
pub struct PreferenceRecord {
    pub first: usize,
    pub second: usize,
    pub outcome: Preference,
}

impl From<(usize, usize, Preference)> for PreferenceRecord {
    fn from((first, second, outcome): (usize, usize, Preference)) -> Self {
        Self {
            first,
            second,
            outcome,
        }
    }
}

impl From<PreferenceRecord> for (usize, usize, Preference) {
    fn from(p: PreferenceRecord) -> Self {
        (p.first, p.second, p.outcome)
    }
}

/// Samples with their feasibility/satisfaction labels and preferences.
///
/// Points are stored in problem units; `s_labels` is `None` when the run does
/// not collect satisfaction labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub domain: Domain,
    pub points: Vec<Vec<f64>>,
    #[serde(with = "label::vec")]
    pub g_labels: Vec<bool>,
    #[serde(with = "label::option_vec")]
    pub s_labels: Option<Vec<bool>>,
    pub preferences: Vec<PreferenceRecord>,
    pub best_index: Option<usize>,
}

impl Dataset {
    pub fn new(domain: Domain, track_satisfaction: bool) -> Self {
        Self {
            domain,
            points: Vec::new(),
            g_labels: Vec::new(),
            s_labels: track_satisfaction.then(Vec::new),
            preferences: Vec::new(),
            best_index: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tracks_satisfaction(&self) -> bool {
        self.s_labels.is_some()
    }

    pub fn best_point(&self) -> Option<&[f64]> {
        self.best_index.map(|i| self.points[i].as_slice())
    }

    /// All samples mapped into the unit box.
    pub fn unit_points(&self) -> Vec<Vec<f64>> {
        self.points
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        (v - self.domain.lower()[k])
                            / (self.domain.upper()[k] - self.domain.lower()[k])
                    })
                    .collect()
            })
            .collect()
    }

    /// Index of an existing sample coinciding with `x`, if any.
    pub fn find_duplicate(&self, x: &[f64]) -> Result<Option<usize>> {
        let u = self.domain.scale_to_unit(x)?;
        Ok(self
            .unit_points()
            .iter()
            .position(|p| sq_dist(p, &u) <= DUPLICATE_TOLERANCE))
    }

    /// Appends a sample, its labels and its comparison against the incumbent.
    ///
    /// The incumbent is replaced iff the new sample is strictly preferred.
    pub fn append_sample(&mut self, x: Vec<f64>, response: &QueryResponse) -> Result<()> {
        self.domain.check_contains(&x)?;
        if let Some(existing) = self.find_duplicate(&x)? {
            return Err(Error::DuplicateSample { existing });
        }
        match (self.s_labels.is_some(), response.satisfactory.is_some()) {
            (true, false) => {
                return Err(Error::InvalidResponse("satisfaction label required".into()))
            }
            (false, true) => {
                return Err(Error::InvalidResponse(
                    "satisfaction label given but satisfaction is not tracked".into(),
                ))
            }
            _ => {}
        }
        let n = self.len();
        let new_best = match self.best_index {
            None => {
                if matches!(response.preference, Some(p) if p != Preference::Tie) {
                    return Err(Error::InvalidResponse(
                        "first sample has no incumbent to be compared with".into(),
                    ));
                }
                Some(n)
            }
            Some(best) => {
                let outcome = response.preference.ok_or_else(|| {
                    Error::InvalidResponse("preference against the incumbent required".into())
                })?;
                self.preferences.push(PreferenceRecord {
                    first: n,
                    second: best,
                    outcome,
                });
                Some(if outcome == Preference::Better {
                    n
                } else {
                    best
                })
            }
        };
        self.points.push(x);
        self.g_labels.push(response.feasible);
        if let (Some(s), Some(v)) = (self.s_labels.as_mut(), response.satisfactory) {
            s.push(v);
        }
        self.best_index = new_best;
        Ok(())
    }

    /// Checks every structural invariant; used after deserializing untrusted input.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let bad = |m: String| Err(Error::InvalidDataset(m));
        if self.g_labels.len() != n {
            return bad(format!(
                "{} feasibility labels for {n} points",
                self.g_labels.len()
            ));
        }
        if let Some(s) = &self.s_labels {
            if s.len() != n {
                return bad(format!("{} satisfaction labels for {n} points", s.len()));
            }
        }
        for (i, p) in self.points.iter().enumerate() {
            if let Err(e) = self.domain.check_contains(p) {
                return bad(format!("point {i}: {e}"));
            }
        }
        let unit = self.unit_points();
        for i in 0..n {
            for j in 0..i {
                if sq_dist(&unit[i], &unit[j]) <= DUPLICATE_TOLERANCE {
                    return bad(format!("points {j} and {i} coincide"));
                }
            }
        }
        for (h, p) in self.preferences.iter().enumerate() {
            if p.first == p.second || p.first >= n || p.second >= n {
                return bad(format!(
                    "preference {h} has invalid indices ({}, {})",
                    p.first, p.second
                ));
            }
        }
        if n >= 2 && self.preferences.is_empty() {
            return bad("at least one preference required once two points exist".into());
        }
        if self.preferences.len() > n * n.saturating_sub(1) / 2 {
            return bad(format!(
                "{} preferences exceed C({n}, 2)",
                self.preferences.len()
            ));
        }
        match (self.best_index, n) {
            (None, 0) => {}
            (Some(b), n) if b < n => {}
            (b, n) => return bad(format!("best_index {b:?} invalid for {n} points")),
        }
        Ok(())
    }

    /// Parses and validates a dataset document.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ds: Dataset = serde_json::from_slice(bytes)?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization is infallible")
    }
}
