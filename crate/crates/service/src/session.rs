use std::time::{SystemTime, UNIX_EPOCH};

use cglisp_core::{Optimizer, QueryResponse, RunConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// Persisted state of one interactive run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub id: String,
    pub names: Vec<String>,
    pub units: Vec<String>,
    /// Unix time in milliseconds.
    pub created_at: u64,
    pub updated_at: u64,
    pub optimizer: Optimizer,
}

pub fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

impl Session {
    /// Starts the run and computes its first query.
    pub fn create(
        id: String,
        config: RunConfig,
        names: Vec<String>,
        units: Vec<String>,
    ) -> Result<Self> {
        let mut optimizer = Optimizer::start(config)?;
        optimizer.next_query()?;
        let now = now_millis();
        Ok(Session {
            id,
            names,
            units,
            created_at: now,
            updated_at: now,
            optimizer,
        })
    }

    /// Applies an answer and computes the following query, without touching `self`
    /// until both succeed.
    pub fn answered(&self, response: QueryResponse, iteration: Option<usize>) -> Result<Self> {
        let pending = self.optimizer.pending_query().ok_or_else(|| {
            ServiceError::Conflict("session is finished; no query pending".into())
        })?;
        if let Some(it) = iteration {
            if it != pending.iteration {
                return Err(ServiceError::Conflict(format!(
                    "response is for iteration {it} but iteration {} is pending",
                    pending.iteration
                )));
            }
        }
        let mut next = self.clone();
        next.optimizer.submit(response)?;
        if !next.optimizer.is_finished() {
            next.optimizer.next_query()?;
        }
        next.updated_at = now_millis().max(self.updated_at);
        Ok(next)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.optimizer.config().domain.dim();
        if self.id.is_empty()
            || !self
                .id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-')
        {
            return Err(ServiceError::bad_request("session id must be alphanumeric"));
        }
        if self.names.len() != dim || self.units.len() != dim {
            return Err(ServiceError::bad_request(
                "names/units do not match the dimension",
            ));
        }
        self.optimizer.validate()?;
        if !self.optimizer.is_finished() && self.optimizer.pending_query().is_none() {
            return Err(ServiceError::bad_request(
                "unfinished session without a pending query",
            ));
        }
        Ok(())
    }
}

/// Parses and validates a stored session document.
pub fn parse_session_document(bytes: &[u8]) -> Result<Session> {
    let session: Session = serde_json::from_slice(bytes)
        .map_err(|e| ServiceError::bad_request(format!("malformed session: {e}")))?;
    session.validate()?;
    Ok(session)
}

#[cfg(test)]
mod tests {
    use super::*;
    use cglisp_core::{BenchmarkProblem, DecisionMaker, RngSeed};

    fn session() -> Session {
        let mut cfg = RunConfig::for_problem(BenchmarkProblem::Mbc, RngSeed(2));
        cfg.pso.iterations = 30;
        Session::create(
            "abc-1".into(),
            cfg,
            vec!["x".into(), "y".into()],
            vec![String::new(); 2],
        )
        .unwrap()
    }

    #[test]
    fn create_has_first_query() {
        let s = session();
        let q = s.optimizer.pending_query().unwrap();
        assert_eq!(q.iteration, 0);
        assert!(q.incumbent.is_none());
    }

    #[test]
    fn answering_advances_and_guards_iteration() {
        let s = session();
        let mut dm = BenchmarkProblem::Mbc;
        let q = s.optimizer.pending_query().unwrap().clone();
        let r = dm.respond(&q).unwrap();
        assert!(matches!(
            s.answered(r, Some(1)),
            Err(ServiceError::Conflict(_))
        ));
        let next = s.answered(r, Some(0)).unwrap();
        assert_eq!(next.optimizer.pending_query().unwrap().iteration, 1);
        // the original is untouched
        assert_eq!(s.optimizer.dataset().len(), 0);
        assert!(matches!(
            next.answered(r, Some(0)),
            Err(ServiceError::Conflict(_))
        ));
    }

    #[test]
    fn document_roundtrip_and_validation() {
        let s = session();
        let json = serde_json::to_vec(&s).unwrap();
        assert_eq!(parse_session_document(&json).unwrap(), s);
        let mut bad = s.clone();
        bad.names.pop();
        assert!(parse_session_document(&serde_json::to_vec(&bad).unwrap()).is_err());
        let mut bad = s;
        bad.id = "../etc".into();
        assert!(parse_session_document(&serde_json::to_vec(&bad).unwrap()).is_err());
        assert!(parse_session_document(b"{}").is_err());
    }
}
