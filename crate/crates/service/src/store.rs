//! One JSON document per session, replaced atomically on every change.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Result, ServiceError};
use crate::session::{parse_session_document, Session};

#[derive(Debug, Clone)]
pub struct Store {
    dir: Option<PathBuf>,
}

fn io_err(context: &str, e: std::io::Error) -> ServiceError {
    ServiceError::Internal(format!("{context}: {e}"))
}

/// A file that could not be loaded, with the reason.
pub type Skipped = (PathBuf, String);

impl Store {
    /// Keeps sessions in memory only.
    pub fn memory() -> Self {
        Store { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err("creating data directory", e))?;
        Ok(Store { dir: Some(dir) })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Writes to a temporary file, syncs it and renames it over the old document.
    pub fn save(&self, session: &Session) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let bytes = serde_json::to_vec_pretty(session)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let target = dir.join(format!("{}.json", session.id));
        let tmp = dir.join(format!(".{}.json.tmp", session.id));
        let mut f = File::create(&tmp).map_err(|e| io_err("writing session", e))?;
        f.write_all(&bytes)
            .map_err(|e| io_err("writing session", e))?;
        f.sync_all().map_err(|e| io_err("syncing session", e))?;
        drop(f);
        fs::rename(&tmp, &target).map_err(|e| io_err("replacing session", e))?;
        if let Ok(d) = File::open(dir) {
            // directory fsync makes the rename durable; not supported everywhere
            let _ = d.sync_all();
        }
        Ok(())
    }

    /// Loads every valid session document; unreadable ones are reported and skipped.
    pub fn load_all(&self) -> Result<(Vec<Session>, Vec<Skipped>)> {
        let Some(dir) = &self.dir else {
            return Ok((Vec::new(), Vec::new()));
        };
        let mut sessions = Vec::new();
        let mut skipped = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| io_err("reading data directory", e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension().is_some_and(|x| x == "json")
                    && !p
                        .file_name()
                        .is_some_and(|n| n.to_string_lossy().starts_with('.'))
            })
            .collect();
        paths.sort();
        for path in paths {
            let loaded = fs::read(&path)
                .map_err(|e| io_err("reading session", e))
                .and_then(|b| parse_session_document(&b))
                .and_then(|s| {
                    if path.file_stem().is_some_and(|stem| *stem == *s.id) {
                        Ok(s)
                    } else {
                        Err(ServiceError::bad_request(
                            "file name does not match the session id",
                        ))
                    }
                });
            match loaded {
                Ok(s) => sessions.push(s),
                Err(e) => skipped.push((path, e.to_string())),
            }
        }
        Ok((sessions, skipped))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use cglisp_core::{BenchmarkProblem, RngSeed, RunConfig};

    #[test]
    fn save_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::at(dir.path()).unwrap();
        let cfg = RunConfig::for_problem(BenchmarkProblem::Chsc, RngSeed(1));
        let s = Session::create(
            "s1".into(),
            cfg,
            vec!["a".into(), "b".into()],
            vec!["m".into(), "s".into()],
        )
        .unwrap();
        store.save(&s).unwrap();
        store.save(&s).unwrap();
        fs::write(dir.path().join("junk.json"), b"{").unwrap();
        let (loaded, skipped) = store.load_all().unwrap();
        assert_eq!(loaded, vec![s]);
        assert_eq!(skipped.len(), 1);
        assert!(!dir.path().join(".s1.json.tmp").exists());
    }
}
