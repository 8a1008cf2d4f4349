//! Append-only JSONL record of every executed grid cell.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::combine::CombinationName;
use crate::metrics::EvalReport;

use super::RunnerError;

pub const STORE_FILE: &str = "store.jsonl";

/// Grid coordinates of one seed run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub corpus: String,
    pub trainer: String,
    pub combination: CombinationName,
    pub seed: u64,
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{}/{}/seed-{}",
            self.corpus,
            self.trainer,
            self.combination.slug(),
            self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: CellKey,
    /// 1 for the first run of a cell; forced reruns increment it.
    pub revision: u32,
    pub config_digest: String,
    pub train_size: usize,
    pub report: EvalReport,
    pub started: u64,
    pub finished: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub key: CellKey,
    pub config_digest: String,
    pub error: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StoreRecord {
    Run(RunRecord),
    Failure(FailureRecord),
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct Inner {
    file: File,
    records: Vec<StoreRecord>,
}

/// Appends go through one lock, so concurrent cells never interleave lines.
pub struct ResultStore {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl ResultStore {
    /// Opens (or creates) `<dir>/store.jsonl`. A final line cut short by an
    /// interrupted write is dropped from the file; any other unparsable line
    /// is an error.
    pub fn open(dir: &Path) -> Result<Self, RunnerError> {
        fs::create_dir_all(dir).map_err(|e| RunnerError::io(dir, e))?;
        let path = dir.join(STORE_FILE);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(RunnerError::io(&path, e)),
        };
        let mut records = Vec::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let mut needs_newline = false;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            offset += line.len();
            let complete = line.ends_with('\n');
            if line.trim().is_empty() {
                good_len = offset;
                continue;
            }
            match (serde_json::from_str::<StoreRecord>(line), complete) {
                (Ok(r), _) => {
                    records.push(r);
                    good_len = offset;
                    needs_newline = !complete;
                }
                (Err(_), false) => {
                    log::warn!("{}: dropping truncated last line", path.display());
                }
                (Err(e), true) => {
                    return Err(RunnerError::Store {
                        path: path.clone(),
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| RunnerError::io(&path, e))?;
        if good_len < text.len() {
            file.set_len(good_len as u64).map_err(|e| RunnerError::io(&path, e))?;
        }
        if needs_newline {
            (&file).write_all(b"\n").map_err(|e| RunnerError::io(&path, e))?;
        }
        Ok(ResultStore {
            path,
            inner: Mutex::new(Inner { file, records }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> Vec<StoreRecord> {
        self.inner.lock().expect("store lock").records.clone()
    }

    fn append(&self, make: impl FnOnce(&[StoreRecord]) -> StoreRecord) -> Result<StoreRecord, RunnerError> {
        let mut inner = self.inner.lock().expect("store lock");
        let record = make(&inner.records);
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        inner
            .file
            .write_all(line.as_bytes())
            .and_then(|_| inner.file.flush())
            .map_err(|e| RunnerError::io(&self.path, e))?;
        inner.records.push(record.clone());
        Ok(record)
    }

    pub fn append_run(
        &self,
        key: CellKey,
        config_digest: &str,
        train_size: usize,
        report: EvalReport,
        started: u64,
    ) -> Result<RunRecord, RunnerError> {
        let record = self.append(|records| {
            let revision = records
                .iter()
                .filter_map(|r| match r {
                    StoreRecord::Run(run) if run.key == key => Some(run.revision),
                    _ => None,
                })
                .max()
                .unwrap_or(0)
                + 1;
            StoreRecord::Run(RunRecord {
                key,
                revision,
                config_digest: config_digest.to_string(),
                train_size,
                report,
                started,
                finished: unix_now(),
            })
        })?;
        match record {
            StoreRecord::Run(r) => Ok(r),
            StoreRecord::Failure(_) => unreachable!(),
        }
    }

    pub fn append_failure(&self, key: CellKey, config_digest: &str, error: &str) -> Result<(), RunnerError> {
        self.append(|_| {
            StoreRecord::Failure(FailureRecord {
                key,
                config_digest: config_digest.to_string(),
                error: error.to_string(),
                timestamp: unix_now(),
            })
        })?;
        Ok(())
    }

    /// Latest revision of each completed cell, ordered by key.
    pub fn latest_runs(&self) -> BTreeMap<CellKey, RunRecord> {
        let inner = self.inner.lock().expect("store lock");
        let mut out: BTreeMap<CellKey, RunRecord> = BTreeMap::new();
        for r in &inner.records {
            if let StoreRecord::Run(run) = r {
                let newer = out.get(&run.key).is_none_or(|old| run.revision > old.revision);
                if newer {
                    out.insert(run.key.clone(), run.clone());
                }
            }
        }
        out
    }

    /// Every revision of one cell, oldest first.
    pub fn history(&self, key: &CellKey) -> Vec<RunRecord> {
        let inner = self.inner.lock().expect("store lock");
        inner
            .records
            .iter()
            .filter_map(|r| match r {
                StoreRecord::Run(run) if &run.key == key => Some(run.clone()),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{LabelSet, SentimentLabel::*};
    use crate::metrics::{confusion, evaluate};

    fn key(seed: u64) -> CellKey {
        CellKey {
            corpus: "c".into(),
            trainer: "reference".into(),
            combination: CombinationName::Baseline,
            seed,
        }
    }

    fn report() -> EvalReport {
        let labels = LabelSet::new(vec![Positive, Negative]).unwrap();
        evaluate(&confusion(&labels, &[Positive, Negative], &[Positive, Positive]).unwrap()).unwrap()
    }

    #[test]
    fn revisions_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = ResultStore::open(dir.path()).unwrap();
            s.append_run(key(0), "d", 2, report(), 0).unwrap();
            s.append_failure(key(1), "d", "boom").unwrap();
            let r = s.append_run(key(0), "d", 2, report(), 0).unwrap();
            assert_eq!(r.revision, 2);
        }
        let s = ResultStore::open(dir.path()).unwrap();
        assert_eq!(s.records().len(), 3);
        assert_eq!(s.history(&key(0)).len(), 2);
        let latest = s.latest_runs();
        assert_eq!(latest.len(), 1);
        assert_eq!(latest[&key(0)].revision, 2);
    }

    #[test]
    fn truncated_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        {
            let s = ResultStore::open(dir.path()).unwrap();
            s.append_run(key(0), "d", 2, report(), 0).unwrap();
        }
        let path = dir.path().join(STORE_FILE);
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("{\"kind\":\"run\",\"key\":{");
        fs::write(&path, &text).unwrap();
        let s = ResultStore::open(dir.path()).unwrap();
        assert_eq!(s.records().len(), 1);
        s.append_run(key(1), "d", 2, report(), 0).unwrap();
        drop(s);
        assert_eq!(ResultStore::open(dir.path()).unwrap().records().len(), 2);
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(STORE_FILE), "garbage\n{}\n").unwrap();
        assert!(matches!(
            ResultStore::open(dir.path()),
            Err(RunnerError::Store { line: 1, .. })
        ));
    }
}
