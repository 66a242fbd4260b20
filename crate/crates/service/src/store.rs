//! Jobs and their on-disk layout: one directory per job holding
//! `request.json`, `status.json`, `results.csv` and `results.jsonl`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ApiError;
use crate::request::{JobKind, JobRequest};

pub const REQUEST_FILE: &str = "request.json";
pub const STATUS_FILE: &str = "status.json";
pub const RESULTS_CSV: &str = "results.csv";
pub const RESULTS_JSONL: &str = "results.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub kind: JobKind,
    pub request: JobRequest,
    pub status: JobStatus,
    pub progress: Progress,
    pub created_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Entry {
    job: Mutex<Job>,
    /// Rows finished so far, by record index, while the job runs.
    partial: Mutex<Vec<Option<Value>>>,
}

pub struct JobStore {
    root: PathBuf,
    jobs: RwLock<BTreeMap<String, Arc<Entry>>>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

impl JobStore {
    /// Opens (creating if needed) a data directory. Returns the ids of jobs
    /// that were queued or running when the previous process stopped; they
    /// are reset to queued and must be resubmitted.
    pub fn open(root: impl Into<PathBuf>) -> io::Result<(Self, Vec<String>)> {
        let root = root.into();
        fs::create_dir_all(root.join("jobs"))?;
        let mut jobs = BTreeMap::new();
        let mut pending = Vec::new();
        for dir in fs::read_dir(root.join("jobs"))? {
            let dir = dir?.path();
            let Ok(text) = fs::read_to_string(dir.join(STATUS_FILE)) else {
                continue;
            };
            let mut job: Job = serde_json::from_str(&text).map_err(|e| {
                io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", dir.display()))
            })?;
            if matches!(job.status, JobStatus::Queued | JobStatus::Running) {
                job.status = JobStatus::Queued;
                job.progress.completed = 0;
                write_atomic(&dir.join(STATUS_FILE), &to_json(&job))?;
                pending.push((job.created_at, job.id.clone()));
            }
            let total = job.progress.total;
            jobs.insert(
                job.id.clone(),
                Arc::new(Entry {
                    job: Mutex::new(job),
                    partial: Mutex::new(vec![None; total]),
                }),
            );
        }
        pending.sort();
        Ok((
            Self {
                root,
                jobs: RwLock::new(jobs),
            },
            pending.into_iter().map(|(_, id)| id).collect(),
        ))
    }

    pub fn job_dir(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(id)
    }

    fn entry(&self, id: &str) -> Result<Arc<Entry>, ApiError> {
        self.jobs
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("no job `{id}`")))
    }

    pub fn create(&self, request: JobRequest, total: usize, parent_id: Option<String>) -> Result<Job, ApiError> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let job = Job {
            id: id.clone(),
            kind: request.kind,
            request,
            status: JobStatus::Queued,
            progress: Progress { completed: 0, total },
            created_at: Utc::now(),
            finished_at: None,
            parent_id,
            error: None,
        };
        let dir = self.job_dir(&id);
        fs::create_dir_all(&dir)?;
        write_atomic(&dir.join(REQUEST_FILE), &to_json(&job.request))?;
        write_atomic(&dir.join(STATUS_FILE), &to_json(&job))?;
        self.jobs.write().unwrap().insert(
            id,
            Arc::new(Entry {
                job: Mutex::new(job.clone()),
                partial: Mutex::new(vec![None; total]),
            }),
        );
        Ok(job)
    }

    pub fn get(&self, id: &str) -> Result<Job, ApiError> {
        Ok(self.entry(id)?.job.lock().unwrap().clone())
    }

    pub fn list(&self) -> Vec<Job> {
        let mut v: Vec<Job> = self
            .jobs
            .read()
            .unwrap()
            .values()
            .map(|e| e.job.lock().unwrap().clone())
            .collect();
        v.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        v
    }

    fn update<F: FnOnce(&mut Job)>(&self, id: &str, f: F) -> Result<(), ApiError> {
        let entry = self.entry(id)?;
        let mut job = entry.job.lock().unwrap();
        f(&mut job);
        write_atomic(&self.job_dir(id).join(STATUS_FILE), &to_json(&*job))?;
        Ok(())
    }

    pub fn mark_running(&self, id: &str) -> Result<(), ApiError> {
        let entry = self.entry(id)?;
        entry.partial.lock().unwrap().iter_mut().for_each(|r| *r = None);
        self.update(id, |j| {
            j.status = JobStatus::Running;
            j.progress.completed = 0;
        })
    }

    /// Records one finished row; progress only moves forward.
    pub fn record_partial(&self, id: &str, index: usize, row: Value) {
        let Ok(entry) = self.entry(id) else { return };
        let done = {
            let mut partial = entry.partial.lock().unwrap();
            if index >= partial.len() {
                partial.resize(index + 1, None);
            }
            partial[index] = Some(row);
            partial.iter().filter(|r| r.is_some()).count()
        };
        let mut job = entry.job.lock().unwrap();
        if job.status == JobStatus::Running && done > job.progress.completed {
            job.progress.completed = done;
        }
    }

    /// Writes the result files, then marks the job done.
    pub fn finish(&self, id: &str, csv: &[u8], jsonl: &[u8]) -> Result<(), ApiError> {
        let dir = self.job_dir(id);
        write_atomic(&dir.join(RESULTS_CSV), csv)?;
        write_atomic(&dir.join(RESULTS_JSONL), jsonl)?;
        self.update(id, |j| {
            j.status = JobStatus::Done;
            j.progress.completed = j.progress.total;
            j.finished_at = Some(Utc::now());
        })?;
        self.entry(id)?.partial.lock().unwrap().clear();
        Ok(())
    }

    pub fn fail(&self, id: &str, message: String) -> Result<(), ApiError> {
        self.update(id, |j| {
            j.status = JobStatus::Failed;
            j.finished_at = Some(Utc::now());
            j.error = Some(message);
        })
    }

    /// Result rows: the persisted file once done, otherwise the rows
    /// finished so far in index order.
    pub fn rows(&self, id: &str) -> Result<Vec<Value>, ApiError> {
        let entry = self.entry(id)?;
        let status = entry.job.lock().unwrap().status;
        if status == JobStatus::Done {
            let text = fs::read_to_string(self.job_dir(id).join(RESULTS_JSONL))?;
            return text
                .lines()
                .map(|l| serde_json::from_str(l).map_err(|e| ApiError::internal(e.to_string())))
                .collect();
        }
        let rows = entry.partial.lock().unwrap().iter().flatten().cloned().collect();
        Ok(rows)
    }

    pub fn results_csv(&self, id: &str) -> Result<Vec<u8>, ApiError> {
        let job = self.get(id)?;
        if job.status != JobStatus::Done {
            return Err(ApiError::conflict(format!("job `{id}` is {:?}", job.status).to_lowercase()));
        }
        Ok(fs::read(self.job_dir(id).join(RESULTS_CSV))?)
    }
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}
