//! Executes queued jobs one at a time on a background thread; each job
//! parallelizes internally over the configured worker count.

use std::sync::mpsc::{channel, Sender};
use std::sync::Arc;
use std::thread;

use chaos_core::lyapunov::{classify, spectrum_with_doubling};
use chaos_core::sampler::{json_row, sample_batch, write_csv, write_jsonl, SampleRecord};
use chaos_core::scan::bifurcation_scan;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::request::{prepare, JobKind};
use crate::store::JobStore;

#[derive(Clone)]
pub struct Runner {
    tx: Sender<String>,
}

impl Runner {
    pub fn start(store: Arc<JobStore>, workers: usize) -> Self {
        let (tx, rx) = channel::<String>();
        thread::Builder::new()
            .name("job-runner".into())
            .spawn(move || {
                for id in rx {
                    if let Err(e) = run_job(&store, &id, workers) {
                        let _ = store.fail(&id, e.detail);
                    }
                }
            })
            .expect("spawn job runner");
        Self { tx }
    }

    pub fn submit(&self, id: String) {
        // The receiver lives as long as the process.
        let _ = self.tx.send(id);
    }
}

pub fn run_job(store: &JobStore, id: &str, workers: usize) -> Result<(), ApiError> {
    let job = store.get(id)?;
    let req = &job.request;
    let prep = prepare(req)?;
    store.mark_running(id)?;
    let (csv, jsonl) = match req.kind {
        JobKind::SampleBatch => {
            let bx = prep.search_box.expect("validated");
            let k = req.k.expect("validated");
            let progress = |i: usize, rec: &SampleRecord| {
                store.record_partial(id, i, Value::Object(json_row(&bx, rec)));
            };
            let records = sample_batch(
                &prep.system,
                &prep.base,
                &bx,
                k,
                &req.mh_config,
                &req.lyap_config,
                workers,
                Some(&progress),
            )?;
            let mut csv = Vec::new();
            write_csv(&bx, &records, &mut csv)?;
            let mut jsonl = Vec::new();
            write_jsonl(&bx, &records, &mut jsonl)?;
            (csv, jsonl)
        }
        JobKind::Bifurcation => {
            let scan = req.scan.as_ref().expect("validated");
            let res = bifurcation_scan(&prep.system, &prep.base, scan, &req.integration, workers)?;
            let mut csv = Vec::new();
            res.write_csv(&mut csv)?;
            let mut jsonl = Vec::new();
            for c in &res.columns {
                serde_json::to_writer(&mut jsonl, &json!({
                    "param_value": c.param_value,
                    "observable": c.observable,
                    "times": if c.flag.is_some() { Vec::new() } else { res.times.clone() },
                    "values": c.values,
                    "flag": c.flag,
                }))
                .map_err(|e| ApiError::internal(e.to_string()))?;
                jsonl.push(b'\n');
            }
            (csv, jsonl)
        }
        JobKind::LyapunovSingle => {
            let div = prep.system.divergence_at(&prep.base)?;
            let res = spectrum_with_doubling(&prep.system, &prep.base, &req.lyap_config)?;
            let class = classify(div, &res, req.lyap_config.eps_zero);
            let class = serde_json::to_value(class).expect("enum");
            let csv = format!(
                "divergence,mle,t_final,doublings,converged,classification\n{},{},{},{},{},{}\n",
                div,
                res.mle,
                res.t_final,
                res.doublings,
                res.converged,
                class.as_str().unwrap_or_default()
            )
            .into_bytes();
            let mut doc = serde_json::to_value(&res).map_err(|e| ApiError::internal(e.to_string()))?;
            doc["divergence"] = json!(div);
            doc["classification"] = class;
            let mut jsonl = serde_json::to_vec(&doc).map_err(|e| ApiError::internal(e.to_string()))?;
            jsonl.push(b'\n');
            (csv, jsonl)
        }
    };
    store.finish(id, &csv, &jsonl)
}
