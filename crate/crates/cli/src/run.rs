use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chaos_core::lyapunov::{classify, spectrum_with_doubling, Classification};
use chaos_core::sampler::{sample_batch, write_csv, write_jsonl, Phase};
use chaos_core::scan::{bifurcation_scan, export_trajectory};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::spec::{base_sample, search_box, RunSpec};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<chaos_core::Error> for CliError {
    fn from(e: chaos_core::Error) -> Self {
        match e {
            chaos_core::Error::Blowup(_) => CliError::Runtime(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Successful completion; `indeterminate` selects exit code 3.
pub struct Outcome {
    pub indeterminate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub started_at: DateTime<Utc>,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub run: RunSpec,
    pub seed: Option<u64>,
    pub timings: Timings,
    pub outputs: Vec<String>,
}

pub fn manifest_path(out: &str) -> PathBuf {
    PathBuf::from(format!("{out}.manifest.json"))
}

fn create(path: &str) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("cannot write {path}: {e}")))
}

/// Runs a resolved spec, writing outputs and a manifest next to them.
/// Human-readable summaries go to `report`.
pub fn execute(spec: &RunSpec, report: &mut dyn Write) -> Result<Outcome, CliError> {
    let started_at = Utc::now();
    let clock = Instant::now();
    let mut outputs = Vec::new();
    let mut indeterminate = false;
    match spec {
        RunSpec::Lyapunov(r) => {
            let system = r.system.build()?;
            r.lyapunov.validate()?;
            let sample = base_sample(&system, &r.set, None)?;
            let divergence = system.divergence_at(&sample)?;
            let res = spectrum_with_doubling(&system, &sample, &r.lyapunov)?;
            let class = classify(divergence, &res, r.lyapunov.eps_zero);
            indeterminate = class == Classification::Indeterminate;
            let mut doc = serde_json::to_value(&res).expect("serializable");
            doc["divergence"] = divergence.into();
            doc["classification"] = serde_json::to_value(class).expect("serializable");
            let text = serde_json::to_string_pretty(&doc).expect("serializable");
            writeln!(report, "{text}")?;
            if let Some(out) = &r.out {
                std::fs::write(out, text + "\n")
                    .map_err(|e| CliError::Runtime(format!("cannot write {out}: {e}")))?;
                outputs.push(out.clone());
            }
        }
        RunSpec::Sample(r) => {
            let system = r.system.build()?;
            let bx = search_box(&r.search_box)?;
            let base = base_sample(&system, &r.set, Some(&bx))?;
            let recs = sample_batch(&system, &base, &bx, r.k, &r.mh, &r.lyapunov, r.workers, None)?;
            let mut w = create(&r.out)?;
            write_csv(&bx, &recs, &mut w)?;
            w.flush()?;
            let jsonl = jsonl_path(&r.out);
            let mut w = create(&jsonl)?;
            write_jsonl(&bx, &recs, &mut w)?;
            w.flush()?;
            outputs.push(r.out.clone());
            outputs.push(jsonl);
            let count = |p: Phase| recs.iter().filter(|x| x.phase == p).count();
            writeln!(
                report,
                "k={} success={} phase2_failed={} phase1_failed={}",
                recs.len(),
                count(Phase::Success),
                count(Phase::Phase2Failed),
                count(Phase::Phase1Failed)
            )?;
        }
        RunSpec::Bifurcate(r) => {
            let system = r.system.build()?;
            let base = base_sample(&system, &r.set, None)?;
            let res = bifurcation_scan(&system, &base, &r.scan, &r.integration, r.workers)?;
            let mut w = create(&r.out)?;
            if r.json {
                serde_json::to_writer(&mut w, &res).map_err(|e| CliError::Runtime(e.to_string()))?;
                writeln!(w)?;
            } else {
                res.write_csv(&mut w)?;
            }
            w.flush()?;
            outputs.push(r.out.clone());
            let flagged = res.columns.iter().filter(|c| c.flag.is_some()).count();
            writeln!(report, "columns={} flagged={}", res.columns.len(), flagged)?;
        }
        RunSpec::Trajectory(r) => {
            let system = r.system.build()?;
            let sample = base_sample(&system, &r.set, None)?;
            let mut w = create(&r.out)?;
            let traj = export_trajectory(&system, &sample, r.t_end, &r.integration, r.stride, &mut w)?;
            w.flush()?;
            outputs.push(r.out.clone());
            writeln!(
                report,
                "rows={} terminated={}",
                traj.times.len(),
                if traj.terminated_early { traj.termination_reason.as_str() } else { "no" }
            )?;
        }
    }
    let manifest = RunManifest {
        tool: "chaos".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        run: spec.clone(),
        seed: spec.seed(),
        timings: Timings {
            started_at,
            elapsed_seconds: clock.elapsed().as_secs_f64(),
        },
        outputs,
    };
    if let Some(out) = spec.out() {
        let path = manifest_path(out);
        let text = serde_json::to_string_pretty(&manifest).expect("serializable");
        std::fs::write(&path, text + "\n")
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(Outcome { indeterminate })
}

pub fn jsonl_path(out: &str) -> String {
    let p = Path::new(out);
    p.with_extension("jsonl").to_string_lossy().into_owned()
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad manifest {}: {e}", path.display())))
}
