//! Annealed Metropolis-Hastings sampling of the chaotic regime.
//!
//! The walk targets `f_α(s) = 1/(1+e^{−α·score(s)})` while `α` ramps from 0
//! to `alpha_max`. A chaotic sample is found in two phases: first on the
//! negated divergence, then on the largest Lyapunov exponent with `D < 0`
//! enforced as a hard constraint.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{invalid, Result};
use crate::lyapunov::{classify, spectrum_with_doubling, Classification, LyapunovConfig, LyapunovResult};
use crate::model::{BoundBox, SamplePoint, SearchBox, SystemDefinition};

/// Overflow-safe logistic function of `alpha·l`.
pub fn sigmoid(l: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.5;
    }
    let z = alpha * l;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln sigmoid(l, alpha)`, finite wherever the score is.
pub fn log_sigmoid(l: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return -std::f64::consts::LN_2;
    }
    let z = alpha * l;
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSchedule {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MHConfig {
    pub steps: usize,
    pub alpha_max: f64,
    pub alpha_schedule: AlphaSchedule,
    /// Proposal standard deviation as a fraction of each box width.
    pub proposal_scale: f64,
    pub seed: u64,
    pub phase1_steps: usize,
}

impl Default for MHConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            alpha_max: 20.0,
            alpha_schedule: AlphaSchedule::Linear,
            proposal_scale: 0.05,
            seed: 0,
            phase1_steps: 300,
        }
    }
}

impl MHConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(invalid("steps must be at least 1"));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max.is_finite()) {
            return Err(invalid("alpha_max must be positive"));
        }
        if !(self.proposal_scale > 0.0 && self.proposal_scale <= 1.0) {
            return Err(invalid("proposal_scale must lie in (0, 1]"));
        }
        Ok(())
    }

    /// `α(k)` for a walk of `steps` steps.
    pub fn alpha(&self, k: usize, steps: usize) -> f64 {
        match self.alpha_schedule {
            AlphaSchedule::Linear => self.alpha_max * k as f64 / steps.max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WalkDiagnostics {
    pub steps: usize,
    pub accepted: usize,
    pub rejected_out_of_box: usize,
    pub rejected_constraint: usize,
    pub rejected_metropolis: usize,
    pub score_evaluations: usize,
}

/// A walk's end point with the cached score there.
#[derive(Debug, Clone)]
pub struct WalkEnd<E> {
    pub position: Vec<f64>,
    pub eval: E,
    pub diagnostics: WalkDiagnostics,
}

/// Metropolis walk over box coordinates on the target `sigmoid(score, α(k))`.
///
/// `evaluate` maps a position to an arbitrary payload and `score` extracts
/// the real-valued score from it; the payload of the current position is
/// kept so expensive evaluations happen once per accepted move. Non-finite
/// scores count as density 0. A walker sitting on zero density accepts any
/// in-box proposal.
pub fn mh_walk<E, F, S, C>(
    bx: &SearchBox,
    cfg: &MHConfig,
    steps: usize,
    start: Option<(Vec<f64>, E)>,
    rng: &mut ChaCha8Rng,
    mut evaluate: F,
    score: S,
    mut hard_constraint: Option<C>,
) -> WalkEnd<E>
where
    F: FnMut(&[f64]) -> E,
    S: Fn(&E) -> f64,
    C: FnMut(&[f64]) -> bool,
{
    let mut diag = WalkDiagnostics {
        steps,
        ..WalkDiagnostics::default()
    };
    let (mut x, mut ex) = match start {
        Some(s) => s,
        None => {
            let x: Vec<f64> = bx.coords.iter().map(|c| c.lo + (c.hi - c.lo) * rng.random::<f64>()).collect();
            diag.score_evaluations += 1;
            let e = evaluate(&x);
            (x, e)
        }
    };
    let sigma: Vec<f64> = bx.coords.iter().map(|c| cfg.proposal_scale * c.width()).collect();
    let mut proposal = vec![0.0; x.len()];
    for k in 1..=steps {
        let alpha = cfg.alpha(k, steps);
        for ((p, &xi), &s) in proposal.iter_mut().zip(&x).zip(&sigma) {
            let z: f64 = rng.sample(StandardNormal);
            *p = xi + s * z;
        }
        let u: f64 = rng.random();
        if !bx.contains(&proposal) {
            diag.rejected_out_of_box += 1;
            continue;
        }
        if let Some(c) = hard_constraint.as_mut() {
            if !c(&proposal) {
                diag.rejected_constraint += 1;
                continue;
            }
        }
        diag.score_evaluations += 1;
        let ep = evaluate(&proposal);
        let log_current = log_density(score(&ex), alpha);
        let log_prop = log_density(score(&ep), alpha);
        let accept = if log_current == f64::NEG_INFINITY {
            true
        } else {
            u.ln() < log_prop - log_current
        };
        if accept {
            diag.accepted += 1;
            x.copy_from_slice(&proposal);
            ex = ep;
        } else {
            diag.rejected_metropolis += 1;
        }
    }
    WalkEnd {
        position: x,
        eval: ex,
        diagnostics: diag,
    }
}

fn log_density(score: f64, alpha: f64) -> f64 {
    if score.is_nan() {
        f64::NEG_INFINITY
    } else {
        log_sigmoid(score, alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Phase1Failed,
    Phase2Failed,
    Success,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Phase1Failed => "phase1_failed",
            Phase::Phase2Failed => "phase2_failed",
            Phase::Success => "success",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub point: SamplePoint,
    /// Box coordinates of `point`, in box order.
    pub coords: Vec<f64>,
    pub divergence: f64,
    /// Absent when phase 1 failed and no spectrum was computed.
    pub lyapunov: Option<LyapunovResult>,
    pub accepted_steps: usize,
    pub phase: Phase,
    pub seed: u64,
}

#[derive(Debug, Clone)]
struct Phase2Eval {
    divergence: f64,
    lyapunov: Option<LyapunovResult>,
}

impl Phase2Eval {
    fn score(&self) -> f64 {
        match &self.lyapunov {
            Some(r) if r.converged && r.mle.is_finite() => r.mle,
            _ => f64::NAN,
        }
    }
}

/// One two-phase chaotic sample. Coordinates outside the box keep their
/// values from `base`.
pub fn sample_chaotic_point(
    system: &SystemDefinition,
    base: &SamplePoint,
    bx: &SearchBox,
    cfg: &MHConfig,
    lyap_cfg: &LyapunovConfig,
) -> Result<SampleRecord> {
    cfg.validate()?;
    lyap_cfg.validate()?;
    system.check_sample(base)?;
    let bound = bx.bind(system)?;
    Ok(run_two_phase(system, base, &bound, cfg, lyap_cfg, cfg.seed))
}

fn run_two_phase(
    system: &SystemDefinition,
    base: &SamplePoint,
    bound: &BoundBox,
    cfg: &MHConfig,
    lyap_cfg: &LyapunovConfig,
    seed: u64,
) -> SampleRecord {
    let bx = &bound.search_box;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch = base.clone();
    let mut divergence = |x: &[f64]| -> f64 {
        bound.apply_in_place(&mut scratch, x);
        system.divergence_at(&scratch).unwrap_or(f64::NAN)
    };

    let p1 = mh_walk(
        bx,
        cfg,
        cfg.phase1_steps,
        None,
        &mut rng,
        &mut divergence,
        |d: &f64| -*d,
        None::<fn(&[f64]) -> bool>,
    );
    let mut accepted = p1.diagnostics.accepted;
    if !(p1.eval < 0.0) {
        return SampleRecord {
            point: bound.apply(base, &p1.position),
            coords: p1.position,
            divergence: p1.eval,
            lyapunov: None,
            accepted_steps: accepted,
            phase: Phase::Phase1Failed,
            seed,
        };
    }

    let mut point = base.clone();
    let mut evaluate = |x: &[f64], d: f64| -> Phase2Eval {
        bound.apply_in_place(&mut point, x);
        Phase2Eval {
            divergence: d,
            lyapunov: spectrum_with_doubling(system, &point, lyap_cfg).ok(),
        }
    };
    let start_eval = evaluate(&p1.position, p1.eval);
    // The constraint computes D for the proposal; the evaluator reuses it.
    let last_d = std::cell::Cell::new(f64::NAN);
    let mut d_scratch = base.clone();
    let constraint = |x: &[f64]| {
        bound.apply_in_place(&mut d_scratch, x);
        let d = system.divergence_at(&d_scratch).unwrap_or(f64::NAN);
        last_d.set(d);
        d < 0.0
    };
    let p2 = mh_walk(
        bx,
        cfg,
        cfg.steps,
        Some((p1.position, start_eval)),
        &mut rng,
        |x: &[f64]| evaluate(x, last_d.get()),
        Phase2Eval::score,
        Some(constraint),
    );
    accepted += p2.diagnostics.accepted;
    let Phase2Eval { divergence, lyapunov } = p2.eval;
    let chaotic = lyapunov
        .as_ref()
        .is_some_and(|r| classify(divergence, r, lyap_cfg.eps_zero) == Classification::Chaotic);
    SampleRecord {
        point: bound.apply(base, &p2.position),
        coords: p2.position,
        divergence,
        lyapunov,
        accepted_steps: accepted,
        phase: if chaotic { Phase::Success } else { Phase::Phase2Failed },
        seed,
    }
}

/// `k` independent samples with seeds `cfg.seed + i`, in index order.
/// `progress` is called from worker threads as each record finishes.
pub fn sample_batch(
    system: &SystemDefinition,
    base: &SamplePoint,
    bx: &SearchBox,
    k: usize,
    cfg: &MHConfig,
    lyap_cfg: &LyapunovConfig,
    workers: usize,
    progress: Option<&(dyn Fn(usize, &SampleRecord) + Sync)>,
) -> Result<Vec<SampleRecord>> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    if workers == 0 {
        return Err(invalid("workers must be at least 1"));
    }
    cfg.validate()?;
    lyap_cfg.validate()?;
    system.check_sample(base)?;
    let bound = bx.bind(system)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    Ok(pool.install(|| {
        (0..k)
            .into_par_iter()
            .map(|i| {
                let rec = run_two_phase(system, base, &bound, cfg, lyap_cfg, cfg.seed.wrapping_add(i as u64));
                if let Some(p) = progress {
                    p(i, &rec);
                }
                rec
            })
            .collect()
    }))
}

pub fn csv_header(bx: &SearchBox) -> String {
    let mut cols = bx.names();
    cols.extend(
        ["divergence", "mle", "t_final", "converged", "phase", "seed"]
            .iter()
            .map(|s| s.to_string()),
    );
    cols.join(",")
}

pub fn csv_row(rec: &SampleRecord) -> String {
    let mut cols: Vec<String> = rec.coords.iter().map(|v| v.to_string()).collect();
    cols.push(rec.divergence.to_string());
    match &rec.lyapunov {
        Some(l) => {
            cols.push(l.mle.to_string());
            cols.push(l.t_final.to_string());
            cols.push(l.converged.to_string());
        }
        None => cols.extend([String::new(), String::new(), "false".into()]),
    }
    cols.push(rec.phase.as_str().into());
    cols.push(rec.seed.to_string());
    cols.join(",")
}

pub fn write_csv<W: Write>(bx: &SearchBox, records: &[SampleRecord], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", csv_header(bx))?;
    for r in records {
        writeln!(w, "{}", csv_row(r))?;
    }
    Ok(())
}

/// The CSV columns as a JSON object. Non-finite numbers become `null`.
pub fn json_row(bx: &SearchBox, rec: &SampleRecord) -> Map<String, Value> {
    let num = |v: f64| serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number);
    let mut m = Map::new();
    for (c, &v) in bx.coords.iter().zip(&rec.coords) {
        m.insert(c.name.clone(), num(v));
    }
    m.insert("divergence".into(), num(rec.divergence));
    let l = rec.lyapunov.as_ref();
    m.insert("mle".into(), l.map_or(Value::Null, |l| num(l.mle)));
    m.insert("t_final".into(), l.map_or(Value::Null, |l| num(l.t_final)));
    m.insert("converged".into(), Value::Bool(l.is_some_and(|l| l.converged)));
    m.insert("phase".into(), rec.phase.as_str().into());
    m.insert("seed".into(), rec.seed.into());
    m
}

pub fn write_jsonl<W: Write>(bx: &SearchBox, records: &[SampleRecord], mut w: W) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &json_row(bx, r))?;
        writeln!(w)?;
    }
    Ok(())
}
