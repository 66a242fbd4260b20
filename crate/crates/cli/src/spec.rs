//! Resolved, serializable run descriptions. A manifest stores one of these
//! and `replay` runs it again.

use std::collections::BTreeMap;

use chaos_core::integrator::IntegrationConfig;
use chaos_core::lyapunov::LyapunovConfig;
use chaos_core::model::{BoxCoord, SamplePoint, SearchBox, SystemDefinition};
use chaos_core::models::{lookup, pgpr::PgprConfig, quadratic3, resolve_sample};
use chaos_core::sampler::MHConfig;
use chaos_core::scan::BifurcationConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A built-in system, optionally built from inline data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_config: Option<Value>,
}

impl SystemSpec {
    pub fn build(&self) -> chaos_core::Result<SystemDefinition> {
        if let Some(c) = &self.coefficients {
            if self.id != quadratic3::ID {
                return Err(chaos_core::Error::Invalid("coefficients only apply to quadratic3".into()));
            }
            return quadratic3::make_quadratic3(c);
        }
        if let Some(cfg) = &self.model_config {
            if self.id != chaos_core::models::pgpr::ID {
                return Err(chaos_core::Error::Invalid("a model config only applies to pgpr".into()));
            }
            return PgprConfig::from_json(&cfg.to_string())?.build();
        }
        lookup(&self.id)
    }
}

/// Box coordinates are filled with their lower bound so that they never
/// count as missing; the sampler overwrites them.
pub fn base_sample(
    system: &SystemDefinition,
    set: &BTreeMap<String, f64>,
    search_box: Option<&SearchBox>,
) -> chaos_core::Result<SamplePoint> {
    let mut over: Vec<(String, f64)> = Vec::new();
    if let Some(bx) = search_box {
        over.extend(bx.coords.iter().filter(|c| !set.contains_key(&c.name)).map(|c| (c.name.clone(), c.lo)));
    }
    over.extend(set.iter().map(|(k, v)| (k.clone(), *v)));
    resolve_sample(system, &over)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRun {
    pub system: SystemSpec,
    pub set: BTreeMap<String, f64>,
    pub lyapunov: LyapunovConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRun {
    pub system: SystemSpec,
    pub set: BTreeMap<String, f64>,
    pub search_box: Vec<BoxCoord>,
    pub k: usize,
    pub mh: MHConfig,
    pub lyapunov: LyapunovConfig,
    pub workers: usize,
    pub out: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationRun {
    pub system: SystemSpec,
    pub set: BTreeMap<String, f64>,
    pub scan: BifurcationConfig,
    pub integration: IntegrationConfig,
    pub workers: usize,
    pub json: bool,
    pub out: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRun {
    pub system: SystemSpec,
    pub set: BTreeMap<String, f64>,
    pub t_end: f64,
    pub integration: IntegrationConfig,
    pub stride: usize,
    pub out: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum RunSpec {
    Lyapunov(LyapunovRun),
    Sample(SampleRun),
    Bifurcate(BifurcationRun),
    Trajectory(TrajectoryRun),
}

impl RunSpec {
    pub fn seed(&self) -> Option<u64> {
        match self {
            RunSpec::Sample(s) => Some(s.mh.seed),
            _ => None,
        }
    }

    pub fn out(&self) -> Option<&str> {
        match self {
            RunSpec::Lyapunov(l) => l.out.as_deref(),
            RunSpec::Sample(s) => Some(&s.out),
            RunSpec::Bifurcate(b) => Some(&b.out),
            RunSpec::Trajectory(t) => Some(&t.out),
        }
    }

    pub fn set_out(&mut self, out: String) {
        match self {
            RunSpec::Lyapunov(l) => l.out = Some(out),
            RunSpec::Sample(s) => s.out = out,
            RunSpec::Bifurcate(b) => b.out = out,
            RunSpec::Trajectory(t) => t.out = out,
        }
    }
}

pub fn search_box(coords: &[BoxCoord]) -> chaos_core::Result<SearchBox> {
    SearchBox::new(coords.to_vec())
}
