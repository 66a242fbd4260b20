//! Job request documents and their validation against the catalog.

use std::collections::BTreeMap;

use chaos_core::integrator::IntegrationConfig;
use chaos_core::lyapunov::LyapunovConfig;
use chaos_core::model::{BoxCoord, SamplePoint, SearchBox, SystemDefinition};
use chaos_core::models::{lookup, resolve_sample};
use chaos_core::sampler::MHConfig;
use chaos_core::scan::BifurcationConfig;
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    SampleBatch,
    Bifurcation,
    LyapunovSingle,
}

/// One box axis. Accepted on input either as `"name=lo:hi"` or as
/// `{"name": .., "lo": .., "hi": ..}`; stored in the object form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBounds {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AxisInput {
    Spec(String),
    Bounds(AxisBounds),
}

pub fn deserialize_box<'de, D>(d: D) -> Result<Vec<AxisBounds>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    let raw = Vec::<AxisInput>::deserialize(d)?;
    raw.into_iter()
        .map(|a| match a {
            AxisInput::Bounds(b) => Ok(b),
            AxisInput::Spec(s) => BoxCoord::parse(&s)
                .map(|c| AxisBounds {
                    name: c.name,
                    lo: c.lo,
                    hi: c.hi,
                })
                .map_err(serde::de::Error::custom),
        })
        .collect()
}

pub fn to_search_box(axes: &[AxisBounds]) -> Result<SearchBox, ApiError> {
    let coords = axes
        .iter()
        .map(|a| BoxCoord::new(&a.name, a.lo, a.hi))
        .collect::<chaos_core::Result<Vec<_>>>()?;
    Ok(SearchBox::new(coords)?)
}

/// `POST /api/jobs` body. Fields unused by a kind are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRequest {
    pub kind: JobKind,
    pub system_id: String,
    /// Overrides of defaults for coordinates outside the box.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub set: BTreeMap<String, f64>,
    #[serde(default, rename = "box", deserialize_with = "deserialize_box", skip_serializing_if = "Vec::is_empty")]
    pub search_box: Vec<AxisBounds>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub mh_config: MHConfig,
    #[serde(default)]
    pub lyap_config: LyapunovConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<BifurcationConfig>,
    #[serde(default)]
    pub integration: IntegrationConfig,
}

/// A request resolved against the catalog, ready to run.
pub struct Prepared {
    pub system: SystemDefinition,
    pub base: SamplePoint,
    pub search_box: Option<SearchBox>,
    pub total: usize,
}

pub fn prepare(req: &JobRequest) -> Result<Prepared, ApiError> {
    let system = lookup(&req.system_id)?;
    let overrides: Vec<(String, f64)> = req.set.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let (search_box, total) = match req.kind {
        JobKind::SampleBatch => {
            if req.search_box.is_empty() {
                return Err(ApiError::validation("sample_batch needs a non-empty box"));
            }
            let bx = to_search_box(&req.search_box)?;
            bx.bind(&system)?;
            let k = req.k.ok_or_else(|| ApiError::validation("sample_batch needs k"))?;
            if k == 0 {
                return Err(ApiError::validation("k must be at least 1"));
            }
            req.mh_config.validate()?;
            req.lyap_config.validate()?;
            (Some(bx), k)
        }
        JobKind::Bifurcation => {
            let scan = req
                .scan
                .as_ref()
                .ok_or_else(|| ApiError::validation("bifurcation needs a scan config"))?;
            scan.validate()?;
            req.integration.validate()?;
            if system.param_index(&scan.param_name).is_none() {
                return Err(ApiError::validation(format!("unknown parameter `{}`", scan.param_name)));
            }
            if let Some(o) = scan.observables.iter().find(|o| system.state_index(o).is_none()) {
                return Err(ApiError::validation(format!("unknown observable `{o}`")));
            }
            (None, scan.n_param_points)
        }
        JobKind::LyapunovSingle => {
            req.lyap_config.validate()?;
            (None, 1)
        }
    };
    // Box coordinates are sampled, so they need no value of their own.
    let mut fill: Vec<(String, f64)> = Vec::new();
    if let Some(bx) = &search_box {
        for c in &bx.coords {
            if !req.set.contains_key(&c.name) {
                fill.push((c.name.clone(), c.lo));
            }
        }
    }
    fill.extend(overrides);
    let base = resolve_sample(&system, &fill)?;
    Ok(Prepared {
        system,
        base,
        search_box,
        total,
    })
}
