//! Built-in systems and the catalog that resolves them by id.

pub mod becks;
pub mod kot;
pub mod pgpr;
pub mod quadratic3;
pub mod testsys;

use crate::error::{invalid, Error, Result};
use crate::model::{resolve_coord, CatalogEntry, CoordKind, CoordTarget, SamplePoint, SystemDefinition, IC_PREFIX};

pub const PUBLIC_IDS: [&str; 5] = [
    quadratic3::ID,
    kot::ID,
    pgpr::ID,
    becks::DIM_ID,
    becks::RESCALED_ID,
];

/// Resolves a built-in system, including the unlisted reference systems.
pub fn lookup(id: &str) -> Result<SystemDefinition> {
    Ok(match id {
        quadratic3::ID => quadratic3::make_quadratic3(&[0.0; quadratic3::N_COEFFS])?,
        kot::ID => kot::reference_system(),
        pgpr::ID => pgpr::template(pgpr::DEFAULT_FORCING_TERMS),
        becks::DIM_ID => becks::default_dim_system(),
        becks::RESCALED_ID => becks::default_rescaled_system(),
        testsys::LINEAR_DIAG => testsys::linear_diag(),
        testsys::LORENZ => testsys::lorenz(),
        testsys::BLOWUP => testsys::blowup(),
        testsys::RELAX => testsys::relax(),
        testsys::DECAY => testsys::decay(),
        other => return Err(Error::UnknownSystem(other.to_owned())),
    })
}

pub fn catalog() -> Vec<CatalogEntry> {
    PUBLIC_IDS
        .iter()
        .map(|id| lookup(id).expect("built-in").catalog_entry())
        .collect()
}

/// Parses `name=value`.
pub fn parse_assignment(spec: &str) -> Result<(String, f64)> {
    let (name, value) = spec
        .split_once('=')
        .ok_or_else(|| invalid(format!("expected name=value, got `{spec}`")))?;
    let v = value
        .trim()
        .parse::<f64>()
        .map_err(|e| invalid(format!("bad value for `{name}`: {e}")))?;
    Ok((name.trim().to_owned(), v))
}

/// Builds a sample from defaults and `name=value` overrides; initial
/// conditions are addressed as `ic.<state>`. Any coordinate left without a
/// value is an error.
pub fn resolve_sample(system: &SystemDefinition, overrides: &[(String, f64)]) -> Result<SamplePoint> {
    let mut params: Vec<Option<f64>> = system.params().iter().map(|p| p.default).collect();
    let mut state: Vec<Option<f64>> = system.states().iter().map(|s| s.default).collect();
    for (name, v) in overrides {
        let kind = if name.starts_with(IC_PREFIX) {
            CoordKind::InitialCondition
        } else {
            CoordKind::Parameter
        };
        match resolve_coord(system, name, kind)? {
            CoordTarget::Param(i) => params[i] = Some(*v),
            CoordTarget::State(i) => state[i] = Some(*v),
        }
    }
    let param_values = params
        .iter()
        .zip(system.params())
        .map(|(v, d)| v.ok_or_else(|| Error::MissingParameter(d.name.clone())))
        .collect::<Result<Vec<_>>>()?;
    let initial_state = state
        .iter()
        .zip(system.states())
        .map(|(v, d)| v.ok_or_else(|| Error::MissingParameter(format!("{IC_PREFIX}{}", d.name))))
        .collect::<Result<Vec<_>>>()?;
    Ok(SamplePoint {
        system_id: system.id().to_owned(),
        param_values,
        initial_state,
    })
}
