//! Small reference systems with known behaviour. They resolve by id but
//! are not listed in the public catalog.

use std::sync::Arc;

use crate::model::{ParamDescriptor, StateDescriptor, SystemDefinition, VectorField};

pub const LINEAR_DIAG: &str = "linear_diag";
pub const LORENZ: &str = "lorenz";
pub const BLOWUP: &str = "blowup";
pub const RELAX: &str = "relax";
pub const DECAY: &str = "decay";

fn states(names: &[(&str, f64)]) -> Vec<StateDescriptor> {
    names
        .iter()
        .map(|(n, v)| StateDescriptor {
            name: (*n).to_owned(),
            default: Some(*v),
        })
        .collect()
}

struct Diag;

impl VectorField for Diag {
    fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dy: &mut [f64]) {
        dy[0] = p[0] * y[0];
        dy[1] = p[1] * y[1];
    }

    fn jacobian(&self, _t: f64, _y: &[f64], p: &[f64], j: &mut [f64]) -> bool {
        j.copy_from_slice(&[p[0], 0.0, 0.0, p[1]]);
        true
    }
}

/// `dY/dt = diag(l1, l2)·Y`, defaults `(-1, -2)`.
pub fn linear_diag() -> SystemDefinition {
    SystemDefinition::new(
        LINEAR_DIAG,
        "linear test system dY/dt = diag(l1, l2) Y",
        states(&[("u", 1.0), ("v", 1.0)]),
        vec![
            ParamDescriptor::new("l1", -1.0, "1/time", ""),
            ParamDescriptor::new("l2", -2.0, "1/time", ""),
        ],
        false,
        Arc::new(Diag),
    )
    .expect("valid")
}

struct Lorenz;

impl VectorField for Lorenz {
    fn rhs(&self, _t: f64, s: &[f64], p: &[f64], ds: &mut [f64]) {
        let (sigma, rho, beta) = (p[0], p[1], p[2]);
        ds[0] = sigma * (s[1] - s[0]);
        ds[1] = s[0] * (rho - s[2]) - s[1];
        ds[2] = s[0] * s[1] - beta * s[2];
    }

    fn jacobian(&self, _t: f64, s: &[f64], p: &[f64], j: &mut [f64]) -> bool {
        let (sigma, rho, beta) = (p[0], p[1], p[2]);
        j.copy_from_slice(&[
            -sigma, sigma, 0.0, //
            rho - s[2], -1.0, -s[0], //
            s[1], s[0], -beta,
        ]);
        true
    }
}

pub fn lorenz() -> SystemDefinition {
    SystemDefinition::new(
        LORENZ,
        "Lorenz system",
        states(&[("x", 1.0), ("y", 1.0), ("z", 1.0)]),
        vec![
            ParamDescriptor::new("sigma", 10.0, "dimensionless", ""),
            ParamDescriptor::new("rho", 28.0, "dimensionless", ""),
            ParamDescriptor::new("beta", 8.0 / 3.0, "dimensionless", ""),
        ],
        false,
        Arc::new(Lorenz),
    )
    .expect("valid")
}

struct Square;

impl VectorField for Square {
    fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dy: &mut [f64]) {
        dy[0] = p[0] * y[0] * y[0];
    }

    fn jacobian(&self, _t: f64, y: &[f64], p: &[f64], j: &mut [f64]) -> bool {
        j[0] = 2.0 * p[0] * y[0];
        true
    }
}

/// `dY/dt = k·Y²`; from `Y(0) = 1` with `k = 1` it blows up at `t = 1`.
pub fn blowup() -> SystemDefinition {
    SystemDefinition::new(
        BLOWUP,
        "finite-time blowup dY/dt = k Y^2",
        states(&[("y", 1.0)]),
        vec![ParamDescriptor::new("k", 1.0, "dimensionless", "")],
        false,
        Arc::new(Square),
    )
    .expect("valid")
}

struct Relax;

impl VectorField for Relax {
    fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dy: &mut [f64]) {
        dy[0] = p[0] - y[0];
    }

    fn jacobian(&self, _t: f64, _y: &[f64], _p: &[f64], j: &mut [f64]) -> bool {
        j[0] = -1.0;
        true
    }
}

/// `dY/dt = p − Y`, a stable fixed point at `Y = p`.
pub fn relax() -> SystemDefinition {
    SystemDefinition::new(
        RELAX,
        "relaxation to a parameter dY/dt = p - Y",
        states(&[("y", 0.0)]),
        vec![ParamDescriptor::new("p", 0.5, "dimensionless", "")],
        false,
        Arc::new(Relax),
    )
    .expect("valid")
}

struct Decay;

impl VectorField for Decay {
    fn rhs(&self, _t: f64, y: &[f64], p: &[f64], dy: &mut [f64]) {
        dy[0] = -p[0] * y[0];
    }
}

/// `dY/dt = −k·Y` with no closed-form Jacobian.
pub fn decay() -> SystemDefinition {
    SystemDefinition::new(
        DECAY,
        "exponential decay dY/dt = -k Y",
        states(&[("y", 1.0)]),
        vec![ParamDescriptor::new("k", 1.0, "1/time", "")],
        false,
        Arc::new(Decay),
    )
    .expect("valid")
}
