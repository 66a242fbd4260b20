//! General three-dimensional quadratic flow with 30 coefficients.
//!
//! Each equation has the form
//! `a1 + b1·x + b2·y + b3·z + c1·x² + c2·xy + c3·xz + c4·y² + c5·yz + c6·z²`,
//! and the coefficient vector is ordered `(a_x1, b_x1..b_x3, c_x1..c_x6,
//! a_y1, ..., c_z6)`.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::model::{ParamDescriptor, StateDescriptor, SystemDefinition, VectorField};

pub const ID: &str = "quadratic3";
pub const N_COEFFS: usize = 30;

const TERMS: [&str; 10] = ["a1", "b1", "b2", "b3", "c1", "c2", "c3", "c4", "c5", "c6"];

/// Coefficient names in storage order, e.g. `a_x1`, `b_y2`, `c_z6`.
pub fn coefficient_names() -> Vec<String> {
    ["x", "y", "z"]
        .iter()
        .flat_map(|eq| {
            TERMS
                .iter()
                .map(move |t| format!("{}_{}{}", &t[..1], eq, &t[1..]))
        })
        .collect()
}

struct Quadratic3;

impl VectorField for Quadratic3 {
    fn rhs(&self, _t: f64, s: &[f64], c: &[f64], ds: &mut [f64]) {
        let (x, y, z) = (s[0], s[1], s[2]);
        let monomials = [1.0, x, y, z, x * x, x * y, x * z, y * y, y * z, z * z];
        for (eq, out) in ds.iter_mut().enumerate() {
            let row = &c[10 * eq..10 * eq + 10];
            *out = row.iter().zip(&monomials).map(|(a, m)| a * m).sum();
        }
    }

    fn jacobian(&self, _t: f64, s: &[f64], c: &[f64], jac: &mut [f64]) -> bool {
        let (x, y, z) = (s[0], s[1], s[2]);
        for eq in 0..3 {
            let k = &c[10 * eq..10 * eq + 10];
            // k = [a1, b1, b2, b3, c1, c2, c3, c4, c5, c6]
            jac[3 * eq] = k[1] + 2.0 * k[4] * x + k[5] * y + k[6] * z;
            jac[3 * eq + 1] = k[2] + k[5] * x + 2.0 * k[7] * y + k[8] * z;
            jac[3 * eq + 2] = k[3] + k[6] * x + k[8] * y + 2.0 * k[9] * z;
        }
        true
    }
}

/// Builds the quadratic flow with `coeffs` as parameter defaults.
pub fn make_quadratic3(coeffs: &[f64]) -> Result<SystemDefinition> {
    if coeffs.len() != N_COEFFS {
        return Err(invalid(format!(
            "quadratic3 needs {N_COEFFS} coefficients, got {}",
            coeffs.len()
        )));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(invalid("quadratic3 coefficients must be finite"));
    }
    let params = coefficient_names()
        .iter()
        .zip(coeffs)
        .map(|(name, &v)| ParamDescriptor::new(name, v, "dimensionless", ""))
        .collect();
    let states = ["x", "y", "z"]
        .iter()
        .map(|n| StateDescriptor {
            name: (*n).to_owned(),
            default: Some(0.1),
        })
        .collect();
    SystemDefinition::new(
        ID,
        "general three-dimensional quadratic flow (30 coefficients)",
        states,
        params,
        false,
        Arc::new(Quadratic3),
    )
}

/// Closed-form divergence
/// `b_x1+b_y2+b_z3 + (2c_x1+c_y2+c_z3)x + (c_x2+2c_y4+c_z5)y + (c_x3+c_y5+2c_z6)z`.
pub fn divergence_closed_form(c: &[f64], s: &[f64]) -> f64 {
    let (x, y, z) = (s[0], s[1], s[2]);
    let (cx, cy, cz) = (&c[0..10], &c[10..20], &c[20..30]);
    cx[1] + cy[2] + cz[3]
        + (2.0 * cx[4] + cy[5] + cz[6]) * x
        + (cx[5] + 2.0 * cy[7] + cz[8]) * y
        + (cx[6] + cy[8] + 2.0 * cz[9]) * z
}

/// Reads a JSON array of 30 coefficients.
pub fn parse_coefficients(json: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = serde_json::from_str(json)
        .map_err(|e| invalid(format!("coefficient file: {e}")))?;
    if v.len() != N_COEFFS {
        return Err(invalid(format!(
            "coefficient file must hold {N_COEFFS} numbers, got {}",
            v.len()
        )));
    }
    Ok(v)
}
