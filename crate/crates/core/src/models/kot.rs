//! Periodically forced double-Monod chemostat in dimensionless form.
//!
//! ```text
//! dx/dτ = 1 + ε·sin(ωτ) − x − A·x·y/(a + x)
//! dy/dτ = A·x·y/(a + x) − y − B·y·z/(b + y)
//! dz/dτ = B·y·z/(b + y) − z
//! ```

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::model::{ParamDescriptor, StateDescriptor, SystemDefinition, VectorField};

pub const ID: &str = "kot_monod";

/// Dimensionless parameters of the forced system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KotParams {
    pub big_a: f64,
    pub a: f64,
    pub big_b: f64,
    pub b: f64,
    pub omega: f64,
}

/// Chemostat quantities in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KotPhysical {
    pub yield_prey: f64,
    pub mu_prey: f64,
    pub k_prey: f64,
    pub yield_predator: f64,
    pub mu_predator: f64,
    pub k_predator: f64,
    pub inflow_substrate: f64,
    pub dilution: f64,
    pub forcing_period: f64,
}

impl KotPhysical {
    /// Prey/predator table values with `S_i = 115 mg/l`, `D = 0.1 /h` and a
    /// forcing period chosen so that `ω = 5π/6`.
    pub fn reference() -> Self {
        let dilution = 0.1;
        Self {
            yield_prey: 0.4,
            mu_prey: 0.5,
            k_prey: 8.0,
            yield_predator: 0.6,
            mu_predator: 0.2,
            k_predator: 9.0,
            inflow_substrate: 115.0,
            dilution,
            forcing_period: 2.0 * PI / (dilution * 5.0 * PI / 6.0),
        }
    }
}

/// `A = μ₁/D`, `a = K₁/S_i`, `B = μ₂/D`, `b = K₂/(Y₁·S_i)`, `ω = 2π/(D·T)`.
pub fn kot_nondimensionalize(p: &KotPhysical) -> Result<KotParams> {
    let all = [
        p.yield_prey,
        p.mu_prey,
        p.k_prey,
        p.yield_predator,
        p.mu_predator,
        p.k_predator,
        p.inflow_substrate,
        p.dilution,
        p.forcing_period,
    ];
    if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid("chemostat quantities must be positive"));
    }
    Ok(KotParams {
        big_a: p.mu_prey / p.dilution,
        a: p.k_prey / p.inflow_substrate,
        big_b: p.mu_predator / p.dilution,
        b: p.k_predator / (p.yield_prey * p.inflow_substrate),
        omega: 2.0 * PI / (p.dilution * p.forcing_period),
    })
}

struct KotMonod;

// parameter order: A, a, B, b, eps, omega
impl VectorField for KotMonod {
    fn rhs(&self, t: f64, s: &[f64], p: &[f64], ds: &mut [f64]) {
        let (x, y, z) = (s[0], s[1], s[2]);
        let (big_a, a, big_b, b, eps, omega) = (p[0], p[1], p[2], p[3], p[4], p[5]);
        let prey_uptake = big_a * x * y / (a + x);
        let predation = big_b * y * z / (b + y);
        ds[0] = 1.0 + eps * (omega * t).sin() - x - prey_uptake;
        ds[1] = prey_uptake - y - predation;
        ds[2] = predation - z;
    }

    fn jacobian(&self, _t: f64, s: &[f64], p: &[f64], j: &mut [f64]) -> bool {
        let (x, y, z) = (s[0], s[1], s[2]);
        let (big_a, a, big_b, b) = (p[0], p[1], p[2], p[3]);
        // d/dx [A x y/(a+x)] = A a y/(a+x)^2 ; d/dy = A x/(a+x)
        let ux = big_a * a * y / ((a + x) * (a + x));
        let uy = big_a * x / (a + x);
        let vy = big_b * b * z / ((b + y) * (b + y));
        let vz = big_b * y / (b + y);
        j[0] = -1.0 - ux;
        j[1] = -uy;
        j[2] = 0.0;
        j[3] = ux;
        j[4] = uy - 1.0 - vy;
        j[5] = -vz;
        j[6] = 0.0;
        j[7] = vy;
        j[8] = vz - 1.0;
        true
    }
}

pub fn make_kot_monod(params: KotParams, eps: f64) -> Result<SystemDefinition> {
    if !(params.a > 0.0 && params.b > 0.0) {
        return Err(invalid("half-saturation constants a and b must be positive"));
    }
    let descriptors = vec![
        ParamDescriptor::new("A", params.big_a, "dimensionless", "prey max growth μ₁/D"),
        ParamDescriptor::new("a", params.a, "dimensionless", "prey half-saturation K₁/S_i"),
        ParamDescriptor::new("B", params.big_b, "dimensionless", "predator max growth μ₂/D"),
        ParamDescriptor::new("b", params.b, "dimensionless", "predator half-saturation K₂/(Y₁S_i)"),
        ParamDescriptor::new("eps", eps, "dimensionless", "forcing amplitude ε"),
        ParamDescriptor::new("omega", params.omega, "dimensionless", "forcing angular frequency 2π/(DT)"),
    ];
    let states = [("x", 0.42), ("y", 0.4), ("z", 0.42)]
        .iter()
        .map(|(n, v)| StateDescriptor {
            name: (*n).to_owned(),
            default: Some(*v),
        })
        .collect();
    SystemDefinition::new(
        ID,
        "forced double-Monod chemostat (dimensionless: substrate x, prey y, predator z)",
        states,
        descriptors,
        true,
        Arc::new(KotMonod),
    )
}

/// Reference configuration: table values, `ε = 0.6`, `ω = 5π/6`.
pub fn reference_system() -> SystemDefinition {
    let p = kot_nondimensionalize(&KotPhysical::reference()).expect("reference values are positive");
    make_kot_monod(p, 0.6).expect("reference values are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nondimensionalization_of_reference_table() {
        let p = kot_nondimensionalize(&KotPhysical::reference()).unwrap();
        assert!((p.big_a - 5.0).abs() < 1e-12);
        assert!((p.a - 8.0 / 115.0).abs() < 1e-15);
        assert!((p.a - 0.069565).abs() < 1e-6);
        assert!((p.big_b - 2.0).abs() < 1e-12);
        assert!((p.b - 9.0 / 46.0).abs() < 1e-15);
        assert!((p.b - 0.195652).abs() < 1e-6);
        assert!((p.omega - 5.0 * PI / 6.0).abs() < 1e-12);
    }

    #[test]
    fn nonpositive_inputs_rejected() {
        let mut p = KotPhysical::reference();
        p.dilution = 0.0;
        assert!(kot_nondimensionalize(&p).is_err());
        let mut p = KotPhysical::reference();
        p.k_prey = -1.0;
        assert!(kot_nondimensionalize(&p).is_err());
    }

    #[test]
    fn forced_source_at_origin() {
        let sys = reference_system();
        let p = sys.default_params().unwrap();
        let d = sys.eval_rhs(0.0, &[0.0, 0.0, 0.0], &p).unwrap();
        assert_eq!(d, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn unforced_limit_has_constant_source() {
        let mut p = reference_system().default_params().unwrap();
        p[4] = 0.0;
        let sys = reference_system();
        for t in [0.0, 0.7, 3.1, 11.0] {
            assert_eq!(sys.eval_rhs(t, &[0.0; 3], &p).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn predator_death_term_only_at_zero_prey() {
        let sys = reference_system();
        let p = sys.default_params().unwrap();
        let j = sys.eval_jacobian(0.0, &[0.3, 0.0, 0.5], &p).unwrap();
        assert_eq!(j.get(2, 2), -1.0);
    }

    #[test]
    fn half_saturation_must_be_positive() {
        let mut p = kot_nondimensionalize(&KotPhysical::reference()).unwrap();
        p.a = 0.0;
        assert!(make_kot_monod(p, 0.6).is_err());
    }
}
