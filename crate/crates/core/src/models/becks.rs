//! Two-prey, one-predator chemostat with a limiting nutrient, in
//! dimensional form (rods `R`, cocci `C`, predator `P`, nutrient `N`; time
//! in days) and in the rescaled eleven-parameter form.
//!
//! The rescaling uses
//! `R = K_PR·r`, `C = K_PC·c`, `P = K_PR·Y_PR·(δ_R+D)/μ_PR · p`,
//! `N = K_NR·n` and dimensional time `T = t/(δ_R+D)`, so the rescaled
//! inflow concentration is `n₀ = N₀/K_NR`.

use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::model::{ParamDescriptor, StateDescriptor, SystemDefinition, VectorField};

pub const DIM_ID: &str = "becks_dim";
pub const RESCALED_ID: &str = "becks_rescaled";

/// Default dilution rate (1/day).
pub const DEFAULT_DILUTION: f64 = 0.5;
/// Default inflow nutrient concentration (gm/cc).
pub const DEFAULT_INFLOW: f64 = 1e-5;

/// Growth, affinity, yield and death constants of the dimensional model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BecksParams {
    pub mu_nr: f64,
    pub mu_nc: f64,
    pub mu_pr: f64,
    pub mu_pc: f64,
    pub k_nr: f64,
    pub k_nc: f64,
    pub k_pr: f64,
    pub k_pc: f64,
    pub y_nr: f64,
    pub y_nc: f64,
    pub y_pr: f64,
    pub y_pc: f64,
    pub delta_r: f64,
    pub delta_c: f64,
    pub delta_p: f64,
}

impl Default for BecksParams {
    fn default() -> Self {
        Self {
            mu_nr: 12.0,
            mu_nc: 6.0,
            mu_pr: 2.2,
            mu_pc: 2.2,
            k_nr: 8e-6,
            k_nc: 8e-6,
            k_pr: 1e-6,
            k_pc: 1e-6,
            y_nr: 0.1,
            y_nc: 0.1,
            y_pr: 0.12,
            y_pc: 0.12,
            delta_r: 0.5,
            delta_c: 0.25,
            delta_p: 0.08,
        }
    }
}

impl BecksParams {
    fn as_array(&self) -> [f64; 15] {
        [
            self.mu_nr, self.mu_nc, self.mu_pr, self.mu_pc, self.k_nr, self.k_nc, self.k_pr,
            self.k_pc, self.y_nr, self.y_nc, self.y_pr, self.y_pc, self.delta_r, self.delta_c,
            self.delta_p,
        ]
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() < 15 {
            return Err(invalid("becks parameter vector too short"));
        }
        Ok(Self {
            mu_nr: v[0],
            mu_nc: v[1],
            mu_pr: v[2],
            mu_pc: v[3],
            k_nr: v[4],
            k_nc: v[5],
            k_pr: v[6],
            k_pc: v[7],
            y_nr: v[8],
            y_nc: v[9],
            y_pr: v[10],
            y_pc: v[11],
            delta_r: v[12],
            delta_c: v[13],
            delta_p: v[14],
        })
    }
}

const DIM_NAMES: [(&str, &str, &str); 17] = [
    ("mu_NR", "1/day", "max growth of R on nutrient"),
    ("mu_NC", "1/day", "max growth of C on nutrient"),
    ("mu_PR", "1/day", "max predator growth on R"),
    ("mu_PC", "1/day", "max predator growth on C"),
    ("K_NR", "gm/cc", "half-saturation of R on nutrient"),
    ("K_NC", "gm/cc", "half-saturation of C on nutrient"),
    ("K_PR", "gm/cc", "half-saturation of predator on R"),
    ("K_PC", "gm/cc", "half-saturation of predator on C"),
    ("Y_NR", "gm R / gm N", "yield of R on nutrient"),
    ("Y_NC", "gm C / gm N", "yield of C on nutrient"),
    ("Y_PR", "gm P / gm R", "yield of predator on R"),
    ("Y_PC", "gm P / gm C", "yield of predator on C"),
    ("delta_R", "1/day", "death rate of R"),
    ("delta_C", "1/day", "death rate of C"),
    ("delta_P", "1/day", "death rate of P"),
    ("D", "1/day", "dilution rate"),
    ("N0", "gm/cc", "inflow nutrient concentration"),
];

struct BecksDim;

impl VectorField for BecksDim {
    fn rhs(&self, _t: f64, s: &[f64], p: &[f64], ds: &mut [f64]) {
        let (r, c, pr, n) = (s[0], s[1], s[2], s[3]);
        let (mu_nr, mu_nc, mu_pr, mu_pc) = (p[0], p[1], p[2], p[3]);
        let (k_nr, k_nc, k_pr, k_pc) = (p[4], p[5], p[6], p[7]);
        let (y_nr, y_nc, y_pr, y_pc) = (p[8], p[9], p[10], p[11]);
        let (d_r, d_c, d_p, dil, n0) = (p[12], p[13], p[14], p[15], p[16]);
        let g_r = n / (k_nr + n);
        let g_c = n / (k_nc + n);
        let h_r = r / (k_pr + r);
        let h_c = c / (k_pc + c);
        ds[0] = r * (mu_nr * g_r - d_r) - mu_pr / y_pr * h_r * pr - dil * r;
        ds[1] = c * (mu_nc * g_c - d_c) - mu_pc / y_pc * h_c * pr - dil * c;
        ds[2] = pr * (mu_pr * h_r + mu_pc * h_c - d_p) - dil * pr;
        ds[3] = dil * n0 - r * (mu_nr / y_nr * g_r) - c * (mu_nc / y_nc * g_c) - dil * n;
    }

    fn jacobian(&self, _t: f64, s: &[f64], p: &[f64], j: &mut [f64]) -> bool {
        let (r, c, pr, n) = (s[0], s[1], s[2], s[3]);
        let (mu_nr, mu_nc, mu_pr, mu_pc) = (p[0], p[1], p[2], p[3]);
        let (k_nr, k_nc, k_pr, k_pc) = (p[4], p[5], p[6], p[7]);
        let (y_nr, y_nc, y_pr, y_pc) = (p[8], p[9], p[10], p[11]);
        let (d_r, d_c, d_p, dil) = (p[12], p[13], p[14], p[15]);
        let g_r = n / (k_nr + n);
        let g_c = n / (k_nc + n);
        let h_r = r / (k_pr + r);
        let h_c = c / (k_pc + c);
        let dg_r = k_nr / ((k_nr + n) * (k_nr + n));
        let dg_c = k_nc / ((k_nc + n) * (k_nc + n));
        let dh_r = k_pr / ((k_pr + r) * (k_pr + r));
        let dh_c = k_pc / ((k_pc + c) * (k_pc + c));
        j.copy_from_slice(&[
            mu_nr * g_r - d_r - mu_pr / y_pr * dh_r * pr - dil,
            0.0,
            -mu_pr / y_pr * h_r,
            r * mu_nr * dg_r,
            //
            0.0,
            mu_nc * g_c - d_c - mu_pc / y_pc * dh_c * pr - dil,
            -mu_pc / y_pc * h_c,
            c * mu_nc * dg_c,
            //
            pr * mu_pr * dh_r,
            pr * mu_pc * dh_c,
            mu_pr * h_r + mu_pc * h_c - d_p - dil,
            0.0,
            //
            -mu_nr / y_nr * g_r,
            -mu_nc / y_nc * g_c,
            0.0,
            -r * mu_nr / y_nr * dg_r - c * mu_nc / y_nc * dg_c - dil,
        ]);
        true
    }
}

pub fn make_becks_dim(table: &BecksParams, dilution: f64, inflow: f64) -> Result<SystemDefinition> {
    let arr = table.as_array();
    if arr.iter().any(|v| !(*v > 0.0 && v.is_finite())) || !(dilution > 0.0) || !(inflow > 0.0) {
        return Err(invalid("becks parameters must be positive"));
    }
    let values = arr.iter().copied().chain([dilution, inflow]);
    let params = DIM_NAMES
        .iter()
        .zip(values)
        .map(|((name, units, desc), v)| ParamDescriptor::new(name, v, units, desc))
        .collect();
    let states = [("R", 1e-6), ("C", 1e-6), ("P", 1e-6), ("N", inflow)]
        .iter()
        .map(|(n, v)| StateDescriptor {
            name: (*n).to_owned(),
            default: Some(*v),
        })
        .collect();
    SystemDefinition::new(
        DIM_ID,
        "rods/cocci/predator/nutrient chemostat, dimensional (time in days)",
        states,
        params,
        false,
        Arc::new(BecksDim),
    )
}

/// The eleven rescaled parameters plus the rescaled inflow `n₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BecksHat {
    pub mu_nr: f64,
    pub mu_nc: f64,
    pub mu_pr: f64,
    pub mu_pc: f64,
    pub kappa: f64,
    pub delta_c: f64,
    pub delta_p: f64,
    pub delta: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub n0: f64,
}

pub fn becks_rescale_params(t: &BecksParams, dilution: f64, inflow: f64) -> Result<BecksHat> {
    let s = t.delta_r + dilution;
    if !(s > 0.0) {
        return Err(invalid("delta_R + D must be positive"));
    }
    if !(t.k_nr > 0.0 && t.k_pc > 0.0 && t.mu_pr > 0.0 && t.y_pc > 0.0 && t.y_nr > 0.0 && t.y_nc > 0.0) {
        return Err(invalid("rescaling divides by a nonpositive constant"));
    }
    Ok(BecksHat {
        mu_nr: t.mu_nr / s,
        mu_nc: t.mu_nc / s,
        mu_pr: t.mu_pr / s,
        mu_pc: t.mu_pc / s,
        kappa: t.k_nc / t.k_nr,
        delta_c: (t.delta_c + dilution) / s,
        delta_p: (t.delta_p + dilution) / s,
        delta: dilution / s,
        eta1: t.mu_pc * t.y_pr * t.k_pr / (t.mu_pr * t.y_pc * t.k_pc),
        eta2: t.mu_nr * t.k_pr / (t.y_nr * t.k_nr * s),
        eta3: t.mu_nc * t.k_pc / (t.y_nc * t.k_nr * s),
        n0: inflow / t.k_nr,
    })
}

/// Change of variables between the dimensional and rescaled forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BecksScaling {
    pub r: f64,
    pub c: f64,
    pub p: f64,
    pub n: f64,
    /// Rescaled time per day, `δ_R + D`.
    pub rate: f64,
}

impl BecksScaling {
    pub fn new(t: &BecksParams, dilution: f64) -> Self {
        let rate = t.delta_r + dilution;
        Self {
            r: t.k_pr,
            c: t.k_pc,
            p: t.k_pr * t.y_pr * rate / t.mu_pr,
            n: t.k_nr,
            rate,
        }
    }

    pub fn to_rescaled(&self, dim: &[f64]) -> [f64; 4] {
        [dim[0] / self.r, dim[1] / self.c, dim[2] / self.p, dim[3] / self.n]
    }

    pub fn to_dimensional(&self, rescaled: &[f64]) -> [f64; 4] {
        [
            rescaled[0] * self.r,
            rescaled[1] * self.c,
            rescaled[2] * self.p,
            rescaled[3] * self.n,
        ]
    }
}

const HAT_NAMES: [&str; 12] = [
    "mu_NR_hat", "mu_NC_hat", "mu_PR_hat", "mu_PC_hat", "kappa_hat", "delta_C_hat",
    "delta_P_hat", "delta_hat", "eta1_hat", "eta2_hat", "eta3_hat", "n0",
];

struct BecksRescaled;

impl VectorField for BecksRescaled {
    fn rhs(&self, _t: f64, s: &[f64], q: &[f64], ds: &mut [f64]) {
        let (r, c, p, n) = (s[0], s[1], s[2], s[3]);
        let (mu_nr, mu_nc, mu_pr, mu_pc) = (q[0], q[1], q[2], q[3]);
        let (kappa, d_c, d_p, delta) = (q[4], q[5], q[6], q[7]);
        let (eta1, eta2, eta3, n0) = (q[8], q[9], q[10], q[11]);
        let nr = n * r / (n + 1.0);
        let nc = n * c / (n + kappa);
        let rp = r * p / (r + 1.0);
        let cp = c * p / (c + 1.0);
        ds[0] = mu_nr * nr - rp - r;
        ds[1] = mu_nc * nc - eta1 * cp - d_c * c;
        ds[2] = mu_pr * rp + mu_pc * cp - d_p * p;
        ds[3] = delta * (n0 - n) - eta2 * nr - eta3 * nc;
    }

    fn jacobian(&self, _t: f64, s: &[f64], q: &[f64], j: &mut [f64]) -> bool {
        let (r, c, p, n) = (s[0], s[1], s[2], s[3]);
        let (mu_nr, mu_nc, mu_pr, mu_pc) = (q[0], q[1], q[2], q[3]);
        let (kappa, d_c, d_p, delta) = (q[4], q[5], q[6], q[7]);
        let (eta1, eta2, eta3) = (q[8], q[9], q[10]);
        let a = n / (n + 1.0);
        let da = 1.0 / ((n + 1.0) * (n + 1.0));
        let b = n / (n + kappa);
        let db = kappa / ((n + kappa) * (n + kappa));
        let u = r / (r + 1.0);
        let du = 1.0 / ((r + 1.0) * (r + 1.0));
        let v = c / (c + 1.0);
        let dv = 1.0 / ((c + 1.0) * (c + 1.0));
        j.copy_from_slice(&[
            mu_nr * a - p * du - 1.0,
            0.0,
            -u,
            mu_nr * r * da,
            //
            0.0,
            mu_nc * b - eta1 * p * dv - d_c,
            -eta1 * v,
            mu_nc * c * db,
            //
            mu_pr * p * du,
            mu_pc * p * dv,
            mu_pr * u + mu_pc * v - d_p,
            0.0,
            //
            -eta2 * a,
            -eta3 * b,
            0.0,
            -delta - eta2 * r * da - eta3 * c * db,
        ]);
        true
    }
}

/// Rescaled system. `default_state` is used for the catalog defaults of
/// `(r, c, p, n)`.
pub fn make_becks_rescaled(hat: &BecksHat, default_state: [f64; 4]) -> Result<SystemDefinition> {
    if !(hat.kappa > 0.0) {
        return Err(invalid("kappa_hat must be positive"));
    }
    let values = [
        hat.mu_nr, hat.mu_nc, hat.mu_pr, hat.mu_pc, hat.kappa, hat.delta_c, hat.delta_p,
        hat.delta, hat.eta1, hat.eta2, hat.eta3, hat.n0,
    ];
    let params = HAT_NAMES
        .iter()
        .zip(values)
        .map(|(name, v)| ParamDescriptor::new(name, v, "dimensionless", ""))
        .collect();
    let states = ["r", "c", "p", "n"]
        .iter()
        .zip(default_state)
        .map(|(name, v)| StateDescriptor {
            name: (*name).to_owned(),
            default: Some(v),
        })
        .collect();
    SystemDefinition::new(
        RESCALED_ID,
        "rods/cocci/predator/nutrient chemostat, rescaled (eleven parameters plus n0)",
        states,
        params,
        false,
        Arc::new(BecksRescaled),
    )
}

pub fn default_dim_system() -> SystemDefinition {
    make_becks_dim(&BecksParams::default(), DEFAULT_DILUTION, DEFAULT_INFLOW)
        .expect("table defaults are positive")
}

pub fn default_rescaled_system() -> SystemDefinition {
    let t = BecksParams::default();
    let hat = becks_rescale_params(&t, DEFAULT_DILUTION, DEFAULT_INFLOW).expect("valid defaults");
    let scaling = BecksScaling::new(&t, DEFAULT_DILUTION);
    let ic = scaling.to_rescaled(&[1e-6, 1e-6, 1e-6, DEFAULT_INFLOW]);
    make_becks_rescaled(&hat, ic).expect("valid defaults")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults_load_exactly() {
        let sys = default_dim_system();
        let p = sys.default_params().unwrap();
        let expect = [
            12.0, 6.0, 2.2, 2.2, 8e-6, 8e-6, 1e-6, 1e-6, 0.1, 0.1, 0.12, 0.12, 0.5, 0.25, 0.08,
            0.5, 1e-5,
        ];
        assert_eq!(p, expect);
        assert_eq!(sys.param_index("delta_P"), Some(14));
    }

    #[test]
    fn nutrient_equilibrium_without_consumers() {
        let sys = default_dim_system();
        let p = sys.default_params().unwrap();
        let d = sys.eval_rhs(0.0, &[0.0, 0.0, 0.0, 1e-5], &p).unwrap();
        assert_eq!(d, vec![0.0; 4]);

        let rs = default_rescaled_system();
        let q = rs.default_params().unwrap();
        let n0 = q[11];
        assert_eq!(rs.eval_rhs(0.0, &[0.0, 0.0, 0.0, n0], &q).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn rescaled_parameters_at_half_dilution() {
        let h = becks_rescale_params(&BecksParams::default(), 0.5, 1e-5).unwrap();
        assert!((h.mu_nr - 12.0).abs() < 1e-12);
        assert!((h.kappa - 1.0).abs() < 1e-12);
        assert!((h.delta - 0.5).abs() < 1e-12);
        assert!((h.delta_c - 0.75).abs() < 1e-12);
        assert!((h.eta1 - 1.0).abs() < 1e-12);
        assert!((h.n0 - 1.25).abs() < 1e-12);
    }

    #[test]
    fn rescale_guard() {
        let mut t = BecksParams::default();
        t.delta_r = 0.1;
        assert!(becks_rescale_params(&t, -0.2, 1e-5).is_err());
        assert!(make_becks_dim(&BecksParams { y_pr: 0.0, ..t }, 0.5, 1e-5).is_err());
    }

    #[test]
    fn scaling_round_trip() {
        let s = BecksScaling::new(&BecksParams::default(), 0.9);
        let dim = [2e-6, 3e-7, 5e-6, 4e-5];
        let back = s.to_dimensional(&s.to_rescaled(&dim));
        for (a, b) in dim.iter().zip(back) {
            assert!(((a - b) / a).abs() < 1e-14);
        }
    }
}
