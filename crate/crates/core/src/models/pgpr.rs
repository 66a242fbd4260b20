//! Rhizosphere model: two competing bacterial populations `X` (inoculated)
//! and `Z` (resident) on an organic substrate `S` and oxygen `P`, with a
//! daily square-wave substrate source `W(t)`.
//!
//! Growth follows the rate-limited law
//! `μ[S,P,N] = μ_m · S/(S+θK_S) · P/(P+K_P) · N/(N+θK_N)` with nitrogen `N`
//! held as a constant parameter. The cross-population terms `F[Z]` and
//! `G[X]` are saturating, `f_c·Z/(Z+K_F)` and `g_c·X/(X+K_G)`, and vanish
//! unless configured.
//!
//! No numeric defaults are shipped: every rate constant must come from
//! configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::model::{ParamDescriptor, StateDescriptor, SystemDefinition, VectorField};

pub const ID: &str = "pgpr";
pub const DEFAULT_FORCING_TERMS: usize = 25;
/// Period of the substrate source, in hours.
pub const FORCING_PERIOD: f64 = 24.0;

/// Partial Fourier sum of the 24 h square wave equal to 1 on `(0, 12]` and 0
/// on `(12, 24)`.
pub fn fourier_square_wave(t: f64, terms: usize) -> f64 {
    let mut w = 0.5;
    for j in 1..=terms {
        let k = (2 * j - 1) as f64;
        w += 2.0 / (k * PI) * (k * PI * t / 12.0).sin();
    }
    w
}

/// Saturating cross-feeding between the two populations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InteractionSpec {
    pub f_c: f64,
    pub k_f: f64,
    pub g_c: f64,
    pub k_g: f64,
}

// (name, units, description); all required.
const REQUIRED: [(&str, &str, &str); 23] = [
    ("mu_mX", "1/h", "max growth rate of X"),
    ("mu_mZ", "1/h", "max growth rate of Z"),
    ("K_SX", "mg/g", "substrate affinity of X"),
    ("K_PX", "mg/l", "oxygen affinity of X"),
    ("K_NX", "mg/g", "nitrogen affinity of X"),
    ("K_SZ", "mg/g", "substrate affinity of Z"),
    ("K_PZ", "mg/l", "oxygen affinity of Z"),
    ("K_NZ", "mg/g", "nitrogen affinity of Z"),
    ("theta", "dimensionless", "soil moisture content"),
    ("N", "mg/g", "nitrogen concentration (held constant)"),
    ("alpha", "1/(h·conc)", "self-limitation of X"),
    ("beta", "1/(h·conc)", "self-limitation of Z"),
    ("d1", "1/h", "death rate of X"),
    ("d2", "1/h", "death rate of Z"),
    ("L", "conc/h", "constant substrate input"),
    ("D_S", "1/h", "substrate exchange rate"),
    ("D_P", "1/h", "oxygen exchange rate"),
    ("S0", "mg/g", "background substrate"),
    ("P0", "mg/l", "background oxygen"),
    ("Y_XS", "dimensionless", "yield of X on substrate"),
    ("Y_ZS", "dimensionless", "yield of Z on substrate"),
    ("Y_XP", "dimensionless", "yield of X on oxygen"),
    ("Y_ZP", "dimensionless", "yield of Z on oxygen"),
];

// Positive-only entries among REQUIRED.
const POSITIVE: [&str; 11] = [
    "K_SX", "K_PX", "K_NX", "K_SZ", "K_PZ", "K_NZ", "theta", "Y_XS", "Y_ZS", "Y_XP", "Y_ZP",
];

const STRUCTURAL: [(&str, &str, &str); 6] = [
    ("f_c", "1/h", "strength of F[Z]"),
    ("K_F", "conc", "saturation of F[Z]"),
    ("g_c", "1/h", "strength of G[X]"),
    ("K_G", "conc", "saturation of G[X]"),
    ("W_amp", "conc/h", "amplitude of the square-wave source"),
    ("W_offset", "conc/h", "offset added to the square-wave source"),
];

pub fn parameter_names() -> Vec<&'static str> {
    REQUIRED.iter().chain(STRUCTURAL.iter()).map(|r| r.0).collect()
}

#[derive(Debug, Clone, Copy)]
struct Growth {
    mu: f64,
    d_s: f64,
    d_p: f64,
}

// mu_m, K_S, K_P, K_N, theta, N
#[inline]
fn growth(s: f64, p: f64, mu_m: f64, k_s: f64, k_p: f64, k_n: f64, theta: f64, n: f64) -> Growth {
    let ks = theta * k_s;
    let sf = s / (s + ks);
    let pf = p / (p + k_p);
    let nf = n / (n + theta * k_n);
    Growth {
        mu: mu_m * sf * pf * nf,
        d_s: mu_m * ks / ((s + ks) * (s + ks)) * pf * nf,
        d_p: mu_m * sf * k_p / ((p + k_p) * (p + k_p)) * nf,
    }
}

#[inline]
fn saturating(strength: f64, k: f64, v: f64) -> (f64, f64) {
    if strength == 0.0 {
        (0.0, 0.0)
    } else {
        (strength * v / (v + k), strength * k / ((v + k) * (v + k)))
    }
}

struct Pgpr {
    terms: usize,
}

impl Pgpr {
    fn rates(s: &[f64], q: &[f64]) -> (Growth, Growth, (f64, f64), (f64, f64)) {
        let (x, z, sub, oxy) = (s[0], s[1], s[2], s[3]);
        let theta = q[8];
        let nitro = q[9];
        let gx = growth(sub, oxy, q[0], q[2], q[3], q[4], theta, nitro);
        let gz = growth(sub, oxy, q[1], q[5], q[6], q[7], theta, nitro);
        let f = saturating(q[23], q[24], z);
        let g = saturating(q[25], q[26], x);
        (gx, gz, f, g)
    }
}

impl VectorField for Pgpr {
    fn rhs(&self, t: f64, s: &[f64], q: &[f64], ds: &mut [f64]) {
        let (x, z, sub, oxy) = (s[0], s[1], s[2], s[3]);
        let (gx, gz, f, g) = Self::rates(s, q);
        let (alpha, beta, d1, d2, l) = (q[10], q[11], q[12], q[13], q[14]);
        let (d_s, d_p, s0, p0) = (q[15], q[16], q[17], q[18]);
        let (y_xs, y_zs, y_xp, y_zp) = (q[19], q[20], q[21], q[22]);
        let w = q[27] * fourier_square_wave(t, self.terms) + q[28];
        ds[0] = x * (gx.mu + f.0 - alpha * x - d1);
        ds[1] = z * (gz.mu + g.0 - beta * z - d2);
        ds[2] = w + l - d_s * (sub - s0) - x * gx.mu / y_xs - z * gz.mu / y_zs;
        ds[3] = d_p * (p0 - oxy) - x * gx.mu / y_xp - z * gz.mu / y_zp;
    }

    fn jacobian(&self, _t: f64, s: &[f64], q: &[f64], j: &mut [f64]) -> bool {
        let (x, z) = (s[0], s[1]);
        let (gx, gz, f, g) = Self::rates(s, q);
        let (alpha, beta, d1, d2) = (q[10], q[11], q[12], q[13]);
        let (d_s, d_p) = (q[15], q[16]);
        let (y_xs, y_zs, y_xp, y_zp) = (q[19], q[20], q[21], q[22]);
        j.copy_from_slice(&[
            gx.mu + f.0 - 2.0 * alpha * x - d1,
            x * f.1,
            x * gx.d_s,
            x * gx.d_p,
            //
            z * g.1,
            gz.mu + g.0 - 2.0 * beta * z - d2,
            z * gz.d_s,
            z * gz.d_p,
            //
            -gx.mu / y_xs,
            -gz.mu / y_zs,
            -d_s - x * gx.d_s / y_xs - z * gz.d_s / y_zs,
            -x * gx.d_p / y_xs - z * gz.d_p / y_zs,
            //
            -gx.mu / y_xp,
            -gz.mu / y_zp,
            -x * gx.d_s / y_xp - z * gz.d_s / y_zp,
            -d_p - x * gx.d_p / y_xp - z * gz.d_p / y_zp,
        ]);
        true
    }
}

fn build(
    values: Option<&BTreeMap<String, f64>>,
    forcing_terms: usize,
    interaction: InteractionSpec,
    amplitude: f64,
    offset: f64,
    initial_state: Option<[f64; 4]>,
) -> Result<SystemDefinition> {
    let mut params: Vec<ParamDescriptor> = REQUIRED
        .iter()
        .map(|(name, units, desc)| match values {
            Some(v) => ParamDescriptor::new(name, v[*name], units, desc),
            None => ParamDescriptor::required(name, units, desc),
        })
        .collect();
    let structural = [
        interaction.f_c,
        interaction.k_f,
        interaction.g_c,
        interaction.k_g,
        amplitude,
        offset,
    ];
    params.extend(
        STRUCTURAL
            .iter()
            .zip(structural)
            .map(|((name, units, desc), v)| ParamDescriptor::new(name, v, units, desc)),
    );
    let states = ["X", "Z", "S", "P"]
        .iter()
        .enumerate()
        .map(|(i, name)| StateDescriptor {
            name: (*name).to_owned(),
            default: initial_state.map(|s| s[i]),
        })
        .collect();
    SystemDefinition::new(
        ID,
        "rhizosphere bacteria (X, Z) on substrate S and oxygen P with 24 h square-wave source",
        states,
        params,
        true,
        Arc::new(Pgpr { terms: forcing_terms }),
    )
}

/// Catalog entry with every rate constant marked as required.
pub fn template(forcing_terms: usize) -> SystemDefinition {
    build(None, forcing_terms, InteractionSpec::default(), 1.0, 0.0, None)
        .expect("template is structurally valid")
}

/// Builds the model from a complete parameter table. `W_amp` and
/// `W_offset` may be included to override the unit square wave.
pub fn make_pgpr(
    table: &BTreeMap<String, f64>,
    forcing_terms: usize,
    interaction: InteractionSpec,
) -> Result<SystemDefinition> {
    for (name, _, _) in REQUIRED {
        let v = *table
            .get(name)
            .ok_or_else(|| Error::MissingParameter(name.to_owned()))?;
        if !v.is_finite() {
            return Err(invalid(format!("pgpr parameter `{name}` must be finite")));
        }
    }
    for name in POSITIVE {
        if table[name] <= 0.0 {
            return Err(invalid(format!("pgpr parameter `{name}` must be positive")));
        }
    }
    if (interaction.f_c != 0.0 && interaction.k_f <= 0.0)
        || (interaction.g_c != 0.0 && interaction.k_g <= 0.0)
    {
        return Err(invalid("interaction saturation constants must be positive when active"));
    }
    let amplitude = table.get("W_amp").copied().unwrap_or(1.0);
    let offset = table.get("W_offset").copied().unwrap_or(0.0);
    build(Some(table), forcing_terms, interaction, amplitude, offset, None)
}

/// JSON configuration: `{"params": {...}, "forcing_terms": 25,
/// "interaction": {"f_c":..,"K_F":..,"g_c":..,"K_G":..},
/// "initial_state": {"X":..,"Z":..,"S":..,"P":..}}`.
#[derive(Debug, Clone, serde::Deserialize)]
pub struct PgprConfig {
    pub params: BTreeMap<String, f64>,
    #[serde(default = "default_terms")]
    pub forcing_terms: usize,
    #[serde(default)]
    pub interaction: BTreeMap<String, f64>,
    #[serde(default)]
    pub initial_state: BTreeMap<String, f64>,
}

fn default_terms() -> usize {
    DEFAULT_FORCING_TERMS
}

impl PgprConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| invalid(format!("pgpr config: {e}")))
    }

    pub fn build(&self) -> Result<SystemDefinition> {
        let get = |k: &str| self.interaction.get(k).copied().unwrap_or(0.0);
        let interaction = InteractionSpec {
            f_c: get("f_c"),
            k_f: get("K_F"),
            g_c: get("g_c"),
            k_g: get("K_G"),
        };
        let sys = make_pgpr(&self.params, self.forcing_terms, interaction)?;
        if self.initial_state.is_empty() {
            return Ok(sys);
        }
        let mut ic = [0.0; 4];
        for (i, name) in ["X", "Z", "S", "P"].iter().enumerate() {
            ic[i] = *self
                .initial_state
                .get(*name)
                .ok_or_else(|| Error::MissingParameter(format!("ic.{name}")))?;
        }
        let amplitude = self.params.get("W_amp").copied().unwrap_or(1.0);
        let offset = self.params.get("W_offset").copied().unwrap_or(0.0);
        build(Some(&self.params), self.forcing_terms, interaction, amplitude, offset, Some(ic))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn table() -> BTreeMap<String, f64> {
        let vals = [
            0.6, 0.4, 2.0, 0.5, 0.1, 3.0, 0.4, 0.2, 0.3, 1.0, 0.02, 0.03, 0.05, 0.04, 0.1, 0.2,
            0.3, 1.0, 8.0, 0.5, 0.4, 0.6, 0.7,
        ];
        REQUIRED
            .iter()
            .zip(vals)
            .map(|((n, _, _), v)| ((*n).to_owned(), v))
            .collect()
    }

    #[test]
    fn square_wave_edge_values() {
        for t in [0.0, 3.3, 17.0, 100.0] {
            assert_eq!(fourier_square_wave(t, 0), 0.5);
        }
        for k in [1, 5, 25, 200] {
            assert_eq!(fourier_square_wave(0.0, k), 0.5);
        }
        let w = fourier_square_wave(6.0, 25);
        assert!((w - 1.0).abs() < 0.03, "{w}");
        assert!((fourier_square_wave(18.0, 25)).abs() < 0.03);
    }

    #[test]
    fn square_wave_partial_sum_oracle_at_quarter_period() {
        // At t = 6 the sine factors are sin((2j-1)π/2) = (-1)^(j+1), so the
        // partial sum is 1/2 + (2/π)·Σ (-1)^(j+1)/(2j-1), a Leibniz sum.
        let leibniz: f64 = (1..=25).map(|j| if j % 2 == 1 { 1.0 } else { -1.0 } / (2 * j - 1) as f64).sum();
        let expect = 0.5 + 2.0 / PI * leibniz;
        assert!((fourier_square_wave(6.0, 25) - expect).abs() < 1e-12);
    }

    #[test]
    fn periodicity() {
        for &t in &[0.1, 5.0, 11.9, 13.7, 23.0] {
            let a = fourier_square_wave(t, 25);
            let b = fourier_square_wave(t + FORCING_PERIOD, 25);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_and_invalid_parameters() {
        let mut t = table();
        t.remove("K_SX");
        assert_eq!(
            make_pgpr(&t, 25, InteractionSpec::default()).unwrap_err(),
            Error::MissingParameter("K_SX".into())
        );
        let mut t = table();
        t.insert("K_PZ".into(), 0.0);
        assert!(make_pgpr(&t, 25, InteractionSpec::default()).is_err());
        let bad = InteractionSpec { f_c: 0.1, ..Default::default() };
        assert!(make_pgpr(&table(), 25, bad).is_err());
    }

    #[test]
    fn template_has_no_hidden_defaults() {
        let sys = template(25);
        assert!(sys.default_params().is_err());
        assert!(sys.default_state().is_err());
        let structural: Vec<_> = sys.params().iter().filter(|p| p.default.is_some()).collect();
        assert_eq!(structural.len(), 6);
    }

    #[test]
    fn empty_populations_stay_empty() {
        let sys = make_pgpr(&table(), 25, InteractionSpec { f_c: 0.2, k_f: 1.0, g_c: 0.1, k_g: 2.0 }).unwrap();
        let p = sys.default_params().unwrap();
        let d = sys.eval_rhs(3.0, &[0.0, 0.0, 1.5, 6.0], &p).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn growth_saturates_at_max_rate() {
        let (mu_m, k_s, k_p, k_n, theta) = (0.6, 2.0, 0.5, 0.1, 0.3);
        let g = growth(1e6 * theta * k_s, 1e6 * k_p, mu_m, k_s, k_p, k_n, theta, 1e6 * theta * k_n);
        assert!((g.mu - mu_m).abs() / mu_m < 0.01);
        assert!(g.mu < mu_m);
    }

    #[test]
    fn config_with_initial_state() {
        let json = serde_json::json!({
            "params": table(),
            "interaction": {"f_c": 0.1, "K_F": 0.5},
            "initial_state": {"X": 0.1, "Z": 0.2, "S": 1.0, "P": 8.0}
        })
        .to_string();
        let sys = PgprConfig::from_json(&json).unwrap().build().unwrap();
        assert_eq!(sys.default_state().unwrap(), vec![0.1, 0.2, 1.0, 8.0]);
        let f_c = sys.param_index("f_c").unwrap();
        assert_eq!(sys.default_params().unwrap()[f_c], 0.1);
    }
}
