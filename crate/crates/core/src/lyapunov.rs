//! Full Lyapunov spectra from the tangent-augmented flow, with horizon
//! doubling until the sign pattern of the spectrum is stable.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::integrator::{identity, integrate_augmented, IntegrationConfig, Propagator, Termination};
use crate::model::{SamplePoint, SystemDefinition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LyapunovConfig {
    /// Initial horizon `T0`; horizons `T0, 2T0, 4T0, …` are tried.
    pub horizon: f64,
    pub max_doublings: u32,
    pub renorm_every: usize,
    /// Half-width of the band treated as a zero exponent.
    pub eps_zero: f64,
    /// Fraction of each horizon integrated first and discarded.
    pub transient_fraction: f64,
    #[serde(flatten)]
    pub integration: IntegrationConfig,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        Self {
            horizon: 500.0,
            max_doublings: 6,
            renorm_every: 10,
            eps_zero: 1e-3,
            transient_fraction: 0.1,
            integration: IntegrationConfig::default(),
        }
    }
}

impl LyapunovConfig {
    pub fn validate(&self) -> Result<()> {
        self.integration.validate()?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        if self.max_doublings < 1 {
            return Err(invalid("max_doublings must be at least 1"));
        }
        if self.renorm_every == 0 {
            return Err(invalid("renorm_every must be at least 1"));
        }
        if !(self.eps_zero >= 0.0) {
            return Err(invalid("eps_zero must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.transient_fraction) {
            return Err(invalid("transient_fraction must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Counts of positive, zero and negative exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern {
    pub positive: usize,
    pub zero: usize,
    pub negative: usize,
}

impl SignPattern {
    pub fn of(spectrum: &[f64], eps_zero: f64) -> Self {
        let mut p = SignPattern {
            positive: 0,
            zero: 0,
            negative: 0,
        };
        for &l in spectrum {
            if l > eps_zero {
                p.positive += 1;
            } else if l < -eps_zero {
                p.negative += 1;
            } else {
                p.zero += 1;
            }
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovResult {
    /// Sorted descending, in inverse system time units.
    pub spectrum: Vec<f64>,
    /// Largest exponent; NaN when a horizon diverged.
    pub mle: f64,
    pub t_final: f64,
    pub doublings: u32,
    pub converged: bool,
    pub sign_pattern: SignPattern,
    /// Set when the trajectory blew up at some horizon.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_event: Option<Termination>,
}

impl LyapunovResult {
    pub fn is_diverged(&self) -> bool {
        self.divergence_event.is_some()
    }
}

/// Outcome of a single fixed-horizon spectrum.
#[derive(Debug, Clone, PartialEq)]
pub enum HorizonOutcome {
    Spectrum(Vec<f64>),
    Diverged(Termination),
}

/// Spectrum over horizon `horizon` after a discarded transient of
/// `transient_fraction·horizon`, starting from an identity tangent.
pub fn spectrum_fixed_t(
    system: &SystemDefinition,
    sample: &SamplePoint,
    horizon: f64,
    cfg: &IntegrationConfig,
    renorm_every: usize,
    transient_fraction: f64,
) -> Result<HorizonOutcome> {
    cfg.validate()?;
    system.check_sample(sample)?;
    if !(horizon > 0.0) {
        return Err(invalid("horizon must be positive"));
    }
    let n = system.dim();
    let mut start = sample.clone();
    let mut t_start = cfg.t0;
    let transient = transient_fraction * horizon;
    if transient > 0.0 {
        let mut prop = Propagator::new(system, &sample.param_values, cfg.dt, cfg.blowup_cap);
        let (status, _) = prop.advance(&mut start.initial_state, cfg.t0, cfg.t0 + transient, |_, _, _| {});
        if status.is_early() {
            return Ok(HorizonOutcome::Diverged(status));
        }
        t_start += transient;
    }
    let aug_cfg = IntegrationConfig {
        t0: t_start,
        ..*cfg
    };
    let out = integrate_augmented(
        system,
        &start,
        t_start + horizon,
        &aug_cfg,
        &identity(n),
        renorm_every,
        None,
    )?;
    if out.terminated_early() {
        return Ok(HorizonOutcome::Diverged(out.termination));
    }
    let mut spectrum: Vec<f64> = out.log_norm_sums.iter().map(|s| s / horizon).collect();
    spectrum.sort_by(|a, b| b.total_cmp(a));
    Ok(HorizonOutcome::Spectrum(spectrum))
}

/// Evaluates spectra at `T0, 2T0, 4T0, …` and stops at the first pair of
/// consecutive horizons with the same sign pattern.
pub fn spectrum_with_doubling(
    system: &SystemDefinition,
    sample: &SamplePoint,
    cfg: &LyapunovConfig,
) -> Result<LyapunovResult> {
    cfg.validate()?;
    let mut previous: Option<SignPattern> = None;
    let mut last = Vec::new();
    let mut last_pattern = SignPattern::of(&[], cfg.eps_zero);
    for d in 0..=cfg.max_doublings {
        let horizon = cfg.horizon * 2f64.powi(d as i32);
        let outcome = spectrum_fixed_t(
            system,
            sample,
            horizon,
            &cfg.integration,
            cfg.renorm_every,
            cfg.transient_fraction,
        )?;
        let spectrum = match outcome {
            HorizonOutcome::Spectrum(s) => s,
            HorizonOutcome::Diverged(event) => {
                return Ok(LyapunovResult {
                    spectrum: Vec::new(),
                    mle: f64::NAN,
                    t_final: horizon,
                    doublings: d,
                    converged: false,
                    sign_pattern: SignPattern::of(&[], cfg.eps_zero),
                    divergence_event: Some(event),
                });
            }
        };
        let pattern = SignPattern::of(&spectrum, cfg.eps_zero);
        if previous == Some(pattern) {
            return Ok(LyapunovResult {
                mle: spectrum[0],
                spectrum,
                t_final: horizon,
                doublings: d,
                converged: true,
                sign_pattern: pattern,
                divergence_event: None,
            });
        }
        previous = Some(pattern);
        last = spectrum;
        last_pattern = pattern;
    }
    Ok(LyapunovResult {
        mle: last.first().copied().unwrap_or(f64::NAN),
        spectrum: last,
        t_final: cfg.horizon * 2f64.powi(cfg.max_doublings as i32),
        doublings: cfg.max_doublings,
        converged: false,
        sign_pattern: last_pattern,
        divergence_event: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Chaotic,
    NonChaotic,
    Indeterminate,
}

/// Chaotic iff the divergence is negative and a converged spectrum has a
/// positive largest exponent. Unconverged results are indeterminate.
pub fn classify(divergence: f64, result: &LyapunovResult, eps_zero: f64) -> Classification {
    if !result.converged {
        Classification::Indeterminate
    } else if divergence < 0.0 && result.mle > eps_zero {
        Classification::Chaotic
    } else {
        Classification::NonChaotic
    }
}
