//! Fixed-step classical Runge-Kutta integration of a system and of the
//! system augmented with its tangent (variational) equations.
//!
//! Steps lie on the grid `t0 + k·dt`; the last step is shortened so the
//! integration lands exactly on `t_end`. Integration stops early, without
//! recording the offending state, when any state component exceeds the
//! blowup cap or becomes non-finite.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{FdScratch, SamplePoint, SystemDefinition};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t0: f64,
    pub blowup_cap: f64,
    /// Record every `record_stride` steps; 0 keeps only the final state.
    pub record_stride: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t0: 0.0,
            blowup_cap: 1e8,
            record_stride: 0,
        }
    }
}

impl IntegrationConfig {
    pub fn with_dt(dt: f64) -> Self {
        Self {
            dt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.blowup_cap > 0.0) {
            return Err(invalid("blowup_cap must be positive"));
        }
        if !self.t0.is_finite() {
            return Err(invalid("t0 must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Blowup,
    Nonfinite,
}

impl Termination {
    pub fn is_early(self) -> bool {
        self != Termination::Completed
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::Blowup => "blowup",
            Termination::Nonfinite => "nonfinite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub terminated_early: bool,
    pub termination_reason: Termination,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// CSV with header `t,<state names>`. An early termination appends a
    /// `#terminated,<reason>` flag row.
    pub fn write_csv<W: Write>(&self, state_names: &[String], mut w: W) -> io::Result<()> {
        write!(w, "t")?;
        for n in state_names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for (t, row) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        if self.terminated_early {
            writeln!(w, "#terminated,{}", self.termination_reason.as_str())?;
        }
        Ok(())
    }
}

/// Number of steps from `t0` to `t_end` on a grid of spacing `dt`, the last
/// possibly shortened.
pub(crate) fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    let n = ((t_end - t0) / dt - 1e-9).ceil();
    (n.max(1.0)) as usize
}

/// Start and length of step `k` of an `n`-step integration.
#[inline]
pub(crate) fn step_bounds(t0: f64, t_end: f64, dt: f64, k: usize, n: usize) -> (f64, f64) {
    let t = t0 + k as f64 * dt;
    let h = if k + 1 == n { t_end - t } else { dt };
    (t, h)
}

/// Classical RK4 with reusable stage buffers.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(len: usize) -> Self {
        Self {
            k1: vec![0.0; len],
            k2: vec![0.0; len],
            k3: vec![0.0; len],
            k4: vec![0.0; len],
            tmp: vec![0.0; len],
        }
    }

    #[inline]
    pub(crate) fn step<F>(&mut self, f: &mut F, t: f64, y: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * h;
        f(t, y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k1[i];
        }
        f(t + half, &self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + half * self.k2[i];
        }
        f(t + half, &self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..y.len() {
            y[i] += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

#[inline]
pub(crate) fn check_state(y: &[f64], cap: f64) -> Termination {
    let mut status = Termination::Completed;
    for v in y {
        if !v.is_finite() {
            return Termination::Nonfinite;
        }
        if v.abs() > cap {
            status = Termination::Blowup;
        }
    }
    status
}

/// Advances a state between two times; reused by trajectory integration and
/// bifurcation scans.
pub struct Propagator<'a> {
    system: &'a SystemDefinition,
    params: &'a [f64],
    rk: Rk4,
    prev: Vec<f64>,
    dt: f64,
    cap: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(system: &'a SystemDefinition, params: &'a [f64], dt: f64, cap: f64) -> Self {
        Self {
            system,
            params,
            rk: Rk4::new(system.dim()),
            prev: vec![0.0; system.dim()],
            dt,
            cap,
        }
    }

    /// Integrates `y` from `t_from` to `t_to`, calling `after_step(k, t, y)`
    /// after each successful step. Returns the status and the time reached;
    /// on early termination `y` is left at the last accepted state.
    pub fn advance<C>(&mut self, y: &mut [f64], t_from: f64, t_to: f64, mut after_step: C) -> (Termination, f64)
    where
        C: FnMut(usize, f64, &[f64]),
    {
        if t_to <= t_from {
            return (Termination::Completed, t_from);
        }
        let (system, params) = (self.system, self.params);
        let mut f = |t: f64, s: &[f64], ds: &mut [f64]| system.rhs_into(t, s, params, ds);
        let n = step_count(t_from, t_to, self.dt);
        let mut reached = t_from;
        for k in 0..n {
            let (t, h) = step_bounds(t_from, t_to, self.dt, k, n);
            self.prev.copy_from_slice(y);
            self.rk.step(&mut f, t, y, h);
            let status = check_state(y, self.cap);
            if status.is_early() {
                y.copy_from_slice(&self.prev);
                return (status, reached);
            }
            reached = if k + 1 == n { t_to } else { t + h };
            after_step(k, reached, y);
        }
        (Termination::Completed, t_to)
    }
}

pub fn integrate(
    system: &SystemDefinition,
    sample: &SamplePoint,
    t_end: f64,
    cfg: &IntegrationConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    system.check_sample(sample)?;
    if !(t_end > cfg.t0) {
        return Err(invalid(format!("t_end {t_end} must exceed t0 {}", cfg.t0)));
    }
    let mut y = sample.initial_state.clone();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let stride = cfg.record_stride;
    if stride > 0 {
        times.push(cfg.t0);
        states.push(y.clone());
    }
    let n = step_count(cfg.t0, t_end, cfg.dt);
    let mut prop = Propagator::new(system, &sample.param_values, cfg.dt, cfg.blowup_cap);
    let (status, reached) = prop.advance(&mut y, cfg.t0, t_end, |k, t, s| {
        let last = k + 1 == n;
        if last || (stride > 0 && (k + 1) % stride == 0) {
            times.push(t);
            states.push(s.to_vec());
        }
    });
    // On early exit `y` is the last accepted state.
    if status.is_early() && times.last().map_or(true, |&t| t < reached) {
        times.push(reached);
        states.push(y);
    }
    Ok(Trajectory {
        times,
        states,
        terminated_early: status.is_early(),
        termination_reason: status,
    })
}

/// Result of a tangent-augmented integration.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedOutcome {
    pub state: Vec<f64>,
    /// Column-major `n×n`; column `j` is the `j`-th perturbation vector.
    pub tangent: Vec<f64>,
    /// Accumulated `ln` of each column norm at every renormalization.
    pub log_norm_sums: Vec<f64>,
    pub termination: Termination,
    pub t_reached: f64,
    pub renormalizations: usize,
}

impl AugmentedOutcome {
    pub fn terminated_early(&self) -> bool {
        self.termination.is_early()
    }
}

/// Modified Gram-Schmidt on the columns of a column-major `n×n` matrix.
/// Adds `ln‖v_j‖` to `sums[j]` before normalizing. Returns `false` if a
/// column collapses or goes non-finite.
pub fn gram_schmidt(tangent: &mut [f64], n: usize, sums: &mut [f64]) -> bool {
    for j in 0..n {
        for i in 0..j {
            let (head, tail) = tangent.split_at_mut(j * n);
            let vi = &head[i * n..(i + 1) * n];
            let vj = &mut tail[..n];
            let r: f64 = vi.iter().zip(vj.iter()).map(|(a, b)| a * b).sum();
            for (b, a) in vj.iter_mut().zip(vi) {
                *b -= r * a;
            }
        }
        let vj = &mut tangent[j * n..(j + 1) * n];
        let norm = vj.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return false;
        }
        sums[j] += norm.ln();
        vj.iter_mut().for_each(|v| *v /= norm);
    }
    true
}

/// Co-integrates `dY/dt = f(t, Y)` and `dV/dt = J(t, Y)·V` with a shared RK4
/// step, renormalizing the tangent columns every `renorm_every` steps and
/// once more at the end. `on_renorm(t, sums)` observes each renormalization.
pub fn integrate_augmented(
    system: &SystemDefinition,
    sample: &SamplePoint,
    t_end: f64,
    cfg: &IntegrationConfig,
    tangent_init: &[f64],
    renorm_every: usize,
    mut on_renorm: Option<&mut dyn FnMut(f64, &[f64])>,
) -> Result<AugmentedOutcome> {
    cfg.validate()?;
    system.check_sample(sample)?;
    let n = system.dim();
    if tangent_init.len() != n * n {
        return Err(crate::Error::Dimension {
            what: "tangent",
            got: tangent_init.len(),
            expected: n * n,
        });
    }
    if renorm_every == 0 {
        return Err(invalid("renorm_every must be at least 1"));
    }
    if !(t_end > cfg.t0) {
        return Err(invalid(format!("t_end {t_end} must exceed t0 {}", cfg.t0)));
    }

    let params = sample.param_values.as_slice();
    let mut z = Vec::with_capacity(n + n * n);
    z.extend_from_slice(&sample.initial_state);
    z.extend_from_slice(tangent_init);
    let mut jac = vec![0.0; n * n];
    let mut scratch = FdScratch::new(n);
    let mut f = |t: f64, s: &[f64], ds: &mut [f64]| {
        let (y, v) = s.split_at(n);
        let (dy, dv) = ds.split_at_mut(n);
        system.rhs_into(t, y, params, dy);
        system.jacobian_into(t, y, params, &mut jac, &mut scratch);
        // dV = J·V, column by column
        for col in 0..n {
            let vc = &v[col * n..(col + 1) * n];
            let out = &mut dv[col * n..(col + 1) * n];
            for (i, o) in out.iter_mut().enumerate() {
                let row = &jac[i * n..(i + 1) * n];
                *o = row.iter().zip(vc).map(|(a, b)| a * b).sum();
            }
        }
    };

    let mut rk = Rk4::new(n + n * n);
    let mut sums = vec![0.0; n];
    let steps = step_count(cfg.t0, t_end, cfg.dt);
    let mut since = 0usize;
    let mut renorms = 0usize;
    let mut status = Termination::Completed;
    let mut reached = cfg.t0;
    let mut last_good = z.clone();
    for k in 0..steps {
        let (t, h) = step_bounds(cfg.t0, t_end, cfg.dt, k, steps);
        rk.step(&mut f, t, &mut z, h);
        status = check_state(&z[..n], cfg.blowup_cap);
        if status == Termination::Completed && z[n..].iter().any(|v| !v.is_finite()) {
            status = Termination::Nonfinite;
        }
        if status.is_early() {
            z.copy_from_slice(&last_good);
            break;
        }
        reached = if k + 1 == steps { t_end } else { t + h };
        since += 1;
        if since == renorm_every || k + 1 == steps {
            if !gram_schmidt(&mut z[n..], n, &mut sums) {
                status = Termination::Nonfinite;
                break;
            }
            since = 0;
            renorms += 1;
            if let Some(cb) = on_renorm.as_deref_mut() {
                cb(reached, &sums);
            }
        }
        last_good.copy_from_slice(&z);
    }
    let tangent = z.split_off(n);
    Ok(AugmentedOutcome {
        state: z,
        tangent,
        log_norm_sums: sums,
        termination: status,
        t_reached: reached,
        renormalizations: renorms,
    })
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{lookup, testsys};

    fn sample(sys: &SystemDefinition) -> SamplePoint {
        sys.default_sample().unwrap()
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let sys = testsys::decay();
        let cfg = IntegrationConfig::with_dt(1e-3);
        let tr = integrate(&sys, &sample(&sys), 1.0, &cfg).unwrap();
        assert_eq!(tr.termination_reason, Termination::Completed);
        assert_eq!(tr.times, vec![1.0]);
        assert!((tr.states[0][0] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn fourth_order_convergence() {
        let sys = testsys::decay();
        let err = |dt: f64| {
            let tr = integrate(&sys, &sample(&sys), 1.0, &IntegrationConfig::with_dt(dt)).unwrap();
            (tr.states[0][0] - (-1.0f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_field_is_stationary() {
        let sys = lookup("quadratic3").unwrap();
        let s = sample(&sys);
        let cfg = IntegrationConfig {
            record_stride: 10,
            ..IntegrationConfig::with_dt(0.1)
        };
        let tr = integrate(&sys, &s, 5.0, &cfg).unwrap();
        assert_eq!(tr.termination_reason, Termination::Completed);
        assert!(tr.states.iter().all(|r| *r == s.initial_state));
        assert_eq!(tr.times.first(), Some(&0.0));
        assert_eq!(tr.times.last(), Some(&5.0));
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn finite_time_singularity_terminates() {
        let sys = testsys::blowup();
        let cfg = IntegrationConfig {
            record_stride: 1,
            ..IntegrationConfig::with_dt(1e-3)
        };
        let tr = integrate(&sys, &sample(&sys), 2.0, &cfg).unwrap();
        assert!(tr.terminated_early);
        assert_eq!(tr.termination_reason, Termination::Blowup);
        assert!(*tr.times.last().unwrap() < 1.01);
        assert!(tr.states.iter().all(|r| r[0].is_finite() && r[0].abs() <= 1e8));
    }

    #[test]
    fn partial_last_step_lands_on_end() {
        let sys = testsys::decay();
        let cfg = IntegrationConfig {
            record_stride: 1,
            ..IntegrationConfig::with_dt(0.3)
        };
        let tr = integrate(&sys, &sample(&sys), 1.0, &cfg).unwrap();
        assert_eq!(tr.times.len(), 5);
        assert_eq!(*tr.times.last().unwrap(), 1.0);
        assert!((tr.times[3] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_config() {
        let sys = testsys::decay();
        let s = sample(&sys);
        assert!(integrate(&sys, &s, 0.0, &IntegrationConfig::default()).is_err());
        assert!(integrate(&sys, &s, 1.0, &IntegrationConfig::with_dt(0.0)).is_err());
        let bad = IntegrationConfig { blowup_cap: -1.0, ..Default::default() };
        assert!(integrate(&sys, &s, 1.0, &bad).is_err());
    }

    #[test]
    fn linear_flow_log_norms() {
        let sys = testsys::linear_diag();
        let cfg = IntegrationConfig::with_dt(1e-3);
        let out = integrate_augmented(&sys, &sample(&sys), 10.0, &cfg, &identity(2), 10, None).unwrap();
        assert!(!out.terminated_early());
        assert!((out.log_norm_sums[0] / 10.0 + 1.0).abs() < 1e-6);
        assert!((out.log_norm_sums[1] / 10.0 + 2.0).abs() < 1e-6);
    }

    #[test]
    fn zero_field_keeps_identity_tangent() {
        let sys = lookup("quadratic3").unwrap();
        let cfg = IntegrationConfig::with_dt(0.01);
        let out = integrate_augmented(&sys, &sample(&sys), 1.0, &cfg, &identity(3), 7, None).unwrap();
        assert_eq!(out.tangent, identity(3));
        assert_eq!(out.log_norm_sums, vec![0.0; 3]);
    }

    #[test]
    fn columns_orthonormal_after_each_renormalization() {
        let sys = testsys::lorenz();
        let cfg = IntegrationConfig::with_dt(1e-3);
        let mut checks = 0;
        let mut worst: f64 = 0.0;
        // observe through the returned tangent at several horizons
        for t_end in [0.05, 0.5, 2.0] {
            let mut cb = |_t: f64, _s: &[f64]| checks += 1;
            let out =
                integrate_augmented(&sys, &sample(&sys), t_end, &cfg, &identity(3), 10, Some(&mut cb)).unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| out.tangent[i * 3 + k] * out.tangent[j * 3 + k]).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((dot - expect).abs());
                }
            }
        }
        assert!(checks > 0);
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn fiducial_trajectory_matches_plain_integration_bitwise() {
        for sys in [testsys::lorenz(), lookup("kot_monod").unwrap()] {
            let s = sample(&sys);
            let cfg = IntegrationConfig::with_dt(1e-2);
            let plain = integrate(&sys, &s, 7.25, &cfg).unwrap();
            let n = sys.dim();
            let aug = integrate_augmented(&sys, &s, 7.25, &cfg, &identity(n), 3, None).unwrap();
            assert_eq!(plain.states[0], aug.state);
        }
    }

    #[test]
    fn augmented_blowup_reports_early_termination() {
        let sys = testsys::blowup();
        let cfg = IntegrationConfig::with_dt(1e-3);
        let out = integrate_augmented(&sys, &sample(&sys), 2.0, &cfg, &identity(1), 10, None).unwrap();
        assert!(out.terminated_early());
        assert!(out.t_reached < 1.01);
    }
}
