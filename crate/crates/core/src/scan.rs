//! One-parameter bifurcation scans and trajectory export.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::integrator::{integrate, IntegrationConfig, Propagator, Termination, Trajectory};
use crate::model::{SamplePoint, SystemDefinition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BifurcationConfig {
    pub param_name: String,
    pub lo: f64,
    pub hi: f64,
    pub n_param_points: usize,
    pub t_total: f64,
    pub window_start: f64,
    pub window_samples: usize,
    pub observables: Vec<String>,
}

impl Default for BifurcationConfig {
    fn default() -> Self {
        Self {
            param_name: String::new(),
            lo: 0.0,
            hi: 1.0,
            n_param_points: 100,
            t_total: 7500.0,
            window_start: 7000.0,
            window_samples: 500,
            observables: Vec::new(),
        }
    }
}

impl BifurcationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) {
            return Err(invalid("scan range needs lo < hi"));
        }
        if self.n_param_points < 1 {
            return Err(invalid("n_param_points must be at least 1"));
        }
        if !(self.window_start < self.t_total) {
            return Err(invalid("window_start must precede t_total"));
        }
        if self.window_samples < 1 {
            return Err(invalid("window_samples must be at least 1"));
        }
        Ok(())
    }

    /// Evenly spaced, ascending, both ends included. One point means `lo`.
    pub fn param_grid(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.n_param_points)
    }

    /// Recording times; a single sample is taken at `t_total`.
    pub fn window_times(&self) -> Vec<f64> {
        if self.window_samples == 1 {
            vec![self.t_total]
        } else {
            linspace(self.window_start, self.t_total, self.window_samples)
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + h * i as f64 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanColumn {
    pub param_value: f64,
    pub observable: String,
    /// Empty when `flag` is set.
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<Termination>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub param_name: String,
    pub times: Vec<f64>,
    pub columns: Vec<ScanColumn>,
}

impl ScanResult {
    pub fn column(&self, param_value: f64, observable: &str) -> Option<&ScanColumn> {
        self.columns
            .iter()
            .find(|c| c.param_value == param_value && c.observable == observable)
    }

    /// Long format `param_value,observable,t,value`; flagged columns are
    /// listed afterwards as `#flagged,<param_value>,<observable>,<reason>`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "param_value,observable,t,value")?;
        for c in self.columns.iter().filter(|c| c.flag.is_none()) {
            for (t, v) in self.times.iter().zip(&c.values) {
                writeln!(w, "{},{},{},{}", c.param_value, c.observable, t, v)?;
            }
        }
        for c in &self.columns {
            if let Some(f) = c.flag {
                writeln!(w, "#flagged,{},{},{}", c.param_value, c.observable, f.as_str())?;
            }
        }
        Ok(())
    }
}

/// Integrates from `base` at each grid value of the scanned parameter and
/// records the observables over the window.
pub fn bifurcation_scan(
    system: &SystemDefinition,
    base: &SamplePoint,
    cfg: &BifurcationConfig,
    int_cfg: &IntegrationConfig,
    workers: usize,
) -> Result<ScanResult> {
    cfg.validate()?;
    int_cfg.validate()?;
    system.check_sample(base)?;
    if workers == 0 {
        return Err(invalid("workers must be at least 1"));
    }
    let pi = system.param_index(&cfg.param_name).ok_or_else(|| Error::UnknownCoordinate {
        system: system.id().to_owned(),
        name: cfg.param_name.clone(),
    })?;
    let obs = cfg
        .observables
        .iter()
        .map(|o| {
            system.state_index(o).ok_or_else(|| Error::UnknownCoordinate {
                system: system.id().to_owned(),
                name: o.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if obs.is_empty() {
        return Err(invalid("no observables"));
    }
    if cfg.window_start < int_cfg.t0 {
        return Err(invalid("window starts before t0"));
    }
    let times = cfg.window_times();
    let grid = cfg.param_grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| invalid(format!("worker pool: {e}")))?;
    let per_point: Vec<Vec<ScanColumn>> = pool.install(|| {
        grid.par_iter()
            .map(|&pv| {
                let mut params = base.param_values.clone();
                params[pi] = pv;
                let (flag, series) = run_window(system, &params, &base.initial_state, &times, &obs, int_cfg);
                obs.iter()
                    .zip(&cfg.observables)
                    .zip(series)
                    .map(|((_, name), values)| ScanColumn {
                        param_value: pv,
                        observable: name.clone(),
                        values: if flag.is_some() { Vec::new() } else { values },
                        flag,
                    })
                    .collect()
            })
            .collect()
    });
    Ok(ScanResult {
        param_name: cfg.param_name.clone(),
        times,
        columns: per_point.into_iter().flatten().collect(),
    })
}

fn run_window(
    system: &SystemDefinition,
    params: &[f64],
    y0: &[f64],
    times: &[f64],
    obs: &[usize],
    int_cfg: &IntegrationConfig,
) -> (Option<Termination>, Vec<Vec<f64>>) {
    let mut prop = Propagator::new(system, params, int_cfg.dt, int_cfg.blowup_cap);
    let mut y = y0.to_vec();
    let mut t = int_cfg.t0;
    let mut series = vec![Vec::with_capacity(times.len()); obs.len()];
    for &target in times {
        if target > t {
            let (term, _) = prop.advance(&mut y, t, target, |_, _, _| {});
            if term.is_early() {
                return (Some(term), series);
            }
            t = target;
        }
        for (s, &i) in series.iter_mut().zip(obs) {
            s.push(y[i]);
        }
    }
    (None, series)
}

/// Size of the largest subset of `values` whose members are pairwise more
/// than `rel·(max − min)` apart (greedy over the sorted values, which is
/// optimal in one dimension).
pub fn spread_count(values: &[f64], rel: f64) -> usize {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return 0;
    }
    v.sort_by(f64::total_cmp);
    let thr = rel * (v[v.len() - 1] - v[0]);
    let mut count = 1;
    let mut last = v[0];
    for &x in &v[1..] {
        if x - last > thr {
            count += 1;
            last = x;
        }
    }
    count
}

/// Integrates and writes every `stride`-th state as CSV; a blowup leaves
/// the partial data followed by a `#terminated` row.
pub fn export_trajectory<W: Write>(
    system: &SystemDefinition,
    sample: &SamplePoint,
    t_end: f64,
    int_cfg: &IntegrationConfig,
    stride: usize,
    w: W,
) -> Result<Trajectory> {
    if stride < 1 {
        return Err(invalid("stride must be at least 1"));
    }
    let cfg = IntegrationConfig {
        record_stride: stride,
        ..*int_cfg
    };
    let traj = integrate(system, sample, t_end, &cfg)?;
    traj.write_csv(&system.state_names(), w)
        .map_err(|e| invalid(format!("writing trajectory: {e}")))?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testsys;

    fn relax_cfg(points: usize, window_samples: usize) -> BifurcationConfig {
        BifurcationConfig {
            param_name: "p".into(),
            lo: 0.0,
            hi: 1.0,
            n_param_points: points,
            t_total: 40.0,
            window_start: 30.0,
            window_samples,
            observables: vec!["y".into()],
        }
    }

    #[test]
    fn relax_tracks_fixed_point() {
        let sys = testsys::relax();
        let base = sys.default_sample().unwrap();
        let res = bifurcation_scan(&sys, &base, &relax_cfg(11, 20), &IntegrationConfig::with_dt(0.01), 2).unwrap();
        assert_eq!(res.columns.len(), 11);
        assert_eq!(res.times.len(), 20);
        assert_eq!(res.times[0], 30.0);
        assert_eq!(*res.times.last().unwrap(), 40.0);
        for c in &res.columns {
            assert_eq!(c.values.len(), 20);
            assert!(c.values.iter().all(|v| (v - c.param_value).abs() < 1e-6));
        }
        let grid: Vec<f64> = res.columns.iter().map(|c| c.param_value).collect();
        assert_eq!(grid.first(), Some(&0.0));
        assert_eq!(grid.last(), Some(&1.0));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn single_window_sample_is_the_endpoint() {
        let sys = testsys::relax();
        let res = bifurcation_scan(&sys, &sys.default_sample().unwrap(), &relax_cfg(3, 1), &IntegrationConfig::default(), 1).unwrap();
        assert_eq!(res.times, [40.0]);
        assert!(res.columns.iter().all(|c| c.values.len() == 1));
    }

    #[test]
    fn single_point_scan() {
        let sys = testsys::relax();
        let res = bifurcation_scan(&sys, &sys.default_sample().unwrap(), &relax_cfg(1, 5), &IntegrationConfig::default(), 1).unwrap();
        assert_eq!(res.columns.len(), 1);
        assert_eq!(res.columns[0].param_value, 0.0);
    }

    #[test]
    fn workers_do_not_change_results() {
        let sys = testsys::lorenz();
        let cfg = BifurcationConfig {
            param_name: "rho".into(),
            lo: 20.0,
            hi: 30.0,
            n_param_points: 5,
            t_total: 20.0,
            window_start: 10.0,
            window_samples: 50,
            observables: vec!["x".into(), "z".into()],
        };
        let base = sys.default_sample().unwrap();
        let a = bifurcation_scan(&sys, &base, &cfg, &IntegrationConfig::default(), 1).unwrap();
        let b = bifurcation_scan(&sys, &base, &cfg, &IntegrationConfig::default(), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.columns.len(), 10);
        assert_eq!(a.columns[1].observable, "z");
    }

    #[test]
    fn blowup_columns_are_flagged() {
        let sys = testsys::blowup();
        let cfg = BifurcationConfig {
            param_name: "k".into(),
            lo: -1.0,
            hi: 1.0,
            n_param_points: 3,
            t_total: 3.0,
            window_start: 2.0,
            window_samples: 4,
            observables: vec!["y".into()],
        };
        let res = bifurcation_scan(&sys, &sys.default_sample().unwrap(), &cfg, &IntegrationConfig::default(), 1).unwrap();
        let last = &res.columns[2];
        assert_eq!(last.flag, Some(Termination::Blowup));
        assert!(last.values.is_empty());
        assert!(res.columns[0].flag.is_none());
        let mut out = Vec::new();
        res.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("param_value,observable,t,value\n"));
        assert!(text.ends_with("#flagged,1,y,blowup\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 4 + 1);
    }

    #[test]
    fn bad_scans_are_rejected() {
        let sys = testsys::relax();
        let base = sys.default_sample().unwrap();
        let ic = IntegrationConfig::default();
        let mut cfg = relax_cfg(2, 2);
        cfg.param_name = "q".into();
        assert!(bifurcation_scan(&sys, &base, &cfg, &ic, 1).is_err());
        let mut cfg = relax_cfg(2, 2);
        cfg.observables = vec!["w".into()];
        assert!(bifurcation_scan(&sys, &base, &cfg, &ic, 1).is_err());
        let mut cfg = relax_cfg(2, 2);
        cfg.window_start = 50.0;
        assert!(bifurcation_scan(&sys, &base, &cfg, &ic, 1).is_err());
    }

    #[test]
    fn spread_counts() {
        assert_eq!(spread_count(&[1.0; 10], 1e-3), 1);
        let v: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(spread_count(&v, 1e-3), 100);
        assert_eq!(spread_count(&[0.0, 0.0005, 1.0], 1e-3), 2);
        assert_eq!(spread_count(&[], 1e-3), 0);
    }

    #[test]
    fn export_decays_and_flags() {
        let sys = testsys::linear_diag();
        let mut out = Vec::new();
        let traj = export_trajectory(&sys, &sys.default_sample().unwrap(), 5.0, &IntegrationConfig::with_dt(0.01), 10, &mut out).unwrap();
        let norms: Vec<f64> = traj.states.iter().map(|s| s.iter().map(|v| v * v).sum::<f64>()).collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(String::from_utf8(out).unwrap().lines().next(), Some("t,u,v"));

        let sys = testsys::blowup();
        let mut out = Vec::new();
        let traj = export_trajectory(&sys, &sys.default_sample().unwrap(), 2.0, &IntegrationConfig::default(), 5, &mut out).unwrap();
        assert!(traj.terminated_early);
        assert!(String::from_utf8(out).unwrap().trim_end().ends_with("#terminated,blowup"));
        assert!(export_trajectory(&sys, &sys.default_sample().unwrap(), 2.0, &IntegrationConfig::default(), 0, Vec::new()).is_err());
    }
}
