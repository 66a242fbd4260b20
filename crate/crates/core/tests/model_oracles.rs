use chaos_core::integrator::{integrate, IntegrationConfig};
use chaos_core::model::SystemDefinition;
use chaos_core::models::becks::{self, BecksParams, BecksScaling};
use chaos_core::models::pgpr::{fourier_square_wave, PgprConfig, FORCING_PERIOD};
use chaos_core::models::{kot, lookup, quadratic3, testsys};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PGPR_CONFIG: &str = include_str!("../../../configs/pgpr_illustrative.json");

/// Central differences with a step relative to each coordinate, written
/// independently of the library's own fallback.
fn fd_oracle(sys: &SystemDefinition, t: f64, y: &[f64], p: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut jac = vec![0.0; n * n];
    for j in 0..n {
        let h = 1e-5 * y[j].abs().max(1e-9);
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        yp[j] += h;
        ym[j] -= h;
        let fp = sys.eval_rhs(t, &yp, p).unwrap();
        let fm = sys.eval_rhs(t, &ym, p).unwrap();
        for i in 0..n {
            jac[i * n + j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

fn max_rel_discrepancy(analytic: &[f64], fd: &[f64]) -> f64 {
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    analytic
        .iter()
        .zip(fd)
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max)
}

fn check_jacobian(sys: &SystemDefinition, ranges: &[(f64, f64)], seed: u64) {
    assert!(sys.has_analytic_jacobian(), "{}", sys.id());
    let p = sys.default_params().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let y: Vec<f64> = ranges.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
        let t = rng.random_range(0.0..50.0);
        let a = sys.eval_jacobian(t, &y, &p).unwrap();
        let fd = fd_oracle(sys, t, &y, &p);
        worst = worst.max(max_rel_discrepancy(&a.data, &fd));
    }
    assert!(worst <= 1e-4, "{}: {worst}", sys.id());
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let coeffs: Vec<f64> = (0..quadratic3::N_COEFFS).map(|_| rng.random_range(-5.0..5.0)).collect();
    check_jacobian(&quadratic3::make_quadratic3(&coeffs).unwrap(), &[(-5.0, 5.0); 3], 1);
    check_jacobian(&lookup(kot::ID).unwrap(), &[(0.05, 1.5); 3], 2);
    check_jacobian(&becks::default_dim_system(), &[(1e-7, 1e-4), (1e-7, 1e-4), (1e-7, 1e-4), (1e-6, 1e-3)], 3);
    check_jacobian(&becks::default_rescaled_system(), &[(0.01, 20.0); 4], 4);
    check_jacobian(&PgprConfig::from_json(PGPR_CONFIG).unwrap().build().unwrap(), &[(0.01, 2.0), (0.01, 2.0), (0.01, 3.0), (0.1, 10.0)], 5);
    check_jacobian(&testsys::lorenz(), &[(-20.0, 20.0), (-20.0, 20.0), (0.0, 40.0)], 6);
}

#[test]
fn becks_jacobian_at_the_reference_state() {
    let sys = becks::default_dim_system();
    let y = [1e-6, 1e-6, 1e-6, 1e-5];
    let p = sys.default_params().unwrap();
    let a = sys.eval_jacobian(0.0, &y, &p).unwrap();
    assert!(max_rel_discrepancy(&a.data, &fd_oracle(&sys, 0.0, &y, &p)) <= 1e-4);
}

#[test]
fn quadratic3_divergence_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let c: Vec<f64> = (0..quadratic3::N_COEFFS).map(|_| rng.random_range(-5.0..5.0)).collect();
        let s: Vec<f64> = (0..3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let sys = quadratic3::make_quadratic3(&c).unwrap();
        let trace = sys.eval_jacobian(0.0, &s, &c).unwrap().trace();
        // b_x1 + b_y2 + b_z3 + (2c_x1 + c_y2 + c_z3)x + (c_x2 + 2c_y4 + c_z5)y + (c_x3 + c_y5 + 2c_z6)z
        let (x, y, z) = (s[0], s[1], s[2]);
        let expect = c[1] + c[12] + c[23]
            + (2.0 * c[4] + c[15] + c[26]) * x
            + (c[5] + 2.0 * c[17] + c[28]) * y
            + (c[6] + c[18] + 2.0 * c[29]) * z;
        assert!((trace - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        assert!((quadratic3::divergence_closed_form(&c, &s) - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
    }
}

#[test]
fn quadratic3_five_coefficient_expansion() {
    let names = quadratic3::coefficient_names();
    let idx = |n: &str| names.iter().position(|m| m == n).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut c = vec![0.0; quadratic3::N_COEFFS];
    let (cx5, by1, by2, az1, cz2) = (
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    c[idx("c_x5")] = cx5;
    c[idx("b_y1")] = by1;
    c[idx("b_y2")] = by2;
    c[idx("a_z1")] = az1;
    c[idx("c_z2")] = cz2;
    let sys = quadratic3::make_quadratic3(&c).unwrap();
    let s = [1.3, -0.7, 2.1];
    let (x, y, z) = (s[0], s[1], s[2]);
    let f = sys.eval_rhs(0.0, &s, &c).unwrap();
    let expect = [cx5 * y * z, by1 * x + by2 * y, az1 + cz2 * x * y];
    for (a, b) in f.iter().zip(expect) {
        assert!((a - b).abs() < 1e-12, "{f:?} vs {expect:?}");
    }
}

#[test]
fn kot_divergence_golden_value() {
    let sys = lookup(kot::ID).unwrap();
    let sample = sys.default_sample().unwrap();
    assert_eq!(sample.initial_state, vec![0.42, 0.4, 0.42]);
    let fd = fd_oracle(&sys, 0.0, &sample.initial_state, &sample.param_values);
    let fd_trace = fd[0] + fd[4] + fd[8];
    let d = sys.divergence_at(&sample).unwrap();
    assert!((d - fd_trace).abs() < 1e-6);
    assert!((d - 1.5888770981114562).abs() < 1e-12, "{d}");
}

#[test]
fn becks_dual_integration_consistency() {
    let table = BecksParams::default();
    let dilution = 0.5;
    let dim = becks::make_becks_dim(&table, dilution, becks::DEFAULT_INFLOW).unwrap();
    let hat = becks::becks_rescale_params(&table, dilution, becks::DEFAULT_INFLOW).unwrap();
    let scaling = BecksScaling::new(&table, dilution);
    let y0 = [1e-6, 1e-6, 1e-6, becks::DEFAULT_INFLOW];
    let resc = becks::make_becks_rescaled(&hat, scaling.to_rescaled(&y0)).unwrap();

    let t_rescaled = 50.0;
    let dt_rescaled = 1e-3;
    let stride = 1000;
    let a = integrate(
        &dim,
        &dim.default_sample().unwrap(),
        t_rescaled / scaling.rate,
        &IntegrationConfig {
            dt: dt_rescaled / scaling.rate,
            record_stride: stride,
            ..IntegrationConfig::default()
        },
    )
    .unwrap();
    let b = integrate(
        &resc,
        &resc.default_sample().unwrap(),
        t_rescaled,
        &IntegrationConfig {
            dt: dt_rescaled,
            record_stride: stride,
            ..IntegrationConfig::default()
        },
    )
    .unwrap();
    assert!(!a.terminated_early && !b.terminated_early);
    assert_eq!(a.times.len(), b.times.len());
    assert_eq!(a.times.len(), 51);
    for (ya, yb) in a.states.iter().zip(&b.states) {
        let mapped = scaling.to_dimensional(yb);
        for (u, v) in ya.iter().zip(mapped) {
            assert!((u - v).abs() <= 1e-5 * u.abs().max(v.abs()), "{ya:?} vs {mapped:?}");
        }
    }

    // divergence signs agree at the mapped initial point
    let dd = dim.divergence_at(&dim.default_sample().unwrap()).unwrap();
    let dr = resc.divergence_at(&resc.default_sample().unwrap()).unwrap();
    assert_eq!(dd.signum(), dr.signum());
    assert!((dd / scaling.rate - dr).abs() <= 1e-9 * dr.abs());
}

#[test]
fn square_wave_period_average() {
    for k in [0, 1, 2, 5, 25, 100] {
        // The rectangle rule is exact for trigonometric polynomials whose
        // degree is below the node count.
        let n = 4096;
        let h = FORCING_PERIOD / n as f64;
        let avg: f64 = (0..n).map(|i| fourier_square_wave(i as f64 * h, k)).sum::<f64>() / n as f64;
        assert!((avg - 0.5).abs() <= 1e-12, "K={k}: {avg}");
    }
}

#[test]
fn pgpr_illustrative_config_integrates() {
    let sys = PgprConfig::from_json(PGPR_CONFIG).unwrap().build().unwrap();
    let traj = integrate(&sys, &sys.default_sample().unwrap(), 240.0, &IntegrationConfig::with_dt(0.01)).unwrap();
    assert!(!traj.terminated_early);
    assert!(traj.final_state().unwrap().iter().all(|v| v.is_finite() && *v >= -1e-9));
}
