//! Acceptance criteria. Each test prints one `PASS`/`FAIL` line (written to
//! the process stdout directly, so it shows without `--nocapture`) and then
//! asserts. Tests are serialized so that the runtime limits are measured
//! without interference.

use std::io::Write;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tempfile::tempdir;
use visolve::diagnostics::{
    bound_value, check_quasi_sharpness, estimate_linear_growth, find_monotonicity_violation, gaussian_start,
    BoundConstants, Sampler,
};
use visolve::experiments::{preset_config, run_experiment, write_outputs, ExecOptions, PresetOverrides, PRESET_NAMES};
use visolve::operators::{make_example1, SwitchedQuadraticRecipe};
use visolve::schedules::{preset, ScheduleConstants};
use visolve::solvers::popov_step_audit;
use visolve::{run, FeasibleSet, Method, RunOptions, StepsizeSchedule, Theorem, Vector};

static SERIAL: Mutex<()> = Mutex::new(());

fn report(id: u32, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "[acceptance] AC{id} {name}: {verdict} ({detail}; {:.2}s)\n",
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn gaussian(dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(dim, (0..dim).map(|_| {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    }))
}

/// A point of the set drawn independently of the projection under test.
fn point_in(set: &FeasibleSet, rng: &mut ChaCha8Rng) -> Vector {
    match set {
        FeasibleSet::WholeSpace(d) => gaussian(*d, 5.0, rng),
        FeasibleSet::Box { lo, hi } => lo.zip_map(hi, |l, h| l + (h - l) * rng.random::<f64>()),
        FeasibleSet::Ball { center, radius } => {
            let z = gaussian(center.len(), 1.0, rng);
            let r = radius * rng.random::<f64>().powf(1.0 / center.len() as f64);
            center + z.normalize() * r
        }
    }
}

fn random_set(family: usize, rng: &mut ChaCha8Rng) -> FeasibleSet {
    let dim = rng.random_range(1..=6);
    match family {
        0 => {
            let a = gaussian(dim, 2.0, rng);
            let b = gaussian(dim, 2.0, rng);
            FeasibleSet::boxed(a.zip_map(&b, f64::min), a.zip_map(&b, f64::max)).unwrap()
        }
        1 => FeasibleSet::ball(gaussian(dim, 2.0, rng), rng.random_range(0.1..4.0)).unwrap(),
        _ => FeasibleSet::whole_space(dim).unwrap(),
    }
}

#[test]
fn ac1_projection_properties() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [f64::NEG_INFINITY; 3];
    for family in 0..3 {
        for _ in 0..10_000 {
            let set = random_set(family, &mut rng);
            let dim = set.dim();
            let v = gaussian(dim, 5.0, &mut rng);
            let w = gaussian(dim, 5.0, &mut rng);
            let u = point_in(&set, &mut rng);
            let pv = set.project(&v).unwrap();
            let pw = set.project(&w).unwrap();
            worst[0] = worst[0].max((&v - &pv).dot(&(&u - &pv)));
            worst[1] = worst[1].max((&u - &pv).norm_squared() - (&u - &v).norm_squared() + (&v - &pv).norm_squared());
            worst[2] = worst[2].max((&pw - &pv).norm() - (&w - &v).norm());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|w| *w <= 1e-9) && elapsed < Duration::from_secs(5);
    report(
        1,
        "projection properties",
        pass,
        elapsed,
        &format!("max violations {:.2e} / {:.2e} / {:.2e}", worst[0], worst[1], worst[2]),
    );
    assert!(pass);
}

#[test]
fn ac2_example1_certification() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut details = Vec::new();
    let mut pass = true;
    for p in [1.0, 1.5, 2.0] {
        let op = make_example1(p).unwrap();
        let set = FeasibleSet::whole_space(2).unwrap();
        let sampler = Sampler::default_for(&op).with_seed(7);
        let r = check_quasi_sharpness(&op, &set, p, 2f64.powf(1.0 - p), &sampler, 10_000).unwrap();
        pass &= !r.is_violated() && r.max_violation <= 1e-10;
        details.push(format!("p={p}: {:.2e}", r.max_violation));
    }

    // Pairs drawn far from the origin, where F is locally monotone, so the
    // worst pair must be the analytic witness.
    let p = 1.5;
    let op = make_example1(p).unwrap();
    let sampler = Sampler::gaussian(Vector::from_vec(vec![100.0, 100.0]), 1e-3).with_seed(3);
    let r = find_monotonicity_violation(&op, &sampler, 1).unwrap();
    let t = 1.0 + 1.0 / (5.0 * (p - 1.0));
    let expected_ip = -(t - 1.0) * (2.0 - t.powf(p - 1.0));
    let witness_ok = r.is_violated()
        && r.witness == vec![vec![0.0, 1.0], vec![0.0, t]]
        && (-r.max_violation - expected_ip).abs() <= 1e-12
        && expected_ip < 0.0;
    pass &= witness_ok;
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(5);
    report(
        2,
        "example1 certification",
        pass,
        elapsed,
        &format!(
            "sharpness max violation {}; witness inner product {:.6}",
            details.join(", "),
            -r.max_violation
        ),
    );
    assert!(pass);
}

#[test]
fn ac3_growth_falsification() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let op = make_example1(3.0).unwrap();
    let slope = |radius: f64| {
        let sampler = Sampler::uniform_ball(Vector::zeros(2), radius).with_seed(11);
        estimate_linear_growth(&op, &sampler, 5_000).unwrap().c_hat
    };
    let (small, large) = (slope(10.0), slope(1e3));
    let elapsed = start.elapsed();
    let pass = large >= 10.0 * small && small > 0.0 && elapsed < Duration::from_secs(2);
    report(
        3,
        "growth falsification (p = 3)",
        pass,
        elapsed,
        &format!("slope at R=10: {small:.3}, at R=1000: {large:.3}, ratio {:.1}", large / small),
    );
    assert!(pass);
}

#[test]
fn ac4_pathwise_audit() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let recipe = SwitchedQuadraticRecipe::new(4, 4, 0.2, 1.0);
    let mut audited = 0usize;
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = recipe.generate(&mut rng).unwrap();
        let set = FeasibleSet::whole_space(op.dim()).unwrap();
        let u0 = gaussian_start(&set, &mut rng);
        let consts = ScheduleConstants {
            mu: op.declared().mu,
            l: op.declared().lipschitz,
            ..Default::default()
        };
        let sched = preset(Theorem::Thm4, &consts, 500).unwrap();
        let opts = RunOptions::new(500, 1000 + seed).audited();
        let traj = run(Method::Popov, &op, &set, &sched, &u0, &u0, &opts).unwrap();
        let y = op.solution_set().points()[0].clone();
        for e in popov_step_audit(&traj, &y).unwrap() {
            audited += 1;
            worst = worst.max(e.excess());
            if e.excess() > 1e-8 {
                violations += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = violations == 0 && audited >= 20 * 498 && elapsed < Duration::from_secs(10);
    report(
        4,
        "pathwise per-step inequality",
        pass,
        elapsed,
        &format!("{audited} audited iterations, {violations} violations, max excess {worst:.2e}"),
    );
    assert!(pass);
}

struct Thm4Batch {
    mean_final: f64,
    mean_r1: f64,
    mean_l: f64,
    mu: f64,
    sigma_sq: f64,
}

/// 50 seeds of the switched quadratic (m = s = 10, μ_A = 0.2) under the
/// Lipschitz preset for horizon `k`, run for `k + 1` steps.
fn thm4_batch(k: u64) -> Thm4Batch {
    let recipe = SwitchedQuadraticRecipe::new(10, 10, 0.2, 1.0);
    let n = 50;
    let (mut fin, mut r1, mut l, mut mu, mut sigma_sq) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for seed in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let op = recipe.generate(&mut rng).unwrap();
        let set = FeasibleSet::whole_space(op.dim()).unwrap();
        let u0 = gaussian_start(&set, &mut rng);
        let d = op.declared();
        let consts = ScheduleConstants {
            mu: d.mu,
            l: d.lipschitz,
            ..Default::default()
        };
        let sched = preset(Theorem::Thm4, &consts, k).unwrap();
        let traj = run(Method::Popov, &op, &set, &sched, &u0, &u0, &RunOptions::new(k + 1, 5000 + seed)).unwrap();
        fin += traj.final_record().unwrap().dist_sq_u;
        r1 += traj.first_step_residual.unwrap();
        l += d.lipschitz.unwrap();
        mu += d.mu.unwrap();
        sigma_sq += d.sigma_sq.unwrap();
    }
    let n = n as f64;
    Thm4Batch {
        mean_final: fin / n,
        mean_r1: r1 / n,
        mean_l: l / n,
        mu: mu / n,
        sigma_sq: sigma_sq / n,
    }
}

#[test]
fn ac5_rate_bound_holds() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for k in [500u64, 2000] {
        let b = thm4_batch(k);
        let constants = BoundConstants {
            mu: Some(b.mu),
            l: Some(b.mean_l),
            sigma_sq: Some(b.sigma_sq),
            r_1: Some(b.mean_r1),
            ..Default::default()
        };
        let bound = bound_value(Theorem::Thm4, &constants, k).unwrap();
        pass &= b.mean_final <= bound && (b.mu - 0.1).abs() < 1e-12;
        details.push(format!("K={k}: mean {:.4e} <= bound {:.4e}", b.mean_final, bound));
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(60);
    report(5, "rate bound satisfied", pass, elapsed, &details.join(", "));
    assert!(pass);
}

#[test]
fn ac6_noise_regime_scaling() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let short = thm4_batch(2000).mean_final;
    let long = thm4_batch(8000).mean_final;
    let ratio = long / short;
    let elapsed = start.elapsed();
    let pass = ratio <= 0.5 && elapsed < Duration::from_secs(120);
    report(
        6,
        "1/K noise-regime scaling",
        pass,
        elapsed,
        &format!("mean at K=2000 {short:.4e}, at K=8000 {long:.4e}, ratio {ratio:.3}"),
    );
    assert!(pass);
}

#[test]
fn ac7_fig2_preset_ordering() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let exec = ExecOptions::default();
    let b = run_experiment(&preset_config("fig2-b", &PresetOverrides::default()).unwrap(), &exec).unwrap();
    let c = run_experiment(&preset_config("fig2-c", &PresetOverrides::default()).unwrap(), &exec).unwrap();
    let times = |s: &visolve::experiments::RunSummary| {
        (
            s.method(Method::Popov).unwrap().time_to_threshold,
            s.method(Method::Projection).unwrap().time_to_threshold,
        )
    };
    let (bp, bq) = times(&b.summary);
    let (cp, cq) = times(&c.summary);
    let b_ok = matches!((bp, bq), (Some(p), Some(q)) if p < q) || matches!((bp, bq), (Some(_), None));
    let c_ok = cp.is_some() && cq.is_none();
    let elapsed = start.elapsed();
    let pass = b_ok && c_ok && elapsed < Duration::from_secs(300);
    report(
        7,
        "fig2 preset ordering",
        pass,
        elapsed,
        &format!(
            "fig2-b popov {bp:?} vs projection {bq:?} (kappa {:.1}); fig2-c popov {cp:?} vs projection {cq:?} (kappa {:.1})",
            b.summary.kappa_f.unwrap(),
            c.summary.kappa_f.unwrap()
        ),
    );
    assert!(pass);
}

#[test]
fn ac8_deterministic_linear_convergence() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut recipe = SwitchedQuadraticRecipe::new(10, 10, 0.8, 1.0);
    recipe.noise_var = Some(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let op = recipe.generate(&mut rng).unwrap();
    let set = FeasibleSet::whole_space(op.dim()).unwrap();
    let u0 = gaussian(op.dim(), 1.0, &mut rng).normalize() * 5.0;
    let d = op.declared();
    let alpha = d.mu.unwrap() / (4.0 * d.growth_slope.unwrap().powi(2));
    let sched = StepsizeSchedule::constant(alpha).unwrap();
    let traj = run(Method::Popov, &op, &set, &sched, &u0, &u0, &RunOptions::new(200, 0)).unwrap();
    let series = traj.dist_sq_series();
    let monotone = series.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0);
    let ratio = series[200] / series[0];
    let in_basin = op.solution_set().points()[0].norm() + series[0].sqrt() < 10.0;
    let elapsed = start.elapsed();
    let pass = monotone && ratio <= 1e-6 && in_basin && elapsed < Duration::from_secs(1);
    report(
        8,
        "deterministic linear convergence",
        pass,
        elapsed,
        &format!("alpha {alpha:.4}, monotone {monotone}, dist^2 ratio at k=200 {ratio:.2e}"),
    );
    assert!(pass);
}

#[test]
fn ac9_determinism() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let overrides = PresetOverrides {
        iterations: Some(400),
        n_seeds: Some(4),
        ..Default::default()
    };
    let mut pass = true;
    for name in PRESET_NAMES {
        let cfg = preset_config(name, &overrides).unwrap();
        let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
        let parallel = run_experiment(&cfg, &ExecOptions::default()).unwrap();
        let sequential = run_experiment(
            &cfg,
            &ExecOptions {
                threads: None,
                deterministic_order: true,
            },
        )
        .unwrap();
        let pa = write_outputs(&parallel, a.path()).unwrap();
        let pb = write_outputs(&sequential, b.path()).unwrap();
        pass &= std::fs::read(&pa.runs).unwrap() == std::fs::read(&pb.runs).unwrap();
        pass &= std::fs::read(&pa.summary).unwrap() == std::fs::read(&pb.summary).unwrap();
    }
    let elapsed = start.elapsed();
    report(
        9,
        "determinism",
        pass,
        elapsed,
        &format!("{} presets, parallel vs sequential runs compared byte for byte", PRESET_NAMES.len()),
    );
    assert!(pass);
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn ac10_bound_regression() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();

    let thm4 = BoundConstants {
        mu: Some(1.0),
        l: Some(1.0),
        sigma_sq: Some(0.0),
        r_1: Some(1.0),
        ..Default::default()
    };
    let d = 2.0 * 3f64.sqrt();
    let thm4_expected = 32.0 * d * (-1.0 / (4.0 * 3f64.sqrt())).exp();
    let thm4_got = bound_value(Theorem::Thm4, &thm4, 2).unwrap();

    let dist1 = 3.7;
    let thm2 = BoundConstants {
        mu: Some(0.4),
        c: Some(0.0),
        d: Some(0.0),
        m: Some(12.0),
        sigma_sq: Some(0.0),
        dist_sq_u1: Some(dist1),
        ..Default::default()
    };
    let thm2_expected = 18.0 * dist1 / (40.0 * 40.0);
    let thm2_got = bound_value(Theorem::Thm2, &thm2, 41).unwrap();

    let thm5b = BoundConstants {
        mu: Some(1.0),
        d: Some(1.0),
        sigma_sq: Some(0.0),
        m_u: Some(1.0),
        p: Some(1.5),
        dist_sq_u1: Some(1.0),
        ..Default::default()
    };
    let thm5b_expected = 64.0 * (-25f64).exp() + 432.0 * 2.0 / 100.0;
    let thm5b_got = bound_value(Theorem::Thm5b, &thm5b, 101).unwrap();

    let errs = [
        rel_err(thm4_got, thm4_expected),
        rel_err(thm2_got, thm2_expected),
        rel_err(thm5b_got, thm5b_expected),
    ];
    let pass = errs.iter().all(|e| *e <= 1e-9) && (thm4_got - 95.9).abs() < 0.1 && (thm5b_got - 8.64).abs() < 0.01;
    report(
        10,
        "bound evaluator regression",
        pass,
        start.elapsed(),
        &format!("thm4 {thm4_got:.6}, thm2 {thm2_got:.6e}, thm5b {thm5b_got:.6}; max rel err {:.1e}", errs.iter().cloned().fold(0.0, f64::max)),
    );
    assert!(pass);
}
