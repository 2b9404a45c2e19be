//! Multi-seed experiment harness.
//!
//! Seed `i` uses `seed_i = base_seed + i`. The operator instance and the
//! starting point are drawn from a ChaCha8 stream seeded with `seed_i`; each
//! method's oracle noise uses its own stream derived from `(seed_i, method)`.
//! Runs execute in parallel and are collected in (method, seed) order, so the
//! output files do not depend on scheduling.

mod config;
mod output;
mod presets;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{bound_value, estimate_noise_variance, gaussian_start, BoundConstants};
use crate::error::{Error, Result};
use crate::operators::{condition_number, Vector};
use crate::schedules::Theorem;
use crate::solvers::{popov_step_audit, run, Method, RunOptions};

pub use config::{schedule_constants, ExperimentConfig, MethodSpec, OperatorSpec, ScheduleSpec, SetSpec};
pub use output::{write_bound_csv, write_outputs, OutputPaths, LONG_HEADER, SUMMARY_HEADER};
pub use presets::{preset_config, PresetOverrides, PRESET_NAMES};

/// Slack used when counting audit violations.
pub const AUDIT_SLACK: f64 = 1e-8;

pub(crate) fn instance_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Noise seed for the method at position `method_index` of seed `seed`
/// (a splitmix64 finalizer over both).
pub fn noise_seed(seed: u64, method_index: usize) -> u64 {
    let mut z = seed ^ (method_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExecOptions {
    /// Worker cap; rayon's default when `None`.
    pub threads: Option<usize>,
    /// Run sequentially.
    pub deterministic_order: bool,
}

impl ExecOptions {
    /// Reads the worker cap from `VISOLVE_THREADS`.
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var("VISOLVE_THREADS") {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| Error::Config(format!("VISOLVE_THREADS: expected a positive integer, got `{v}`")))?,
            ),
            Err(_) => None,
        };
        Ok(ExecOptions {
            threads,
            deterministic_order: false,
        })
    }
}

/// Per-iteration series of one (method, seed) run.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedRun {
    pub method: Method,
    pub seed: u64,
    pub dist_sq_u: Vec<f64>,
    pub dist_sq_h: Vec<f64>,
    pub alpha: Vec<f64>,
    pub h_norm_sq: Vec<f64>,
    /// Iteration at which the run diverged; the series stop just before it.
    pub diverged_at: Option<usize>,
    pub first_step_residual: Option<f64>,
    /// Audit entries exceeding [`AUDIT_SLACK`] (Popov runs in audit mode).
    pub audit_violations: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// Seeds that finished all `K` iterations.
    pub completed: usize,
    pub diverged_seeds: Vec<u64>,
    /// Pointwise mean and population standard deviation of `dist²(u_k, U*)`
    /// over completed seeds, `k = 0..=K`.
    #[serde(skip)]
    pub mean: Vec<f64>,
    #[serde(skip)]
    pub std: Vec<f64>,
    pub final_mean: Option<f64>,
    /// First `k` with mean at or below [`RunSummary::threshold`].
    pub time_to_threshold: Option<u64>,
    pub audit_violations: Option<usize>,
    /// Rate bound at `K` for Popov runs under a theorem preset, when all of
    /// its constants are available.
    pub bound_at_k: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub iterations: u64,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub methods: Vec<MethodSummary>,
    /// Mean condition number over the drawn instances.
    pub kappa_f: Option<f64>,
    /// Mean noise variance `E‖Φ − F‖²` over the drawn instances (declared,
    /// or estimated for finite sums).
    pub sigma_sq: Option<f64>,
    /// Mean of `dist²(u_1, U*) + ‖h_0 − u_1‖²` over completed Popov runs.
    pub r_1: Option<f64>,
    /// `1.5 ×` the largest mean `‖h_k‖²`, `k ≥ 1`, over completed Popov runs.
    pub m: Option<f64>,
    /// Noise floor of the Popov mean trajectory.
    pub noise_floor: Option<f64>,
    /// Twice the noise floor.
    pub threshold: Option<f64>,
    pub wall_time_secs: f64,
}

impl RunSummary {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }

    /// True when every run of every method diverged.
    pub fn all_diverged(&self) -> bool {
        self.methods.iter().all(|m| m.completed == 0)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub summary: RunSummary,
    /// Ordered by method (as configured), then seed.
    pub runs: Vec<SeedRun>,
}

/// Mean of the middle 80% of the last 10% of `series`.
pub fn noise_floor(series: &[f64]) -> Option<f64> {
    if series.is_empty() {
        return None;
    }
    let n = (series.len() / 10).max(1);
    let mut tail = series[series.len() - n..].to_vec();
    tail.sort_by(f64::total_cmp);
    let cut = tail.len() / 10;
    let kept = &tail[cut..tail.len() - cut];
    Some(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// First index whose value is at or below `threshold`.
pub fn time_to_threshold(series: &[f64], threshold: f64) -> Option<u64> {
    series.iter().position(|x| *x <= threshold).map(|k| k as u64)
}

struct SeedResult {
    runs: Vec<SeedRun>,
    kappa: Option<f64>,
    sigma_sq: Option<f64>,
    bound_constants: BoundConstants,
}

fn run_seed(cfg: &ExperimentConfig, index: usize) -> Result<SeedResult> {
    let seed = cfg.base_seed + index as u64;
    let mut rng = instance_rng(seed);
    let op = cfg.operator.build(&mut rng)?;
    let set = cfg.set.build(op.dim())?;
    let u0 = match &cfg.u0 {
        Some(u) => Vector::from_column_slice(u),
        None => gaussian_start(&set, &mut rng),
    };
    let h0 = cfg.h0.as_ref().map(|h| Vector::from_column_slice(h)).unwrap_or_else(|| u0.clone());

    let sigma_sq = match op.declared().sigma_sq {
        Some(s) => Some(s),
        None if op.n_components().is_some() => {
            // Ball around the origin covering everything within 2‖u₀ − u*‖ of u*.
            let star = op
                .solution_set()
                .points()
                .first()
                .map(|p| (*p).clone())
                .unwrap_or_else(|| Vector::zeros(op.dim()));
            let radius = (2.0 * (&u0 - &star).norm() + star.norm()).max(1.0);
            let origin = Vector::zeros(op.dim());
            Some(estimate_noise_variance(&op, &origin, radius, 20, 1, &mut rng)?)
        }
        None => None,
    };
    let d = op.declared();
    let bound_constants = BoundConstants {
        mu: d.mu,
        c: d.growth_slope,
        d: d.growth_offset,
        l: d.lipschitz,
        sigma_sq,
        m_u: set.diameter().finite(),
        m1: op.solution_set().max_norm(),
        p: d.p,
        ..Default::default()
    };

    let mut runs = Vec::with_capacity(cfg.methods.len());
    for (j, spec) in cfg.methods.iter().enumerate() {
        let sched = spec.resolve(&op, &set, cfg.iterations)?;
        let opts = RunOptions {
            iterations: cfg.iterations,
            seed: noise_seed(seed, j),
            audit: cfg.audit,
            record_stride: cfg.record_stride,
        };
        let (traj, diverged_at) = match run(spec.method, &op, &set, &sched, &u0, &h0, &opts) {
            Ok(t) => (t, None),
            Err(Error::Divergence {
                iteration,
                partial: Some(t),
                ..
            }) => (*t, Some(iteration)),
            Err(e) => return Err(e),
        };
        let audit_violations = if cfg.audit && spec.method == Method::Popov {
            match op.solution_set().points().first() {
                Some(y) => Some(
                    popov_step_audit(&traj, y)?
                        .iter()
                        .filter(|e| e.excess() > AUDIT_SLACK)
                        .count(),
                ),
                None => None,
            }
        } else {
            None
        };
        let recs = &traj.records;
        runs.push(SeedRun {
            method: spec.method,
            seed,
            dist_sq_u: recs.iter().map(|r| r.dist_sq_u).collect(),
            dist_sq_h: recs.iter().map(|r| r.dist_sq_h).collect(),
            alpha: recs.iter().map(|r| r.alpha_k).collect(),
            h_norm_sq: recs.iter().map(|r| r.h_norm_sq).collect(),
            diverged_at,
            first_step_residual: traj.first_step_residual,
            audit_violations,
        });
    }
    Ok(SeedResult {
        runs,
        kappa: condition_number(&op).ok(),
        sigma_sq,
        bound_constants,
    })
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for v in values {
        total += v?;
        n += 1;
    }
    (n > 0).then(|| total / n as f64)
}

/// Runs every (method, seed) pair and aggregates the results.
///
/// A diverging run is recorded (its partial series and the iteration) and
/// excluded from the summary statistics; it does not abort the experiment.
pub fn run_experiment(cfg: &ExperimentConfig, exec: &ExecOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let work = |i: usize| run_seed(cfg, i);
    let per_seed: Vec<SeedResult> = if exec.deterministic_order || exec.threads == Some(1) {
        (0..cfg.n_seeds).map(work).collect::<Result<_>>()?
    } else {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(t) = exec.threads {
            builder = builder.num_threads(t);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.n_seeds).into_par_iter().map(work).collect::<Result<_>>())?
    };

    let len = cfg.iterations as usize + 1;
    let mut runs = Vec::with_capacity(cfg.n_seeds * cfg.methods.len());
    for j in 0..cfg.methods.len() {
        runs.extend(per_seed.iter().map(|s| s.runs[j].clone()));
    }

    let mut methods = Vec::with_capacity(cfg.methods.len());
    for spec in &cfg.methods {
        let mine: Vec<&SeedRun> = runs.iter().filter(|r| r.method == spec.method).collect();
        let done: Vec<&&SeedRun> = mine.iter().filter(|r| r.diverged_at.is_none()).collect();
        let n = done.len() as f64;
        let (mean, std) = if done.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            (0..len)
                .map(|k| {
                    let m = done.iter().map(|r| r.dist_sq_u[k]).sum::<f64>() / n;
                    let var = done.iter().map(|r| (r.dist_sq_u[k] - m).powi(2)).sum::<f64>() / n;
                    (m, var.sqrt())
                })
                .unzip()
        };
        let audit_violations = mine
            .iter()
            .map(|r| r.audit_violations)
            .try_fold(0usize, |acc, v| v.map(|v| acc + v));
        methods.push(MethodSummary {
            method: spec.method,
            completed: done.len(),
            diverged_seeds: mine.iter().filter(|r| r.diverged_at.is_some()).map(|r| r.seed).collect(),
            final_mean: mean.last().copied(),
            mean,
            std,
            time_to_threshold: None,
            audit_violations,
            bound_at_k: None,
        });
    }

    let popov_done: Vec<&SeedRun> = runs
        .iter()
        .filter(|r| r.method == Method::Popov && r.diverged_at.is_none())
        .collect();
    let (r_1, m, dist_sq_u1) = if popov_done.is_empty() {
        (None, None, None)
    } else {
        let n = popov_done.len() as f64;
        let r_1 = mean_of(popov_done.iter().map(|r| r.first_step_residual));
        let m = (1..len)
            .map(|k| popov_done.iter().map(|r| r.h_norm_sq[k]).sum::<f64>() / n)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
            .map(|x| 1.5 * x);
        let dist1 = popov_done.iter().map(|r| r.dist_sq_u[1]).sum::<f64>() / n;
        (r_1, m, Some(dist1))
    };

    let floor = methods
        .iter()
        .find(|m| m.method == Method::Popov)
        .and_then(|m| noise_floor(&m.mean));
    let threshold = floor.map(|f| 2.0 * f);
    for ms in &mut methods {
        ms.time_to_threshold = threshold.and_then(|t| time_to_threshold(&ms.mean, t));
    }

    let avg = |f: &dyn Fn(&BoundConstants) -> Option<f64>| mean_of(per_seed.iter().map(|s| f(&s.bound_constants)));
    let constants = BoundConstants {
        mu: avg(&|c| c.mu),
        c: avg(&|c| c.c),
        d: avg(&|c| c.d),
        l: avg(&|c| c.l),
        sigma_sq: avg(&|c| c.sigma_sq),
        m_u: avg(&|c| c.m_u),
        m1: avg(&|c| c.m1),
        m,
        p: avg(&|c| c.p),
        r_1,
        dist_sq_u1,
    };
    for (ms, spec) in methods.iter_mut().zip(&cfg.methods) {
        if let (Method::Popov, ScheduleSpec::Preset { theorem }) = (spec.method, &spec.schedule) {
            if *theorem != Theorem::ProjBaseline && cfg.iterations >= 2 && ms.completed > 0 {
                ms.bound_at_k = bound_value(*theorem, &constants, cfg.iterations).ok();
            }
        }
    }

    let summary = RunSummary {
        name: cfg.name.clone(),
        iterations: cfg.iterations,
        n_seeds: cfg.n_seeds,
        base_seed: cfg.base_seed,
        methods,
        kappa_f: mean_of(per_seed.iter().map(|s| s.kappa)),
        sigma_sq: mean_of(per_seed.iter().map(|s| s.sigma_sq)),
        r_1,
        m,
        noise_floor: floor,
        threshold,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok(ExperimentOutput {
        config: cfg.clone(),
        summary,
        runs,
    })
}
