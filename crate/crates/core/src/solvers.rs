//! Iteration engines for the stochastic Popov (past-extragradient) method and
//! the stochastic projection method.
//!
//! Popov keeps two sequences and reuses the last oracle sample:
//!
//! ```text
//! g       = Φ(h_k, ξ_k)
//! u_{k+1} = P_U(u_k − α_k g)
//! h_{k+1} = P_U(u_{k+1} − α_{k+1} g)
//! ```
//!
//! Both methods consume exactly one oracle draw per iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::feasible_sets::FeasibleSet;
use crate::operators::{OperatorInstance, SolutionSet, Vector};
use crate::schedules::StepsizeSchedule;

/// Iterates with a norm beyond this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Popov,
    Projection,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Popov => "popov",
            Method::Projection => "projection",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PopovState {
    pub k: u64,
    pub u: Vector,
    pub h: Vector,
    /// `Φ(h_{k−1}, ξ_{k−1})`, absent before the first step.
    pub cached_sample: Option<Vector>,
    pub oracle_calls: u64,
}

impl PopovState {
    /// Starts at `(u0, h0)`, projecting both onto the set.
    pub fn new(set: &FeasibleSet, u0: &Vector, h0: &Vector) -> Result<Self> {
        Ok(PopovState {
            k: 0,
            u: set.project(u0)?,
            h: set.project(h0)?,
            cached_sample: None,
            oracle_calls: 0,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionState {
    pub k: u64,
    pub u: Vector,
    pub cached_sample: Option<Vector>,
    pub oracle_calls: u64,
}

impl ProjectionState {
    pub fn new(set: &FeasibleSet, u0: &Vector) -> Result<Self> {
        Ok(ProjectionState {
            k: 0,
            u: set.project(u0)?,
            cached_sample: None,
            oracle_calls: 0,
        })
    }
}

fn check_sample(sample: &Vector, k: u64) -> Result<()> {
    if sample.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence {
            iteration: k as usize + 1,
            norm: f64::INFINITY,
            partial: None,
        })
    }
}

/// One stochastic Popov iteration.
pub fn popov_step<R: Rng + ?Sized>(
    state: &PopovState,
    op: &OperatorInstance,
    set: &FeasibleSet,
    sched: &StepsizeSchedule,
    rng: &mut R,
) -> Result<PopovState> {
    check_dim(op.dim(), state.u.len())?;
    check_dim(set.dim(), state.u.len())?;
    let k = state.k;
    let g = op.sample_oracle(&state.h, rng)?;
    check_sample(&g, k)?;
    let u = set.project_unchecked(&(&state.u - &g * sched.stepsize(k)));
    let h = set.project_unchecked(&(&u - &g * sched.stepsize(k + 1)));
    Ok(PopovState {
        k: k + 1,
        u,
        h,
        cached_sample: Some(g),
        oracle_calls: state.oracle_calls + 1,
    })
}

/// One stochastic projection iteration `u_{k+1} = P_U(u_k − α_k Φ(u_k, ξ_k))`.
pub fn projection_step<R: Rng + ?Sized>(
    state: &ProjectionState,
    op: &OperatorInstance,
    set: &FeasibleSet,
    sched: &StepsizeSchedule,
    rng: &mut R,
) -> Result<ProjectionState> {
    check_dim(op.dim(), state.u.len())?;
    check_dim(set.dim(), state.u.len())?;
    let k = state.k;
    let g = op.sample_oracle(&state.u, rng)?;
    check_sample(&g, k)?;
    let u = set.project_unchecked(&(&state.u - &g * sched.stepsize(k)));
    Ok(ProjectionState {
        k: k + 1,
        u,
        cached_sample: Some(g),
        oracle_calls: state.oracle_calls + 1,
    })
}

/// Squared Euclidean distance from `u` to the solution set.
pub fn dist_to_solution_sq(u: &Vector, sol: &SolutionSet) -> Result<f64> {
    let points = sol.points();
    if points.is_empty() {
        return Err(Error::UnknownSolutionSet);
    }
    let mut best = f64::INFINITY;
    for p in points {
        check_dim(p.len(), u.len())?;
        best = best.min((u - p).norm_squared());
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u64,
    pub alpha_k: f64,
    /// `NaN` when the solution set is unknown.
    pub dist_sq_u: f64,
    pub dist_sq_h: f64,
    pub h_norm_sq: f64,
    /// `Φ(h_k, ξ_k)`, the sample drawn at iteration `k` (audit mode).
    pub sample: Option<Vec<f64>>,
    /// `F(h_k)` (audit mode).
    pub mean_at_h: Option<Vec<f64>>,
    pub u: Option<Vec<f64>>,
    pub h: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: Method,
    pub seed: u64,
    pub fingerprint: Option<String>,
    /// One record per iteration `k = 0..=K`, contiguous from 0.
    pub records: Vec<IterationRecord>,
    pub oracle_calls: u64,
    /// `dist²(u_1, U*) + ‖h_0 − u_1‖²`, the quantity averaged into `r_1`.
    pub first_step_residual: Option<f64>,
}

impl Trajectory {
    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn dist_sq_series(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.dist_sq_u).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    pub iterations: u64,
    pub seed: u64,
    /// Keep `u_k`, `h_k`, the sample and `F(h_k)` at every iteration.
    pub audit: bool,
    /// Keep `u_k` and `h_k` every `record_stride` iterations (and at `K`).
    pub record_stride: u64,
}

impl RunOptions {
    pub fn new(iterations: u64, seed: u64) -> Self {
        RunOptions {
            iterations,
            seed,
            audit: false,
            record_stride: 100,
        }
    }

    pub fn audited(mut self) -> Self {
        self.audit = true;
        self
    }
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

enum Engine {
    Popov(PopovState),
    Projection(ProjectionState),
}

impl Engine {
    fn u(&self) -> &Vector {
        match self {
            Engine::Popov(s) => &s.u,
            Engine::Projection(s) => &s.u,
        }
    }

    fn h(&self) -> &Vector {
        match self {
            Engine::Popov(s) => &s.h,
            Engine::Projection(s) => &s.u,
        }
    }

    fn oracle_calls(&self) -> u64 {
        match self {
            Engine::Popov(s) => s.oracle_calls,
            Engine::Projection(s) => s.oracle_calls,
        }
    }

    fn last_sample(&self) -> Option<&Vector> {
        match self {
            Engine::Popov(s) => s.cached_sample.as_ref(),
            Engine::Projection(s) => s.cached_sample.as_ref(),
        }
    }
}

/// Runs `K` iterations from `(u0, h0)` with noise drawn from a ChaCha8
/// stream seeded by `opts.seed`. Produces `K + 1` records.
///
/// On divergence (`‖u_k‖ > 10¹²` or a non-finite sample) the error carries the
/// partial trajectory.
pub fn run(
    method: Method,
    op: &OperatorInstance,
    set: &FeasibleSet,
    sched: &StepsizeSchedule,
    u0: &Vector,
    h0: &Vector,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if opts.iterations == 0 {
        return Err(Error::invalid("iterations", "must be >= 1"));
    }
    if opts.record_stride == 0 {
        return Err(Error::invalid("record_stride", "must be >= 1"));
    }
    check_dim(op.dim(), set.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let sol = op.solution_set();
    let known = sol.is_known();
    let dist = |v: &Vector| -> Result<f64> {
        if known {
            dist_to_solution_sq(v, sol)
        } else {
            Ok(f64::NAN)
        }
    };

    let mut engine = match method {
        Method::Popov => Engine::Popov(PopovState::new(set, u0, h0)?),
        Method::Projection => Engine::Projection(ProjectionState::new(set, u0)?),
    };
    let h_start = engine.h().clone();
    let k_max = opts.iterations;

    let make_record = |k: u64, engine: &Engine| -> Result<IterationRecord> {
        let (u, h) = (engine.u(), engine.h());
        let keep = opts.audit || k.is_multiple_of(opts.record_stride) || k == k_max;
        Ok(IterationRecord {
            k,
            alpha_k: sched.stepsize(k),
            dist_sq_u: dist(u)?,
            dist_sq_h: dist(h)?,
            h_norm_sq: h.norm_squared(),
            sample: None,
            mean_at_h: if opts.audit {
                Some(to_vec(&op.eval_mean(h)?))
            } else {
                None
            },
            u: keep.then(|| to_vec(u)),
            h: keep.then(|| to_vec(h)),
        })
    };

    let mut trajectory = Trajectory {
        method,
        seed: opts.seed,
        fingerprint: None,
        records: Vec::with_capacity(k_max as usize + 1),
        oracle_calls: 0,
        first_step_residual: None,
    };
    trajectory.records.push(make_record(0, &engine)?);

    for k in 0..k_max {
        let stepped = match &engine {
            Engine::Popov(s) => popov_step(s, op, set, sched, &mut rng).map(Engine::Popov),
            Engine::Projection(s) => {
                projection_step(s, op, set, sched, &mut rng).map(Engine::Projection)
            }
        };
        let next = match stepped {
            Ok(next) => next,
            Err(Error::Divergence { iteration, norm, .. }) => {
                trajectory.oracle_calls = engine.oracle_calls();
                return Err(Error::Divergence {
                    iteration,
                    norm,
                    partial: Some(Box::new(trajectory)),
                });
            }
            Err(e) => return Err(e),
        };
        let norm = next.u().norm().max(next.h().norm());
        if norm.is_nan() || norm > DIVERGENCE_NORM {
            trajectory.oracle_calls = next.oracle_calls();
            return Err(Error::Divergence {
                iteration: k as usize + 1,
                norm,
                partial: Some(Box::new(trajectory)),
            });
        }
        if opts.audit {
            let last = trajectory.records.last_mut().expect("record k exists");
            last.sample = next.last_sample().map(to_vec);
        }
        if k == 0 && known {
            trajectory.first_step_residual =
                Some(dist(next.u())? + (&h_start - next.u()).norm_squared());
        }
        engine = next;
        trajectory.records.push(make_record(k + 1, &engine)?);
    }
    trajectory.oracle_calls = engine.oracle_calls();
    Ok(trajectory)
}

/// One audited iteration of the pathwise per-step inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditEntry {
    pub k: u64,
    pub lhs: f64,
    pub rhs: f64,
}

impl AuditEntry {
    /// Positive when the inequality is violated.
    pub fn excess(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Evaluates, for every `k ≥ 1` with the needed records present,
///
/// ```text
/// ‖u_{k+1} − y‖² ≤ ‖u_k − y‖² − ‖u_{k+1} − h_k‖² − ‖u_k − h_k‖²
///                  − 2α_k⟨e_k + F(h_k), h_k − y⟩
///                  + 6α_k²(‖e_{k−1}‖² + ‖F(h_k) − F(h_{k−1})‖² + ‖e_k‖²)
/// ```
///
/// with `e_k = Φ(h_k, ξ_k) − F(h_k)`. It holds surely for Popov iterates, for
/// any `y` in the feasible set. Requires an audited Popov trajectory.
pub fn popov_step_audit(trajectory: &Trajectory, y: &Vector) -> Result<Vec<AuditEntry>> {
    if trajectory.method != Method::Popov {
        return Err(Error::invalid("trajectory", "audit applies to Popov runs"));
    }
    let recs = &trajectory.records;
    let missing = || Error::invalid("trajectory", "audit fields missing; run with audit enabled");
    let vec_of = |v: &Option<Vec<f64>>| -> Result<Vector> {
        v.as_ref().map(|x| Vector::from_column_slice(x)).ok_or_else(missing)
    };
    let mut out = Vec::new();
    for k in 1..recs.len().saturating_sub(1) {
        let (prev, cur, next) = (&recs[k - 1], &recs[k], &recs[k + 1]);
        let u_k = vec_of(&cur.u)?;
        let h_k = vec_of(&cur.h)?;
        let u_next = vec_of(&next.u)?;
        let f_h = vec_of(&cur.mean_at_h)?;
        let f_h_prev = vec_of(&prev.mean_at_h)?;
        let e_k = vec_of(&cur.sample)? - &f_h;
        let e_prev = vec_of(&prev.sample)? - &f_h_prev;
        check_dim(y.len(), u_k.len())?;
        let alpha = cur.alpha_k;
        let lhs = (&u_next - y).norm_squared();
        let rhs = (&u_k - y).norm_squared()
            - (&u_next - &h_k).norm_squared()
            - (&u_k - &h_k).norm_squared()
            - 2.0 * alpha * (&e_k + &f_h).dot(&(&h_k - y))
            + 6.0 * alpha * alpha * e_prev.norm_squared()
            + 6.0 * alpha * alpha * (&f_h - &f_h_prev).norm_squared()
            + 6.0 * alpha * alpha * e_k.norm_squared();
        out.push(AuditEntry { k: cur.k, lhs, rhs });
    }
    Ok(out)
}
