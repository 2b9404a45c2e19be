//! Empirical certification of operator properties and evaluators for the
//! convergence-rate bounds.
//!
//! Sampling can only show that no violation was found at the sampled points;
//! [`Verdict::CertifiedAtSamples`] says exactly that. A [`Verdict::Violated`]
//! report always carries a witness that reproduces the violation when
//! re-evaluated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::feasible_sets::FeasibleSet;
use crate::operators::{OperatorInstance, Vector};
use crate::schedules::{thm3_d, thm4_d, StepsizeSchedule, Theorem};
use crate::solvers::{dist_to_solution_sq, run, Method, RunOptions};

/// Slack below which a sampled inequality counts as violated.
pub const VIOLATION_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedAtSamples,
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub property: String,
    /// The inequality that was tested.
    pub claim: String,
    pub n_samples: usize,
    /// Largest amount by which the inequality failed; `≤ 0` means it held
    /// everywhere with that much room.
    pub max_violation: f64,
    /// Points achieving the largest violation (one point, or a pair).
    pub witness: Vec<Vec<f64>>,
    pub verdict: Verdict,
}

impl PropertyReport {
    fn new(property: &str, claim: String, n_samples: usize, worst: Option<(f64, Vec<Vec<f64>>)>) -> Self {
        let (max_violation, witness) = worst.unwrap_or((f64::NEG_INFINITY, Vec::new()));
        let verdict = if max_violation > VIOLATION_TOL {
            Verdict::Violated
        } else {
            Verdict::CertifiedAtSamples
        };
        PropertyReport {
            property: property.to_string(),
            claim,
            n_samples,
            max_violation,
            witness,
            verdict,
        }
    }

    pub fn is_violated(&self) -> bool {
        self.verdict == Verdict::Violated
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Distribution_ {
    Gaussian { scale: f64 },
    UniformBall { radius: f64 },
}

/// Deterministic point generator for property checks: random points around a
/// center plus optional points on the coordinate axes.
#[derive(Clone, Debug, PartialEq)]
pub struct Sampler {
    center: Vector,
    distribution: Distribution_,
    axis_radii: Vec<f64>,
    seed: u64,
}

impl Sampler {
    /// `center + scale·z` with `z` standard Gaussian.
    pub fn gaussian(center: Vector, scale: f64) -> Self {
        Sampler {
            center,
            distribution: Distribution_::Gaussian { scale },
            axis_radii: Vec::new(),
            seed: 0,
        }
    }

    /// Uniform on the ball of the given radius around `center`.
    pub fn uniform_ball(center: Vector, radius: f64) -> Self {
        Sampler {
            center,
            distribution: Distribution_::UniformBall { radius },
            axis_radii: Vec::new(),
            seed: 0,
        }
    }

    /// Also emit `center ± r·e_i` for every axis `i` and radius `r`.
    pub fn with_axis_rays(mut self, radii: &[f64]) -> Self {
        self.axis_radii = radii.to_vec();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Gaussian around the first known solution with scale `4·max(1, R*)`,
    /// `R*` the largest solution norm, plus axis rays at
    /// `scale·{1/8, 1/4, 1/2, 1, 2, 4}`.
    pub fn default_for(op: &OperatorInstance) -> Self {
        let sol = op.solution_set();
        let center = sol
            .points()
            .first()
            .map(|p| (*p).clone())
            .unwrap_or_else(|| Vector::zeros(op.dim()));
        let scale = 4.0 * sol.max_norm().unwrap_or(0.0).max(1.0);
        let radii: Vec<f64> = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|f| f * scale).collect();
        Sampler::gaussian(center, scale).with_axis_rays(&radii)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Exactly `n` points: axis points first, random draws for the rest.
    pub fn points(&self, n: usize) -> Vec<Vector> {
        let dim = self.dim();
        let mut out = Vec::with_capacity(n);
        'axes: for &r in &self.axis_radii {
            for i in 0..dim {
                for sign in [1.0, -1.0] {
                    if out.len() == n {
                        break 'axes;
                    }
                    let mut p = self.center.clone();
                    p[i] += sign * r;
                    out.push(p);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        while out.len() < n {
            let z = Vector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(&mut rng)));
            let p = match self.distribution {
                Distribution_::Gaussian { scale } => &self.center + z * scale,
                Distribution_::UniformBall { radius } => {
                    let norm = z.norm();
                    if norm == 0.0 {
                        continue;
                    }
                    let t: f64 = rng.random();
                    &self.center + z * (radius * t.powf(1.0 / dim as f64) / norm)
                }
            };
            out.push(p);
        }
        out
    }
}

fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

fn track_worst(worst: &mut Option<(f64, Vec<Vec<f64>>)>, violation: f64, witness: impl FnOnce() -> Vec<Vec<f64>>) {
    if worst.as_ref().is_none_or(|(w, _)| violation > *w) {
        *worst = Some((violation, witness()));
    }
}

/// Tests `⟨F(u), u − u*⟩ ≥ μ·dist^p(u, U*)` at `n` sampled points (projected
/// onto `set`) against every known solution `u*`.
pub fn check_quasi_sharpness(
    op: &OperatorInstance,
    set: &FeasibleSet,
    p: f64,
    mu: f64,
    sampler: &Sampler,
    n: usize,
) -> Result<PropertyReport> {
    let sol = op.solution_set();
    let solutions = sol.points();
    if solutions.is_empty() {
        return Err(Error::UnknownSolutionSet);
    }
    if n == 0 {
        return Err(Error::invalid("n", "need at least one sample"));
    }
    check_dim(op.dim(), sampler.dim())?;
    let mut worst = None;
    for raw in sampler.points(n) {
        let u = set.project(&raw)?;
        let f = op.eval_mean(&u)?;
        let dist = dist_to_solution_sq(&u, sol)?.sqrt();
        let rhs = mu * dist.powf(p);
        for s in &solutions {
            let lhs = f.dot(&(&u - *s));
            track_worst(&mut worst, rhs - lhs, || vec![to_vec(&u)]);
        }
    }
    Ok(PropertyReport::new(
        "quasi-sharpness",
        format!("<F(u), u - u*> >= {mu} * dist^{p}(u, U*)"),
        n,
        worst,
    ))
}

/// Estimated envelope `‖F(u)‖ ≤ Ĉ‖u‖ + D̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub c_hat: f64,
    pub d_hat: f64,
    pub report: PropertyReport,
}

/// Fits a linear-growth envelope to sampled values of `‖F‖`.
///
/// The slope is the largest radial secant `(‖F(u)‖ − ‖F(u/2)‖)/(‖u‖/2)` over
/// the outer shell of the samples (`‖u‖ ≥ max(1, r_max/2)`), so it tracks the
/// growth rate at the sampling radius and vanishes for bounded operators. The offset is then the smallest `D̂` making
/// the envelope hold at every sample. When the operator declares `C` and `D`,
/// the report tests the declared envelope instead of the fitted one.
pub fn estimate_linear_growth(op: &OperatorInstance, sampler: &Sampler, n: usize) -> Result<GrowthEstimate> {
    if n < 2 {
        return Err(Error::invalid("n", "need at least two samples"));
    }
    check_dim(op.dim(), sampler.dim())?;
    let origin = Vector::zeros(op.dim());
    let mut values = vec![(0.0, op.eval_mean(&origin)?.norm(), origin)];
    for u in sampler.points(n) {
        let f = op.eval_mean(&u)?.norm();
        values.push((u.norm(), f, u));
    }
    let r_max = values.iter().map(|v| v.0).fold(0.0, f64::max);
    let shell = (r_max / 2.0).max(1.0);
    let mut c_hat: f64 = 0.0;
    for (r, f, u) in values.iter().filter(|(r, _, _)| *r >= shell) {
        let inner = op.eval_mean(&(u * 0.5))?.norm();
        c_hat = c_hat.max((f - inner) / (r / 2.0));
    }
    let d_hat = values.iter().map(|(r, f, _)| f - c_hat * r).fold(0.0, f64::max);

    let declared = op.declared();
    let (c, d, property) = match (declared.growth_slope, declared.growth_offset) {
        (Some(c), Some(d)) => (c, d, "linear growth (declared)"),
        _ => (c_hat, d_hat, "linear growth (fitted)"),
    };
    let mut worst = None;
    for (r, f, u) in &values {
        track_worst(&mut worst, f - (c * r + d), || vec![to_vec(u)]);
    }
    let report = PropertyReport::new(property, format!("||F(u)|| <= {c} * ||u|| + {d}"), n, worst);
    Ok(GrowthEstimate { c_hat, d_hat, report })
}

/// Searches sampled pairs for `⟨F(u) − F(v), u − v⟩ < 0`. For the `example1`
/// family with `p > 1` the analytic witness `u = (0, 1)`,
/// `v = (0, 1 + 1/(5(p−1)))` is checked first.
pub fn find_monotonicity_violation(op: &OperatorInstance, sampler: &Sampler, n_pairs: usize) -> Result<PropertyReport> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs", "need at least one pair"));
    }
    check_dim(op.dim(), sampler.dim())?;
    let mut pairs: Vec<(Vector, Vector)> = Vec::with_capacity(n_pairs + 1);
    if let Some(p) = op.example1_exponent().filter(|p| *p > 1.0) {
        pairs.push((
            Vector::from_vec(vec![0.0, 1.0]),
            Vector::from_vec(vec![0.0, 1.0 + 1.0 / (5.0 * (p - 1.0))]),
        ));
    }
    let points = sampler.points(2 * n_pairs);
    pairs.extend(points.chunks_exact(2).map(|c| (c[0].clone(), c[1].clone())));

    let mut worst = None;
    for (u, v) in &pairs {
        let ip = (op.eval_mean(u)? - op.eval_mean(v)?).dot(&(u - v));
        track_worst(&mut worst, -ip, || vec![to_vec(u), to_vec(v)]);
    }
    Ok(PropertyReport::new(
        "monotonicity",
        "<F(u) - F(v), u - v> >= 0".to_string(),
        pairs.len(),
        worst,
    ))
}

/// Constants entering the rate bounds. Field names follow the usual symbols.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConstants {
    pub mu: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    #[serde(rename = "L")]
    pub l: Option<f64>,
    pub sigma_sq: Option<f64>,
    #[serde(rename = "M_U")]
    pub m_u: Option<f64>,
    /// Bound on the norms of the solutions.
    #[serde(rename = "M_1")]
    pub m1: Option<f64>,
    /// Bound on `E‖h_k‖²`.
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub p: Option<f64>,
    /// `E[dist²(u_1, U*) + ‖h_0 − u_1‖²]`.
    pub r_1: Option<f64>,
    /// `E[dist²(u_1, U*)]`.
    pub dist_sq_u1: Option<f64>,
}

impl BoundConstants {
    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn need(value: Option<f64>, name: &'static str) -> Result<f64> {
    value.ok_or(Error::UnavailableConstant(name))
}

/// Right-hand side of the rate bound for `E[dist²(u_{K+1}, U*)]`.
pub fn bound_value(theorem: Theorem, c: &BoundConstants, k: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::invalid("K", "bounds are stated for K >= 2"));
    }
    let km1 = (k - 1) as f64;
    let mu = need(c.mu, "mu")?;
    let value = match theorem {
        Theorem::Thm2 => {
            let (growth, m) = (need(c.c, "C")?, need(c.m, "M")?);
            let (sigma_sq, d) = (need(c.sigma_sq, "sigma_sq")?, need(c.d, "D")?);
            18.0 / (km1 * km1) * need(c.dist_sq_u1, "dist_sq_u1")?
                + 24.0 * (4.0 * growth * growth * m + sigma_sq + 2.0 * d * d) / (mu * mu * km1)
        }
        Theorem::Thm3 => {
            let step_d = thm3_d(mu, need(c.c, "C")?);
            let (sigma_sq, d, m1) = (need(c.sigma_sq, "sigma_sq")?, need(c.d, "D")?, need(c.m1, "M_1")?);
            let cc = 12.0 * sigma_sq + 2.0 * d * d + 12.0 * m1 * m1;
            64.0 * step_d / mu * need(c.r_1, "r_1")? * (-mu * km1 / (4.0 * step_d)).exp()
                + 144.0 * cc / (mu * mu * km1)
        }
        Theorem::Thm4 => {
            let step_d = thm4_d(mu, need(c.l, "L")?);
            32.0 * step_d / mu * need(c.r_1, "r_1")? * (-mu * km1 / (2.0 * step_d)).exp()
                + 432.0 * need(c.sigma_sq, "sigma_sq")? / (mu * mu * km1)
        }
        Theorem::Thm5a | Theorem::Thm5b => {
            let (sigma_sq, d) = (need(c.sigma_sq, "sigma_sq")?, need(c.d, "D")?);
            let (m_u, p) = (need(c.m_u, "M_U")?, need(c.p, "p")?);
            let noise = (sigma_sq + 2.0 * d * d) * m_u.powf(2.0 * (2.0 - p)) / (mu * mu * km1);
            let dist1 = need(c.dist_sq_u1, "dist_sq_u1")?;
            if theorem == Theorem::Thm5a {
                32.0 / (km1 * km1) * dist1 + 24.0 * noise
            } else {
                64.0 * dist1 * (-km1 / 4.0).exp() + 432.0 * noise
            }
        }
        Theorem::ProjBaseline => {
            return Err(Error::invalid("theorem", "the projection baseline has no rate bound"))
        }
    };
    Ok(value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCurve {
    pub theorem: Theorem,
    pub constants: BoundConstants,
    /// `(K, bound)` for `K = 2..=k_max`.
    pub values: Vec<(u64, f64)>,
    /// Where non-analytic constants came from.
    pub provenance: Vec<String>,
}

pub fn bound_curve(theorem: Theorem, constants: &BoundConstants, k_max: u64) -> Result<BoundCurve> {
    if k_max < 2 {
        return Err(Error::invalid("k_max", "must be >= 2"));
    }
    let values = (2..=k_max)
        .map(|k| bound_value(theorem, constants, k).map(|b| (k, b)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundCurve {
        theorem,
        constants: constants.clone(),
        values,
        provenance: Vec::new(),
    })
}

/// Estimates from a short multi-seed Popov pilot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotEstimates {
    /// Mean of `dist²(u_1, U*) + ‖h_0 − u_1‖²`.
    pub r_1: f64,
    /// Mean of `dist²(u_1, U*)`.
    pub dist_sq_u1: f64,
    /// `1.5 ×` the largest per-iteration mean of `‖h_k‖²`, `k ≥ 1`.
    pub m: f64,
    pub n_seeds: usize,
}

/// Standard Gaussian start projected onto `set`.
pub fn gaussian_start<R: Rng + ?Sized>(set: &FeasibleSet, rng: &mut R) -> Vector {
    let dim = set.dim();
    let z = Vector::from_iterator(dim, (0..dim).map(|_| StandardNormal.sample(rng)));
    set.project_unchecked(&z)
}

/// Runs `n_seeds` Popov pilots (start `u_0 = h_0` Gaussian, seed `base_seed + i`).
pub fn pilot_estimates(
    op: &OperatorInstance,
    set: &FeasibleSet,
    sched: &StepsizeSchedule,
    iterations: u64,
    n_seeds: usize,
    base_seed: u64,
) -> Result<PilotEstimates> {
    if n_seeds == 0 {
        return Err(Error::invalid("n_seeds", "must be >= 1"));
    }
    let mut r_1 = 0.0;
    let mut dist1 = 0.0;
    let mut h_norms = vec![0.0; iterations as usize + 1];
    for i in 0..n_seeds {
        let seed = base_seed + i as u64;
        let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
        init_rng.set_stream(1);
        let u0 = gaussian_start(set, &mut init_rng);
        let traj = run(Method::Popov, op, set, sched, &u0, &u0, &RunOptions::new(iterations, seed))?;
        r_1 += traj.first_step_residual.ok_or(Error::UnknownSolutionSet)?;
        dist1 += traj.records[1].dist_sq_u;
        for (acc, r) in h_norms.iter_mut().zip(&traj.records) {
            *acc += r.h_norm_sq;
        }
    }
    let n = n_seeds as f64;
    let m = h_norms[1..].iter().map(|s| s / n).fold(0.0, f64::max) * 1.5;
    Ok(PilotEstimates {
        r_1: r_1 / n,
        dist_sq_u1: dist1 / n,
        m,
        n_seeds,
    })
}

/// Largest `E‖Φ(u, ξ) − F(u)‖²` over `n_points` points drawn uniformly from
/// the ball `B(center, radius)`. Finite sums are averaged exactly over their
/// components; other operators use `draws` oracle samples per point.
pub fn estimate_noise_variance<R: Rng + ?Sized>(
    op: &OperatorInstance,
    center: &Vector,
    radius: f64,
    n_points: usize,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    check_dim(op.dim(), center.len())?;
    let sampler = Sampler::uniform_ball(center.clone(), radius).with_seed(rng.random());
    let mut worst: f64 = 0.0;
    for u in sampler.points(n_points.max(1)) {
        let mean = op.eval_mean(&u)?;
        let var = match op.n_components() {
            Some(n) => {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += (op.eval_component(i, &u)? - &mean).norm_squared();
                }
                acc / n as f64
            }
            None => {
                let draws = draws.max(1);
                let mut acc = 0.0;
                for _ in 0..draws {
                    acc += (op.sample_oracle(&u, rng)? - &mean).norm_squared();
                }
                acc / draws as f64
            }
        };
        worst = worst.max(var);
    }
    Ok(worst)
}

/// Independent solution oracle for small problems.
///
/// Operators with an affine solution set whose root lies in `set` are solved
/// directly. Otherwise `set` must be bounded and `dim ≤ 3`: every grid point
/// of the bounding box (`resolution` points per axis) that lies in the set is
/// scored by its VI gap `⟨F(x), x⟩ − min_{u ∈ U}⟨F(x), u⟩ ≥ 0`, and the point
/// with the smallest gap is returned.
pub fn brute_force_solution(op: &OperatorInstance, set: &FeasibleSet, resolution: usize) -> Result<Vector> {
    check_dim(op.dim(), set.dim())?;
    if let crate::operators::SolutionSet::Affine { jacobian, bias, .. } = op.solution_set() {
        let root = jacobian
            .clone()
            .lu()
            .solve(&(-bias))
            .ok_or_else(|| Error::invalid("jacobian", "matrix is singular"))?;
        if set.contains(&root) {
            return Ok(root);
        }
    }
    let dim = set.dim();
    if dim > 3 {
        return Err(Error::invalid("dim", format!("grid search supports dim <= 3, got {dim}")));
    }
    let (lo, hi) = set
        .bounding_box()
        .ok_or_else(|| Error::invalid("set", "grid search needs a bounded set"))?;
    if resolution < 2 {
        return Err(Error::invalid("resolution", "need at least 2 points per axis"));
    }
    let total = resolution.pow(dim as u32);
    let mut best: Option<(f64, Vector)> = None;
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let x = Vector::from_iterator(
            dim,
            (0..dim).map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (resolution - 1) as f64),
        );
        if set.contains(&x) {
            let f = op.eval_mean(&x)?;
            let gap = f.dot(&x) - set.support_min(&f).unwrap_or(f64::NEG_INFINITY);
            if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                best = Some((gap, x));
            }
        }
        for slot in idx.iter_mut() {
            *slot += 1;
            if *slot < resolution {
                break;
            }
            *slot = 0;
        }
    }
    best.map(|(_, x)| x)
        .ok_or_else(|| Error::invalid("resolution", "no grid point fell inside the set"))
}
