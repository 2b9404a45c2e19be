//! Declarative experiment description, loaded from TOML or JSON.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasible_sets::FeasibleSet;
use crate::operators::{
    make_example1, make_finite_sum_game, FiniteSumRecipe, OperatorInstance, SwitchedQuadraticRecipe, Vector,
};
use crate::schedules::{preset, ScheduleConstants, StepsizeSchedule, Theorem};
use crate::solvers::Method;

fn one() -> f64 {
    1.0
}
fn ten() -> f64 {
    10.0
}
fn half() -> f64 {
    0.5
}
fn unit_stride() -> u64 {
    1
}

/// Operator family plus the parameters needed to draw an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OperatorSpec {
    Example1 {
        p: f64,
        /// Per-coordinate variance of the additive Gaussian noise.
        #[serde(default)]
        noise_var: f64,
    },
    SwitchedQuadratic {
        m: usize,
        s: usize,
        /// Smallest eigenvalue of `A₁` (and of `A₃` unless `mu_a3` is set).
        mu_a: f64,
        #[serde(default = "one")]
        l_a: f64,
        mu_a3: Option<f64>,
        l_a3: Option<f64>,
        a2_var: Option<f64>,
        b_var: Option<f64>,
        /// Per-coordinate noise variance; `1/(m+s)` when absent.
        noise_var: Option<f64>,
        #[serde(default = "ten")]
        radius_switch: f64,
        #[serde(default = "half")]
        c_outside: f64,
    },
    FiniteSumGame {
        n: usize,
        m: usize,
        s: usize,
        mu: f64,
        #[serde(default = "one")]
        l: f64,
        sigma_b_sq: Option<f64>,
        sigma_bias_sq: Option<f64>,
    },
}

impl OperatorSpec {
    pub fn dim(&self) -> usize {
        match self {
            OperatorSpec::Example1 { .. } => 2,
            OperatorSpec::SwitchedQuadratic { m, s, .. } | OperatorSpec::FiniteSumGame { m, s, .. } => m + s,
        }
    }

    /// Draws an instance from the stream the harness uses for `seed`.
    pub fn build_seeded(&self, seed: u64) -> Result<OperatorInstance> {
        self.build(&mut super::instance_rng(seed))
    }

    /// Draws an instance; deterministic families ignore `rng`.
    pub fn build<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<OperatorInstance> {
        match self {
            OperatorSpec::Example1 { p, noise_var } => {
                let op = make_example1(*p)?;
                if *noise_var > 0.0 {
                    op.with_gaussian_noise(*noise_var)
                } else if *noise_var == 0.0 {
                    Ok(op)
                } else {
                    Err(Error::invalid("noise_var", "must be >= 0"))
                }
            }
            OperatorSpec::SwitchedQuadratic {
                m,
                s,
                mu_a,
                l_a,
                mu_a3,
                l_a3,
                a2_var,
                b_var,
                noise_var,
                radius_switch,
                c_outside,
            } => {
                let mut recipe = SwitchedQuadraticRecipe::new(*m, *s, *mu_a, *l_a);
                recipe.mu_a3 = mu_a3.unwrap_or(*mu_a);
                recipe.l_a3 = l_a3.unwrap_or(*l_a);
                recipe.a2_var = *a2_var;
                recipe.b_var = *b_var;
                recipe.noise_var = *noise_var;
                recipe.radius_switch = *radius_switch;
                recipe.c_outside = *c_outside;
                recipe.generate(rng)
            }
            OperatorSpec::FiniteSumGame {
                n,
                m,
                s,
                mu,
                l,
                sigma_b_sq,
                sigma_bias_sq,
            } => {
                let mut recipe = FiniteSumRecipe::new(*n, *m, *s, *mu, *l);
                recipe.sigma_b_sq = *sigma_b_sq;
                recipe.sigma_bias_sq = *sigma_bias_sq;
                make_finite_sum_game(&recipe, rng)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    #[default]
    WholeSpace,
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        /// Origin when absent.
        center: Option<Vec<f64>>,
        radius: f64,
    },
}

impl SetSpec {
    pub fn build(&self, dim: usize) -> Result<FeasibleSet> {
        match self {
            SetSpec::WholeSpace => FeasibleSet::whole_space(dim),
            SetSpec::Box { lo, hi } => {
                check_len("set.lo", lo, dim)?;
                check_len("set.hi", hi, dim)?;
                FeasibleSet::boxed(Vector::from_column_slice(lo), Vector::from_column_slice(hi))
            }
            SetSpec::Ball { center, radius } => {
                let center = match center {
                    Some(c) => {
                        check_len("set.center", c, dim)?;
                        Vector::from_column_slice(c)
                    }
                    None => Vector::zeros(dim),
                };
                FeasibleSet::ball(center, *radius)
            }
        }
    }
}

fn check_len(field: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() == dim {
        Ok(())
    } else {
        Err(Error::Config(format!("{field}: expected {dim} entries, got {}", v.len())))
    }
}

/// A named preset resolved against the operator's declared constants, or
/// explicit parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Preset { theorem: Theorem },
    Constant { alpha: f64 },
    Diminishing { mu: f64, offset: u64, scale: f64 },
    Switching { a: f64, d: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub method: Method,
    pub schedule: ScheduleSpec,
    /// Switching threshold; only meaningful for switching schedules.
    pub k0: Option<u64>,
}

impl MethodSpec {
    pub fn resolve(&self, op: &OperatorInstance, set: &FeasibleSet, horizon: u64) -> Result<StepsizeSchedule> {
        let sched = match &self.schedule {
            ScheduleSpec::Preset { theorem } => preset(*theorem, &schedule_constants(op, set), horizon)?,
            ScheduleSpec::Constant { alpha } => StepsizeSchedule::constant(*alpha)?,
            ScheduleSpec::Diminishing { mu, offset, scale } => StepsizeSchedule::diminishing(*mu, *offset, *scale)?,
            ScheduleSpec::Switching { a, d } => StepsizeSchedule::switching(*a, *d, horizon)?,
        };
        match (self.k0, &sched) {
            (None, _) => Ok(sched),
            (Some(k0), StepsizeSchedule::Switching { .. }) => Ok(sched.with_threshold(k0)),
            (Some(_), _) => Err(Error::Config(format!(
                "methods.{}: k0 applies only to switching schedules",
                self.method
            ))),
        }
    }
}

/// Constants for the schedule presets: the operator's declared values and
/// the set diameter.
pub fn schedule_constants(op: &OperatorInstance, set: &FeasibleSet) -> ScheduleConstants {
    let d = op.declared();
    ScheduleConstants {
        mu: d.mu,
        c: d.growth_slope,
        d: d.growth_offset,
        l: d.lipschitz,
        m_u: set.diameter().finite(),
        p: d.p,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prefix of the output files.
    pub name: String,
    pub operator: OperatorSpec,
    #[serde(default)]
    pub set: SetSpec,
    pub methods: Vec<MethodSpec>,
    /// Number of iterations `K`.
    pub iterations: u64,
    pub n_seeds: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub audit: bool,
    /// Rows are written for `k ≡ 0 (mod stride)` and for the last iteration.
    #[serde(default = "unit_stride")]
    pub record_stride: u64,
    pub output: Option<PathBuf>,
    /// Fixed starting points; a projected standard Gaussian draw otherwise,
    /// with `h0 = u0`.
    pub u0: Option<Vec<f64>>,
    pub h0: Option<Vec<f64>>,
}

impl ExperimentConfig {
    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural checks, plus resolving every schedule against the instance
    /// drawn for the first seed.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return fail(format!("name: `{}` is not a valid file prefix", self.name));
        }
        if self.n_seeds == 0 {
            return fail("n_seeds: must be >= 1".into());
        }
        if self.iterations == 0 {
            return fail("iterations: must be >= 1".into());
        }
        if self.record_stride == 0 {
            return fail("record_stride: must be >= 1".into());
        }
        if self.methods.is_empty() {
            return fail("methods: at least one method is required".into());
        }
        let dim = self.operator.dim();
        if let Some(u0) = &self.u0 {
            check_len("u0", u0, dim)?;
        }
        if let Some(h0) = &self.h0 {
            check_len("h0", h0, dim)?;
        }
        let set = self.set.build(dim).map_err(|e| Error::Config(format!("set: {e}")))?;
        let mut rng = super::instance_rng(self.base_seed);
        let op = self
            .operator
            .build(&mut rng)
            .map_err(|e| Error::Config(format!("operator: {e}")))?;
        for m in &self.methods {
            m.resolve(&op, &set, self.iterations)
                .map_err(|e| Error::Config(format!("methods.{}.schedule: {e}", m.method)))?;
        }
        Ok(())
    }
}
