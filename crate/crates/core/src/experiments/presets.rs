//! Ready-made configurations for the published experiments.

use crate::error::{Error, Result};
use crate::schedules::Theorem;
use crate::solvers::Method;

use super::config::{ExperimentConfig, MethodSpec, OperatorSpec, ScheduleSpec, SetSpec};

pub const PRESET_NAMES: [&str; 6] = ["fig2-a", "fig2-b", "fig2-c", "fig3", "finite-sum", "example-p"];

/// Optional replacements for preset fields.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PresetOverrides {
    /// Exponent for `example-p` (default 1.3).
    pub p: Option<f64>,
    /// `μ_{A1} = μ_{A3}` for `fig3` (default 0.2).
    pub mu_a: Option<f64>,
    pub k0: Option<u64>,
    pub iterations: Option<u64>,
    pub n_seeds: Option<usize>,
    pub base_seed: Option<u64>,
}

const DEFAULT_K: u64 = 10_000;
const DEFAULT_SEEDS: usize = 20;
const DEFAULT_STRIDE: u64 = 10;

fn preset_method(method: Method, theorem: Theorem, k0: Option<u64>) -> MethodSpec {
    MethodSpec {
        method,
        schedule: ScheduleSpec::Preset { theorem },
        k0,
    }
}

fn quadratic(mu_a: f64) -> OperatorSpec {
    OperatorSpec::SwitchedQuadratic {
        m: 30,
        s: 30,
        mu_a,
        l_a: 1.0,
        mu_a3: None,
        l_a3: None,
        a2_var: None,
        b_var: None,
        noise_var: None,
        radius_switch: 10.0,
        c_outside: 0.5,
    }
}

/// Popov uses the Lipschitz preset; projection uses `a = μ`, `1/d = μ/C²`.
fn both(k0: Option<u64>) -> Vec<MethodSpec> {
    vec![
        preset_method(Method::Popov, Theorem::Thm4, k0),
        preset_method(Method::Projection, Theorem::ProjBaseline, k0),
    ]
}

pub fn preset_config(name: &str, overrides: &PresetOverrides) -> Result<ExperimentConfig> {
    let (operator, methods) = match name {
        "fig2-a" | "fig2-b" | "fig2-c" => {
            let mu_a = match name {
                "fig2-a" => 0.2,
                "fig2-b" => 0.02,
                _ => 0.002,
            };
            (quadratic(overrides.mu_a.unwrap_or(mu_a)), both(overrides.k0))
        }
        "fig3" => (
            quadratic(overrides.mu_a.unwrap_or(0.2)),
            both(Some(overrides.k0.unwrap_or(200))),
        ),
        "finite-sum" => (
            OperatorSpec::FiniteSumGame {
                n: 20,
                m: 30,
                s: 30,
                mu: overrides.mu_a.unwrap_or(0.2),
                l: 1.0,
                sigma_b_sq: None,
                sigma_bias_sq: None,
            },
            both(Some(overrides.k0.unwrap_or(200))),
        ),
        "example-p" => {
            let p = overrides.p.unwrap_or(1.3);
            let k0 = Some(overrides.k0.unwrap_or(1));
            // Growth slope C = 2 (exact for 1 ≤ p ≤ 2) and μ = 2^{1−p}; the
            // schedules are spelled out so they also exist outside that range.
            let mu = if p >= 1.0 { 2f64.powf(1.0 - p) } else { 1.0 };
            let c = 2.0;
            let popov = ScheduleSpec::Switching {
                a: mu,
                d: (2.0 * 3f64.sqrt() * c).max(mu),
            };
            let projection = ScheduleSpec::Switching {
                a: mu,
                d: (c * c / mu).max(mu),
            };
            (
                OperatorSpec::Example1 { p, noise_var: 1.0 },
                vec![
                    MethodSpec {
                        method: Method::Popov,
                        schedule: popov,
                        k0,
                    },
                    MethodSpec {
                        method: Method::Projection,
                        schedule: projection,
                        k0,
                    },
                ],
            )
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    let cfg = ExperimentConfig {
        name: name.to_string(),
        operator,
        set: SetSpec::WholeSpace,
        methods,
        iterations: overrides.iterations.unwrap_or(DEFAULT_K),
        n_seeds: overrides.n_seeds.unwrap_or(DEFAULT_SEEDS),
        base_seed: overrides.base_seed.unwrap_or(0),
        audit: false,
        record_stride: DEFAULT_STRIDE,
        output: None,
        u0: None,
        h0: None,
    };
    cfg.validate()?;
    Ok(cfg)
}
