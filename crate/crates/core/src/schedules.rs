//! Stepsize rules `k ↦ α_k`.
//!
//! The switching rule holds `α_k = 1/d` while `k < k0` and decays as
//! `2/(a(2d/a + k − k0))` afterwards; when the horizon satisfies `K ≤ d/a` it
//! stays at `1/d` throughout. The Popov update at iteration `K` reads
//! `α_{K+1}`, so the active branch is simply extended past the horizon.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepsizeSchedule {
    Constant {
        alpha: f64,
    },
    /// `α_k = scale · 2/(μ(offset + k))`.
    DiminishingHarmonic {
        mu: f64,
        offset: u64,
        scale: f64,
    },
    Switching {
        a: f64,
        d: f64,
        horizon: u64,
        k0: u64,
    },
}

impl StepsizeSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be finite and >= 0, got {alpha}")));
        }
        Ok(StepsizeSchedule::Constant { alpha })
    }

    pub fn diminishing(mu: f64, offset: u64, scale: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid("mu", format!("must be > 0, got {mu}")));
        }
        if offset == 0 {
            return Err(Error::invalid("offset", "must be >= 1 so that α_0 is finite"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::invalid("scale", format!("must be > 0, got {scale}")));
        }
        Ok(StepsizeSchedule::DiminishingHarmonic { mu, offset, scale })
    }

    /// Switching rule with the default threshold `k0 = ⌈K/2⌉`.
    pub fn switching(a: f64, d: f64, horizon: u64) -> Result<Self> {
        Self::switching_with_threshold(a, d, horizon, horizon.div_ceil(2))
    }

    pub fn switching_with_threshold(a: f64, d: f64, horizon: u64, k0: u64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::invalid("a", format!("must be > 0, got {a}")));
        }
        if !(d >= a && d.is_finite()) {
            return Err(Error::invalid("d", format!("need d >= a = {a}, got {d}")));
        }
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be >= 1"));
        }
        Ok(StepsizeSchedule::Switching { a, d, horizon, k0 })
    }

    /// Replaces the switching threshold; other variants are returned unchanged.
    pub fn with_threshold(self, new_k0: u64) -> Self {
        match self {
            StepsizeSchedule::Switching { a, d, horizon, .. } => StepsizeSchedule::Switching {
                a,
                d,
                horizon,
                k0: new_k0,
            },
            other => other,
        }
    }

    pub fn stepsize(&self, k: u64) -> f64 {
        match *self {
            StepsizeSchedule::Constant { alpha } => alpha,
            StepsizeSchedule::DiminishingHarmonic { mu, offset, scale } => {
                scale * 2.0 / (mu * (offset + k) as f64)
            }
            StepsizeSchedule::Switching { a, d, horizon, k0 } => {
                if horizon as f64 <= d / a || k < k0 {
                    1.0 / d
                } else {
                    2.0 / (a * (2.0 * d / a + (k - k0) as f64))
                }
            }
        }
    }
}

/// Stepsize prescriptions tied to a convergence result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Theorem {
    /// Diminishing `2/(μ(3+k))` under linear growth, `p = 2`.
    #[serde(rename = "thm2")]
    Thm2,
    /// Switching with `a = μ/2`, `1/d = min{μ/(288C²), 4/(9μ)}`.
    #[serde(rename = "thm3")]
    Thm3,
    /// Switching with `a = μ`, `d = max{2√3 L, μ}` for Lipschitz operators.
    #[serde(rename = "thm4")]
    Thm4,
    /// Diminishing `2M_U^{2−p}/(μ(3+k))` on a compact set.
    #[serde(rename = "thm5a")]
    Thm5a,
    /// Switching with `a = μ/M_U^{2−p}`, `d = 2μ/M_U^{2−p}` on a compact set.
    #[serde(rename = "thm5b")]
    Thm5b,
    /// Projection-method baseline: switching with `a = μ` and `1/d = μ/C²`.
    #[serde(rename = "proj-baseline")]
    ProjBaseline,
}

impl Theorem {
    pub const ALL: [Theorem; 6] = [
        Theorem::Thm2,
        Theorem::Thm3,
        Theorem::Thm4,
        Theorem::Thm5a,
        Theorem::Thm5b,
        Theorem::ProjBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Theorem::Thm2 => "thm2",
            Theorem::Thm3 => "thm3",
            Theorem::Thm4 => "thm4",
            Theorem::Thm5a => "thm5a",
            Theorem::Thm5b => "thm5b",
            Theorem::ProjBaseline => "proj-baseline",
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Theorem::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid("theorem", format!("unknown preset `{s}`")))
    }
}

/// Problem constants consumed by the stepsize presets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConstants {
    pub mu: Option<f64>,
    /// Growth slope `C`.
    pub c: Option<f64>,
    /// Growth offset `D` (unused by the presets, carried for completeness).
    pub d: Option<f64>,
    pub l: Option<f64>,
    pub m_u: Option<f64>,
    pub p: Option<f64>,
}

fn need(value: Option<f64>, name: &'static str) -> Result<f64> {
    value.ok_or(Error::UnavailableConstant(name))
}

/// `d` for the Lipschitz preset.
pub(crate) fn thm4_d(mu: f64, l: f64) -> f64 {
    (2.0 * 3f64.sqrt() * l).max(mu)
}

/// `d` for the linear-growth preset: the largest stepsize the theorem allows.
pub(crate) fn thm3_d(mu: f64, c: f64) -> f64 {
    1.0 / (mu / (288.0 * c * c)).min(4.0 / (9.0 * mu))
}

/// Schedule parameters exactly as the named result prescribes, for horizon
/// `K ≥ 2` and the default threshold.
pub fn preset(theorem: Theorem, constants: &ScheduleConstants, horizon: u64) -> Result<StepsizeSchedule> {
    if horizon < 2 {
        return Err(Error::invalid("horizon", "presets need K >= 2"));
    }
    match theorem {
        Theorem::Thm2 => StepsizeSchedule::diminishing(need(constants.mu, "mu")?, 3, 1.0),
        Theorem::Thm3 => {
            let mu = need(constants.mu, "mu")?;
            let c = need(constants.c, "C")?;
            StepsizeSchedule::switching(mu / 2.0, thm3_d(mu, c), horizon)
        }
        Theorem::Thm4 => {
            let mu = need(constants.mu, "mu")?;
            let l = need(constants.l, "L")?;
            StepsizeSchedule::switching(mu, thm4_d(mu, l), horizon)
        }
        Theorem::Thm5a => {
            let mu = need(constants.mu, "mu")?;
            let m_u = need(constants.m_u, "M_U")?;
            let p = need(constants.p, "p")?;
            StepsizeSchedule::diminishing(mu, 3, m_u.powf(2.0 - p))
        }
        Theorem::Thm5b => {
            let mu = need(constants.mu, "mu")?;
            let m_u = need(constants.m_u, "M_U")?;
            let p = need(constants.p, "p")?;
            let w = m_u.powf(2.0 - p);
            StepsizeSchedule::switching(mu / w, 2.0 * mu / w, horizon)
        }
        Theorem::ProjBaseline => {
            let mu = need(constants.mu, "mu")?;
            let c = need(constants.c, "C")?;
            StepsizeSchedule::switching(mu, (c * c / mu).max(mu), horizon)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn switching_short_horizon_is_constant() {
        let s = StepsizeSchedule::switching(1.0, 2.0, 1).unwrap();
        for k in 0..=2 {
            assert_eq!(s.stepsize(k), 0.5);
        }
    }

    #[test]
    fn switching_branches() {
        let s = StepsizeSchedule::switching(1.0, 2.0, 10).unwrap();
        assert!(matches!(s, StepsizeSchedule::Switching { k0: 5, .. }));
        assert_eq!(s.stepsize(3), 0.5);
        assert_eq!(s.stepsize(5), 0.5);
        assert_eq!(s.stepsize(9), 0.25);
        // extension to K + 1
        assert_relative_eq!(s.stepsize(11), 2.0 / 10.0);
    }

    #[test]
    fn default_threshold_is_half_horizon_rounded_up() {
        for (horizon, k0) in [(1, 1), (2, 1), (9, 5), (10, 5), (10_000, 5_000)] {
            let s = StepsizeSchedule::switching(0.1, 1.0, horizon).unwrap();
            assert!(matches!(s, StepsizeSchedule::Switching { k0: t, .. } if t == k0));
        }
    }

    #[test]
    fn threshold_override() {
        let s = StepsizeSchedule::switching(0.1, 1.0, 10_000).unwrap().with_threshold(200);
        assert!(matches!(s, StepsizeSchedule::Switching { k0: 200, .. }));
        assert_eq!(s.stepsize(199), 1.0);
        assert_relative_eq!(s.stepsize(201), 2.0 / (0.1 * (20.0 + 1.0)));
    }

    #[test]
    fn diminishing_first_step() {
        let s = StepsizeSchedule::diminishing(2.0, 3, 1.0).unwrap();
        assert_relative_eq!(s.stepsize(0), 1.0 / 3.0);
        assert_relative_eq!(s.stepsize(7), 2.0 / (2.0 * 10.0));
    }

    #[test]
    fn invalid_parameters() {
        assert!(StepsizeSchedule::switching(1.0, 0.5, 10).is_err());
        assert!(StepsizeSchedule::switching(0.0, 0.5, 10).is_err());
        assert!(StepsizeSchedule::switching(1.0, 2.0, 0).is_err());
        assert!(StepsizeSchedule::diminishing(0.0, 3, 1.0).is_err());
        assert!(StepsizeSchedule::diminishing(1.0, 0, 1.0).is_err());
        assert!(StepsizeSchedule::constant(-0.1).is_err());
    }

    #[test]
    fn presets() {
        let c = ScheduleConstants {
            mu: Some(0.1),
            l: Some(1.0),
            ..Default::default()
        };
        match preset(Theorem::Thm4, &c, 100).unwrap() {
            StepsizeSchedule::Switching { a, d, .. } => {
                assert_eq!(a, 0.1);
                assert_relative_eq!(d, 2.0 * 3f64.sqrt());
            }
            other => panic!("unexpected {other:?}"),
        }

        let c = ScheduleConstants {
            mu: Some(2.0),
            ..Default::default()
        };
        let s = preset(Theorem::Thm2, &c, 100).unwrap();
        assert_eq!(
            s,
            StepsizeSchedule::DiminishingHarmonic {
                mu: 2.0,
                offset: 3,
                scale: 1.0
            }
        );

        for p in [0.5, 1.0, 2.0] {
            let c = ScheduleConstants {
                mu: Some(1.0),
                m_u: Some(1.0),
                p: Some(p),
                ..Default::default()
            };
            match preset(Theorem::Thm5b, &c, 50).unwrap() {
                StepsizeSchedule::Switching { a, d, .. } => assert_eq!((a, d), (1.0, 2.0)),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn preset_missing_constant() {
        let c = ScheduleConstants {
            mu: Some(0.1),
            ..Default::default()
        };
        assert!(matches!(
            preset(Theorem::Thm4, &c, 100),
            Err(Error::UnavailableConstant("L"))
        ));
        assert!(matches!(
            preset(Theorem::Thm3, &c, 100),
            Err(Error::UnavailableConstant("C"))
        ));
        assert!(preset(Theorem::Thm2, &c, 1).is_err());
    }

    #[test]
    fn proj_baseline_uses_mu_over_c_squared() {
        let c = ScheduleConstants {
            mu: Some(0.01),
            c: Some(1.0),
            ..Default::default()
        };
        let s = preset(Theorem::ProjBaseline, &c, 10_000).unwrap();
        assert_relative_eq!(s.stepsize(0), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn theorem_names_round_trip() {
        for t in Theorem::ALL {
            assert_eq!(t.name().parse::<Theorem>().unwrap(), t);
        }
        assert!("thm9".parse::<Theorem>().is_err());
    }
}
