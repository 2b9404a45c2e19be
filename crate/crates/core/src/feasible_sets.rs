//! Closed convex constraint sets with exact Euclidean projection.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::operators::Vector;

#[derive(Clone, Debug, PartialEq)]
pub enum FeasibleSet {
    WholeSpace(usize),
    Box { lo: Vector, hi: Vector },
    Ball { center: Vector, radius: f64 },
}

/// Diameter `M_U` of a set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Diameter {
    Finite(f64),
    Unbounded,
}

impl Diameter {
    pub fn finite(self) -> Option<f64> {
        match self {
            Diameter::Finite(d) => Some(d),
            Diameter::Unbounded => None,
        }
    }
}

impl FeasibleSet {
    pub fn whole_space(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        Ok(FeasibleSet::WholeSpace(dim))
    }

    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(Error::invalid("box", "dimension must be at least 1"));
        }
        if lo.iter().chain(hi.iter()).any(|x| !x.is_finite()) {
            return Err(Error::invalid("box", "bounds must be finite"));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::invalid("box", "need lo <= hi componentwise"));
        }
        Ok(FeasibleSet::Box { lo, hi })
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if center.is_empty() || center.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("ball", "center must be a finite non-empty vector"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("ball", format!("radius must be > 0, got {radius}")));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::WholeSpace(d) => *d,
            FeasibleSet::Box { lo, .. } => lo.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, FeasibleSet::WholeSpace(_))
    }

    /// Euclidean projection `argmin_{x ∈ U} ‖x − v‖`.
    pub fn project(&self, v: &Vector) -> Result<Vector> {
        check_dim(self.dim(), v.len())?;
        Ok(self.project_unchecked(v))
    }

    pub(crate) fn project_unchecked(&self, v: &Vector) -> Vector {
        match self {
            FeasibleSet::WholeSpace(_) => v.clone(),
            FeasibleSet::Box { lo, hi } => v.zip_zip_map(lo, hi, |x, l, h| x.clamp(l, h)),
            FeasibleSet::Ball { center, radius } => {
                let offset = v - center;
                let r = offset.norm();
                if r <= *radius {
                    return v.clone();
                }
                // Shrink by an ulp until the rounded result lies inside, so the
                // projection is exactly idempotent.
                let mut scale = *radius / r;
                loop {
                    let p = center + &offset * scale;
                    if (&p - center).norm() <= *radius {
                        return p;
                    }
                    scale *= 1.0 - f64::EPSILON;
                }
            }
        }
    }

    /// Euclidean distance from `v` to the set.
    pub fn distance(&self, v: &Vector) -> Result<f64> {
        Ok((self.project(v)? - v).norm())
    }

    pub fn contains(&self, v: &Vector) -> bool {
        v.len() == self.dim() && self.project_unchecked(v) == *v
    }

    pub fn diameter(&self) -> Diameter {
        match self {
            FeasibleSet::WholeSpace(_) => Diameter::Unbounded,
            FeasibleSet::Box { lo, hi } => Diameter::Finite((hi - lo).norm()),
            FeasibleSet::Ball { radius, .. } => Diameter::Finite(2.0 * radius),
        }
    }

    /// Axis-aligned bounding box of a bounded set.
    pub fn bounding_box(&self) -> Option<(Vector, Vector)> {
        match self {
            FeasibleSet::WholeSpace(_) => None,
            FeasibleSet::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            FeasibleSet::Ball { center, radius } => Some((
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            )),
        }
    }

    /// `min_{x ∈ U} ⟨g, x⟩`, or `None` when unbounded below.
    pub fn support_min(&self, g: &Vector) -> Option<f64> {
        match self {
            FeasibleSet::WholeSpace(_) => {
                if g.iter().all(|x| *x == 0.0) {
                    Some(0.0)
                } else {
                    None
                }
            }
            FeasibleSet::Box { lo, hi } => Some(
                g.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(gi, (l, h))| if *gi >= 0.0 { gi * l } else { gi * h })
                    .sum(),
            ),
            FeasibleSet::Ball { center, radius } => Some(g.dot(center) - radius * g.norm()),
        }
    }
}
