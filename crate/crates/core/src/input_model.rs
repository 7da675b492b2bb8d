//! Input distributions `p(x)` over the region searched for counterexamples.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned bounds used to clip an l∞ ball to the valid input domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// A distribution over the constrained input subdomain.
///
/// Uniform models have a density that is constant on a closed support and zero
/// elsewhere. `StandardNormal` exists to exercise the Metropolis–Hastings
/// density-ratio path with a non-uniform `p(x)`; its support is all of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputModel {
    UniformBox {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    UniformLinfBall {
        center: Vec<f64>,
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clip: Option<ClipBox>,
    },
    StandardNormal {
        dim: usize,
    },
}

impl InputModel {
    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let m = InputModel::UniformBox { lower, upper };
        m.validate()?;
        Ok(m)
    }

    pub fn unit_box(dim: usize) -> Result<Self> {
        Self::uniform_box(vec![0.0; dim], vec![1.0; dim])
    }

    pub fn linf_ball(center: Vec<f64>, radius: f64, clip: Option<ClipBox>) -> Result<Self> {
        let m = InputModel::UniformLinfBall {
            center,
            radius,
            clip,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn standard_normal(dim: usize) -> Result<Self> {
        let m = InputModel::StandardNormal { dim };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        match self {
            InputModel::UniformBox { lower, .. } => lower.len(),
            InputModel::UniformLinfBall { center, .. } => center.len(),
            InputModel::StandardNormal { dim } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            InputModel::UniformBox { lower, upper } => {
                if lower.is_empty() {
                    return Err(Error::Config("input model has dimension 0".into()));
                }
                if lower.len() != upper.len() {
                    return Err(Error::Config(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                if !finite(lower) || !finite(upper) {
                    return Err(Error::Config("box bounds must be finite".into()));
                }
            }
            InputModel::UniformLinfBall {
                center,
                radius,
                clip,
            } => {
                if center.is_empty() {
                    return Err(Error::Config("input model has dimension 0".into()));
                }
                if !(radius.is_finite() && *radius > 0.0) || !finite(center) {
                    return Err(Error::Config(format!(
                        "l-inf ball needs a finite center and positive radius, got radius {radius}"
                    )));
                }
                if let Some(c) = clip {
                    if c.lower.len() != center.len() || c.upper.len() != center.len() {
                        return Err(Error::Config(format!(
                            "clip box dimension does not match ball dimension {}",
                            center.len()
                        )));
                    }
                }
            }
            InputModel::StandardNormal { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("input model has dimension 0".into()));
                }
                return Ok(());
            }
        }
        let (lo, hi) = self.bounds().expect("uniform models are bounded");
        for (i, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l < h) {
                return Err(Error::Config(format!(
                    "empty support on coordinate {i}: [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }

    /// Bounds of the support box. A clipped l∞ ball is itself a box.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            InputModel::UniformBox { lower, upper } => Some((lower.clone(), upper.clone())),
            InputModel::UniformLinfBall {
                center,
                radius,
                clip,
            } => {
                let mut lo: Vec<f64> = center.iter().map(|c| c - radius).collect();
                let mut hi: Vec<f64> = center.iter().map(|c| c + radius).collect();
                if let Some(clip) = clip {
                    for i in 0..lo.len() {
                        lo[i] = lo[i].max(clip.lower[i]);
                        hi[i] = hi[i].min(clip.upper[i]);
                    }
                }
                Some((lo, hi))
            }
            InputModel::StandardNormal { .. } => None,
        }
    }

    /// Draws `n` exact i.i.d. samples, one per row.
    pub fn sample_prior<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        if n == 0 {
            return Err(Error::Usage("sample_prior needs n >= 1".into()));
        }
        self.validate()?;
        let d = self.dim();
        let mut out = Vec::with_capacity(n * d);
        match self.bounds() {
            Some((lo, hi)) => {
                for _ in 0..n {
                    for j in 0..d {
                        let u: f64 = rng.random();
                        out.push(lo[j] + (hi[j] - lo[j]) * u);
                    }
                }
            }
            None => {
                for _ in 0..n * d {
                    out.push(rng.sample::<f64, _>(StandardNormal));
                }
            }
        }
        Ok(Array2::from_shape_vec((n, d), out).expect("shape matches buffer"))
    }

    /// Closed-support membership test.
    pub fn in_support(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::dim_mismatch("in_support", self.dim(), x.len()));
        }
        Ok(self.contains(x))
    }

    /// Unchecked membership test used on the sampler's hot path.
    pub(crate) fn contains(&self, x: &[f64]) -> bool {
        match self {
            InputModel::UniformBox { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, h))| *l <= *v && *v <= *h),
            InputModel::UniformLinfBall {
                center,
                radius,
                clip,
            } => {
                let in_ball = x
                    .iter()
                    .zip(center)
                    .all(|(v, c)| (v - c).abs() <= *radius);
                in_ball
                    && clip.as_ref().is_none_or(|c| {
                        x.iter()
                            .zip(c.lower.iter().zip(&c.upper))
                            .all(|(v, (l, h))| *l <= *v && *v <= *h)
                    })
            }
            InputModel::StandardNormal { .. } => x.iter().all(|v| v.is_finite()),
        }
    }

    /// `log p(to) - log p(from)` for a point `from` already in the support.
    ///
    /// Uniform models give `0` or `-inf`; the normal model gives the exact
    /// Gaussian log-density difference.
    pub fn log_density_ratio(&self, from: &[f64], to: &[f64]) -> f64 {
        match self {
            InputModel::StandardNormal { .. } => {
                let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
                0.5 * (sq(from) - sq(to))
            }
            _ => {
                if self.contains(to) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn is_uniform(&self) -> bool {
        !matches!(self, InputModel::StandardNormal { .. })
    }

    /// Default random-walk radius: a quarter of the narrowest support side.
    /// The normal model uses a quarter of its unit scale.
    pub fn default_proposal_width(&self) -> f64 {
        match self.bounds() {
            Some((lo, hi)) => {
                lo.iter()
                    .zip(&hi)
                    .map(|(l, h)| h - l)
                    .fold(f64::INFINITY, f64::min)
                    / 4.0
            }
            None => 0.25,
        }
    }
}
