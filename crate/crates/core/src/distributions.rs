//! Source and target distributions for the toy experiments.
//!
//! The source is always the standard normal `N(0, I_d)`. Targets are small
//! mixtures, a noisy ring, or the degenerate vertical segment `{θ} × (0, 1)`
//! whose lack of a density is the whole point of the WGAN comparison.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::tensor::Tensor;

/// Standard normal source `N(0, I_d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDist {
    pub dim: usize,
}

impl SourceDist {
    pub fn new(dim: usize) -> Self {
        SourceDist { dim }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Tensor {
        self.sample_with(n, &mut Stream::from_seed(seed))
    }

    pub fn sample_with(&self, n: usize, rng: &mut Stream) -> Tensor {
        Tensor::matrix(n, self.dim, rng.normals(n * self.dim))
    }
}

/// Toy data distributions `μ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetDist {
    #[serde(rename = "gauss_mix_1d")]
    GaussMix1d {
        weights: Vec<f64>,
        means: Vec<f64>,
        stds: Vec<f64>,
    },
    /// Isotropic 2-D Gaussian components.
    #[serde(rename = "gauss_mix_2d")]
    GaussMix2d {
        weights: Vec<f64>,
        means: Vec<[f64; 2]>,
        stds: Vec<f64>,
    },
    /// The singular distribution `(θ, Z)` with `Z ~ U(0, 1)`.
    Segment { theta: f64 },
    /// Uniform angle on a circle of `radius`, plus isotropic Gaussian noise.
    #[serde(rename = "ring_2d")]
    Ring2d { radius: f64, noise: f64 },
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

impl TargetDist {
    /// Two-component 1-D mixture `½N(-a, s²) + ½N(a, s²)`.
    pub fn symmetric_pair_1d(offset: f64, std: f64) -> Self {
        TargetDist::GaussMix1d {
            weights: vec![0.5, 0.5],
            means: vec![-offset, offset],
            stds: vec![std, std],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetDist::GaussMix1d { .. } => 1,
            _ => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_mix = |w: &[f64], nm: usize, s: &[f64]| -> Result<()> {
            if w.is_empty() || w.len() != nm || w.len() != s.len() {
                return Err(Error::InvalidConfig(
                    "mixture weights, means and stds must be nonempty and of equal length".into(),
                ));
            }
            if w.iter().any(|&x| !(x >= 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(
                    "mixture weights must be nonnegative and sum to 1".into(),
                ));
            }
            if s.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::InvalidConfig("mixture stds must be positive".into()));
            }
            Ok(())
        };
        match self {
            TargetDist::GaussMix1d {
                weights,
                means,
                stds,
            } => check_mix(weights, means.len(), stds),
            TargetDist::GaussMix2d {
                weights,
                means,
                stds,
            } => check_mix(weights, means.len(), stds),
            TargetDist::Segment { theta } if theta.is_finite() => Ok(()),
            TargetDist::Segment { .. } => {
                Err(Error::InvalidConfig("segment theta must be finite".into()))
            }
            TargetDist::Ring2d { radius, noise } => {
                if *radius > 0.0 && *noise > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(
                        "ring radius and noise must be positive".into(),
                    ))
                }
            }
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Tensor {
        self.sample_with(n, &mut Stream::from_seed(seed))
    }

    /// Draws `n` points as an `[n, dim]` matrix.
    pub fn sample_with(&self, n: usize, rng: &mut Stream) -> Tensor {
        self.sample_labeled(n, rng).0
    }

    /// Like [`TargetDist::sample_with`], also returning the mixture component
    /// of each draw (always 0 for non-mixtures).
    pub fn sample_labeled(&self, n: usize, rng: &mut Stream) -> (Tensor, Vec<usize>) {
        let d = self.dim();
        let mut data = Vec::with_capacity(n * d);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            match self {
                TargetDist::GaussMix1d {
                    weights,
                    means,
                    stds,
                } => {
                    let c = pick(weights, rng.uniform());
                    data.push(means[c] + stds[c] * rng.normal());
                    labels.push(c);
                }
                TargetDist::GaussMix2d {
                    weights,
                    means,
                    stds,
                } => {
                    let c = pick(weights, rng.uniform());
                    data.push(means[c][0] + stds[c] * rng.normal());
                    data.push(means[c][1] + stds[c] * rng.normal());
                    labels.push(c);
                }
                TargetDist::Segment { theta } => {
                    data.push(*theta);
                    data.push(rng.uniform_open());
                    labels.push(0);
                }
                TargetDist::Ring2d { radius, noise } => {
                    let phi = 2.0 * PI * rng.uniform();
                    data.push(radius * phi.cos() + noise * rng.normal());
                    data.push(radius * phi.sin() + noise * rng.normal());
                    labels.push(0);
                }
            }
        }
        (Tensor::matrix(n, d, data), labels)
    }

    /// Density at `x` for the absolutely continuous variants.
    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape(crate::error::ShapeError::new(format!(
                "point of dimension {} for a {}-D distribution",
                x.len(),
                self.dim()
            ))));
        }
        match self {
            TargetDist::GaussMix1d {
                weights,
                means,
                stds,
            } => Ok(weights
                .iter()
                .zip(means.iter().zip(stds))
                .map(|(w, (m, s))| w * normal_pdf((x[0] - m) / s) / s)
                .sum()),
            TargetDist::GaussMix2d {
                weights,
                means,
                stds,
            } => Ok(weights
                .iter()
                .zip(means.iter().zip(stds))
                .map(|(w, (m, s))| {
                    w * normal_pdf((x[0] - m[0]) / s) * normal_pdf((x[1] - m[1]) / s) / (s * s)
                })
                .sum()),
            TargetDist::Segment { .. } => Err(Error::Unsupported(
                "singular distribution has no density".into(),
            )),
            TargetDist::Ring2d { radius, noise } => {
                let rho = x[0].hypot(x[1]);
                let s2 = noise * noise;
                let a = radius * rho / s2;
                Ok(
                    (-(rho - radius).powi(2) / (2.0 * s2)).exp() * bessel_i0_scaled(a)
                        / (2.0 * PI * s2),
                )
            }
        }
    }

    /// Per-axis bounding box `±10σ` around every component (used for quadrature).
    pub fn envelope(&self) -> Vec<(f64, f64)> {
        match self {
            TargetDist::GaussMix1d { means, stds, .. } => {
                let lo = means
                    .iter()
                    .zip(stds)
                    .map(|(m, s)| m - 10.0 * s)
                    .fold(f64::INFINITY, f64::min);
                let hi = means
                    .iter()
                    .zip(stds)
                    .map(|(m, s)| m + 10.0 * s)
                    .fold(f64::NEG_INFINITY, f64::max);
                vec![(lo, hi)]
            }
            TargetDist::GaussMix2d { means, stds, .. } => (0..2)
                .map(|k| {
                    let lo = means
                        .iter()
                        .zip(stds)
                        .map(|(m, s)| m[k] - 10.0 * s)
                        .fold(f64::INFINITY, f64::min);
                    let hi = means
                        .iter()
                        .zip(stds)
                        .map(|(m, s)| m[k] + 10.0 * s)
                        .fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                })
                .collect(),
            TargetDist::Segment { theta } => vec![(*theta, *theta), (0.0, 1.0)],
            TargetDist::Ring2d { radius, noise } => {
                let r = radius + 10.0 * noise;
                vec![(-r, r), (-r, r)]
            }
        }
    }
}

fn pick(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// `e^{-a} I₀(a)` for `a ≥ 0`, via the trapezoid rule on
/// `(1/π)∫₀^π exp(a(cos φ − 1)) dφ` (spectrally accurate for this periodic integrand).
fn bessel_i0_scaled(a: f64) -> f64 {
    let n = 1024;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + (-2.0 * a).exp());
    for k in 1..n {
        s += (a * ((k as f64 * h).cos() - 1.0)).exp();
    }
    s * h / PI
}

/// The pathological pair `μ = (0, Z)`, `ν_θ = (θ, Z)`.
pub fn segment_pair(theta: f64) -> (TargetDist, TargetDist) {
    (
        TargetDist::Segment { theta: 0.0 },
        TargetDist::Segment { theta },
    )
}
