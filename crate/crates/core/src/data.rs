//! Seeded synthetic point clouds: two moons, two circles, isotropic Gaussians.
//!
//! Randomness comes from ChaCha8 seeded with the dataset's `seed` on a
//! dedicated stream, so each dataset is reproducible on its own and two
//! datasets with different seeds draw independent streams.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::SampleSet;

const DATA_STREAM: u64 = 0;

fn default_noise() -> f64 {
    0.05
}

fn default_factor() -> f64 {
    0.5
}

fn default_variance() -> f64 {
    1.0
}

fn default_mean() -> Vec<f64> {
    vec![0.0, 0.0]
}

/// A synthetic distribution together with sample count and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Upper arc `(cos t, sin t)` and lower arc `(1 − cos t, 0.5 − sin t)`,
    /// `t ~ U[0, π]`, plus Gaussian noise of SD `noise`.
    TwoMoons {
        n: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        seed: u64,
    },
    /// Unit circle and a concentric circle of radius `factor`, angle
    /// `~ U[0, 2π)`, plus Gaussian noise of SD `noise`.
    TwoCircles {
        n: usize,
        #[serde(default = "default_noise")]
        noise: f64,
        #[serde(default = "default_factor")]
        factor: f64,
        seed: u64,
    },
    /// `N(mean, variance · I)`.
    IsotropicGaussian {
        n: usize,
        #[serde(default = "default_mean")]
        mean: Vec<f64>,
        #[serde(default = "default_variance")]
        variance: f64,
        seed: u64,
    },
}

impl DatasetSpec {
    pub fn n(&self) -> usize {
        match self {
            DatasetSpec::TwoMoons { n, .. }
            | DatasetSpec::TwoCircles { n, .. }
            | DatasetSpec::IsotropicGaussian { n, .. } => *n,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            DatasetSpec::TwoMoons { seed, .. }
            | DatasetSpec::TwoCircles { seed, .. }
            | DatasetSpec::IsotropicGaussian { seed, .. } => *seed,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DatasetSpec::IsotropicGaussian { mean, .. } => mean.len(),
            _ => 2,
        }
    }

    /// Same distribution, different count and seed.
    pub fn with_n_and_seed(&self, new_n: usize, new_seed: u64) -> DatasetSpec {
        let mut s = self.clone();
        match &mut s {
            DatasetSpec::TwoMoons { n, seed, .. }
            | DatasetSpec::TwoCircles { n, seed, .. }
            | DatasetSpec::IsotropicGaussian { n, seed, .. } => {
                *n = new_n;
                *seed = new_seed;
            }
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::input("dataset size must be at least 1"));
        }
        let check_noise = |noise: f64| {
            if noise >= 0.0 && noise.is_finite() {
                Ok(())
            } else {
                Err(Error::input(format!("noise must be nonnegative, got {noise}")))
            }
        };
        match self {
            DatasetSpec::TwoMoons { noise, .. } => check_noise(*noise),
            DatasetSpec::TwoCircles { noise, factor, .. } => {
                check_noise(*noise)?;
                if *factor > 0.0 && *factor < 1.0 {
                    Ok(())
                } else {
                    Err(Error::input(format!("factor must lie in (0, 1), got {factor}")))
                }
            }
            DatasetSpec::IsotropicGaussian { mean, variance, .. } => {
                if mean.is_empty() {
                    return Err(Error::input("gaussian mean must have dimension at least 1"));
                }
                if mean.iter().any(|m| !m.is_finite()) {
                    return Err(Error::input("gaussian mean must be finite"));
                }
                if *variance > 0.0 && variance.is_finite() {
                    Ok(())
                } else {
                    Err(Error::input(format!("variance must be positive, got {variance}")))
                }
            }
        }
    }

    /// Draws the sample set.
    pub fn generate(&self) -> Result<SampleSet> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        rng.set_stream(DATA_STREAM);
        let n = self.n();
        let mut data = Vec::with_capacity(n * self.dim());
        match self {
            DatasetSpec::TwoMoons { noise, .. } => {
                let upper = n / 2;
                for i in 0..n {
                    let t = rng.random::<f64>() * PI;
                    let (x, y) = if i < upper {
                        (t.cos(), t.sin())
                    } else {
                        (1.0 - t.cos(), 0.5 - t.sin())
                    };
                    push_noisy(&mut data, &mut rng, [x, y], *noise);
                }
            }
            DatasetSpec::TwoCircles { noise, factor, .. } => {
                let outer = n / 2;
                for i in 0..n {
                    let t = rng.random::<f64>() * 2.0 * PI;
                    let r = if i < outer { 1.0 } else { *factor };
                    push_noisy(&mut data, &mut rng, [r * t.cos(), r * t.sin()], *noise);
                }
            }
            DatasetSpec::IsotropicGaussian { mean, variance, .. } => {
                let sd = variance.sqrt();
                for _ in 0..n {
                    for m in mean {
                        let z: f64 = rng.sample(StandardNormal);
                        data.push(m + sd * z);
                    }
                }
            }
        }
        SampleSet::from_flat(self.dim(), data)
    }
}

fn push_noisy(data: &mut Vec<f64>, rng: &mut ChaCha8Rng, point: [f64; 2], noise: f64) {
    for v in point {
        let z: f64 = rng.sample(StandardNormal);
        // noise == 0 leaves the point exactly on its curve
        data.push(if noise > 0.0 { v + noise * z } else { v });
    }
}
