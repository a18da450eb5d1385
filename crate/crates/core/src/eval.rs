//! Post-training evaluation and closed-form references for Gaussian pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::loss::CostSpec;
use crate::mmd::mmd2_unbiased;
use crate::nn::MlpParams;
use crate::par;
use crate::sample::{check_point_dims, squared_distance, SampleSet};

/// Pushforward statistics of a trained map on held-out data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Per-coordinate mean of `T(x)`.
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviation of `T(x)` (`n − 1` divisor).
    pub sd: Vec<f64>,
    /// Average of `mean` over coordinates.
    pub mean_pooled: f64,
    /// Average of `sd` over coordinates.
    pub sd_pooled: f64,
    /// Estimate of `∫ c(x, T(x)) dμ`.
    pub transport_cost: f64,
    /// Unbiased MMD² between `T(source)` and `target`; `None` if either set
    /// has fewer than 2 points.
    pub mmd2: Option<f64>,
    pub n: usize,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        // Serializing plain numbers and vectors cannot fail.
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("bad eval report: {e}")))
    }
}

/// Pushes `source` through `params` and summarizes the images.
pub fn evaluate(
    params: &MlpParams,
    source: &SampleSet,
    target: &SampleSet,
    kernel: &KernelSpec,
    cost: &CostSpec,
) -> Result<EvalReport> {
    source.check_same_dim(target)?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::input("evaluation sets must be nonempty"));
    }
    let images = params.forward_batch(source)?;
    report_for_images(source, &images, target, kernel, cost)
}

/// Builds a report for precomputed images `T(source)`.
pub fn report_for_images(
    source: &SampleSet,
    images: &SampleSet,
    target: &SampleSet,
    kernel: &KernelSpec,
    cost: &CostSpec,
) -> Result<EvalReport> {
    images.check_same_dim(target)?;
    let mean = images.mean()?;
    let sd = images.std_dev()?;
    let d = mean.len() as f64;
    let mmd2 = if images.len() >= 2 && target.len() >= 2 {
        Some(mmd2_unbiased(kernel, images, target)?)
    } else {
        None
    };
    Ok(EvalReport {
        mean_pooled: mean.iter().sum::<f64>() / d,
        sd_pooled: sd.iter().sum::<f64>() / d,
        mean,
        sd,
        transport_cost: cost.mean_cost(source, images)?,
        mmd2,
        n: images.len(),
    })
}

/// The optimal map between two isotropic Gaussians with equal covariance:
/// the translation `x ↦ x + (m1 − m0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOptimalMap {
    shift: Vec<f64>,
}

impl GaussianOptimalMap {
    pub fn new(m0: &[f64], m1: &[f64]) -> Result<Self> {
        check_point_dims(m0, m1)?;
        Ok(GaussianOptimalMap {
            shift: m1.iter().zip(m0).map(|(b, a)| b - a).collect(),
        })
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(a, s)| a + s).collect()
    }

    /// The same map as network parameters (one linear layer).
    pub fn to_params(&self) -> Result<MlpParams> {
        MlpParams::translation(&self.shift)
    }
}

/// `(1/N) Σ |T_θ(x_i) − T*(x_i)|²` over the probe points.
pub fn map_deviation(
    params: &MlpParams,
    oracle: &GaussianOptimalMap,
    probe: &SampleSet,
) -> Result<f64> {
    if probe.dim() != oracle.shift.len() {
        return Err(Error::input(format!(
            "probe dimension {} does not match oracle dimension {}",
            probe.dim(),
            oracle.shift.len()
        )));
    }
    let images = params.forward_batch(probe)?;
    let per_point = par::map_indexed(probe.len(), |i| {
        squared_distance(images.point(i), &oracle.apply(probe.point(i)))
    });
    Ok(per_point.into_iter().sum::<f64>() / probe.len() as f64)
}

/// `W₂²` between equal-covariance isotropic Gaussians: `|m0 − m1|²`.
pub fn w2_squared_gaussian(m0: &[f64], m1: &[f64]) -> Result<f64> {
    check_point_dims(m0, m1)?;
    Ok(squared_distance(m0, m1))
}
