//! The penalized Monge objective and its parameter gradient.
//!
//! For a batch `X_1..X_M ~ μ`, `Y_1..Y_M ~ ν` and map `T = T_θ`:
//!
//! ```text
//! F(θ) = (1/λ)(1/M) Σ_i c(X_i, T(X_i))
//!      + 1/(M(M−1)) Σ_{i≠j} K(T(X_i), T(X_j))
//!      − 2/M² Σ_{i,j} K(T(X_i), Y_j)
//! ```
//!
//! The target-only term `1/(M(M−1)) Σ_{i≠j} K(Y_i, Y_j)` does not depend on θ
//! and is left out of `F`; it is added back when reporting the MMD².

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::mmd;
use crate::nn::{MlpParams, ParamGrads};
use crate::par;
use crate::sample::{squared_distance, SampleSet};

/// Transport cost `c(x, y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostSpec {
    /// `|x − y|²`
    #[default]
    SquaredEuclidean,
}

impl CostSpec {
    #[inline]
    pub fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            CostSpec::SquaredEuclidean => squared_distance(x, y),
        }
    }

    /// `∂c(x, y)/∂y`, written into `out`.
    #[inline]
    pub fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        match self {
            CostSpec::SquaredEuclidean => {
                for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
                    *o = 2.0 * (b - a);
                }
            }
        }
    }

    /// Mean cost `(1/n) Σ c(x_i, y_i)` over paired points.
    pub fn mean_cost(&self, xs: &SampleSet, ys: &SampleSet) -> Result<f64> {
        xs.check_same_dim(ys)?;
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::input("mean cost needs equally sized nonempty sets"));
        }
        let per_point = par::map_indexed(xs.len(), |i| self.cost(xs.point(i), ys.point(i)));
        Ok(per_point.into_iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Penalty weight λ, stored as `1/λ` so the `λ → ∞` limit is representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty {
    inv_lambda: f64,
}

impl Penalty {
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::input(format!("penalty weight must be positive, got {lambda}")));
        }
        Ok(Penalty {
            inv_lambda: 1.0 / lambda,
        })
    }

    pub fn from_inv_lambda(inv_lambda: f64) -> Result<Self> {
        if !(inv_lambda >= 0.0 && inv_lambda.is_finite()) {
            return Err(Error::input(format!(
                "1/lambda must be finite and nonnegative, got {inv_lambda}"
            )));
        }
        Ok(Penalty { inv_lambda })
    }

    pub fn inv_lambda(&self) -> f64 {
        self.inv_lambda
    }
}

/// Everything the objective needs besides the parameters and the batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub kernel: KernelSpec,
    pub penalty: Penalty,
    pub cost: CostSpec,
}

/// The three reported scalars of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// The optimized objective `F(θ)`.
    pub objective: f64,
    /// Full unbiased MMD² between `T(X)` and `Y`, including the Y–Y term.
    pub mmd2: f64,
    /// `(1/M) Σ c(X_i, T(X_i))`.
    pub mean_cost: f64,
}

struct Pass {
    value: LossValue,
    images: SampleSet,
    /// ∂F/∂T(X_i), flat
    upstream: Vec<f64>,
}

impl Objective {
    fn check_batch(&self, params: &MlpParams, xs: &SampleSet, ys: &SampleSet) -> Result<()> {
        xs.check_same_dim(ys)?;
        if xs.dim() != params.dim() {
            return Err(Error::input(format!(
                "batch dimension {} does not match network dimension {}",
                xs.dim(),
                params.dim()
            )));
        }
        if xs.len() != ys.len() {
            return Err(Error::input(format!(
                "source and target batches must have equal size, got {} and {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::input("batch size must be at least 2"));
        }
        Ok(())
    }

    fn pass(&self, params: &MlpParams, xs: &SampleSet, ys: &SampleSet) -> Result<Pass> {
        self.check_batch(params, xs, ys)?;
        let images = params.forward_batch(xs)?;
        let rows = mmd::row_terms(&self.kernel, &images, ys)?;
        let m = xs.len() as f64;
        let d = xs.dim();
        let w_within = 1.0 / (m * (m - 1.0));
        let w_cross = 2.0 / (m * m);
        let w_cost = self.penalty.inv_lambda / m;

        let mut within = 0.0;
        let mut cross = 0.0;
        let mut total_cost = 0.0;
        let mut upstream = vec![0.0; xs.len() * d];
        let mut cost_grad = vec![0.0; d];
        for (i, r) in rows.iter().enumerate() {
            let (x, t) = (xs.point(i), images.point(i));
            within += r.within;
            cross += r.cross;
            total_cost += self.cost.cost(x, t);
            self.cost.grad_y(x, t, &mut cost_grad);
            let up = &mut upstream[i * d..(i + 1) * d];
            for c in 0..d {
                up[c] = w_cost * cost_grad[c] + 2.0 * w_within * r.grad_within[c]
                    - w_cross * r.grad_cross[c];
            }
        }
        let target_term = {
            let n = ys.len();
            let row_sums = par::map_indexed(n, |i| {
                let y = ys.point(i);
                ys.points()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, u)| self.kernel.value_unchecked(y, u))
                    .sum::<f64>()
            });
            row_sums.into_iter().sum::<f64>() * w_within
        };
        let mean_cost = total_cost / m;
        let mmd_part = w_within * within - w_cross * cross;
        let value = LossValue {
            objective: self.penalty.inv_lambda * mean_cost + mmd_part,
            mmd2: mmd_part + target_term,
            mean_cost,
        };
        if !(value.objective.is_finite() && value.mmd2.is_finite()) {
            return Err(Error::numeric("objective is not finite"));
        }
        Ok(Pass {
            value,
            images,
            upstream,
        })
    }

    /// Evaluates `F(θ)` on one batch.
    pub fn value(&self, params: &MlpParams, xs: &SampleSet, ys: &SampleSet) -> Result<LossValue> {
        Ok(self.pass(params, xs, ys)?.value)
    }

    /// Evaluates `F(θ)` and its exact gradient `∇_θ F`.
    pub fn value_and_grad(
        &self,
        params: &MlpParams,
        xs: &SampleSet,
        ys: &SampleSet,
    ) -> Result<(LossValue, ParamGrads)> {
        let pass = self.pass(params, xs, ys)?;
        debug_assert_eq!(pass.images.len(), xs.len());
        let grads = params.backward(xs, &pass.upstream)?;
        Ok((pass.value, grads))
    }
}
