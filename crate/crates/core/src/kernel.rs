//! Symmetric strictly positive-definite radial kernels.
//!
//! Every kernel here is a function of the squared distance `r² = |x − y|²`,
//! so its spatial gradient is `∂K/∂x = c(r²)·(x − y)` for a scalar
//! coefficient `c`. The hot loops in [`crate::mmd`] use that form directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par;
use crate::sample::{check_point_dims, squared_distance, SampleSet};

/// Half-integer Matérn smoothness orders with closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaternOrder {
    Half,
    ThreeHalves,
    FiveHalves,
}

/// Kernel family and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `K(x, y) = exp(−α |x − y|²)`.
    Gaussian { alpha: f64 },
    /// Matérn kernel of half-integer order with lengthscale `ℓ`.
    Matern {
        order: MaternOrder,
        lengthscale: f64,
    },
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::Gaussian { alpha: 1.0 }
    }
}

impl KernelSpec {
    pub fn gaussian(alpha: f64) -> Result<Self> {
        let k = KernelSpec::Gaussian { alpha };
        k.validate()?;
        Ok(k)
    }

    pub fn matern(order: MaternOrder, lengthscale: f64) -> Result<Self> {
        let k = KernelSpec::Matern { order, lengthscale };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { alpha } if !(alpha > 0.0 && alpha.is_finite()) => Err(
                Error::input(format!("gaussian alpha must be positive, got {alpha}")),
            ),
            KernelSpec::Matern { lengthscale, .. }
                if !(lengthscale > 0.0 && lengthscale.is_finite()) =>
            {
                Err(Error::input(format!(
                    "matern lengthscale must be positive, got {lengthscale}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Kernel value and gradient coefficient at squared distance `r2`.
    ///
    /// The coefficient is NaN where the kernel is not differentiable
    /// (Matérn 1/2 at `r = 0`).
    #[inline]
    pub(crate) fn radial(&self, r2: f64) -> (f64, f64) {
        match *self {
            KernelSpec::Gaussian { alpha } => {
                let k = (-alpha * r2).exp();
                (k, -2.0 * alpha * k)
            }
            KernelSpec::Matern { order, lengthscale } => {
                let r = r2.sqrt();
                let l = lengthscale;
                match order {
                    MaternOrder::Half => {
                        let k = (-r / l).exp();
                        let c = if r > 0.0 { -k / (l * r) } else { f64::NAN };
                        (k, c)
                    }
                    MaternOrder::ThreeHalves => {
                        let s = 3f64.sqrt() * r / l;
                        let e = (-s).exp();
                        ((1.0 + s) * e, -3.0 / (l * l) * e)
                    }
                    MaternOrder::FiveHalves => {
                        let s = 5f64.sqrt() * r / l;
                        let e = (-s).exp();
                        (
                            (1.0 + s + s * s / 3.0) * e,
                            -5.0 / (3.0 * l * l) * (1.0 + s) * e,
                        )
                    }
                }
            }
        }
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.radial(squared_distance(x, y)).0
    }

    /// `K(x, y)`.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_point_dims(x, y)?;
        Ok(self.value_unchecked(x, y))
    }

    /// `∂K(x, y)/∂x`.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        check_point_dims(x, y)?;
        let (_, c) = self.radial(squared_distance(x, y));
        if c.is_nan() {
            return Err(Error::Domain(
                "matern-1/2 kernel is not differentiable at x = y".into(),
            ));
        }
        Ok(x.iter().zip(y).map(|(a, b)| c * (a - b)).collect())
    }

    /// Gram matrix `G[i][j] = K(X_i, Y_j)`, computed row-parallel.
    pub fn gram(&self, xs: &SampleSet, ys: &SampleSet) -> Result<Matrix> {
        xs.check_same_dim(ys)?;
        let (m, n) = (xs.len(), ys.len());
        let mut g = Matrix::zeros(m, n);
        if n == 0 {
            return Ok(g);
        }
        par::for_each_chunk_mut(g.as_mut_slice(), n, |i, row| {
            let x = xs.point(i);
            for (j, out) in row.iter_mut().enumerate() {
                *out = self.value_unchecked(x, ys.point(j));
            }
        });
        Ok(g)
    }
}
