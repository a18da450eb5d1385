//! Adam with bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{MlpParams, ParamGrads};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::input(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::input(format!("eps must be positive, got {}", self.eps)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::input(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

/// Moment estimates and step counter for one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub hyper: AdamHyper,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step_count: u64,
}

impl AdamState {
    pub fn new(num_params: usize, hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(AdamState {
            hyper,
            first_moment: vec![0.0; num_params],
            second_moment: vec![0.0; num_params],
            step_count: 0,
        })
    }

    pub fn for_params(params: &MlpParams, hyper: AdamHyper) -> Result<Self> {
        Self::new(params.num_params(), hyper)
    }

    /// One Adam update of a raw parameter vector. Refuses non-finite
    /// gradients without touching any state.
    pub fn step_slice(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        let n = self.first_moment.len();
        if params.len() != n || grads.len() != n {
            return Err(Error::input(format!(
                "optimizer holds {n} moments but got {} params and {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::numeric("non-finite gradient; step refused"));
        }
        let AdamHyper {
            lr,
            beta1,
            beta2,
            eps,
        } = self.hyper;
        self.step_count += 1;
        let t = self.step_count as f64;
        let correction1 = 1.0 - beta1.powf(t);
        let correction2 = 1.0 - beta2.powf(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }

    /// The gradient step on θ.
    pub fn step(&mut self, params: &mut MlpParams, grads: &ParamGrads) -> Result<()> {
        self.step_slice(params.values_mut(), grads.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(lr: f64) -> AdamHyper {
        AdamHyper {
            lr,
            ..AdamHyper::default()
        }
    }

    #[test]
    fn init_zero_moments_and_validation() {
        let s = AdamState::new(5, AdamHyper::default()).unwrap();
        assert_eq!(s.hyper.lr, 0.0001);
        assert!(s.first_moment.iter().chain(&s.second_moment).all(|&v| v == 0.0));
        assert_eq!(s.step_count, 0);
        assert!(AdamState::new(5, hyper(0.0)).is_err());
        let bad_eps = AdamHyper {
            eps: 0.0,
            ..AdamHyper::default()
        };
        assert!(AdamState::new(5, bad_eps).is_err());
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut s = AdamState::new(3, AdamHyper::default()).unwrap();
        let mut p = vec![1.0, -2.0, 3.0];
        s.step_slice(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert!(s.first_moment.iter().chain(&s.second_moment).all(|&v| v == 0.0));
        assert_eq!(s.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // m̂ = g, v̂ = g², so Δ = lr·g/(|g| + eps).
        let g = 0.37;
        let mut s = AdamState::new(1, hyper(0.01)).unwrap();
        let mut p = vec![0.0];
        s.step_slice(&mut p, &[g]).unwrap();
        let expected = -0.01 * g / (g + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] + 0.01).abs() < 1e-9);
    }

    #[test]
    fn non_finite_gradient_refused() {
        let mut s = AdamState::new(2, AdamHyper::default()).unwrap();
        let before = s.clone();
        let mut p = vec![1.0, 1.0];
        let err = s.step_slice(&mut p, &[f64::NAN, 0.0]).unwrap_err();
        assert!(err.is_numeric());
        assert_eq!(s, before);
        assert_eq!(p, vec![1.0, 1.0]);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut s = AdamState::new(2, hyper(0.1)).unwrap();
            let mut p = vec![0.5, -0.5];
            for k in 0..10 {
                s.step_slice(&mut p, &[k as f64 * 0.1, -1.0]).unwrap();
            }
            (s, p)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn persistent_positive_gradient_decreases_parameter() {
        let mut s = AdamState::new(1, hyper(0.001)).unwrap();
        let mut p = vec![0.0];
        for _ in 0..200 {
            let before = p[0];
            s.step_slice(&mut p, &[2.5]).unwrap();
            assert!(p[0] < before);
        }
    }

    #[test]
    fn minimizes_quadratic() {
        let target: Vec<f64> = (0..10).map(|i| (i as f64 - 4.5) * 0.3).collect();
        let mut theta = vec![0.0; 10];
        let mut s = AdamState::new(10, hyper(0.01)).unwrap();
        for _ in 0..5000 {
            let g: Vec<f64> = theta.iter().zip(&target).map(|(t, s)| 2.0 * (t - s)).collect();
            s.step_slice(&mut theta, &g).unwrap();
        }
        let dist: f64 = theta
            .iter()
            .zip(&target)
            .map(|(t, s)| (t - s) * (t - s))
            .sum::<f64>()
            .sqrt();
        assert!(dist < 1e-3, "distance {dist}");
    }
}
