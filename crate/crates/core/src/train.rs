//! The training loop: repeated objective gradients and Adam steps.
//!
//! With `batch_size` equal to the data size every epoch is a single
//! full-batch step on the fixed sample. Smaller batches give shuffled
//! minibatch epochs; points that do not fill a whole batch are skipped for
//! that epoch.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::loss::{CostSpec, LossValue, Objective, Penalty};
use crate::nn::{Activation, MlpParams};
use crate::optim::{AdamHyper, AdamState};
use crate::sample::SampleSet;

/// Shuffling for epoch `e` uses ChaCha stream `SHUFFLE_STREAM_BASE + e`, so
/// any epoch's permutation can be rebuilt when resuming.
const SHUFFLE_STREAM_BASE: u64 = 2;

/// Hidden layer widths and activation; the output layer is always linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetShape {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for NetShape {
    fn default() -> Self {
        NetShape {
            hidden: vec![64],
            activation: Activation::Relu,
        }
    }
}

impl NetShape {
    pub fn widths(&self, dim: usize) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden.len() + 2);
        w.push(dim);
        w.extend_from_slice(&self.hidden);
        w.push(dim);
        w
    }

    pub fn activations(&self) -> Vec<Activation> {
        let mut a = vec![self.activation; self.hidden.len()];
        a.push(Activation::Identity);
        a
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    /// `None` trains on the full sample each step.
    pub batch_size: Option<usize>,
    /// `1/λ`; the transport cost is scaled by this.
    pub inv_lambda: f64,
    pub kernel: KernelSpec,
    pub cost: CostSpec,
    pub net: NetShape,
    pub adam: AdamHyper,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3000,
            batch_size: None,
            inv_lambda: 1e-6,
            kernel: KernelSpec::default(),
            cost: CostSpec::SquaredEuclidean,
            net: NetShape::default(),
            adam: AdamHyper::default(),
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel
            .validate()
            .map_err(|e| Error::config("train.kernel", e.to_string()))?;
        self.adam
            .validate()
            .map_err(|e| Error::config("train.adam", e.to_string()))?;
        Penalty::from_inv_lambda(self.inv_lambda)
            .map_err(|e| Error::config("train.inv_lambda", e.to_string()))?;
        if let Some(m) = self.batch_size {
            if m < 2 {
                return Err(Error::config("train.batch_size", "must be at least 2"));
            }
        }
        if self.net.hidden.contains(&0) {
            return Err(Error::config("train.net.hidden", "widths must be at least 1"));
        }
        Ok(())
    }

    pub fn objective(&self) -> Result<Objective> {
        Ok(Objective {
            kernel: self.kernel,
            penalty: Penalty::from_inv_lambda(self.inv_lambda)?,
            cost: self.cost,
        })
    }

    pub fn init_params(&self, dim: usize) -> Result<MlpParams> {
        MlpParams::init(&self.net.widths(dim), &self.net.activations(), self.seed)
    }

    /// Batch size used for the given data sizes.
    pub fn effective_batch(&self, source_len: usize, target_len: usize) -> Result<usize> {
        let available = source_len.min(target_len);
        let m = self.batch_size.unwrap_or(available);
        if m > available {
            return Err(Error::input(format!(
                "batch size {m} exceeds data size (source {source_len}, target {target_len})"
            )));
        }
        if m < 2 {
            return Err(Error::input("need at least 2 points per batch"));
        }
        Ok(m)
    }
}

/// Epoch-mean loss values; `epoch` counts from 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub objective: f64,
    pub mmd2: f64,
    pub cost: f64,
}

pub type LossHistory = Vec<EpochRecord>;

/// Resumable training state.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    objective: Objective,
    params: MlpParams,
    optimizer: AdamState,
    epoch: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        let params = config.init_params(dim)?;
        let optimizer = AdamState::for_params(&params, config.adam)?;
        Self::resume(config, params, optimizer, 0)
    }

    /// Continues from saved parameters, optimizer state and epoch counter.
    pub fn resume(
        config: TrainConfig,
        params: MlpParams,
        optimizer: AdamState,
        epoch: usize,
    ) -> Result<Self> {
        config.validate()?;
        if optimizer.first_moment.len() != params.num_params() {
            return Err(Error::input("optimizer state does not match the network"));
        }
        let objective = config.objective()?;
        Ok(Trainer {
            config,
            objective,
            params,
            optimizer,
            epoch,
        })
    }

    pub fn params(&self) -> &MlpParams {
        &self.params
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.optimizer
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    fn order(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..len).collect();
        if self.config.shuffle {
            idx.shuffle(rng);
        }
        idx
    }

    /// Runs one pass over the data and returns its epoch-mean losses.
    pub fn run_epoch(&mut self, source: &SampleSet, target: &SampleSet) -> Result<EpochRecord> {
        source.check_same_dim(target)?;
        if source.dim() != self.params.dim() {
            return Err(Error::input("data dimension does not match the network"));
        }
        let m = self
            .config
            .effective_batch(source.len(), target.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(SHUFFLE_STREAM_BASE + self.epoch as u64);
        let src_order = self.order(source.len(), &mut rng);
        let tgt_order = self.order(target.len(), &mut rng);
        let batches = (source.len() / m).min(target.len() / m);

        let mut sum = LossValue {
            objective: 0.0,
            mmd2: 0.0,
            mean_cost: 0.0,
        };
        for b in 0..batches {
            let range = b * m..(b + 1) * m;
            let xs = source.select(&src_order[range.clone()]);
            let ys = target.select(&tgt_order[range]);
            let tag = |e: Error| Error::Training {
                epoch: self.epoch + 1,
                batch: b,
                source: Box::new(e),
            };
            let (value, grads) = self
                .objective
                .value_and_grad(&self.params, &xs, &ys)
                .map_err(tag)?;
            self.optimizer.step(&mut self.params, &grads).map_err(tag)?;
            sum.objective += value.objective;
            sum.mmd2 += value.mmd2;
            sum.mean_cost += value.mean_cost;
        }
        self.epoch += 1;
        let nb = batches as f64;
        Ok(EpochRecord {
            epoch: self.epoch,
            objective: sum.objective / nb,
            mmd2: sum.mmd2 / nb,
            cost: sum.mean_cost / nb,
        })
    }

    /// Runs until `config.epochs` epochs have completed in total.
    pub fn run(&mut self, source: &SampleSet, target: &SampleSet) -> Result<LossHistory> {
        let mut history = Vec::with_capacity(self.config.epochs.saturating_sub(self.epoch));
        while self.epoch < self.config.epochs {
            history.push(self.run_epoch(source, target)?);
        }
        Ok(history)
    }
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: MlpParams,
    pub optimizer: AdamState,
    pub history: LossHistory,
}

/// Trains a transport map from `source` to `target` from scratch.
pub fn train(config: &TrainConfig, source: &SampleSet, target: &SampleSet) -> Result<TrainOutcome> {
    source.check_same_dim(target)?;
    config.effective_batch(source.len(), target.len())?;
    let mut trainer = Trainer::new(config.clone(), source.dim())?;
    let history = trainer.run(source, target)?;
    Ok(TrainOutcome {
        params: trainer.params,
        optimizer: trainer.optimizer,
        history,
    })
}
