//! End-to-end runs that read a [`RunConfig`] and write artifacts.
//!
//! A training run writes into `output_dir`:
//! - `loss.csv`: `epoch,objective,mmd2,cost` per epoch
//! - `model.ckpt`: network, optimizer state and epoch counter
//! - `eval.json`: pushforward statistics on held-out data
//! - `config.toml`: the resolved configuration

use std::path::{Path, PathBuf};

use crate::compare::{compare_runs, comparison_csv, ComparisonRow};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::io::{loss_to_csv, read_points_csv, write_atomic, Checkpoint};
use crate::kernel::KernelSpec;
use crate::loss::CostSpec;
use crate::train::{LossHistory, Trainer};

pub const LOSS_FILE: &str = "loss.csv";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const EVAL_FILE: &str = "eval.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const COMPARISON_FILE: &str = "comparison.csv";

#[derive(Debug, Clone)]
pub struct TrainArtifacts {
    pub dir: PathBuf,
    pub history: LossHistory,
    pub checkpoint: Checkpoint,
    pub report: EvalReport,
}

/// Generates data, trains, evaluates on held-out data and writes artifacts.
///
/// With `resume`, training continues from an existing checkpoint instead of
/// starting from the initial parameters; the loss file then covers only the
/// newly run epochs.
pub fn run_training(config: &RunConfig, resume: Option<&Path>) -> Result<TrainArtifacts> {
    config.validate()?;
    let source = config.source.generate()?;
    let target = config.target.generate()?;
    config
        .train
        .effective_batch(source.len(), target.len())
        .map_err(|e| Error::config("train.batch_size", e.to_string()))?;
    let mut trainer = match resume {
        None => Trainer::new(config.train.clone(), source.dim())?,
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let optimizer = ck
                .optimizer
                .ok_or_else(|| Error::format(path, "checkpoint has no optimizer state"))?;
            Trainer::resume(config.train.clone(), ck.params, optimizer, ck.epoch)?
        }
    };
    let history = trainer.run(&source, &target)?;

    let source_test = config.source_test_spec().generate()?;
    let target_test = config.target_test_spec().generate()?;
    let report = evaluate(
        trainer.params(),
        &source_test,
        &target_test,
        &config.train.kernel,
        &config.train.cost,
    )?;
    let checkpoint = Checkpoint {
        params: trainer.params().clone(),
        optimizer: Some(trainer.optimizer().clone()),
        epoch: trainer.epoch(),
    };

    let dir = config.output_dir.clone();
    write_atomic(&dir.join(CONFIG_FILE), config.to_toml().as_bytes())?;
    write_atomic(&dir.join(LOSS_FILE), loss_to_csv(&history).as_bytes())?;
    checkpoint.save(&dir.join(CHECKPOINT_FILE))?;
    write_atomic(&dir.join(EVAL_FILE), report.to_json().as_bytes())?;
    Ok(TrainArtifacts {
        dir,
        history,
        checkpoint,
        report,
    })
}

/// Evaluates a saved checkpoint on point clouds read from CSV.
pub fn run_eval(
    checkpoint: &Path,
    source_csv: &Path,
    target_csv: &Path,
    kernel: &KernelSpec,
    cost: &CostSpec,
) -> Result<EvalReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let source = read_points_csv(source_csv)?;
    let target = read_points_csv(target_csv)?;
    if source.dim() != ck.params.dim() || target.dim() != ck.params.dim() {
        return Err(Error::format(
            checkpoint,
            format!(
                "network maps R^{} but data has dimension {} (source) and {} (target)",
                ck.params.dim(),
                source.dim(),
                target.dim()
            ),
        ));
    }
    evaluate(&ck.params, &source, &target, kernel, cost)
}

/// Runs the comparison and writes `comparison.csv` to `output_dir`.
pub fn run_comparison(config: &RunConfig) -> Result<(PathBuf, Vec<ComparisonRow>)> {
    config.validate()?;
    let rows = compare_runs(config)?;
    let path = config.output_dir.join(COMPARISON_FILE);
    write_atomic(&path, comparison_csv(&rows).as_bytes())?;
    Ok((path, rows))
}
