//! Neural solutions of the Monge optimal transport problem.
//!
//! A multilayer perceptron `T_θ: R^d → R^d` is trained to minimize
//! transport cost plus a penalty on the squared maximum mean discrepancy
//! between the pushforward of the source sample and the target sample.
//! An entropic Sinkhorn solver with barycentric projection serves as a
//! baseline.
//!
//! Inner loops (kernel sums, batch forward/backward, Sinkhorn updates) run
//! on rayon when the `parallel` feature is enabled (the default). Every
//! reduction happens in a fixed order, so results are bit-identical with
//! and without the feature.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod io;
pub mod kernel;
pub mod loss;
pub mod matrix;
pub mod mmd;
pub mod nn;
pub mod optim;
pub mod par;
pub mod pipeline;
pub mod sample;
pub mod sinkhorn;
pub mod train;

pub use config::RunConfig;
pub use data::DatasetSpec;
pub use error::{Error, Result};
pub use eval::{evaluate, map_deviation, w2_squared_gaussian, EvalReport, GaussianOptimalMap};
pub use kernel::{KernelSpec, MaternOrder};
pub use loss::{CostSpec, LossValue, Objective, Penalty};
pub use matrix::Matrix;
pub use mmd::{mmd2_biased, mmd2_population_gaussian, mmd2_unbiased, mmd2_unbiased_grad_points};
pub use nn::{Activation, MlpParams, ParamGrads};
pub use optim::{AdamHyper, AdamState};
pub use sample::SampleSet;
pub use sinkhorn::{barycentric_map, sinkhorn_solve, Coupling, SinkhornOptions};
pub use train::{train, EpochRecord, LossHistory, NetShape, TrainConfig, TrainOutcome, Trainer};
