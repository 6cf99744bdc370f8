//! Sequence classifiers built from scratch on `ndarray`: batch-normalized
//! LSTM stacks with softmax heads, a dense fusion network, backpropagation
//! through time, Adam and a finite-difference gradient checker.

mod arch;
mod batchnorm;
mod data;
mod fusion;
mod lstm;
mod math;
mod model;
mod params;
mod stack;
mod train;

pub use arch::{
    architecture_registry, Architecture, StackRole, StackSpec, DEFAULT_ARCHITECTURE,
    LONG_TIMESTEPS, SHORT_TIMESTEPS,
};
pub use batchnorm::{BatchNorm, BnStats, Mode, BN_EPS, BN_MOMENTUM};
pub use data::{SequenceDataset, SequenceRecord, Window};
pub use fusion::{fuse, FusionDnn};
pub use lstm::{lstm_cell_step, LstmCell};
pub use math::{classify, cross_entropy, sigmoid, softmax, PROB_EPS};
pub use model::{DrowsyModel, Inference, TrainedStack};
pub use params::{
    clip_global_norm, global_norm, gradient_check, Adam, AdamConfig, GradCheckReport, Params,
    GRAD_CHECK_FLOOR, GRAD_CHECK_STEP,
};
pub use stack::{LstmStack, StackStep};
pub use train::{
    evaluate_stack_loss, fit_fusion, fit_stack, split_records, train, StackHistory, TrainConfig,
    TrainReport,
};
