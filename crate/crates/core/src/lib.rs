//! Floodwatch core: simulate an IoT sensor network under UDP-flood attack,
//! extract windowed traffic features, train a from-scratch sigmoid MLP with
//! stochastic gradient descent, and score the resulting binary classifier.
//!
//! The crate is organized along the experiment stages:
//!
//! - [`simulator`]: deterministic event-driven traffic generation and the
//!   trace CSV format
//! - [`features`]: time-window feature extraction and min-max normalization
//! - [`dataset`]: dataset CSV persistence and the stratified
//!   train/validation/test split
//! - [`nn`]: the multilayer perceptron, backpropagation, training loop, and
//!   the finite-difference gradient oracle
//! - [`eval`]: confusion matrices, derived metrics, and report rendering
//!
//! All operations are pure functions of their inputs (seeds included), so
//! every pipeline artifact is reproducible byte for byte.

pub mod dataset;
pub mod eval;
pub mod features;
pub mod nn;
pub mod simulator;

pub use dataset::{class_counts, load_dataset, save_dataset, split, DatasetError, SplitSpec};
pub use eval::{confusion, metrics, ConfusionMatrix, EvalError, EvalReport, Metrics};
pub use features::{
    apply_normalization, extract_windows, fit_normalization, FeatureError, NormalizationStats,
    Sample, WindowSpec, FEATURE_COUNT,
};
pub use nn::{
    backprop, gradient_check_suite, gradients, hidden_deltas, mse_cost, numerical_gradient,
    output_delta, sigmoid, sigmoid_prime_from_activation, train, EpochStats, ForwardTrace,
    GradientCheckSummary, Gradients, MlpModel, NnError, TrainConfig,
};
pub use simulator::{
    read_trace, simulate, write_trace, NodeId, NodeRole, PacketKind, PacketRecord, Phase,
    ScenarioConfig, SimError,
};
