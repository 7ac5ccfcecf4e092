//! Conditional transformer GAN for RSS sequences.
//!
//! The generator maps a latent vector, a distance window and a gNB label to an
//! RSS window. The discriminator scores `(rss, distance)` pairs as real or
//! generated and, in multi-gNB mode, also predicts the originating gNB.
//!
//! All layers carry explicit backward passes ([`layers`]); the network code is
//! generic over [`Real`] so the same graph can be evaluated in `f64` for
//! finite-difference gradient checks.

pub mod adam;
pub mod checkpoint;
pub mod config;
pub mod discriminator;
pub mod generator;
pub mod layers;
pub mod loss;
pub mod model;
pub mod params;
pub mod real;
pub mod rng;

pub use config::{GanConfig, GanMode, WeightInit};
pub use model::{
    discriminator_step, generate_normalized, generate_sequences, generator_step, init_discriminator, init_generator,
    train, train_for, train_step, Batch, Discriminator, EvalRecord, GanBundle, Generator, HistoryRecord, StepMetrics,
    TrainHook,
};
pub use real::Real;

#[derive(Debug, thiserror::Error)]
pub enum GanError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("label {label} out of range for {n_classes} classes")]
    Label { label: usize, n_classes: usize },
    #[error("non-finite {component} loss at iteration {iteration}")]
    NonFinite { iteration: u64, component: &'static str },
    #[error("bundle has no normalization statistics")]
    MissingNormStats,
    #[error("dataset has no {0} rows")]
    EmptySplit(&'static str),
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("evaluation hook failed: {0}")]
    Hook(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
