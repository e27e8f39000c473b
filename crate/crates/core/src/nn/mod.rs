//! Dense-network inference harness with pluggable scalar multipliers.
//!
//! A small MLP is trained in f32 as the accuracy reference; inference then
//! routes every scalar multiply inside the dense layers through a
//! [`MultiplierBackend`] (exact f32, exact FP8, or the approximate
//! multiplier), with per-tensor power-of-two scaling and wide (f64)
//! accumulation, to measure the end-to-end accuracy impact of the
//! multiplier alone.

mod idx;
mod infer;
mod model;
mod synth;
mod train;

pub use idx::{load_idx, write_idx_images, write_idx_labels, IdxError};
pub use infer::{
    calibrate, dot_error_stats, infer, AccuracyReport, DotDistribution, DotErrorStats,
    MultiplierBackend, QuantScheme,
};
pub use model::{
    load_model, save_model, Activation, DenseLayer, Model, ModelIoError, ModelSpec, TrainMeta,
};
pub use synth::{synth_dataset, write_synth_idx, SynthConfig, SynthPaths};
pub use train::{train_reference, TrainConfig, TrainError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Split {
    Train,
    Test,
}

/// Classification dataset: flattened inputs in `[0, 1]` plus integer labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub input_dim: usize,
    pub num_classes: usize,
    /// Row-major, `len * input_dim`.
    pub inputs: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }
}
