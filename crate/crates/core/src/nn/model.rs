//! Dense model definition and the versioned binary checkpoint format.
//!
//! Checkpoint layout (little-endian): magic `LMNET001`, training metadata
//! (seed u64, epochs u32, lr f32, batch u32), layer count u32, then per
//! layer: in u32, out u32, activation u8, `out*in` f32 weights (row-major),
//! `out` f32 biases.

use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Activation {
    Relu,
    Linear,
}

#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
    pub activation: Activation,
}

/// Hyperparameters recorded with every trained model.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: u32,
    pub lr: f32,
    pub batch: u32,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub layers: Vec<DenseLayer>,
    pub meta: TrainMeta,
}

/// Layer widths, input first: `[784, 32, 10]` is a one-hidden-layer MLP.
/// Hidden layers use ReLU, the output layer is linear.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub dims: Vec<usize>,
}

impl Model {
    /// Reference forward pass in f32, returning the final logits.
    pub fn forward_f32(&self, input: &[f32]) -> Vec<f32> {
        let mut act = input.to_vec();
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.out_dim);
            for j in 0..layer.out_dim {
                let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                let mut z = layer.bias[j];
                for (w, a) in row.iter().zip(act.iter()) {
                    z += w * a;
                }
                next.push(match layer.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Linear => z,
                });
            }
            act = next;
        }
        act
    }
}

const MAGIC: &[u8; 8] = b"LMNET001";

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("{0}: not a model checkpoint (bad magic)")]
    BadMagic(String),
    #[error("{0}: checkpoint corrupt ({1})")]
    Corrupt(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), ModelIoError> {
    let mut bytes = Vec::new();
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&model.meta.seed.to_le_bytes());
    bytes.extend_from_slice(&model.meta.epochs.to_le_bytes());
    bytes.extend_from_slice(&model.meta.lr.to_le_bytes());
    bytes.extend_from_slice(&model.meta.batch.to_le_bytes());
    bytes.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        bytes.extend_from_slice(&(layer.in_dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
        bytes.push(match layer.activation {
            Activation::Relu => 0,
            Activation::Linear => 1,
        });
        for w in &layer.weights {
            bytes.extend_from_slice(&w.to_le_bytes());
        }
        for b in &layer.bias {
            bytes.extend_from_slice(&b.to_le_bytes());
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, ModelIoError> {
    let name = path.display().to_string();
    let bytes = fs::read(path)?;
    let corrupt = |msg: &str| ModelIoError::Corrupt(name.clone(), msg.into());
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(ModelIoError::BadMagic(name));
    }
    let mut at = 8usize;
    let mut take = |n: usize| -> Result<&[u8], ModelIoError> {
        if bytes.len() < at + n {
            return Err(ModelIoError::Corrupt(
                name.clone(),
                "unexpected end of file".into(),
            ));
        }
        let s = &bytes[at..at + n];
        at += n;
        Ok(s)
    };
    let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let epochs = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let lr = f32::from_le_bytes(take(4)?.try_into().unwrap());
    let batch = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let n_layers = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
    if n_layers > 64 {
        return Err(corrupt("implausible layer count"));
    }
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let in_dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let out_dim = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let activation = match take(1)?[0] {
            0 => Activation::Relu,
            1 => Activation::Linear,
            other => return Err(corrupt(&format!("unknown activation tag {other}"))),
        };
        let wbytes = take(4 * in_dim * out_dim)?;
        let weights = wbytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect::<Vec<_>>();
        let bbytes = take(4 * out_dim)?;
        let bias = bbytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect::<Vec<_>>();
        layers.push(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        });
    }
    Ok(Model {
        layers,
        meta: TrainMeta {
            seed,
            epochs,
            lr,
            batch,
        },
    })
}
