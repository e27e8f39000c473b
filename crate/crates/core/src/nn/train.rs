//! Reference f32 training: minibatch SGD with softmax cross-entropy.
//! Single-threaded and fully determined by the seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::model::{Activation, DenseLayer, Model, ModelSpec, TrainMeta};
use super::Dataset;

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: u32,
    pub seed: u64,
    pub lr: f32,
    pub batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 3,
            seed: 7,
            lr: 0.1,
            batch: 32,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Diverged { epoch: u32 },
    #[error("training dataset is empty")]
    EmptyDataset,
}

fn init_model(spec: &ModelSpec, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Model {
    let mut layers = Vec::new();
    for w in spec.dims.windows(2) {
        let (in_dim, out_dim) = (w[0], w[1]);
        let limit = (6.0 / (in_dim + out_dim) as f32).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        layers.push(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation: Activation::Relu,
        });
    }
    if let Some(last) = layers.last_mut() {
        last.activation = Activation::Linear;
    }
    Model {
        layers,
        meta: TrainMeta {
            seed: cfg.seed,
            epochs: cfg.epochs,
            lr: cfg.lr,
            batch: cfg.batch as u32,
        },
    }
}

fn softmax_in_place(z: &mut [f32]) {
    let max = z.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Train the reference MLP. Deterministic: two runs with the same spec,
/// data and config produce bit-identical parameters.
pub fn train_reference(
    spec: &ModelSpec,
    data: &Dataset,
    cfg: TrainConfig,
) -> Result<Model, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_model(spec, &cfg, &mut rng);
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        // Fisher-Yates over the sample order.
        for i in (1..n).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for batch in order.chunks(cfg.batch) {
            let mut grads_w: Vec<Vec<f32>> = model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect();
            let mut grads_b: Vec<Vec<f32>> = model
                .layers
                .iter()
                .map(|l| vec![0.0; l.bias.len()])
                .collect();
            let mut batch_loss = 0.0f32;

            for &i in batch {
                let input = data.input(i);
                let label = data.labels[i] as usize;

                // Forward, keeping post-activation values per layer.
                let mut acts: Vec<Vec<f32>> = vec![input.to_vec()];
                for layer in &model.layers {
                    let prev = acts.last().unwrap();
                    let mut z = vec![0.0f32; layer.out_dim];
                    for (j, zj) in z.iter_mut().enumerate() {
                        let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                        let mut acc = layer.bias[j];
                        for (w, a) in row.iter().zip(prev.iter()) {
                            acc += w * a;
                        }
                        *zj = match layer.activation {
                            Activation::Relu => acc.max(0.0),
                            Activation::Linear => acc,
                        };
                    }
                    acts.push(z);
                }

                let mut probs = acts.last().unwrap().clone();
                softmax_in_place(&mut probs);
                batch_loss -= probs[label].ln();

                // Backward: delta at the output is probs - onehot.
                let mut delta = probs;
                delta[label] -= 1.0;
                for li in (0..model.layers.len()).rev() {
                    let layer = &model.layers[li];
                    let prev = &acts[li];
                    for (j, &d) in delta.iter().enumerate() {
                        grads_b[li][j] += d;
                        let grow = &mut grads_w[li][j * layer.in_dim..(j + 1) * layer.in_dim];
                        for (g, a) in grow.iter_mut().zip(prev.iter()) {
                            *g += d * a;
                        }
                    }
                    if li > 0 {
                        let mut prev_delta = vec![0.0f32; layer.in_dim];
                        for (j, &d) in delta.iter().enumerate() {
                            let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                            for (pd, w) in prev_delta.iter_mut().zip(row.iter()) {
                                *pd += d * w;
                            }
                        }
                        // ReLU gate of the previous layer's outputs.
                        for (pd, a) in prev_delta.iter_mut().zip(acts[li].iter()) {
                            if *a <= 0.0 {
                                *pd = 0.0;
                            }
                        }
                        delta = prev_delta;
                    }
                }
            }

            if !batch_loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            let scale = cfg.lr / batch.len() as f32;
            for (layer, (gw, gb)) in model
                .layers
                .iter_mut()
                .zip(grads_w.iter().zip(grads_b.iter()))
            {
                for (w, g) in layer.weights.iter_mut().zip(gw.iter()) {
                    *w -= scale * g;
                }
                for (b, g) in layer.bias.iter_mut().zip(gb.iter()) {
                    *b -= scale * g;
                }
            }
        }
    }
    Ok(model)
}
