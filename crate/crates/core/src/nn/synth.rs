//! Deterministic synthetic digit-style dataset at MNIST scale (28x28,
//! 10 classes), used where the real dataset is not on disk. Samples are
//! generated as pixel bytes so the IDX files written here load back
//! bit-exactly.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{idx, Dataset, Split};

pub const SIDE: usize = 28;
pub const CLASSES: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub train: usize,
    pub test: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            train: 4096,
            test: 1024,
            seed: 7,
        }
    }
}

/// Per-class prototype: a handful of soft blobs on the 28x28 canvas.
fn prototypes(rng: &mut ChaCha8Rng) -> Vec<Vec<f32>> {
    (0..CLASSES)
        .map(|_| {
            let mut img = vec![0f32; SIDE * SIDE];
            let blobs = rng.gen_range(3..=5);
            for _ in 0..blobs {
                let cx = rng.gen_range(6.0..22.0);
                let cy = rng.gen_range(6.0..22.0);
                let sigma = rng.gen_range(2.0..4.5f32);
                let amp = rng.gen_range(0.6..1.0f32);
                for y in 0..SIDE {
                    for x in 0..SIDE {
                        let d2 = (x as f32 - cx).powi(2) + (y as f32 - cy).powi(2);
                        img[y * SIDE + x] += amp * (-d2 / (2.0 * sigma * sigma)).exp();
                    }
                }
            }
            for p in &mut img {
                *p = p.min(1.0);
            }
            img
        })
        .collect()
}

fn sample_bytes(proto: &[f32], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let brightness = rng.gen_range(0.55..1.0f32);
    let dx = rng.gen_range(-3i32..=3);
    let dy = rng.gen_range(-3i32..=3);
    let mut out = vec![0u8; SIDE * SIDE];
    for y in 0..SIDE as i32 {
        for x in 0..SIDE as i32 {
            let (sx, sy) = (x - dx, y - dy);
            let base = if (0..SIDE as i32).contains(&sx) && (0..SIDE as i32).contains(&sy) {
                proto[(sy * SIDE as i32 + sx) as usize]
            } else {
                0.0
            };
            let noise: f32 = rng.gen_range(-0.25..0.25);
            let v = (base * brightness + noise).clamp(0.0, 1.0);
            out[(y * SIDE as i32 + x) as usize] = (v * 255.0).round() as u8;
        }
    }
    out
}

fn generate(n: usize, protos: &[Vec<f32>], rng: &mut ChaCha8Rng, split: Split) -> Dataset {
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = (i % CLASSES) as u8;
        labels.push(class);
        pixels.extend(sample_bytes(&protos[class as usize], rng));
    }
    Dataset {
        name: "synth".into(),
        split,
        input_dim: SIDE * SIDE,
        num_classes: CLASSES,
        inputs: pixels.iter().map(|b| *b as f32 / 255.0).collect(),
        labels,
    }
}

/// Generate train and test splits from one seed.
pub fn synth_dataset(cfg: SynthConfig) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let protos = prototypes(&mut rng);
    let train = generate(cfg.train, &protos, &mut rng, Split::Train);
    let test = generate(cfg.test, &protos, &mut rng, Split::Test);
    (train, test)
}

#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

/// Generate the synthetic dataset and write it out as four IDX files.
pub fn write_synth_idx(dir: &Path, cfg: SynthConfig) -> std::io::Result<SynthPaths> {
    let (train, test) = synth_dataset(cfg);
    let paths = SynthPaths {
        train_images: dir.join("synth-train-images.idx3-ubyte"),
        train_labels: dir.join("synth-train-labels.idx1-ubyte"),
        test_images: dir.join("synth-test-images.idx3-ubyte"),
        test_labels: dir.join("synth-test-labels.idx1-ubyte"),
    };
    let as_bytes =
        |d: &Dataset| -> Vec<u8> { d.inputs.iter().map(|v| (v * 255.0).round() as u8).collect() };
    idx::write_idx_images(
        &paths.train_images,
        SIDE as u32,
        SIDE as u32,
        &as_bytes(&train),
    )?;
    idx::write_idx_labels(&paths.train_labels, &train.labels)?;
    idx::write_idx_images(
        &paths.test_images,
        SIDE as u32,
        SIDE as u32,
        &as_bytes(&test),
    )?;
    idx::write_idx_labels(&paths.test_labels, &test.labels)?;
    Ok(paths)
}
