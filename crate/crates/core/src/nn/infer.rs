//! Inference with pluggable scalar multipliers and per-tensor
//! power-of-two quantization scales.
//!
//! Only the multiplies inside the dense layers go through the selected
//! backend; accumulation, bias addition and activations stay in f64. FP8
//! backends encode both operands to the chosen format after dividing by
//! their tensor scale; scales are powers of two picked so a tensor's
//! max-magnitude lands on the format's largest finite value, which keeps
//! the scaling exact and commutative with the FP8 exponent arithmetic.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::fp8::{decode_with_policy, encode_nearest, Fp8Value, FpFormat, ValuePolicy};
use crate::lmul::{l_mul, ZeroPolicy};
use crate::par;

use super::model::{Activation, Model};
use super::Dataset;

/// Scalar multiplier standing in for the hardware unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum MultiplierBackend {
    /// Exact f32 multiplication; the accuracy reference.
    Fp32Exact,
    /// Operands quantized to FP8, multiplied exactly.
    Fp8Exact(FpFormat),
    /// Operands quantized to FP8, multiplied by the approximate datapath.
    Lmul(FpFormat),
}

impl MultiplierBackend {
    pub fn tag(&self) -> String {
        match self {
            MultiplierBackend::Fp32Exact => "fp32".into(),
            MultiplierBackend::Fp8Exact(f) => format!("fp8-exact-{f}"),
            MultiplierBackend::Lmul(f) => format!("lmul-{f}"),
        }
    }
}

/// Per-tensor power-of-two scales calibrated on the reference model.
#[derive(Debug, Clone, serde::Serialize)]
pub struct QuantScheme {
    pub value_policy: ValuePolicy,
    pub input_scale: f64,
    /// One per layer.
    pub weight_scales: Vec<f64>,
    /// Scale of each layer's output activations (feeds the next layer).
    pub act_scales: Vec<f64>,
}

/// Smallest power of two `s` with `max_abs / s` inside the format's finite
/// range.
fn pow2_scale(max_abs: f64, fmt_max: f64) -> f64 {
    if max_abs <= 0.0 {
        return 1.0;
    }
    let k = (max_abs / fmt_max).log2().ceil();
    crate::fp8::exp2i(k as i32)
}

/// Calibrate scales from the dataset and a reference forward pass.
pub fn calibrate(
    model: &Model,
    data: &Dataset,
    format: FpFormat,
    value_policy: ValuePolicy,
) -> QuantScheme {
    let fmt_max = format.max_finite(value_policy);
    let input_max = data.inputs.iter().fold(0f32, |m, v| m.max(v.abs())) as f64;
    let weight_scales = model
        .layers
        .iter()
        .map(|l| {
            let wmax = l.weights.iter().fold(0f32, |m, v| m.max(v.abs())) as f64;
            pow2_scale(wmax, fmt_max)
        })
        .collect();

    let mut act_max = vec![0f32; model.layers.len()];
    for i in 0..data.len() {
        let mut act = data.input(i).to_vec();
        for (li, layer) in model.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.out_dim);
            for j in 0..layer.out_dim {
                let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
                let mut z = layer.bias[j];
                for (w, a) in row.iter().zip(act.iter()) {
                    z += w * a;
                }
                let v = match layer.activation {
                    Activation::Relu => z.max(0.0),
                    Activation::Linear => z,
                };
                act_max[li] = act_max[li].max(v.abs());
                next.push(v);
            }
            act = next;
        }
    }

    QuantScheme {
        value_policy,
        input_scale: pow2_scale(input_max, fmt_max),
        weight_scales,
        act_scales: act_max
            .iter()
            .map(|m| pow2_scale(*m as f64, fmt_max))
            .collect(),
    }
}

/// Product lookup over all raw byte pairs for one FP8 format, so inference
/// pays one table read per multiply.
struct PairTable {
    values: Vec<f64>,
}

impl PairTable {
    fn build(format: FpFormat, approx: bool, value_policy: ValuePolicy) -> PairTable {
        let mut values = vec![0f64; 65_536];
        for x in 0..=255u8 {
            for y in 0..=255u8 {
                let (vx, vy) = (Fp8Value::new(x, format), Fp8Value::new(y, format));
                values[(x as usize) << 8 | y as usize] = if approx {
                    l_mul(vx, vy, ZeroPolicy::FlushSubnormals)
                        .expect("same format")
                        .decoded()
                } else {
                    let a = decode_with_policy(vx, value_policy).finite().unwrap_or(0.0);
                    let b = decode_with_policy(vy, value_policy).finite().unwrap_or(0.0);
                    a * b
                };
            }
        }
        PairTable { values }
    }

    #[inline]
    fn get(&self, x: u8, y: u8) -> f64 {
        self.values[(x as usize) << 8 | y as usize]
    }
}

enum Prepared {
    Fp32,
    Fp8 {
        format: FpFormat,
        value_policy: ValuePolicy,
        table: PairTable,
        /// Weights pre-encoded per layer.
        enc_weights: Vec<Vec<u8>>,
    },
}

fn prepare(model: &Model, backend: MultiplierBackend, scheme: &QuantScheme) -> Prepared {
    let (format, approx) = match backend {
        MultiplierBackend::Fp32Exact => return Prepared::Fp32,
        MultiplierBackend::Fp8Exact(f) => (f, false),
        MultiplierBackend::Lmul(f) => (f, true),
    };
    let enc_weights = model
        .layers
        .iter()
        .zip(scheme.weight_scales.iter())
        .map(|(l, s)| {
            l.weights
                .iter()
                .map(|w| encode_nearest(*w as f64 / s, format, scheme.value_policy).raw)
                .collect()
        })
        .collect();
    Prepared::Fp8 {
        format,
        value_policy: scheme.value_policy,
        table: PairTable::build(format, approx, scheme.value_policy),
        enc_weights,
    }
}

/// Forward pass with the prepared backend, returning per-layer outputs.
fn forward(
    model: &Model,
    prepared: &Prepared,
    scheme: &QuantScheme,
    input: &[f32],
) -> Vec<Vec<f64>> {
    let mut act: Vec<f64> = input.iter().map(|v| *v as f64).collect();
    let mut outs = Vec::with_capacity(model.layers.len());
    for (li, layer) in model.layers.iter().enumerate() {
        let in_scale = if li == 0 {
            scheme.input_scale
        } else {
            scheme.act_scales[li - 1]
        };
        let enc_act: Option<Vec<u8>> = match prepared {
            Prepared::Fp32 => None,
            Prepared::Fp8 {
                format,
                value_policy,
                ..
            } => Some(
                act.iter()
                    .map(|a| encode_nearest(a / in_scale, *format, *value_policy).raw)
                    .collect(),
            ),
        };
        let mut next = Vec::with_capacity(layer.out_dim);
        for j in 0..layer.out_dim {
            let row = &layer.weights[j * layer.in_dim..(j + 1) * layer.in_dim];
            let mut z = layer.bias[j] as f64;
            match prepared {
                Prepared::Fp32 => {
                    for (w, a) in row.iter().zip(act.iter()) {
                        z += *w as f64 * a;
                    }
                }
                Prepared::Fp8 {
                    table, enc_weights, ..
                } => {
                    let wrow = &enc_weights[li][j * layer.in_dim..(j + 1) * layer.in_dim];
                    let ea = enc_act.as_ref().unwrap();
                    let rescale = scheme.weight_scales[li] * in_scale;
                    let mut dot = 0f64;
                    for (w, a) in wrow.iter().zip(ea.iter()) {
                        dot += table.get(*w, *a);
                    }
                    z += dot * rescale;
                }
            }
            next.push(match layer.activation {
                Activation::Relu => z.max(0.0),
                Activation::Linear => z,
            });
        }
        outs.push(next.clone());
        act = next;
    }
    outs
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Accuracy and per-layer deviation of one backend on one dataset.
#[derive(Debug, Clone, serde::Serialize)]
pub struct AccuracyReport {
    pub backend: String,
    pub n: usize,
    pub top1: f64,
    pub per_class: Vec<f64>,
    /// Mean |layer output - f32 reference output| over samples, layers and
    /// units.
    pub mean_layer_delta: f64,
}

/// Run inference routing every dense-layer multiply through the backend.
pub fn infer(
    model: &Model,
    data: &Dataset,
    backend: MultiplierBackend,
    scheme: &QuantScheme,
) -> AccuracyReport {
    let prepared = prepare(model, backend, scheme);
    let reference = Prepared::Fp32;

    struct SampleOut {
        label: u8,
        predicted: usize,
        delta_sum: f64,
        delta_n: u64,
    }

    let rows = par::map_indexed(data.len(), |i| {
        let outs = forward(model, &prepared, scheme, data.input(i));
        let ref_outs = forward(model, &reference, scheme, data.input(i));
        let mut delta_sum = 0f64;
        let mut delta_n = 0u64;
        for (a, b) in outs.iter().zip(ref_outs.iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                delta_sum += (x - y).abs();
                delta_n += 1;
            }
        }
        SampleOut {
            label: data.labels[i],
            predicted: argmax(outs.last().unwrap()),
            delta_sum,
            delta_n,
        }
    });

    let mut correct = vec![0u64; data.num_classes];
    let mut totals = vec![0u64; data.num_classes];
    let mut delta_sum = 0f64;
    let mut delta_n = 0u64;
    let mut hits = 0u64;
    for r in &rows {
        totals[r.label as usize] += 1;
        if r.predicted == r.label as usize {
            correct[r.label as usize] += 1;
            hits += 1;
        }
        delta_sum += r.delta_sum;
        delta_n += r.delta_n;
    }

    AccuracyReport {
        backend: backend.tag(),
        n: data.len(),
        top1: hits as f64 / data.len() as f64,
        per_class: correct
            .iter()
            .zip(totals.iter())
            .map(|(c, t)| if *t > 0 { *c as f64 / *t as f64 } else { 0.0 })
            .collect(),
        mean_layer_delta: if delta_n > 0 {
            delta_sum / delta_n as f64
        } else {
            0.0
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum DotDistribution {
    UnitNormal,
    Uniform01,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DotErrorStats {
    pub backend: String,
    pub len: usize,
    pub trials: u32,
    pub mean_rel: f64,
    pub max_rel: f64,
    /// Trials skipped because the exact dot product was (near) zero.
    pub skipped: u32,
}

/// Relative error of backend dot products against exact f64 dots on random
/// vectors; per-vector power-of-two scales, deterministic in the seed.
pub fn dot_error_stats(
    backend: MultiplierBackend,
    len: usize,
    dist: DotDistribution,
    trials: u32,
    seed: u64,
) -> DotErrorStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mean_rel = 0f64;
    let mut max_rel = 0f64;
    let mut skipped = 0u32;
    let mut used = 0u32;

    for _ in 0..trials {
        let sample = |rng: &mut ChaCha8Rng| -> f64 {
            match dist {
                DotDistribution::Uniform01 => rng.gen_range(0.0..1.0),
                DotDistribution::UnitNormal => {
                    // Box-Muller keeps the dependency surface small.
                    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                }
            }
        };
        let a: Vec<f64> = (0..len).map(|_| sample(&mut rng)).collect();
        let b: Vec<f64> = (0..len).map(|_| sample(&mut rng)).collect();
        let exact: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();

        let approx = match backend {
            MultiplierBackend::Fp32Exact => exact,
            MultiplierBackend::Fp8Exact(format) | MultiplierBackend::Lmul(format) => {
                let policy = ValuePolicy::Extended;
                let fmt_max = format.max_finite(policy);
                let amax = a.iter().fold(0f64, |m, v| m.max(v.abs()));
                let bmax = b.iter().fold(0f64, |m, v| m.max(v.abs()));
                let (sa, sb) = (pow2_scale(amax, fmt_max), pow2_scale(bmax, fmt_max));
                let approx_mul = matches!(backend, MultiplierBackend::Lmul(_));
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| {
                        let qx = encode_nearest(x / sa, format, policy);
                        let qy = encode_nearest(y / sb, format, policy);
                        let p = if approx_mul {
                            l_mul(qx, qy, ZeroPolicy::FlushSubnormals)
                                .expect("same format")
                                .decoded()
                        } else {
                            decode_with_policy(qx, policy).finite().unwrap_or(0.0)
                                * decode_with_policy(qy, policy).finite().unwrap_or(0.0)
                        };
                        p * sa * sb
                    })
                    .sum()
            }
        };

        if exact.abs() < 1e-9 {
            skipped += 1;
            continue;
        }
        let rel = (approx - exact).abs() / exact.abs();
        mean_rel += rel;
        max_rel = max_rel.max(rel);
        used += 1;
    }

    DotErrorStats {
        backend: backend.tag(),
        len,
        trials,
        mean_rel: if used > 0 {
            mean_rel / used as f64
        } else {
            0.0
        },
        max_rel,
        skipped,
    }
}
