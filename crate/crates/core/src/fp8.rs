//! FP8 (minifloat) formats, encode/decode and special-value classification.
//!
//! All six 8-bit layouts with a sign bit are supported: E6M1 down to E1M6,
//! where `ExMy` means x exponent bits and y mantissa bits. The bit layout is
//! `[7] sign | [6:m] exponent | [m-1:0] mantissa` and the bias is
//! `2^(e-1) - 1`.
//!
//! Decoding is exact: every finite FP8 value (and every product of two of
//! them) is representable in an `f64` without rounding, so `f64` doubles as
//! the exact-rational carrier throughout the crate.

use std::fmt;
use std::str::FromStr;

/// One of the six FP8 formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FpFormat {
    E6M1,
    E5M2,
    E4M3,
    E3M4,
    E2M5,
    E1M6,
}

impl FpFormat {
    pub const ALL: [FpFormat; 6] = [
        FpFormat::E6M1,
        FpFormat::E5M2,
        FpFormat::E4M3,
        FpFormat::E3M4,
        FpFormat::E2M5,
        FpFormat::E1M6,
    ];

    /// Exponent field width in bits.
    pub const fn e(self) -> u32 {
        match self {
            FpFormat::E6M1 => 6,
            FpFormat::E5M2 => 5,
            FpFormat::E4M3 => 4,
            FpFormat::E3M4 => 3,
            FpFormat::E2M5 => 2,
            FpFormat::E1M6 => 1,
        }
    }

    /// Mantissa field width in bits.
    pub const fn m(self) -> u32 {
        7 - self.e()
    }

    /// Exponent bias, `2^(e-1) - 1`.
    pub const fn bias(self) -> i32 {
        (1 << (self.e() - 1)) - 1
    }

    /// All-ones exponent field value.
    pub const fn exp_max(self) -> u8 {
        ((1u16 << self.e()) - 1) as u8
    }

    /// All-ones mantissa field value.
    pub const fn man_max(self) -> u8 {
        ((1u16 << self.m()) - 1) as u8
    }

    /// Largest finite magnitude under the given special-value policy.
    pub fn max_finite(self, policy: ValuePolicy) -> f64 {
        let (ef, mf) = match policy {
            // All-ones exponent is reserved; top normal is one below.
            ValuePolicy::Strict => (self.exp_max() - 1, self.man_max()),
            // Only the all-ones pattern is NaN; 448 for E4M3.
            ValuePolicy::Extended => (self.exp_max(), self.man_max() - 1),
        };
        raw_magnitude(self, ef, mf)
    }

    /// Smallest positive subnormal magnitude.
    pub fn min_subnormal(self) -> f64 {
        exp2i(1 - self.bias() - self.m() as i32)
    }
}

impl fmt::Display for FpFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}M{}", self.e(), self.m())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown FP8 format `{0}` (expected one of E6M1..E1M6)")]
pub struct ParseFormatError(String);

impl FromStr for FpFormat {
    type Err = ParseFormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FpFormat::ALL
            .iter()
            .copied()
            .find(|f| f.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParseFormatError(s.to_string()))
    }
}

/// Special-value convention for the all-ones exponent field.
///
/// `Strict` follows the IEEE-754 reservation: exponent field all ones encodes
/// infinity (mantissa zero) or NaN (mantissa nonzero). `Extended` follows the
/// E4M3 convention where only the all-ones exponent *and* all-ones mantissa
/// pattern is NaN, which extends the finite range (maximum 448 for E4M3).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum ValuePolicy {
    #[default]
    Strict,
    Extended,
}

/// One encoded 8-bit operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fp8Value {
    pub raw: u8,
    pub format: FpFormat,
}

impl Fp8Value {
    pub const fn new(raw: u8, format: FpFormat) -> Self {
        Fp8Value { raw, format }
    }

    pub const fn sign_bit(self) -> bool {
        self.raw >> 7 != 0
    }

    /// Exponent field, `raw[6:m]`.
    pub const fn exp_field(self) -> u8 {
        (self.raw >> self.format.m()) & self.format.exp_max()
    }

    /// Mantissa field, `raw[m-1:0]`.
    pub const fn man_field(self) -> u8 {
        self.raw & self.format.man_max()
    }
}

/// Classification of an FP8 pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FpClass {
    Zero,
    Subnormal,
    Normal,
    Infinity,
    Nan,
}

/// Decoded value: an exact finite real or a special marker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoded {
    Finite(f64),
    Infinity { negative: bool },
    Nan,
}

impl Decoded {
    pub fn finite(self) -> Option<f64> {
        match self {
            Decoded::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_special(self) -> bool {
        !matches!(self, Decoded::Finite(_))
    }
}

/// Exact `2^k` as f64 (`k` well inside the f64 exponent range here).
pub(crate) fn exp2i(k: i32) -> f64 {
    f64::from_bits(((1023 + k) as u64) << 52)
}

/// Magnitude of a pattern with exponent field `ef` and mantissa field `mf`
/// under the normal-number formula (implicit leading 1, subnormal rule for
/// `ef == 0`).
fn raw_magnitude(format: FpFormat, ef: u8, mf: u8) -> f64 {
    let m = format.m();
    let frac = mf as f64 * exp2i(-(m as i32));
    if ef == 0 {
        frac * exp2i(1 - format.bias())
    } else {
        (1.0 + frac) * exp2i(ef as i32 - format.bias())
    }
}

/// Classify a pattern under the default (strict) policy.
pub fn classify(v: Fp8Value) -> FpClass {
    classify_with_policy(v, ValuePolicy::Strict)
}

pub fn classify_with_policy(v: Fp8Value, policy: ValuePolicy) -> FpClass {
    let ef = v.exp_field();
    let mf = v.man_field();
    if ef == 0 {
        return if mf == 0 {
            FpClass::Zero
        } else {
            FpClass::Subnormal
        };
    }
    if ef == v.format.exp_max() {
        match policy {
            ValuePolicy::Strict => {
                return if mf == 0 {
                    FpClass::Infinity
                } else {
                    FpClass::Nan
                };
            }
            ValuePolicy::Extended => {
                if mf == v.format.man_max() {
                    return FpClass::Nan;
                }
            }
        }
    }
    FpClass::Normal
}

/// Decode a pattern to its exact value under the default (strict) policy.
pub fn decode(v: Fp8Value) -> Decoded {
    decode_with_policy(v, ValuePolicy::Strict)
}

pub fn decode_with_policy(v: Fp8Value, policy: ValuePolicy) -> Decoded {
    match classify_with_policy(v, policy) {
        FpClass::Zero => Decoded::Finite(0.0),
        FpClass::Infinity => Decoded::Infinity {
            negative: v.sign_bit(),
        },
        FpClass::Nan => Decoded::Nan,
        FpClass::Subnormal | FpClass::Normal => {
            let mag = raw_magnitude(v.format, v.exp_field(), v.man_field());
            Decoded::Finite(if v.sign_bit() { -mag } else { mag })
        }
    }
}

/// Value of the pattern under the plain normal-number formula, ignoring all
/// special cases: `(-1)^s * (1 + mf/2^m) * 2^(ef - bias)` even for `ef == 0`
/// or an all-ones exponent. This is how the multiplier datapath, which has no
/// special-value logic, sees its operands.
pub fn decode_raw_bits(v: Fp8Value) -> f64 {
    let m = v.format.m();
    let frac = v.man_field() as f64 * exp2i(-(m as i32));
    let mag = (1.0 + frac) * exp2i(v.exp_field() as i32 - v.format.bias());
    if v.sign_bit() {
        -mag
    } else {
        mag
    }
}

/// Encode a finite real to the nearest representable value, round-to-nearest
/// ties-to-even. Magnitudes past the largest finite value saturate to it;
/// magnitudes that round below the smallest subnormal go to (signed) zero.
pub fn encode_nearest(x: f64, format: FpFormat, policy: ValuePolicy) -> Fp8Value {
    debug_assert!(x.is_finite());
    let sign = if x.is_sign_negative() { 0x80u8 } else { 0 };
    let mag = x.abs();
    if mag == 0.0 {
        return Fp8Value::new(sign, format);
    }

    let m = format.m() as i32;
    let bias = format.bias();
    let max_fin = format.max_finite(policy);
    if mag >= max_fin {
        // Nearest-even at the saturation boundary still picks max_fin: the
        // format has nothing above it.
        return encode_exact_magnitude(max_fin, format, sign);
    }

    // Unbiased exponent of the leading bit of `mag`.
    let e_unb = mag.log2().floor() as i32;
    let (q, e_eff) = if e_unb < 1 - bias {
        // Subnormal range: fixed scale 2^(1-bias), no implicit 1.
        (round_ties_even_exact(mag * exp2i(m - (1 - bias))), 1 - bias)
    } else {
        (round_ties_even_exact(mag * exp2i(m - e_unb)), e_unb)
    };

    let (ef, mf) = normalize_quantum(q, e_eff, format);
    Fp8Value::new(sign | (ef << m) | mf, format)
}

/// `mag * 2^k` is exact for any finite f64 within range, so rounding the
/// product ties-to-even gives the correctly rounded quantum count.
fn round_ties_even_exact(scaled: f64) -> u64 {
    scaled.round_ties_even() as u64
}

/// Turn a rounded quantum count at scale `2^(e_eff - m)` into fields,
/// handling mantissa overflow into the next binade.
fn normalize_quantum(mut q: u64, mut e_eff: i32, format: FpFormat) -> (u8, u8) {
    let m = format.m() as i32;
    let bias = format.bias();
    let one = 1u64 << m;
    if e_eff == 1 - bias && q < one {
        // Stayed subnormal (or rounded to zero).
        return (0, q as u8);
    }
    if q >= 2 * one {
        q >>= 1;
        e_eff += 1;
    }
    let ef = (e_eff + bias) as u8;
    (ef, (q - one) as u8)
}

fn encode_exact_magnitude(mag: f64, format: FpFormat, sign: u8) -> Fp8Value {
    let m = format.m() as i32;
    let bias = format.bias();
    let e_unb = mag.log2().floor() as i32;
    let (ef, mf) = if e_unb < 1 - bias {
        (0u8, (mag * exp2i(m - (1 - bias))) as u8)
    } else {
        let q = (mag * exp2i(m - e_unb)) as u64;
        ((e_unb + bias) as u8, (q - (1 << m)) as u8)
    };
    Fp8Value::new(sign | (ef << m) | mf, format)
}
