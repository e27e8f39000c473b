//! Bit-exact behavioral model of the L-Mul approximate FP8 multiplier, plus
//! the exact product reference.
//!
//! The multiplier replaces the mantissa product by a sum with a small
//! constant: `(1 + m_x)(1 + m_y)` is approximated by
//! `1 + m_x + m_y + 2^-l(m)`. At the bit level this is a fraction-field sum
//! with an offset, a carry-driven normalization (see [`LmulProduct::carry`])
//! and an exponent sum with the rebias and normalization increment folded
//! into one per-carry constant, `bias*`.
//!
//! The product keeps an `(e+1)`-bit exponent field, so the exponent sum of
//! two in-range operands never overflows; a negative exponent sum flushes
//! the product to zero.

use crate::fp8::{classify, exp2i, Decoded, Fp8Value, FpClass, FpFormat, ValuePolicy};

/// How the multiplier's zero flag treats subnormal operands.
///
/// The datapath assumes an implicit leading 1, so by default operands with a
/// zero exponent field are flushed to zero (`FlushSubnormals`). `RawBits`
/// only flags the true all-zero-field pattern and lets subnormal patterns
/// through as raw bits.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum ZeroPolicy {
    #[default]
    FlushSubnormals,
    RawBits,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("operand formats differ: {0} vs {1}")]
pub struct FormatMismatch(pub FpFormat, pub FpFormat);

/// Offset exponent l(m): the correction constant added to the mantissa sum
/// is `2^-l(m)`, i.e. `2^(m - l(m))` in fraction LSBs.
pub fn offset_exponent(m: u32) -> u32 {
    match m {
        1 => 1,
        2 => 2,
        3 => 3,
        4 => 3,
        5 => 4,
        6 => 4,
        _ => unreachable!("mantissa width {m} out of range"),
    }
}

/// Mantissa-sum offset in integer fraction units.
pub fn mantissa_offset(m: u32) -> u8 {
    1 << (m - offset_exponent(m))
}

/// Exponent-path constant for a given carry case: `-bias` plus the
/// normalization increment (0 for carry 2'b00, 2 for 2'b11, 1 otherwise).
pub fn bias_star(format: FpFormat, carry: u8) -> i32 {
    -format.bias() + carry_adjust(carry)
}

pub fn carry_adjust(carry: u8) -> i32 {
    match carry & 0b11 {
        0b00 => 0,
        0b11 => 2,
        _ => 1,
    }
}

/// The product record: raw intermediate sums plus the final output fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmulProduct {
    pub format: FpFormat,
    /// Product sign, XOR of the operand signs (valid even for zero).
    pub sign: bool,
    /// Raw (m+2)-bit mantissa sum: fraction in `[m-1:0]`, carry in `[m+1:m]`.
    pub p_m_full: u8,
    /// Signed exponent sum `x[6:m] + y[6:m] + bias*(carry)`, before clamping.
    pub p_e_raw: i32,
    /// Final biased exponent field, `(e+1)` bits, zero when flushed.
    pub out_exp: u8,
    /// Final mantissa field, `m` bits, zero when flushed.
    pub out_man: u8,
    /// An operand was zero under the active zero policy.
    pub zero: bool,
    /// The exponent sum went negative and the product was flushed to zero.
    pub underflow: bool,
    /// An operand classified as Inf/NaN (strict rule); the datapath has no
    /// special-value logic and processed it as raw bits.
    pub special_operand: bool,
}

impl LmulProduct {
    /// The two carry bits `p_m_full[m+1:m]` selecting the normalization case.
    pub fn carry(&self) -> u8 {
        (self.p_m_full >> self.format.m()) & 0b11
    }

    /// Mantissa after carry normalization, before zero gating: the fraction
    /// bits for carries 00/01/11, `{1, p_m_full[m-1:1]}` for carry 10.
    pub fn normalized_mantissa(&self) -> u8 {
        let m = self.format.m();
        let frac = self.p_m_full & self.format.man_max();
        if self.carry() == 0b10 {
            (1 << (m - 1)) | (frac >> 1)
        } else {
            frac
        }
    }

    /// Decode the hardware output fields: zero when flushed, otherwise
    /// `(1 + out_man/2^m) * 2^(out_exp - bias)` with the product sign.
    pub fn decoded(&self) -> f64 {
        if self.zero || self.underflow {
            return 0.0;
        }
        self.apply_sign(
            self.significand(self.out_man) * exp2i(self.out_exp as i32 - self.format.bias()),
        )
    }

    /// Decode using the unclamped signed exponent sum instead of the output
    /// field: the value the approximation defines with unbounded exponent
    /// range. Equal to [`Self::decoded`] whenever no flush fired.
    pub fn decoded_ideal(&self) -> f64 {
        if self.zero {
            return 0.0;
        }
        let man = self.normalized_mantissa();
        self.apply_sign(self.significand(man) * exp2i(self.p_e_raw - self.format.bias()))
    }

    fn significand(&self, man: u8) -> f64 {
        1.0 + man as f64 * exp2i(-(self.format.m() as i32))
    }

    fn apply_sign(&self, mag: f64) -> f64 {
        if self.sign {
            -mag
        } else {
            mag
        }
    }
}

fn operand_is_zero(v: Fp8Value, policy: ZeroPolicy) -> bool {
    match policy {
        ZeroPolicy::FlushSubnormals => v.exp_field() == 0,
        ZeroPolicy::RawBits => v.raw & 0x7F == 0,
    }
}

/// Multiply two FP8 operands with the approximate datapath.
pub fn l_mul(
    x: Fp8Value,
    y: Fp8Value,
    zero_policy: ZeroPolicy,
) -> Result<LmulProduct, FormatMismatch> {
    if x.format != y.format {
        return Err(FormatMismatch(x.format, y.format));
    }
    let format = x.format;
    let m = format.m();
    let e = format.e();

    let sign = x.sign_bit() ^ y.sign_bit();
    let zero = operand_is_zero(x, zero_policy) || operand_is_zero(y, zero_policy);
    let special_operand = matches!(classify(x), FpClass::Infinity | FpClass::Nan)
        || matches!(classify(y), FpClass::Infinity | FpClass::Nan);

    let p_m_full = x.man_field() + y.man_field() + mantissa_offset(m);
    let carry = (p_m_full >> m) & 0b11;
    let p_e_raw = x.exp_field() as i32 + y.exp_field() as i32 + bias_star(format, carry);

    let underflow = !zero && p_e_raw < 0;
    let flushed = zero || underflow;
    let exp_cap = (1i32 << (e + 1)) - 1;
    let out_exp = if flushed {
        0
    } else {
        p_e_raw.min(exp_cap) as u8
    };

    let mut product = LmulProduct {
        format,
        sign,
        p_m_full,
        p_e_raw,
        out_exp,
        out_man: 0,
        zero,
        underflow,
        special_operand,
    };
    if !flushed {
        product.out_man = product.normalized_mantissa();
    }
    Ok(product)
}

/// Decoded value of the approximate product (hardware field semantics).
pub fn l_mul_decoded(
    x: Fp8Value,
    y: Fp8Value,
    zero_policy: ZeroPolicy,
) -> Result<f64, FormatMismatch> {
    Ok(l_mul(x, y, zero_policy)?.decoded())
}

/// Closed-form value of the approximation, `(-1)^s * (1 + m_x + m_y +
/// 2^-l(m)) * 2^(Ex+Ey)`, applied to the raw bits of any operand pair: no
/// zero flag, no carry normalization, no exponent clamping. This is the
/// algorithm as a formula rather than as a datapath; the two agree exactly
/// whenever the mantissa sum stays below 1.0.
pub fn formula_value(x: Fp8Value, y: Fp8Value) -> Result<f64, FormatMismatch> {
    if x.format != y.format {
        return Err(FormatMismatch(x.format, y.format));
    }
    let format = x.format;
    let m = format.m() as i32;
    let t = (x.man_field() as f64 + y.man_field() as f64 + mantissa_offset(format.m()) as f64)
        * exp2i(-m);
    let e_sum = x.exp_field() as i32 + y.exp_field() as i32 - 2 * format.bias();
    let mag = (1.0 + t) * exp2i(e_sum);
    Ok(if x.sign_bit() ^ y.sign_bit() {
        -mag
    } else {
        mag
    })
}

/// Exact real product of the decoded operands, with no re-quantization.
/// Inf/NaN operands propagate a special marker.
pub fn exact_mul(x: Fp8Value, y: Fp8Value, policy: ValuePolicy) -> Result<Decoded, FormatMismatch> {
    use crate::fp8::decode_with_policy;
    if x.format != y.format {
        return Err(FormatMismatch(x.format, y.format));
    }
    let dx = decode_with_policy(x, policy);
    let dy = decode_with_policy(y, policy);
    Ok(match (dx, dy) {
        (Decoded::Nan, _) | (_, Decoded::Nan) => Decoded::Nan,
        (Decoded::Infinity { negative }, Decoded::Finite(v))
        | (Decoded::Finite(v), Decoded::Infinity { negative }) => {
            if v == 0.0 {
                Decoded::Nan
            } else {
                Decoded::Infinity {
                    negative: negative ^ (v < 0.0),
                }
            }
        }
        (Decoded::Infinity { negative: a }, Decoded::Infinity { negative: b }) => {
            Decoded::Infinity { negative: a ^ b }
        }
        (Decoded::Finite(a), Decoded::Finite(b)) => Decoded::Finite(a * b),
    })
}
