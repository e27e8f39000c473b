//! Exhaustive error characterization of the approximate multiplier.
//!
//! A sweep enumerates every operand pair in a policy-defined domain,
//! computes the error distance `ED = |exact - approx|` per pair and
//! aggregates five metrics: error probability (EP), mean absolute error
//! (MAE), mean relative error (MRE), mean squared error (MSE) and
//! normalized error distance (NED = MAE / max ED), plus the histogram of
//! distinct error magnitudes.
//!
//! The enumeration policy fixes four axes that the hardware leaves open:
//! the operand domain (sign bits fixed to zero or free), how Inf/NaN
//! patterns are handled (excluded, or valued as the raw bits the datapath
//! actually sees), how subnormal operands are treated (flushed to zero or
//! taken as raw bits with an implicit leading 1), and which special-value
//! convention classifies patterns. [`policy_matrix`] runs all sixteen
//! combinations so the configuration behind published error tables can be
//! identified empirically; [`EnumPolicy::default`] is the matching one
//! (see the README).
//!
//! Pair enumeration is chunked by the first operand byte and chunk results
//! merge in index order, so parallel and sequential sweeps agree bit for
//! bit.

use crate::fp8::{classify_with_policy, decode_raw_bits, Fp8Value, FpClass, FpFormat, ValuePolicy};
use crate::lmul::{l_mul, ZeroPolicy};
use crate::par;
use std::collections::BTreeMap;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum OperandDomain {
    /// Sign bits fixed to zero: 128 x 128 pairs.
    #[default]
    UnsignedOnly,
    /// All 256 x 256 raw pairs.
    AllSigned,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum SpecialHandling {
    /// Skip pairs where either operand classifies Inf/NaN.
    ExcludePairsWithSpecials,
    /// Value special patterns by the raw-bits formula, as the datapath does.
    #[default]
    IncludeRawBits,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum SubnormalMode {
    /// Operands with a zero exponent field count as zero on both sides.
    FlushToZero,
    /// Every pattern is valued by the raw-bits formula; only the true
    /// all-zero-field pattern trips the datapath zero flag.
    RawBits,
    /// Pairs with a zero-exponent-field operand are skipped entirely, so
    /// the domain holds normal operands only.
    #[default]
    Exclude,
}

/// Full enumeration policy; every report records the policy it ran under.
///
/// The default is the configuration that reproduces the reference error
/// table: unsigned domain, Inf/NaN pairs excluded, normal operands only,
/// extended special-value convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct EnumPolicy {
    pub domain: OperandDomain,
    pub specials: SpecialHandling,
    pub subnormals: SubnormalMode,
    pub value_policy: ValuePolicy,
}

impl Default for EnumPolicy {
    fn default() -> Self {
        EnumPolicy {
            domain: OperandDomain::UnsignedOnly,
            specials: SpecialHandling::ExcludePairsWithSpecials,
            subnormals: SubnormalMode::Exclude,
            value_policy: ValuePolicy::Extended,
        }
    }
}

/// Which multiplier stands in for the approximate side of the comparison.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
pub enum SweepBackend {
    /// Closed-form approximation value ([`crate::lmul::formula_value`]): no
    /// zero flag, no carry normalization, unbounded exponent.
    #[default]
    Formula,
    /// Datapath value with carry normalization but an unclamped exponent
    /// sum (no underflow flush).
    Unclamped,
    /// Hardware output fields: negative exponent sums flush to zero.
    Hardware,
    /// The exact product itself (identity; all metrics zero).
    Exact,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ErrorReport {
    pub format: FpFormat,
    pub policy: EnumPolicy,
    pub backend: SweepBackend,
    /// Operand pairs evaluated (exclusions not counted).
    pub n_cases: u64,
    /// Pairs skipped because an operand classified Inf/NaN.
    pub excluded_pairs: u64,
    /// Evaluated pairs left out of the MRE mean because the exact product
    /// is zero.
    pub mre_excluded: u64,
    pub ep: f64,
    pub mae: f64,
    pub mre: f64,
    pub mse: f64,
    pub ned: f64,
    pub max_ed: f64,
    /// Distinct error magnitudes with occurrence counts, ascending.
    pub histogram: Vec<(f64, u64)>,
}

fn zero_policy_for(policy: &EnumPolicy) -> ZeroPolicy {
    match policy.subnormals {
        SubnormalMode::FlushToZero => ZeroPolicy::FlushSubnormals,
        SubnormalMode::RawBits | SubnormalMode::Exclude => ZeroPolicy::RawBits,
    }
}

/// Value of an operand as the enumeration sees it, `None` when the pair
/// must be excluded.
fn effective_value(v: Fp8Value, policy: &EnumPolicy) -> Option<f64> {
    match classify_with_policy(v, policy.value_policy) {
        FpClass::Infinity | FpClass::Nan => match policy.specials {
            SpecialHandling::ExcludePairsWithSpecials => None,
            SpecialHandling::IncludeRawBits => Some(decode_raw_bits(v)),
        },
        FpClass::Zero | FpClass::Subnormal => match policy.subnormals {
            SubnormalMode::FlushToZero => Some(0.0),
            SubnormalMode::RawBits => Some(decode_raw_bits(v)),
            SubnormalMode::Exclude => None,
        },
        FpClass::Normal => Some(decode_raw_bits(v)),
    }
}

/// Error distance and exact product for one pair, `None` when excluded.
pub fn pair_error(
    format: FpFormat,
    policy: &EnumPolicy,
    backend: SweepBackend,
    x_raw: u8,
    y_raw: u8,
) -> Option<(f64, f64)> {
    let x = Fp8Value::new(x_raw, format);
    let y = Fp8Value::new(y_raw, format);
    let vx = effective_value(x, policy)?;
    let vy = effective_value(y, policy)?;
    let exact = vx * vy;
    let approx = match backend {
        SweepBackend::Exact => exact,
        SweepBackend::Formula => {
            if vx == 0.0 || vy == 0.0 {
                0.0
            } else {
                crate::lmul::formula_value(x, y).expect("same format")
            }
        }
        SweepBackend::Unclamped | SweepBackend::Hardware => {
            let p = l_mul(x, y, zero_policy_for(policy)).expect("same format");
            match backend {
                SweepBackend::Unclamped => p.decoded_ideal(),
                _ => p.decoded(),
            }
        }
    };
    Some(((exact - approx).abs(), exact))
}

#[derive(Default)]
struct Accum {
    n: u64,
    excluded: u64,
    nonzero_ed: u64,
    mre_excluded: u64,
    ed_sum: f64,
    ratio_sum: f64,
    sq_sum: f64,
    max_ed: f64,
    hist: BTreeMap<u64, u64>,
}

impl Accum {
    fn add_pair(&mut self, ed_exact: Option<(f64, f64)>) {
        let Some((ed, exact)) = ed_exact else {
            self.excluded += 1;
            return;
        };
        self.n += 1;
        self.ed_sum += ed;
        self.sq_sum += ed * ed;
        if ed != 0.0 {
            self.nonzero_ed += 1;
        }
        if exact != 0.0 {
            self.ratio_sum += ed / exact.abs();
        } else {
            self.mre_excluded += 1;
        }
        self.max_ed = self.max_ed.max(ed);
        *self.hist.entry(ed.to_bits()).or_insert(0) += 1;
    }

    fn merge(&mut self, other: Accum) {
        self.n += other.n;
        self.excluded += other.excluded;
        self.nonzero_ed += other.nonzero_ed;
        self.mre_excluded += other.mre_excluded;
        self.ed_sum += other.ed_sum;
        self.ratio_sum += other.ratio_sum;
        self.sq_sum += other.sq_sum;
        self.max_ed = self.max_ed.max(other.max_ed);
        for (k, v) in other.hist {
            *self.hist.entry(k).or_insert(0) += v;
        }
    }
}

fn sweep_impl(
    format: FpFormat,
    policy: EnumPolicy,
    backend: SweepBackend,
    parallel: bool,
) -> ErrorReport {
    let limit: usize = match policy.domain {
        OperandDomain::UnsignedOnly => 128,
        OperandDomain::AllSigned => 256,
    };
    let row = |xi: usize| {
        let mut acc = Accum::default();
        for yi in 0..limit {
            acc.add_pair(pair_error(format, &policy, backend, xi as u8, yi as u8));
        }
        acc
    };
    let rows = if parallel {
        par::map_indexed(limit, row)
    } else {
        par::map_indexed_seq(limit, row)
    };
    let mut total = Accum::default();
    for r in rows {
        total.merge(r);
    }

    let n = total.n as f64;
    let mre_n = (total.n - total.mre_excluded) as f64;
    let mean = |s: f64| if total.n > 0 { s / n } else { 0.0 };
    ErrorReport {
        format,
        policy,
        backend,
        n_cases: total.n,
        excluded_pairs: total.excluded,
        mre_excluded: total.mre_excluded,
        ep: mean(total.nonzero_ed as f64),
        mae: mean(total.ed_sum),
        mre: if mre_n > 0.0 {
            total.ratio_sum / mre_n
        } else {
            0.0
        },
        mse: mean(total.sq_sum),
        ned: if total.max_ed > 0.0 {
            mean(total.ed_sum) / total.max_ed
        } else {
            0.0
        },
        max_ed: total.max_ed,
        histogram: total
            .hist
            .into_iter()
            .map(|(bits, count)| (f64::from_bits(bits), count))
            .collect(),
    }
}

/// Enumerate every pair in the policy's domain and aggregate the metrics.
pub fn sweep(format: FpFormat, policy: EnumPolicy, backend: SweepBackend) -> ErrorReport {
    sweep_impl(format, policy, backend, true)
}

/// Single-threaded sweep; bit-identical to [`sweep`] on every aggregate.
pub fn sweep_seq(format: FpFormat, policy: EnumPolicy, backend: SweepBackend) -> ErrorReport {
    sweep_impl(format, policy, backend, false)
}

/// All policy combinations (2 x 2 x 3 x 2 = 24) in a fixed order.
pub fn all_policies() -> Vec<EnumPolicy> {
    let mut out = Vec::with_capacity(24);
    for domain in [OperandDomain::UnsignedOnly, OperandDomain::AllSigned] {
        for specials in [
            SpecialHandling::ExcludePairsWithSpecials,
            SpecialHandling::IncludeRawBits,
        ] {
            for subnormals in [
                SubnormalMode::FlushToZero,
                SubnormalMode::RawBits,
                SubnormalMode::Exclude,
            ] {
                for value_policy in [ValuePolicy::Strict, ValuePolicy::Extended] {
                    out.push(EnumPolicy {
                        domain,
                        specials,
                        subnormals,
                        value_policy,
                    });
                }
            }
        }
    }
    out
}

/// Run [`sweep`] across the full cartesian product of policy axes.
pub fn policy_matrix(format: FpFormat, backend: SweepBackend) -> Vec<ErrorReport> {
    all_policies()
        .into_iter()
        .map(|p| sweep(format, p, backend))
        .collect()
}

/// 17-significant-digit float formatting for reproducibility diffing.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV of the error-magnitude histogram: the data behind an
/// occurrence-frequency plot, rows ascending by magnitude.
pub fn histogram_csv(report: &ErrorReport) -> String {
    let mut out = String::from("error_magnitude,count,normalized_count\n");
    for (mag, count) in &report.histogram {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_full(*mag),
            count,
            fmt_full(*count as f64 / report.n_cases as f64)
        ));
    }
    out
}

pub fn metrics_csv_header() -> &'static str {
    "format,domain,specials,subnormals,value_policy,backend,n_cases,excluded_pairs,mre_excluded,ep,mae,mre,mse,ned,max_ed"
}

pub fn domain_tag(d: OperandDomain) -> &'static str {
    match d {
        OperandDomain::UnsignedOnly => "unsigned",
        OperandDomain::AllSigned => "signed",
    }
}

pub fn specials_tag(s: SpecialHandling) -> &'static str {
    match s {
        SpecialHandling::ExcludePairsWithSpecials => "exclude",
        SpecialHandling::IncludeRawBits => "raw",
    }
}

pub fn subnormals_tag(s: SubnormalMode) -> &'static str {
    match s {
        SubnormalMode::FlushToZero => "ftz",
        SubnormalMode::RawBits => "raw",
        SubnormalMode::Exclude => "exclude",
    }
}

pub fn value_policy_tag(v: ValuePolicy) -> &'static str {
    match v {
        ValuePolicy::Strict => "strict",
        ValuePolicy::Extended => "extended",
    }
}

pub fn backend_tag(b: SweepBackend) -> &'static str {
    match b {
        SweepBackend::Formula => "formula",
        SweepBackend::Unclamped => "unclamped",
        SweepBackend::Hardware => "hardware",
        SweepBackend::Exact => "exact",
    }
}

/// One metrics CSV row per report, policy encoded in columns.
pub fn metrics_csv_row(r: &ErrorReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.format,
        domain_tag(r.policy.domain),
        specials_tag(r.policy.specials),
        subnormals_tag(r.policy.subnormals),
        value_policy_tag(r.policy.value_policy),
        backend_tag(r.backend),
        r.n_cases,
        r.excluded_pairs,
        r.mre_excluded,
        fmt_full(r.ep),
        fmt_full(r.mae),
        fmt_full(r.mre),
        fmt_full(r.mse),
        fmt_full(r.ned),
        fmt_full(r.max_ed)
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_backend_is_error_free() {
        let r = sweep(FpFormat::E4M3, EnumPolicy::default(), SweepBackend::Exact);
        assert_eq!(r.ep, 0.0);
        assert_eq!(r.mae, 0.0);
        assert_eq!(r.mre, 0.0);
        assert_eq!(r.mse, 0.0);
        assert_eq!(r.ned, 0.0);
        assert_eq!(r.histogram, vec![(0.0, r.n_cases)]);
    }

    #[test]
    fn domain_sizes() {
        let mut p = EnumPolicy::default();
        let r = sweep(FpFormat::E4M3, p, SweepBackend::Formula);
        assert_eq!(r.n_cases + r.excluded_pairs, 16_384);
        // Default policy: normals only, extended NaN out: 119^2 pairs.
        assert_eq!(r.n_cases, 119 * 119);
        p.domain = OperandDomain::AllSigned;
        let r = sweep(FpFormat::E4M3, p, SweepBackend::Formula);
        assert_eq!(r.n_cases + r.excluded_pairs, 65_536);
    }

    #[test]
    fn matrix_covers_the_policy_product() {
        let m = policy_matrix(FpFormat::E3M4, SweepBackend::Formula);
        assert_eq!(m.len(), 24);
        let set: std::collections::HashSet<_> = m.iter().map(|r| r.policy).collect();
        assert_eq!(set.len(), 24);
    }

    /// Frozen regression values for the default configuration, all formats.
    #[test]
    fn default_reference_metrics_all_formats() {
        // (format, ep, mae, mre, mse, ned)
        let expected = [
            (FpFormat::E6M1, 1.00000, 5.01751e15, 0.320999, 1.46700e34, 0.000544),
            (FpFormat::E5M2, 0.93648, 2.50178e6, 0.111554, 9.23469e14, 0.002330),
            (FpFormat::E4M3, 0.96822, 140.636, 0.068371, 7.56075e5, 0.004905),
            (FpFormat::E3M4, 0.99205, 3.03810, 0.068671, 90.7184, 0.018525),
            (FpFormat::E2M5, 0.99701, 0.991042, 0.071909, 3.22526, 0.075869),
            (FpFormat::E1M6, 0.99924, 0.764677, 0.072597, 1.18437, 0.218236),
        ];
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-3 * b.abs();
        for (format, ep, mae, mre, mse, ned) in expected {
            let r = sweep(format, EnumPolicy::default(), SweepBackend::Formula);
            assert!(close(r.ep, ep), "{format} ep={}", r.ep);
            assert!(close(r.mae, mae), "{format} mae={}", r.mae);
            assert!(close(r.mre, mre), "{format} mre={}", r.mre);
            assert!(close(r.mse, mse), "{format} mse={}", r.mse);
            assert!(close(r.ned, ned), "{format} ned={}", r.ned);
        }
        // E4M3 worst-case error distance is exactly the top non-NaN pair.
        let r = sweep(FpFormat::E4M3, EnumPolicy::default(), SweepBackend::Formula);
        assert_eq!(r.max_ed, 28_672.0);
    }

    #[test]
    fn parallel_and_sequential_sweeps_are_bit_identical() {
        for format in [FpFormat::E4M3, FpFormat::E1M6] {
            for policy in all_policies().into_iter().take(6) {
                let a = sweep(format, policy, SweepBackend::Formula);
                let b = sweep_seq(format, policy, SweepBackend::Formula);
                assert_eq!(a.ep.to_bits(), b.ep.to_bits());
                assert_eq!(a.mae.to_bits(), b.mae.to_bits());
                assert_eq!(a.mre.to_bits(), b.mre.to_bits());
                assert_eq!(a.mse.to_bits(), b.mse.to_bits());
                assert_eq!(a.ned.to_bits(), b.ned.to_bits());
                assert_eq!(a.max_ed.to_bits(), b.max_ed.to_bits());
                assert_eq!(a.histogram, b.histogram);
            }
        }
    }

    #[test]
    fn operand_order_symmetry_exhaustive() {
        let policy = EnumPolicy::default();
        for x in 0..=0x7Fu8 {
            for y in x..=0x7F {
                let a = pair_error(FpFormat::E4M3, &policy, SweepBackend::Formula, x, y);
                let b = pair_error(FpFormat::E4M3, &policy, SweepBackend::Formula, y, x);
                assert_eq!(a, b, "x={x:#04x} y={y:#04x}");
            }
        }
    }

    /// Pairs of plain normal operands (normal under both value policies,
    /// sign bit clear) see identical errors under every policy.
    #[test]
    fn policies_agree_on_plain_normal_pairs() {
        let format = FpFormat::E4M3;
        let normal = |raw: u8| {
            let v = Fp8Value::new(raw, format);
            let ef = v.exp_field();
            ef >= 1 && ef < format.exp_max()
        };
        let normals: Vec<u8> = (0..=0x7F).filter(|r| normal(*r)).collect();
        let policies = all_policies();
        for &x in &normals {
            for &y in &normals {
                let base = pair_error(format, &policies[0], SweepBackend::Formula, x, y);
                for p in &policies[1..] {
                    assert_eq!(base, pair_error(format, p, SweepBackend::Formula, x, y));
                }
            }
        }
    }

    #[test]
    fn histogram_normalization_and_distinct_count() {
        let r = sweep(FpFormat::E4M3, EnumPolicy::default(), SweepBackend::Formula);
        let csv = histogram_csv(&r);
        assert!(csv.starts_with("error_magnitude,count,normalized_count\n"));
        let total: f64 = r
            .histogram
            .iter()
            .map(|(_, c)| *c as f64 / r.n_cases as f64)
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Second independent pass over the domain for the distinct count.
        let mut seen = std::collections::HashSet::new();
        for x in 0..=0x7Fu8 {
            for y in 0..=0x7F {
                if let Some((ed, _)) = pair_error(
                    FpFormat::E4M3,
                    &EnumPolicy::default(),
                    SweepBackend::Formula,
                    x,
                    y,
                ) {
                    seen.insert(ed.to_bits());
                }
            }
        }
        assert_eq!(seen.len(), r.histogram.len());
        assert!(r.histogram.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn e6m1_default_error_probability_is_one() {
        let r = sweep(FpFormat::E6M1, EnumPolicy::default(), SweepBackend::Formula);
        assert_eq!(r.ep, 1.0);
    }

    #[test]
    fn metric_sanity_bounds() {
        for format in FpFormat::ALL {
            let r = sweep(format, EnumPolicy::default(), SweepBackend::Formula);
            assert!(r.ep >= 0.0 && r.ep <= 1.0, "{format}");
            assert!(r.ned <= 1.0, "{format}");
            assert!(r.mse >= 0.0, "{format}");
            assert!(r.max_ed * r.max_ed >= r.mse, "{format}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn pair_error_symmetry_random(x in any::<u8>(), y in any::<u8>(), fi in 0usize..6, pi in 0usize..24) {
            let format = FpFormat::ALL[fi];
            let policy = all_policies()[pi];
            prop_assert_eq!(
                pair_error(format, &policy, SweepBackend::Formula, x, y),
                pair_error(format, &policy, SweepBackend::Formula, y, x)
            );
        }
    }
}
