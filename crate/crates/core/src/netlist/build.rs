//! Per-format netlist construction.
//!
//! Layout mirrors the datapath: one sign LUT (role A); a two-stage mantissa
//! adder (fraction sum, then the offset constant folded into INITs and the
//! LSB carry-in); a two-stage exponent adder (field sum, then the
//! carry-selected `bias*` constant applied in subtract form, CI=1 with the
//! complemented constant folded per bit); zero/underflow detection; and the
//! output gating LUTs realizing the final mantissa/exponent case equations
//! (roles C, D, E).

use std::collections::HashMap;

use super::{CarryElem, LutPrim, LutRole, NetId, Netlist};
use crate::fp8::FpFormat;
use crate::lmul::{bias_star, mantissa_offset, ZeroPolicy};

/// Truth table with the function replicated across unused inputs.
pub(crate) fn single_init(f: impl Fn([bool; 6]) -> bool) -> u64 {
    let mut init = 0u64;
    for idx in 0..64u64 {
        let bits = std::array::from_fn(|k| (idx >> k) & 1 != 0);
        if f(bits) {
            init |= 1 << idx;
        }
    }
    init
}

/// Truth table for dual-output use: the lower 32 bits hold the O5 function,
/// the upper 32 the O6 function (I5 is tied high).
pub(crate) fn dual_init(f5: impl Fn([bool; 5]) -> bool, f6: impl Fn([bool; 5]) -> bool) -> u64 {
    let mut init = 0u64;
    for idx in 0..32u64 {
        let bits = std::array::from_fn(|k| (idx >> k) & 1 != 0);
        if f5(bits) {
            init |= 1 << idx;
        }
        if f6(bits) {
            init |= 1 << (32 + idx);
        }
    }
    init
}

fn inputs2(a: NetId, b: NetId) -> [Option<NetId>; 6] {
    [Some(a), Some(b), None, None, None, None]
}

pub(crate) struct NetBuilder {
    names: Vec<String>,
    by_name: HashMap<String, NetId>,
    luts: Vec<LutPrim>,
    carries: Vec<CarryElem>,
    next_chain: u32,
    const0: NetId,
    const1: NetId,
}

impl NetBuilder {
    pub(crate) fn new() -> Self {
        let mut b = NetBuilder {
            names: Vec::new(),
            by_name: HashMap::new(),
            luts: Vec::new(),
            carries: Vec::new(),
            next_chain: 0,
            const0: 0,
            const1: 0,
        };
        b.const0 = b.net("0");
        b.const1 = b.net("1");
        b
    }

    pub(crate) fn net(&mut self, name: impl Into<String>) -> NetId {
        let name = name.into();
        debug_assert!(!self.by_name.contains_key(&name), "duplicate net `{name}`");
        let id = self.names.len() as NetId;
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    fn lut(
        &mut self,
        role: LutRole,
        init: u64,
        inputs: [Option<NetId>; 6],
        o6: NetId,
        o5: Option<NetId>,
    ) {
        self.luts.push(LutPrim {
            role,
            init,
            inputs,
            out_o6: o6,
            out_o5: o5,
        });
    }

    /// Single-output LUT with inputs packed from I0.
    fn logic_lut(
        &mut self,
        role: LutRole,
        ins: &[NetId],
        f: impl Fn(&[bool]) -> bool,
        out: &str,
    ) -> NetId {
        assert!(ins.len() <= 6);
        let n = ins.len();
        let init = single_init(|bits| f(&bits[..n]));
        let mut inputs = [None; 6];
        for (k, id) in ins.iter().enumerate() {
            inputs[k] = Some(*id);
        }
        let o6 = self.net(out);
        self.lut(role, init, inputs, o6, None);
        o6
    }

    /// Chain `stages` of (propagate, generate) nets into one carry chain.
    /// Returns the sum nets plus the final carry-out net.
    fn chain(
        &mut self,
        stages: &[(NetId, NetId)],
        ci0: NetId,
        prefix: &str,
    ) -> (Vec<NetId>, NetId) {
        assert!(stages.len() <= 8, "chain `{prefix}` exceeds one CARRY8");
        let chain = self.next_chain;
        self.next_chain += 1;
        let mut ci = ci0;
        let mut sums = Vec::with_capacity(stages.len());
        for (pos, (s, di)) in stages.iter().enumerate() {
            let o = self.net(format!("{prefix}s{pos}"));
            let co = self.net(format!("{prefix}c{pos}"));
            self.carries.push(CarryElem {
                chain,
                pos: pos as u32,
                s_in: *s,
                di_in: *di,
                ci_in: ci,
                o_out: o,
                co_out: co,
            });
            sums.push(o);
            ci = co;
        }
        (sums, ci)
    }

    /// k-bit two-operand ripple adder: role-B LUTs (O6 = a XOR b propagate,
    /// O5 = a AND b generate) driving one carry chain. Returns k sum bits
    /// plus the carry-out as bit k.
    pub(crate) fn xy_adder(
        &mut self,
        a: &[NetId],
        b: &[NetId],
        prefix: &str,
    ) -> (Vec<NetId>, NetId) {
        assert_eq!(a.len(), b.len());
        let init = dual_init(|i| i[0] && i[1], |i| i[0] ^ i[1]);
        let mut stages = Vec::with_capacity(a.len());
        for k in 0..a.len() {
            let p = self.net(format!("{prefix}p{k}"));
            let g = self.net(format!("{prefix}g{k}"));
            let mut inputs = inputs2(a[k], b[k]);
            inputs[5] = Some(self.const1);
            self.lut(LutRole::B, init, inputs, p, Some(g));
            stages.push((p, g));
        }
        self.chain(&stages, self.const0, prefix)
    }

    /// Adds the constant `c >= 1` to `a`: CI0 = 1 with `c - 1` folded into
    /// the per-bit INITs, the same subtract-style encoding used for `bias*`.
    pub(crate) fn const_adder(&mut self, a: &[NetId], c: u64, prefix: &str) -> (Vec<NetId>, NetId) {
        assert!(c >= 1);
        let kappa = c - 1;
        let mut stages = Vec::with_capacity(a.len());
        for (k, ak) in a.iter().enumerate() {
            let kb = (kappa >> k) & 1 != 0;
            let init = dual_init(move |i| i[0] && kb, move |i| i[0] ^ kb);
            let p = self.net(format!("{prefix}p{k}"));
            let g = self.net(format!("{prefix}g{k}"));
            let mut inputs = [None; 6];
            inputs[0] = Some(*ak);
            inputs[5] = Some(self.const1);
            self.lut(LutRole::B, init, inputs, p, Some(g));
            stages.push((p, g));
        }
        self.chain(&stages, self.const1, prefix)
    }

    /// `w`-bit adder of `a` (zero-extended) and a constant selected by the
    /// two mantissa carry bits: per-bit INIT folds bit k of
    /// `(constant(c1,c0) - 1) mod 2^w`, with CI0 = 1.
    pub(crate) fn carry_selected_const_adder(
        &mut self,
        a: &[NetId],
        c0: NetId,
        c1: NetId,
        consts: [i64; 4],
        w: usize,
        prefix: &str,
    ) -> Vec<NetId> {
        let mask = (1u64 << w) - 1;
        let kappa: [u64; 4] =
            std::array::from_fn(|c| (consts[c] - 1).rem_euclid(1 << w) as u64 & mask);
        let mut stages = Vec::with_capacity(w);
        for k in 0..w {
            let kb: [bool; 4] = std::array::from_fn(|c| (kappa[c] >> k) & 1 != 0);
            let p = self.net(format!("{prefix}p{k}"));
            let g = self.net(format!("{prefix}g{k}"));
            let (init, inputs) = if k < a.len() {
                let sel = move |i: [bool; 5]| kb[(i[1] as usize) | ((i[2] as usize) << 1)];
                let init = dual_init(move |i| i[0] && sel(i), move |i| i[0] ^ sel(i));
                let inputs = [
                    Some(a[k]),
                    Some(c0),
                    Some(c1),
                    None,
                    None,
                    Some(self.const1),
                ];
                (init, inputs)
            } else {
                // Zero-extended bit: propagate is just the selected constant
                // bit, nothing to generate.
                let sel = move |i: [bool; 5]| kb[(i[0] as usize) | ((i[1] as usize) << 1)];
                let init = dual_init(|_| false, sel);
                let inputs = [Some(c0), Some(c1), None, None, None, Some(self.const1)];
                (init, inputs)
            };
            self.lut(LutRole::B, init, inputs, p, Some(g));
            stages.push((p, g));
        }
        let (sums, _co) = self.chain(&stages, self.const1, prefix);
        sums
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        format: FpFormat,
        zero_policy: ZeroPolicy,
        in_x: [NetId; 8],
        in_y: [NetId; 8],
        out_sign: NetId,
        out_exp: Vec<NetId>,
        out_man: Vec<NetId>,
    ) -> Netlist {
        let mut n = Netlist {
            format,
            zero_policy,
            luts: self.luts,
            carries: self.carries,
            names: self.names,
            in_x,
            in_y,
            const0: self.const0,
            const1: self.const1,
            out_sign,
            out_exp,
            out_man,
            topo: Vec::new(),
        };
        n.check_single_driver()
            .expect("builder produced a multiply-driven net");
        n.sort_topological()
            .expect("builder produced a combinational cycle");
        n
    }
}

#[cfg(test)]
impl NetBuilder {
    pub(crate) fn test_parts(&self) -> (usize, &[LutPrim], &[CarryElem], NetId) {
        (self.names.len(), &self.luts, &self.carries, self.const1)
    }
}

/// Width of the signed exponent-sum window: must hold
/// `[-bias, 2*(2^e - 1) - bias + 2]` in two's complement.
pub(crate) fn exp_sum_width(format: FpFormat) -> usize {
    let e = format.e() as i64;
    let bias = format.bias() as i64;
    let max = 2 * ((1 << e) - 1) - bias + 2;
    let min = -bias;
    let mut w = 2;
    while (1i64 << (w - 1)) <= max || -(1i64 << (w - 1)) > min {
        w += 1;
    }
    w as usize
}

/// Build the multiplier netlist for one format under the given zero policy.
pub fn build_lmul_netlist(format: FpFormat, zero_policy: ZeroPolicy) -> Netlist {
    let m = format.m() as usize;
    let e = format.e() as usize;
    let mut b = NetBuilder::new();

    let in_x: [NetId; 8] = std::array::from_fn(|k| b.net(format!("x{k}")));
    let in_y: [NetId; 8] = std::array::from_fn(|k| b.net(format!("y{k}")));

    // Role A: product sign.
    let out_sign = b.logic_lut(LutRole::A, &[in_x[7], in_y[7]], |i| i[0] ^ i[1], "sign");

    // Mantissa path: fraction sum, then the offset constant.
    let (m1_sums, m1_co) = b.xy_adder(&in_x[..m], &in_y[..m], "m1");
    let mut s1 = m1_sums;
    s1.push(m1_co);
    let (s2, s2_co) = b.const_adder(&s1, mantissa_offset(format.m()) as u64, "m2");
    let c0 = s2[m];
    let c1 = s2_co;

    // Exponent path: field sum, then bias* selected by the carry bits.
    let (e1_sums, e1_co) = b.xy_adder(&in_x[m..7], &in_y[m..7], "e1");
    let mut t1 = e1_sums;
    t1.push(e1_co);
    let w = exp_sum_width(format);
    let consts: [i64; 4] = std::array::from_fn(|c| bias_star(format, c as u8) as i64);
    let t2 = b.carry_selected_const_adder(&t1, c0, c1, consts, w, "e2");
    let neg = t2[w - 1];

    // Zero detection per policy, folded with underflow into one gate signal.
    let g = match zero_policy {
        ZeroPolicy::FlushSubnormals => {
            let zx = b.logic_lut(LutRole::C, &in_x[m..7], |i| i.iter().all(|b| !b), "zx");
            let zy = b.logic_lut(LutRole::C, &in_y[m..7], |i| i.iter().all(|b| !b), "zy");
            b.logic_lut(LutRole::C, &[zx, zy, neg], |i| i[0] || i[1] || i[2], "g")
        }
        ZeroPolicy::RawBits => {
            let zx = b.logic_lut(LutRole::C, &in_x[1..7], |i| i.iter().all(|b| !b), "zx");
            let zy = b.logic_lut(LutRole::C, &in_y[1..7], |i| i.iter().all(|b| !b), "zy");
            b.logic_lut(
                LutRole::C,
                &[zx, in_x[0], zy, in_y[0], neg],
                |i| (i[0] && !i[1]) || (i[2] && !i[3]) || i[4],
                "g",
            )
        }
    };

    // Role C: gated exponent output bits.
    let out_exp: Vec<NetId> = (0..=e)
        .map(|k| {
            b.logic_lut(
                LutRole::C,
                &[t2[k], g],
                |i| i[0] && !i[1],
                &format!("pe{k}"),
            )
        })
        .collect();

    // Role D: top mantissa bit (forced 1 on carry 2'b10).
    let carry10 = |c0: bool, c1: bool| c1 && !c0;
    let mut out_man = vec![0 as NetId; m];
    out_man[m - 1] = b.logic_lut(
        LutRole::D,
        &[s2[m - 1], c0, c1, g],
        move |i| !i[3] && (carry10(i[1], i[2]) || i[0]),
        &format!("pm{}", m - 1),
    );

    // Role E: remaining mantissa bits (shifted by one on carry 2'b10).
    for k in 0..m - 1 {
        out_man[k] = b.logic_lut(
            LutRole::E,
            &[s2[k], s2[k + 1], c0, c1, g],
            move |i| !i[4] && if carry10(i[2], i[3]) { i[1] } else { i[0] },
            &format!("pm{k}"),
        );
    }

    b.finish(format, zero_policy, in_x, in_y, out_sign, out_exp, out_man)
}

impl Netlist {
    /// A netlist with no primitives; outputs are tied to constant zero.
    pub fn empty(format: FpFormat, zero_policy: ZeroPolicy) -> Netlist {
        let mut b = NetBuilder::new();
        let in_x: [NetId; 8] = std::array::from_fn(|k| b.net(format!("x{k}")));
        let in_y: [NetId; 8] = std::array::from_fn(|k| b.net(format!("y{k}")));
        let c0 = b.const0;
        let out_exp = vec![c0; format.e() as usize + 1];
        let out_man = vec![c0; format.m() as usize];
        b.finish(format, zero_policy, in_x, in_y, c0, out_exp, out_man)
    }
}
