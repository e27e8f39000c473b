//! Structural model of the multiplier at FPGA primitive granularity:
//! dual-output 6-input LUTs and 8-element carry chains.
//!
//! A [`Netlist`] is a directed acyclic graph of [`LutPrim`] and [`CarryElem`]
//! nodes over named single-driver nets, built per format by
//! [`build_lmul_netlist`] and evaluated in topological order on raw operand
//! bytes. Its output fields are proven bit-identical to the behavioral model
//! by exhaustive enumeration ([`verify_equivalence`]).

mod build;
mod dump;

pub use build::build_lmul_netlist;
pub use dump::parse_dump;

use crate::fp8::FpFormat;
use crate::lmul::{l_mul, ZeroPolicy};
use crate::par;

pub type NetId = u32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetlistError {
    #[error("combinational cycle involving `{0}`")]
    Cycle(String),
    #[error("net `{0}` has more than one driver")]
    MultipleDrivers(String),
    #[error("carry chain operand lengths differ: {sums} sum bits vs {gens} generate bits")]
    ChainMismatch { sums: usize, gens: usize },
    #[error("carry chain length {0} exceeds 8 elements")]
    ChainTooLong(usize),
    #[error("netlist dump parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// The five LUT roles of the design: sign (A), adder slices (B), exponent
/// output and zero handling (C), mantissa MSB (D), remaining mantissa (E).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LutRole {
    A,
    B,
    C,
    D,
    E,
}

/// Dual-output 6-input LUT. `O6 = init[index(I5..I0)]`; `O5` reads the lower
/// 32 bits with I5 ignored. When O5 is used the builder ties I5 high, so the
/// two halves of the truth table address independent 5-input functions.
#[derive(Debug, Clone)]
pub struct LutPrim {
    pub role: LutRole,
    pub init: u64,
    /// I0..I5; unconnected inputs read as 0.
    pub inputs: [Option<NetId>; 6],
    pub out_o6: NetId,
    pub out_o5: Option<NetId>,
}

/// One carry-chain element: `o = s XOR ci`, `co = ci` if `s` else `di`.
#[derive(Debug, Clone)]
pub struct CarryElem {
    pub chain: u32,
    pub pos: u32,
    pub s_in: NetId,
    pub di_in: NetId,
    pub ci_in: NetId,
    pub o_out: NetId,
    pub co_out: NetId,
}

#[derive(Debug, Clone, Copy)]
enum PrimRef {
    Lut(usize),
    Carry(usize),
}

/// Output fields of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetlistOutput {
    pub sign: bool,
    pub exp: u8,
    pub man: u8,
}

#[derive(Debug, Clone)]
pub struct Netlist {
    pub format: FpFormat,
    pub zero_policy: ZeroPolicy,
    pub luts: Vec<LutPrim>,
    pub carries: Vec<CarryElem>,
    pub(crate) names: Vec<String>,
    pub(crate) in_x: [NetId; 8],
    pub(crate) in_y: [NetId; 8],
    pub(crate) const0: NetId,
    pub(crate) const1: NetId,
    pub(crate) out_sign: NetId,
    /// Exponent output nets, LSB first, `e+1` of them.
    pub(crate) out_exp: Vec<NetId>,
    /// Mantissa output nets, LSB first, `m` of them.
    pub(crate) out_man: Vec<NetId>,
    topo: Vec<PrimRef>,
}

/// Resource summary of a built netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct ResourceReport {
    pub lut_count: usize,
    pub carry8_count: usize,
    /// Longest combinational path in primitive hops.
    pub depth: usize,
}

/// Evaluate one LUT on six input bits (I0 first). Returns `(o6, o5)`.
pub fn eval_lut(init: u64, bits: [bool; 6]) -> (bool, bool) {
    let mut idx = 0usize;
    for (k, b) in bits.iter().enumerate() {
        idx |= (*b as usize) << k;
    }
    let o6 = (init >> idx) & 1 != 0;
    let o5 = (init >> (idx & 0x1F)) & 1 != 0;
    (o6, o5)
}

/// Ripple-evaluate a carry chain from per-element propagate (`s`) and
/// generate (`di`) bits. Returns the sum bits and the final carry out.
pub fn eval_carry_chain(
    s: &[bool],
    di: &[bool],
    ci0: bool,
) -> Result<(Vec<bool>, bool), NetlistError> {
    if s.len() != di.len() {
        return Err(NetlistError::ChainMismatch {
            sums: s.len(),
            gens: di.len(),
        });
    }
    if s.len() > 8 {
        return Err(NetlistError::ChainTooLong(s.len()));
    }
    let mut ci = ci0;
    let mut o = Vec::with_capacity(s.len());
    for k in 0..s.len() {
        o.push(s[k] ^ ci);
        ci = if s[k] { ci } else { di[k] };
    }
    Ok((o, ci))
}

impl Netlist {
    pub fn net_name(&self, id: NetId) -> &str {
        &self.names[id as usize]
    }

    pub fn net_count(&self) -> usize {
        self.names.len()
    }

    /// Compute the topological evaluation order; fails on a combinational
    /// cycle. Called once at build/parse time, never during eval.
    pub(crate) fn sort_topological(&mut self) -> Result<(), NetlistError> {
        let n = self.names.len();
        let mut have = vec![false; n];
        have[self.const0 as usize] = true;
        have[self.const1 as usize] = true;
        for id in self.in_x.iter().chain(self.in_y.iter()) {
            have[*id as usize] = true;
        }

        let mut placed_lut = vec![false; self.luts.len()];
        let mut placed_carry = vec![false; self.carries.len()];
        let mut topo = Vec::with_capacity(self.luts.len() + self.carries.len());
        loop {
            let mut progress = false;
            for (i, lut) in self.luts.iter().enumerate() {
                if placed_lut[i] || !lut.inputs.iter().flatten().all(|id| have[*id as usize]) {
                    continue;
                }
                placed_lut[i] = true;
                have[lut.out_o6 as usize] = true;
                if let Some(o5) = lut.out_o5 {
                    have[o5 as usize] = true;
                }
                topo.push(PrimRef::Lut(i));
                progress = true;
            }
            for (i, cc) in self.carries.iter().enumerate() {
                if placed_carry[i]
                    || !(have[cc.s_in as usize]
                        && have[cc.di_in as usize]
                        && have[cc.ci_in as usize])
                {
                    continue;
                }
                placed_carry[i] = true;
                have[cc.o_out as usize] = true;
                have[cc.co_out as usize] = true;
                topo.push(PrimRef::Carry(i));
                progress = true;
            }
            if !progress {
                break;
            }
        }
        if let Some(i) = placed_lut.iter().position(|p| !p) {
            return Err(NetlistError::Cycle(
                self.net_name(self.luts[i].out_o6).to_string(),
            ));
        }
        if let Some(i) = placed_carry.iter().position(|p| !p) {
            return Err(NetlistError::Cycle(
                self.net_name(self.carries[i].o_out).to_string(),
            ));
        }
        self.topo = topo;
        Ok(())
    }

    pub(crate) fn check_single_driver(&self) -> Result<(), NetlistError> {
        let mut driven = vec![false; self.names.len()];
        let mut drive = |id: NetId| -> Result<(), NetlistError> {
            let slot = &mut driven[id as usize];
            if *slot {
                return Err(NetlistError::MultipleDrivers(
                    self.names[id as usize].clone(),
                ));
            }
            *slot = true;
            Ok(())
        };
        for lut in &self.luts {
            drive(lut.out_o6)?;
            if let Some(o5) = lut.out_o5 {
                drive(o5)?;
            }
        }
        for cc in &self.carries {
            drive(cc.o_out)?;
            drive(cc.co_out)?;
        }
        Ok(())
    }

    /// Evaluate the netlist on raw operand bytes.
    pub fn eval(&self, x: u8, y: u8) -> NetlistOutput {
        let mut v = vec![false; self.names.len()];
        v[self.const1 as usize] = true;
        for b in 0..8 {
            v[self.in_x[b] as usize] = (x >> b) & 1 != 0;
            v[self.in_y[b] as usize] = (y >> b) & 1 != 0;
        }
        for prim in &self.topo {
            match *prim {
                PrimRef::Lut(i) => {
                    let lut = &self.luts[i];
                    let mut idx = 0usize;
                    for (k, inp) in lut.inputs.iter().enumerate() {
                        if let Some(id) = inp {
                            idx |= (v[*id as usize] as usize) << k;
                        }
                    }
                    v[lut.out_o6 as usize] = (lut.init >> idx) & 1 != 0;
                    if let Some(o5) = lut.out_o5 {
                        v[o5 as usize] = (lut.init >> (idx & 0x1F)) & 1 != 0;
                    }
                }
                PrimRef::Carry(i) => {
                    let cc = &self.carries[i];
                    let s = v[cc.s_in as usize];
                    let ci = v[cc.ci_in as usize];
                    v[cc.o_out as usize] = s ^ ci;
                    v[cc.co_out as usize] = if s { ci } else { v[cc.di_in as usize] };
                }
            }
        }
        let mut exp = 0u8;
        for (k, id) in self.out_exp.iter().enumerate() {
            exp |= (v[*id as usize] as u8) << k;
        }
        let mut man = 0u8;
        for (k, id) in self.out_man.iter().enumerate() {
            man |= (v[*id as usize] as u8) << k;
        }
        NetlistOutput {
            sign: v[self.out_sign as usize],
            exp,
            man,
        }
    }

    /// Count LUTs, CARRY8 blocks and the longest primitive path.
    pub fn report_resources(&self) -> ResourceReport {
        use std::collections::HashMap;
        let mut chain_len: HashMap<u32, usize> = HashMap::new();
        for cc in &self.carries {
            *chain_len.entry(cc.chain).or_insert(0) += 1;
        }
        let carry8_count = chain_len.values().map(|len| len.div_ceil(8)).sum();

        // Depth by DP over the already-computed topological order.
        let mut net_depth = vec![0usize; self.names.len()];
        let mut depth = 0usize;
        for prim in &self.topo {
            match *prim {
                PrimRef::Lut(i) => {
                    let lut = &self.luts[i];
                    let d = 1 + lut
                        .inputs
                        .iter()
                        .flatten()
                        .map(|id| net_depth[*id as usize])
                        .max()
                        .unwrap_or(0);
                    net_depth[lut.out_o6 as usize] = d;
                    if let Some(o5) = lut.out_o5 {
                        net_depth[o5 as usize] = d;
                    }
                    depth = depth.max(d);
                }
                PrimRef::Carry(i) => {
                    let cc = &self.carries[i];
                    let d = 1 + [cc.s_in, cc.di_in, cc.ci_in]
                        .iter()
                        .map(|id| net_depth[*id as usize])
                        .max()
                        .unwrap();
                    net_depth[cc.o_out as usize] = d;
                    net_depth[cc.co_out as usize] = d;
                    depth = depth.max(d);
                }
            }
        }
        ResourceReport {
            lut_count: self.luts.len(),
            carry8_count,
            depth,
        }
    }

    /// Test hook: flip one bit of one LUT INIT, invalidating the netlist.
    pub fn flip_init_bit(&mut self, lut_index: usize, bit: u32) {
        self.luts[lut_index].init ^= 1u64 << bit;
    }
}

/// One behavioral-vs-netlist mismatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mismatch {
    pub x: u8,
    pub y: u8,
    pub expected: NetlistOutput,
    pub got: NetlistOutput,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub format: FpFormat,
    pub cases: u64,
    pub first_mismatch: Option<Mismatch>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.first_mismatch.is_none()
    }
}

/// Exhaustively compare the netlist against the behavioral model on all
/// 65,536 operand pairs. Rows are checked in parallel; the reported
/// counterexample is the first in (x, y) order.
pub fn verify_equivalence(
    netlist: &Netlist,
    format: FpFormat,
    zero_policy: ZeroPolicy,
) -> VerifyReport {
    let rows = par::map_indexed(256, |xi| {
        let x = xi as u8;
        for yi in 0..256usize {
            let y = yi as u8;
            let p = l_mul(
                crate::fp8::Fp8Value::new(x, format),
                crate::fp8::Fp8Value::new(y, format),
                zero_policy,
            )
            .expect("same format");
            let expected = NetlistOutput {
                sign: p.sign,
                exp: p.out_exp,
                man: p.out_man,
            };
            let got = netlist.eval(x, y);
            if got != expected {
                return Some(Mismatch {
                    x,
                    y,
                    expected,
                    got,
                });
            }
        }
        None
    });
    VerifyReport {
        format,
        cases: 65_536,
        first_mismatch: rows.into_iter().flatten().next(),
    }
}
