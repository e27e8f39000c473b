//! Deterministic line-oriented netlist text format and its reader.
//!
//! One primitive per line:
//!
//! ```text
//! LUT <role> INIT=<16 hex digits> IN=<nets> O6=<net> [O5=<net>]
//! CARRY <chain>/<pos> S=<net> DI=<net> CI=<net> O=<net> CO=<net>
//! ```
//!
//! Net references are names; the constant nets are named `0` and `1`, and a
//! `-` marks an unconnected LUT input slot. The text is stable across runs
//! for diffing, and re-parsing reproduces an equivalent netlist.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{CarryElem, LutPrim, LutRole, NetId, Netlist, NetlistError};
use crate::fp8::FpFormat;
use crate::lmul::ZeroPolicy;

impl LutRole {
    fn letter(self) -> char {
        match self {
            LutRole::A => 'A',
            LutRole::B => 'B',
            LutRole::C => 'C',
            LutRole::D => 'D',
            LutRole::E => 'E',
        }
    }

    fn from_letter(s: &str) -> Option<LutRole> {
        match s {
            "A" => Some(LutRole::A),
            "B" => Some(LutRole::B),
            "C" => Some(LutRole::C),
            "D" => Some(LutRole::D),
            "E" => Some(LutRole::E),
            _ => None,
        }
    }
}

fn zero_policy_tag(p: ZeroPolicy) -> &'static str {
    match p {
        ZeroPolicy::FlushSubnormals => "ftz",
        ZeroPolicy::RawBits => "raw",
    }
}

impl Netlist {
    /// Render the netlist as deterministic text.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "NETLIST format={} zero-policy={} luts={} carries={}",
            self.format,
            zero_policy_tag(self.zero_policy),
            self.luts.len(),
            self.carries.len()
        )
        .unwrap();
        writeln!(out, "INPUTS x[7:0] y[7:0]").unwrap();
        let join = |ids: &[NetId]| {
            ids.iter()
                .rev()
                .map(|id| self.net_name(*id))
                .collect::<Vec<_>>()
                .join(",")
        };
        writeln!(
            out,
            "OUTPUTS sign={} pe={} pm={}",
            self.net_name(self.out_sign),
            join(&self.out_exp),
            join(&self.out_man)
        )
        .unwrap();

        for lut in &self.luts {
            let last = lut
                .inputs
                .iter()
                .rposition(|i| i.is_some())
                .map_or(0, |p| p + 1);
            let ins = lut.inputs[..last.max(1)]
                .iter()
                .map(|i| i.map_or("-", |id| self.net_name(id)))
                .collect::<Vec<_>>()
                .join(",");
            write!(
                out,
                "LUT {} INIT={:016x} IN={} O6={}",
                lut.role.letter(),
                lut.init,
                ins,
                self.net_name(lut.out_o6)
            )
            .unwrap();
            if let Some(o5) = lut.out_o5 {
                write!(out, " O5={}", self.net_name(o5)).unwrap();
            }
            out.push('\n');
        }
        for cc in &self.carries {
            writeln!(
                out,
                "CARRY {}/{} S={} DI={} CI={} O={} CO={}",
                cc.chain,
                cc.pos,
                self.net_name(cc.s_in),
                self.net_name(cc.di_in),
                self.net_name(cc.ci_in),
                self.net_name(cc.o_out),
                self.net_name(cc.co_out)
            )
            .unwrap();
        }
        out
    }
}

struct Interner {
    names: Vec<String>,
    by_name: HashMap<String, NetId>,
}

impl Interner {
    fn get(&mut self, name: &str) -> NetId {
        if let Some(id) = self.by_name.get(name) {
            return *id;
        }
        let id = self.names.len() as NetId;
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }
}

fn field<'a>(part: Option<&'a str>, key: &str, line: usize) -> Result<&'a str, NetlistError> {
    let part = part.ok_or_else(|| NetlistError::Parse {
        line,
        msg: format!("missing {key}"),
    })?;
    part.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| NetlistError::Parse {
            line,
            msg: format!("expected `{key}=...`, got `{part}`"),
        })
}

/// Parse text produced by [`Netlist::dump`].
pub fn parse_dump(text: &str) -> Result<Netlist, NetlistError> {
    let perr = |line: usize, msg: String| NetlistError::Parse { line, msg };
    let mut nets = Interner {
        names: Vec::new(),
        by_name: HashMap::new(),
    };
    let const0 = nets.get("0");
    let const1 = nets.get("1");
    let in_x: [NetId; 8] = std::array::from_fn(|k| nets.get(&format!("x{k}")));
    let in_y: [NetId; 8] = std::array::from_fn(|k| nets.get(&format!("y{k}")));

    let mut format: Option<FpFormat> = None;
    let mut zero_policy = ZeroPolicy::FlushSubnormals;
    let mut out_sign = None;
    let mut out_exp = Vec::new();
    let mut out_man = Vec::new();
    let mut luts = Vec::new();
    let mut carries = Vec::new();

    for (lineno, raw_line) in text.lines().enumerate() {
        let no = lineno + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next().unwrap() {
            "NETLIST" => {
                for part in parts {
                    if let Some(v) = part.strip_prefix("format=") {
                        format = Some(v.parse().map_err(|e| perr(no, format!("{e}")))?);
                    } else if let Some(v) = part.strip_prefix("zero-policy=") {
                        zero_policy = match v {
                            "ftz" => ZeroPolicy::FlushSubnormals,
                            "raw" => ZeroPolicy::RawBits,
                            other => {
                                return Err(perr(no, format!("unknown zero-policy `{other}`")))
                            }
                        };
                    }
                }
            }
            "INPUTS" => {}
            "OUTPUTS" => {
                fn rev_bits(nets: &mut Interner, list: &str) -> Vec<NetId> {
                    let mut ids: Vec<NetId> = list.split(',').map(|n| nets.get(n)).collect();
                    ids.reverse(); // dump is MSB first, internal order is LSB first
                    ids
                }
                out_sign = Some(nets.get(field(parts.next(), "sign", no)?));
                out_exp = rev_bits(&mut nets, field(parts.next(), "pe", no)?);
                out_man = rev_bits(&mut nets, field(parts.next(), "pm", no)?);
            }
            "LUT" => {
                let role = parts
                    .next()
                    .and_then(LutRole::from_letter)
                    .ok_or_else(|| perr(no, "bad LUT role".into()))?;
                let init = u64::from_str_radix(field(parts.next(), "INIT", no)?, 16)
                    .map_err(|e| perr(no, format!("bad INIT: {e}")))?;
                let in_list = field(parts.next(), "IN", no)?;
                let mut inputs = [None; 6];
                for (k, name) in in_list.split(',').enumerate() {
                    if k >= 6 {
                        return Err(perr(no, "more than 6 LUT inputs".into()));
                    }
                    if name != "-" {
                        inputs[k] = Some(nets.get(name));
                    }
                }
                let out_o6 = nets.get(field(parts.next(), "O6", no)?);
                let out_o5 = match parts.next() {
                    Some(p) => Some(nets.get(field(Some(p), "O5", no)?)),
                    None => None,
                };
                luts.push(LutPrim {
                    role,
                    init,
                    inputs,
                    out_o6,
                    out_o5,
                });
            }
            "CARRY" => {
                let pos_part = parts
                    .next()
                    .ok_or_else(|| perr(no, "missing chain/pos".into()))?;
                let (chain, pos) = pos_part
                    .split_once('/')
                    .and_then(|(c, p)| Some((c.parse().ok()?, p.parse().ok()?)))
                    .ok_or_else(|| perr(no, format!("bad chain/pos `{pos_part}`")))?;
                let s_in = nets.get(field(parts.next(), "S", no)?);
                let di_in = nets.get(field(parts.next(), "DI", no)?);
                let ci_in = nets.get(field(parts.next(), "CI", no)?);
                let o_out = nets.get(field(parts.next(), "O", no)?);
                let co_out = nets.get(field(parts.next(), "CO", no)?);
                carries.push(CarryElem {
                    chain,
                    pos,
                    s_in,
                    di_in,
                    ci_in,
                    o_out,
                    co_out,
                });
            }
            other => return Err(perr(no, format!("unknown record `{other}`"))),
        }
    }

    let format = format.ok_or_else(|| perr(0, "missing NETLIST header".into()))?;
    let out_sign = out_sign.ok_or_else(|| perr(0, "missing OUTPUTS line".into()))?;
    let mut n = Netlist {
        format,
        zero_policy,
        luts,
        carries,
        names: nets.names,
        in_x,
        in_y,
        const0,
        const1,
        out_sign,
        out_exp,
        out_man,
        topo: Vec::new(),
    };
    n.check_single_driver()?;
    n.sort_topological()?;
    Ok(n)
}
