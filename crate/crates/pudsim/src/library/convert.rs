//! Two's complement <-> signed-digit conversion and the ABOS to OBPS
//! distribution program.

use serde::{Deserialize, Serialize};

use super::builder::{aap, ap, rbm, Lanes, Prog};
use super::manifest::{template, Alg, Opcode};
use super::{build_sub, mask, AdderAlgorithm, LibError};
use crate::dram::BankConfig;
use crate::mapping::MappingKind;
use crate::uprog::{Meta, MicroProgram, Operand, Slot};

/// Signed-digit number: digit i is plus[i] - minus[i].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RbrNumber {
    pub plus: u64,
    pub minus: u64,
    pub digits: usize,
}

impl RbrNumber {
    pub fn value(&self) -> i128 {
        self.plus as i128 - self.minus as i128
    }

    /// Sign-magnitude split of a two's complement value.
    pub fn from_twos(v: i64, digits: usize) -> RbrNumber {
        if v < 0 {
            RbrNumber { plus: 0, minus: v.unsigned_abs() & mask(digits), digits }
        } else {
            RbrNumber { plus: v as u64 & mask(digits), minus: 0, digits }
        }
    }
}

const X: usize = 0;
const XP: usize = 1;
const XM: usize = 2;
const MSB: usize = 3;
const SIN: usize = 4;
const NEG: usize = 5;

/// X- = msb & (-X), X+ = !msb & X. The sign row is broadcast down the
/// subarrays; -X keeps every bit up to the lowest set one and flips the
/// rest, so a prefix OR ripples upward.
pub fn convert_twos_to_rbr(n: usize, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    if !(2..=64).contains(&n) || n > cfg.subarrays_per_bank {
        return Err(LibError::Width(n));
    }
    let mut p = Prog::new(cfg);
    let r = p.r;
    let t = r.t;
    p.step([(0, aap(r.c0, SIN)), (n - 1, aap(X, MSB))]);
    for s in (1..n).rev() {
        p.on([s], rbm(s - 1, MSB, MSB));
    }
    p.on(0..n, aap(X, t[0]));
    p.on(0..n, aap(r.c1, t[2]));
    for i in 0..n - 1 {
        p.on([i], aap(SIN, t[1]));
        p.on([i], ap([t[0], t[1], t[2]]));
        p.on([i], rbm(i + 1, t[0], SIN));
    }
    let mut l = Lanes::new(&mut p, (0..n).collect());
    l.xor(X, SIN, NEG);
    l.and(MSB, NEG, XM);
    l.emit(super::builder::not(MSB, r.dcc));
    l.emit(aap(X, t[0]));
    l.emit(aap(r.c0, t[1]));
    l.emit(super::builder::tra([r.dcc, t[0], t[1]], XP));
    Ok(p.finish(
        template(Opcode::Convert, Alg::TwosToRbr, MappingKind::Obps, n),
        n,
        MappingKind::Obps,
        1,
        vec![Operand::vert("X", X, n)],
        vec![Operand::vert("X+", XP, n), Operand::vert("X-", XM, n)],
        Meta::default(),
    ))
}

/// X+ - X- with a subtractor. The (n+1)-bit result is S with !COUT as its
/// sign bit, see [`rbr_result`].
pub fn convert_rbr_to_twos(n: usize, inner: AdderAlgorithm, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    let mut up = build_sub(inner, n, MappingKind::Obps, cfg)?;
    let alg = if inner == AdderAlgorithm::KoggeStone { Alg::RbrToTwosKs } else { Alg::RbrToTwos };
    up.template = template(Opcode::Convert, alg, MappingKind::Obps, n);
    up.inputs[0].name = "X+".into();
    up.inputs[1].name = "X-".into();
    Ok(up)
}

/// Value of a conversion result: S is the low n bits, COUT = 0 means X+ < X-.
pub fn rbr_result(s: u64, cout: u64, n: usize) -> i128 {
    s as i128 - if cout & 1 == 0 { 1i128 << n } else { 0 }
}

/// Static program moving one column batch from ABOS rows 0..n of subarray 0
/// to the OBPS layout (bit b in subarray b, row 0). Farthest bit leaves
/// first; one departure per step.
pub fn distribute_program(n: usize, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    if !(1..=64).contains(&n) || n > cfg.subarrays_per_bank {
        return Err(LibError::Width(n));
    }
    let mut p = Prog::new(cfg);
    let scratch = p.r.s(0);
    // item j carries bit n-1-j
    let items: Vec<usize> = (1..n).rev().collect();
    let last = items.iter().enumerate().map(|(j, &b)| j + b).max().unwrap_or(0);
    for step in 0..last {
        let mut st = Vec::new();
        for (j, &b) in items.iter().enumerate() {
            if step < j || step >= j + b {
                continue;
            }
            let at = step - j;
            let src = if at == 0 { b } else { scratch };
            let dst = if at + 1 == b { 0 } else { scratch };
            st.push((at, rbm(at + 1, src, dst)));
        }
        p.step(st);
    }
    let input = Operand { name: "X".into(), slot: Slot::Stack { sub: 0, base: 0, bits: n } };
    Ok(p.finish(
        template(Opcode::Convert, Alg::AbosToObps, MappingKind::Obps, n),
        n,
        MappingKind::Obps,
        1,
        vec![input],
        vec![Operand::vert("X", 0, n)],
        Meta::default(),
    ))
}
