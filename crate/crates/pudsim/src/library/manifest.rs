//! The 50-entry μProgram manifest and template expansion.

use serde::{Deserialize, Serialize};

use super::{
    build_add, build_div, build_logic, build_mul, build_sub, convert, reduce, AdderAlgorithm, LibError, LogicOp, MulKind,
    MulMethod,
};
use crate::dram::BankConfig;
use crate::mapping::MappingKind;
use crate::uprog::{GbIdx, MicroProgram, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Opcode {
    Add = 0,
    Sub = 1,
    Mul = 2,
    Div = 3,
    And = 4,
    Or = 5,
    Xor = 6,
    Not = 7,
    RedSum = 8,
    Convert = 9,
}

impl Opcode {
    pub const ALL: [Opcode; 10] = [
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::Div,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Not,
        Opcode::RedSum,
        Opcode::Convert,
    ];

    pub fn code(&self) -> u8 {
        *self as u8
    }

    pub fn from_code(c: u8) -> Option<Opcode> {
        Self::ALL.into_iter().find(|o| o.code() == c)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Opcode::Add => "add",
            Opcode::Sub => "sub",
            Opcode::Mul => "mul",
            Opcode::Div => "div",
            Opcode::And => "and",
            Opcode::Or => "or",
            Opcode::Xor => "xor",
            Opcode::Not => "not",
            Opcode::RedSum => "red_sum",
            Opcode::Convert => "convert",
        }
    }

    pub fn parse(s: &str) -> Option<Opcode> {
        Self::ALL.into_iter().find(|o| o.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Alg {
    RcaAbos = 0,
    RcaObps = 1,
    CarrySelect = 2,
    KoggeStone = 3,
    BrentKung = 4,
    LadnerFischer = 5,
    Rbr = 6,
    Booth = 7,
    Karatsuba = 8,
    Restoring = 9,
    Bitwise = 10,
    RedAuto = 11,
    RedUser = 12,
    TwosToRbr = 13,
    RbrToTwos = 14,
    RbrToTwosKs = 15,
    AbosToObps = 16,
}

impl Alg {
    const ALL: [Alg; 17] = [
        Alg::RcaAbos,
        Alg::RcaObps,
        Alg::CarrySelect,
        Alg::KoggeStone,
        Alg::BrentKung,
        Alg::LadnerFischer,
        Alg::Rbr,
        Alg::Booth,
        Alg::Karatsuba,
        Alg::Restoring,
        Alg::Bitwise,
        Alg::RedAuto,
        Alg::RedUser,
        Alg::TwosToRbr,
        Alg::RbrToTwos,
        Alg::RbrToTwosKs,
        Alg::AbosToObps,
    ];

    pub fn code(&self) -> u8 {
        *self as u8
    }

    pub fn from_code(c: u8) -> Option<Alg> {
        Self::ALL.into_iter().find(|a| a.code() == c)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Alg::RcaAbos => "RCA_ABOS",
            Alg::RcaObps => "RCA_OBPS",
            Alg::CarrySelect => "CARRY_SELECT",
            Alg::KoggeStone => "KOGGE_STONE",
            Alg::BrentKung => "BRENT_KUNG",
            Alg::LadnerFischer => "LADNER_FISCHER",
            Alg::Rbr => "RBR",
            Alg::Booth => "BOOTH",
            Alg::Karatsuba => "KARATSUBA",
            Alg::Restoring => "RESTORING",
            Alg::Bitwise => "BITWISE",
            Alg::RedAuto => "RED_AUTO",
            Alg::RedUser => "RED_USER",
            Alg::TwosToRbr => "TWOS_TO_RBR",
            Alg::RbrToTwos => "RBR_TO_TWOS",
            Alg::RbrToTwosKs => "RBR_TO_TWOS_KS",
            Alg::AbosToObps => "ABOS_TO_OBPS",
        }
    }

    pub fn adder(&self) -> Option<AdderAlgorithm> {
        Some(match self {
            Alg::RcaAbos => AdderAlgorithm::RcaAbos,
            Alg::RcaObps => AdderAlgorithm::RcaObps,
            Alg::CarrySelect => AdderAlgorithm::CarrySelect,
            Alg::KoggeStone => AdderAlgorithm::KoggeStone,
            Alg::BrentKung => AdderAlgorithm::BrentKung,
            Alg::LadnerFischer => AdderAlgorithm::LadnerFischer,
            Alg::Rbr => AdderAlgorithm::Rbr,
            _ => return None,
        })
    }
}

impl From<AdderAlgorithm> for Alg {
    fn from(a: AdderAlgorithm) -> Alg {
        match a {
            AdderAlgorithm::RcaAbos => Alg::RcaAbos,
            AdderAlgorithm::RcaObps => Alg::RcaObps,
            AdderAlgorithm::CarrySelect => Alg::CarrySelect,
            AdderAlgorithm::KoggeStone => Alg::KoggeStone,
            AdderAlgorithm::BrentKung => Alg::BrentKung,
            AdderAlgorithm::LadnerFischer => Alg::LadnerFischer,
            AdderAlgorithm::Rbr => Alg::Rbr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: GbIdx,
    pub opcode: Opcode,
    pub alg: Alg,
    pub mapping: MappingKind,
    pub min_bits: usize,
    pub max_bits: usize,
    pub pow2: bool,
}

impl ManifestEntry {
    /// Whether the template can be expanded at `n` bits on `cfg`.
    pub fn supports(&self, n: usize, cfg: &BankConfig) -> bool {
        if n < self.min_bits || n > self.max_bits || (self.pow2 && !n.is_power_of_two()) {
            return false;
        }
        let subs = cfg.subarrays_per_bank;
        match self.mapping {
            MappingKind::Obps => n <= subs,
            MappingKind::WrapObps(k) => n.div_ceil(k as usize) <= subs,
            _ => true,
        }
    }

    pub fn template(&self, n: usize) -> Template {
        Template { id: self.id, alg: self.alg.code(), n: n as u8, mapping: self.mapping }
    }
}

const W2: MappingKind = MappingKind::WrapObps(2);
const W4: MappingKind = MappingKind::WrapObps(4);

fn rows() -> Vec<(Opcode, Alg, MappingKind, usize, usize, bool)> {
    use Alg::*;
    use MappingKind::*;
    let adders = |op| {
        vec![
            (op, RcaAbos, Abos, 1, 64, false),
            (op, RcaAbos, Abps, 1, 64, false),
            (op, RcaObps, Obps, 1, 64, false),
            (op, RcaObps, W2, 1, 64, false),
            (op, RcaObps, W4, 1, 64, false),
            (op, CarrySelect, Obps, 2, 64, false),
            (op, KoggeStone, Obps, 2, 64, true),
            (op, BrentKung, Obps, 2, 64, true),
            (op, LadnerFischer, Obps, 2, 64, true),
            (op, Rbr, Obps, 2, 64, false),
        ]
    };
    let mut v = adders(Opcode::Add);
    v.extend(adders(Opcode::Sub));
    v.extend([
        (Opcode::Mul, Booth, Abos, 1, 32, false),
        (Opcode::Mul, Booth, Abps, 1, 32, false),
        (Opcode::Mul, Karatsuba, Abos, 4, 32, true),
        (Opcode::Mul, Karatsuba, Abps, 4, 32, true),
        (Opcode::Div, Restoring, Abos, 1, 64, false),
        (Opcode::Div, Restoring, Abps, 1, 64, false),
    ]);
    for op in [Opcode::And, Opcode::Or, Opcode::Xor, Opcode::Not] {
        for m in [Abos, Abps, Obps, W2] {
            v.push((op, Bitwise, m, 1, 64, false));
        }
    }
    v.extend([
        (Opcode::RedSum, RedAuto, Abos, 1, 63, false),
        (Opcode::RedSum, RedAuto, Abps, 1, 63, false),
        (Opcode::RedSum, RedUser, Abos, 1, 64, false),
        (Opcode::RedSum, RedUser, Abps, 1, 64, false),
        (Opcode::Convert, TwosToRbr, Obps, 2, 64, false),
        (Opcode::Convert, RbrToTwos, Obps, 2, 63, false),
        (Opcode::Convert, RbrToTwosKs, Obps, 2, 32, true),
        (Opcode::Convert, AbosToObps, Obps, 1, 64, false),
    ]);
    v
}

/// All library templates, GbIdx = opcode ‖ per-opcode index.
pub fn manifest() -> Vec<ManifestEntry> {
    let mut next = [0u8; 16];
    rows()
        .into_iter()
        .map(|(opcode, alg, mapping, min_bits, max_bits, pow2)| {
            let i = &mut next[opcode.code() as usize];
            let id = GbIdx::new(opcode.code(), *i);
            *i += 1;
            ManifestEntry { id, opcode, alg, mapping, min_bits, max_bits, pow2 }
        })
        .collect()
}

pub fn entry(id: GbIdx) -> Option<ManifestEntry> {
    manifest().into_iter().find(|e| e.id == id)
}

/// Template for a built program; programs outside the manifest get index 0xff.
pub fn template(op: Opcode, alg: Alg, mapping: MappingKind, n: usize) -> Template {
    let id = manifest()
        .into_iter()
        .find(|e| e.opcode == op && e.alg == alg && e.mapping == mapping)
        .map(|e| e.id)
        .unwrap_or(GbIdx::new(op.code(), 0xff));
    Template { id, alg: alg.code(), n: n as u8, mapping }
}

/// Build the μProgram a template describes.
pub fn expand(t: &Template, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    let n = t.n as usize;
    let op = Opcode::from_code(t.id.opcode()).ok_or(LibError::Width(n))?;
    let alg = Alg::from_code(t.alg).ok_or(LibError::Width(n))?;
    let m = t.mapping;
    match (op, alg) {
        (Opcode::Add, a) => build_add(a.adder().ok_or(LibError::Width(n))?, n, m, cfg),
        (Opcode::Sub, a) => build_sub(a.adder().ok_or(LibError::Width(n))?, n, m, cfg),
        (Opcode::Mul, a) => {
            let method = if a == Alg::Karatsuba { MulKind::Karatsuba } else { MulKind::Booth };
            build_mul(MulMethod { method, inner_adder: AdderAlgorithm::RcaAbos, mapping: m }, n, cfg)
        }
        (Opcode::Div, _) => build_div(n, m, cfg),
        (Opcode::And, _) => build_logic(LogicOp::And, n, m, cfg),
        (Opcode::Or, _) => build_logic(LogicOp::Or, n, m, cfg),
        (Opcode::Xor, _) => build_logic(LogicOp::Xor, n, m, cfg),
        (Opcode::Not, _) => build_logic(LogicOp::Not, n, m, cfg),
        (Opcode::RedSum, a) => reduce::level_program(n, a == Alg::RedAuto, m, cfg),
        (Opcode::Convert, Alg::TwosToRbr) => convert::convert_twos_to_rbr(n, cfg),
        (Opcode::Convert, Alg::RbrToTwos) => convert::convert_rbr_to_twos(n, AdderAlgorithm::RcaObps, cfg),
        (Opcode::Convert, Alg::RbrToTwosKs) => convert::convert_rbr_to_twos(n, AdderAlgorithm::KoggeStone, cfg),
        (Opcode::Convert, _) => convert::distribute_program(n, cfg),
    }
}
