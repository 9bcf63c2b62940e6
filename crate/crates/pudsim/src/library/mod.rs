//! Arithmetic μProgram constructors and a small runner that places
//! operands, executes a program and gathers its outputs.

mod adders;
mod arith;
mod builder;
mod convert;
mod manifest;
mod reduce;

pub use adders::{build_add, build_sub};
pub use arith::{build_div, build_logic, build_mul, LogicOp, MulMethod, MulKind};
pub use convert::{convert_rbr_to_twos, convert_twos_to_rbr, distribute_program, rbr_result, RbrNumber};
pub use manifest::{entry, expand, manifest, template, Alg, ManifestEntry, Opcode};
pub use reduce::{build_reduction, Reduction, ReductionMode, ReductionResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dram::{BankState, DramError, TimingEnergyConfig};
use crate::mapping::MappingKind;
use crate::uprog::{execute, ExecError, ExecStats, MicroProgram, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AdderAlgorithm {
    RcaAbos,
    RcaObps,
    CarrySelect,
    KoggeStone,
    BrentKung,
    LadnerFischer,
    Rbr,
}

impl AdderAlgorithm {
    pub const ALL: [AdderAlgorithm; 7] = [
        AdderAlgorithm::RcaAbos,
        AdderAlgorithm::RcaObps,
        AdderAlgorithm::CarrySelect,
        AdderAlgorithm::KoggeStone,
        AdderAlgorithm::BrentKung,
        AdderAlgorithm::LadnerFischer,
        AdderAlgorithm::Rbr,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AdderAlgorithm::RcaAbos => "RCA_ABOS",
            AdderAlgorithm::RcaObps => "RCA_OBPS",
            AdderAlgorithm::CarrySelect => "CARRY_SELECT",
            AdderAlgorithm::KoggeStone => "KOGGE_STONE",
            AdderAlgorithm::BrentKung => "BRENT_KUNG",
            AdderAlgorithm::LadnerFischer => "LADNER_FISCHER",
            AdderAlgorithm::Rbr => "RBR",
        }
    }

    pub fn parse(s: &str) -> Option<AdderAlgorithm> {
        Self::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }

    /// Mapping the algorithm runs on by default.
    pub fn mapping(&self) -> MappingKind {
        match self {
            AdderAlgorithm::RcaAbos => MappingKind::Abos,
            _ => MappingKind::Obps,
        }
    }

    /// Log-depth adders need a power-of-two width.
    pub fn needs_pow2(&self) -> bool {
        matches!(self, AdderAlgorithm::KoggeStone | AdderAlgorithm::BrentKung | AdderAlgorithm::LadnerFischer)
    }

    pub fn min_bits(&self) -> usize {
        match self {
            AdderAlgorithm::RcaAbos | AdderAlgorithm::RcaObps => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LibError {
    #[error("{alg} does not support {mapping}")]
    Unsupported { alg: String, mapping: String },
    #[error("width {0} not supported here")]
    Width(usize),
    #[error("bank too small: {0}")]
    Bank(String),
    #[error("operand count mismatch: expected {expected}, got {got}")]
    Operands { expected: usize, got: usize },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Dram(#[from] DramError),
}

fn slot_loc(up: &MicroProgram, slot: Slot, bit: usize, replica: usize) -> (usize, usize) {
    match slot {
        Slot::Row { sub, row } => (sub + replica, row),
        Slot::Stack { sub, base, .. } => (sub + replica, base + bit),
        Slot::Vert { base, bits } => match up.mapping {
            MappingKind::Abos | MappingKind::Abps => (replica, base + bit),
            MappingKind::Obps => (bit, base),
            MappingKind::WrapObps(k) => {
                let used = bits.div_ceil(k as usize);
                (bit % used, base + bit / used)
            }
        },
    }
}

/// Place `inputs` (one slice per program input, equal lengths), execute the
/// program once per column batch and gather every output.
pub fn run(
    bank: &mut BankState,
    up: &MicroProgram,
    t: &TimingEnergyConfig,
    inputs: &[&[u64]],
) -> Result<(Vec<Vec<u64>>, ExecStats), LibError> {
    if inputs.len() != up.inputs.len() {
        return Err(LibError::Operands { expected: up.inputs.len(), got: inputs.len() });
    }
    let n = inputs.first().map_or(0, |v| v.len());
    let cols = bank.config().columns_per_row;
    let words = bank.config().words_per_row();
    let per_exec = cols * up.replicas.max(1);
    let mut outs: Vec<Vec<u64>> = vec![Vec::with_capacity(n); up.outputs.len()];
    let mut stats = ExecStats::default();
    let mut start = 0;
    while start < n {
        let end = (start + per_exec).min(n);
        for (op, data) in up.inputs.iter().zip(inputs) {
            for r in 0..up.replicas.max(1) {
                let lo = start + r * cols;
                let hi = (lo + cols).min(end);
                for b in 0..op.bits() {
                    let mut row = vec![0u64; words];
                    for e in lo..hi.max(lo) {
                        if (data[e] >> b) & 1 == 1 {
                            let c = e - lo;
                            row[c / 64] |= 1 << (c % 64);
                        }
                    }
                    let (s, rw) = slot_loc(up, op.slot, b, r);
                    bank.write_row(s, rw, &row)?;
                }
            }
        }
        stats.merge(&execute(up, bank, t)?);
        for (k, op) in up.outputs.iter().enumerate() {
            for r in 0..up.replicas.max(1) {
                let lo = start + r * cols;
                let hi = (lo + cols).min(end);
                for e in lo..hi.max(lo) {
                    let c = e - lo;
                    let v = (0..op.bits()).fold(0u64, |acc, b| {
                        let (s, rw) = slot_loc(up, op.slot, b, r);
                        acc | ((bank.bit(s, rw, c) as u64) << b)
                    });
                    outs[k].push(v);
                }
            }
        }
        start = end;
    }
    Ok((outs, stats))
}

/// Mask of the low `bits` bits.
pub fn mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}
