//! μProgram representation, validation, execution and the compact template
//! encoding used by the μProgram store.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dram::{check_step, step_cost, BankConfig, BankState, DramError, Step, StepStats, TimingEnergyConfig};
use crate::mapping::MappingKind;

/// Global μProgram index: 4-bit opcode in bits 8..12, 8-bit index below.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GbIdx(pub u16);

impl GbIdx {
    pub fn new(opcode: u8, index: u8) -> GbIdx {
        GbIdx((((opcode & 0x0f) as u16) << 8) | index as u16)
    }

    pub fn opcode(&self) -> u8 {
        ((self.0 >> 8) & 0x0f) as u8
    }

    pub fn index(&self) -> u8 {
        (self.0 & 0xff) as u8
    }
}

impl std::fmt::Display for GbIdx {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "0x{:03x}", self.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecStats {
    pub aap_cycles: u64,
    pub rbm_cycles: u64,
    pub latency_ns: f64,
    pub energy_nj: f64,
    pub tfaw_stall_ns: f64,
}

impl ExecStats {
    pub fn add(&mut self, s: &StepStats) {
        self.aap_cycles += s.aap_cycles;
        self.rbm_cycles += s.rbm_cycles;
        self.latency_ns += s.latency_ns;
        self.energy_nj += s.energy_nj;
        self.tfaw_stall_ns += s.tfaw_stall_ns;
    }

    pub fn merge(&mut self, o: &ExecStats) {
        self.aap_cycles += o.aap_cycles;
        self.rbm_cycles += o.rbm_cycles;
        self.latency_ns += o.latency_ns;
        self.energy_nj += o.energy_nj;
        self.tfaw_stall_ns += o.tfaw_stall_ns;
    }

    pub fn scaled(&self, k: u64) -> ExecStats {
        ExecStats {
            aap_cycles: self.aap_cycles * k,
            rbm_cycles: self.rbm_cycles * k,
            latency_ns: self.latency_ns * k as f64,
            energy_nj: self.energy_nj * k as f64,
            tfaw_stall_ns: self.tfaw_stall_ns * k as f64,
        }
    }
}

/// Where an operand sits relative to the program's rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    /// `bits` bit rows starting at `base`, laid out per the program mapping.
    Vert { base: usize, bits: usize },
    /// A single row in a fixed subarray (carry-out, flags).
    Row { sub: usize, row: usize },
    /// `bits` consecutive rows of one subarray, whatever the mapping.
    Stack { sub: usize, base: usize, bits: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Operand {
    pub name: String,
    pub slot: Slot,
}

impl Operand {
    pub fn vert(name: &str, base: usize, bits: usize) -> Operand {
        Operand { name: name.into(), slot: Slot::Vert { base, bits } }
    }

    pub fn row(name: &str, sub: usize, row: usize) -> Operand {
        Operand { name: name.into(), slot: Slot::Row { sub, row } }
    }

    pub fn bits(&self) -> usize {
        match self.slot {
            Slot::Vert { bits, .. } | Slot::Stack { bits, .. } => bits,
            Slot::Row { .. } => 1,
        }
    }
}

/// Compact, parameterized form of a library μProgram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Template {
    pub id: GbIdx,
    pub alg: u8,
    pub n: u8,
    pub mapping: MappingKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub aap_cycles: u64,
    pub rbm_cycles: u64,
    /// AAP cycles added on top of the underlying adder (subtraction).
    pub overhead_aap: u64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroProgram {
    pub template: Template,
    pub steps: Vec<Step>,
    pub precision: usize,
    pub mapping: MappingKind,
    /// Copies of the program running side by side (ABPS).
    pub replicas: usize,
    pub inputs: Vec<Operand>,
    pub outputs: Vec<Operand>,
    pub meta: Meta,
}

impl MicroProgram {
    pub fn id(&self) -> GbIdx {
        self.template.id
    }

    /// Fill the expected counts from the step list.
    pub fn seal(mut self) -> MicroProgram {
        let (a, r) = count_cycles(&self);
        self.meta.aap_cycles = a;
        self.meta.rbm_cycles = r;
        self
    }

    pub fn output(&self, name: &str) -> Option<&Operand> {
        self.outputs.iter().find(|o| o.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub step: usize,
    pub message: String,
}

pub fn validate(up: &MicroProgram, cfg: &BankConfig) -> Vec<Diagnostic> {
    up.steps
        .iter()
        .enumerate()
        .flat_map(|(i, st)| check_step(st, cfg).into_iter().map(move |m| Diagnostic { step: i, message: m }))
        .collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExecError {
    #[error("step {step}: {message}")]
    Invalid { step: usize, message: String },
    #[error(transparent)]
    Dram(#[from] DramError),
}

pub fn execute(up: &MicroProgram, bank: &mut BankState, t: &TimingEnergyConfig) -> Result<ExecStats, ExecError> {
    if let Some(d) = validate(up, bank.config()).into_iter().next() {
        return Err(ExecError::Invalid { step: d.step, message: d.message });
    }
    let mut stats = ExecStats::default();
    for st in &up.steps {
        stats.add(&bank.salp_step(st, t)?);
    }
    Ok(stats)
}

/// Static (AAP, RBM) cycle counts.
pub fn count_cycles(up: &MicroProgram) -> (u64, u64) {
    up.steps.iter().fold((0, 0), |(a, r), st| {
        let has_rbm = st.values().any(|p| p.is_rbm());
        let has_aap = st.values().any(|p| !p.is_rbm());
        (a + has_aap as u64, r + has_rbm as u64)
    })
}

/// Static cost; equal to what `execute` reports.
pub fn static_cost(up: &MicroProgram, cfg: &BankConfig, t: &TimingEnergyConfig) -> ExecStats {
    let mut s = ExecStats::default();
    for st in &up.steps {
        s.add(&step_cost(st, cfg, t));
    }
    s
}

pub const RECORD_BYTES: usize = 128;
const MAGIC: u8 = 0xb5;
const VERSION: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

/// Fixed 128-byte record: magic, version, GbIdx (LE), alg, N, mapping, zero padding.
pub fn serialize(t: &Template) -> Vec<u8> {
    let mut out = vec![0u8; RECORD_BYTES];
    out[0] = MAGIC;
    out[1] = VERSION;
    out[2..4].copy_from_slice(&t.id.0.to_le_bytes());
    out[4] = t.alg;
    out[5] = t.n;
    out[6] = t.mapping.code();
    out
}

pub fn deserialize(bytes: &[u8]) -> Result<Template, ParseError> {
    let err = |offset, m: &str| ParseError { offset, message: m.to_string() };
    let need = |i: usize| if bytes.len() <= i { Err(err(bytes.len(), "truncated record")) } else { Ok(bytes[i]) };
    if need(0)? != MAGIC {
        return Err(err(0, "bad magic"));
    }
    if need(1)? != VERSION {
        return Err(err(1, "unsupported version"));
    }
    let id = u16::from_le_bytes([need(2)?, need(3)?]);
    if id >> 12 != 0 {
        return Err(err(3, "GbIdx wider than 12 bits"));
    }
    let alg = need(4)?;
    let n = need(5)?;
    let mapping = MappingKind::from_code(need(6)?).ok_or_else(|| err(6, "unknown mapping"))?;
    if bytes.len() < RECORD_BYTES {
        return Err(err(bytes.len(), "truncated record"));
    }
    Ok(Template { id: GbIdx(id), alg, n, mapping })
}

/// A store file is a plain concatenation of records.
pub fn serialize_store(ts: &[Template]) -> Vec<u8> {
    ts.iter().flat_map(serialize).collect()
}

pub fn deserialize_store(bytes: &[u8]) -> Result<Vec<Template>, ParseError> {
    let mut out = Vec::new();
    let mut off = 0;
    while off < bytes.len() {
        let t = deserialize(&bytes[off..]).map_err(|e| ParseError { offset: off + e.offset, ..e })?;
        out.push(t);
        off += RECORD_BYTES;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpl() -> Template {
        Template { id: GbIdx::new(3, 7), alg: 2, n: 32, mapping: MappingKind::Obps }
    }

    #[test]
    fn gbidx_fields() {
        let g = GbIdx::new(0xa, 0x42);
        assert_eq!((g.opcode(), g.index()), (0xa, 0x42));
    }

    #[test]
    fn record_round_trip() {
        let b = serialize(&tmpl());
        assert!(b.len() <= 128);
        assert_eq!(deserialize(&b), Ok(tmpl()));
    }

    #[test]
    fn truncated_record() {
        let b = serialize(&tmpl());
        let e = deserialize(&b[..5]).unwrap_err();
        assert_eq!(e.offset, 5);
        let e = deserialize_store(&b[..100]).unwrap_err();
        assert_eq!(e.offset, 100);
    }

    #[test]
    fn store_offsets() {
        let mut s = serialize_store(&[tmpl(), tmpl()]);
        s[128 + 6] = 0x55;
        assert_eq!(deserialize_store(&s).unwrap_err().offset, 134);
    }

    #[test]
    fn empty_program_is_valid() {
        let up = MicroProgram {
            template: tmpl(),
            steps: vec![],
            precision: 4,
            mapping: MappingKind::Abos,
            replicas: 1,
            inputs: vec![],
            outputs: vec![],
            meta: Meta::default(),
        };
        assert!(validate(&up, &BankConfig::default()).is_empty());
        assert_eq!(count_cycles(&up), (0, 0));
    }
}
