//! Dynamic bit-precision engine: object tracker, eviction-time extreme value
//! scanning, per-operation output widths and carry-driven reduction growth.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::library::Opcode;
use crate::mapping::sign_extend;

pub const LINE_BYTES: usize = 64;
/// 8 kB of 128-bit tracker lines.
pub const TRACKER_ENTRIES: usize = 8 * 1024 / 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PrecisionError {
    #[error("cache line at byte {0} is not 64-byte aligned")]
    Misaligned(u64),
    #[error("cache line at byte {addr} is outside object {object}")]
    OutOfRange { object: String, addr: u64 },
    #[error("declared precision {0} outside 1..=64")]
    Declared(usize),
    #[error("no extremes known for {0}")]
    Unknown(String),
    #[error("{0} has no precision rule")]
    Opcode(String),
    #[error("{opcode} takes {want} operands, got {got}")]
    Arity { opcode: String, want: usize, got: usize },
    #[error("tracker full of live objects")]
    Full,
    #[error("object {0} not tracked")]
    Missing(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectTrackerEntry {
    pub object_id: String,
    pub base_address: u64,
    pub size: usize,
    pub declared_precision: usize,
    /// None until a line has been scanned or a value propagated.
    pub max_value: Option<i64>,
    pub min_value: Option<i64>,
    /// Holds results not yet read back by the host.
    pub dirty: bool,
}

impl ObjectTrackerEntry {
    pub fn new(object_id: &str, base_address: u64, size: usize, declared_precision: usize) -> Result<Self, PrecisionError> {
        if !(1..=64).contains(&declared_precision) {
            return Err(PrecisionError::Declared(declared_precision));
        }
        Ok(ObjectTrackerEntry {
            object_id: object_id.to_string(),
            base_address,
            size,
            declared_precision,
            max_value: None,
            min_value: None,
            dirty: false,
        })
    }

    pub fn extremes(&self) -> Result<(i64, i64), PrecisionError> {
        match (self.max_value, self.min_value) {
            (Some(a), Some(b)) => Ok((a, b)),
            _ => Err(PrecisionError::Unknown(self.object_id.clone())),
        }
    }

    /// Forget the extremes, as on read-back to the host.
    pub fn reset(&mut self) {
        self.max_value = None;
        self.min_value = None;
        self.dirty = false;
    }

    pub fn end_address(&self) -> u64 {
        self.base_address + 8 * self.size as u64
    }
}

/// Compare every value of one evicted line against the entry's extremes.
/// Elements are 64-bit little-endian words read at the declared width.
/// Words past the object's end are ignored. Returns the scan energy.
pub fn scan_cache_line(
    entry: &mut ObjectTrackerEntry,
    addr: u64,
    line: &[u8; LINE_BYTES],
    e_scan_per_line: f64,
) -> Result<f64, PrecisionError> {
    if !addr.is_multiple_of(LINE_BYTES as u64) {
        return Err(PrecisionError::Misaligned(addr));
    }
    if addr < entry.base_address || addr >= entry.end_address() {
        return Err(PrecisionError::OutOfRange { object: entry.object_id.clone(), addr });
    }
    for (i, w) in line.chunks_exact(8).enumerate() {
        if addr + 8 * i as u64 >= entry.end_address() {
            break;
        }
        let raw = u64::from_le_bytes(w.try_into().expect("8-byte chunk"));
        let v = sign_extend(raw, entry.declared_precision);
        entry.max_value = Some(entry.max_value.map_or(v, |m| m.max(v)));
        entry.min_value = Some(entry.min_value.map_or(v, |m| m.min(v)));
    }
    Ok(e_scan_per_line)
}

/// Scan a whole object in address order. Returns (lines, energy).
pub fn scan_object(entry: &mut ObjectTrackerEntry, data: &[u64], e_scan_per_line: f64) -> Result<(usize, f64), PrecisionError> {
    let mut energy = 0.0;
    let mut lines = 0;
    for (k, chunk) in data.chunks(LINE_BYTES / 8).enumerate() {
        let mut line = [0u8; LINE_BYTES];
        for (i, w) in chunk.iter().enumerate() {
            line[8 * i..8 * i + 8].copy_from_slice(&w.to_le_bytes());
        }
        energy += scan_cache_line(entry, entry.base_address + (k * LINE_BYTES) as u64, &line, e_scan_per_line)?;
        lines += 1;
    }
    Ok((lines, energy))
}

fn bit_len(v: u128) -> usize {
    (128 - v.leading_zeros()) as usize
}

/// Storage width of a value with one sign bit: 2 -> 3, -1 -> 1.
fn signed_bits(v: i128) -> usize {
    if v >= 0 {
        bit_len(v as u128) + 1
    } else {
        bit_len(!v as u128) + 1
    }
}

/// Width holding both extremes with a sign bit, clamped to 1..=64.
pub fn required_bits(max_value: i64, min_value: i64) -> usize {
    if max_value == 0 && min_value == 0 {
        return 1;
    }
    let hi = if max_value > 0 { (max_value as u64).ilog2() as usize + 2 } else { 1 };
    let lo = if min_value < 0 { signed_bits(min_value as i128) } else { 1 };
    hi.max(lo).clamp(1, 64)
}

/// Width of a value range: plain binary when nothing is negative, two's
/// complement otherwise.
pub fn range_bits(max_value: i128, min_value: i128) -> usize {
    let w = if min_value >= 0 {
        bit_len(max_value.max(0) as u128).max(1)
    } else {
        signed_bits(max_value).max(signed_bits(min_value))
    };
    w.clamp(1, 64)
}

fn clamp64(v: i128) -> i64 {
    v.clamp(i64::MIN as i128, i64::MAX as i128) as i64
}

/// Output width and propagated extremes for one operation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpPrecision {
    pub bits: usize,
    pub max_value: i64,
    pub min_value: i64,
}

/// Bits for `opcode` from the operands' extremes. Multiplication also keeps
/// each operand representable as a signed value at the chosen width.
pub fn precision_for_op(opcode: Opcode, operands: &[(i64, i64)]) -> Result<OpPrecision, PrecisionError> {
    let want = match opcode {
        Opcode::Not | Opcode::RedSum | Opcode::Convert => 1,
        _ => 2,
    };
    if operands.len() != want {
        return Err(PrecisionError::Arity { opcode: opcode.name().into(), want, got: operands.len() });
    }
    let (a_hi, a_lo) = (operands[0].0 as i128, operands[0].1 as i128);
    let (b_hi, b_lo) = operands.get(1).map_or((0, 0), |&(h, l)| (h as i128, l as i128));
    let operand_bits = |signed: bool| {
        operands
            .iter()
            .map(|&(h, l)| if signed { signed_bits(h as i128).max(signed_bits(l as i128)) } else { range_bits(h as i128, l as i128) })
            .max()
            .unwrap_or(1)
    };
    let (hi, lo, bits) = match opcode {
        Opcode::Add => {
            let (hi, lo) = (a_hi + b_hi, a_lo + b_lo);
            (hi, lo, range_bits(hi, lo))
        }
        Opcode::Sub => {
            let (hi, lo) = (a_hi - b_lo, a_lo - b_hi);
            (hi, lo, range_bits(hi, lo))
        }
        Opcode::Mul => {
            let c = [a_hi * b_hi, a_hi * b_lo, a_lo * b_hi, a_lo * b_lo];
            let (hi, lo) = (*c.iter().max().unwrap(), *c.iter().min().unwrap());
            (hi, lo, range_bits(hi, lo).max(operand_bits(true)))
        }
        Opcode::Div => {
            // unsigned quotient never exceeds the dividend
            let bits = operand_bits(false);
            (a_hi.max(0), 0, bits)
        }
        Opcode::And | Opcode::Or | Opcode::Xor | Opcode::Not => {
            let bits = operand_bits(false);
            let lo = if a_lo < 0 || b_lo < 0 { -(1i128 << (bits - 1)) } else { 0 };
            ((1i128 << bits) - 1, lo, bits)
        }
        Opcode::Convert => (a_hi, a_lo, range_bits(a_hi, a_lo)),
        Opcode::RedSum => return Err(PrecisionError::Opcode(opcode.name().into())),
    };
    Ok(OpPrecision { bits: bits.clamp(1, 64), max_value: clamp64(hi), min_value: clamp64(lo) })
}

/// One more bit if any carry or overflow flag in the row is set.
pub fn reduction_step_precision(carry_row: &[u64], current_bits: usize) -> usize {
    if carry_row.iter().any(|&w| w != 0) {
        current_bits + 1
    } else {
        current_bits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StaticMode {
    /// Use the declared width as is.
    #[default]
    Exact,
    /// Round up to a power of two, as offline profiling would.
    Pow2,
}

pub fn static_precision_path(declared_bits: usize, mode: StaticMode) -> usize {
    match mode {
        StaticMode::Exact => declared_bits,
        StaticMode::Pow2 => declared_bits.next_power_of_two().min(64),
    }
}

/// Fully associative tracker with LRU replacement of clean entries.
#[derive(Debug, Clone, Default)]
pub struct ObjectTracker {
    entries: VecDeque<ObjectTrackerEntry>,
    capacity: usize,
}

impl ObjectTracker {
    pub fn new() -> ObjectTracker {
        ObjectTracker::with_capacity(TRACKER_ENTRIES)
    }

    pub fn with_capacity(capacity: usize) -> ObjectTracker {
        ObjectTracker { entries: VecDeque::new(), capacity: capacity.max(1) }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Register (or replace) an entry; returns the evicted entry, if any.
    pub fn insert(&mut self, e: ObjectTrackerEntry) -> Result<Option<ObjectTrackerEntry>, PrecisionError> {
        if let Some(i) = self.entries.iter().position(|x| x.object_id == e.object_id) {
            self.entries.remove(i);
        }
        let mut evicted = None;
        if self.entries.len() >= self.capacity {
            let i = self.entries.iter().position(|x| !x.dirty).ok_or(PrecisionError::Full)?;
            evicted = self.entries.remove(i);
        }
        self.entries.push_back(e);
        Ok(evicted)
    }

    /// Look up and mark most recently used.
    pub fn get_mut(&mut self, id: &str) -> Result<&mut ObjectTrackerEntry, PrecisionError> {
        let i = self.entries.iter().position(|x| x.object_id == id).ok_or_else(|| PrecisionError::Missing(id.into()))?;
        let e = self.entries.remove(i).expect("index in range");
        self.entries.push_back(e);
        Ok(self.entries.back_mut().expect("just pushed"))
    }

    pub fn get(&self, id: &str) -> Option<&ObjectTrackerEntry> {
        self.entries.iter().find(|x| x.object_id == id)
    }

    /// Host read-back of an object.
    pub fn read_back(&mut self, id: &str) -> Result<(), PrecisionError> {
        self.get_mut(id)?.reset();
        Ok(())
    }

    /// Entries sorted by object id.
    pub fn to_json(&self) -> String {
        let mut v: Vec<&ObjectTrackerEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| a.object_id.cmp(&b.object_id));
        serde_json::to_string_pretty(&v).expect("tracker serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn footnote_width() {
        assert_eq!(required_bits(2, 0), 3);
        assert_eq!(required_bits(0, 0), 1);
        assert_eq!(required_bits(-1, -1), 1);
        assert_eq!(required_bits(i64::MAX, i64::MIN), 64);
    }

    #[test]
    fn worked_example_widths() {
        let add = precision_for_op(Opcode::Add, &[(3, 0), (6, 0)]).unwrap();
        assert_eq!((add.bits, add.max_value), (4, 9));
        let mul = precision_for_op(Opcode::Mul, &[(9, 0), (2, 0)]).unwrap();
        assert_eq!((mul.bits, mul.max_value), (5, 18));
    }

    #[test]
    fn static_rounding() {
        assert_eq!(static_precision_path(13, StaticMode::Pow2), 16);
        assert_eq!(static_precision_path(8, StaticMode::Pow2), 8);
        assert_eq!(static_precision_path(33, StaticMode::Pow2), 64);
        assert_eq!(static_precision_path(13, StaticMode::Exact), 13);
    }

    #[test]
    fn misaligned_line_rejected() {
        let mut e = ObjectTrackerEntry::new("a", 0, 64, 8).unwrap();
        assert_eq!(scan_cache_line(&mut e, 8, &[0; 64], 0.1), Err(PrecisionError::Misaligned(8)));
    }

    #[test]
    fn tracker_evicts_clean_lru() {
        let mut t = ObjectTracker::with_capacity(2);
        t.insert(ObjectTrackerEntry::new("a", 0, 1, 8).unwrap()).unwrap();
        t.insert(ObjectTrackerEntry::new("b", 64, 1, 8).unwrap()).unwrap();
        t.get_mut("a").unwrap();
        let ev = t.insert(ObjectTrackerEntry::new("c", 128, 1, 8).unwrap()).unwrap();
        assert_eq!(ev.unwrap().object_id, "b");
        t.get_mut("a").unwrap().dirty = true;
        t.get_mut("c").unwrap().dirty = true;
        assert_eq!(t.insert(ObjectTrackerEntry::new("d", 192, 1, 8).unwrap()), Err(PrecisionError::Full));
    }
}
