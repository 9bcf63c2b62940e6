//! Vertical layouts: transposition, placement under the four mappings and
//! the ABOS to OBPS redistribution.
//!
//! Elements are cut into column batches of `columns` elements (row-major).
//! ABOS keeps every batch in subarray 0. ABPS deals whole batches round-robin
//! over the subarrays. OBPS spreads the bits of one batch over a group of
//! consecutive subarrays; several groups run side by side when they fit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dram::{BankConfig, BankState, DramError, Dst, Prim, RowSpec, Step, TimingEnergyConfig};
use crate::uprog::ExecStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MappingKind {
    Abos,
    Abps,
    Obps,
    WrapObps(u8),
}

impl MappingKind {
    pub fn code(&self) -> u8 {
        match *self {
            MappingKind::Abos => 0,
            MappingKind::Abps => 1,
            MappingKind::Obps => 2,
            MappingKind::WrapObps(k) => 0x80 | (k & 0x7f),
        }
    }

    pub fn from_code(c: u8) -> Option<MappingKind> {
        match c {
            0 => Some(MappingKind::Abos),
            1 => Some(MappingKind::Abps),
            2 => Some(MappingKind::Obps),
            c if c & 0x80 != 0 && c & 0x7f != 0 => Some(MappingKind::WrapObps(c & 0x7f)),
            _ => None,
        }
    }

    pub fn name(&self) -> String {
        match self {
            MappingKind::Abos => "ABOS".into(),
            MappingKind::Abps => "ABPS".into(),
            MappingKind::Obps => "OBPS".into(),
            MappingKind::WrapObps(k) => format!("WRAP_OBPS{k}"),
        }
    }

    pub fn parse(s: &str) -> Option<MappingKind> {
        let u = s.to_ascii_uppercase();
        match u.as_str() {
            "ABOS" => Some(MappingKind::Abos),
            "ABPS" => Some(MappingKind::Abps),
            "OBPS" => Some(MappingKind::Obps),
            _ => u
                .strip_prefix("WRAP_OBPS")
                .and_then(|k| k.trim_start_matches(['(', '_']).trim_end_matches(')').parse::<u8>().ok())
                .filter(|k| (1..128).contains(k))
                .map(MappingKind::WrapObps),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("layout needs {need} rows per subarray, {have} available")]
    Capacity { need: usize, have: usize },
    #[error("layout needs {need} subarrays, bank has {have}")]
    Subarrays { need: usize, have: usize },
    #[error("precision {0} outside 1..=64")]
    Precision(usize),
    #[error("expected an ABOS source layout")]
    NotAbos,
    #[error("{0}")]
    Dram(#[from] DramError),
}

/// Where every bit of every element lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutDescriptor {
    pub mapping: MappingKind,
    pub element_count: usize,
    pub precision: usize,
    pub columns: usize,
    pub subarrays: usize,
    pub base_row: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Loc {
    pub sub: usize,
    pub row: usize,
    pub col: usize,
}

impl LayoutDescriptor {
    pub fn new(mapping: MappingKind, element_count: usize, precision: usize, cfg: &BankConfig) -> Self {
        LayoutDescriptor {
            mapping,
            element_count,
            precision,
            columns: cfg.columns_per_row,
            subarrays: cfg.subarrays_per_bank,
            base_row: 0,
        }
    }

    pub fn with_base(mut self, base_row: usize) -> Self {
        self.base_row = base_row;
        self
    }

    pub fn batches(&self) -> usize {
        self.element_count.div_ceil(self.columns).max(1)
    }

    /// Subarrays one batch's bits occupy and bits stacked per subarray.
    fn spread(&self) -> (usize, usize) {
        let p = self.precision;
        let s = self.subarrays;
        match self.mapping {
            MappingKind::Abos | MappingKind::Abps => (1, p),
            MappingKind::Obps if p <= s => (p, 1),
            // too few subarrays: spread the bits evenly
            MappingKind::Obps => {
                let k = p.div_ceil(s);
                (p.div_ceil(k), k)
            }
            MappingKind::WrapObps(k) => {
                let k = (k as usize).max(p.div_ceil(s));
                (p.div_ceil(k), k)
            }
        }
    }

    /// Number of subarrays holding one batch (1 for ABOS/ABPS).
    pub fn subarrays_used(&self) -> usize {
        self.spread().0
    }

    fn groups(&self) -> usize {
        (self.subarrays / self.spread().0).max(1)
    }

    pub fn locate(&self, e: usize, b: usize) -> Loc {
        let c = self.columns;
        let batch = e / c;
        let col = e % c;
        let p = self.precision;
        match self.mapping {
            MappingKind::Abos => Loc { sub: 0, row: self.base_row + batch * p + b, col },
            MappingKind::Abps => {
                let s = self.subarrays;
                Loc { sub: batch % s, row: self.base_row + (batch / s) * p + b, col }
            }
            MappingKind::Obps | MappingKind::WrapObps(_) => {
                let (used, k) = self.spread();
                let g = self.groups();
                let (grp, lb) = (batch % g, batch / g);
                Loc { sub: grp * used + b % used, row: self.base_row + lb * k + b / used, col }
            }
        }
    }

    /// Highest row index used, plus one.
    pub fn row_end(&self) -> usize {
        let b = self.batches();
        let p = self.precision;
        self.base_row
            + match self.mapping {
                MappingKind::Abos => b * p,
                MappingKind::Abps => b.div_ceil(self.subarrays) * p,
                _ => b.div_ceil(self.groups()) * self.spread().1,
            }
    }

    pub fn check(&self, cfg: &BankConfig) -> Result<(), MappingError> {
        if self.precision == 0 || self.precision > 64 {
            return Err(MappingError::Precision(self.precision));
        }
        if self.subarrays > cfg.subarrays_per_bank {
            return Err(MappingError::Subarrays { need: self.subarrays, have: cfg.subarrays_per_bank });
        }
        if self.row_end() > cfg.data_rows() {
            return Err(MappingError::Capacity { need: self.row_end(), have: cfg.data_rows() });
        }
        Ok(())
    }

    /// Cycles one bulk primitive needs to touch every bit of every element.
    pub fn primitive_cycles(&self) -> usize {
        let b = self.batches();
        match self.mapping {
            MappingKind::Abos => self.precision * b,
            MappingKind::Abps => self.precision * b.div_ceil(self.subarrays),
            _ => self.spread().1 * b.div_ceil(self.groups()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("layout serializes")
    }

    pub fn from_json(s: &str) -> Result<LayoutDescriptor, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Cycles for one bulk primitive over `elements` values of `precision` bits.
pub fn primitive_cycles(mapping: MappingKind, elements: usize, precision: usize, cfg: &BankConfig) -> usize {
    LayoutDescriptor::new(mapping, elements, precision, cfg).primitive_cycles()
}

/// Carry wraps from the last hosting subarray back to subarray 0 under
/// Wrap-Around OBPS; each wrap is one chained full-row transfer.
pub fn wrap_carry_transfers(precision: usize, bits_per_subarray: usize) -> usize {
    let used = precision.div_ceil(bits_per_subarray.max(1));
    precision.div_ceil(used) - 1
}

/// Bit-slice matrix: row `b` holds bit `b` of every word, packed 64 per u64.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSlices {
    pub bits: usize,
    pub len: usize,
    pub rows: Vec<Vec<u64>>,
}

impl BitSlices {
    pub fn get(&self, b: usize, e: usize) -> bool {
        (self.rows[b][e / 64] >> (e % 64)) & 1 == 1
    }
}

pub fn transpose_to_vertical(words: &[u64], bits: usize) -> BitSlices {
    assert!(bits <= 64, "at most 64-bit words");
    let nw = words.len().div_ceil(64);
    let mut rows = vec![vec![0u64; nw]; bits];
    for (e, &w) in words.iter().enumerate() {
        for (b, row) in rows.iter_mut().enumerate() {
            row[e / 64] |= ((w >> b) & 1) << (e % 64);
        }
    }
    BitSlices { bits, len: words.len(), rows }
}

pub fn transpose_to_horizontal(s: &BitSlices) -> Vec<u64> {
    (0..s.len)
        .map(|e| (0..s.bits).fold(0u64, |acc, b| acc | ((s.get(b, e) as u64) << b)))
        .collect()
}

/// Write `data` (low `precision` bits of each word) into the bank.
pub fn place(bank: &mut BankState, layout: &LayoutDescriptor, data: &[u64]) -> Result<(), MappingError> {
    layout.check(bank.config())?;
    assert_eq!(data.len(), layout.element_count, "data length must match the layout");
    for (e, &w) in data.iter().enumerate() {
        for b in 0..layout.precision {
            let l = layout.locate(e, b);
            bank.set_bit(l.sub, l.row, l.col, (w >> b) & 1 == 1);
        }
    }
    Ok(())
}

pub fn gather(bank: &BankState, layout: &LayoutDescriptor) -> Vec<u64> {
    (0..layout.element_count)
        .map(|e| {
            (0..layout.precision).fold(0u64, |acc, b| {
                let l = layout.locate(e, b);
                acc | ((bank.bit(l.sub, l.row, l.col) as u64) << b)
            })
        })
        .collect()
}

/// Sign-extend gathered values of `precision` bits.
pub fn sign_extend(v: u64, precision: usize) -> i64 {
    if precision >= 64 {
        return v as i64;
    }
    let sh = 64 - precision;
    ((v << sh) as i64) >> sh
}

/// Move ABOS-placed data into the OBPS layout with pipelined RBM chains.
/// Bit rows leave subarray 0 one per step, farthest destination first, and
/// hop one subarray per step through a scratch row.
pub fn distribute_abos_to_obps(
    bank: &mut BankState,
    src: &LayoutDescriptor,
    t: &TimingEnergyConfig,
) -> Result<(LayoutDescriptor, ExecStats), MappingError> {
    if src.mapping != MappingKind::Abos {
        return Err(MappingError::NotAbos);
    }
    let cfg = bank.config().clone();
    src.check(&cfg)?;
    let dst = LayoutDescriptor { mapping: MappingKind::Obps, ..src.clone() };
    dst.check(&cfg)?;
    let scratch = cfg.data_rows() - 1;
    if dst.row_end() > scratch || src.row_end() > scratch {
        return Err(MappingError::Capacity { need: dst.row_end().max(src.row_end()) + 1, have: cfg.data_rows() });
    }

    // (source row in subarray 0, target subarray, target row)
    let mut items = Vec::new();
    let mut local = Vec::new();
    for batch in 0..src.batches() {
        let e = batch * src.columns;
        for b in 0..src.precision {
            let s = src.locate(e, b);
            let d = dst.locate(e, b);
            if d.sub == 0 {
                if d.row != s.row {
                    local.push((s.row, d.row));
                }
            } else {
                items.push((s.row, d.sub, d.row));
            }
        }
    }
    items.sort_by_key(|it| std::cmp::Reverse(it.1));

    let mut steps: Vec<Step> = Vec::new();
    // position of each item: None = not departed, Some(sub) = in flight or arrived
    let mut pos: Vec<Option<usize>> = vec![None; items.len()];
    let mut next = 0;
    while pos.iter().zip(&items).any(|(p, it)| *p != Some(it.1)) {
        let mut st = Step::new();
        for (i, it) in items.iter().enumerate() {
            if let Some(p) = pos[i] {
                if p < it.1 {
                    let dst_row = if p + 1 == it.1 { it.2 } else { scratch };
                    st.insert(p, Prim::Rbm { dst_sub: p + 1, src_row: scratch, dst_row });
                    pos[i] = Some(p + 1);
                }
            }
        }
        if next < items.len() {
            let it = items[next];
            let dst_row = if it.1 == 1 { it.2 } else { scratch };
            st.insert(0, Prim::Rbm { dst_sub: 1, src_row: it.0, dst_row });
            pos[next] = Some(1);
            next += 1;
        }
        steps.push(st);
    }
    for (s_row, d_row) in local {
        let mut st = Step::new();
        st.insert(0, Prim::Aap { src: RowSpec::Single(s_row), dst: Dst::Single(d_row) });
        steps.push(st);
    }

    let mut stats = ExecStats::default();
    for st in &steps {
        stats.add(&bank.salp_step(st, t)?);
    }
    Ok((dst, stats))
}
