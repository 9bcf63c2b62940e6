//! Bit-accurate model of one PuD-capable DRAM bank.
//!
//! Each subarray owns `rows_per_subarray` rows. The last `c_group_rows +
//! b_group_rows` rows of every subarray are reserved: two constant rows
//! (all-0, all-1) followed by the compute rows T0..T4 and the dual-contact
//! row. Everything below them is ordinary data (D-group).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on concurrently activated subarrays (t_RAS / t_CK).
pub const MAX_SUBARRAYS_CAP: usize = 84;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DramError {
    #[error("index out of range: {what} {index} (limit {limit})")]
    Bounds { what: &'static str, index: usize, limit: usize },
    #[error("subarray {0}: a fourth row cannot be opened")]
    TraViolation(usize),
    #[error("subarray {sub}: row {row} is not a compute row, TRA refused")]
    IllegalTra { sub: usize, row: usize },
    #[error("subarray {sub}: TRA needs a precharged subarray and three distinct rows")]
    TraState { sub: usize },
    #[error("subarray {sub}: NOT destination {row} is not the dual-contact row")]
    NotDualContact { sub: usize, row: usize },
    #[error("subarray {sub}: row {row} holds a constant and cannot be written")]
    ConstRow { sub: usize, row: usize },
    #[error("subarray {sub}: source and destination overlap")]
    Overlap { sub: usize },
    #[error("subarray {sub}: destination pair must be two distinct compute rows")]
    BadPair { sub: usize },
    #[error("RBM between non-adjacent subarrays {0} and {1}")]
    NotAdjacent(usize, usize),
    #[error("scheduling conflict in step: {0}")]
    Conflict(String),
    #[error("config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankConfig {
    pub subarrays_per_bank: usize,
    pub rows_per_subarray: usize,
    pub columns_per_row: usize,
    pub c_group_rows: usize,
    pub b_group_rows: usize,
    pub max_concurrent_subarrays: usize,
    pub tfaw_enforcement: bool,
}

impl Default for BankConfig {
    fn default() -> Self {
        BankConfig {
            subarrays_per_bank: 64,
            rows_per_subarray: 1024,
            columns_per_row: 1024,
            c_group_rows: 2,
            b_group_rows: 6,
            max_concurrent_subarrays: 64,
            tfaw_enforcement: false,
        }
    }
}

impl BankConfig {
    pub fn validate(&self) -> Result<(), DramError> {
        let bad = |m: &str| Err(DramError::Config(m.to_string()));
        if self.subarrays_per_bank == 0 || self.rows_per_subarray == 0 || self.columns_per_row == 0 {
            return bad("bank dimensions must be positive");
        }
        // the library addresses T0..T4 plus the dual-contact row by name
        if self.c_group_rows != 2 || self.b_group_rows != 6 {
            return bad("c_group_rows must be 2 and b_group_rows must be 6");
        }
        if self.c_group_rows + self.b_group_rows >= self.rows_per_subarray {
            return bad("reserved rows leave no data rows");
        }
        if self.max_concurrent_subarrays == 0 || self.max_concurrent_subarrays > MAX_SUBARRAYS_CAP {
            return bad("max_concurrent_subarrays must be in 1..=84");
        }
        Ok(())
    }

    pub fn data_rows(&self) -> usize {
        self.rows_per_subarray - self.c_group_rows - self.b_group_rows
    }

    /// All-zero constant row.
    pub fn c0(&self) -> usize {
        self.data_rows()
    }

    /// All-one constant row.
    pub fn c1(&self) -> usize {
        self.data_rows() + 1
    }

    /// Compute row `i` (0..5); index 5 is the dual-contact row.
    pub fn t(&self, i: usize) -> usize {
        debug_assert!(i < self.b_group_rows);
        self.data_rows() + self.c_group_rows + i
    }

    pub fn dcc(&self) -> usize {
        self.rows_per_subarray - 1
    }

    pub fn is_b(&self, row: usize) -> bool {
        row >= self.t(0) && row < self.rows_per_subarray
    }

    pub fn is_c(&self, row: usize) -> bool {
        row == self.c0() || row == self.c1()
    }

    pub fn words_per_row(&self) -> usize {
        self.columns_per_row.div_ceil(64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEnergyConfig {
    pub t_ras: f64,
    pub t_rp: f64,
    pub t_rbm: f64,
    pub t_ck: f64,
    pub t_faw: f64,
    pub salp_act_penalty: f64,
    pub e_act: f64,
    pub extra_row_energy_factor: f64,
    pub e_scan_per_line: f64,
}

impl Default for TimingEnergyConfig {
    fn default() -> Self {
        TimingEnergyConfig {
            t_ras: 32.0,
            t_rp: 14.5,
            t_rbm: 5.0,
            t_ck: 0.38,
            t_faw: 13.3,
            salp_act_penalty: 0.028,
            e_act: 1.0,
            extra_row_energy_factor: 0.22,
            e_scan_per_line: 0.0016,
        }
    }
}

impl TimingEnergyConfig {
    pub fn validate(&self) -> Result<(), DramError> {
        let all = [
            self.t_ras,
            self.t_rp,
            self.t_rbm,
            self.t_ck,
            self.t_faw,
            self.salp_act_penalty,
            self.e_act,
            self.extra_row_energy_factor,
            self.e_scan_per_line,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(DramError::Config("timing and energy values must be positive".into()));
        }
        if self.salp_act_penalty / self.t_aap() >= 0.0011 {
            return Err(DramError::Config("salp_act_penalty too large relative to t_aap".into()));
        }
        Ok(())
    }

    /// Two chained activations plus a precharge.
    pub fn t_aap(&self) -> f64 {
        2.0 * self.t_ras + self.t_rp
    }

    /// Latency of one full-row inter-subarray copy (both half rows).
    pub fn t_rbm_fullrow(&self) -> f64 {
        3.0 * self.t_ras + 2.0 * self.t_rp + 2.0 * self.t_rbm
    }

    /// Energy of activating `k` rows at once.
    pub fn act_energy(&self, k: usize) -> f64 {
        self.e_act * (1.0 + self.extra_row_energy_factor * (k.max(1) - 1) as f64)
    }
}

/// Both configs, as loaded from a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub bank: BankConfig,
    pub timing: TimingEnergyConfig,
}

impl SimConfig {
    /// Parse `key = value` lines. `#` starts a comment.
    pub fn parse(text: &str) -> Result<SimConfig, DramError> {
        let mut cfg = SimConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| DramError::Config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let err = || DramError::Config(format!("line {}: bad value for {k}", n + 1));
            let b = &mut cfg.bank;
            let t = &mut cfg.timing;
            match k {
                "subarrays_per_bank" | "subarrays" => b.subarrays_per_bank = v.parse().map_err(|_| err())?,
                "rows_per_subarray" | "rows" => b.rows_per_subarray = v.parse().map_err(|_| err())?,
                "columns_per_row" | "columns" => b.columns_per_row = v.parse().map_err(|_| err())?,
                "c_group_rows" => b.c_group_rows = v.parse().map_err(|_| err())?,
                "b_group_rows" => b.b_group_rows = v.parse().map_err(|_| err())?,
                "max_concurrent_subarrays" => b.max_concurrent_subarrays = v.parse().map_err(|_| err())?,
                "tfaw_enforcement" => {
                    b.tfaw_enforcement = match v {
                        "1" | "true" | "on" => true,
                        "0" | "false" | "off" => false,
                        _ => return Err(DramError::Config(format!("line {}: bad flag", n + 1))),
                    }
                }
                "t_ras" => t.t_ras = v.parse().map_err(|_| err())?,
                "t_rp" => t.t_rp = v.parse().map_err(|_| err())?,
                "t_rbm" => t.t_rbm = v.parse().map_err(|_| err())?,
                "t_ck" => t.t_ck = v.parse().map_err(|_| err())?,
                "t_faw" => t.t_faw = v.parse().map_err(|_| err())?,
                "salp_act_penalty" => t.salp_act_penalty = v.parse().map_err(|_| err())?,
                "e_act" => t.e_act = v.parse().map_err(|_| err())?,
                "extra_row_energy_factor" => t.extra_row_energy_factor = v.parse().map_err(|_| err())?,
                "e_scan_per_line" => t.e_scan_per_line = v.parse().map_err(|_| err())?,
                _ => return Err(DramError::Config(format!("line {}: unknown key {k}", n + 1))),
            }
        }
        cfg.bank.validate()?;
        cfg.timing.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SimConfig, DramError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DramError::Config(format!("{}: {e}", path.display())))?;
        SimConfig::parse(&text)
    }
}

/// Source of an activation: one row, or three rows opened together (TRA).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSpec {
    Single(usize),
    Triple([usize; 3]),
}

impl RowSpec {
    pub fn rows(&self) -> &[usize] {
        match self {
            RowSpec::Single(r) => std::slice::from_ref(r),
            RowSpec::Triple(rs) => rs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dst {
    Single(usize),
    Pair(usize, usize),
}

impl Dst {
    pub fn rows(&self) -> Vec<usize> {
        match *self {
            Dst::Single(r) => vec![r],
            Dst::Pair(a, b) => vec![a, b],
        }
    }
}

/// One DRAM primitive issued to a single subarray within a step.
/// An RBM is keyed by its source subarray.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prim {
    Aap { src: RowSpec, dst: Dst },
    Ap { rows: [usize; 3] },
    NotAap { src: RowSpec, dst: usize },
    Rbm { dst_sub: usize, src_row: usize, dst_row: usize },
    Init { row: usize, value: bool },
}

impl Prim {
    pub fn is_rbm(&self) -> bool {
        matches!(self, Prim::Rbm { .. })
    }

    /// ACT commands on this primitive's critical path.
    pub fn acts(&self) -> u32 {
        match self {
            Prim::Ap { .. } => 1,
            Prim::Rbm { .. } => 3,
            _ => 2,
        }
    }

    pub fn energy(&self, t: &TimingEnergyConfig) -> f64 {
        match self {
            Prim::Aap { src, dst } => t.act_energy(src.rows().len()) + t.act_energy(dst.rows().len()),
            Prim::NotAap { src, .. } => t.act_energy(src.rows().len()) + t.act_energy(1),
            Prim::Ap { .. } => t.act_energy(3),
            Prim::Init { .. } => 2.0 * t.act_energy(1),
            Prim::Rbm { .. } => 3.0 * t.act_energy(1),
        }
    }
}

impl fmt::Display for Prim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Prim::Aap { src, dst } => write!(f, "AAP {:?} -> {:?}", src.rows(), dst.rows()),
            Prim::Ap { rows } => write!(f, "AP {rows:?}"),
            Prim::NotAap { src, dst } => write!(f, "NOT {:?} -> {dst}", src.rows()),
            Prim::Rbm { dst_sub, src_row, dst_row } => write!(f, "RBM {src_row} -> [{dst_sub}].{dst_row}"),
            Prim::Init { row, value } => write!(f, "INIT {row} = {}", *value as u8),
        }
    }
}

/// One SALP step: at most one primitive per subarray.
pub type Step = BTreeMap<usize, Prim>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub aap_cycles: u64,
    pub rbm_cycles: u64,
    pub acts: u32,
    pub latency_ns: f64,
    pub energy_nj: f64,
    pub tfaw_stall_ns: f64,
    /// Issue time of every ACT in the step, relative to step start.
    pub act_times: Vec<f64>,
}

/// Static cost of a step, shared by the executor and the static counters.
pub fn step_cost(step: &Step, cfg: &BankConfig, t: &TimingEnergyConfig) -> StepStats {
    let mut s = StepStats::default();
    if step.is_empty() {
        return s;
    }
    let has_rbm = step.values().any(|p| p.is_rbm());
    let has_aap = step.values().any(|p| !p.is_rbm());
    s.aap_cycles = has_aap as u64;
    s.rbm_cycles = has_rbm as u64;
    let mut base: f64 = 0.0;
    if has_aap {
        base = base.max(t.t_aap());
    }
    if has_rbm {
        base = base.max(t.t_rbm_fullrow());
    }
    let crit = step.values().map(|p| p.acts()).max().unwrap_or(0);
    // MASA: every ACT on the critical path pays the designated-bit penalty
    let penalty = if step.len() > 1 { crit as f64 * t.salp_act_penalty } else { 0.0 };
    s.acts = step.values().map(|p| p.acts()).sum();
    s.energy_nj = step.values().map(|p| p.energy(t)).sum();
    let k = s.acts as usize;
    s.act_times = (0..k).map(|j| j as f64 * t.t_ck).collect();
    if cfg.tfaw_enforcement && k > 0 {
        s.act_times = (0..k).map(|j| (j / 4) as f64 * t.t_faw + (j % 4) as f64 * t.t_ck).collect();
        let free = (k - 1) as f64 * t.t_ck;
        s.tfaw_stall_ns = (s.act_times[k - 1] - free).max(0.0);
    }
    s.latency_ns = base + penalty + s.tfaw_stall_ns;
    s
}

/// Check a step against the scheduling rules. Returns one message per problem.
pub fn check_step(step: &Step, cfg: &BankConfig) -> Vec<String> {
    let mut out = Vec::new();
    if step.len() > cfg.max_concurrent_subarrays {
        out.push(format!(
            "{} subarrays active, limit {}",
            step.len(),
            cfg.max_concurrent_subarrays
        ));
    }
    let nrows = cfg.rows_per_subarray;
    let mut rbm_dst: BTreeMap<usize, usize> = BTreeMap::new();
    for (&sub, prim) in step {
        if sub >= cfg.subarrays_per_bank {
            out.push(format!("subarray {sub} out of range"));
            continue;
        }
        let oob = |r: usize| r >= nrows;
        match *prim {
            Prim::Aap { src, dst } => {
                let d = dst.rows();
                if src.rows().iter().chain(d.iter()).any(|&r| oob(r)) {
                    out.push(format!("subarray {sub}: row out of range"));
                    continue;
                }
                if let RowSpec::Triple(rs) = src {
                    check_tra(sub, rs, cfg, &mut out);
                }
                if d.iter().any(|r| src.rows().contains(r)) {
                    out.push(format!("subarray {sub}: AAP source and destination overlap"));
                }
                if let Dst::Pair(a, b) = dst {
                    if a == b || !cfg.is_b(a) || !cfg.is_b(b) {
                        out.push(format!("subarray {sub}: destination pair outside compute rows"));
                    }
                }
                if d.iter().any(|&r| cfg.is_c(r)) {
                    out.push(format!("subarray {sub}: write to constant row"));
                }
            }
            Prim::Ap { rows } => {
                if rows.iter().any(|&r| oob(r)) {
                    out.push(format!("subarray {sub}: row out of range"));
                    continue;
                }
                check_tra(sub, rows, cfg, &mut out);
            }
            Prim::NotAap { src, dst } => {
                if src.rows().iter().any(|&r| oob(r)) {
                    out.push(format!("subarray {sub}: row out of range"));
                    continue;
                }
                if let RowSpec::Triple(rs) = src {
                    check_tra(sub, rs, cfg, &mut out);
                }
                if dst != cfg.dcc() {
                    out.push(format!("subarray {sub}: NOT destination is not the dual-contact row"));
                }
                if src.rows().contains(&dst) {
                    out.push(format!("subarray {sub}: NOT source and destination overlap"));
                }
            }
            Prim::Init { row, .. } => {
                if oob(row) || cfg.is_c(row) {
                    out.push(format!("subarray {sub}: bad init row {row}"));
                }
            }
            Prim::Rbm { dst_sub, src_row, dst_row } => {
                if dst_sub >= cfg.subarrays_per_bank || oob(src_row) || oob(dst_row) {
                    out.push(format!("subarray {sub}: RBM target out of range"));
                    continue;
                }
                if sub.abs_diff(dst_sub) != 1 {
                    out.push(format!("RBM {sub} -> {dst_sub}: subarrays not adjacent"));
                }
                if cfg.is_c(dst_row) {
                    out.push(format!("RBM into constant row of subarray {dst_sub}"));
                }
                if let Some(prev) = rbm_dst.insert(dst_sub, sub) {
                    out.push(format!("subarray {dst_sub} receives from both {prev} and {sub}"));
                }
                if let Some(p) = step.get(&dst_sub) {
                    if !p.is_rbm() {
                        out.push(format!("subarray {dst_sub} receives an RBM while busy"));
                    }
                }
            }
        }
    }
    out
}

fn check_tra(sub: usize, rows: [usize; 3], cfg: &BankConfig, out: &mut Vec<String>) {
    if rows[0] == rows[1] || rows[1] == rows[2] || rows[0] == rows[2] {
        out.push(format!("subarray {sub}: TRA rows not distinct"));
    }
    for r in rows {
        if !cfg.is_b(r) {
            out.push(format!("subarray {sub}: TRA row {r} outside compute rows"));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BankState {
    cfg: BankConfig,
    words: usize,
    cells: Vec<u64>,
    row_buffer: Vec<Vec<u64>>,
    open_rows: Vec<Vec<usize>>,
    designated_bit: Vec<bool>,
    isolation_open: Vec<bool>,
}

impl BankState {
    pub fn new(cfg: BankConfig) -> Result<BankState, DramError> {
        cfg.validate()?;
        let words = cfg.words_per_row();
        let n = cfg.subarrays_per_bank;
        let mut bank = BankState {
            cells: vec![0; n * cfg.rows_per_subarray * words],
            row_buffer: vec![vec![0; words]; n],
            open_rows: vec![Vec::new(); n],
            designated_bit: vec![false; n],
            isolation_open: vec![false; n.saturating_sub(1)],
            words,
            cfg,
        };
        let ones = bank.ones();
        for s in 0..n {
            let c1 = bank.cfg.c1();
            bank.row_mut(s, c1).copy_from_slice(&ones);
        }
        Ok(bank)
    }

    pub fn config(&self) -> &BankConfig {
        &self.cfg
    }

    /// An all-ones row with the unused tail bits cleared.
    pub fn ones(&self) -> Vec<u64> {
        let mut v = vec![u64::MAX; self.words];
        let tail = self.cfg.columns_per_row % 64;
        if tail != 0 {
            v[self.words - 1] = (1u64 << tail) - 1;
        }
        v
    }

    fn idx(&self, sub: usize, row: usize) -> usize {
        (sub * self.cfg.rows_per_subarray + row) * self.words
    }

    fn bounds(&self, sub: usize, row: usize) -> Result<(), DramError> {
        if sub >= self.cfg.subarrays_per_bank {
            return Err(DramError::Bounds { what: "subarray", index: sub, limit: self.cfg.subarrays_per_bank });
        }
        if row >= self.cfg.rows_per_subarray {
            return Err(DramError::Bounds { what: "row", index: row, limit: self.cfg.rows_per_subarray });
        }
        Ok(())
    }

    pub fn row(&self, sub: usize, row: usize) -> &[u64] {
        let i = self.idx(sub, row);
        &self.cells[i..i + self.words]
    }

    fn row_mut(&mut self, sub: usize, row: usize) -> &mut [u64] {
        let i = self.idx(sub, row);
        let w = self.words;
        &mut self.cells[i..i + w]
    }

    /// Host-side write of a data row (placement path, not a PuD command).
    pub fn write_row(&mut self, sub: usize, row: usize, data: &[u64]) -> Result<(), DramError> {
        self.bounds(sub, row)?;
        if self.cfg.is_c(row) {
            return Err(DramError::ConstRow { sub, row });
        }
        let mask = self.ones();
        let dst = self.row_mut(sub, row);
        for ((d, s), m) in dst.iter_mut().zip(data).zip(&mask) {
            *d = s & m;
        }
        Ok(())
    }

    pub fn bit(&self, sub: usize, row: usize, col: usize) -> bool {
        (self.row(sub, row)[col / 64] >> (col % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, sub: usize, row: usize, col: usize, v: bool) {
        let w = &mut self.row_mut(sub, row)[col / 64];
        if v {
            *w |= 1 << (col % 64);
        } else {
            *w &= !(1 << (col % 64));
        }
    }

    pub fn row_buffer(&self, sub: usize) -> &[u64] {
        &self.row_buffer[sub]
    }

    pub fn row_buffer_mut(&mut self, sub: usize) -> &mut [u64] {
        &mut self.row_buffer[sub]
    }

    pub fn open_rows(&self, sub: usize) -> &[usize] {
        &self.open_rows[sub]
    }

    pub fn designated_bit(&self, sub: usize) -> bool {
        self.designated_bit[sub]
    }

    /// SA_SEL: pick the subarray that drives the global bitlines.
    pub fn sa_sel(&mut self, sub: usize) -> Result<(), DramError> {
        self.bounds(sub, 0)?;
        self.designated_bit.iter_mut().for_each(|b| *b = false);
        self.designated_bit[sub] = true;
        Ok(())
    }

    /// ACT. On a precharged subarray this latches the row; otherwise the
    /// already-amplified buffer drives the new row (RowClone).
    pub fn activate_row(&mut self, sub: usize, row: usize) -> Result<(), DramError> {
        self.bounds(sub, row)?;
        let open = &self.open_rows[sub];
        if open.len() >= 3 {
            return Err(DramError::TraViolation(sub));
        }
        if open.contains(&row) {
            return Ok(());
        }
        if open.is_empty() {
            let i = self.idx(sub, row);
            let w = self.words;
            self.row_buffer[sub].copy_from_slice(&self.cells[i..i + w]);
        }
        self.open_rows[sub].push(row);
        Ok(())
    }

    /// PRE: restore the buffer into every open row, then close them.
    pub fn precharge(&mut self, sub: usize) -> Result<(), DramError> {
        self.bounds(sub, 0)?;
        let rows = std::mem::take(&mut self.open_rows[sub]);
        let buf = self.row_buffer[sub].clone();
        for r in rows {
            if self.cfg.is_c(r) {
                continue;
            }
            self.row_mut(sub, r).copy_from_slice(&buf);
        }
        Ok(())
    }

    /// TRA: the buffer settles to the per-column majority and all three
    /// cells are overwritten with it on precharge.
    pub fn triple_row_activate(&mut self, sub: usize, rows: [usize; 3]) -> Result<(), DramError> {
        for &r in &rows {
            self.bounds(sub, r)?;
        }
        for &r in &rows {
            if !self.cfg.is_b(r) {
                return Err(DramError::IllegalTra { sub, row: r });
            }
        }
        if !self.open_rows[sub].is_empty() || rows[0] == rows[1] || rows[1] == rows[2] || rows[0] == rows[2] {
            return Err(DramError::TraState { sub });
        }
        let (a, b, c) = (self.row(sub, rows[0]), self.row(sub, rows[1]), self.row(sub, rows[2]));
        let maj: Vec<u64> = (0..self.words).map(|i| (a[i] & b[i]) | (b[i] & c[i]) | (a[i] & c[i])).collect();
        self.row_buffer[sub] = maj;
        self.open_rows[sub] = rows.to_vec();
        Ok(())
    }

    fn open_src(&mut self, sub: usize, src: RowSpec) -> Result<(), DramError> {
        if !self.open_rows[sub].is_empty() {
            self.precharge(sub)?;
        }
        match src {
            RowSpec::Single(r) => self.activate_row(sub, r),
            RowSpec::Triple(rs) => self.triple_row_activate(sub, rs),
        }
    }

    fn check_dst(&self, sub: usize, src: RowSpec, dst: Dst) -> Result<(), DramError> {
        for r in dst.rows() {
            self.bounds(sub, r)?;
            if self.cfg.is_c(r) {
                return Err(DramError::ConstRow { sub, row: r });
            }
            if src.rows().contains(&r) {
                return Err(DramError::Overlap { sub });
            }
        }
        if let Dst::Pair(a, b) = dst {
            if a == b || !self.cfg.is_b(a) || !self.cfg.is_b(b) {
                return Err(DramError::BadPair { sub });
            }
        }
        Ok(())
    }

    /// ACT src, ACT dst, PRE. `dst` receives the activation result.
    pub fn aap(&mut self, sub: usize, src: RowSpec, dst: Dst) -> Result<(), DramError> {
        self.bounds(sub, 0)?;
        self.check_dst(sub, src, dst)?;
        self.open_src(sub, src)?;
        // TRA leaves three rows open; the copy lands after their restore
        self.precharge_keep(sub)?;
        for r in dst.rows() {
            let buf = self.row_buffer[sub].clone();
            self.row_mut(sub, r).copy_from_slice(&buf);
        }
        Ok(())
    }

    // restore open rows but keep the amplified value in the buffer
    fn precharge_keep(&mut self, sub: usize) -> Result<(), DramError> {
        let buf = self.row_buffer[sub].clone();
        self.precharge(sub)?;
        self.row_buffer[sub] = buf;
        Ok(())
    }

    /// AP: a TRA followed by precharge.
    pub fn ap(&mut self, sub: usize, rows: [usize; 3]) -> Result<(), DramError> {
        self.bounds(sub, 0)?;
        self.open_src(sub, RowSpec::Triple(rows))?;
        self.precharge(sub)
    }

    /// Copy the complement of `src` into the dual-contact row.
    pub fn aap_not(&mut self, sub: usize, src: RowSpec, dst: usize) -> Result<(), DramError> {
        self.bounds(sub, dst)?;
        if dst != self.cfg.dcc() {
            return Err(DramError::NotDualContact { sub, row: dst });
        }
        if src.rows().contains(&dst) {
            return Err(DramError::Overlap { sub });
        }
        self.open_src(sub, src)?;
        self.precharge_keep(sub)?;
        let mask = self.ones();
        let v: Vec<u64> = self.row_buffer[sub].iter().zip(&mask).map(|(b, m)| !b & m).collect();
        self.row_mut(sub, dst).copy_from_slice(&v);
        Ok(())
    }

    /// Write a constant into a row (a copy from the matching C-group row).
    pub fn init_row(&mut self, sub: usize, row: usize, value: bool) -> Result<(), DramError> {
        let c = if value { self.cfg.c1() } else { self.cfg.c0() };
        self.aap(sub, RowSpec::Single(c), Dst::Single(row))
    }

    /// LISA row-buffer movement of one full row between adjacent subarrays.
    pub fn rbm_transfer(&mut self, src_sub: usize, dst_sub: usize, src_row: usize, dst_row: usize) -> Result<(), DramError> {
        self.bounds(src_sub, src_row)?;
        self.bounds(dst_sub, dst_row)?;
        if src_sub.abs_diff(dst_sub) != 1 {
            return Err(DramError::NotAdjacent(src_sub, dst_sub));
        }
        if self.cfg.is_c(dst_row) {
            return Err(DramError::ConstRow { sub: dst_sub, row: dst_row });
        }
        let link = src_sub.min(dst_sub);
        self.isolation_open[link] = true;
        let data = self.row(src_sub, src_row).to_vec();
        self.row_mut(dst_sub, dst_row).copy_from_slice(&data);
        self.isolation_open[link] = false;
        Ok(())
    }

    /// Execute one SALP step. RBM sources are read before any RBM writes,
    /// so a subarray may send one row while receiving another.
    pub fn salp_step(&mut self, step: &Step, t: &TimingEnergyConfig) -> Result<StepStats, DramError> {
        let problems = check_step(step, &self.cfg);
        if !problems.is_empty() {
            return Err(DramError::Conflict(problems.join("; ")));
        }
        let mut moves = Vec::new();
        for (&sub, prim) in step {
            match *prim {
                Prim::Aap { src, dst } => self.aap(sub, src, dst)?,
                Prim::Ap { rows } => self.ap(sub, rows)?,
                Prim::NotAap { src, dst } => self.aap_not(sub, src, dst)?,
                Prim::Init { row, value } => self.init_row(sub, row, value)?,
                Prim::Rbm { dst_sub, src_row, dst_row } => {
                    moves.push((dst_sub, dst_row, self.row(sub, src_row).to_vec()));
                }
            }
        }
        for (dsub, drow, data) in moves {
            self.row_mut(dsub, drow).copy_from_slice(&data);
        }
        Ok(step_cost(step, &self.cfg, t))
    }
}
