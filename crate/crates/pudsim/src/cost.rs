//! Analytical throughput and energy model, per-opcode selection tables and
//! the select pipeline that maps (opcode, precision) to a library program.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dram::{BankConfig, TimingEnergyConfig};
use crate::library::{entry, expand, manifest, Alg, LibError, ManifestEntry, Opcode};
use crate::mapping::MappingKind;
use crate::uprog::{count_cycles, static_cost, GbIdx, MicroProgram};

pub const LUTS: usize = 16;
pub const LUT_ENTRIES: usize = 64;
/// Empty LUT slot.
pub const NONE: u8 = 0xff;
/// Pipeline depth of the select unit, in controller cycles.
pub const SELECT_CYCLES: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("unknown program {0}")]
    Unknown(GbIdx),
    #[error("program {id} does not support {bits} bits")]
    Precision { id: GbIdx, bits: usize },
    #[error("element and subarray counts must be positive")]
    Empty,
    #[error("no program for {opcode} at bits {bits:?}")]
    Gap { opcode: String, bits: Vec<usize> },
    #[error("precision {0} outside 1..=64")]
    BadPrecision(usize),
    #[error("opcode {0} has no table")]
    BadOpcode(u8),
    #[error(transparent)]
    Lib(#[from] LibError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    Latency,
    Energy,
}

impl Objective {
    pub fn parse(s: &str) -> Option<Objective> {
        match s.to_ascii_lowercase().as_str() {
            "latency" => Some(Objective::Latency),
            "energy" => Some(Objective::Energy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPoint {
    pub throughput_gops: f64,
    pub tput_per_watt: f64,
    pub latency_ns: f64,
    pub energy_nj: f64,
}

/// Workload the tables are tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub elements: usize,
    pub subarrays: usize,
}

impl Profile {
    /// One full row of elements (64K at 65,536 columns).
    pub fn small(cfg: &BankConfig) -> Profile {
        Profile { elements: cfg.columns_per_row, subarrays: cfg.subarrays_per_bank }
    }

    /// Sixteen full rows in each of 64 subarrays (1M at 65,536 columns).
    pub fn large(cfg: &BankConfig) -> Profile {
        Profile { elements: cfg.columns_per_row * 1024, subarrays: cfg.subarrays_per_bank }
    }
}

/// Per-execution figures of one expanded program.
#[derive(Debug, Clone, Copy)]
struct Shape {
    aap: u64,
    rbm: u64,
    energy: f64,
    replicas: usize,
    span: usize,
}

fn span(up: &MicroProgram) -> usize {
    let mut hi = 0;
    for st in &up.steps {
        for (&s, p) in st {
            hi = hi.max(s + 1);
            if let crate::dram::Prim::Rbm { dst_sub, .. } = p {
                hi = hi.max(dst_sub + 1);
            }
        }
    }
    hi.max(1)
}

/// Analytical model over the program library. Expanded programs are cached.
pub struct CostModel {
    pub bank: BankConfig,
    pub timing: TimingEnergyConfig,
    cache: Mutex<HashMap<(GbIdx, usize, usize), Shape>>,
}

impl CostModel {
    pub fn new(bank: BankConfig, timing: TimingEnergyConfig) -> CostModel {
        CostModel { bank, timing, cache: Mutex::new(HashMap::new()) }
    }

    fn shape(&self, e: &ManifestEntry, n: usize, subarrays: usize) -> Result<Shape, CostError> {
        let key = (e.id, n, subarrays);
        if let Some(s) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*s);
        }
        // ABPS replicas issue identical streams; cost one and scale
        let alone = matches!(e.mapping, MappingKind::Abps);
        let cfg = BankConfig { subarrays_per_bank: if alone { 1 } else { subarrays }, ..self.bank.clone() };
        let up = expand(&e.template(n), &cfg)?;
        let (aap, rbm) = count_cycles(&up);
        let energy = static_cost(&up, &cfg, &self.timing).energy_nj;
        let replicas = if alone { subarrays } else { up.replicas.max(1) };
        let s = Shape { aap, rbm, energy: energy * replicas as f64 / up.replicas.max(1) as f64, replicas, span: span(&up) };
        self.cache.lock().expect("cache lock").insert(key, s);
        Ok(s)
    }

    /// (latency, energy) of running one program over `elements` values.
    fn run_cost(&self, e: &ManifestEntry, n: usize, elements: usize, subarrays: usize) -> Result<(f64, f64), CostError> {
        let s = self.shape(e, n, subarrays)?;
        let batches = elements.div_ceil(self.bank.columns_per_row).max(1);
        let parallel = if s.replicas > 1 {
            s.replicas
        } else if matches!(e.mapping, MappingKind::Abos) {
            1
        } else {
            (subarrays / s.span).max(1)
        };
        let execs = batches.div_ceil(parallel) as f64;
        let t = &self.timing;
        let latency = execs * (s.aap as f64 * t.t_aap() + s.rbm as f64 * t.t_rbm_fullrow());
        let energy = batches as f64 * s.energy / s.replicas as f64;
        Ok((latency, energy))
    }

    pub fn analytical_cost(&self, id: GbIdx, n: usize, elements: usize, subarrays: usize) -> Result<CostPoint, CostError> {
        let e = entry(id).ok_or(CostError::Unknown(id))?;
        if elements == 0 || subarrays == 0 {
            return Err(CostError::Empty);
        }
        if !e.supports(n, &BankConfig { subarrays_per_bank: subarrays, ..self.bank.clone() }) {
            return Err(CostError::Precision { id, bits: n });
        }
        let (latency, energy) = if e.opcode == Opcode::RedSum {
            // one adder level per halving; AUTO pays the worst-case growth
            let levels = elements.next_power_of_two().trailing_zeros().max(1) as usize;
            let mut acc = (0.0, 0.0);
            for l in 0..levels {
                let w = if e.alg == Alg::RedAuto { (n + l).min(e.max_bits) } else { n };
                let pairs = (elements >> (l + 1)).max(1);
                let (a, b) = self.run_cost(&e, w, pairs, subarrays)?;
                acc = (acc.0 + a, acc.1 + b);
            }
            acc
        } else {
            self.run_cost(&e, n, elements, subarrays)?
        };
        let ops = elements as f64;
        Ok(CostPoint {
            throughput_gops: ops / latency,
            tput_per_watt: ops / energy,
            latency_ns: latency,
            energy_nj: energy,
        })
    }
}

/// One LUT per opcode, one entry per precision 1..=64 holding the
/// per-opcode program index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostTables {
    #[serde(serialize_with = "ser_luts")]
    pub luts: Vec<[u8; LUT_ENTRIES]>,
    pub objective: Objective,
    pub profile: Profile,
}

fn ser_luts<S: serde::Serializer>(luts: &[[u8; LUT_ENTRIES]], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(luts.iter().map(|l| l.as_slice()))
}

impl CostTables {
    pub fn empty(objective: Objective, profile: Profile) -> CostTables {
        CostTables { luts: vec![[NONE; LUT_ENTRIES]; LUTS], objective, profile }
    }
}

/// Strictly better on the objective, ties to lower energy then lower id.
fn better(obj: Objective, a: (&CostPoint, GbIdx), b: (&CostPoint, GbIdx)) -> bool {
    use std::cmp::Ordering::{Greater, Less};
    let (pa, pb) = (a.0, b.0);
    let primary = match obj {
        Objective::Latency => cmp(pa.latency_ns, pb.latency_ns),
        Objective::Energy => cmp(pb.tput_per_watt, pa.tput_per_watt),
    };
    match primary {
        Less => true,
        Greater => false,
        _ => match cmp(pa.energy_nj, pb.energy_nj) {
            Less => true,
            Greater => false,
            _ => a.1 < b.1,
        },
    }
}

/// Equal within rounding noise counts as a tie.
fn cmp(a: f64, b: f64) -> std::cmp::Ordering {
    if (a - b).abs() <= 1e-9 * a.abs().max(b.abs()) {
        std::cmp::Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Best program for (opcode, n) among `candidates`, if any is compatible.
pub fn best(
    model: &CostModel,
    candidates: &[ManifestEntry],
    n: usize,
    profile: Profile,
    objective: Objective,
) -> Result<Option<(GbIdx, CostPoint)>, CostError> {
    let cfg = BankConfig { subarrays_per_bank: profile.subarrays, ..model.bank.clone() };
    let mut win: Option<(GbIdx, CostPoint)> = None;
    for e in candidates.iter().filter(|e| e.supports(n, &cfg)) {
        let p = model.analytical_cost(e.id, n, profile.elements, profile.subarrays)?;
        if win.as_ref().is_none_or(|(id, w)| better(objective, (&p, e.id), (w, *id))) {
            win = Some((e.id, p));
        }
    }
    Ok(win)
}

/// Fill every LUT entry with the winning program. Precisions above an
/// opcode's widest program stay empty; a hole below it is an error.
pub fn pareto_populate(model: &CostModel, profile: Profile, objective: Objective) -> Result<CostTables, CostError> {
    let all = manifest();
    let cfg = BankConfig { subarrays_per_bank: profile.subarrays, ..model.bank.clone() };
    let mut t = CostTables::empty(objective, profile);
    for op in Opcode::ALL {
        let cands: Vec<ManifestEntry> = all.iter().filter(|e| e.opcode == op).cloned().collect();
        let top = (1..=LUT_ENTRIES).filter(|&n| cands.iter().any(|e| e.supports(n, &cfg))).max().unwrap_or(0);
        let mut gaps = Vec::new();
        for n in 1..=top {
            match best(model, &cands, n, profile, objective)? {
                Some((id, _)) => t.luts[op.code() as usize][n - 1] = id.index(),
                None => gaps.push(n),
            }
        }
        if !gaps.is_empty() {
            return Err(CostError::Gap { opcode: op.name().into(), bits: gaps });
        }
    }
    Ok(t)
}

/// Table lookup: LUT index, opcode mux, concatenation.
pub fn select(t: &CostTables, opcode: u8, precision: usize) -> Result<GbIdx, CostError> {
    if !(1..=LUT_ENTRIES).contains(&precision) {
        return Err(CostError::BadPrecision(precision));
    }
    let lut = t.luts.get(opcode as usize).ok_or(CostError::BadOpcode(opcode))?;
    match lut[precision - 1] {
        NONE => Err(CostError::Gap { opcode: format!("{opcode}"), bits: vec![precision] }),
        idx => Ok(GbIdx::new(opcode, idx)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub id: GbIdx,
    pub cycles: u32,
    /// Program was loaded from the store rather than the scratchpad.
    pub miss: bool,
}

/// Select pipeline with a small LRU scratchpad of resident programs.
#[derive(Debug, Clone)]
pub struct SelectUnit {
    pub tables: CostTables,
    capacity: usize,
    resident: VecDeque<GbIdx>,
}

impl SelectUnit {
    pub fn new(tables: CostTables, capacity: usize) -> SelectUnit {
        SelectUnit { tables, capacity: capacity.max(1), resident: VecDeque::new() }
    }

    pub fn select(&mut self, opcode: u8, precision: usize) -> Result<Selection, CostError> {
        let id = select(&self.tables, opcode, precision)?;
        let miss = match self.resident.iter().position(|&r| r == id) {
            Some(i) => {
                self.resident.remove(i);
                false
            }
            None => true,
        };
        self.resident.push_back(id);
        if self.resident.len() > self.capacity {
            self.resident.pop_front();
        }
        Ok(Selection { id, cycles: SELECT_CYCLES, miss })
    }
}

/// Six significant digits, as used in every CSV this crate writes.
pub fn sig6(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoRow {
    pub opcode: Opcode,
    pub alg: Alg,
    pub mapping: MappingKind,
    pub precision: usize,
    pub elements: usize,
    pub point: CostPoint,
}

/// Every compatible (program, precision) pair at each element count.
pub fn pareto_sweep(
    model: &CostModel,
    opcodes: &[Opcode],
    precisions: &[usize],
    elements: &[usize],
    subarrays: usize,
) -> Result<Vec<ParetoRow>, CostError> {
    let cfg = BankConfig { subarrays_per_bank: subarrays, ..model.bank.clone() };
    let mut rows = Vec::new();
    for e in manifest().into_iter().filter(|e| opcodes.contains(&e.opcode)) {
        for &n in precisions.iter().filter(|&&n| e.supports(n, &cfg)) {
            for &el in elements {
                let point = model.analytical_cost(e.id, n, el, subarrays)?;
                rows.push(ParetoRow { opcode: e.opcode, alg: e.alg, mapping: e.mapping, precision: n, elements: el, point });
            }
        }
    }
    Ok(rows)
}

pub fn write_pareto_csv<W: Write>(w: W, rows: &[ParetoRow]) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "opcode",
        "algorithm",
        "mapping",
        "precision",
        "elements",
        "throughput_gops",
        "tput_per_watt",
        "latency_ns",
        "energy_nj",
    ])?;
    for r in rows {
        out.write_record([
            r.opcode.name().to_string(),
            r.alg.name().to_string(),
            r.mapping.name(),
            r.precision.to_string(),
            r.elements.to_string(),
            sig6(r.point.throughput_gops),
            sig6(r.point.tput_per_watt),
            sig6(r.point.latency_ns),
            sig6(r.point.energy_nj),
        ])?;
    }
    out.flush()?;
    Ok(())
}
