//! bbop instruction traces: parsing and end-to-end execution (register,
//! scan, select, place, execute, gather, check against native arithmetic).

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::cost::{best, pareto_populate, sig6, CostError, CostModel, CostTables, Objective, Profile, SelectUnit};
use crate::dram::{BankState, DramError, SimConfig};
use crate::library::{
    self, build_reduction, expand, manifest, rbr_result, template, Alg, LibError, ManifestEntry, Opcode, RbrNumber,
    ReductionMode,
};
use crate::mapping::{sign_extend, MappingKind};
use crate::precision::{
    precision_for_op, scan_object, static_precision_path, ObjectTracker, ObjectTrackerEntry, PrecisionError, StaticMode,
};
use crate::uprog::{ExecStats, GbIdx, MicroProgram};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: object {object} is not registered")]
    Unregistered { line: usize, object: String },
    #[error("line {line}: {message}")]
    Run { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Dram(#[from] DramError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BbopOp {
    TrspInit,
    Op(Opcode),
}

impl BbopOp {
    pub fn name(&self) -> &'static str {
        match self {
            BbopOp::TrspInit => "trsp_init",
            BbopOp::Op(o) => o.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BbopInstruction {
    pub line: usize,
    pub op: BbopOp,
    pub dst: String,
    pub src1: Option<String>,
    pub src2: Option<String>,
    pub size: usize,
    pub precision: usize,
    pub dynamic: bool,
}

fn operand(s: &str) -> Option<String> {
    (s != "-").then(|| s.to_string())
}

/// `bbop_<op> dst src1 src2 size precision dyn`, `-` for an unused operand,
/// `#` comments.
pub fn parse_trace(text: &str) -> Result<Vec<BbopInstruction>, TraceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| TraceError::Parse { line, message };
        let f: Vec<&str> = body.split_whitespace().collect();
        if f.len() != 7 {
            return Err(err(format!("expected 7 fields, found {}", f.len())));
        }
        let name = f[0].strip_prefix("bbop_").ok_or_else(|| err(format!("unknown instruction {}", f[0])))?;
        let op = match name {
            "trsp_init" => BbopOp::TrspInit,
            "red_sum" => BbopOp::Op(Opcode::RedSum),
            n => BbopOp::Op(Opcode::parse(n).ok_or_else(|| err(format!("unknown instruction {}", f[0])))?),
        };
        let num = |s: &str, what: &str| s.parse::<usize>().map_err(|_| err(format!("bad {what} {s:?}")));
        let size = num(f[4], "size")?;
        let precision = num(f[5], "precision")?;
        let dynamic = match f[6] {
            "0" => false,
            "1" => true,
            s => return Err(err(format!("bad dyn flag {s:?}"))),
        };
        if size == 0 {
            return Err(err("size must be positive".into()));
        }
        if !(1..=64).contains(&precision) {
            return Err(err(format!("precision {precision} outside 1..=64")));
        }
        let ins = BbopInstruction { line, op, dst: f[1].into(), src1: operand(f[2]), src2: operand(f[3]), size, precision, dynamic };
        let arity = match op {
            BbopOp::TrspInit => 0,
            BbopOp::Op(Opcode::Not | Opcode::RedSum | Opcode::Convert) => 1,
            BbopOp::Op(_) => 2,
        };
        let got = ins.src1.is_some() as usize + ins.src2.is_some() as usize;
        if got != arity || (arity == 1 && ins.src1.is_none()) {
            return Err(err(format!("{} takes {arity} source operands", op.name())));
        }
        out.push(ins);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstrReport {
    pub line: usize,
    pub op: String,
    pub dst: String,
    pub gbidx: String,
    pub algorithm: String,
    pub mapping: String,
    pub precision: usize,
    pub elements: usize,
    pub scanned_lines: usize,
    pub select_miss: bool,
    pub stats: ExecStats,
    pub pass: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub rows: Vec<InstrReport>,
    pub totals: ExecStats,
    pub scan_energy_nj: f64,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "line",
            "op",
            "dst",
            "gbidx",
            "algorithm",
            "mapping",
            "precision",
            "elements",
            "aap_cycles",
            "rbm_cycles",
            "latency_ns",
            "energy_nj",
            "scanned_lines",
            "select_miss",
            "check",
        ])?;
        let row = |r: &InstrReport| {
            vec![
                r.line.to_string(),
                r.op.clone(),
                r.dst.clone(),
                r.gbidx.clone(),
                r.algorithm.clone(),
                r.mapping.clone(),
                r.precision.to_string(),
                r.elements.to_string(),
                r.stats.aap_cycles.to_string(),
                r.stats.rbm_cycles.to_string(),
                sig6(r.stats.latency_ns),
                sig6(r.stats.energy_nj),
                r.scanned_lines.to_string(),
                (r.select_miss as u8).to_string(),
                if r.pass { "PASS" } else { "FAIL" }.to_string(),
            ]
        };
        for r in &self.rows {
            out.write_record(row(r))?;
        }
        let t = &self.totals;
        out.write_record([
            "total".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            t.aap_cycles.to_string(),
            t.rbm_cycles.to_string(),
            sig6(t.latency_ns),
            sig6(t.energy_nj),
            String::new(),
            String::new(),
            if self.all_pass() { "PASS" } else { "FAIL" }.to_string(),
        ])?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub objective: Objective,
    /// Only consider programs for this mapping.
    pub mapping: Option<MappingKind>,
    pub seed: u64,
    pub static_mode: StaticMode,
    /// Directory searched for `<object>.bin` data files.
    pub data_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { objective: Objective::Latency, mapping: None, seed: 0, static_mode: StaticMode::Exact, data_dir: None }
    }
}

struct Object {
    values: Vec<i64>,
    declared: usize,
}

/// Two's-complement wrap of `v` to `bits`, read back signed or unsigned.
pub fn wrap(v: i128, bits: usize, signed: bool) -> i128 {
    let m = if bits >= 128 { -1i128 } else { (1i128 << bits) - 1 };
    let u = v & m;
    if signed && bits < 128 && (u >> (bits - 1)) & 1 == 1 {
        u - (1i128 << bits)
    } else {
        u
    }
}

fn to_word(v: i64, bits: usize) -> u64 {
    v as u64 & library::mask(bits)
}

/// Executes traces against one simulated bank.
pub struct TraceRunner {
    pub cfg: SimConfig,
    pub opts: RunOptions,
    pub tracker: ObjectTracker,
    model: CostModel,
    select: SelectUnit,
    bank: BankState,
    objects: HashMap<String, Object>,
    next_addr: u64,
    programs: HashMap<(GbIdx, usize), MicroProgram>,
}

impl TraceRunner {
    pub fn new(cfg: SimConfig, opts: RunOptions) -> Result<TraceRunner, TraceError> {
        let model = CostModel::new(cfg.bank.clone(), cfg.timing.clone());
        let tables = pareto_populate(&model, Profile::small(&cfg.bank), opts.objective)?;
        TraceRunner::with_tables(cfg, opts, tables)
    }

    pub fn with_tables(cfg: SimConfig, opts: RunOptions, tables: CostTables) -> Result<TraceRunner, TraceError> {
        let model = CostModel::new(cfg.bank.clone(), cfg.timing.clone());
        let bank = BankState::new(cfg.bank.clone())?;
        Ok(TraceRunner {
            select: SelectUnit::new(tables, 16),
            model,
            bank,
            cfg,
            opts,
            tracker: ObjectTracker::new(),
            objects: HashMap::new(),
            next_addr: 0,
            programs: HashMap::new(),
        })
    }

    /// Host values of an object.
    pub fn values(&self, id: &str) -> Option<&[i64]> {
        self.objects.get(id).map(|o| o.values.as_slice())
    }

    pub fn run_file(&mut self, path: &Path) -> Result<Report, TraceError> {
        let text = std::fs::read_to_string(path).map_err(|e| TraceError::Io(format!("{}: {e}", path.display())))?;
        if self.opts.data_dir.is_none() {
            self.opts.data_dir = path.parent().map(Path::to_path_buf);
        }
        self.run(&parse_trace(&text)?)
    }

    pub fn run(&mut self, trace: &[BbopInstruction]) -> Result<Report, TraceError> {
        let mut report = Report::default();
        for ins in trace {
            if let Some(r) = self.step(ins, &mut report)? {
                report.totals.merge(&r.stats);
                report.rows.push(r);
            }
        }
        Ok(report)
    }

    fn load_values(&self, ins: &BbopInstruction) -> Result<Vec<i64>, TraceError> {
        let file = self.opts.data_dir.as_ref().map(|d| d.join(format!("{}.bin", ins.dst)));
        if let Some(f) = file.filter(|f| f.exists()) {
            let bytes = std::fs::read(&f).map_err(|e| TraceError::Io(format!("{}: {e}", f.display())))?;
            if bytes.len() != 8 * ins.size {
                return Err(TraceError::Run {
                    line: ins.line,
                    message: format!("{} holds {} bytes, expected {}", f.display(), bytes.len(), 8 * ins.size),
                });
            }
            return Ok(bytes
                .chunks_exact(8)
                .map(|w| sign_extend(u64::from_le_bytes(w.try_into().expect("8 bytes")), ins.precision))
                .collect());
        }
        // no data file: seeded values spanning the declared signed range
        let mut h = self.opts.seed;
        for b in ins.dst.bytes() {
            h = h.wrapping_mul(0x100000001b3).wrapping_add(b as u64);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        let p = ins.precision as u32;
        let (lo, hi) = (-(1i128 << (p - 1)), (1i128 << (p - 1)) - 1);
        Ok((0..ins.size).map(|_| rng.gen_range(lo..=hi) as i64).collect())
    }

    fn register(&mut self, ins: &BbopInstruction, values: Vec<i64>, extremes: Option<(i64, i64)>) -> Result<(), TraceError> {
        let run = |e: PrecisionError| TraceError::Run { line: ins.line, message: e.to_string() };
        let mut e = ObjectTrackerEntry::new(&ins.dst, self.next_addr, values.len(), ins.precision).map_err(run)?;
        self.next_addr += (8 * values.len() as u64).div_ceil(64) * 64;
        if let Some((hi, lo)) = extremes {
            e.max_value = Some(hi);
            e.min_value = Some(lo);
            e.dirty = true;
        }
        self.tracker.insert(e).map_err(run)?;
        self.objects.insert(ins.dst.clone(), Object { values, declared: ins.precision });
        Ok(())
    }

    /// Extremes of an operand, scanning its lines if none are known.
    fn extremes(&mut self, ins: &BbopInstruction, id: &str, scanned: &mut usize, energy: &mut f64) -> Result<(i64, i64), TraceError> {
        let obj = self.objects.get(id).ok_or_else(|| TraceError::Unregistered { line: ins.line, object: id.into() })?;
        let run = |e: PrecisionError| TraceError::Run { line: ins.line, message: e.to_string() };
        let words: Vec<u64> = obj.values.iter().map(|&v| to_word(v, obj.declared)).collect();
        let e_line = self.cfg.timing.e_scan_per_line;
        let entry = match self.tracker.get_mut(id) {
            Ok(e) => e,
            Err(_) => {
                // evicted from the tracker: re-register and rescan
                let base = self.next_addr;
                self.next_addr += (8 * words.len() as u64).div_ceil(64) * 64;
                self.tracker.insert(ObjectTrackerEntry::new(id, base, words.len(), obj.declared).map_err(run)?).map_err(run)?;
                self.tracker.get_mut(id).map_err(run)?
            }
        };
        if entry.extremes().is_err() {
            let (lines, e) = scan_object(entry, &words, e_line).map_err(run)?;
            *scanned += lines;
            *energy += e;
        }
        entry.extremes().map_err(run)
    }

    fn program(&mut self, e: &ManifestEntry, n: usize) -> Result<MicroProgram, LibError> {
        if let Some(p) = self.programs.get(&(e.id, n)) {
            return Ok(p.clone());
        }
        let up = expand(&e.template(n), &self.cfg.bank)?;
        self.programs.insert((e.id, n), up.clone());
        Ok(up)
    }

    fn choose(&mut self, op: Opcode, n: usize) -> Result<(ManifestEntry, bool), CostError> {
        let all = manifest();
        if let Some(m) = self.opts.mapping {
            let cands: Vec<ManifestEntry> = all.into_iter().filter(|e| e.opcode == op && e.mapping == m).collect();
            let profile = Profile::small(&self.cfg.bank);
            let (id, _) = best(&self.model, &cands, n, profile, self.opts.objective)?
                .ok_or_else(|| CostError::Gap { opcode: format!("{} on {}", op.name(), m.name()), bits: vec![n] })?;
            let e = cands.into_iter().find(|e| e.id == id).expect("winner is a candidate");
            return Ok((e, false));
        }
        let s = self.select.select(op.code(), n)?;
        let e = all.into_iter().find(|e| e.id == s.id).expect("tables hold manifest ids");
        Ok((e, s.miss))
    }

    fn step(&mut self, ins: &BbopInstruction, report: &mut Report) -> Result<Option<InstrReport>, TraceError> {
        let op = match ins.op {
            BbopOp::TrspInit => {
                let v = self.load_values(ins)?;
                self.register(ins, v, None)?;
                return Ok(None);
            }
            BbopOp::Op(o) => o,
        };
        let run_err = |message: String| TraceError::Run { line: ins.line, message };
        let srcs: Vec<String> = [&ins.src1, &ins.src2].into_iter().flatten().cloned().collect();
        let mut scanned = 0;
        let mut scan_energy = 0.0;
        let mut ext = Vec::new();
        for s in &srcs {
            ext.push(self.extremes(ins, s, &mut scanned, &mut scan_energy)?);
        }
        report.scan_energy_nj += scan_energy;
        let vals: Vec<Vec<i64>> = srcs.iter().map(|s| self.objects[s].values.clone()).collect();
        let elements = ins.size.min(vals.iter().map(Vec::len).min().unwrap_or(0));
        if elements < ins.size && op != Opcode::RedSum {
            return Err(run_err(format!("operands hold {elements} elements, instruction needs {}", ins.size)));
        }
        let signed = ext.iter().any(|&(_, lo)| lo < 0);
        let (bits, propagated) = if op == Opcode::RedSum {
            (static_precision_path(ins.precision, self.opts.static_mode), None)
        } else if ins.dynamic {
            let p = precision_for_op(op, &ext).map_err(|e| run_err(e.to_string()))?;
            (p.bits, Some((p.max_value, p.min_value)))
        } else {
            (static_precision_path(ins.precision, self.opts.static_mode), None)
        };

        let (entry, miss, stats, out, pass, precision) = match op {
            Opcode::RedSum => self.red_sum(ins, &vals[0][..ins.size.min(vals[0].len())], bits, signed)?,
            Opcode::Convert => self.convert(ins, &vals[0], bits)?,
            _ => {
                let (entry, miss) = self.choose(op, bits)?;
                let up = self.program(&entry, bits).map_err(|e| run_err(e.to_string()))?;
                let (out, expect, stats) = self.binary(ins, op, &up, &vals, bits, signed)?;
                let pass = out == expect;
                (entry, miss, stats, out, pass, bits)
            }
        };
        let out_ext = propagated.or_else(|| {
            // reductions report their exact extreme
            (op == Opcode::RedSum && ins.dynamic).then(|| (out[0], out[0]))
        });
        let out_bits = if op == Opcode::Mul { 2 * precision } else { precision };
        let dst = BbopInstruction { precision: ins.precision.max(out_bits + 1).min(64), ..ins.clone() };
        self.register(&dst, out, out_ext)?;
        Ok(Some(InstrReport {
            line: ins.line,
            op: op.name().into(),
            dst: ins.dst.clone(),
            gbidx: entry.id.to_string(),
            algorithm: entry.alg.name().into(),
            mapping: entry.mapping.name(),
            precision,
            elements,
            scanned_lines: scanned,
            select_miss: miss,
            stats,
            pass,
        }))
    }

    /// Two-operand (or NOT) programs. Returns (outputs, oracle, stats).
    fn binary(
        &mut self,
        ins: &BbopInstruction,
        op: Opcode,
        up: &MicroProgram,
        vals: &[Vec<i64>],
        n: usize,
        signed: bool,
    ) -> Result<(Vec<i64>, Vec<i64>, ExecStats), TraceError> {
        let run_err = |message: String| TraceError::Run { line: ins.line, message };
        let size = ins.size;
        let a: Vec<i64> = vals[0][..size].to_vec();
        let b: Vec<i64> = vals.get(1).map_or(vec![0; size], |v| v[..size].to_vec());
        let word = |v: &[i64]| v.iter().map(|&x| to_word(x, n)).collect::<Vec<u64>>();
        let rbr = |v: &[i64], plus: bool| {
            v.iter()
                .map(|&x| {
                    let r = RbrNumber::from_twos(wrap(x as i128, n, true) as i64, n);
                    if plus {
                        r.plus
                    } else {
                        r.minus
                    }
                })
                .collect::<Vec<u64>>()
        };
        let mut inputs: Vec<Vec<u64>> = Vec::new();
        for o in &up.inputs {
            inputs.push(match o.name.as_str() {
                "A" | "N" => word(&a),
                "B" | "D" => word(&b),
                "X+" => rbr(&a, true),
                "X-" => rbr(&a, false),
                "Y+" => rbr(&b, true),
                "Y-" => rbr(&b, false),
                other => return Err(run_err(format!("no operand for program input {other}"))),
            });
        }
        let refs: Vec<&[u64]> = inputs.iter().map(Vec::as_slice).collect();
        let (outs, stats) = library::run(&mut self.bank, up, &self.cfg.timing, &refs).map_err(|e| run_err(e.to_string()))?;
        let by_name = |name: &str| up.outputs.iter().position(|o| o.name == name).map(|i| &outs[i]);
        let w = |v: i64, bits: usize, s: bool| wrap(v as i128, bits, s);
        let (got, expect): (Vec<i64>, Vec<i64>) = match op {
            Opcode::Add | Opcode::Sub => {
                let got: Vec<i64> = if let Some(zp) = by_name("Z+") {
                    let (zm, cp, cm) = (by_name("Z-").unwrap(), by_name("CARRY+").unwrap(), by_name("CARRY-").unwrap());
                    (0..size)
                        .map(|i| {
                            let v = zp[i] as i128 - zm[i] as i128 + ((cp[i] as i128 - cm[i] as i128) << n);
                            wrap(v, n, signed) as i64
                        })
                        .collect()
                } else {
                    let s = by_name("S").ok_or_else(|| run_err("program has no S output".into()))?;
                    s.iter().map(|&x| wrap(x as i128, n, signed) as i64).collect()
                };
                let expect = (0..size)
                    .map(|i| {
                        let (x, y) = (w(a[i], n, signed), w(b[i], n, signed));
                        wrap(if op == Opcode::Add { x + y } else { x - y }, n, signed) as i64
                    })
                    .collect();
                (got, expect)
            }
            Opcode::Mul => {
                let p = by_name("P").ok_or_else(|| run_err("program has no P output".into()))?;
                let got = p.iter().map(|&x| wrap(x as i128, 2 * n, true) as i64).collect();
                let expect = (0..size).map(|i| wrap(w(a[i], n, true) * w(b[i], n, true), 2 * n, true) as i64).collect();
                (got, expect)
            }
            Opcode::Div => {
                let q = by_name("Q").ok_or_else(|| run_err("program has no Q output".into()))?;
                let got = q.iter().map(|&x| x as i64).collect();
                let expect = (0..size)
                    .map(|i| {
                        let (x, y) = (w(a[i], n, false), w(b[i], n, false));
                        if y == 0 {
                            library::mask(n) as i64
                        } else {
                            (x / y) as i64
                        }
                    })
                    .collect();
                (got, expect)
            }
            Opcode::And | Opcode::Or | Opcode::Xor | Opcode::Not => {
                let d = by_name("D").ok_or_else(|| run_err("program has no D output".into()))?;
                let got = d.iter().map(|&x| wrap(x as i128, n, signed) as i64).collect();
                let expect = (0..size)
                    .map(|i| {
                        let (x, y) = (to_word(a[i], n), to_word(b[i], n));
                        let r = match op {
                            Opcode::And => x & y,
                            Opcode::Or => x | y,
                            Opcode::Xor => x ^ y,
                            _ => !x & library::mask(n),
                        };
                        wrap(r as i128, n, signed) as i64
                    })
                    .collect();
                (got, expect)
            }
            _ => return Err(run_err(format!("{} is not a two-operand program", op.name()))),
        };
        Ok((got, expect, stats))
    }

    #[allow(clippy::type_complexity)]
    fn red_sum(
        &mut self,
        ins: &BbopInstruction,
        v: &[i64],
        bits: usize,
        signed: bool,
    ) -> Result<(ManifestEntry, bool, ExecStats, Vec<i64>, bool, usize), TraceError> {
        let run_err = |message: String| TraceError::Run { line: ins.line, message };
        let (mode, alg) = if ins.dynamic { (ReductionMode::Auto, Alg::RedAuto) } else { (ReductionMode::User(bits), Alg::RedUser) };
        let n = if ins.dynamic { bits } else { bits.min(63) };
        let red = build_reduction(n, v.len(), mode, signed).map_err(|e| run_err(e.to_string()))?;
        let input: Vec<i64> = v.iter().map(|&x| wrap(x as i128, n, signed) as i64).collect();
        let (res, stats) = red.sum_long(&mut self.bank, &self.cfg.timing, &input).map_err(|e| run_err(e.to_string()))?;
        let exact: i128 = input.iter().map(|&x| x as i128).sum();
        let expect = match mode {
            ReductionMode::Auto => exact,
            ReductionMode::User(w) => wrap(exact, w, signed),
        };
        let tm = template(Opcode::RedSum, alg, MappingKind::Abps, n);
        let entry = manifest().into_iter().find(|e| e.id == tm.id).expect("reduction in manifest");
        Ok((entry, false, stats, vec![res.sum as i64], res.sum == expect, res.precision))
    }

    /// Two's complement to signed digits and back.
    #[allow(clippy::type_complexity)]
    fn convert(
        &mut self,
        ins: &BbopInstruction,
        v: &[i64],
        bits: usize,
    ) -> Result<(ManifestEntry, bool, ExecStats, Vec<i64>, bool, usize), TraceError> {
        let run_err = |message: String| TraceError::Run { line: ins.line, message };
        let n = bits.max(2);
        let size = ins.size;
        let x: Vec<u64> = v[..size].iter().map(|&x| to_word(x, n)).collect();
        let all = manifest();
        let find = |alg: Alg| all.iter().find(|e| e.opcode == Opcode::Convert && e.alg == alg).cloned().expect("conversion entry");
        let (fwd, back) = (find(Alg::TwosToRbr), find(Alg::RbrToTwos));
        let up = self.program(&fwd, n).map_err(|e| run_err(e.to_string()))?;
        let (digits, mut stats) = library::run(&mut self.bank, &up, &self.cfg.timing, &[&x]).map_err(|e| run_err(e.to_string()))?;
        let up2 = self.program(&back, n).map_err(|e| run_err(e.to_string()))?;
        let (outs, s2) = library::run(&mut self.bank, &up2, &self.cfg.timing, &[&digits[0], &digits[1]])
            .map_err(|e| run_err(e.to_string()))?;
        stats.merge(&s2);
        let got: Vec<i64> = (0..size).map(|i| rbr_result(outs[0][i], outs[1][i], n) as i64).collect();
        let expect: Vec<i64> = x.iter().map(|&w| sign_extend(w, n)).collect();
        let pass = got == expect;
        Ok((fwd, false, stats, got, pass, n))
    }

    pub fn tracker_json(&self) -> String {
        self.tracker.to_json()
    }

    /// Declared precision and extremes of every object, sorted by id.
    pub fn objects(&self) -> BTreeMap<String, (usize, Option<i64>, Option<i64>)> {
        self.objects
            .iter()
            .map(|(k, o)| {
                let e = self.tracker.get(k);
                (k.clone(), (o.declared, e.and_then(|e| e.max_value), e.and_then(|e| e.min_value)))
            })
            .collect()
    }
}
