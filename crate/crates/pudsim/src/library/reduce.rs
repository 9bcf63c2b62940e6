//! Vector-to-scalar reduction trees with carry-driven precision growth.
//!
//! One vector per column. Elements are dealt over a power-of-two set of
//! subarrays, pairs are added inside every subarray in parallel, then the
//! partial sums meet across subarrays through pipelined row moves. After
//! each level the host reads one flag row per subarray (the OR of every
//! pair's carry or overflow row) and decides the next width.

use serde::{Deserialize, Serialize};

use super::builder::{rbm, Lanes, Prog, Rows};
use super::manifest::{template, Alg, Opcode};
use super::{mask, LibError};
use crate::dram::{BankConfig, BankState, TimingEnergyConfig};
use crate::mapping::MappingKind;
use crate::uprog::{execute, ExecStats, Meta, MicroProgram, Operand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReductionMode {
    Auto,
    /// Fixed output width; overflow is flagged and the sum wraps.
    User(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub bits: usize,
    /// Padded to a power of two.
    pub elements: usize,
    pub mode: ReductionMode,
    pub signed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub sum: i128,
    pub precision: usize,
    /// Width after each level, starting with the input width.
    pub trace: Vec<usize>,
    pub overflow: bool,
}

pub fn build_reduction(bits: usize, elements: usize, mode: ReductionMode, signed: bool) -> Result<Reduction, LibError> {
    let top = if matches!(mode, ReductionMode::Auto) { 63 } else { 64 };
    if !(1..=top).contains(&bits) || elements == 0 {
        return Err(LibError::Width(bits));
    }
    if let ReductionMode::User(w) = mode {
        if w < bits || w > 64 {
            return Err(LibError::Width(w));
        }
    }
    Ok(Reduction { bits, elements: elements.next_power_of_two(), mode, signed })
}

struct Plan {
    used: usize,
    per_sub: usize,
    w0: usize,
    far: usize,
}

impl Reduction {
    fn levels(&self) -> usize {
        self.elements.trailing_zeros() as usize
    }

    fn plan(&self, cfg: &BankConfig) -> Result<Plan, LibError> {
        let pow2_subs = 1usize << (usize::BITS - 1 - cfg.subarrays_per_bank.leading_zeros());
        let used = pow2_subs.min(self.elements);
        let per_sub = self.elements / used;
        let w0 = match self.mode {
            ReductionMode::Auto => self.bits,
            ReductionMode::User(w) => w,
        };
        let wmax = w0 + self.levels() + 1;
        let far = (per_sub * w0).max(wmax + 1);
        if far + wmax > Rows::new(cfg).free() {
            return Err(LibError::Bank(format!(
                "{} elements of {} bits need {} rows per subarray",
                self.elements,
                w0,
                far + wmax
            )));
        }
        Ok(Plan { used, per_sub, w0, far })
    }

    /// Sum every vector (one per column; at most `elements` values each).
    pub fn run(
        &self,
        bank: &mut BankState,
        t: &TimingEnergyConfig,
        vectors: &[Vec<i64>],
    ) -> Result<(Vec<ReductionResult>, ExecStats), LibError> {
        let cfg = bank.config().clone();
        let plan = self.plan(&cfg)?;
        let mut out = Vec::with_capacity(vectors.len());
        let mut stats = ExecStats::default();
        for chunk in vectors.chunks(cfg.columns_per_row) {
            if chunk.iter().any(|v| v.len() > self.elements) {
                return Err(LibError::Operands { expected: self.elements, got: chunk.iter().map(Vec::len).max().unwrap_or(0) });
            }
            let (res, s) = self.run_chunk(bank, t, &plan, chunk)?;
            stats.merge(&s);
            out.extend(res);
        }
        Ok((out, stats))
    }

    /// Sum one vector of any length. Vectors too long for one column are
    /// cut into column-sized pieces; their partial sums, gathered and placed
    /// again, go through a second reduction.
    pub fn sum_long(
        &self,
        bank: &mut BankState,
        t: &TimingEnergyConfig,
        v: &[i64],
    ) -> Result<(ReductionResult, ExecStats), LibError> {
        let cfg = bank.config().clone();
        if self.plan(&cfg).is_ok() && v.len() <= self.elements {
            let (mut r, s) = self.run(bank, t, &[v.to_vec()])?;
            return Ok((r.remove(0), s));
        }
        let mut chunk = self.elements.min(v.len().next_power_of_two());
        let piece = loop {
            if chunk < 2 {
                return Err(LibError::Bank("no reduction fits one column".into()));
            }
            chunk /= 2;
            let r = Reduction { elements: chunk, ..self.clone() };
            if r.plan(&cfg).is_ok() {
                break r;
            }
        };
        let parts: Vec<Vec<i64>> = v.chunks(chunk).map(<[i64]>::to_vec).collect();
        if parts.len() > cfg.columns_per_row {
            return Err(LibError::Bank(format!("{} elements exceed one row of pieces", v.len())));
        }
        let (first, mut stats) = piece.run(bank, t, &parts)?;
        let w1 = first[0].precision;
        let partial: Vec<i64> = first.iter().map(|r| r.sum as i64).collect();
        let bits = if matches!(self.mode, ReductionMode::Auto) { w1 } else { w1.min(64) };
        let second = build_reduction(bits, partial.len(), self.mode, self.signed)?;
        let (mut out, s2) = second.sum_long(bank, t, &partial)?;
        stats.merge(&s2);
        let mut trace = first[0].trace.clone();
        trace.extend(out.trace.iter().skip(1));
        out.trace = trace;
        out.overflow |= first.iter().any(|r| r.overflow);
        Ok((out, stats))
    }

    fn run_chunk(
        &self,
        bank: &mut BankState,
        t: &TimingEnergyConfig,
        plan: &Plan,
        vecs: &[Vec<i64>],
    ) -> Result<(Vec<ReductionResult>, ExecStats), LibError> {
        let cfg = bank.config().clone();
        let words = cfg.words_per_row();
        let r = Rows::new(&cfg);
        let (acc, ind, sa) = (r.s(4), r.s(5), r.s(6));
        let w0 = plan.w0;
        let m = mask(w0);
        // placement
        for sub in 0..plan.used {
            for slot in 0..plan.per_sub {
                let j = sub * plan.per_sub + slot;
                let mut rows = vec![vec![0u64; words]; w0];
                for (c, v) in vecs.iter().enumerate() {
                    let x = v.get(j).copied().unwrap_or(0) as u64 & m;
                    for (b, row) in rows.iter_mut().enumerate() {
                        if (x >> b) & 1 == 1 {
                            row[c / 64] |= 1 << (c % 64);
                        }
                    }
                }
                for (b, row) in rows.iter().enumerate() {
                    bank.write_row(sub, slot * w0 + b, row)?;
                }
            }
        }
        let mut stats = ExecStats::default();
        let mut w = w0;
        let mut trace = vec![w];
        let mut overflow = false;
        let signed = self.signed;
        let add_pair = |l: &mut Lanes, a0: usize, b0: usize, w: usize| {
            let a: Vec<usize> = (a0..a0 + w).collect();
            let b: Vec<usize> = (b0..b0 + w).collect();
            let k = [r.s(0), r.s(1)];
            if signed {
                l.copy(a[w - 1], sa);
                let ax: Vec<usize> = a.iter().copied().chain([sa]).collect();
                let bx: Vec<usize> = b.iter().copied().chain([b[w - 1]]).collect();
                let sum: Vec<usize> = (a0..a0 + w + 1).collect();
                l.ripple(&ax, &bx, false, r.c0, &sum, None, k);
                l.xor(sum[w], sum[w - 1], ind);
                l.or(acc, ind, acc);
            } else {
                l.ripple(&a, &b, false, r.c0, &a, Some(a0 + w), k);
                l.or(acc, a0 + w, acc);
            }
        };
        let mut finish_level = |bank: &BankState, subs: &[usize], w: &mut usize, trace: &mut Vec<usize>| {
            let grow = subs.iter().any(|&s| bank.row(s, acc).iter().any(|&x| x != 0));
            match self.mode {
                ReductionMode::Auto if grow => *w += 1,
                ReductionMode::User(_) if grow => overflow = true,
                _ => {}
            }
            trace.push(*w);
        };

        let mut h = 1;
        while h < plan.per_sub {
            let subs: Vec<usize> = (0..plan.used).collect();
            let mut p = Prog::new(&cfg);
            {
                let mut l = Lanes::new(&mut p, subs.clone());
                l.copy(r.c0, acc);
                for q in (0..plan.per_sub).step_by(2 * h) {
                    add_pair(&mut l, q * w0, (q + h) * w0, w);
                }
            }
            stats.merge(&execute(&self.level(p), bank, t)?);
            finish_level(bank, &subs, &mut w, &mut trace);
            h *= 2;
        }
        let mut d = 1;
        while d < plan.used {
            let subs: Vec<usize> = (0..plan.used).step_by(2 * d).collect();
            let mut p = Prog::new(&cfg);
            move_rows(&mut p, &subs, d, w, plan.far, [r.s(2), r.s(3)]);
            {
                let mut l = Lanes::new(&mut p, subs.clone());
                l.copy(r.c0, acc);
                add_pair(&mut l, 0, plan.far, w);
            }
            stats.merge(&execute(&self.level(p), bank, t)?);
            finish_level(bank, &subs, &mut w, &mut trace);
            d *= 2;
        }
        let res = (0..vecs.len())
            .map(|c| {
                let raw = (0..w).fold(0u64, |acc, b| acc | ((bank.bit(0, b, c) as u64) << b));
                let sum = if signed { crate::mapping::sign_extend(raw, w) as i128 } else { raw as i128 };
                ReductionResult { sum, precision: w, trace: trace.clone(), overflow }
            })
            .collect();
        Ok((res, stats))
    }

    fn level(&self, p: Prog) -> MicroProgram {
        let alg = if matches!(self.mode, ReductionMode::Auto) { Alg::RedAuto } else { Alg::RedUser };
        p.finish(
            template(Opcode::RedSum, alg, MappingKind::Abps, self.bits),
            self.bits,
            MappingKind::Abps,
            1,
            vec![],
            vec![],
            Meta::default(),
        )
    }
}

/// Rows 0..w of subarray s+d land in rows far..far+w of subarray s, for every
/// s in `dst`. Row j leaves at step j and hops down one subarray per step.
fn move_rows(p: &mut Prog, dst: &[usize], d: usize, w: usize, far: usize, scratch: [usize; 2]) {
    for step in 0..w + d - 1 {
        let mut st = Vec::new();
        for &s in dst {
            for j in 0..w {
                if step < j || step >= j + d {
                    continue;
                }
                let hop = step - j;
                let from = s + d - hop;
                let src = if hop == 0 { j } else { scratch[j % 2] };
                let to = if hop + 1 == d { far + j } else { scratch[j % 2] };
                st.push((from, rbm(from - 1, src, to)));
            }
        }
        p.step(st);
    }
}

/// One reduction level as a stand-alone template: S = A + B over n bits with
/// a sign-extended (n+1)-bit result and an overflow flag row.
pub(crate) fn level_program(n: usize, auto: bool, mapping: MappingKind, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    if !(1..=64).contains(&n) {
        return Err(LibError::Width(n));
    }
    let subs: Vec<usize> = match mapping {
        MappingKind::Abos => vec![0],
        MappingKind::Abps => (0..cfg.subarrays_per_bank).collect(),
        m => return Err(LibError::Unsupported { alg: "reduction".into(), mapping: m.name() }),
    };
    let reps = subs.len();
    let mut p = Prog::new(cfg);
    let r = p.r;
    let flag = 3 * n + 1;
    {
        let mut l = Lanes::new(&mut p, subs);
        let a: Vec<usize> = (0..n).chain([n - 1]).collect();
        let b: Vec<usize> = (n..2 * n).chain([2 * n - 1]).collect();
        let s: Vec<usize> = (2 * n..3 * n + 1).collect();
        l.ripple(&a, &b, false, r.c0, &s, None, [r.s(0), r.s(1)]);
        l.xor(s[n], s[n - 1], flag);
    }
    let alg = if auto { Alg::RedAuto } else { Alg::RedUser };
    Ok(p.finish(
        template(Opcode::RedSum, alg, mapping, n),
        n,
        mapping,
        reps,
        vec![Operand::vert("A", 0, n), Operand::vert("B", n, n)],
        vec![Operand::vert("S", 2 * n, n + 1), Operand::row("OVF", 0, flag)],
        Meta::default(),
    ))
}
