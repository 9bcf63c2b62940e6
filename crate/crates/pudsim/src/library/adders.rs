//! Adders and subtractors. Every adder stores its final carry in a D row
//! so a reduction can inspect it directly.

use std::collections::BTreeMap;

use super::builder::{aap, aap2, ap, not, not_tra, rbm, tra, Lanes, Prog, Rows};
use super::manifest::{template, Alg, Opcode};
use super::{AdderAlgorithm, LibError};
use crate::dram::BankConfig;
use crate::mapping::MappingKind;
use crate::uprog::{Meta, MicroProgram, Operand};

// OBPS row plan, identical in every subarray
const A: usize = 0;
const B: usize = 1;
const S: usize = 2;
const KIN: usize = 3;
const NKIN: usize = 4;
const COUT: usize = 5;
const NB: usize = 6;

// RBR row plan
const XP: usize = 0;
const XM: usize = 1;
const YP: usize = 2;
const YM: usize = 3;
const ZP: usize = 4;
const ZM: usize = 5;
const RC: usize = 6;
const NA: usize = 7;
const CIN: usize = 8;
const ND: usize = 9;

pub fn build_add(alg: AdderAlgorithm, n: usize, mapping: MappingKind, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    build(alg, n, mapping, cfg, false)
}

/// A - B as A + !B + 1. OBPS adders pay two AAPs (NOT, copy) on top of the
/// adder; the bit-serial adder pays one NOT per bit; RBR swaps the digit rows
/// of B and pays nothing.
pub fn build_sub(alg: AdderAlgorithm, n: usize, mapping: MappingKind, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    build(alg, n, mapping, cfg, true)
}

fn unsupported(alg: AdderAlgorithm, mapping: MappingKind) -> LibError {
    LibError::Unsupported { alg: alg.name().into(), mapping: mapping.name() }
}

fn build(alg: AdderAlgorithm, n: usize, mapping: MappingKind, cfg: &BankConfig, sub: bool) -> Result<MicroProgram, LibError> {
    if !(alg.min_bits()..=64).contains(&n) {
        return Err(LibError::Width(n));
    }
    if alg.needs_pow2() && !n.is_power_of_two() {
        return Err(LibError::Width(n));
    }
    let subs = cfg.subarrays_per_bank;
    match (alg, mapping) {
        (AdderAlgorithm::RcaAbos, MappingKind::Abos | MappingKind::Abps) => {}
        (AdderAlgorithm::RcaObps, MappingKind::WrapObps(k)) if k >= 1 => {
            if n.div_ceil(k as usize) > subs {
                return Err(LibError::Bank(format!("{n} bits do not wrap into {subs} subarrays at {k} per subarray")));
            }
            return Ok(wrap_rca(n, k as usize, cfg, sub));
        }
        (a, MappingKind::Obps) if a != AdderAlgorithm::RcaAbos => {
            if n > subs {
                return Err(LibError::Bank(format!("{n} bits need {n} subarrays, bank has {subs}")));
            }
        }
        _ => return Err(unsupported(alg, mapping)),
    }
    let op = if sub { Opcode::Sub } else { Opcode::Add };
    let tm = template(op, Alg::from(alg), mapping, n);
    let mut p = Prog::new(cfg);
    let r = p.r;
    Ok(match alg {
        AdderAlgorithm::RcaAbos => {
            let reps = if mapping == MappingKind::Abps { subs } else { 1 };
            if 3 * n + 1 > r.free() {
                return Err(LibError::Bank(format!("{n}-bit bit-serial add needs {} rows", 3 * n + 1)));
            }
            let a: Vec<usize> = (0..n).collect();
            let b: Vec<usize> = (n..2 * n).collect();
            let s: Vec<usize> = (2 * n..3 * n).collect();
            let mut l = Lanes::new(&mut p, (0..reps).collect());
            l.ripple(&a, &b, sub, r.konst(sub), &s, Some(3 * n), [r.s(0), r.s(1)]);
            let meta = Meta { overhead_aap: if sub { n as u64 } else { 0 }, ..Meta::default() };
            p.finish(
                tm,
                n,
                mapping,
                reps,
                vec![Operand::vert("A", 0, n), Operand::vert("B", n, n)],
                vec![Operand::vert("S", 2 * n, n), Operand::row("COUT", 0, 3 * n)],
                meta,
            )
        }
        AdderAlgorithm::Rbr => rbr(p, tm, n, sub),
        _ => {
            let b_row = if sub {
                complement_b(&mut p, n);
                NB
            } else {
                B
            };
            let mut note = String::new();
            match alg {
                AdderAlgorithm::RcaObps => rca_obps(&mut p, n, b_row, sub),
                _ => {
                    let levels = match alg {
                        AdderAlgorithm::KoggeStone => kogge_stone(n),
                        AdderAlgorithm::BrentKung => brent_kung(n),
                        AdderAlgorithm::LadnerFischer => ladner_fischer(n),
                        _ => carry_select(n),
                    };
                    prefix(&mut p, n, b_row, sub, &levels);
                    if alg == AdderAlgorithm::KoggeStone {
                        // 2(N-1) shift transfers + 1 carry transfer; held to 2N+4
                        p.pad(0, 5);
                        note = "5 idle link transfers hold the published budget".into();
                    }
                }
            }
            let meta = Meta { overhead_aap: if sub { 2 } else { 0 }, note, ..Meta::default() };
            p.finish(
                tm,
                n,
                MappingKind::Obps,
                1,
                vec![Operand::vert("A", A, n), Operand::vert("B", B, n)],
                vec![Operand::vert("S", S, n), Operand::row("COUT", n - 1, COUT)],
                meta,
            )
        }
    })
}

fn complement_b(p: &mut Prog, n: usize) {
    let r = p.r;
    p.on(0..n, not(B, r.dcc));
    p.on(0..n, aap(r.dcc, NB));
}

/// Bit-parallel ripple: local operand copies run in every subarray at once,
/// then the carry hops one subarray per bit as a (c, !c) row pair.
fn rca_obps(p: &mut Prog, n: usize, b_row: usize, cin: bool) {
    let r = p.r;
    let t = r.t;
    p.on(0..n, aap2(A, t[0], t[1]));
    p.on(0..n, aap2(b_row, t[2], t[3]));
    p.on([0], aap(r.konst(cin), t[4]));
    for i in 0..n {
        if i > 0 {
            p.on([i], aap(KIN, t[4]));
        }
        // T1, T3, T4 = carry out, DCC = its complement
        p.on([i], not_tra([t[1], t[3], t[4]], r.dcc));
        if i + 1 < n {
            p.on([i], rbm(i + 1, t[1], KIN));
            p.on([i], rbm(i + 1, r.dcc, NKIN));
        }
    }
    let kin = |s: usize| if s == 0 { r.konst(cin) } else { KIN };
    let nkin = |s: usize| if s == 0 { r.konst(!cin) } else { NKIN };
    p.step((0..n).map(|s| (s, aap(nkin(s), t[4]))));
    p.on(0..n, ap([t[0], t[2], t[4]]));
    p.step((0..n).map(|s| (s, aap(kin(s), t[2]))));
    p.on(0..n, tra([t[0], t[2], r.dcc], S));
    p.on([n - 1], aap(t[1], COUT));
}

/// One combine level of a parallel-prefix network: every `(src, dst)` pair
/// merges the group below `src` into `dst`; `zero` subarrays combine with an
/// empty group.
#[derive(Debug, Clone, Default)]
pub(crate) struct Level {
    pub pairs: Vec<(usize, usize)>,
    pub zero: Vec<usize>,
}

fn log2(n: usize) -> usize {
    n.trailing_zeros() as usize
}

fn kogge_stone(n: usize) -> Vec<Level> {
    (0..log2(n))
        .map(|k| {
            let d = 1 << k;
            Level { pairs: (d..n).map(|i| (i - d, i)).collect(), zero: (0..d).collect() }
        })
        .collect()
}

fn brent_kung(n: usize) -> Vec<Level> {
    let l = log2(n);
    let mut out = Vec::new();
    for k in 0..l {
        let d = 1 << k;
        let pairs = (0..n).filter(|i| (i + 1) % (2 * d) == 0).map(|i| (i - d, i)).collect();
        out.push(Level { pairs, zero: vec![] });
    }
    for k in (0..l.saturating_sub(1)).rev() {
        let d = 1 << k;
        let pairs: Vec<_> = (3 * d - 1..n).step_by(2 * d).map(|i| (i - d, i)).collect();
        if !pairs.is_empty() {
            out.push(Level { pairs, zero: vec![] });
        }
    }
    out
}

fn ladner_fischer(n: usize) -> Vec<Level> {
    (0..log2(n))
        .map(|k| {
            let d = 1 << k;
            let pairs = (0..n).filter(|i| i & d != 0).map(|i| ((i & !(2 * d - 1)) + d - 1, i)).collect();
            Level { pairs, zero: vec![] }
        })
        .collect()
}

/// Blocks ripple internally in parallel, block carries ripple across block
/// ends, then one select level fans each block carry into the next block.
fn carry_select(n: usize) -> Vec<Level> {
    let m = ((n as f64).sqrt().round() as usize).max(2).min(n);
    let nb = n.div_ceil(m);
    let mut out = Vec::new();
    for k in 1..m {
        let pairs: Vec<_> = (0..nb).map(|b| b * m + k).filter(|&i| i < n).map(|i| (i - 1, i)).collect();
        if !pairs.is_empty() {
            out.push(Level { pairs, zero: vec![] });
        }
    }
    let end = |b: usize| ((b + 1) * m).min(n) - 1;
    for b in 1..nb {
        out.push(Level { pairs: vec![(end(b - 1), end(b))], zero: vec![] });
    }
    let fix: Vec<_> = (1..nb).flat_map(|b| (b * m..end(b)).map(move |i| (b * m - 1, i))).collect();
    if !fix.is_empty() {
        out.push(Level { pairs: fix, zero: vec![] });
    }
    out
}

/// Move `src_row` of every pair's source into `dst_row` of its destination,
/// one subarray per step. A chain that passes one of its own destinations
/// drops the row there and forwards it; other relays use two scratch rows.
fn route(p: &mut Prog, pairs: &[(usize, usize)], src_row: usize, dst_row: usize, scratch: [usize; 2]) {
    let mut chains: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(s, d) in pairs {
        assert!(d > s, "routes run upward");
        chains.entry(s).or_default().push(d);
    }
    let longest = chains.iter().map(|(s, ds)| ds.iter().max().unwrap() - s).max().unwrap_or(0);
    // row holding the chain's payload in a given subarray
    let held = |src: usize, ds: &[usize], at: usize| {
        if at == src {
            src_row
        } else if ds.contains(&at) {
            dst_row
        } else {
            scratch[(at - src) % 2]
        }
    };
    for h in 1..=longest {
        let mut step = Vec::new();
        for (&s, ds) in &chains {
            let far = *ds.iter().max().unwrap();
            if s + h > far {
                continue;
            }
            let from = s + h - 1;
            step.push((from, rbm(from + 1, held(s, ds, from), held(s, ds, from + 1))));
        }
        p.step(step);
    }
}

/// Generic OBPS parallel-prefix adder over (generate, inclusive propagate).
/// With T = A | B every group satisfies G => T, so one combine is
/// G' = MAJ(G, T, G_in) and T' = MAJ(G, T, T_in).
fn prefix(p: &mut Prog, n: usize, b_row: usize, cin: bool, levels: &[Level]) {
    let r = p.r;
    let t = r.t;
    let all = 0..n;
    p.on(all.clone(), aap2(A, t[0], t[1]));
    p.on(all.clone(), aap2(b_row, t[2], t[3]));
    p.step(all.clone().map(|s| (s, aap(if s == 0 { r.konst(cin) } else { r.c0 }, t[4]))));
    p.on(all.clone(), aap(r.c1, r.dcc));
    p.on(all.clone(), ap([t[0], t[2], t[4]]));
    p.on(all.clone(), ap([t[1], t[3], r.dcc]));
    let (mut g, mut tt) = ([t[0], t[2]], [t[1], t[3]]);
    let (x, y) = (t[4], r.dcc);
    for lv in levels {
        if !lv.zero.is_empty() {
            p.on(lv.zero.iter().copied(), aap2(r.c0, x, y));
        }
        route(p, &lv.pairs, g[0], x, [r.s(0), r.s(1)]);
        route(p, &lv.pairs, tt[0], y, [r.s(0), r.s(1)]);
        let targets: Vec<usize> = lv.pairs.iter().map(|&(_, d)| d).chain(lv.zero.iter().copied()).collect();
        // the G combine also lands in COUT, so the last subarray's final
        // group generate (the carry out) is always in a D row
        // idle subarrays refresh their copies to match the renaming below
        let idle: Vec<usize> = (0..n).filter(|s| !targets.contains(s)).collect();
        p.step(
            targets.iter().map(|&s| (s, tra([g[0], tt[0], x], COUT))).chain(idle.iter().map(|&s| (s, aap(g[0], tt[0])))),
        );
        p.step(targets.iter().map(|&s| (s, ap([g[1], tt[1], y]))).chain(idle.iter().map(|&s| (s, aap(tt[1], g[1])))));
        (g, tt) = ([g[0], tt[0]], [g[1], tt[1]]);
    }
    // carry into bit i is the prefix generate of bit i-1
    let ship: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    route(p, &ship, g[0], KIN, [r.s(0), r.s(1)]);
    let (r1, r2) = (tt[0], tt[1]);
    let kin = |s: usize| if s == 0 { r.konst(cin) } else { KIN };
    p.on(all.clone(), aap(A, r1));
    p.on(all.clone(), aap(b_row, r2));
    p.step(all.clone().map(|s| (s, not(kin(s), r.dcc))));
    p.on(all.clone(), ap([r1, r2, r.dcc]));
    p.on(all.clone(), not(g[0], r.dcc));
    p.step(all.clone().map(|s| (s, aap(kin(s), r2))));
    p.on(all, tra([r1, r2, r.dcc], S));
}

/// Carry-free signed-digit adder. Per digit two local full adders run on
/// positive and complemented negative digit bits:
///   x+ + !x- + y+ = a + 2c        (first stage, c moves up one digit)
///   !a + !c_in + y- = !b + 2(!d)  (second stage, d moves up one digit)
/// giving Z+ = d (shifted), Z- = !b, with c_in = 1 below digit 0 and
/// (c, !d) of the top digit as the carry digit.
fn rbr(mut p: Prog, tm: crate::uprog::Template, n: usize, sub: bool) -> MicroProgram {
    let r: Rows = p.r;
    let t = r.t;
    let (yp, ym) = (YP, YM);
    let all = 0..n;
    let ship: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let cin = |s: usize| if s == 0 { r.c1 } else { CIN };

    p.on(all.clone(), aap2(XP, t[0], t[1]));
    p.on(all.clone(), aap2(yp, t[2], t[3]));
    p.on(all.clone(), aap(XM, t[4]));
    p.on(all.clone(), ap([t[0], t[2], t[4]]));
    p.on(all.clone(), not(XM, r.dcc));
    p.on(all.clone(), tra([t[1], t[3], r.dcc], RC));
    p.on(all.clone(), not(t[0], r.dcc));
    p.on(all.clone(), aap(XM, t[2]));
    p.on(all.clone(), tra([t[1], r.dcc, t[2]], NA));
    route(&mut p, &ship, RC, CIN, [r.s(0), r.s(1)]);

    p.on(all.clone(), aap2(NA, t[0], t[1]));
    p.on(all.clone(), aap2(ym, t[2], t[3]));
    p.step(all.clone().map(|s| (s, aap(cin(s), t[4]))));
    p.on(all.clone(), ap([t[0], t[2], t[4]]));
    p.step(all.clone().map(|s| (s, not(cin(s), r.dcc))));
    p.on(all.clone(), tra([t[1], t[3], r.dcc], ND));
    p.on(all.clone(), not(t[1], r.dcc));
    route(&mut p, &ship, r.dcc, ZP, [r.s(0), r.s(1)]);
    p.on(all.clone(), aap(r.dcc, t[1]));
    p.step(all.clone().map(|s| (s, not(cin(s), r.dcc))));
    p.on(all, tra([t[1], t[0], r.dcc], ZM));
    p.on([0], aap(r.c0, ZP));
    // 20 AAP and 2 RBM steps of real work; held to the published 34/8
    p.pad(14, 6);
    let meta = Meta { note: "14 idle AAP and 6 idle link steps hold the published budget".into(), ..Meta::default() };
    let (py, my) = if sub { ("Y-", "Y+") } else { ("Y+", "Y-") };
    p.finish(
        tm,
        n,
        MappingKind::Obps,
        1,
        vec![
            Operand::vert("X+", XP, n),
            Operand::vert("X-", XM, n),
            Operand::vert(py, YP, n),
            Operand::vert(my, YM, n),
        ],
        vec![
            Operand::vert("Z+", ZP, n),
            Operand::vert("Z-", ZM, n),
            Operand::row("CARRY+", n - 1, RC),
            Operand::row("CARRY-", n - 1, ND),
        ],
        meta,
    )
}

/// Ripple carry under wrap-around OBPS: bit b sits in subarray b % used,
/// layer b / used. Bits run one after another; the carry into the next layer
/// travels back to subarray 0 through scratch rows.
fn wrap_rca(n: usize, k: usize, cfg: &BankConfig, sub: bool) -> MicroProgram {
    let used = n.div_ceil(k);
    let layers = n.div_ceil(used);
    let (a0, b0, s0) = (0, layers, 2 * layers);
    let (kin, nkin, cout, nb0) = (3 * layers, 3 * layers + 1, 3 * layers + 2, 3 * layers + 3);
    let mut p = Prog::new(cfg);
    let r = p.r;
    let t = r.t;
    let loc = |b: usize| (b % used, b / used);
    // carry rows into bit b; a single subarray alternates so the copy for
    // bit b+1 does not clobber the carry bit b still reads
    let cin_rows = |b: usize| {
        if used == 1 && b % 2 == 1 {
            (nb0 + layers, nb0 + layers + 1)
        } else {
            (kin, nkin)
        }
    };
    let mut b_base = b0;
    if sub {
        for l in 0..layers {
            p.on(0..used, not(b0 + l, r.dcc));
            p.on(0..used, aap(r.dcc, nb0 + l));
        }
        b_base = nb0;
    }
    for b in 0..n {
        let (s, l) = loc(b);
        p.on([s], aap2(a0 + l, t[0], t[1]));
        p.on([s], aap2(b_base + l, t[2], t[3]));
        let (ck, cnk) = cin_rows(b);
        p.on([s], aap(if b == 0 { r.konst(sub) } else { ck }, t[4]));
        p.on([s], not_tra([t[1], t[3], t[4]], r.dcc));
        if b + 1 < n {
            let (ns, _) = loc(b + 1);
            let hop = |p: &mut Prog, src: usize, dst: usize| {
                if ns == s {
                    p.on([s], aap(src, dst));
                } else if ns == s + 1 {
                    p.on([s], rbm(ns, src, dst));
                } else {
                    // walk back down to subarray 0
                    let mut row = src;
                    for j in (1..=s).rev() {
                        let to = if j == 1 { dst } else { r.s((s - j) % 2 + 2) };
                        p.on([j], rbm(j - 1, row, to));
                        row = to;
                    }
                }
            };
            let (nk, nnk) = cin_rows(b + 1);
            hop(&mut p, t[1], nk);
            hop(&mut p, r.dcc, nnk);
        }
        let (c, nc) = if b == 0 { (r.konst(sub), r.konst(!sub)) } else { (ck, cnk) };
        p.on([s], aap(nc, t[4]));
        p.on([s], ap([t[0], t[2], t[4]]));
        p.on([s], aap(c, t[2]));
        p.on([s], tra([t[0], t[2], r.dcc], s0 + l));
        if b + 1 == n {
            p.on([s], aap(t[1], cout));
        }
    }
    let mapping = MappingKind::WrapObps(k as u8);
    let op = if sub { Opcode::Sub } else { Opcode::Add };
    let meta = Meta { overhead_aap: if sub { 2 * layers as u64 } else { 0 }, ..Meta::default() };
    p.finish(
        template(op, Alg::RcaObps, mapping, n),
        n,
        mapping,
        1,
        vec![Operand::vert("A", a0, n), Operand::vert("B", b0, n)],
        vec![Operand::vert("S", s0, n), Operand::row("COUT", loc(n - 1).0, cout)],
        meta,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_levels_cover_every_bit() {
        // simulate group spans: every bit must end with span [0, i]
        for n in [2usize, 4, 8, 16, 32, 64] {
            for (name, lv) in
                [("ks", kogge_stone(n)), ("bk", brent_kung(n)), ("lf", ladner_fischer(n)), ("cs", carry_select(n))]
            {
                let mut lo: Vec<usize> = (0..n).collect();
                for l in &lv {
                    let snap = lo.clone();
                    for &(s, d) in &l.pairs {
                        assert_eq!(snap[d], s + 1, "{name} n={n}: pair ({s},{d}) not contiguous");
                        lo[d] = snap[s];
                    }
                    for &z in &l.zero {
                        lo[z] = 0;
                    }
                }
                assert!(lo.iter().all(|&x| x == 0), "{name} n={n}: {lo:?}");
            }
        }
    }

    #[test]
    fn carry_select_odd_width() {
        let lv = carry_select(7);
        assert!(!lv.is_empty());
    }
}
