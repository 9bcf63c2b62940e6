//! Multiplication, division and bitwise logic on vertically laid out data.
//! Shifts are free: a shifted operand is the same rows addressed at an offset.

use serde::{Deserialize, Serialize};

use super::builder::{Lanes, Prog};
use super::manifest::{template, Alg, Opcode};
use super::{AdderAlgorithm, LibError};
use crate::dram::BankConfig;
use crate::mapping::MappingKind;
use crate::uprog::{Meta, MicroProgram, Operand};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MulKind {
    Booth,
    Karatsuba,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MulMethod {
    pub method: MulKind,
    pub inner_adder: AdderAlgorithm,
    pub mapping: MappingKind,
}

impl MulMethod {
    pub fn booth(mapping: MappingKind) -> MulMethod {
        MulMethod { method: MulKind::Booth, inner_adder: AdderAlgorithm::RcaAbos, mapping }
    }

    pub fn karatsuba(mapping: MappingKind) -> MulMethod {
        MulMethod { method: MulKind::Karatsuba, inner_adder: AdderAlgorithm::RcaAbos, mapping }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicOp {
    And,
    Or,
    Xor,
    Not,
}

impl LogicOp {
    pub fn opcode(&self) -> Opcode {
        match self {
            LogicOp::And => Opcode::And,
            LogicOp::Or => Opcode::Or,
            LogicOp::Xor => Opcode::Xor,
            LogicOp::Not => Opcode::Not,
        }
    }
}

/// Bump allocator over operand rows with stack-style release.
struct Alloc {
    next: usize,
    limit: usize,
}

impl Alloc {
    fn take(&mut self, n: usize) -> Result<Vec<usize>, LibError> {
        if self.next + n > self.limit {
            return Err(LibError::Bank(format!("out of rows ({} needed past {})", n, self.next)));
        }
        let v = (self.next..self.next + n).collect();
        self.next += n;
        Ok(v)
    }

    fn one(&mut self) -> Result<usize, LibError> {
        Ok(self.take(1)?[0])
    }
}

fn lanes_for(mapping: MappingKind, cfg: &BankConfig) -> Result<Vec<usize>, LibError> {
    match mapping {
        MappingKind::Abos => Ok(vec![0]),
        MappingKind::Abps => Ok((0..cfg.subarrays_per_bank).collect()),
        m => Err(LibError::Unsupported { alg: "bit-serial arithmetic".into(), mapping: m.name() }),
    }
}

/// Extend `rows` to `w` entries with `fill`.
fn ext(rows: &[usize], w: usize, fill: usize) -> Vec<usize> {
    (0..w).map(|i| rows.get(i).copied().unwrap_or(fill)).collect()
}

/// Signed N x N -> 2N-bit product.
pub fn build_mul(m: MulMethod, n: usize, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    if !(1..=32).contains(&n) {
        return Err(LibError::Width(n));
    }
    if m.method == MulKind::Karatsuba && (n < 4 || !n.is_power_of_two()) {
        return Err(LibError::Width(n));
    }
    if m.inner_adder != AdderAlgorithm::RcaAbos {
        return Err(LibError::Unsupported { alg: m.inner_adder.name().into(), mapping: m.mapping.name() });
    }
    let subs = lanes_for(m.mapping, cfg)?;
    let reps = subs.len();
    let mut p = Prog::new(cfg);
    let r = p.r;
    let mut al = Alloc { next: 0, limit: r.free() };
    let x = al.take(n)?;
    let y = al.take(n)?;
    let prod = al.take(2 * n)?;
    let alg = {
        let mut l = Lanes::new(&mut p, subs);
        match m.method {
            MulKind::Booth => {
                booth(&mut l, &mut al, &x, &y, &prod)?;
                Alg::Booth
            }
            MulKind::Karatsuba => {
                signed_karatsuba(&mut l, &mut al, &x, &y, &prod)?;
                Alg::Karatsuba
            }
        }
    };
    Ok(p.finish(
        template(Opcode::Mul, alg, m.mapping, n),
        n,
        m.mapping,
        reps,
        vec![Operand::vert("A", x[0], n), Operand::vert("B", y[0], n)],
        vec![Operand::vert("P", prod[0], 2 * n)],
        Meta::default(),
    ))
}

/// Radix-2 Booth: for each multiplier bit pair (y_i, y_{i-1}) add +X, -X or
/// nothing at weight 2^i. The addend bit is X_k ? pos : neg.
fn booth(l: &mut Lanes, al: &mut Alloc, x: &[usize], y: &[usize], prod: &[usize]) -> Result<(), LibError> {
    let r = l.r();
    let n = x.len();
    let (pos, neg) = (al.one()?, al.one()?);
    let madd = al.take(n)?;
    for &row in prod {
        l.copy(r.c0, row);
    }
    for i in 0..n {
        let prev = if i == 0 { r.c0 } else { y[i - 1] };
        // pos = !y_i & y_{i-1}, neg = y_i & !y_{i-1}
        and_not(l, prev, y[i], pos);
        and_not(l, y[i], prev, neg);
        for k in 0..n {
            l.mux(x[k], pos, neg, madd[k]);
        }
        let w = 2 * n - i;
        let b = ext(&madd, w, madd[n - 1]);
        let acc = &prod[i..];
        l.ripple(acc, &b, false, neg, acc, None, [r.s(0), r.s(1)]);
    }
    Ok(())
}

/// d = a & !b, 4 AAPs.
fn and_not(l: &mut Lanes, a: usize, b: usize, d: usize) {
    let r = l.r();
    let t = r.t;
    l.emit(super::builder::not(b, r.dcc));
    l.emit(super::builder::aap(a, t[0]));
    l.emit(super::builder::aap(r.c0, t[1]));
    l.emit(super::builder::tra([t[0], t[1], r.dcc], d));
}

/// Conditional negate: d = s ? -a : a over a.len() bits.
fn cond_negate(l: &mut Lanes, al: &mut Alloc, a: &[usize], s: usize, d: &[usize]) -> Result<(), LibError> {
    let r = l.r();
    let mark = al.next;
    let t = al.take(a.len())?;
    for k in 0..a.len() {
        l.xor(a[k], s, t[k]);
    }
    let zero = vec![r.c0; a.len()];
    l.ripple(&t, &zero, false, s, d, None, [r.s(0), r.s(1)]);
    al.next = mark;
    Ok(())
}

/// Karatsuba on magnitudes; the sign is applied at the end.
fn signed_karatsuba(l: &mut Lanes, al: &mut Alloc, x: &[usize], y: &[usize], prod: &[usize]) -> Result<(), LibError> {
    let n = x.len();
    let sign = al.one()?;
    l.xor(x[n - 1], y[n - 1], sign);
    let ax = al.take(n)?;
    let ay = al.take(n)?;
    cond_negate(l, al, x, x[n - 1], &ax)?;
    cond_negate(l, al, y, y[n - 1], &ay)?;
    let mag = al.take(2 * n)?;
    karatsuba(l, al, &ax, &ay, &mag)?;
    cond_negate(l, al, &mag, sign, prod)
}

/// Unsigned |x| = |y| = w bits into `out` (2w rows).
fn karatsuba(l: &mut Lanes, al: &mut Alloc, x: &[usize], y: &[usize], out: &[usize]) -> Result<(), LibError> {
    let w = x.len();
    debug_assert_eq!(y.len(), w);
    if w <= 3 {
        return schoolbook(l, al, x, y, out);
    }
    let r = l.r();
    let k = [r.s(0), r.s(1)];
    let h = w.div_ceil(2);
    let mark = al.next;
    karatsuba(l, al, &x[..h], &y[..h], &out[..2 * h])?;
    karatsuba(l, al, &x[h..], &y[h..], &out[2 * h..])?;
    let s1 = al.take(h + 1)?;
    let s2 = al.take(h + 1)?;
    l.ripple(&x[..h], &ext(&x[h..], h, r.c0), false, r.c0, &s1[..h], Some(s1[h]), k);
    l.ripple(&y[..h], &ext(&y[h..], h, r.c0), false, r.c0, &s2[..h], Some(s2[h]), k);
    let z1 = al.take(2 * h + 2)?;
    karatsuba(l, al, &s1, &s2, &z1)?;
    let zw = z1.len();
    // z1 -= z0; z1 -= z2
    l.ripple(&z1, &ext(&out[..2 * h], zw, r.c0), true, r.c1, &z1, None, k);
    l.ripple(&z1, &ext(&out[2 * h..], zw, r.c0), true, r.c1, &z1, None, k);
    let hi = &out[h..];
    let b = ext(&z1, hi.len(), r.c0);
    l.ripple(hi, &b, false, r.c0, hi, None, k);
    al.next = mark;
    Ok(())
}

fn schoolbook(l: &mut Lanes, al: &mut Alloc, x: &[usize], y: &[usize], out: &[usize]) -> Result<(), LibError> {
    let r = l.r();
    let w = x.len();
    let mark = al.next;
    let pp = al.take(w)?;
    for &row in out {
        l.copy(r.c0, row);
    }
    for i in 0..y.len() {
        for k in 0..w {
            l.and(x[k], y[i], pp[k]);
        }
        let acc = &out[i..i + w];
        l.ripple(acc, &pp, false, r.c0, acc, out.get(i + w).copied(), [r.s(0), r.s(1)]);
    }
    al.next = mark;
    Ok(())
}

/// Unsigned restoring division. Outputs Q, R and DZ (divisor is zero; Q and
/// R of such lanes are all-ones and the dividend).
pub fn build_div(n: usize, mapping: MappingKind, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    if !(1..=64).contains(&n) {
        return Err(LibError::Width(n));
    }
    let subs = lanes_for(mapping, cfg)?;
    let reps = subs.len();
    let mut p = Prog::new(cfg);
    let r = p.r;
    let k = [r.s(0), r.s(1)];
    let mut al = Alloc { next: 0, limit: r.free() };
    let d = al.take(n)?;
    let v = al.take(n)?;
    let q = al.take(n)?;
    let rem = al.take(n)?;
    let dz = al.one()?;
    let pool = al.take(n + 1)?;
    let tmp = al.take(n + 1)?;
    {
        let mut l = Lanes::new(&mut p, subs);
        // divisor-zero mask
        l.copy(v[0], dz);
        for &b in &v[1..] {
            l.or(dz, b, dz);
        }
        l.not(dz, dz);
        // running remainder, least significant row first; starts at zero
        let mut rr: Vec<usize> = pool.clone();
        for &row in &rr {
            l.copy(r.c0, row);
        }
        let mut spare = Vec::new();
        for i in (0..n).rev() {
            // R = (R << 1) | d_i by re-addressing; the old top row is zero
            let top = rr.pop().expect("remainder rows");
            spare.push(top);
            rr.insert(0, d[i]);
            l.ripple(&rr, &ext(&v, n + 1, r.c0), true, r.c1, &tmp, Some(q[i]), k);
            for j in 0..=n {
                l.mux(q[i], tmp[j], rr[j], rr[j]);
            }
        }
        for j in 0..n {
            l.copy(rr[j], rem[j]);
        }
    }
    Ok(p.finish(
        template(Opcode::Div, Alg::Restoring, mapping, n),
        n,
        mapping,
        reps,
        vec![Operand::vert("N", d[0], n), Operand::vert("D", v[0], n)],
        vec![Operand::vert("Q", q[0], n), Operand::vert("R", rem[0], n), Operand::row("DZ", 0, dz)],
        Meta::default(),
    ))
}

/// Bitwise op; NOT ignores B.
pub fn build_logic(op: LogicOp, n: usize, mapping: MappingKind, cfg: &BankConfig) -> Result<MicroProgram, LibError> {
    if !(1..=64).contains(&n) {
        return Err(LibError::Width(n));
    }
    let s = cfg.subarrays_per_bank;
    // (lanes, rows per operand, replicas)
    let (subs, layers, reps) = match mapping {
        MappingKind::Abos => (vec![0], n, 1),
        MappingKind::Abps => ((0..s).collect(), n, s),
        MappingKind::Obps if n <= s => ((0..n).collect(), 1, 1),
        MappingKind::WrapObps(k) if k > 0 && n.div_ceil(k as usize) <= s => {
            let used = n.div_ceil(k as usize);
            ((0..used).collect(), n.div_ceil(used), 1)
        }
        m => return Err(LibError::Unsupported { alg: "bitwise".into(), mapping: m.name() }),
    };
    let (a0, b0, d0) = (0, layers, 2 * layers);
    let mut p = Prog::new(cfg);
    {
        let mut l = Lanes::new(&mut p, subs);
        for j in 0..layers {
            let (a, b, d) = (a0 + j, b0 + j, d0 + j);
            match op {
                LogicOp::And => l.and(a, b, d),
                LogicOp::Or => l.or(a, b, d),
                LogicOp::Xor => l.xor(a, b, d),
                LogicOp::Not => l.not(a, d),
            }
        }
    }
    let mut inputs = vec![Operand::vert("A", a0, n)];
    if op != LogicOp::Not {
        inputs.push(Operand::vert("B", b0, n));
    }
    Ok(p.finish(
        template(op.opcode(), Alg::Bitwise, mapping, n),
        n,
        mapping,
        reps,
        inputs,
        vec![Operand::vert("D", d0, n)],
        Meta::default(),
    ))
}
