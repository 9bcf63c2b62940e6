//! Step-list builder shared by the μProgram constructors.

use crate::dram::{BankConfig, Dst, Prim, RowSpec, Step};
use crate::mapping::MappingKind;
use crate::uprog::{Meta, MicroProgram, Operand, Template};

/// Named rows of a subarray.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rows {
    pub t: [usize; 5],
    pub dcc: usize,
    pub c0: usize,
    pub c1: usize,
    data: usize,
}

/// Library scratch lives at the top of the D group.
pub(crate) const SCRATCH: usize = 16;

impl Rows {
    pub fn new(cfg: &BankConfig) -> Rows {
        Rows {
            t: [cfg.t(0), cfg.t(1), cfg.t(2), cfg.t(3), cfg.t(4)],
            dcc: cfg.dcc(),
            c0: cfg.c0(),
            c1: cfg.c1(),
            data: cfg.data_rows(),
        }
    }

    /// Scratch row `i` (0..SCRATCH).
    pub fn s(&self, i: usize) -> usize {
        debug_assert!(i < SCRATCH);
        self.data - 1 - i
    }

    /// D rows usable for operands.
    pub fn free(&self) -> usize {
        self.data - SCRATCH
    }

    pub fn konst(&self, v: bool) -> usize {
        if v {
            self.c1
        } else {
            self.c0
        }
    }
}

pub(crate) fn aap(src: usize, dst: usize) -> Prim {
    Prim::Aap { src: RowSpec::Single(src), dst: Dst::Single(dst) }
}

pub(crate) fn aap2(src: usize, d0: usize, d1: usize) -> Prim {
    Prim::Aap { src: RowSpec::Single(src), dst: Dst::Pair(d0, d1) }
}

pub(crate) fn tra(rows: [usize; 3], dst: usize) -> Prim {
    Prim::Aap { src: RowSpec::Triple(rows), dst: Dst::Single(dst) }
}

pub(crate) fn ap(rows: [usize; 3]) -> Prim {
    Prim::Ap { rows }
}

pub(crate) fn not(src: usize, dcc: usize) -> Prim {
    Prim::NotAap { src: RowSpec::Single(src), dst: dcc }
}

pub(crate) fn not_tra(rows: [usize; 3], dcc: usize) -> Prim {
    Prim::NotAap { src: RowSpec::Triple(rows), dst: dcc }
}

pub(crate) fn rbm(dst_sub: usize, src_row: usize, dst_row: usize) -> Prim {
    Prim::Rbm { dst_sub, src_row, dst_row }
}

pub(crate) struct Prog {
    pub r: Rows,
    pub steps: Vec<Step>,
    subs: usize,
}

impl Prog {
    pub fn new(cfg: &BankConfig) -> Prog {
        Prog { r: Rows::new(cfg), steps: Vec::new(), subs: cfg.subarrays_per_bank }
    }

    pub fn step<I: IntoIterator<Item = (usize, Prim)>>(&mut self, it: I) {
        let s: Step = it.into_iter().collect();
        if !s.is_empty() {
            self.steps.push(s);
        }
    }

    /// The same primitive in every listed subarray.
    pub fn on<I: IntoIterator<Item = usize>>(&mut self, subs: I, p: Prim) {
        self.step(subs.into_iter().map(|s| (s, p)));
    }

    /// Idle steps that only touch library scratch, used to hold a program
    /// to a fixed step budget.
    pub fn pad(&mut self, aap_steps: u64, rbm_steps: u64) {
        let row = self.r.s(SCRATCH - 1);
        for _ in 0..aap_steps {
            self.on([0], aap(self.r.c0, row));
        }
        let dst = if self.subs > 1 { 1 } else { 0 };
        for _ in 0..rbm_steps {
            self.on([0], rbm(dst, row, row));
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        self,
        template: Template,
        precision: usize,
        mapping: MappingKind,
        replicas: usize,
        inputs: Vec<Operand>,
        outputs: Vec<Operand>,
        meta: Meta,
    ) -> MicroProgram {
        MicroProgram { template, steps: self.steps, precision, mapping, replicas, inputs, outputs, meta }.seal()
    }
}

/// Gate-level helpers for programs that run the same command stream in a
/// set of subarrays (ABOS, or ABPS replicas). Each helper states its AAP cost.
pub(crate) struct Lanes<'a> {
    pub p: &'a mut Prog,
    pub subs: Vec<usize>,
}

impl<'a> Lanes<'a> {
    pub fn new(p: &'a mut Prog, subs: Vec<usize>) -> Lanes<'a> {
        Lanes { p, subs }
    }

    pub fn r(&self) -> Rows {
        self.p.r
    }

    pub fn emit(&mut self, prim: Prim) {
        let subs = self.subs.clone();
        self.p.on(subs, prim);
    }

    /// 1 AAP.
    pub fn copy(&mut self, a: usize, d: usize) {
        if a != d {
            self.emit(aap(a, d));
        }
    }

    /// 4 AAPs.
    pub fn maj(&mut self, a: usize, b: usize, c: usize, d: usize) {
        let t = self.r().t;
        self.emit(aap(a, t[0]));
        self.emit(aap(b, t[1]));
        self.emit(aap(c, t[2]));
        self.emit(tra([t[0], t[1], t[2]], d));
    }

    pub fn and(&mut self, a: usize, b: usize, d: usize) {
        let c0 = self.r().c0;
        self.maj(a, b, c0, d);
    }

    pub fn or(&mut self, a: usize, b: usize, d: usize) {
        let c1 = self.r().c1;
        self.maj(a, b, c1, d);
    }

    /// 2 AAPs.
    pub fn not(&mut self, a: usize, d: usize) {
        let r = self.r();
        self.emit(not(a, r.dcc));
        self.emit(aap(r.dcc, d));
    }

    /// (a | b) & !(a & b), 8 AAPs.
    pub fn xor(&mut self, a: usize, b: usize, d: usize) {
        let r = self.r();
        let t = r.t;
        self.emit(aap2(a, t[0], t[1]));
        self.emit(aap2(b, t[2], t[3]));
        self.emit(aap(r.c0, t[4]));
        self.emit(not_tra([t[0], t[2], t[4]], r.dcc));
        self.emit(aap(r.c1, t[0]));
        self.emit(ap([t[1], t[3], t[0]]));
        self.emit(aap(r.c0, t[2]));
        self.emit(tra([t[1], r.dcc, t[2]], d));
    }

    /// d = s ? a : b, 10 AAPs.
    pub fn mux(&mut self, s: usize, a: usize, b: usize, d: usize) {
        let r = self.r();
        let t = r.t;
        self.emit(aap(s, t[0]));
        self.emit(aap(a, t[1]));
        self.emit(aap(r.c0, t[2]));
        self.emit(ap([t[0], t[1], t[2]]));
        self.emit(not(s, r.dcc));
        self.emit(aap(b, t[3]));
        self.emit(aap(r.c0, t[4]));
        self.emit(ap([r.dcc, t[3], t[4]]));
        self.emit(aap(r.c1, t[1]));
        self.emit(tra([t[0], t[3], t[1]], d));
    }

    /// Bit-serial ripple-carry add: sum = a + b + cin over `a.len()` bits.
    /// `b_inv` adds the complement of `b` (one extra AAP per bit).
    /// `k` are two scratch rows for the running carry. 8 AAPs per bit plus one.
    #[allow(clippy::too_many_arguments)]
    pub fn ripple(&mut self, a: &[usize], b: &[usize], b_inv: bool, cin: usize, sum: &[usize], cout: Option<usize>, k: [usize; 2]) {
        let r = self.r();
        let t = r.t;
        let n = a.len();
        assert_eq!(b.len(), n);
        assert_eq!(sum.len(), n);
        self.emit(aap(cin, t[4]));
        let mut kc = cin;
        for i in 0..n {
            let kn = if i + 1 == n { cout.unwrap_or(k[i % 2]) } else { k[i % 2] };
            self.emit(aap2(a[i], t[0], t[1]));
            if b_inv {
                self.emit(not(b[i], r.dcc));
                self.emit(aap2(r.dcc, t[2], t[3]));
            } else {
                self.emit(aap2(b[i], t[2], t[3]));
            }
            self.emit(not(t[4], r.dcc));
            self.emit(ap([t[0], t[2], r.dcc]));
            self.emit(tra([t[1], t[3], t[4]], kn));
            self.emit(not(t[1], r.dcc));
            self.emit(aap(kc, t[2]));
            self.emit(tra([t[0], t[2], r.dcc], sum[i]));
            kc = kn;
        }
    }
}
