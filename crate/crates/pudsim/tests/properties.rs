mod common;

use std::sync::OnceLock;

use common::small_bank;
use proptest::prelude::*;
use pudsim::cost::{pareto_populate, select, CostModel, CostTables, Objective, Profile};
use pudsim::dram::{BankConfig, BankState, TimingEnergyConfig};
use pudsim::library::{build_reduction, manifest, Opcode, ReductionMode};
use pudsim::mapping::{LayoutDescriptor, MappingKind};
use pudsim::precision::{precision_for_op, required_bits, scan_object, ObjectTrackerEntry};
use pudsim::uprog::{deserialize, serialize};

fn model() -> &'static CostModel {
    static M: OnceLock<CostModel> = OnceLock::new();
    M.get_or_init(|| CostModel::new(BankConfig::default(), TimingEnergyConfig::default()))
}

fn tables() -> &'static CostTables {
    static T: OnceLock<CostTables> = OnceLock::new();
    T.get_or_init(|| pareto_populate(model(), Profile::small(&model().bank), Objective::Latency).unwrap())
}

fn fits(v: i128, bits: usize, signed: bool) -> bool {
    if signed {
        v >= -(1i128 << (bits - 1)) && v < (1i128 << (bits - 1))
    } else {
        v >= 0 && v < (1i128 << bits)
    }
}

fn interval(lim: i64) -> impl Strategy<Value = (i64, i64)> {
    (-lim..=lim, -lim..=lim).prop_map(|(a, b)| (a.max(b), a.min(b)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scan_finds_the_true_extremes(bits in 1usize..=64, words in prop::collection::vec(any::<u64>(), 1..200)) {
        let mut e = ObjectTrackerEntry::new("x", 4096, words.len(), bits).unwrap();
        let (lines, _) = scan_object(&mut e, &words, 0.0).unwrap();
        prop_assert_eq!(lines, words.len().div_ceil(8));
        let vals: Vec<i64> = words.iter().map(|&w| pudsim::mapping::sign_extend(w & pudsim::library::mask(bits), bits)).collect();
        prop_assert_eq!(e.extremes().unwrap(), (*vals.iter().max().unwrap(), *vals.iter().min().unwrap()));
    }

    #[test]
    fn required_bits_is_the_narrowest_signed_width((max, min) in interval(i64::MAX)) {
        let want = (1..=64).find(|&w| fits(max as i128, w, true) && fits(min as i128, w, true)).unwrap();
        prop_assert_eq!(required_bits(max, min), want);
    }

    #[test]
    fn add_sub_precision_holds_every_result(a in interval(1 << 40), b in interval(1 << 40), fx in 0.0f64..=1.0, fy in 0.0f64..=1.0) {
        let x = a.1 + ((a.0 - a.1) as f64 * fx) as i64;
        let y = b.1 + ((b.0 - b.1) as f64 * fy) as i64;
        for (op, r) in [(Opcode::Add, x as i128 + y as i128), (Opcode::Sub, x as i128 - y as i128)] {
            let p = precision_for_op(op, &[a, b]).unwrap();
            prop_assert!(r >= p.min_value as i128 && r <= p.max_value as i128);
            prop_assert!(fits(r, p.bits, p.min_value < 0), "{:?} {} in {} bits", op, r, p.bits);
        }
    }

    #[test]
    fn mul_precision_holds_products_and_operands(a in interval(1 << 28), b in interval(1 << 28), fx in 0.0f64..=1.0, fy in 0.0f64..=1.0) {
        let x = a.1 + ((a.0 - a.1) as f64 * fx) as i64;
        let y = b.1 + ((b.0 - b.1) as f64 * fy) as i64;
        let p = precision_for_op(Opcode::Mul, &[a, b]).unwrap();
        let r = x as i128 * y as i128;
        prop_assert!(fits(r, p.bits, p.min_value < 0));
        prop_assert!(fits(x as i128, p.bits, true) && fits(y as i128, p.bits, true));
    }

    #[test]
    fn div_precision_holds_quotients(x in 0i64..1 << 50, y in 1i64..1 << 50) {
        let p = precision_for_op(Opcode::Div, &[(x, 0), (y, 1)]).unwrap();
        prop_assert!(fits((x / y) as i128, p.bits, false) && fits((x % y) as i128, p.bits, false));
    }

    #[test]
    fn reduction_sums_are_exact(bits in 1usize..=12, signed: bool, len in 1usize..300, seed: u64) {
        let (lo, hi) = if signed { (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1) } else { (0, (1i64 << bits) - 1) };
        let v: Vec<i64> = (0..len as u64).map(|i| {
            let h = (seed ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            lo + (h % (hi - lo + 1) as u64) as i64
        }).collect();
        let red = build_reduction(bits, len, ReductionMode::Auto, signed).unwrap();
        let mut bank = BankState::new(small_bank(64)).unwrap();
        let (res, _) = red.run(&mut bank, &TimingEnergyConfig::default(), std::slice::from_ref(&v)).unwrap();
        prop_assert_eq!(res[0].sum, v.iter().map(|&x| x as i128).sum::<i128>());
        prop_assert!(res[0].precision <= bits + len.next_power_of_two().trailing_zeros() as usize);
    }

    #[test]
    fn templates_round_trip(i in 0usize..1000, n in 1usize..=64) {
        let all = manifest();
        let t = all[i % all.len()].template(n);
        prop_assert_eq!(deserialize(&serialize(&t)).unwrap(), t);
    }

    #[test]
    fn layouts_round_trip(m in 0usize..4, elements in 1usize..100_000, precision in 1usize..=64) {
        let mapping = [MappingKind::Abos, MappingKind::Abps, MappingKind::Obps, MappingKind::WrapObps(4)][m];
        let l = LayoutDescriptor::new(mapping, elements, precision, &BankConfig::default());
        prop_assert_eq!(LayoutDescriptor::from_json(&l.to_json()).unwrap(), l);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selected_program_is_an_argmin(op in 0usize..4, n in 1usize..=64) {
        let opcode = [Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::Div][op];
        let m = model();
        let prof = Profile::small(&m.bank);
        let cands: Vec<_> = manifest().into_iter().filter(|e| e.opcode == opcode && e.supports(n, &m.bank)).collect();
        match select(tables(), opcode.code(), n) {
            Ok(id) => {
                let won = m.analytical_cost(id, n, prof.elements, prof.subarrays).unwrap().latency_ns;
                for e in &cands {
                    let l = m.analytical_cost(e.id, n, prof.elements, prof.subarrays).unwrap().latency_ns;
                    prop_assert!(won <= l * (1.0 + 1e-9), "{:?} beats selection at n={}", e.alg, n);
                }
            }
            Err(_) => prop_assert!(cands.is_empty()),
        }
    }
}
