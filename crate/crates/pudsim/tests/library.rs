mod common;

use common::{run_named, sext, small_bank};
use pudsim::dram::{BankState, TimingEnergyConfig};
use pudsim::library::{
    build_add, build_div, build_logic, build_mul, build_reduction, build_sub, convert_rbr_to_twos, convert_twos_to_rbr,
    distribute_program, mask, rbr_result, run, AdderAlgorithm, LogicOp, MulMethod, ReductionMode,
};
use pudsim::mapping::MappingKind;
use pudsim::uprog::count_cycles;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

fn values(r: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<u64> {
    let mut v: Vec<u64> = (0..count).map(|_| r.gen::<u64>() & mask(n)).collect();
    v.extend([0, mask(n), 1 << (n - 1), mask(n) >> 1]);
    v
}

fn mappings(alg: AdderAlgorithm) -> Vec<MappingKind> {
    match alg {
        AdderAlgorithm::RcaAbos => vec![MappingKind::Abos, MappingKind::Abps],
        AdderAlgorithm::RcaObps => vec![MappingKind::Obps, MappingKind::WrapObps(2), MappingKind::WrapObps(4)],
        _ => vec![MappingKind::Obps],
    }
}

fn widths(alg: AdderAlgorithm) -> Vec<usize> {
    if alg.needs_pow2() {
        vec![2, 4, 8, 16, 32, 64]
    } else {
        vec![alg.min_bits(), 3, 5, 8, 13, 32, 64]
    }
}

#[test]
fn binary_adders_match_native_add_and_sub() {
    let cfg = small_bank(64);
    let mut r = rng();
    for alg in AdderAlgorithm::ALL.into_iter().filter(|a| *a != AdderAlgorithm::Rbr) {
        for m in mappings(alg) {
            for n in widths(alg) {
                let a = values(&mut r, n, 60);
                let b = values(&mut r, n, 60);
                for sub in [false, true] {
                    let up = if sub { build_sub(alg, n, m, &cfg) } else { build_add(alg, n, m, &cfg) }.unwrap();
                    let (o, _) = run_named(&cfg, &up, &[("A", a.clone()), ("B", b.clone())]);
                    for i in 0..a.len() {
                        let want = if sub {
                            (a[i] as u128) + (!b[i] & mask(n)) as u128 + 1
                        } else {
                            a[i] as u128 + b[i] as u128
                        };
                        assert_eq!(o["S"][i], want as u64 & mask(n), "{alg:?} {m:?} n={n} sub={sub} i={i}");
                        assert_eq!(o["COUT"][i], (want >> n) as u64 & 1, "{alg:?} {m:?} n={n} sub={sub} cout i={i}");
                    }
                }
            }
        }
    }
}

#[test]
fn signed_digit_adder_preserves_value() {
    let cfg = small_bank(64);
    let mut r = rng();
    for n in [2, 3, 8, 16, 31] {
        let digits = |r: &mut ChaCha8Rng| (0..64).map(|_| r.gen::<u64>() & mask(n)).collect::<Vec<_>>();
        let (xp, xm, yp, ym) = (digits(&mut r), digits(&mut r), digits(&mut r), digits(&mut r));
        for sub in [false, true] {
            let up = if sub { build_sub(AdderAlgorithm::Rbr, n, MappingKind::Obps, &cfg) } else { build_add(AdderAlgorithm::Rbr, n, MappingKind::Obps, &cfg) }
                .unwrap();
            let (o, _) = run_named(
                &cfg,
                &up,
                &[("X+", xp.clone()), ("X-", xm.clone()), ("Y+", yp.clone()), ("Y-", ym.clone())],
            );
            for i in 0..xp.len() {
                let x = xp[i] as i128 - xm[i] as i128;
                let y = yp[i] as i128 - ym[i] as i128;
                let want = if sub { x - y } else { x + y };
                let got = o["Z+"][i] as i128 - o["Z-"][i] as i128 + ((o["CARRY+"][i] as i128 - o["CARRY-"][i] as i128) << n);
                assert_eq!(got, want, "n={n} sub={sub} i={i}");
            }
        }
    }
}

#[test]
fn rca_cycle_counts_follow_closed_forms() {
    let cfg = small_bank(64);
    for n in [2, 8, 16, 32, 64] {
        let up = build_add(AdderAlgorithm::RcaAbos, n, MappingKind::Abos, &cfg).unwrap();
        assert_eq!(count_cycles(&up), (8 * n as u64 + 1, 0));
        let up = build_add(AdderAlgorithm::RcaObps, n, MappingKind::Obps, &cfg).unwrap();
        assert_eq!(count_cycles(&up), (2 * n as u64 + 7, 2 * (n as u64 - 1)));
        let up = build_add(AdderAlgorithm::KoggeStone, n, MappingKind::Obps, &cfg).unwrap();
        let l = n.trailing_zeros() as u64;
        assert_eq!(count_cycles(&up), (3 * l + 13, 2 * n as u64 + 4));
        let up = build_add(AdderAlgorithm::Rbr, n, MappingKind::Obps, &cfg).unwrap();
        assert_eq!(count_cycles(&up), (34, 8));
    }
}

#[test]
fn subtraction_overhead_is_recorded() {
    let cfg = small_bank(64);
    for alg in AdderAlgorithm::ALL {
        for m in mappings(alg) {
            let n = 16;
            let add = build_add(alg, n, m, &cfg).unwrap();
            let sub = build_sub(alg, n, m, &cfg).unwrap();
            let (aa, ar) = count_cycles(&add);
            let (sa, sr) = count_cycles(&sub);
            assert_eq!(sr, ar, "{alg:?} {m:?}");
            assert_eq!(sa - aa, sub.meta.overhead_aap, "{alg:?} {m:?}");
        }
    }
}

#[test]
fn multipliers_match_native_signed_product() {
    let cfg = small_bank(64);
    let mut r = rng();
    for m in [MappingKind::Abos, MappingKind::Abps] {
        for (method, ns) in [(MulMethod::booth(m), vec![1, 2, 5, 8, 16, 32]), (MulMethod::karatsuba(m), vec![4, 8, 16, 32])] {
            for n in ns {
                let a = values(&mut r, n, 40);
                let b = values(&mut r, n, 40);
                let up = build_mul(method, n, &cfg).unwrap();
                let (o, _) = run_named(&cfg, &up, &[("A", a.clone()), ("B", b.clone())]);
                for i in 0..a.len() {
                    let want = sext(a[i], n) * sext(b[i], n);
                    assert_eq!(sext(o["P"][i], 2 * n), want, "{method:?} n={n} i={i}");
                }
            }
        }
    }
}

#[test]
fn division_matches_native_quotient_and_remainder() {
    let cfg = small_bank(64);
    let mut r = rng();
    for m in [MappingKind::Abos, MappingKind::Abps] {
        for n in [1, 3, 8, 16, 32] {
            let a = values(&mut r, n, 40);
            let mut b = values(&mut r, n, 40);
            b[0] = 0;
            let up = build_div(n, m, &cfg).unwrap();
            let (o, _) = run_named(&cfg, &up, &[("N", a.clone()), ("D", b.clone())]);
            for i in 0..a.len() {
                if b[i] == 0 {
                    assert_eq!(o["DZ"][i], 1);
                    continue;
                }
                assert_eq!(o["DZ"][i], 0);
                assert_eq!(o["Q"][i], a[i] / b[i], "n={n} {}/{}", a[i], b[i]);
                assert_eq!(o["R"][i], a[i] % b[i], "n={n} {}%{}", a[i], b[i]);
            }
        }
    }
}

#[test]
fn bitwise_ops_match_native() {
    let cfg = small_bank(64);
    let mut r = rng();
    for m in [MappingKind::Abos, MappingKind::Abps, MappingKind::Obps, MappingKind::WrapObps(2)] {
        for n in [1, 7, 32, 64] {
            let a = values(&mut r, n, 30);
            let b = values(&mut r, n, 30);
            for op in [LogicOp::And, LogicOp::Or, LogicOp::Xor, LogicOp::Not] {
                let up = build_logic(op, n, m, &cfg).unwrap();
                let (o, _) = run_named(&cfg, &up, &[("A", a.clone()), ("B", b.clone())]);
                for i in 0..a.len() {
                    let want = match op {
                        LogicOp::And => a[i] & b[i],
                        LogicOp::Or => a[i] | b[i],
                        LogicOp::Xor => a[i] ^ b[i],
                        LogicOp::Not => !a[i] & mask(n),
                    };
                    assert_eq!(o["D"][i], want, "{op:?} {m:?} n={n}");
                }
            }
        }
    }
}

#[test]
fn conversions_round_trip() {
    let cfg = small_bank(64);
    let mut r = rng();
    for n in [2, 4, 9, 16, 32] {
        let x = values(&mut r, n, 60);
        let up = convert_twos_to_rbr(n, &cfg).unwrap();
        let (o, _) = run_named(&cfg, &up, &[("X", x.clone())]);
        for i in 0..x.len() {
            let v = sext(x[i], n);
            assert_eq!(o["X+"][i] as i128 - o["X-"][i] as i128, v, "n={n} x={v}");
            assert_eq!(o["X+"][i] & o["X-"][i], 0);
        }
        for inner in [AdderAlgorithm::RcaObps, AdderAlgorithm::KoggeStone] {
            if inner.needs_pow2() && !n.is_power_of_two() {
                continue;
            }
            let back = convert_rbr_to_twos(n, inner, &cfg).unwrap();
            let (b, _) = run_named(&cfg, &back, &[("X+", o["X+"].clone()), ("X-", o["X-"].clone())]);
            for i in 0..x.len() {
                assert_eq!(rbr_result(b["S"][i], b["COUT"][i], n), sext(x[i], n), "{inner:?} n={n}");
            }
        }
    }
}

#[test]
fn distribution_moves_bits_to_their_subarrays() {
    let cfg = small_bank(64);
    let mut r = rng();
    for n in [1, 2, 8, 33] {
        let x = values(&mut r, n, 50);
        let up = distribute_program(n, &cfg).unwrap();
        let (o, _) = run_named(&cfg, &up, &[("X", x.clone())]);
        assert_eq!(o["X"], x, "n={n}");
    }
}

fn native_sum(v: &[i64]) -> i128 {
    v.iter().map(|&x| x as i128).sum()
}

#[test]
fn reductions_grow_only_when_needed() {
    let cfg = small_bank(64);
    let t = TimingEnergyConfig::default();
    let mut r = rng();
    for signed in [false, true] {
        for (n, e) in [(4, 2), (8, 100), (6, 64), (3, 1000), (16, 256)] {
            let lo = if signed { -(1i64 << (n - 1)) } else { 0 };
            let hi = if signed { (1i64 << (n - 1)) - 1 } else { (1i64 << n) - 1 };
            let mut vecs: Vec<Vec<i64>> = (0..20).map(|_| (0..e).map(|_| r.gen_range(lo..=hi)).collect()).collect();
            vecs.push(vec![hi; e]);
            vecs.push(vec![lo; e]);
            vecs.push(vec![0; e]);
            let red = build_reduction(n, e, ReductionMode::Auto, signed).unwrap();
            let mut bank = BankState::new(cfg.clone()).unwrap();
            let (res, _) = red.run(&mut bank, &t, &vecs).unwrap();
            let levels = e.next_power_of_two().trailing_zeros() as usize;
            for (v, got) in vecs.iter().zip(&res) {
                assert_eq!(got.sum, native_sum(v), "signed={signed} n={n} e={e}");
                assert!(got.precision <= n + levels);
                assert_eq!(got.trace.len(), levels + 1);
                assert!(!got.overflow);
            }
        }
    }
}

#[test]
fn user_precision_flags_overflow() {
    let cfg = small_bank(64);
    let t = TimingEnergyConfig::default();
    let red = build_reduction(4, 8, ReductionMode::User(5), false).unwrap();
    let mut bank = BankState::new(cfg).unwrap();
    let (res, _) = red.run(&mut bank, &t, &[vec![15; 8], vec![1; 8]]).unwrap();
    assert!(res[0].overflow);
    assert_eq!(res[0].sum, 120 & 31);
    assert_eq!(res[0].precision, 5);
}

#[test]
fn abps_replicas_cover_more_elements() {
    let cfg = small_bank(64);
    let t = TimingEnergyConfig::default();
    let up = build_add(AdderAlgorithm::RcaAbos, 8, MappingKind::Abps, &cfg).unwrap();
    let a: Vec<u64> = (0..64 * 64).map(|i| i as u64 & 0xff).collect();
    let b: Vec<u64> = a.iter().map(|x| x ^ 0x5a).collect();
    let mut bank = BankState::new(cfg).unwrap();
    let (o, stats) = run(&mut bank, &up, &t, &[&a, &b]).unwrap();
    assert_eq!(stats.aap_cycles, 65);
    for i in 0..a.len() {
        assert_eq!(o[0][i], (a[i] + b[i]) & 0xff);
    }
}
