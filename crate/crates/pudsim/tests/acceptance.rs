//! Acceptance checks. One PASS/FAIL line per criterion; non-zero exit on any failure.

mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{run_named, sext, small_bank};
use pudsim::cost::{pareto_populate, select, CostModel, Objective, Profile};
use pudsim::dram::{BankConfig, BankState, SimConfig, TimingEnergyConfig};
use pudsim::library::{
    build_add, build_div, build_mul, build_reduction, build_sub, convert_rbr_to_twos, convert_twos_to_rbr, entry, manifest,
    mask, rbr_result, AdderAlgorithm, Alg, MulMethod, Opcode, RbrNumber, ReductionMode,
};
use pudsim::mapping::{primitive_cycles, MappingKind};
use pudsim::precision::precision_for_op;
use pudsim::trace::{parse_trace, RunOptions, TraceRunner};
use pudsim::uprog::count_cycles;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const C1_LIMIT: Duration = Duration::from_secs(1);
const C2_LIMIT: Duration = Duration::from_secs(120);
const C7_LIMIT: Duration = Duration::from_secs(30);
/// Relative tolerance for measured vs predicted latency ratios.
const C8_TOL: f64 = 0.01;
const C2_VECTORS: usize = 1000;
const C9_VECTORS: usize = 10_000;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let t0 = Instant::now();
    let r = f()?;
    let el = t0.elapsed();
    ensure(el < limit, || format!("took {el:.2?}, limit {limit:?}"))?;
    Ok(format!("{r} in {el:.2?}"))
}

fn c1_cycle_formulas() -> Outcome {
    let cfg = small_bank(64);
    let mut checked = 0;
    for n in [2usize, 4, 8, 16, 32, 64] {
        let nn = n as u64;
        let l = n.trailing_zeros() as u64;
        for (alg, m, want) in [
            (AdderAlgorithm::RcaAbos, MappingKind::Abos, (8 * nn + 1, 0)),
            (AdderAlgorithm::RcaObps, MappingKind::Obps, (2 * nn + 7, 2 * (nn - 1))),
            (AdderAlgorithm::KoggeStone, MappingKind::Obps, (3 * l + 13, 2 * nn + 4)),
            (AdderAlgorithm::Rbr, MappingKind::Obps, (34, 8)),
        ] {
            let up = build_add(alg, n, m, &cfg).map_err(|e| e.to_string())?;
            let got = count_cycles(&up);
            ensure(got == want, || format!("{alg:?} N={n}: got {got:?}, want {want:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (alg, N) pairs exact"))
}

fn rand_vals(r: &mut ChaCha8Rng, n: usize, count: usize) -> Vec<u64> {
    let mut v: Vec<u64> = (0..count).map(|_| r.gen::<u64>() & mask(n)).collect();
    v.extend([0, mask(n), 1 << (n - 1), mask(n) >> 1]);
    v
}

fn adder_mappings(alg: AdderAlgorithm) -> Vec<MappingKind> {
    match alg {
        AdderAlgorithm::RcaAbos => vec![MappingKind::Abos, MappingKind::Abps],
        AdderAlgorithm::RcaObps => vec![MappingKind::Obps, MappingKind::WrapObps(2), MappingKind::WrapObps(4)],
        _ => vec![MappingKind::Obps],
    }
}

fn check_adders(cfg: &BankConfig, r: &mut ChaCha8Rng, n: usize) -> Result<usize, String> {
    let mut count = 0;
    for alg in AdderAlgorithm::ALL {
        for m in adder_mappings(alg) {
            let a = rand_vals(r, n, C2_VECTORS);
            let b = rand_vals(r, n, C2_VECTORS);
            for sub in [false, true] {
                let up = if sub { build_sub(alg, n, m, cfg) } else { build_add(alg, n, m, cfg) }.map_err(|e| e.to_string())?;
                if alg == AdderAlgorithm::Rbr {
                    let enc = |v: &[u64]| -> (Vec<u64>, Vec<u64>) {
                        v.iter().map(|&x| RbrNumber::from_twos(sext(x, n) as i64, n)).map(|d| (d.plus, d.minus)).unzip()
                    };
                    let ((xp, xm), (yp, ym)) = (enc(&a), enc(&b));
                    let (o, _) = run_named(cfg, &up, &[("X+", xp), ("X-", xm), ("Y+", yp), ("Y-", ym)]);
                    for i in 0..a.len() {
                        let (x, y) = (sext(a[i], n), sext(b[i], n));
                        let want = if sub { x - y } else { x + y };
                        let got = o["Z+"][i] as i128 - o["Z-"][i] as i128 + ((o["CARRY+"][i] as i128 - o["CARRY-"][i] as i128) << n);
                        ensure(got == want, || format!("RBR N={n} sub={sub}: {x},{y} -> {got}"))?;
                    }
                } else {
                    let (o, _) = run_named(cfg, &up, &[("A", a.clone()), ("B", b.clone())]);
                    for i in 0..a.len() {
                        let want = if sub { a[i].wrapping_sub(b[i]) } else { a[i].wrapping_add(b[i]) } & mask(n);
                        ensure(o["S"][i] == want, || format!("{alg:?} {m:?} N={n} sub={sub}: {} {} -> {}", a[i], b[i], o["S"][i]))?;
                    }
                }
                count += 1;
            }
        }
    }
    Ok(count)
}

fn check_mul(cfg: &BankConfig, n: usize, a: &[u64], b: &[u64]) -> Result<usize, String> {
    let mut count = 0;
    for m in [MappingKind::Abos, MappingKind::Abps] {
        let mut methods = vec![MulMethod::booth(m)];
        if n >= 4 {
            methods.push(MulMethod::karatsuba(m));
        }
        for method in methods {
            let up = build_mul(method, n, cfg).map_err(|e| e.to_string())?;
            let (o, _) = run_named(cfg, &up, &[("A", a.to_vec()), ("B", b.to_vec())]);
            for i in 0..a.len() {
                let want = sext(a[i], n) * sext(b[i], n);
                let got = sext(o["P"][i], 2 * n);
                ensure(got == want, || format!("{method:?} N={n}: {}*{} -> {got}", sext(a[i], n), sext(b[i], n)))?;
            }
            count += 1;
        }
    }
    Ok(count)
}

fn check_div(cfg: &BankConfig, n: usize, a: &[u64], b: &[u64]) -> Result<usize, String> {
    for m in [MappingKind::Abos, MappingKind::Abps] {
        let up = build_div(n, m, cfg).map_err(|e| e.to_string())?;
        let (o, _) = run_named(cfg, &up, &[("N", a.to_vec()), ("D", b.to_vec())]);
        for i in 0..a.len() {
            if b[i] == 0 {
                ensure(o["DZ"][i] == 1, || format!("div N={n}: zero divisor not flagged"))?;
                continue;
            }
            ensure(o["Q"][i] == a[i] / b[i] && o["R"][i] == a[i] % b[i] && o["DZ"][i] == 0, || {
                format!("div {m:?} N={n}: {}/{} -> q={} r={}", a[i], b[i], o["Q"][i], o["R"][i])
            })?;
        }
    }
    Ok(2)
}

fn c2_functional() -> Outcome {
    let cfg = small_bank(1024);
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let mut programs = 0;
    for n in [4, 8, 16, 32] {
        programs += check_adders(&cfg, &mut r, n)?;
        let a = rand_vals(&mut r, n, C2_VECTORS);
        let b = rand_vals(&mut r, n, C2_VECTORS);
        programs += check_mul(&cfg, n, &a, &b)?;
        programs += check_div(&cfg, n, &a, &b)?;
    }
    let (a, b): (Vec<u64>, Vec<u64>) = (0..16u64).flat_map(|x| (0..16u64).map(move |y| (x, y))).unzip();
    programs += check_mul(&cfg, 4, &a, &b)?;
    programs += check_div(&cfg, 4, &a, &b)?;
    Ok(format!("{programs} programs, 0 mismatches"))
}

fn c3_mapping_cycles() -> Outcome {
    let cfg = BankConfig { subarrays_per_bank: 4, columns_per_row: 3, max_concurrent_subarrays: 4, ..BankConfig::default() };
    let got: Vec<usize> =
        [MappingKind::Abos, MappingKind::Abps, MappingKind::Obps].iter().map(|&m| primitive_cycles(m, 6, 2, &cfg)).collect();
    ensure(got == [4, 2, 1], || format!("ABOS/ABPS/OBPS = {got:?}"))?;
    Ok("ABOS=4 ABPS=2 OBPS=1".into())
}

fn scratch_dir(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pudsim-accept-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).expect("temp dir");
    d
}

fn c4_worked_example() -> Outcome {
    let dir = scratch_dir("worked");
    let mut r = ChaCha8Rng::seed_from_u64(4);
    for (name, max) in [("A", 3i64), ("B", 6), ("C", 2)] {
        let mut v: Vec<i64> = (0..8192).map(|_| r.gen_range(0..=max)).collect();
        v[100] = max;
        let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
        std::fs::write(dir.join(format!("{name}.bin")), bytes).map_err(|e| e.to_string())?;
    }
    let trace = "bbop_trsp_init A - - 8192 8 1\nbbop_trsp_init B - - 8192 8 1\nbbop_trsp_init C - - 8192 8 1\n\
                 bbop_add tmp A B 8192 8 1\nbbop_mul D tmp C 8192 8 1\n";
    let mut cfg = SimConfig::default();
    cfg.bank.columns_per_row = 1024;
    let opts = RunOptions { data_dir: Some(dir.clone()), ..RunOptions::default() };
    let mut run = TraceRunner::new(cfg, opts).map_err(|e| e.to_string())?;
    let rep = run.run(&parse_trace(trace).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let _ = std::fs::remove_dir_all(&dir);
    let objs = run.objects();
    let got = (rep.rows[0].precision, rep.rows[1].precision, objs["tmp"].1, objs["D"].1);
    ensure(got == (4, 5, Some(9), Some(18)) && rep.all_pass(), || format!("(add p, mul p, max tmp, max D) = {got:?}"))?;
    Ok("add 4 bits, mul 5 bits, maxima 9 and 18".into())
}

fn c5_conversion() -> Outcome {
    let cfg = small_bank(256);
    let up = convert_twos_to_rbr(4, &cfg).map_err(|e| e.to_string())?;
    let x: Vec<u64> = [2i64, -1, -7].iter().map(|&v| v as u64 & mask(4)).collect();
    let (o, _) = run_named(&cfg, &up, &[("X", x)]);
    let want_plus = [0b0010, 0b0000, 0b0000];
    let want_minus = [0b0000, 0b0001, 0b0111];
    ensure(o["X+"] == want_plus && o["X-"] == want_minus, || format!("X+ {:?} X- {:?}", o["X+"], o["X-"]))?;

    let x: Vec<u64> = (0..256).collect();
    let fwd = convert_twos_to_rbr(8, &cfg).map_err(|e| e.to_string())?;
    let (o, _) = run_named(&cfg, &fwd, &[("X", x.clone())]);
    for inner in [AdderAlgorithm::RcaObps, AdderAlgorithm::KoggeStone] {
        let back = convert_rbr_to_twos(8, inner, &cfg).map_err(|e| e.to_string())?;
        let (b, _) = run_named(&cfg, &back, &[("X+", o["X+"].clone()), ("X-", o["X-"].clone())]);
        for i in 0..256 {
            let v = sext(x[i], 8);
            ensure(o["X+"][i] as i128 - o["X-"][i] as i128 == v, || format!("forward {v}"))?;
            ensure(rbr_result(b["S"][i], b["COUT"][i], 8) == v, || format!("round trip {v} via {inner:?}"))?;
        }
    }
    Ok("Table rows exact; 256/256 round trips at N=8".into())
}

fn add_id(alg: Alg, m: MappingKind) -> pudsim::uprog::GbIdx {
    manifest().into_iter().find(|e| e.opcode == Opcode::Add && e.alg == alg && e.mapping == m).expect("in manifest").id
}

fn c6_rbr_constancy() -> Outcome {
    let cfg = BankConfig::default();
    let model = CostModel::new(cfg.clone(), TimingEnergyConfig::default());
    let (els, subs) = (cfg.columns_per_row, cfg.subarrays_per_bank);
    let lat = |id, n| model.analytical_cost(id, n, els, subs).map(|p| p.latency_ns).map_err(|e| e.to_string());
    let ns = [8, 16, 32, 64];
    let rbr: Vec<f64> = ns.iter().map(|&n| lat(add_id(Alg::Rbr, MappingKind::Obps), n)).collect::<Result<_, _>>()?;
    ensure(rbr.iter().all(|&l| l == rbr[0]), || format!("RBR latencies {rbr:?}"))?;
    for (alg, m) in [(Alg::RcaAbos, MappingKind::Abos), (Alg::RcaObps, MappingKind::Obps)] {
        let l: Vec<f64> = ns.iter().map(|&n| lat(add_id(alg, m), n)).collect::<Result<_, _>>()?;
        ensure(l.windows(2).all(|w| w[1] > w[0]), || format!("{alg:?} latencies {l:?}"))?;
    }
    Ok(format!("RBR {:.1} ns at N=8..64; RCA strictly increasing", rbr[0]))
}

fn c7_pareto() -> Outcome {
    let cfg = BankConfig::default();
    let model = CostModel::new(cfg.clone(), TimingEnergyConfig::default());
    let add = Opcode::Add.code();
    let winner = |t: &pudsim::cost::CostTables, n: usize| -> Result<pudsim::library::ManifestEntry, String> {
        let id = select(t, add, n).map_err(|e| e.to_string())?;
        entry(id).ok_or_else(|| format!("unknown {id:?}"))
    };
    let small = Profile::small(&cfg);
    let lat_small = pareto_populate(&model, small, Objective::Latency).map_err(|e| e.to_string())?;
    let obps_rca = add_id(Alg::RcaObps, MappingKind::Obps);
    for n in 1..8 {
        let w = winner(&lat_small, n)?;
        // a tie with the winner still counts as a win
        let best = model.analytical_cost(w.id, n, small.elements, small.subarrays).map_err(|e| e.to_string())?.latency_ns;
        let rca = model.analytical_cost(obps_rca, n, small.elements, small.subarrays).map_err(|e| e.to_string())?.latency_ns;
        ensure((rca - best).abs() <= 1e-9 * best, || format!("N={n}: {:?}/{:?} beats RCA_OBPS", w.alg, w.mapping))?;
    }
    let is_rbr = |n| winner(&lat_small, n).map(|w| w.alg == Alg::Rbr && w.mapping == MappingKind::Obps);
    for n in 9..=64 {
        ensure(is_rbr(n)?, || format!("N={n}: small-regime winner is not RBR"))?;
    }
    let mut threshold = 64;
    while threshold > 1 && is_rbr(threshold - 1)? {
        threshold -= 1;
    }
    ensure((4..=16).contains(&threshold), || format!("threshold {threshold} outside [4,16]"))?;

    let large = Profile::large(&cfg);
    let lat_large = pareto_populate(&model, large, Objective::Latency).map_err(|e| e.to_string())?;
    for n in 1..=64 {
        let w = winner(&lat_large, n)?;
        ensure(w.alg == Alg::RcaAbos && w.mapping == MappingKind::Abps, || format!("large N={n}: {:?}/{:?}", w.alg, w.mapping))?;
    }
    for p in [small, large] {
        let t = pareto_populate(&model, p, Objective::Energy).map_err(|e| e.to_string())?;
        for n in 1..=64 {
            let w = winner(&t, n)?;
            ensure(matches!(w.alg, Alg::RcaAbos | Alg::RcaObps), || format!("energy {p:?} N={n}: {:?}", w.alg))?;
        }
    }
    Ok(format!("RBR threshold N={threshold}"))
}

/// Latency of one program over `a`, `b` on a fresh bank.
fn measured(cfg: &BankConfig, up: &pudsim::uprog::MicroProgram, a: &[u64], b: &[u64]) -> f64 {
    let names: Vec<String> = up.inputs.iter().map(|o| o.name.clone()).collect();
    run_named(cfg, up, &[(&names[0], a.to_vec()), (&names[1], b.to_vec())]).1.latency_ns
}

fn c8_narrow_speedup() -> Outcome {
    let cfg = small_bank(1024);
    let t = TimingEnergyConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let declared = 32;

    // addition: operands whose sum spans 8 bits
    let a: Vec<u64> = (0..1024).map(|_| r.gen_range(0..=127)).collect();
    let b: Vec<u64> = (0..1024).map(|_| r.gen_range(0..=127)).collect();
    let ext = |v: &[u64]| (*v.iter().max().unwrap() as i64, *v.iter().min().unwrap() as i64);
    let p = precision_for_op(Opcode::Add, &[ext(&a), ext(&b)]).map_err(|e| e.to_string())?.bits;
    ensure(p == 8, || format!("add precision {p}, want 8"))?;
    let rca = |n| build_add(AdderAlgorithm::RcaObps, n, MappingKind::Obps, &cfg).map_err(|e| e.to_string());
    let lin = measured(&cfg, &rca(declared)?, &a, &b) / measured(&cfg, &rca(p)?, &a, &b);
    let f = |aap: f64, rbm: f64| aap * t.t_aap() + rbm * t.t_rbm_fullrow();
    let model = f(2.0 * 32.0 + 7.0, 62.0) / f(2.0 * 8.0 + 7.0, 14.0);
    ensure((lin / model - 1.0).abs() <= C8_TOL, || format!("add ratio {lin:.4} vs model {model:.4}"))?;

    // multiplication: product spans 8 bits
    let a: Vec<u64> = (0..1024).map(|_| r.gen_range(0..=15)).collect();
    let b: Vec<u64> = (0..1024).map(|_| r.gen_range(0..=15)).collect();
    let pm = precision_for_op(Opcode::Mul, &[ext(&a), ext(&b)]).map_err(|e| e.to_string())?.bits;
    ensure(pm == 8, || format!("mul precision {pm}, want 8"))?;
    let booth = |n| build_mul(MulMethod::booth(MappingKind::Abos), n, &cfg).map_err(|e| e.to_string());
    let (b32, bp) = (booth(declared)?, booth(pm)?);
    let quad = measured(&cfg, &b32, &a, &b) / measured(&cfg, &bp, &a, &b);
    let cyc = |up: &pudsim::uprog::MicroProgram| {
        let (aap, rbm) = count_cycles(up);
        aap as f64 * t.t_aap() + rbm as f64 * t.t_rbm_fullrow()
    };
    let quad_model = cyc(&b32) / cyc(&bp);
    ensure(quad >= quad_model * (1.0 - C8_TOL), || format!("Booth ratio {quad:.3} below formula {quad_model:.3}"))?;
    ensure(quad > lin, || format!("Booth ratio {quad:.3} not above linear {lin:.3}"))?;
    Ok(format!("add {lin:.4}x (model {model:.4}x); Booth {quad:.2}x (formula {quad_model:.2}x)"))
}

fn c9_reduction() -> Outcome {
    let cfg = small_bank(1024);
    let t = TimingEnergyConfig::default();
    let mut r = ChaCha8Rng::seed_from_u64(9);
    // group by (input bits, padded size) so each group runs as columns of one bank
    let mut groups: BTreeMap<(usize, usize), Vec<Vec<i64>>> = BTreeMap::new();
    for _ in 0..C9_VECTORS {
        let bits = [3, 6, 10, 14][r.gen_range(0..4)];
        let size = r.gen_range(2..=4096usize);
        let (lo, hi) = (-(1i64 << (bits - 1)), (1i64 << (bits - 1)) - 1);
        let v = (0..size).map(|_| r.gen_range(lo..=hi)).collect();
        groups.entry((bits, size.next_power_of_two())).or_default().push(v);
    }
    for ((bits, pow2), vecs) in &groups {
        let red = build_reduction(*bits, *pow2, ReductionMode::Auto, true).map_err(|e| e.to_string())?;
        let mut bank = BankState::new(cfg.clone()).map_err(|e| e.to_string())?;
        let (res, _) = red.run(&mut bank, &t, vecs).map_err(|e| e.to_string())?;
        for (v, got) in vecs.iter().zip(&res) {
            let want: i128 = v.iter().map(|&x| x as i128).sum();
            let bound = bits + (v.len() as f64).log2().ceil() as usize;
            ensure(got.sum == want && !got.overflow, || format!("bits={bits} size={}: {} vs {want}", v.len(), got.sum))?;
            ensure(got.precision <= bound, || format!("bits={bits} size={}: precision {} > {bound}", v.len(), got.precision))?;
        }
    }
    Ok(format!("{C9_VECTORS} vectors in {} groups exact", groups.len()))
}

fn c10_determinism() -> Outcome {
    let trace = "bbop_trsp_init a - - 5000 16 0\nbbop_trsp_init b - - 5000 16 0\nbbop_add c a b 5000 16 1\n\
                 bbop_mul d a b 5000 16 1\nbbop_red_sum s c - 5000 16 1\nbbop_sub e c a 5000 16 0\n";
    let mut cfg = SimConfig::default();
    cfg.bank.columns_per_row = 1024;
    let once = || -> Result<Vec<u8>, String> {
        let opts = RunOptions { seed: 42, ..RunOptions::default() };
        let mut run = TraceRunner::new(cfg.clone(), opts).map_err(|e| e.to_string())?;
        let rep = run.run(&parse_trace(trace).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let mut out = Vec::new();
        rep.write_csv(&mut out).map_err(|e| e.to_string())?;
        Ok(out)
    };
    let (x, y) = (once()?, once()?);
    ensure(x == y, || "reports differ".into())?;
    Ok(format!("{} identical bytes", x.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("cycle formulas", || timed(C1_LIMIT, c1_cycle_formulas)),
        ("functional equivalence", || timed(C2_LIMIT, c2_functional)),
        ("mapping primitive cycles", c3_mapping_cycles),
        ("worked precision example", c4_worked_example),
        ("conversion vectors", c5_conversion),
        ("signed-digit latency constancy", c6_rbr_constancy),
        ("pareto ordinals", || timed(C7_LIMIT, c7_pareto)),
        ("narrow-value speedup", c8_narrow_speedup),
        ("reduction with growth", c9_reduction),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
