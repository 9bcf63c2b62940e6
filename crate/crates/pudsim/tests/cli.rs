use std::path::PathBuf;
use std::process::{Command, Output};

use pudsim::bench::SWEEP;
use pudsim::dram::BankConfig;
use pudsim::library::manifest;

fn pudsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pudsim")).args(args).env_remove("PUDSIM_CONFIG").output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pudsim-cli-{name}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

#[test]
fn cycles_suite_lists_the_ripple_adder() {
    let out = pudsim(&["--bench", "cycles"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "add,RCA_ABOS,ABOS,16,129,0"));
}

#[test]
fn pareto_rows_cover_every_program_and_precision() {
    let out = pudsim(&["--bench", "pareto"]);
    assert!(out.status.success());
    let cfg = BankConfig::default();
    let want: usize = manifest().iter().map(|e| SWEEP.iter().filter(|&&n| e.supports(n, &cfg)).count()).sum::<usize>() * 2;
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), want + 1);
}

#[test]
fn unknown_suite_fails() {
    let out = pudsim(&["--bench", "sorting"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown suite"));
}

#[test]
fn empty_trace_exits_zero() {
    let d = scratch("empty");
    let t = d.join("empty.trace");
    std::fs::write(&t, "# no instructions\n").unwrap();
    let out = pudsim(&["--trace", t.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 2);
}

#[test]
fn config_file_and_overrides_apply() {
    let d = scratch("cfg");
    let cfg = d.join("sim.cfg");
    std::fs::write(&cfg, "columns = 128\nsubarrays = 16 # small bank\n").unwrap();
    let t = d.join("add.trace");
    std::fs::write(&t, "bbop_trsp_init a - - 300 8 0\nbbop_trsp_init b - - 300 8 0\nbbop_add c a b 300 8 1\n").unwrap();
    let csv = d.join("report.csv");
    let out = pudsim(&["--config", cfg.to_str().unwrap(), "--trace", t.to_str().unwrap(), "--out", csv.to_str().unwrap(), "--dump-tracker", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&csv).unwrap().lines().last().unwrap().ends_with("PASS"));
    assert!(String::from_utf8(out.stderr).unwrap().contains("\"c\""));
    let bad = pudsim(&["--config", cfg.to_str().unwrap(), "--trace", t.to_str().unwrap(), "--mapping", "diagonal"]);
    assert_eq!(bad.status.code(), Some(2));
}
