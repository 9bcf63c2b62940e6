#![allow(dead_code)]

use std::collections::HashMap;

use pudsim::dram::{BankConfig, BankState, TimingEnergyConfig};
use pudsim::library::run;
use pudsim::uprog::{ExecStats, MicroProgram};

pub fn small_bank(columns: usize) -> BankConfig {
    BankConfig { columns_per_row: columns, ..BankConfig::default() }
}

/// Run with inputs given by name; returns outputs by name.
pub fn run_named(cfg: &BankConfig, up: &MicroProgram, inputs: &[(&str, Vec<u64>)]) -> (HashMap<String, Vec<u64>>, ExecStats) {
    let mut bank = BankState::new(cfg.clone()).unwrap();
    let t = TimingEnergyConfig::default();
    let ordered: Vec<&[u64]> = up
        .inputs
        .iter()
        .map(|op| inputs.iter().find(|(n, _)| *n == op.name).unwrap_or_else(|| panic!("no input {}", op.name)).1.as_slice())
        .collect();
    let (outs, stats) = run(&mut bank, up, &t, &ordered).unwrap();
    let map = up.outputs.iter().zip(outs).map(|(o, v)| (o.name.clone(), v)).collect();
    (map, stats)
}

pub fn sext(v: u64, bits: usize) -> i128 {
    if bits >= 64 {
        return v as i64 as i128;
    }
    let v = v & ((1u64 << bits) - 1);
    if (v >> (bits - 1)) & 1 == 1 {
        v as i128 - (1i128 << bits)
    } else {
        v as i128
    }
}
