//! Built-in microbenchmark suites, each producing one CSV table.

use std::io::Write;

use thiserror::Error;

use crate::cost::{pareto_sweep, sig6, write_pareto_csv, CostError, CostModel, Profile};
use crate::dram::SimConfig;
use crate::library::{convert_twos_to_rbr, distribute_program, expand, manifest, LibError, Opcode};
use crate::uprog::{count_cycles, static_cost};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown suite {0:?} (cycles, pareto, conversion)")]
    Suite(String),
    #[error(transparent)]
    Lib(#[from] LibError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Cycles,
    Pareto,
    Conversion,
}

impl Suite {
    pub fn parse(s: &str) -> Result<Suite, BenchError> {
        match s {
            "cycles" => Ok(Suite::Cycles),
            "pareto" => Ok(Suite::Pareto),
            "conversion" => Ok(Suite::Conversion),
            _ => Err(BenchError::Suite(s.into())),
        }
    }
}

pub const SWEEP: [usize; 7] = [1, 2, 4, 8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleRow {
    pub opcode: &'static str,
    pub alg: &'static str,
    pub mapping: String,
    pub n: usize,
    pub aap: u64,
    pub rbm: u64,
}

/// Static cycle counts of every library program at the swept widths.
pub fn cycles(cfg: &SimConfig) -> Result<Vec<CycleRow>, BenchError> {
    let mut rows = Vec::new();
    for e in manifest() {
        for n in SWEEP.into_iter().filter(|&n| e.supports(n, &cfg.bank)) {
            let up = expand(&e.template(n), &cfg.bank)?;
            let (aap, rbm) = count_cycles(&up);
            rows.push(CycleRow { opcode: e.opcode.name(), alg: e.alg.name(), mapping: e.mapping.name(), n, aap, rbm });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConversionRow {
    pub opcode: &'static str,
    pub alg: &'static str,
    pub mapping: String,
    pub n: usize,
    pub op_ns: f64,
    pub conversion_ns: f64,
    pub ratio: f64,
}

/// Worst-case input preparation (ABOS rows to OBPS, then two's complement
/// to signed digits, for both operands) against one run of each add and
/// multiply program.
pub fn conversion(cfg: &SimConfig) -> Result<Vec<ConversionRow>, BenchError> {
    let (b, t) = (&cfg.bank, &cfg.timing);
    let mut rows = Vec::new();
    for e in manifest().into_iter().filter(|e| matches!(e.opcode, Opcode::Add | Opcode::Mul)) {
        for n in [8, 16, 32, 64].into_iter().filter(|&n| e.supports(n, b) && n <= b.subarrays_per_bank) {
            let op_ns = static_cost(&expand(&e.template(n), b)?, b, t).latency_ns;
            let one = static_cost(&distribute_program(n, b)?, b, t).latency_ns + static_cost(&convert_twos_to_rbr(n, b)?, b, t).latency_ns;
            let conversion_ns = 2.0 * one;
            rows.push(ConversionRow {
                opcode: e.opcode.name(),
                alg: e.alg.name(),
                mapping: e.mapping.name(),
                n,
                op_ns,
                conversion_ns,
                ratio: conversion_ns / (conversion_ns + op_ns),
            });
        }
    }
    Ok(rows)
}

pub fn run_suite<W: Write>(suite: Suite, cfg: &SimConfig, out: W) -> Result<(), BenchError> {
    match suite {
        Suite::Cycles => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["opcode", "algorithm", "mapping", "n", "aap", "rbm"])?;
            for r in cycles(cfg)? {
                w.write_record([r.opcode, r.alg, &r.mapping, &r.n.to_string(), &r.aap.to_string(), &r.rbm.to_string()])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
        Suite::Pareto => {
            let model = CostModel::new(cfg.bank.clone(), cfg.timing.clone());
            let els = [Profile::small(&cfg.bank).elements, Profile::large(&cfg.bank).elements];
            let rows = pareto_sweep(&model, &Opcode::ALL, &SWEEP, &els, cfg.bank.subarrays_per_bank)?;
            write_pareto_csv(out, &rows)?;
        }
        Suite::Conversion => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["opcode", "algorithm", "mapping", "n", "op_ns", "conversion_ns", "ratio"])?;
            for r in conversion(cfg)? {
                w.write_record([
                    r.opcode,
                    r.alg,
                    &r.mapping,
                    &r.n.to_string(),
                    &sig6(r.op_ns),
                    &sig6(r.conversion_ns),
                    &sig6(r.ratio),
                ])?;
            }
            w.flush().map_err(csv::Error::from)?;
        }
    }
    Ok(())
}
