//! Cycle-level, data-accurate simulator for arithmetic executed inside DRAM
//! subarrays with row-copy, majority and inter-subarray move primitives.

pub mod bench;
pub mod cost;
pub mod dram;
pub mod library;
pub mod mapping;
pub mod precision;
pub mod trace;
pub mod uprog;
