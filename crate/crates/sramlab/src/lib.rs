//! Near-threshold SRAM bitcell characterization workbench.
//!
//! A compact-model circuit solver plus the analysis passes built on it:
//! noise-margin extraction, read-path Ion/Ioff, stacked-leakage closed
//! forms with a numeric oracle, leakage and operation power, Monte Carlo
//! process variation, per-operation minimum-voltage search, and
//! column/block-level composition and reporting.

pub mod device;
pub mod netlist;
pub mod solver;

/// CLI entry point; returns the process exit code.
pub fn run_cli() -> i32 {
    0
}
