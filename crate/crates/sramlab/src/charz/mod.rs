//! Single-cell characterization: noise margins, read-path Ion/Ioff,
//! stacked-leakage closed forms with their numeric oracle, leakage and
//! operation power, dynamic operation checks, and bitline decay.

mod dynamic;
mod harness;
mod ionioff;
mod leakage;
mod snm;

pub use dynamic::{
    bitline_decay, dynamic_op_check, operation_power, DecayResult, OpCheck, OpKind,
    DynamicConfig,
};
pub use harness::{hold_netlist, read_netlist, write_netlist, HarnessConfig};
pub use ionioff::{ion_ioff, ReadPathMetrics};
pub use leakage::{
    leakage_power, stack_current_numeric, stacked_leakage_closed_form, stacked_leakage_numeric,
    GateState, LeakagePower, StackSolution,
};
pub use snm::{snm, wnm, SnmMode, SnmResult, WnmResult};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CharzError {
    #[error(transparent)]
    Netlist(#[from] crate::netlist::NetlistError),
    #[error(transparent)]
    Solver(#[from] crate::solver::SolverError),
    #[error(transparent)]
    Device(#[from] crate::device::DeviceError),
    #[error("cell '{0}' has no storage ports for butterfly extraction")]
    NoStoragePorts(String),
    #[error("VTC for node '{node}' is non-monotone beyond tolerance (step {delta:.3e} V)")]
    NonMonotoneVtc { node: String, delta: f64 },
    #[error("unsupported stack configuration: n_stack={n_stack}, n_on={n_on}")]
    UnsupportedStack { n_stack: usize, n_on: usize },
    #[error("{0}")]
    Unsupported(String),
}
