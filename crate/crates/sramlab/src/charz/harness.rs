//! DC harness configurations for single cells: supplies, word-line and
//! bitline levels per operating mode.

use crate::netlist::{BuiltCell, CellKind, Netlist};

/// Knobs shared by the DC configurations.
#[derive(Debug, Clone, Copy)]
pub struct HarnessConfig {
    pub vdd: f64,
    /// Analysis temperature [K].
    pub temp_k: f64,
    /// Leave the cell supply rail unconnected (half-selected cells).
    pub float_rail: bool,
}

impl HarnessConfig {
    pub fn new(vdd: f64, temp_k: f64) -> Self {
        Self { vdd, temp_k, float_rail: false }
    }
}

fn base(cell: &BuiltCell, cfg: &HarnessConfig) -> Netlist {
    let mut n = cell.netlist.clone();
    n.temp_c = cfg.temp_k - 273.15;
    n.pin("vbulk", &cell.ports.bulk_p, cfg.vdd);
    if !cfg.float_rail {
        n.pin("vrail", &cell.ports.vdd_rail, cfg.vdd);
    }
    // Mode-independent control levels: rail switches conducting, loop
    // closed, array footer enabled.
    for ctl in &cell.ports.controls {
        let level = match ctl.as_str() {
            "wlp" => 0.0,
            "wln" => cfg.vdd,
            "wen_ctl" => cfg.vdd,
            "arr_en" => cfg.vdd,
            _ => 0.0,
        };
        n.pin(&format!("vctl_{ctl}"), ctl, level);
    }
    n
}

fn pin_state(n: &mut Netlist, cell: &BuiltCell, vdd: f64, stored: bool) {
    let (qv, qbv) = if stored { (vdd, 0.0) } else { (0.0, vdd) };
    if let Some(q) = &cell.ports.q {
        n.set_ic(q, qv);
    }
    if let Some(qb) = &cell.ports.qb {
        n.set_ic(qb, qbv);
    }
}

/// Hold configuration: word lines low, bitlines idle at VDD, stored state
/// set through initial conditions.
pub fn hold_netlist(cell: &BuiltCell, cfg: &HarnessConfig, stored: bool) -> Netlist {
    let mut n = base(cell, cfg);
    if let Some(wl) = &cell.ports.wl {
        n.pin("vwl", wl, 0.0);
    }
    if let Some(rwl) = &cell.ports.rwl {
        n.pin("vrwl", rwl, 0.0);
    }
    for (i, bl) in cell.ports.wbl.iter().enumerate() {
        n.pin(&format!("vbl{i}"), bl, cfg.vdd);
    }
    if let Some(rbl) = &cell.ports.rbl {
        n.pin("vrbl", rbl, cfg.vdd);
    }
    pin_state(&mut n, cell, cfg.vdd, stored);
    n
}

/// Read configuration: read word line asserted, bitlines pinned at the
/// precharge level (pessimistic static read).
pub fn read_netlist(cell: &BuiltCell, cfg: &HarnessConfig, stored: bool) -> Netlist {
    let mut n = hold_netlist(cell, cfg, stored);
    if cell.kind.is_differential() {
        n.pin("vwl", cell.ports.wl.as_ref().unwrap(), cfg.vdd);
    } else if let Some(rwl) = &cell.ports.rwl {
        n.pin("vrwl", rwl, cfg.vdd);
    }
    n
}

/// Write configuration: write word line asserted, bitlines driving
/// `data`, write-assist controls active (floating rail for the 9T cell,
/// in-cell switches or loop cut for the stubs). The initial state is the
/// opposite of `data`.
pub fn write_netlist(cell: &BuiltCell, cfg: &HarnessConfig, data: bool) -> Netlist {
    let mut assist = *cfg;
    if cell.kind == CellKind::Wre9T {
        assist.float_rail = true;
    }
    let mut n = base(cell, &assist);
    if let Some(wl) = &cell.ports.wl {
        n.pin("vwl", wl, cfg.vdd);
    }
    if let Some(rwl) = &cell.ports.rwl {
        n.pin("vrwl", rwl, 0.0);
    }
    if let Some(rbl) = &cell.ports.rbl {
        n.pin("vrbl", rbl, cfg.vdd);
    }
    let levels: Vec<f64> = if cell.kind.is_differential() {
        vec![
            if data { cfg.vdd } else { 0.0 },
            if data { 0.0 } else { cfg.vdd },
        ]
    } else {
        vec![if data { cfg.vdd } else { 0.0 }]
    };
    for (i, bl) in cell.ports.wbl.iter().enumerate() {
        n.pin(&format!("vbl{i}"), bl, levels[i]);
    }
    for ctl in &cell.ports.controls {
        let level = match ctl.as_str() {
            // Write-assist positions: switches off, loop cut.
            "wlp" => cfg.vdd,
            "wln" => 0.0,
            "wen_ctl" => 0.0,
            "arr_en" => cfg.vdd,
            _ => 0.0,
        };
        n.pin(&format!("vctl_{ctl}"), ctl, level);
    }
    pin_state(&mut n, cell, cfg.vdd, !data);
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{build_cell, CellDescriptor, CellKind};
    use crate::solver::{dc_operating_point, SolveOptions};

    /// Every library cell DC-solves in hold at VDD = 1.0 V.
    #[test]
    fn all_cells_solve_in_hold_at_1v() {
        for kind in [
            CellKind::Conv6T,
            CellKind::Ia6T,
            CellKind::Wre9T,
            CellKind::Wre8T,
            CellKind::St2,
            CellKind::Wen,
            CellKind::HailongColumn,
        ] {
            let cell = build_cell(&CellDescriptor::new(kind)).unwrap();
            let n = hold_netlist(&cell, &HarnessConfig::new(1.0, 300.0), true);
            let op = dc_operating_point(&n, &[], &SolveOptions::default()).unwrap();
            assert!(op.residual <= 1e-12, "{}: residual {}", kind.name(), op.residual);
        }
    }

    /// The hold solution preserves the initialized state on both sides.
    #[test]
    fn conv6t_is_bistable_at_half_volt() {
        let cell = build_cell(&CellDescriptor::new(CellKind::Conv6T)).unwrap();
        let cfg = HarnessConfig::new(0.5, 300.0);
        let opts = SolveOptions::default();
        let op1 = dc_operating_point(&hold_netlist(&cell, &cfg, true), &[], &opts).unwrap();
        assert!(op1.voltage("q") > 0.45, "q = {}", op1.voltage("q"));
        assert!(op1.voltage("qb") < 0.05);
        let op0 = dc_operating_point(&hold_netlist(&cell, &cfg, false), &[], &opts).unwrap();
        assert!(op0.voltage("q") < 0.05, "q = {}", op0.voltage("q"));
        assert!(op0.voltage("qb") > 0.45);
    }

    /// Write drive overpowers the latch: with BL = 0 and WL high the cell
    /// holding 1 is forced below the trip point.
    #[test]
    fn conv6t_write_zero_pulls_q_low() {
        let cell = build_cell(&CellDescriptor::new(CellKind::Conv6T)).unwrap();
        let cfg = HarnessConfig::new(0.5, 300.0);
        let n = write_netlist(&cell, &cfg, false);
        let op = dc_operating_point(&n, &[], &SolveOptions::default()).unwrap();
        assert!(op.voltage("q") < 0.1, "q = {}", op.voltage("q"));
        assert!(op.voltage("qb") > 0.4, "qb = {}", op.voltage("qb"));
    }

    /// The 9T write relies on the floating rail: with the rail floated
    /// and WBL = 0 the cell cannot keep holding 1.
    #[test]
    fn wre9t_write_with_floating_rail() {
        let cell = build_cell(&CellDescriptor::new(CellKind::Wre9T)).unwrap();
        let cfg = HarnessConfig::new(0.5, 300.0);
        let n = write_netlist(&cell, &cfg, false);
        let op = dc_operating_point(&n, &[], &SolveOptions::default()).unwrap();
        assert!(op.voltage("q") < 0.1, "q = {}", op.voltage("q"));
    }
}
