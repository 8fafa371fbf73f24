//! Column and row composition: n cells sharing bitlines and virtual
//! power rails.
//!
//! Rail architectures:
//! - `A`: one switched supply rail for the whole array.
//! - `B`: one switched supply rail per column.
//! - `C`: one switched supply rail per row.
//!
//! For a single composed column, A and B are structurally identical (one
//! shared rail node); C gives every row its own rail and rail switch.
//! Only the supply rail is switched; cell grounds tie to the global
//! ground.

use serde::{Deserialize, Serialize};

use super::cells::{build_cell, BuiltCell, CellDescriptor};
use super::{InstanceKind, Netlist, NetlistError, SourceValue};

/// Per-cell rail capacitance [F] added on each virtual rail connection.
pub const RAIL_CAP_PER_CELL: f64 = 0.05e-15;
/// Default rail-switch W/L.
pub const RAIL_SWITCH_RATIO: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RailArch {
    A,
    B,
    C,
}

impl RailArch {
    pub fn from_name(s: &str) -> Option<RailArch> {
        Some(match s.to_ascii_lowercase().as_str() {
            "a" => RailArch::A,
            "b" => RailArch::B,
            "c" => RailArch::C,
            _ => return None,
        })
    }
}

/// Column request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub cell: CellDescriptor,
    pub n: usize,
    /// Stored bit per cell (Q side); length n.
    pub pattern: Vec<bool>,
    pub arch: RailArch,
    /// Per-cell bitline wiring capacitance [F].
    pub wiring_cap: f64,
    /// Supply level used for the stored-state initial conditions [V].
    pub vdd: f64,
}

/// Node names of one instantiated cell inside a column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellNodes {
    pub prefix: String,
    pub wl: Option<String>,
    pub rwl: Option<String>,
    pub q: Option<String>,
    pub qb: Option<String>,
    pub rail: String,
}

/// A composed column: the netlist (no sources) plus the shared and
/// per-cell node names harnesses need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub netlist: Netlist,
    pub spec: ColumnSpec,
    pub cells: Vec<CellNodes>,
    /// Shared bitline node names.
    pub bitlines: Vec<String>,
    pub read_bitline: Option<String>,
    /// Virtual rail node names (one for arch A/B, n for arch C).
    pub rails: Vec<String>,
    /// Gate node of the rail switch per rail (active-low PMOS enable).
    pub rail_gates: Vec<String>,
}

/// Copy `cell`'s devices into `dst`, prefixing private node and instance
/// names and mapping shared ones.
fn instantiate(
    dst: &mut Netlist,
    cell: &BuiltCell,
    prefix: &str,
    shared: &dyn Fn(&str) -> Option<String>,
) -> Result<(), NetlistError> {
    let src = &cell.netlist;
    let map = |dstn: &mut Netlist, id: usize| -> String {
        let name = src.node_name(id);
        if name == "0" {
            return "0".to_string();
        }
        let mapped = shared(name).unwrap_or_else(|| format!("{prefix}{name}"));
        dstn.node(&mapped);
        mapped
    };
    for inst in &src.instances {
        let name = format!("{prefix}{}", inst.name);
        match &inst.kind {
            InstanceKind::Mos { d, g, s, b, model, w, l } => {
                let (d, g, s, b) = (map(dst, *d), map(dst, *g), map(dst, *s), map(dst, *b));
                dst.add_mos(&name, &d, &g, &s, &b, model, *w, *l)?;
            }
            InstanceKind::Cap { p, n, farads } => {
                let (p, n) = (map(dst, *p), map(dst, *n));
                dst.add_cap(&name, &p, &n, *farads)?;
            }
            InstanceKind::VSource { p, n, value } => {
                let (p, n) = (map(dst, *p), map(dst, *n));
                dst.add_vsource(&name, &p, &n, value.clone())?;
            }
        }
    }
    for (model, params) in &src.models {
        dst.models.entry(model.clone()).or_insert_with(|| params.clone());
    }
    Ok(())
}

/// Compose `n` cells into a column per the spec. Word lines stay per-row
/// (`wl{i}`, `rwl{i}`); bitlines and (for arch A/B) the supply rail are
/// shared. Internal nodes are pre-initialized to the stored pattern.
pub fn compose_column(spec: &ColumnSpec) -> Result<Column, NetlistError> {
    if spec.n < 1 {
        return Err(NetlistError::UnsupportedComposition("column needs n >= 1".into()));
    }
    if spec.pattern.len() != spec.n {
        return Err(NetlistError::UnsupportedComposition(format!(
            "pattern length {} != n {}",
            spec.pattern.len(),
            spec.n
        )));
    }
    let cell = build_cell(&spec.cell)?;
    if cell.kind.is_readpath_fixture() {
        return Err(NetlistError::UnsupportedComposition(format!(
            "{} is a read-path fixture, not a storage cell",
            cell.kind.name()
        )));
    }

    let mut n = Netlist::new();
    let mut cells = Vec::with_capacity(spec.n);
    let bitline_ports: Vec<String> = cell.ports.wbl.clone();
    let rbl_port = cell.ports.rbl.clone();

    let mut rails = Vec::new();
    let mut rail_gates = Vec::new();
    match spec.arch {
        RailArch::A | RailArch::B => {
            rails.push("vvdd".to_string());
            rail_gates.push("rail_en".to_string());
        }
        RailArch::C => {
            for i in 0..spec.n {
                rails.push(format!("vvdd_r{i}"));
                rail_gates.push(format!("rail_en_r{i}"));
            }
        }
    }

    for i in 0..spec.n {
        let prefix = format!("c{i}_");
        let rail = match spec.arch {
            RailArch::A | RailArch::B => rails[0].clone(),
            RailArch::C => rails[i].clone(),
        };
        let wl = cell.ports.wl.as_ref().map(|_| format!("wl{i}"));
        let rwl = cell.ports.rwl.as_ref().map(|_| format!("rwl{i}"));
        let shared = {
            let bitline_ports = bitline_ports.clone();
            let rbl_port = rbl_port.clone();
            let rail = rail.clone();
            let wl_port = cell.ports.wl.clone();
            let rwl_port = cell.ports.rwl.clone();
            let wl = wl.clone();
            let rwl = rwl.clone();
            move |name: &str| -> Option<String> {
                if name == "vddb" {
                    return Some("vddb".to_string());
                }
                if name == "vvdd" {
                    return Some(rail.clone());
                }
                if bitline_ports.iter().any(|b| b == name) {
                    return Some(name.to_string());
                }
                if rbl_port.as_deref() == Some(name) {
                    return Some(name.to_string());
                }
                if wl_port.as_deref() == Some(name) {
                    return wl.clone();
                }
                if rwl_port.as_deref() == Some(name) {
                    return rwl.clone();
                }
                None
            }
        };
        instantiate(&mut n, &cell, &prefix, &shared)?;

        let stored = spec.pattern[i];
        let (qv, qbv) = if stored { (spec.vdd, 0.0) } else { (0.0, spec.vdd) };
        if let Some(q) = &cell.ports.q {
            n.set_ic(&format!("{prefix}{q}"), qv);
        }
        if let Some(qb) = &cell.ports.qb {
            n.set_ic(&format!("{prefix}{qb}"), qbv);
        }

        cells.push(CellNodes {
            prefix: prefix.clone(),
            wl,
            rwl,
            q: cell.ports.q.as_ref().map(|q| format!("{prefix}{q}")),
            qb: cell.ports.qb.as_ref().map(|q| format!("{prefix}{q}")),
            rail,
        });
    }

    // Rail switches and rail wiring capacitance.
    for (rail, gate) in rails.iter().zip(&rail_gates) {
        let cells_on_rail = match spec.arch {
            RailArch::A | RailArch::B => spec.n,
            RailArch::C => 1,
        };
        n.add_mos(
            &format!("msw_{rail}"),
            rail,
            gate,
            "vdd",
            "vddb",
            "p",
            Some(RAIL_SWITCH_RATIO * super::cells::REF_L),
            Some(super::cells::REF_L),
        )?;
        n.add_cap(
            &format!("crail_{rail}"),
            rail,
            "0",
            RAIL_CAP_PER_CELL * cells_on_rail as f64,
        )?;
    }

    // Total bitline capacitance n * wiring, attached explicitly.
    let mut all_bitlines = bitline_ports.clone();
    if let Some(r) = &rbl_port {
        all_bitlines.push(r.clone());
    }
    for bl in &all_bitlines {
        n.add_cap(&format!("cbl_{bl}"), bl, "0", spec.wiring_cap * spec.n as f64)?;
    }

    Ok(Column {
        netlist: n,
        spec: spec.clone(),
        cells,
        bitlines: bitline_ports,
        read_bitline: rbl_port,
        rails,
        rail_gates,
    })
}

impl Column {
    /// Add the fixed harness sources: global supply, bulk, rail enables
    /// (switched on), and hold levels on word lines.
    pub fn add_baseline_sources(&mut self, vdd: f64) {
        let nl = &mut self.netlist;
        nl.pin("vsup", "vdd", vdd);
        nl.pin("vbulk", "vddb", vdd);
        for (i, gate) in self.rail_gates.clone().iter().enumerate() {
            nl.pin(&format!("vrail_en{i}"), gate, 0.0);
        }
        for (i, cell) in self.cells.clone().iter().enumerate() {
            if let Some(wl) = &cell.wl {
                nl.pin(&format!("vwl{i}"), wl, 0.0);
            }
            if let Some(rwl) = &cell.rwl {
                nl.pin(&format!("vrwl{i}"), rwl, 0.0);
            }
        }
    }

    /// Convenience: pulse a named line with the standard trapezoid.
    pub fn pulse(&mut self, source: &str, node: &str, lo: f64, hi: f64, t_on: f64, t_off: f64) {
        let ramp = 1e-10;
        let pwl = SourceValue::Pwl(vec![
            (0.0, lo),
            (t_on, lo),
            (t_on + ramp, hi),
            (t_off, hi),
            (t_off + ramp, lo),
        ]);
        let node_owned = node.to_string();
        self.netlist.pin(source, &node_owned, lo);
        self.netlist.set_source(source, pwl).unwrap();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::cells::CellKind;

    fn spec(kind: CellKind, n: usize, arch: RailArch) -> ColumnSpec {
        ColumnSpec {
            cell: CellDescriptor::new(kind),
            n,
            pattern: vec![false; n],
            arch,
            wiring_cap: 2e-15,
            vdd: 1.0,
        }
    }

    #[test]
    fn degenerate_single_cell_column() {
        let col = compose_column(&spec(CellKind::Conv6T, 1, RailArch::B)).unwrap();
        assert_eq!(col.cells.len(), 1);
        assert_eq!(col.rails.len(), 1);
        // Bitline capacitor present.
        assert!(col.netlist.instances.iter().any(|i| i.name == "cbl_bl"));
        col.netlist.validate().unwrap();
    }

    #[test]
    fn fig4_scenario_column() {
        let mut s = spec(CellKind::Conv6T, 65, RailArch::B);
        s.pattern = vec![true; 65];
        let col = compose_column(&s).unwrap();
        assert_eq!(col.cells.len(), 65);
        assert_eq!(col.rails, vec!["vvdd".to_string()]);
        let mos: usize = col
            .netlist
            .instances
            .iter()
            .filter(|i| matches!(i.kind, InstanceKind::Mos { .. }))
            .count();
        assert_eq!(mos, 65 * 6 + 1); // cells plus rail switch
    }

    #[test]
    fn arch_c_gives_independent_rails() {
        let col = compose_column(&spec(CellKind::Wre9T, 2, RailArch::C)).unwrap();
        assert_eq!(col.rails.len(), 2);
        assert_ne!(col.rails[0], col.rails[1]);
        assert_eq!(col.rail_gates.len(), 2);
    }

    #[test]
    fn pattern_length_mismatch_is_rejected() {
        let mut s = spec(CellKind::Conv6T, 4, RailArch::B);
        s.pattern = vec![true; 3];
        assert!(compose_column(&s).is_err());
    }

    #[test]
    fn readpath_fixture_cannot_compose() {
        assert!(compose_column(&spec(CellKind::ReadpathChang, 2, RailArch::B)).is_err());
    }
}
