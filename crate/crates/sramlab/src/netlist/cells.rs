//! Built-in bitcell and read-path netlist generators.
//!
//! Topology notes:
//!
//! - `Conv6T`: standard cross-coupled pair with differential access.
//!   Pull-downs default to W/L = 4 for a conventional read beta ratio.
//! - `Wre9T`: 6T-style latch with a single-ended write access (write
//!   assist comes from floating the cell supply rail), a buffered read
//!   stack of three series N devices RBL -> M6 -> Qc -> M7 -> M8 -> gnd
//!   (M6 gated by the storage node, M7/M8 by RWL), and the P-type keeper
//!   M9 from the supply rail to Qc gated by RWL. For unselected rows M9
//!   is on and parks Qc at the rail, so the read stack draws essentially
//!   nothing from the bitline.
//! - `ReadpathWre9T` / `ReadpathVerlika` / `ReadpathChang`: bare read
//!   paths with the internal storage node exposed as a port, used for
//!   the Ion/Ioff comparisons.
//! - `Wre8T`, `St2`, `Wen`, `HailongColumn`: library stubs transcribed
//!   from their published descriptions; structurally checked but not part
//!   of the quantitative comparisons.
//!
//! All cells use minimum size (W/L = 2) unless the sizing table says
//! otherwise, reference L = 100 nm, and embed the default model cards as
//! `n` and `p`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{InstanceKind, Netlist, NetlistError};
use crate::device::{DeviceParams, Polarity};

/// Reference channel length [m] for generated cells.
pub const REF_L: f64 = 1e-7;
/// Storage-node capacitance [F] attached inside every generated cell.
pub const NODE_CAP: f64 = 1e-15;
/// Capacitance [F] on read-path intermediate nodes.
pub const READ_NODE_CAP: f64 = 0.2e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CellKind {
    Conv6T,
    Ia6T,
    Wre9T,
    Wre8T,
    St2,
    Wen,
    ReadpathWre9T,
    ReadpathVerlika,
    ReadpathChang,
    HailongColumn,
}

impl CellKind {
    pub fn name(&self) -> &'static str {
        match self {
            CellKind::Conv6T => "conv6t",
            CellKind::Ia6T => "ia6t",
            CellKind::Wre9T => "wre9t",
            CellKind::Wre8T => "wre8t",
            CellKind::St2 => "st2",
            CellKind::Wen => "wen",
            CellKind::ReadpathWre9T => "readpath-wre9t",
            CellKind::ReadpathVerlika => "readpath-verlika",
            CellKind::ReadpathChang => "readpath-chang",
            CellKind::HailongColumn => "hailong-column",
        }
    }

    pub fn from_name(s: &str) -> Option<CellKind> {
        Some(match s.to_ascii_lowercase().as_str() {
            "conv6t" | "6t" => CellKind::Conv6T,
            "ia6t" | "ia-6t" => CellKind::Ia6T,
            "wre9t" | "9t" => CellKind::Wre9T,
            "wre8t" => CellKind::Wre8T,
            "st2" | "st-2" => CellKind::St2,
            "wen" => CellKind::Wen,
            "readpath-wre9t" => CellKind::ReadpathWre9T,
            "readpath-verlika" => CellKind::ReadpathVerlika,
            "readpath-chang" => CellKind::ReadpathChang,
            "hailong-column" => CellKind::HailongColumn,
            _ => return None,
        })
    }

    /// Expected MOS instance count.
    pub fn device_count(&self) -> usize {
        match self {
            CellKind::Conv6T | CellKind::Ia6T => 6,
            CellKind::Wre9T => 9,
            CellKind::Wre8T => 8,
            CellKind::St2 => 10,
            CellKind::Wen => 8,
            CellKind::ReadpathWre9T => 4, // 3 series N + keeper P
            CellKind::ReadpathVerlika => 3,
            CellKind::ReadpathChang => 2,
            CellKind::HailongColumn => 17, // two 8T cells + shared footer
        }
    }

    /// Number of series devices between RBL and ground in the read path.
    pub fn read_stack_len(&self) -> Option<usize> {
        match self {
            CellKind::Wre9T | CellKind::ReadpathWre9T | CellKind::ReadpathVerlika => Some(3),
            CellKind::ReadpathChang => Some(2),
            _ => None,
        }
    }

    /// Differential cells write and read on BL/BLB; the rest are
    /// single-ended.
    pub fn is_differential(&self) -> bool {
        matches!(self, CellKind::Conv6T | CellKind::Ia6T | CellKind::St2)
    }

    pub fn is_readpath_fixture(&self) -> bool {
        matches!(
            self,
            CellKind::ReadpathWre9T | CellKind::ReadpathVerlika | CellKind::ReadpathChang
        )
    }
}

/// Cell request: kind plus a per-transistor W/L table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDescriptor {
    pub kind: CellKind,
    /// W/L ratio per transistor role name. Must cover every transistor of
    /// the kind; [`default_sizing`] provides the documented defaults.
    pub sizing: BTreeMap<String, f64>,
}

impl CellDescriptor {
    pub fn new(kind: CellKind) -> Self {
        Self { kind, sizing: default_sizing(kind) }
    }
}

/// Documented default sizing: minimum size (W/L = 2) everywhere except
/// the 6T pull-downs (W/L = 4); the iso-area 6T scales everything by 1.5.
pub fn default_sizing(kind: CellKind) -> BTreeMap<String, f64> {
    let mut t = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        t.insert(k.to_string(), v);
    };
    match kind {
        CellKind::Conv6T => {
            for k in ["mpu_l", "mpu_r", "max_l", "max_r"] {
                put(k, 2.0);
            }
            for k in ["mpd_l", "mpd_r"] {
                put(k, 4.0);
            }
        }
        CellKind::Ia6T => {
            for k in ["mpu_l", "mpu_r", "max_l", "max_r"] {
                put(k, 3.0);
            }
            for k in ["mpd_l", "mpd_r"] {
                put(k, 6.0);
            }
        }
        CellKind::Wre9T => {
            for k in [
                "mpd_l", "mpu_l", "mpd_r", "mpu_r", "max_w", "mrd_top", "mrd_mid", "mrd_bot",
                "mkeep",
            ] {
                put(k, 2.0);
            }
        }
        CellKind::Wre8T => {
            for k in ["mpd_l", "mpu_l", "mpd_r", "mpu_r", "max_w", "max_r", "msw_p", "msw_n"] {
                put(k, 2.0);
            }
        }
        CellKind::St2 => {
            for k in [
                "mpu_l", "mn1_l", "mn2_l", "mnf_l", "mpu_r", "mn1_r", "mn2_r", "mnf_r", "max_l",
                "max_r",
            ] {
                put(k, 2.0);
            }
        }
        CellKind::Wen => {
            for k in ["mpd_l", "mpu_l", "mpd_r", "mpu_r", "mcut", "max_w", "mr_top", "mr_bot"] {
                put(k, 2.0);
            }
        }
        CellKind::ReadpathWre9T => {
            for k in ["mrd_top", "mrd_mid", "mrd_bot", "mkeep"] {
                put(k, 2.0);
            }
        }
        CellKind::ReadpathVerlika => {
            for k in ["mrd_top", "mrd_mid", "mrd_bot"] {
                put(k, 2.0);
            }
        }
        CellKind::ReadpathChang => {
            for k in ["mrd_top", "mrd_bot"] {
                put(k, 2.0);
            }
        }
        CellKind::HailongColumn => {
            for c in ["c0", "c1"] {
                for k in ["mpd_l", "mpu_l", "mpd_r", "mpu_r", "max_l", "max_r", "mr1", "mr2"] {
                    put(&format!("{c}_{k}"), 2.0);
                }
            }
            put("mfoot", 4.0);
        }
    }
    t
}

/// Canonical port names of a generated cell. Optional entries are absent
/// when the topology has no such port.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellPorts {
    /// Write (or combined) word line.
    pub wl: Option<String>,
    /// Read word line, when the read path is separate.
    pub rwl: Option<String>,
    /// Write bitlines: `[bl, blb]` for differential cells, `[wbl]` for
    /// single-ended ones.
    pub wbl: Vec<String>,
    /// Read bitline for buffered-read cells.
    pub rbl: Option<String>,
    pub q: Option<String>,
    pub qb: Option<String>,
    pub qc: Option<String>,
    /// Cell supply rail (switchable).
    pub vdd_rail: String,
    /// P-well/bulk supply, pinned at VDD by harnesses.
    pub bulk_p: String,
    /// Extra control lines (wen_ctl, wlp/wln of the 8T stub, array enable).
    pub controls: Vec<String>,
    /// Exposed internal-node port of read-path fixtures.
    pub internal: Option<String>,
}

/// A generated cell: devices, node caps and model cards, but no sources.
/// Harnesses add supplies and stimuli.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuiltCell {
    pub kind: CellKind,
    pub netlist: Netlist,
    pub ports: CellPorts,
}

struct Builder<'a> {
    n: Netlist,
    sizing: &'a BTreeMap<String, f64>,
    kind: CellKind,
}

impl<'a> Builder<'a> {
    fn new(kind: CellKind, sizing: &'a BTreeMap<String, f64>) -> Self {
        let mut n = Netlist::new();
        n.add_model("n", DeviceParams::nmos());
        n.add_model("p", DeviceParams::pmos());
        Self { n, sizing, kind }
    }

    fn ratio(&self, role: &str) -> Result<f64, NetlistError> {
        self.sizing.get(role).copied().ok_or_else(|| NetlistError::IncompleteSizing {
            kind: self.kind.name().to_string(),
            entry: role.to_string(),
        })
    }

    fn nmos(&mut self, role: &str, d: &str, g: &str, s: &str) -> Result<(), NetlistError> {
        let w = self.ratio(role)? * REF_L;
        self.n.add_mos(role, d, g, s, "0", "n", Some(w), Some(REF_L))
    }

    fn pmos(&mut self, role: &str, d: &str, g: &str, s: &str) -> Result<(), NetlistError> {
        let w = self.ratio(role)? * REF_L;
        self.n.add_mos(role, d, g, s, "vddb", "p", Some(w), Some(REF_L))
    }

    fn cap(&mut self, name: &str, node: &str, farads: f64) {
        self.n.add_cap(name, node, "0", farads).unwrap();
    }
}

fn latch(b: &mut Builder, rail: &str) -> Result<(), NetlistError> {
    b.nmos("mpd_l", "q", "qb", "0")?;
    b.pmos("mpu_l", "q", "qb", rail)?;
    b.nmos("mpd_r", "qb", "q", "0")?;
    b.pmos("mpu_r", "qb", "q", rail)?;
    b.cap("cq", "q", NODE_CAP);
    b.cap("cqb", "qb", NODE_CAP);
    Ok(())
}

/// Generate the netlist for a cell descriptor. Fails on incomplete sizing.
pub fn build_cell(desc: &CellDescriptor) -> Result<BuiltCell, NetlistError> {
    let mut b = Builder::new(desc.kind, &desc.sizing);
    let mut ports = CellPorts {
        vdd_rail: "vvdd".to_string(),
        bulk_p: "vddb".to_string(),
        ..Default::default()
    };
    match desc.kind {
        CellKind::Conv6T | CellKind::Ia6T => {
            latch(&mut b, "vvdd")?;
            b.nmos("max_l", "bl", "wl", "q")?;
            b.nmos("max_r", "blb", "wl", "qb")?;
            ports.wl = Some("wl".into());
            ports.wbl = vec!["bl".into(), "blb".into()];
            ports.q = Some("q".into());
            ports.qb = Some("qb".into());
        }
        CellKind::Wre9T => {
            latch(&mut b, "vvdd")?;
            b.nmos("max_w", "q", "wl", "wbl")?;
            b.nmos("mrd_top", "rbl", "qb", "qc")?;
            b.nmos("mrd_mid", "qc", "rwl", "rx")?;
            b.nmos("mrd_bot", "rx", "rwl", "0")?;
            b.pmos("mkeep", "qc", "rwl", "vvdd")?;
            b.cap("cqc", "qc", READ_NODE_CAP);
            b.cap("crx", "rx", READ_NODE_CAP);
            ports.wl = Some("wl".into());
            ports.rwl = Some("rwl".into());
            ports.wbl = vec!["wbl".into()];
            ports.rbl = Some("rbl".into());
            ports.q = Some("q".into());
            ports.qb = Some("qb".into());
            ports.qc = Some("qc".into());
        }
        CellKind::Wre8T => {
            // In-cell rail switches provide the floating rails; the added
            // N switch takes its own word line.
            b.nmos("mpd_l", "q", "qb", "vgndc")?;
            b.pmos("mpu_l", "q", "qb", "vvddc")?;
            b.nmos("mpd_r", "qb", "q", "vgndc")?;
            b.pmos("mpu_r", "qb", "q", "vvddc")?;
            b.cap("cq", "q", NODE_CAP);
            b.cap("cqb", "qb", NODE_CAP);
            b.nmos("max_w", "q", "wl", "wbl")?;
            b.nmos("max_r", "rbl", "rwl", "qb")?;
            b.pmos("msw_p", "vvddc", "wlp", "vvdd")?;
            b.nmos("msw_n", "vgndc", "wln", "0")?;
            b.cap("cvddc", "vvddc", READ_NODE_CAP);
            b.cap("cgndc", "vgndc", READ_NODE_CAP);
            ports.wl = Some("wl".into());
            ports.rwl = Some("rwl".into());
            ports.wbl = vec!["wbl".into()];
            ports.rbl = Some("rbl".into());
            ports.q = Some("q".into());
            ports.qb = Some("qb".into());
            ports.controls = vec!["wlp".into(), "wln".into()];
        }
        CellKind::St2 => {
            // Schmitt-trigger inverters: stacked pull-downs with a
            // feedback device lifting the intermediate node.
            b.pmos("mpu_l", "q", "qb", "vvdd")?;
            b.nmos("mn1_l", "q", "qb", "nx_l")?;
            b.nmos("mn2_l", "nx_l", "qb", "0")?;
            b.nmos("mnf_l", "vvdd", "q", "nx_l")?;
            b.pmos("mpu_r", "qb", "q", "vvdd")?;
            b.nmos("mn1_r", "qb", "q", "nx_r")?;
            b.nmos("mn2_r", "nx_r", "q", "0")?;
            b.nmos("mnf_r", "vvdd", "qb", "nx_r")?;
            b.nmos("max_l", "bl", "wl", "q")?;
            b.nmos("max_r", "blb", "wl", "qb")?;
            b.cap("cq", "q", NODE_CAP);
            b.cap("cqb", "qb", NODE_CAP);
            b.cap("cnxl", "nx_l", READ_NODE_CAP);
            b.cap("cnxr", "nx_r", READ_NODE_CAP);
            ports.wl = Some("wl".into());
            ports.wbl = vec!["bl".into(), "blb".into()];
            ports.q = Some("q".into());
            ports.qb = Some("qb".into());
        }
        CellKind::Wen => {
            // Loop-cut device floats the right inverter input during
            // write; buffered single-ended read.
            b.nmos("mpd_l", "q", "qg", "0")?;
            b.pmos("mpu_l", "q", "qg", "vvdd")?;
            b.nmos("mpd_r", "qb", "q", "0")?;
            b.pmos("mpu_r", "qb", "q", "vvdd")?;
            b.nmos("mcut", "qg", "wen_ctl", "qb")?;
            b.nmos("max_w", "q", "wl", "wbl")?;
            b.nmos("mr_top", "rbl", "rwl", "rx")?;
            b.nmos("mr_bot", "rx", "qb", "0")?;
            b.cap("cq", "q", NODE_CAP);
            b.cap("cqb", "qb", NODE_CAP);
            b.cap("cqg", "qg", READ_NODE_CAP);
            b.cap("crx", "rx", READ_NODE_CAP);
            ports.wl = Some("wl".into());
            ports.rwl = Some("rwl".into());
            ports.wbl = vec!["wbl".into()];
            ports.rbl = Some("rbl".into());
            ports.q = Some("q".into());
            ports.qb = Some("qb".into());
            ports.controls = vec!["wen_ctl".into()];
        }
        CellKind::ReadpathWre9T => {
            b.nmos("mrd_top", "rbl", "int", "qc")?;
            b.nmos("mrd_mid", "qc", "rwl", "rx")?;
            b.nmos("mrd_bot", "rx", "rwl", "0")?;
            b.pmos("mkeep", "qc", "rwl", "vvdd")?;
            b.cap("cqc", "qc", READ_NODE_CAP);
            b.cap("crx", "rx", READ_NODE_CAP);
            ports.rwl = Some("rwl".into());
            ports.rbl = Some("rbl".into());
            ports.qc = Some("qc".into());
            ports.internal = Some("int".into());
        }
        CellKind::ReadpathVerlika => {
            b.nmos("mrd_top", "rbl", "int", "qc")?;
            b.nmos("mrd_mid", "qc", "rwl", "rx")?;
            b.nmos("mrd_bot", "rx", "rwl", "0")?;
            b.cap("cqc", "qc", READ_NODE_CAP);
            b.cap("crx", "rx", READ_NODE_CAP);
            ports.rwl = Some("rwl".into());
            ports.rbl = Some("rbl".into());
            ports.qc = Some("qc".into());
            ports.internal = Some("int".into());
        }
        CellKind::ReadpathChang => {
            b.nmos("mrd_top", "rbl", "rwl", "rx")?;
            b.nmos("mrd_bot", "rx", "int", "0")?;
            b.cap("crx", "rx", READ_NODE_CAP);
            ports.rwl = Some("rwl".into());
            ports.rbl = Some("rbl".into());
            ports.internal = Some("int".into());
        }
        CellKind::HailongColumn => {
            // Two power-gated cells sharing the read-path footer. The
            // footer is off only in idle mode, so the worst unselected
            // leakage path has two on and one off device.
            for c in ["c0", "c1"] {
                let q = format!("{c}_q");
                let qb = format!("{c}_qb");
                let rx = format!("{c}_rx");
                b.nmos(&format!("{c}_mpd_l"), &q, &qb, "0")?;
                b.pmos(&format!("{c}_mpu_l"), &q, &qb, "vvdd")?;
                b.nmos(&format!("{c}_mpd_r"), &qb, &q, "0")?;
                b.pmos(&format!("{c}_mpu_r"), &qb, &q, "vvdd")?;
                b.nmos(&format!("{c}_max_l"), &format!("bl_{c}"), "wl", &q)?;
                b.nmos(&format!("{c}_max_r"), &format!("blb_{c}"), "wl", &qb)?;
                b.nmos(&format!("{c}_mr1"), &format!("rbl_{c}"), "rwl", &rx)?;
                b.nmos(&format!("{c}_mr2"), &rx, &qb, "foot")?;
                b.cap(&format!("{c}_cq"), &q, NODE_CAP);
                b.cap(&format!("{c}_cqb"), &qb, NODE_CAP);
                b.cap(&format!("{c}_crx"), &rx, READ_NODE_CAP);
            }
            b.nmos("mfoot", "foot", "arr_en", "0")?;
            b.cap("cfoot", "foot", READ_NODE_CAP);
            ports.wl = Some("wl".into());
            ports.rwl = Some("rwl".into());
            ports.q = Some("c0_q".into());
            ports.qb = Some("c0_qb".into());
            ports.controls = vec!["arr_en".into()];
        }
    }

    let built = BuiltCell { kind: desc.kind, netlist: b.n, ports };
    check_structure(&built)?;
    Ok(built)
}

/// Shortest path from `from` to ground through MOS channels of the given
/// polarity, counting devices.
fn channel_path_len(n: &Netlist, from: &str, polarity: Polarity) -> Option<usize> {
    let start = n.find_node(from)?;
    let mut dist = vec![usize::MAX; n.node_count()];
    dist[start] = 0;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    while let Some(u) = queue.pop_front() {
        for inst in &n.instances {
            if let InstanceKind::Mos { d, s, model, .. } = &inst.kind {
                if n.models.get(model).map(|m| m.polarity) != Some(polarity) {
                    continue;
                }
                for (a, bnode) in [(*d, *s), (*s, *d)] {
                    if a == u && dist[bnode] == usize::MAX {
                        dist[bnode] = dist[u] + 1;
                        queue.push_back(bnode);
                    }
                }
            }
        }
    }
    let g = dist[super::GROUND];
    (g != usize::MAX).then_some(g)
}

/// Automated graph checks for the structural invariants of each kind.
pub fn check_structure(cell: &BuiltCell) -> Result<(), NetlistError> {
    let n = &cell.netlist;
    n.validate()?;
    let mos_count = n
        .instances
        .iter()
        .filter(|i| matches!(i.kind, InstanceKind::Mos { .. }))
        .count();
    if mos_count != cell.kind.device_count() {
        return Err(NetlistError::Validation(format!(
            "{} has {mos_count} devices, expected {}",
            cell.kind.name(),
            cell.kind.device_count()
        )));
    }
    if let Some(expect) = cell.kind.read_stack_len() {
        let rbl = cell.ports.rbl.as_deref().unwrap_or("rbl");
        let len = channel_path_len(n, rbl, Polarity::Nmos).ok_or_else(|| {
            NetlistError::Validation(format!("{}: no N path from RBL to ground", cell.kind.name()))
        })?;
        if len != expect {
            return Err(NetlistError::Validation(format!(
                "{}: read stack length {len}, expected {expect}",
                cell.kind.name()
            )));
        }
    }
    // Keeper check: a P device must connect the supply rail to Qc.
    if matches!(cell.kind, CellKind::Wre9T | CellKind::ReadpathWre9T) {
        let qc = n.find_node(cell.ports.qc.as_deref().unwrap()).unwrap();
        let rail = n.find_node(&cell.ports.vdd_rail).unwrap();
        let ok = n.instances.iter().any(|i| match &i.kind {
            InstanceKind::Mos { d, s, model, .. } => {
                n.models.get(model).map(|m| m.polarity) == Some(Polarity::Pmos)
                    && ((*d == qc && *s == rail) || (*s == qc && *d == rail))
            }
            _ => false,
        });
        if !ok {
            return Err(NetlistError::Validation(format!(
                "{}: missing P-type keeper from supply to Qc",
                cell.kind.name()
            )));
        }
    }
    if cell.kind == CellKind::ReadpathVerlika {
        // No pull-up at intermediate nodes.
        let has_p = n.instances.iter().any(|i| match &i.kind {
            InstanceKind::Mos { model, .. } => {
                n.models.get(model).map(|m| m.polarity) == Some(Polarity::Pmos)
            }
            _ => false,
        });
        if has_p {
            return Err(NetlistError::Validation(
                "verlika read path must not contain pull-ups".into(),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_for_all_kinds() {
        for kind in [
            CellKind::Conv6T,
            CellKind::Ia6T,
            CellKind::Wre9T,
            CellKind::Wre8T,
            CellKind::St2,
            CellKind::Wen,
            CellKind::ReadpathWre9T,
            CellKind::ReadpathVerlika,
            CellKind::ReadpathChang,
            CellKind::HailongColumn,
        ] {
            let cell = build_cell(&CellDescriptor::new(kind)).unwrap();
            let mos = cell
                .netlist
                .instances
                .iter()
                .filter(|i| matches!(i.kind, InstanceKind::Mos { .. }))
                .count();
            assert_eq!(mos, kind.device_count(), "{}", kind.name());
        }
    }

    #[test]
    fn conv6t_ports() {
        let cell = build_cell(&CellDescriptor::new(CellKind::Conv6T)).unwrap();
        assert_eq!(cell.ports.wbl, vec!["bl".to_string(), "blb".to_string()]);
        assert_eq!(cell.ports.wl.as_deref(), Some("wl"));
        assert!(cell.netlist.find_node("q").is_some());
        assert!(cell.netlist.find_node("qb").is_some());
    }

    #[test]
    fn wre9t_structure() {
        let cell = build_cell(&CellDescriptor::new(CellKind::Wre9T)).unwrap();
        assert!(cell.netlist.find_node("qc").is_some());
        // M9 is P-type.
        let m9 = cell.netlist.instances.iter().find(|i| i.name == "mkeep").unwrap();
        match &m9.kind {
            InstanceKind::Mos { model, .. } => {
                assert_eq!(cell.netlist.models[model].polarity, Polarity::Pmos)
            }
            _ => panic!(),
        }
        assert_eq!(channel_path_len(&cell.netlist, "rbl", Polarity::Nmos), Some(3));
    }

    #[test]
    fn readpath_stack_lengths() {
        for (kind, len) in [
            (CellKind::ReadpathWre9T, 3),
            (CellKind::ReadpathVerlika, 3),
            (CellKind::ReadpathChang, 2),
        ] {
            let cell = build_cell(&CellDescriptor::new(kind)).unwrap();
            assert_eq!(
                channel_path_len(&cell.netlist, "rbl", Polarity::Nmos),
                Some(len),
                "{}",
                kind.name()
            );
        }
    }

    #[test]
    fn incomplete_sizing_is_rejected() {
        let mut desc = CellDescriptor::new(CellKind::Conv6T);
        desc.sizing.remove("mpd_l");
        match build_cell(&desc) {
            Err(NetlistError::IncompleteSizing { entry, .. }) => assert_eq!(entry, "mpd_l"),
            other => panic!("expected incomplete sizing, got {other:?}"),
        }
    }

    #[test]
    fn cells_serialize_and_reparse() {
        for kind in [CellKind::Conv6T, CellKind::Wre9T, CellKind::St2] {
            let cell = build_cell(&CellDescriptor::new(kind)).unwrap();
            let text = cell.netlist.serialize();
            let re = crate::netlist::parse_netlist(&text).unwrap();
            assert_eq!(cell.netlist, re, "{}", kind.name());
        }
    }
}
