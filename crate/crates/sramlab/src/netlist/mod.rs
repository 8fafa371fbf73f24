//! Circuit netlist: in-memory model, SPICE-subset text format, and
//! built-in generators for the bitcell library.

mod cells;
mod column;
mod parse;

pub use cells::{default_sizing, BuiltCell, CellDescriptor, CellKind, CellPorts};
pub use column::{compose_column, Column, ColumnSpec, RailArch};
pub use parse::parse_netlist;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{DeviceParams, Polarity};

/// Index into the node table. Ground ("0") is always node 0.
pub type NodeId = usize;

pub const GROUND: NodeId = 0;

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: unknown model '{name}'")]
    UnknownModel { line: usize, name: String },
    #[error("line {line}: duplicate instance name '{name}'")]
    DuplicateInstance { line: usize, name: String },
    #[error("line {line}: bad unit suffix in '{token}'")]
    BadUnitSuffix { line: usize, token: String },
    #[error("missing .end directive")]
    MissingEnd,
    #[error("netlist validation failed: {0}")]
    Validation(String),
    #[error("unsupported cell kind: {0}")]
    UnsupportedCell(String),
    #[error("incomplete sizing for {kind}: missing '{entry}'")]
    IncompleteSizing { kind: String, entry: String },
    #[error("unsupported (cell, rail architecture) combination: {0}")]
    UnsupportedComposition(String),
}

/// Source value: DC level or piecewise-linear waveform (time, volts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceValue {
    Dc(f64),
    Pwl(Vec<(f64, f64)>),
}

impl SourceValue {
    /// Value at time t. PWL holds its endpoint levels outside the range.
    pub fn at(&self, t: f64) -> f64 {
        match self {
            SourceValue::Dc(v) => *v,
            SourceValue::Pwl(pts) => {
                if pts.is_empty() {
                    return 0.0;
                }
                if t <= pts[0].0 {
                    return pts[0].1;
                }
                for w in pts.windows(2) {
                    let (t0, v0) = w[0];
                    let (t1, v1) = w[1];
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                pts[pts.len() - 1].1
            }
        }
    }

    pub fn dc_value(&self) -> f64 {
        self.at(0.0)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        match self {
            SourceValue::Dc(_) => &[],
            SourceValue::Pwl(pts) => pts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InstanceKind {
    Mos {
        d: NodeId,
        g: NodeId,
        s: NodeId,
        b: NodeId,
        model: String,
        w: Option<f64>,
        l: Option<f64>,
    },
    VSource {
        p: NodeId,
        n: NodeId,
        value: SourceValue,
    },
    Cap {
        p: NodeId,
        n: NodeId,
        farads: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub kind: InstanceKind,
}

/// An in-memory circuit: interned nodes, instances, model cards, numeric
/// parameters, initial conditions, and the analysis temperature.
/// Immutable once built; analyses clone when they need to edit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Netlist {
    node_names: Vec<String>,
    node_index: BTreeMap<String, NodeId>,
    pub instances: Vec<Instance>,
    pub models: BTreeMap<String, DeviceParams>,
    pub params: BTreeMap<String, f64>,
    /// node name -> volts, applied as DC initial guess and as t=0 pin.
    pub initial_conditions: BTreeMap<String, f64>,
    /// Analysis temperature in celsius (`.temp`).
    pub temp_c: f64,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    pub fn new() -> Self {
        let mut node_index = BTreeMap::new();
        node_index.insert("0".to_string(), 0);
        Self {
            node_names: vec!["0".to_string()],
            node_index,
            instances: Vec::new(),
            models: BTreeMap::new(),
            params: BTreeMap::new(),
            initial_conditions: BTreeMap::new(),
            temp_c: 27.0,
        }
    }

    pub fn temp_k(&self) -> f64 {
        self.temp_c + 273.15
    }

    /// Intern a node name, returning its id.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.node_index.get(name) {
            return id;
        }
        let id = self.node_names.len();
        self.node_names.push(name.to_string());
        self.node_index.insert(name.to_string(), id);
        id
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.node_index.get(name).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.node_names[id]
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    fn check_name(&self, name: &str) -> Result<(), NetlistError> {
        if self.instances.iter().any(|i| i.name == name) {
            return Err(NetlistError::DuplicateInstance { line: 0, name: name.to_string() });
        }
        Ok(())
    }

    pub fn add_model(&mut self, name: &str, params: DeviceParams) {
        self.models.insert(name.to_string(), params);
    }

    pub fn add_mos(
        &mut self,
        name: &str,
        d: &str,
        g: &str,
        s: &str,
        b: &str,
        model: &str,
        w: Option<f64>,
        l: Option<f64>,
    ) -> Result<(), NetlistError> {
        self.check_name(name)?;
        let kind = InstanceKind::Mos {
            d: self.node(d),
            g: self.node(g),
            s: self.node(s),
            b: self.node(b),
            model: model.to_string(),
            w,
            l,
        };
        self.instances.push(Instance { name: name.to_string(), kind });
        Ok(())
    }

    pub fn add_vsource(&mut self, name: &str, p: &str, n: &str, value: SourceValue) -> Result<(), NetlistError> {
        self.check_name(name)?;
        let kind = InstanceKind::VSource { p: self.node(p), n: self.node(n), value };
        self.instances.push(Instance { name: name.to_string(), kind });
        Ok(())
    }

    pub fn add_cap(&mut self, name: &str, p: &str, n: &str, farads: f64) -> Result<(), NetlistError> {
        self.check_name(name)?;
        let kind = InstanceKind::Cap { p: self.node(p), n: self.node(n), farads };
        self.instances.push(Instance { name: name.to_string(), kind });
        Ok(())
    }

    pub fn set_ic(&mut self, node: &str, volts: f64) {
        self.node(node);
        self.initial_conditions.insert(node.to_string(), volts);
    }

    /// Overwrite or add a DC source pinning `node` to ground.
    pub fn pin(&mut self, name: &str, node: &str, volts: f64) {
        for inst in &mut self.instances {
            if inst.name == name {
                inst.kind = InstanceKind::VSource {
                    p: self.node_index[node],
                    n: GROUND,
                    value: SourceValue::Dc(volts),
                };
                return;
            }
        }
        self.add_vsource(name, node, "0", SourceValue::Dc(volts)).unwrap();
    }

    /// Set the value of an existing voltage source.
    pub fn set_source(&mut self, name: &str, value: SourceValue) -> Result<(), NetlistError> {
        for inst in &mut self.instances {
            if inst.name == name {
                if let InstanceKind::VSource { value: v, .. } = &mut inst.kind {
                    *v = value;
                    return Ok(());
                }
                return Err(NetlistError::Validation(format!("'{name}' is not a voltage source")));
            }
        }
        Err(NetlistError::Validation(format!("no source named '{name}'")))
    }

    pub fn remove_instance(&mut self, name: &str) -> bool {
        let before = self.instances.len();
        self.instances.retain(|i| i.name != name);
        before != self.instances.len()
    }

    /// Redirect every MOS gate terminal that references `node` to a fresh
    /// node, returning the new node's name. Used to cut storage feedback
    /// for butterfly-curve extraction.
    pub fn split_gates(&mut self, node: &str, new_name: &str) -> Result<NodeId, NetlistError> {
        let old = self
            .find_node(node)
            .ok_or_else(|| NetlistError::Validation(format!("no node named '{node}'")))?;
        let new = self.node(new_name);
        let mut touched = false;
        for inst in &mut self.instances {
            if let InstanceKind::Mos { g, .. } = &mut inst.kind {
                if *g == old {
                    *g = new;
                    touched = true;
                }
            }
        }
        if !touched {
            return Err(NetlistError::Validation(format!("no gate references node '{node}'")));
        }
        Ok(new)
    }

    /// Structural checks: model references, positive capacitances and
    /// geometry overrides, instance name uniqueness.
    pub fn validate(&self) -> Result<(), NetlistError> {
        let mut seen = std::collections::BTreeSet::new();
        for inst in &self.instances {
            if !seen.insert(inst.name.as_str()) {
                return Err(NetlistError::Validation(format!("duplicate instance '{}'", inst.name)));
            }
            match &inst.kind {
                InstanceKind::Mos { model, w, l, .. } => {
                    if !self.models.contains_key(model) {
                        return Err(NetlistError::Validation(format!(
                            "instance '{}' references unknown model '{model}'",
                            inst.name
                        )));
                    }
                    if w.map_or(false, |w| w <= 0.0) || l.map_or(false, |l| l <= 0.0) {
                        return Err(NetlistError::Validation(format!(
                            "instance '{}' has non-positive W/L override",
                            inst.name
                        )));
                    }
                }
                InstanceKind::Cap { farads, .. } => {
                    if *farads <= 0.0 {
                        return Err(NetlistError::Validation(format!(
                            "capacitor '{}' must be positive",
                            inst.name
                        )));
                    }
                }
                InstanceKind::VSource { value, .. } => {
                    if let SourceValue::Pwl(pts) = value {
                        if pts.len() < 2 {
                            return Err(NetlistError::Validation(format!(
                                "PWL source '{}' needs at least two points",
                                inst.name
                            )));
                        }
                        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
                            return Err(NetlistError::Validation(format!(
                                "PWL source '{}' times must increase",
                                inst.name
                            )));
                        }
                    }
                }
            }
        }
        for p in self.models.values() {
            p.validate().map_err(|e| NetlistError::Validation(e.to_string()))?;
        }
        Ok(())
    }

    /// Resolve the device parameters for a MOS instance, applying the
    /// instance W/L overrides onto the model card.
    pub fn resolve_mos(&self, inst: &Instance) -> Option<DeviceParams> {
        if let InstanceKind::Mos { model, w, l, .. } = &inst.kind {
            let mut p = self.models.get(model)?.clone();
            if let Some(w) = w {
                p.w = *w;
            }
            if let Some(l) = l {
                p.l = *l;
            }
            Some(p)
        } else {
            None
        }
    }

    /// Canonical text form; `parse_netlist(serialize(n)) == n` for every
    /// valid netlist.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, ".temp {}", self.temp_c);
        for (name, v) in &self.params {
            let _ = writeln!(out, ".param {name}={v}");
        }
        for (name, m) in &self.models {
            let pol = match m.polarity {
                Polarity::Nmos => "NMOS",
                Polarity::Pmos => "PMOS",
            };
            let mut line = format!(
                ".model {name} {pol} VT0={} IS={} S={} LAMBDA={} ETA={} GAMMA={} PHIF={} W={} L={} TREF={}",
                m.vt0, m.is0, m.swing, m.lambda, m.eta, m.gamma, m.phi_f, m.w, m.l, m.tref
            );
            if m.is_temp_exp != 0.0 {
                line.push_str(&format!(" ITEXP={}", m.is_temp_exp));
            }
            let _ = writeln!(out, "{line}");
        }
        for inst in &self.instances {
            match &inst.kind {
                InstanceKind::Mos { d, g, s, b, model, w, l } => {
                    let mut line = format!(
                        "{} {} {} {} {} {model}",
                        inst.name,
                        self.node_name(*d),
                        self.node_name(*g),
                        self.node_name(*s),
                        self.node_name(*b)
                    );
                    if let Some(w) = w {
                        line.push_str(&format!(" W={w}"));
                    }
                    if let Some(l) = l {
                        line.push_str(&format!(" L={l}"));
                    }
                    let _ = writeln!(out, "{line}");
                }
                InstanceKind::VSource { p, n, value } => match value {
                    SourceValue::Dc(v) => {
                        let _ = writeln!(
                            out,
                            "{} {} {} DC {v}",
                            inst.name,
                            self.node_name(*p),
                            self.node_name(*n)
                        );
                    }
                    SourceValue::Pwl(pts) => {
                        let pairs: Vec<String> =
                            pts.iter().map(|(t, v)| format!("{t} {v}")).collect();
                        let _ = writeln!(
                            out,
                            "{} {} {} PWL({})",
                            inst.name,
                            self.node_name(*p),
                            self.node_name(*n),
                            pairs.join(" ")
                        );
                    }
                },
                InstanceKind::Cap { p, n, farads } => {
                    let _ = writeln!(
                        out,
                        "{} {} {} {farads}",
                        inst.name,
                        self.node_name(*p),
                        self.node_name(*n)
                    );
                }
            }
        }
        for (node, v) in &self.initial_conditions {
            let _ = writeln!(out, ".ic {node}={v}");
        }
        out.push_str(".end\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_is_node_zero() {
        let mut n = Netlist::new();
        assert_eq!(n.node("0"), GROUND);
        assert_eq!(n.node("a"), 1);
        assert_eq!(n.node("a"), 1);
        assert_eq!(n.node_name(1), "a");
    }

    #[test]
    fn pwl_interpolates_and_holds_endpoints() {
        let v = SourceValue::Pwl(vec![(0.0, 0.0), (1e-9, 1.0), (2e-9, 0.5)]);
        assert_eq!(v.at(-1.0), 0.0);
        assert_eq!(v.at(0.5e-9), 0.5);
        assert!((v.at(1.5e-9) - 0.75).abs() < 1e-12);
        assert_eq!(v.at(5e-9), 0.5);
    }

    #[test]
    fn validate_catches_unknown_model_and_bad_cap() {
        let mut n = Netlist::new();
        n.add_mos("M1", "d", "g", "s", "0", "nope", None, None).unwrap();
        assert!(n.validate().is_err());

        let mut n = Netlist::new();
        n.add_cap("C1", "a", "0", -1e-15).unwrap();
        assert!(n.validate().is_err());
    }

    #[test]
    fn split_gates_redirects_only_gates() {
        let mut n = Netlist::new();
        n.add_model("n", crate::device::DeviceParams::nmos());
        n.add_mos("M1", "q", "qb", "0", "0", "n", None, None).unwrap();
        n.add_mos("M2", "qb", "q", "0", "0", "n", None, None).unwrap();
        let new = n.split_gates("q", "q_drive").unwrap();
        match &n.instances[1].kind {
            InstanceKind::Mos { g, .. } => assert_eq!(*g, new),
            _ => unreachable!(),
        }
        // M1's drain still references q.
        match &n.instances[0].kind {
            InstanceKind::Mos { d, .. } => assert_eq!(n.node_name(*d), "q"),
            _ => unreachable!(),
        }
    }
}
