//! DC operating-point, DC sweep, and transient analysis.
//!
//! Nodal equations with branch currents for voltage sources (MNA).
//! Newton iteration with a 0.25 V per-node step limit; on stall the DC
//! path falls back to source stepping and then a shunt-conductance ramp
//! (1e-3 S down to 1e-12 S, finished by an unshunted polish solve).
//! Transient integration is backward Euler at fixed dt with the grid
//! refined to hit PWL breakpoints exactly.

mod dense;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::device::{self, DeviceParams};
use crate::netlist::{InstanceKind, Netlist, NodeId, SourceValue, GROUND};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("newton iteration failed to converge (best residual {best_residual:.3e} A{at})", at = at_time.map(|t| format!(" at t = {t:.3e} s")).unwrap_or_default())]
    NonConvergence { best_residual: f64, at_time: Option<f64> },
    #[error("singular system{}", node.as_ref().map(|n| format!(": node '{n}' is floating")).unwrap_or_default())]
    Singular { node: Option<String> },
    #[error("node '{node}' has no capacitive path and is not source-pinned")]
    MissingCapacitance { node: String },
    #[error("bad solver input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Netlist(#[from] crate::netlist::NetlistError),
}

/// Tolerances and iteration controls. Defaults: abstol 1e-12 A, reltol
/// 1e-3, vntol 1e-6 V, damping 0.25 V per node per iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOptions {
    pub abstol: f64,
    pub reltol: f64,
    pub vntol: f64,
    pub max_iter: usize,
    pub damping: f64,
    /// Voltage jump between consecutive sweep points recorded as a
    /// bistable flip event.
    pub flip_threshold: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            abstol: 1e-12,
            reltol: 1e-3,
            vntol: 1e-6,
            max_iter: 100,
            damping: 0.25,
            flip_threshold: 0.05,
        }
    }
}

/// DC solution with per-instance bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub voltages: BTreeMap<String, f64>,
    /// Branch current through each voltage source, positive flowing from
    /// the + terminal to the - terminal inside the source.
    pub source_currents: BTreeMap<String, f64>,
    /// Channel current of each MOS instance (into the drain terminal).
    pub device_currents: BTreeMap<String, f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl OperatingPoint {
    pub fn voltage(&self, node: &str) -> f64 {
        self.voltages.get(node).copied().unwrap_or(0.0)
    }

    /// Total power delivered by all sources [W].
    pub fn source_power(&self, netlist: &Netlist) -> f64 {
        let mut p = 0.0;
        for inst in &netlist.instances {
            if let InstanceKind::VSource { value, .. } = &inst.kind {
                if let Some(i) = self.source_currents.get(&inst.name) {
                    p += -value.dc_value() * i;
                }
            }
        }
        p
    }
}

/// A DC sweep: one operating point per sweep value, warm-started.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCurve {
    pub sweep: Vec<f64>,
    pub nodes: Vec<String>,
    /// values[k][i] = voltage of nodes[k] at sweep point i.
    pub values: Vec<Vec<f64>>,
    /// (sweep index, node) where a bistable flip was detected.
    pub flips: Vec<(usize, String)>,
}

impl SweepCurve {
    pub fn node_values(&self, node: &str) -> Option<&[f64]> {
        let k = self.nodes.iter().position(|n| n == node)?;
        Some(&self.values[k])
    }
}

/// Time-domain solution. The first sample is the t = 0 initial-condition
/// solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Waveform {
    pub times: Vec<f64>,
    pub nodes: Vec<String>,
    /// samples[k][i] = voltage of nodes[k] at times[i].
    pub samples: Vec<Vec<f64>>,
    pub sources: Vec<String>,
    /// Branch current per source per time point.
    pub source_currents: Vec<Vec<f64>>,
    /// Source drive value per source per time point.
    pub source_values: Vec<Vec<f64>>,
}

impl Waveform {
    pub fn node_samples(&self, node: &str) -> Option<&[f64]> {
        let k = self.nodes.iter().position(|n| n == node)?;
        Some(&self.samples[k])
    }

    /// Energy delivered by all sources over the waveform [J], integrated
    /// with the backward-Euler convention (end-of-step values).
    pub fn delivered_energy(&self) -> f64 {
        let mut e = 0.0;
        for i in 1..self.times.len() {
            let dt = self.times[i] - self.times[i - 1];
            for s in 0..self.sources.len() {
                e += -self.source_values[s][i] * self.source_currents[s][i] * dt;
            }
        }
        e
    }
}

struct PreparedMos {
    name_idx: usize,
    d: NodeId,
    g: NodeId,
    s: NodeId,
    b: NodeId,
    params: DeviceParams,
}

struct PreparedCap {
    p: NodeId,
    n: NodeId,
    farads: f64,
}

struct PreparedSource {
    name_idx: usize,
    p: NodeId,
    n: NodeId,
    value: SourceValue,
    branch: usize,
}

/// Flattened view of a netlist ready for repeated evaluation.
pub struct System<'a> {
    netlist: &'a Netlist,
    mos: Vec<PreparedMos>,
    caps: Vec<PreparedCap>,
    sources: Vec<PreparedSource>,
    n_nodes: usize,
    n_vars: usize,
    temp_k: f64,
}

enum EvalCtx<'p> {
    Dc { gmin: f64, src_scale: f64 },
    Tran { t: f64, dt: f64, prev: &'p [f64] },
}

impl<'a> System<'a> {
    pub fn new(netlist: &'a Netlist) -> Result<Self, SolverError> {
        netlist.validate()?;
        let n_nodes = netlist.node_count();
        let mut mos = Vec::new();
        let mut caps = Vec::new();
        let mut sources = Vec::new();
        for (idx, inst) in netlist.instances.iter().enumerate() {
            match &inst.kind {
                InstanceKind::Mos { d, g, s, b, .. } => {
                    let params = netlist
                        .resolve_mos(inst)
                        .ok_or_else(|| SolverError::BadInput(format!("unknown model on '{}'", inst.name)))?;
                    mos.push(PreparedMos { name_idx: idx, d: *d, g: *g, s: *s, b: *b, params });
                }
                InstanceKind::Cap { p, n, farads } => {
                    caps.push(PreparedCap { p: *p, n: *n, farads: *farads })
                }
                InstanceKind::VSource { p, n, value } => {
                    let branch = n_nodes - 1 + sources.len();
                    sources.push(PreparedSource {
                        name_idx: idx,
                        p: *p,
                        n: *n,
                        value: value.clone(),
                        branch,
                    });
                }
            }
        }
        let n_vars = n_nodes - 1 + sources.len();
        Ok(Self { netlist, mos, caps, sources, n_nodes, n_vars, temp_k: netlist.temp_k() })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    #[inline]
    fn var(&self, node: NodeId) -> Option<usize> {
        (node != GROUND).then(|| node - 1)
    }

    #[inline]
    fn v_of(&self, x: &[f64], node: NodeId) -> f64 {
        if node == GROUND {
            0.0
        } else {
            x[node - 1]
        }
    }

    /// Initial guess: zeros, overlaid with .ic values and a propagation
    /// pass through DC sources reachable from ground.
    fn initial_guess(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars];
        let mut known = vec![false; self.n_nodes];
        known[GROUND] = true;
        for _ in 0..self.sources.len() {
            for s in &self.sources {
                let e = s.value.dc_value();
                if known[s.n] && s.p != GROUND && !known[s.p] {
                    x[s.p - 1] = self.v_of(&x, s.n) + e;
                    known[s.p] = true;
                } else if known[s.p] && s.n != GROUND && !known[s.n] {
                    x[s.n - 1] = self.v_of(&x, s.p) - e;
                    known[s.n] = true;
                }
            }
        }
        for (name, v) in &self.netlist.initial_conditions {
            if let Some(id) = self.netlist.find_node(name) {
                if id != GROUND && !known[id] {
                    x[id - 1] = *v;
                }
            }
        }
        x
    }

    /// Assemble the Jacobian and residual at x. Residual rows: KCL per
    /// non-ground node (currents leaving the node), then one branch row
    /// per source (terminal difference minus drive).
    fn assemble(&self, x: &[f64], ctx: &EvalCtx, jac: &mut [f64], f: &mut [f64]) {
        let n = self.n_vars;
        jac.iter_mut().for_each(|v| *v = 0.0);
        f.iter_mut().for_each(|v| *v = 0.0);

        let add = |jac: &mut [f64], row: usize, col: usize, v: f64| {
            jac[row * n + col] += v;
        };

        for m in &self.mos {
            let vd = self.v_of(x, m.d);
            let vg = self.v_of(x, m.g);
            let vs = self.v_of(x, m.s);
            let vb = self.v_of(x, m.b);
            let e = device::eval_terminal(&m.params, vd, vg, vs, vb, self.temp_k);
            let terms = [
                (m.d, e.did_dvd),
                (m.g, e.did_dvg),
                (m.s, e.did_dvs),
                (m.b, e.did_dvb),
            ];
            if let Some(rd) = self.var(m.d) {
                f[rd] += e.id;
                for (node, g) in terms {
                    if let Some(c) = self.var(node) {
                        add(jac, rd, c, g);
                    }
                }
            }
            if let Some(rs) = self.var(m.s) {
                f[rs] -= e.id;
                for (node, g) in terms {
                    if let Some(c) = self.var(node) {
                        add(jac, rs, c, -g);
                    }
                }
            }
        }

        if let EvalCtx::Tran { dt, prev, .. } = ctx {
            for c in &self.caps {
                let v_now = self.v_of(x, c.p) - self.v_of(x, c.n);
                let v_prev = if c.p == GROUND { 0.0 } else { prev[c.p - 1] }
                    - if c.n == GROUND { 0.0 } else { prev[c.n - 1] };
                let g = c.farads / dt;
                let i = g * (v_now - v_prev);
                if let Some(rp) = self.var(c.p) {
                    f[rp] += i;
                    add(jac, rp, rp, g);
                    if let Some(cn) = self.var(c.n) {
                        add(jac, rp, cn, -g);
                    }
                }
                if let Some(rn) = self.var(c.n) {
                    f[rn] -= i;
                    add(jac, rn, rn, g);
                    if let Some(cp) = self.var(c.p) {
                        add(jac, rn, cp, -g);
                    }
                }
            }
        }

        let (gmin, src_scale, t) = match ctx {
            EvalCtx::Dc { gmin, src_scale } => (*gmin, *src_scale, 0.0),
            EvalCtx::Tran { t, .. } => (0.0, 1.0, *t),
        };

        if gmin > 0.0 {
            for node in 1..self.n_nodes {
                let r = node - 1;
                f[r] += gmin * x[r];
                add(jac, r, r, gmin);
            }
        }

        for s in &self.sources {
            let i_br = x[s.branch];
            if let Some(rp) = self.var(s.p) {
                f[rp] += i_br;
                add(jac, rp, s.branch, 1.0);
            }
            if let Some(rn) = self.var(s.n) {
                f[rn] -= i_br;
                add(jac, rn, s.branch, -1.0);
            }
            let drive = match ctx {
                EvalCtx::Dc { .. } => s.value.dc_value() * src_scale,
                EvalCtx::Tran { .. } => s.value.at(t),
            };
            f[s.branch] = self.v_of(x, s.p) - self.v_of(x, s.n) - drive;
            if let Some(cp) = self.var(s.p) {
                add(jac, s.branch, cp, 1.0);
            }
            if let Some(cn) = self.var(s.n) {
                add(jac, s.branch, cn, -1.0);
            }
        }
    }

    fn node_residual(&self, f: &[f64]) -> f64 {
        f[..self.n_nodes - 1].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Locate a node whose KCL row is structurally empty, for the
    /// floating-node diagnostic on singular systems.
    fn find_floating_node(&self, x: &[f64], ctx: &EvalCtx) -> Option<String> {
        let n = self.n_vars;
        let mut jac = vec![0.0; n * n];
        let mut f = vec![0.0; n];
        self.assemble(x, ctx, &mut jac, &mut f);
        for node in 1..self.n_nodes {
            let row = &jac[(node - 1) * n..node * n];
            if row.iter().all(|v| v.abs() < 1e-250) {
                return Some(self.netlist.node_name(node).to_string());
            }
        }
        None
    }

    /// Damped Newton iteration from x0 with residual backtracking. On
    /// success x0 holds the solution.
    fn newton(
        &self,
        x: &mut Vec<f64>,
        ctx: &EvalCtx,
        opts: &SolveOptions,
    ) -> Result<(usize, f64), SolverError> {
        let n = self.n_vars;
        let mut jac = vec![0.0; n * n];
        let mut f = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut f_trial = vec![0.0; n];
        let mut best = f64::INFINITY;
        let mut step_ok = false;
        let mut resid = {
            self.assemble(x, ctx, &mut jac, &mut f);
            self.node_residual(&f)
        };
        for it in 1..=opts.max_iter {
            let branch_resid = f[self.n_nodes - 1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if !resid.is_finite() {
                return Err(SolverError::NonConvergence { best_residual: best, at_time: None });
            }
            best = best.min(resid);
            if resid <= opts.abstol && branch_resid <= opts.vntol && step_ok {
                return Ok((it, resid));
            }
            if std::env::var_os("SRAMLAB_NEWTON_TRACE").is_some() {
                eprintln!("it={it} resid={resid:.6e} x={x:?}");
            }
            let mut delta = f.iter().map(|v| -v).collect::<Vec<f64>>();
            dense::solve_in_place(&mut jac, n, &mut delta).map_err(|_| SolverError::Singular {
                node: self.find_floating_node(x, ctx),
            })?;
            let max_dv = delta[..self.n_nodes - 1].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let full_scale = if max_dv > opts.damping { opts.damping / max_dv } else { 1.0 };

            // Backtrack on the node residual: halve the step until it
            // improves (or run out of halvings and keep the best trial).
            let mut scale = full_scale;
            let mut accepted = false;
            let mut best_trial_resid = f64::INFINITY;
            let mut best_scale = full_scale;
            for _ in 0..9 {
                for i in 0..n {
                    trial[i] = x[i] + scale * delta[i];
                }
                self.assemble(&trial, ctx, &mut jac, &mut f_trial);
                let r = self.node_residual(&f_trial);
                if r.is_finite() && r < best_trial_resid {
                    best_trial_resid = r;
                    best_scale = scale;
                }
                if r.is_finite() && (r < resid || r <= opts.abstol) {
                    accepted = true;
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                scale = best_scale;
                for i in 0..n {
                    trial[i] = x[i] + scale * delta[i];
                }
                self.assemble(&trial, ctx, &mut jac, &mut f_trial);
            }
            step_ok = true;
            for i in 0..n {
                let step = trial[i] - x[i];
                if i < self.n_nodes - 1 && step.abs() > opts.reltol * x[i].abs() + opts.vntol {
                    step_ok = false;
                }
            }
            x.copy_from_slice(&trial);
            f.copy_from_slice(&f_trial);
            resid = self.node_residual(&f);
            // `jac` currently holds the assembly at the accepted point,
            // ready for the next iteration.
        }
        Err(SolverError::NonConvergence { best_residual: best, at_time: None })
    }

    /// Full DC solve with continuation fallbacks.
    fn solve_dc(&self, opts: &SolveOptions) -> Result<(Vec<f64>, usize, f64), SolverError> {
        let mut x = self.initial_guess();
        let mut total_iters = 0;
        let plain = EvalCtx::Dc { gmin: 0.0, src_scale: 1.0 };
        match self.newton(&mut x, &plain, opts) {
            Ok((it, r)) => return Ok((x, it, r)),
            Err(SolverError::Singular { node }) => return Err(SolverError::Singular { node }),
            Err(_) => {}
        }

        // Source stepping: ramp every drive from zero to its target.
        let mut x_ss = vec![0.0; self.n_vars];
        let mut ss_failed = false;
        for k in 1..=20 {
            let ctx = EvalCtx::Dc { gmin: 0.0, src_scale: k as f64 / 20.0 };
            match self.newton(&mut x_ss, &ctx, opts) {
                Ok((it, _)) => total_iters += it,
                Err(_) => {
                    ss_failed = true;
                    break;
                }
            }
        }
        if !ss_failed {
            return Ok((x_ss, total_iters, 0.0)).and_then(|(x, it, _)| {
                // Final residual from a confirmation pass.
                let mut xr = x;
                let (it2, r) = self.newton(&mut xr, &plain, opts)?;
                Ok((xr, it + it2, r))
            });
        }

        // Shunt-conductance ramp from 1e-3 S down to 1e-12 S, then an
        // unshunted polish solve.
        let mut xg = self.initial_guess();
        let mut best = f64::INFINITY;
        for exp in 3..=12 {
            let gmin = 10f64.powi(-exp);
            let ctx = EvalCtx::Dc { gmin, src_scale: 1.0 };
            match self.newton(&mut xg, &ctx, opts) {
                Ok((it, r)) => {
                    total_iters += it;
                    best = r;
                }
                Err(SolverError::NonConvergence { best_residual, .. }) => {
                    return Err(SolverError::NonConvergence {
                        best_residual: best_residual.min(best),
                        at_time: None,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        let (it, r) = self.newton(&mut xg, &plain, opts)?;
        Ok((xg, total_iters + it, r))
    }

    fn operating_point_from(&self, x: &[f64], iterations: usize, residual: f64) -> OperatingPoint {
        let mut voltages = BTreeMap::new();
        for node in 0..self.n_nodes {
            voltages.insert(self.netlist.node_name(node).to_string(), self.v_of(x, node));
        }
        let mut source_currents = BTreeMap::new();
        for s in &self.sources {
            source_currents
                .insert(self.netlist.instances[s.name_idx].name.clone(), x[s.branch]);
        }
        let mut device_currents = BTreeMap::new();
        for m in &self.mos {
            let e = device::eval_terminal(
                &m.params,
                self.v_of(x, m.d),
                self.v_of(x, m.g),
                self.v_of(x, m.s),
                self.v_of(x, m.b),
                self.temp_k,
            );
            device_currents.insert(self.netlist.instances[m.name_idx].name.clone(), e.id);
        }
        OperatingPoint { voltages, source_currents, device_currents, iterations, residual }
    }
}

/// DC operating point. `overrides` replaces the DC value of named sources
/// before solving.
pub fn dc_operating_point(
    netlist: &Netlist,
    overrides: &[(String, f64)],
    opts: &SolveOptions,
) -> Result<OperatingPoint, SolverError> {
    let owned;
    let n = if overrides.is_empty() {
        netlist
    } else {
        let mut nl = netlist.clone();
        for (name, v) in overrides {
            nl.set_source(name, SourceValue::Dc(*v))?;
        }
        owned = nl;
        &owned
    };
    let sys = System::new(n)?;
    let (x, it, r) = sys.solve_dc(opts)?;
    Ok(sys.operating_point_from(&x, it, r))
}

/// Sweep one source, warm-starting each point from the previous solution.
/// Sweep direction matters for bistable circuits; flips are recorded at
/// the step where they occur.
pub fn dc_sweep(
    netlist: &Netlist,
    source: &str,
    from: f64,
    to: f64,
    steps: usize,
    observe: &[&str],
    opts: &SolveOptions,
) -> Result<SweepCurve, SolverError> {
    if steps < 2 {
        return Err(SolverError::BadInput("sweep needs at least 2 steps".into()));
    }
    let mut nl = netlist.clone();
    nl.set_source(source, SourceValue::Dc(from))?;
    let sys = System::new(&nl)?;
    let src = sys
        .sources
        .iter()
        .position(|s| nl.instances[s.name_idx].name == source)
        .ok_or_else(|| SolverError::BadInput(format!("'{source}' is not a source")))?;
    let obs_ids: Vec<NodeId> = observe
        .iter()
        .map(|name| {
            nl.find_node(name)
                .ok_or_else(|| SolverError::BadInput(format!("unknown node '{name}'")))
        })
        .collect::<Result<_, _>>()?;

    let (mut x, _, _) = sys.solve_dc(opts)?;
    let mut curve = SweepCurve {
        sweep: Vec::with_capacity(steps),
        nodes: observe.iter().map(|s| s.to_string()).collect(),
        values: vec![Vec::with_capacity(steps); observe.len()],
        flips: Vec::new(),
    };
    // Mutating the prepared source value directly; the system holds a
    // clone of the netlist's sources.
    let mut sys = sys;
    for i in 0..steps {
        let v = from + (to - from) * i as f64 / (steps - 1) as f64;
        sys.sources[src].value = SourceValue::Dc(v);
        let ctx = EvalCtx::Dc { gmin: 0.0, src_scale: 1.0 };
        if sys.newton(&mut x, &ctx, opts).is_err() {
            // Cold retry with continuation before giving up.
            let (xc, _, _) = sys.solve_dc_with_current_sources(opts).map_err(|e| match e {
                SolverError::NonConvergence { best_residual, .. } => {
                    SolverError::NonConvergence { best_residual, at_time: Some(v) }
                }
                other => other,
            })?;
            x = xc;
        }
        curve.sweep.push(v);
        for (k, id) in obs_ids.iter().enumerate() {
            let val = sys.v_of(&x, *id);
            if i > 0 {
                let prev = curve.values[k][i - 1];
                if (val - prev).abs() > opts.flip_threshold {
                    curve.flips.push((i, curve.nodes[k].clone()));
                }
            }
            curve.values[k].push(val);
        }
    }
    Ok(curve)
}

impl<'a> System<'a> {
    fn solve_dc_with_current_sources(
        &self,
        opts: &SolveOptions,
    ) -> Result<(Vec<f64>, usize, f64), SolverError> {
        self.solve_dc(opts)
    }
}

/// Check the transient precondition: every non-ground node must either
/// touch a capacitor or be pinned through a chain of voltage sources to
/// ground.
fn check_dynamic_nodes(netlist: &Netlist) -> Result<(), SolverError> {
    let n_nodes = netlist.node_count();
    let mut pinned = vec![false; n_nodes];
    pinned[GROUND] = true;
    let sources: Vec<(NodeId, NodeId)> = netlist
        .instances
        .iter()
        .filter_map(|i| match &i.kind {
            InstanceKind::VSource { p, n, .. } => Some((*p, *n)),
            _ => None,
        })
        .collect();
    loop {
        let mut changed = false;
        for (p, n) in &sources {
            if pinned[*p] != pinned[*n] {
                pinned[*p] = true;
                pinned[*n] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut capped = vec![false; n_nodes];
    for inst in &netlist.instances {
        if let InstanceKind::Cap { p, n, .. } = &inst.kind {
            capped[*p] = true;
            capped[*n] = true;
        }
    }
    for node in 1..n_nodes {
        if !pinned[node] && !capped[node] {
            return Err(SolverError::MissingCapacitance {
                node: netlist.node_name(node).to_string(),
            });
        }
    }
    Ok(())
}

/// Backward-Euler transient. The t = 0 point solves the DC system with
/// every `.ic` node pinned by a temporary ideal source (ideal precharge),
/// released for t > 0.
pub fn transient(
    netlist: &Netlist,
    tstop: f64,
    dt: f64,
    observe: &[&str],
    opts: &SolveOptions,
) -> Result<Waveform, SolverError> {
    if dt <= 0.0 {
        return Err(SolverError::BadInput("dt must be positive".into()));
    }
    check_dynamic_nodes(netlist)?;

    // t = 0 solution with .ic pins on nodes that are not already pinned
    // by a real source.
    let mut init_nl = netlist.clone();
    for (node, v) in netlist.initial_conditions.clone() {
        let touches_source = netlist.instances.iter().any(|i| match &i.kind {
            InstanceKind::VSource { p, n, .. } => {
                netlist.find_node(&node).map_or(false, |id| *p == id || *n == id)
            }
            _ => false,
        });
        if !touches_source {
            init_nl.pin(&format!("__ic_{node}"), &node, v);
        }
    }
    let init_sys = System::new(&init_nl)?;
    let (x_init, _, _) = init_sys.solve_dc(opts)?;

    let sys = System::new(netlist)?;
    let mut x = vec![0.0; sys.n_vars];
    for node in 1..sys.n_nodes {
        x[node - 1] = init_sys.v_of(&x_init, node);
    }

    // Time grid: multiples of dt plus every PWL breakpoint in range.
    let mut grid: Vec<f64> = Vec::new();
    let mut t = 0.0;
    while t < tstop - 1e-18 {
        t += dt;
        grid.push(t.min(tstop));
    }
    for s in &sys.sources {
        for (bt, _) in s.value.breakpoints() {
            if *bt > 1e-18 && *bt < tstop - 1e-18 {
                grid.push(*bt);
            }
        }
    }
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-18);

    let obs_ids: Vec<NodeId> = observe
        .iter()
        .map(|name| {
            netlist
                .find_node(name)
                .ok_or_else(|| SolverError::BadInput(format!("unknown node '{name}'")))
        })
        .collect::<Result<_, _>>()?;

    let src_names: Vec<String> =
        sys.sources.iter().map(|s| netlist.instances[s.name_idx].name.clone()).collect();

    let mut wf = Waveform {
        times: vec![0.0],
        nodes: observe.iter().map(|s| s.to_string()).collect(),
        samples: obs_ids.iter().map(|id| vec![sys.v_of(&x, *id)]).collect(),
        sources: src_names,
        source_currents: Vec::new(),
        source_values: Vec::new(),
    };
    // Source currents at t=0 come from the init solve where available.
    wf.source_currents = sys
        .sources
        .iter()
        .map(|s| {
            let name = &netlist.instances[s.name_idx].name;
            let cur = init_sys
                .sources
                .iter()
                .find(|is| init_nl.instances[is.name_idx].name == *name)
                .map(|is| x_init[is.branch])
                .unwrap_or(0.0);
            vec![cur]
        })
        .collect();
    wf.source_values = sys.sources.iter().map(|s| vec![s.value.at(0.0)]).collect();

    let mut t_prev = 0.0;
    let mut prev = x.clone();
    for &tk in &grid {
        x.copy_from_slice(&prev);
        let ctx = EvalCtx::Tran { t: tk, dt: tk - t_prev, prev: &prev };
        if let Err(e) = sys.newton(&mut x, &ctx, opts) {
            if matches!(e, SolverError::Singular { .. }) {
                return Err(e);
            }
            // Cells crossing their metastable fold make the implicit
            // step near-singular; integrate the same interval with
            // backward-Euler substeps and keep only the grid sample.
            let mut solved = false;
            'subdiv: for log2_subs in 1..=6u32 {
                let subs = 1usize << log2_subs;
                let mut xa = prev.clone();
                let mut sub_prev = prev.clone();
                let mut good = true;
                for k in 1..=subs {
                    let tsub = t_prev + (tk - t_prev) * k as f64 / subs as f64;
                    let ctxs = EvalCtx::Tran {
                        t: tsub,
                        dt: (tk - t_prev) / subs as f64,
                        prev: &sub_prev,
                    };
                    match sys.newton(&mut xa, &ctxs, opts) {
                        Ok(_) => sub_prev.copy_from_slice(&xa),
                        Err(SolverError::Singular { node }) => {
                            return Err(SolverError::Singular { node })
                        }
                        Err(_) => {
                            good = false;
                            break;
                        }
                    }
                }
                if good {
                    x.copy_from_slice(&xa);
                    solved = true;
                    break 'subdiv;
                }
            }
            if !solved {
                let best = match e {
                    SolverError::NonConvergence { best_residual, .. } => best_residual,
                    _ => f64::NAN,
                };
                return Err(SolverError::NonConvergence {
                    best_residual: best,
                    at_time: Some(tk),
                });
            }
        }
        wf.times.push(tk);
        for (k, id) in obs_ids.iter().enumerate() {
            wf.samples[k].push(sys.v_of(&x, *id));
        }
        for (k, s) in sys.sources.iter().enumerate() {
            wf.source_currents[k].push(x[s.branch]);
            wf.source_values[k].push(s.value.at(tk));
        }
        prev.copy_from_slice(&x);
        t_prev = tk;
    }
    Ok(wf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{drain_current_unified, BiasPoint, DeviceParams};
    use crate::netlist::parse_netlist;

    fn opts() -> SolveOptions {
        SolveOptions::default()
    }

    #[test]
    fn single_source_pins_node() {
        let n = parse_netlist("V1 a 0 DC 0.5\n.end").unwrap();
        let op = dc_operating_point(&n, &[], &opts()).unwrap();
        assert!((op.voltage("a") - 0.5).abs() < 1e-12);
        assert_eq!(op.voltage("0"), 0.0);
    }

    #[test]
    fn diode_connected_device_current_matches_model() {
        let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 d d 0 0 n W=0.1u L=0.1u
V1 d 0 DC 1.0
.end";
        let n = parse_netlist(text).unwrap();
        let op = dc_operating_point(&n, &[], &opts()).unwrap();
        let p = DeviceParams::nmos();
        let expect = drain_current_unified(&p, &BiasPoint::new(1.0, 1.0, 0.0, n.temp_k()));
        let got = op.device_currents["M1"];
        assert!((got / expect - 1.0).abs() < 1e-9, "got {got}, expect {expect}");
        // The source supplies exactly that current.
        assert!((op.source_currents["V1"] + expect).abs() < 1e-9 * expect);
        // KCL residual bound.
        assert!(op.residual <= opts().abstol);
    }

    #[test]
    fn source_power_is_positive_for_a_load() {
        let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 d d 0 0 n
V1 d 0 DC 0.8
.end";
        let n = parse_netlist(text).unwrap();
        let op = dc_operating_point(&n, &[], &opts()).unwrap();
        assert!(op.source_power(&n) > 0.0);
    }

    #[test]
    fn floating_gate_only_node_is_singular() {
        let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 d float 0 0 n
V1 d 0 DC 1.0
.end";
        let n = parse_netlist(text).unwrap();
        match dc_operating_point(&n, &[], &opts()) {
            Err(SolverError::Singular { node: Some(node) }) => assert_eq!(node, "float"),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn transient_requires_capacitance() {
        let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 mid g 0 0 n
M2 top g mid 0 n
V1 top 0 DC 1.0
V2 g 0 DC 1.0
.end";
        let n = parse_netlist(text).unwrap();
        match transient(&n, 1e-9, 1e-10, &[], &opts()) {
            Err(SolverError::MissingCapacitance { node }) => assert_eq!(node, "mid"),
            other => panic!("expected missing capacitance, got {other:?}"),
        }
    }

    #[test]
    fn zero_length_transient_returns_initial_point() {
        let n = parse_netlist("C1 a 0 10f\n.ic a=0.5\n.end").unwrap();
        let wf = transient(&n, 0.0, 1e-10, &["a"], &opts()).unwrap();
        assert_eq!(wf.times.len(), 1);
        assert!((wf.node_samples("a").unwrap()[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn capacitor_discharge_slope_matches_constant_current() {
        // 10 fF precharged to 0.5 V, discharged by a device in its flat
        // region; slope over the first 10 steps within 2% of -I/C.
        let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.01 ETA=1 GAMMA=0.4 PHIF=0.35
M1 a g 0 0 n
V2 g 0 DC 0.25
C1 a 0 10f
.ic a=0.5
.end";
        let n = parse_netlist(text).unwrap();
        let p = {
            let mut p = DeviceParams::nmos();
            p.lambda = 0.01;
            p
        };
        let i0 = drain_current_unified(&p, &BiasPoint::new(0.25, 0.5, 0.0, n.temp_k()));
        let dt = 1e-11;
        let wf = transient(&n, 10.0 * dt, dt, &["a"], &opts()).unwrap();
        let v = wf.node_samples("a").unwrap();
        let slope = (v[10] - v[0]) / (wf.times[10] - wf.times[0]);
        let expect = -i0 / 10e-15;
        assert!(
            (slope / expect - 1.0).abs() < 0.02,
            "slope {slope}, expect {expect}"
        );
        // Monotone nonincreasing discharge.
        for w in v.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn pwl_breakpoints_are_sampled_exactly() {
        let n = parse_netlist("V1 a 0 PWL(0 0 0.35n 1 1n 1)\nC1 a 0 1f\n.end").unwrap();
        let wf = transient(&n, 1e-9, 0.2e-9, &["a"], &opts()).unwrap();
        assert!(wf.times.iter().any(|t| (*t - 0.35e-9).abs() < 1e-18));
        let idx = wf.times.iter().position(|t| (*t - 0.35e-9).abs() < 1e-18).unwrap();
        assert!((wf.node_samples("a").unwrap()[idx] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn stored_energy_nonincreasing_without_sources() {
        // Two capacitors with a leakage path between them and to ground.
        let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 a b 0 0 n
M2 b a 0 0 n
C1 a 0 5f
C2 b 0 5f
.ic a=0.6
.ic b=0.4
.end";
        let n = parse_netlist(text).unwrap();
        let wf = transient(&n, 20e-9, 0.5e-9, &["a", "b"], &opts()).unwrap();
        let va = wf.node_samples("a").unwrap();
        let vb = wf.node_samples("b").unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..va.len() {
            let e = 0.5 * 5e-15 * (va[i] * va[i] + vb[i] * vb[i]);
            assert!(e <= prev + 1e-30);
            prev = e;
        }
    }

    #[test]
    fn halving_dt_shows_first_order_convergence() {
        let mk = |dt: f64| {
            let n = parse_netlist(
                "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 a g 0 0 n
V1 g 0 DC 0.2
C1 a 0 10f
.ic a=0.5
.end",
            )
            .unwrap();
            let wf = transient(&n, 40e-9, dt, &["a"], &opts()).unwrap();
            *wf.node_samples("a").unwrap().last().unwrap()
        };
        let ref_v = mk(0.0125e-9);
        let e1 = (mk(0.4e-9) - ref_v).abs();
        let e2 = (mk(0.2e-9) - ref_v).abs();
        let order = (e1 / e2).log2();
        assert!(order >= 0.9, "observed order {order}");
    }

    #[test]
    fn solution_independent_of_declaration_order() {
        let base = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
.model p PMOS VT0=0.3 IS=4e-8 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
{}
.end";
        let lines = [
            "M1 out in 0 0 n W=0.2u L=0.1u",
            "M2 out in vdd vdd p W=0.2u L=0.1u",
            "V1 vdd 0 DC 0.5",
            "V2 in 0 DC 0.23",
        ];
        // 5 orderings of the same circuit.
        let orders: [[usize; 4]; 5] =
            [[0, 1, 2, 3], [3, 2, 1, 0], [2, 0, 3, 1], [1, 3, 0, 2], [3, 0, 1, 2]];
        let mut outs = Vec::new();
        for ord in orders {
            let body: Vec<&str> = ord.iter().map(|&i| lines[i]).collect();
            let n = parse_netlist(&base.replace("{}", &body.join("\n"))).unwrap();
            let op = dc_operating_point(&n, &[], &opts()).unwrap();
            outs.push(op.voltage("out"));
        }
        for v in &outs[1..] {
            assert!((v - outs[0]).abs() < 1e-8, "{outs:?}");
        }
    }

    #[test]
    fn two_step_sweep_equals_two_operating_points() {
        let text = "\
.model n NMOS VT0=0.3 IS=1e-7 S=0.08 LAMBDA=0.15 ETA=1 GAMMA=0.4 PHIF=0.35
M1 out in 0 0 n
V1 out 0 DC 1.0
V2 in 0 DC 0.0
.end";
        let n = parse_netlist(text).unwrap();
        let curve = dc_sweep(&n, "V2", 0.1, 0.4, 2, &["out"], &opts()).unwrap();
        assert_eq!(curve.sweep.len(), 2);
        for (i, v) in [0.1, 0.4].iter().enumerate() {
            let op = dc_operating_point(&n, &[("V2".to_string(), *v)], &opts()).unwrap();
            assert!((curve.values[0][i] - op.voltage("out")).abs() < 1e-9);
        }
    }
}
