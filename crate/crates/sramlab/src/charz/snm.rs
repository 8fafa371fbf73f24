//! Static and write noise margins via butterfly-curve extraction.
//!
//! The two transfer curves come from DC sweeps with the storage feedback
//! cut: every gate referencing the probed node is redirected to a driven
//! copy, so each curve is the response of one inverter with all drain
//! loading in place. Lobe sizes are computed as the critical static
//! noise: both curves are shifted by VN along the 45-degree direction
//! (one up, one right) and the largest VN that keeps the shifted pair
//! bistable is the side of the largest square embeddable in the lobe.
//! The write margin uses the same machinery in the write configuration:
//! positive margins are the smallest noise that restores bistability
//! (the separation of the write-mode curves), negative margins the size
//! of the residual lobe that keeps the write from completing.

use serde::{Deserialize, Serialize};

use super::harness::{hold_netlist, read_netlist, write_netlist, HarnessConfig};
use super::CharzError;
use crate::netlist::{BuiltCell, Netlist};
use crate::solver::{dc_sweep, SolveOptions};

/// Butterfly sweep resolution [V].
pub const SNM_RESOLUTION: f64 = 1e-3;
/// Lobes below this size are reported as collapsed [V].
pub const COLLAPSE_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnmMode {
    Hold,
    Read,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnmResult {
    pub mode: SnmMode,
    /// Largest square in the lobe destroyed by +VN noise [V].
    pub lobe1: f64,
    /// Largest square in the opposite lobe [V].
    pub lobe2: f64,
    /// min(lobe1, lobe2) [V].
    pub snm: f64,
    pub collapsed: bool,
    /// (drive, response) samples of the first transfer curve.
    pub curve_f: Vec<(f64, f64)>,
    /// (drive, response) samples of the second transfer curve.
    pub curve_g: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WnmResult {
    /// Positive: write succeeds with this much margin. Non-positive:
    /// bistability persists (write failure), magnitude is the residual
    /// lobe size.
    pub margin: f64,
    pub write_succeeds: bool,
    pub curve_f: Vec<(f64, f64)>,
    pub curve_g: Vec<(f64, f64)>,
}

/// Extract one transfer curve: cut the feedback at `split`, sweep the
/// driven copy, observe `observe`.
fn vtc(
    netlist: &Netlist,
    split: &str,
    observe: &str,
    vdd: f64,
    opts: &SolveOptions,
) -> Result<Vec<(f64, f64)>, CharzError> {
    let mut n = netlist.clone();
    let drive = format!("{split}__drive");
    n.split_gates(split, &drive)?;
    n.pin("vdrive", &drive, 0.0);
    let steps = (vdd / SNM_RESOLUTION).round() as usize + 1;
    let curve = dc_sweep(&n, "vdrive", 0.0, vdd, steps, &[observe], opts)?;
    let vals = curve.node_values(observe).unwrap();
    // The loop is cut, so the response must be monotone nonincreasing up
    // to solver noise; larger jumps flag a solver artifact.
    let tol = 2e-3;
    for w in vals.windows(2) {
        if w[1] - w[0] > tol {
            return Err(CharzError::NonMonotoneVtc { node: observe.to_string(), delta: w[1] - w[0] });
        }
    }
    Ok(curve.sweep.iter().copied().zip(vals.iter().copied()).collect())
}

/// Piecewise-linear interpolation with endpoint clamping on a curve
/// sampled at uniform drive steps.
fn interp(curve: &[(f64, f64)], x: f64) -> f64 {
    let n = curve.len();
    let x0 = curve[0].0;
    let step = curve[1].0 - curve[0].0;
    let t = (x - x0) / step;
    if t <= 0.0 {
        return curve[0].1;
    }
    let i = t.floor() as usize;
    if i + 1 >= n {
        return curve[n - 1].1;
    }
    let frac = t - i as f64;
    curve[i].1 + frac * (curve[i + 1].1 - curve[i].1)
}

/// Count fixed points of the composed loop map with noise `vn` injected
/// at both feedback links: u -> g(f(u) + vn) + vn.
fn loop_crossings(f: &[(f64, f64)], g: &[(f64, f64)], vn: f64) -> usize {
    let mut count = 0;
    let mut prev_sign = 0i8;
    for &(u, fu) in f {
        let m = interp(g, fu + vn) + vn;
        let r = m - u;
        let sign = if r > 0.0 {
            1i8
        } else if r < 0.0 {
            -1i8
        } else {
            0i8
        };
        if sign != 0 {
            if prev_sign != 0 && sign != prev_sign {
                count += 1;
            }
            prev_sign = sign;
        }
    }
    count
}

fn bistable(f: &[(f64, f64)], g: &[(f64, f64)], vn: f64) -> bool {
    loop_crossings(f, g, vn) >= 2
}

/// Largest |vn| of the given sign keeping the loop bistable; zero when it
/// is monostable already.
fn destroy_margin(f: &[(f64, f64)], g: &[(f64, f64)], sign: f64, vdd: f64) -> f64 {
    if !bistable(f, g, 0.0) {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, vdd);
    if bistable(f, g, sign * vdd) {
        return vdd;
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if bistable(f, g, sign * mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest |vn| of the given sign that makes a monostable loop bistable.
fn restore_margin(f: &[(f64, f64)], g: &[(f64, f64)], sign: f64, vdd: f64) -> Option<f64> {
    if bistable(f, g, 0.0) {
        return Some(0.0);
    }
    // The boundary may not be monotone in vn; scan for a bracket first.
    let scan = 200;
    let mut hit = None;
    for k in 1..=scan {
        let vn = vdd * k as f64 / scan as f64;
        if bistable(f, g, sign * vn) {
            hit = Some(vn);
            break;
        }
    }
    let hi0 = hit?;
    let (mut lo, mut hi) = (hi0 - vdd / scan as f64, hi0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if bistable(f, g, sign * mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (hi + lo))
}

fn storage_nodes(cell: &BuiltCell) -> Result<(String, String), CharzError> {
    match (&cell.ports.q, &cell.ports.qb) {
        (Some(q), Some(qb)) => Ok((q.clone(), qb.clone())),
        _ => Err(CharzError::NoStoragePorts(cell.kind.name().to_string())),
    }
}

fn lobe_pair(
    netlist: &Netlist,
    q: &str,
    qb: &str,
    vdd: f64,
    opts: &SolveOptions,
) -> Result<(f64, f64, Vec<(f64, f64)>, Vec<(f64, f64)>), CharzError> {
    let curve_f = vtc(netlist, q, qb, vdd, opts)?;
    let curve_g = vtc(netlist, qb, q, vdd, opts)?;
    let lobe1 = destroy_margin(&curve_f, &curve_g, 1.0, vdd);
    let lobe2 = destroy_margin(&curve_f, &curve_g, -1.0, vdd);
    Ok((lobe1, lobe2, curve_f, curve_g))
}

/// Static noise margin in hold or read configuration.
pub fn snm(
    cell: &BuiltCell,
    mode: SnmMode,
    cfg: &HarnessConfig,
    opts: &SolveOptions,
) -> Result<SnmResult, CharzError> {
    let (q, qb) = storage_nodes(cell)?;
    let netlist = match mode {
        SnmMode::Hold => hold_netlist(cell, cfg, true),
        SnmMode::Read => read_netlist(cell, cfg, true),
    };
    let (lobe1, lobe2, curve_f, curve_g) = lobe_pair(&netlist, &q, &qb, cfg.vdd, opts)?;
    let snm = lobe1.min(lobe2);
    Ok(SnmResult {
        mode,
        lobe1,
        lobe2,
        snm,
        collapsed: snm < COLLAPSE_EPS,
        curve_f,
        curve_g,
    })
}

/// Noise margins of an arbitrary pre-configured netlist (columns,
/// half-selected cells). The probed nodes are passed explicitly.
pub fn snm_of_netlist(
    netlist: &Netlist,
    q: &str,
    qb: &str,
    vdd: f64,
    opts: &SolveOptions,
) -> Result<SnmResult, CharzError> {
    let (lobe1, lobe2, curve_f, curve_g) = lobe_pair(netlist, q, qb, vdd, opts)?;
    let snm = lobe1.min(lobe2);
    Ok(SnmResult {
        mode: SnmMode::Hold,
        lobe1,
        lobe2,
        snm,
        collapsed: snm < COLLAPSE_EPS,
        curve_f,
        curve_g,
    })
}

/// Write noise margin: write-0 configuration (the cell holds 1 and the
/// bitlines drive 0).
pub fn wnm(cell: &BuiltCell, cfg: &HarnessConfig, opts: &SolveOptions) -> Result<WnmResult, CharzError> {
    let (q, qb) = storage_nodes(cell)?;
    let netlist = write_netlist(cell, cfg, false);
    let curve_f = vtc(&netlist, &q, &qb, cfg.vdd, opts)?;
    let curve_g = vtc(&netlist, &qb, &q, cfg.vdd, opts)?;
    let margin = if bistable(&curve_f, &curve_g, 0.0) {
        // Residual lobe blocks the write.
        let l1 = destroy_margin(&curve_f, &curve_g, 1.0, cfg.vdd);
        let l2 = destroy_margin(&curve_f, &curve_g, -1.0, cfg.vdd);
        -l1.max(l2)
    } else {
        let r1 = restore_margin(&curve_f, &curve_g, 1.0, cfg.vdd);
        let r2 = restore_margin(&curve_f, &curve_g, -1.0, cfg.vdd);
        match (r1, r2) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => cfg.vdd,
        }
    };
    Ok(WnmResult { margin, write_succeeds: margin > 0.0, curve_f, curve_g })
}

/// Write noise margin of a hold-configured netlist (used by the
/// misconfiguration checks): same analysis, caller-built circuit.
pub fn wnm_of_netlist(
    netlist: &Netlist,
    q: &str,
    qb: &str,
    vdd: f64,
    opts: &SolveOptions,
) -> Result<WnmResult, CharzError> {
    let curve_f = vtc(netlist, q, qb, vdd, opts)?;
    let curve_g = vtc(netlist, qb, q, vdd, opts)?;
    let margin = if bistable(&curve_f, &curve_g, 0.0) {
        let l1 = destroy_margin(&curve_f, &curve_g, 1.0, vdd);
        let l2 = destroy_margin(&curve_f, &curve_g, -1.0, vdd);
        -l1.max(l2)
    } else {
        restore_margin(&curve_f, &curve_g, 1.0, vdd)
            .into_iter()
            .chain(restore_margin(&curve_f, &curve_g, -1.0, vdd))
            .fold(f64::INFINITY, f64::min)
            .min(vdd)
    };
    Ok(WnmResult { margin, write_succeeds: margin > 0.0, curve_f, curve_g })
}
