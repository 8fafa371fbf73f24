//! Subthreshold MOSFET compact model.
//!
//! The channel current is a base-10 exponential in the gate drive with a
//! DIBL term (`lambda * VDS`) inside the exponent and a drain-coupling
//! factor `(1 - 10^(-eta*VDS/S))` that forces zero current at VDS = 0.
//! Three evaluation routes are exposed:
//!
//! - [`drain_current_full`]: the exact exponential expression.
//! - [`drain_current_simplified`]: the same expression with the
//!   drain-coupling factor dropped, valid for VDS >= 50 mV.
//! - [`drain_current_unified`]: the solver-facing model. It matches the
//!   full expression in deep subthreshold (within 1% for VGS - VT <= -4S)
//!   and blends into a smoothed square-law above threshold so that DC
//!   solves of full cells converge.
//!
//! All three handle both polarities (P-type evaluated on mirrored
//! voltages, current negated) and negative VDS (antisymmetric
//! source/drain swap).

use serde::{Deserialize, Serialize};
use thiserror::Error;

const LN10: f64 = std::f64::consts::LN_10;

/// Decade cap applied inside the unified evaluation. Exponents of 10 are
/// smoothly clamped at this value during Newton iteration; accepted
/// solutions must lie well below the cap region.
const EXP_CAP_DECADES: f64 = 30.0;
/// Width of the soft cap knee, in decades. Narrow enough that biases more
/// than ~8 decades below the cap see a relative error under 1e-3.
const EXP_CAP_WIDTH: f64 = 1.0;
/// Knee offset of the above-threshold interpolation, in natural-log units.
/// Shifts the softplus knee up so the deep-subthreshold error at
/// VGS - VT = -4S stays near 0.6%.
const KNEE_SHIFT: f64 = 0.5;

/// Channel polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Nmos,
    Pmos,
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("invalid device parameters: {0}")]
    InvalidParams(String),
    #[error("simplified current model used outside its validity region (VDS = {vds} V < 0.05 V)")]
    SimplifiedOutOfRange { vds: f64 },
}

/// Compact-model card for one device type.
///
/// Voltages in volts, currents in amperes, geometry in meters,
/// temperatures in kelvin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub polarity: Polarity,
    /// Zero-bias threshold voltage [V].
    pub vt0: f64,
    /// Specific current at the reference W/L [A].
    pub is0: f64,
    /// Subthreshold swing at `tref` [V/decade].
    pub swing: f64,
    /// DIBL coefficient on VDS inside the main exponent.
    pub lambda: f64,
    /// Drain-coupling coefficient of the (1 - 10^(-eta*VDS/S)) term.
    pub eta: f64,
    /// Body-effect coefficient [sqrt(V)].
    pub gamma: f64,
    /// Fermi potential magnitude [V].
    pub phi_f: f64,
    /// Channel width [m].
    pub w: f64,
    /// Channel length [m].
    pub l: f64,
    /// Reference temperature [K].
    pub tref: f64,
    /// Optional temperature exponent on the specific current:
    /// `Is(T) = is0 * (T/tref)^is_temp_exp`. Zero disables it.
    #[serde(default)]
    pub is_temp_exp: f64,
}

impl DeviceParams {
    /// Default N-channel simulation card. Synthetic: VT0/S are the
    /// literature-typical values, lambda is a physical DIBL magnitude
    /// (a coefficient of 1.5 is only meaningful inside the closed-form
    /// stack expressions; a cross-coupled pair simulated with it has
    /// loop gain below one and cannot hold state).
    pub fn nmos() -> Self {
        Self {
            polarity: Polarity::Nmos,
            vt0: 0.3,
            is0: 1e-7,
            swing: 0.08,
            lambda: 0.15,
            eta: 1.0,
            gamma: 0.4,
            phi_f: 0.35,
            w: 1e-7,
            l: 1e-7,
            tref: 300.0,
            is_temp_exp: 0.0,
        }
    }

    /// Default P-channel simulation card: mirror of [`DeviceParams::nmos`]
    /// with the specific current derated by the usual mobility ratio.
    pub fn pmos() -> Self {
        Self {
            polarity: Polarity::Pmos,
            is0: 0.4e-7,
            ..Self::nmos()
        }
    }

    /// The analytic card used by the stacked-leakage closed forms:
    /// VT = 300 mV, lambda = 1.5, S = 80 mV/decade. Use it for the stack
    /// expressions and their oracle, not for circuit simulation.
    pub fn paper_typical() -> Self {
        Self {
            lambda: 1.5,
            ..Self::nmos()
        }
    }

    pub fn validate(&self) -> Result<(), DeviceError> {
        let mut bad = Vec::new();
        if !(self.is0 > 0.0) {
            bad.push("Is must be > 0");
        }
        if !(self.swing > 0.0) {
            bad.push("S must be > 0");
        }
        if !(self.w > 0.0) {
            bad.push("W must be > 0");
        }
        if !(self.l > 0.0) {
            bad.push("L must be > 0");
        }
        if !(self.gamma >= 0.0) {
            bad.push("gamma must be >= 0");
        }
        if !(self.phi_f > 0.0) {
            bad.push("phiF must be > 0");
        }
        if !(self.lambda >= 0.0) {
            bad.push("lambda must be >= 0");
        }
        if !(self.eta > 0.0) {
            bad.push("eta must be > 0");
        }
        if !(self.tref > 0.0) {
            bad.push("Tref must be > 0");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(DeviceError::InvalidParams(bad.join("; ")))
        }
    }
}

/// One bias point in the canonical NMOS sign convention. P-type devices
/// are evaluated on mirrored voltages by the operations themselves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    /// Gate-source voltage [V].
    pub vgs: f64,
    /// Drain-source voltage [V]. May be negative; the current ops apply an
    /// antisymmetric source/drain swap.
    pub vds: f64,
    /// Source-bulk voltage [V].
    pub vsb: f64,
    /// Temperature [K].
    pub temp: f64,
}

impl BiasPoint {
    pub fn new(vgs: f64, vds: f64, vsb: f64, temp: f64) -> Self {
        Self { vgs, vds, vsb, temp }
    }
}

/// Body-effect threshold voltage:
/// `VT = VT0 + gamma * (sqrt(|2*phiF + VSB|) - sqrt(2*phiF))`.
///
/// `phi_f` is stored as a magnitude, so the printed `|-2phiF + VSB|`
/// radical evaluates as `|2*phiF + VSB|`; the absolute value also guards
/// deep forward body bias.
pub fn threshold_voltage(p: &DeviceParams, vsb: f64) -> f64 {
    let phi2 = 2.0 * p.phi_f;
    p.vt0 + p.gamma * ((phi2 + vsb).abs().sqrt() - phi2.sqrt())
}

fn dvt_dvsb(p: &DeviceParams, vsb: f64) -> f64 {
    let arg = 2.0 * p.phi_f + vsb;
    let mag = arg.abs().max(1e-9);
    p.gamma * arg.signum() * 0.5 / mag.sqrt()
}

/// Subthreshold swing at temperature: `S(T) = S(Tref) * T / Tref`
/// (thermal-voltage proportionality).
pub fn swing_at_temperature(p: &DeviceParams, temp: f64) -> f64 {
    p.swing * temp / p.tref
}

fn is_at_temperature(p: &DeviceParams, temp: f64) -> f64 {
    if p.is_temp_exp == 0.0 {
        p.is0
    } else {
        p.is0 * (temp / p.tref).powf(p.is_temp_exp)
    }
}

fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// ln(softplus(x)), stable for very negative x where softplus(x) ~ e^x.
fn ln_softplus(x: f64) -> f64 {
    if x < -35.0 {
        x
    } else {
        softplus(x).ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Soft decade cap: identity below the cap, asymptotically flat above it.
/// Returns (capped value, d(capped)/d(raw)).
fn soft_cap(decades: f64) -> (f64, f64) {
    let y = (EXP_CAP_DECADES - decades) / EXP_CAP_WIDTH;
    let capped = EXP_CAP_DECADES - EXP_CAP_WIDTH * softplus(y);
    (capped, sigmoid(y))
}

/// Evaluate the exact expression for VDS >= 0 in NMOS space.
fn full_canonical(p: &DeviceParams, vgs: f64, vds: f64, vsb: f64, temp: f64) -> f64 {
    let s = swing_at_temperature(p, temp);
    let vt = threshold_voltage(p, vsb);
    let geom = (p.w / p.l) * is_at_temperature(p, temp);
    geom * 10f64.powf((vgs - vt + p.lambda * vds) / s) * (1.0 - 10f64.powf(-p.eta * vds / s))
}

/// Simplified expression (drain-coupling factor dropped), no validity
/// check. The stack oracle needs the raw form even at negative VDS.
pub(crate) fn simplified_canonical(p: &DeviceParams, vgs: f64, vds: f64, vsb: f64, temp: f64) -> f64 {
    let s = swing_at_temperature(p, temp);
    let vt = threshold_voltage(p, vsb);
    let geom = (p.w / p.l) * is_at_temperature(p, temp);
    geom * 10f64.powf((vgs - vt + p.lambda * vds) / s)
}

/// Apply the antisymmetric source/drain swap for negative VDS, then the
/// given canonical evaluation.
fn with_swap(
    vgs: f64,
    vds: f64,
    vsb: f64,
    eval: impl Fn(f64, f64, f64) -> f64,
) -> f64 {
    if vds >= 0.0 {
        eval(vgs, vds, vsb)
    } else {
        // Terminal exchange: the old drain becomes the source.
        -eval(vgs - vds, -vds, vsb + vds)
    }
}

/// Exact channel current per the base expression, both polarities, any
/// VDS sign.
pub fn drain_current_full(p: &DeviceParams, b: &BiasPoint) -> f64 {
    match p.polarity {
        Polarity::Nmos => with_swap(b.vgs, b.vds, b.vsb, |g, d, sb| {
            full_canonical(p, g, d, sb, b.temp)
        }),
        Polarity::Pmos => -with_swap(-b.vgs, -b.vds, -b.vsb, |g, d, sb| {
            full_canonical(p, g, d, sb, b.temp)
        }),
    }
}

/// Simplified channel current, valid for VDS >= 50 mV. Callers outside
/// that region must use [`drain_current_full`].
pub fn drain_current_simplified(p: &DeviceParams, b: &BiasPoint) -> Result<f64, DeviceError> {
    let vds_mag = match p.polarity {
        Polarity::Nmos => b.vds,
        Polarity::Pmos => -b.vds,
    };
    if vds_mag < 0.05 {
        return Err(DeviceError::SimplifiedOutOfRange { vds: b.vds });
    }
    let i = match p.polarity {
        Polarity::Nmos => simplified_canonical(p, b.vgs, b.vds, b.vsb, b.temp),
        Polarity::Pmos => -simplified_canonical(p, -b.vgs, -b.vds, -b.vsb, b.temp),
    };
    Ok(i)
}

/// Unified current plus derivatives against the bias voltages.
#[derive(Debug, Clone, Copy)]
pub struct MosEval {
    /// Channel current [A], positive drain-to-source for N, negated for P.
    pub id: f64,
    /// dId/dVGS [S].
    pub gm: f64,
    /// dId/dVDS [S].
    pub gds: f64,
    /// dId/dVSB [S].
    pub gmb: f64,
}

/// Core unified evaluation in NMOS space with VDS >= 0.
///
/// The gate drive enters through a squared softplus (a smoothed
/// square-law in the overdrive) that reduces to the exact base-10
/// exponential several swings below threshold. The DIBL decade count and
/// the gate factor are summed in log10 space and passed through the soft
/// exponent cap before exponentiation.
fn unified_canonical(p: &DeviceParams, vgs: f64, vds: f64, vsb: f64, temp: f64) -> MosEval {
    let s = swing_at_temperature(p, temp);
    let vt = threshold_voltage(p, vsb);
    let dvt = dvt_dvsb(p, vsb);
    let geom = (p.w / p.l) * is_at_temperature(p, temp);

    let v = vgs - vt;
    let z = LN10 * v / (2.0 * s) - KNEE_SHIFT;
    // Gate factor in decades: log10(e^(2*KNEE) * softplus(z)^2).
    let lf = (2.0 * KNEE_SHIFT + 2.0 * ln_softplus(z)) / LN10;
    // d(lf)/dv = sigmoid(z)/softplus(z) * 1/s; the ratio tends to 1 deep
    // in subthreshold where both shrink like e^z.
    let sig_over_sp = if z < -30.0 { 1.0 } else { sigmoid(z) / softplus(z) };
    let dlf_dv = sig_over_sp / s;

    let ld = p.lambda * vds / s;
    let (lc, dcap) = soft_cap(lf + ld);
    let core = geom * 10f64.powf(lc);

    let e10 = 10f64.powf(-p.eta * vds / s);
    let etaf = 1.0 - e10;
    let detaf = (LN10 * p.eta / s) * e10;

    let id = core * etaf;
    let dcore_dv = core * LN10 * dcap * dlf_dv;
    let dcore_dvds = core * LN10 * dcap * (p.lambda / s);

    MosEval {
        id,
        gm: dcore_dv * etaf,
        gds: dcore_dvds * etaf + core * detaf,
        gmb: -dcore_dv * etaf * dvt,
    }
}

/// Unified evaluation in NMOS space for any VDS sign, with chain-rule
/// derivative mapping through the source/drain swap.
fn unified_nspace(p: &DeviceParams, vgs: f64, vds: f64, vsb: f64, temp: f64) -> MosEval {
    if vds >= 0.0 {
        unified_canonical(p, vgs, vds, vsb, temp)
    } else {
        let e = unified_canonical(p, vgs - vds, -vds, vsb + vds, temp);
        MosEval {
            id: -e.id,
            gm: -e.gm,
            gds: e.gm + e.gds - e.gmb,
            gmb: -e.gmb,
        }
    }
}

/// Unified current with derivatives, both polarities.
pub fn unified_eval(p: &DeviceParams, b: &BiasPoint) -> MosEval {
    match p.polarity {
        Polarity::Nmos => unified_nspace(p, b.vgs, b.vds, b.vsb, b.temp),
        Polarity::Pmos => {
            let e = unified_nspace(p, -b.vgs, -b.vds, -b.vsb, b.temp);
            // id = -i(-vgs, -vds, -vsb): each sign flip cancels in the
            // derivative, so the conductances carry over unchanged.
            MosEval {
                id: -e.id,
                gm: e.gm,
                gds: e.gds,
                gmb: e.gmb,
            }
        }
    }
}

/// Solver-facing smooth current expression (see module docs for the
/// contract relative to [`drain_current_full`]).
pub fn drain_current_unified(p: &DeviceParams, b: &BiasPoint) -> f64 {
    unified_eval(p, b).id
}

/// Current and terminal conductances for the nodal solver.
#[derive(Debug, Clone, Copy)]
pub struct TerminalEval {
    /// Current into the drain terminal and out of the source terminal [A].
    pub id: f64,
    pub did_dvd: f64,
    pub did_dvg: f64,
    pub did_dvs: f64,
    pub did_dvb: f64,
}

/// Evaluate at absolute terminal voltages (drain, gate, source, bulk).
pub fn eval_terminal(p: &DeviceParams, vd: f64, vg: f64, vs: f64, vb: f64, temp: f64) -> TerminalEval {
    let b = BiasPoint::new(vg - vs, vd - vs, vs - vb, temp);
    let e = unified_eval(p, &b);
    TerminalEval {
        id: e.id,
        did_dvd: e.gds,
        did_dvg: e.gm,
        did_dvs: -e.gm - e.gds + e.gmb,
        did_dvb: -e.gmb,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card() -> DeviceParams {
        DeviceParams::nmos()
    }

    fn paper() -> DeviceParams {
        DeviceParams::paper_typical()
    }

    // Tiny deterministic generator for test bias points.
    fn lcg(state: &mut u64) -> f64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*state >> 11) as f64) / ((1u64 << 53) as f64)
    }

    #[test]
    fn threshold_zero_vsb_is_vt0() {
        let p = card();
        assert_eq!(threshold_voltage(&p, 0.0), p.vt0);
        let zero_gamma = DeviceParams { gamma: 0.0, ..card() };
        assert_eq!(threshold_voltage(&zero_gamma, 0.7), zero_gamma.vt0);
        assert_eq!(threshold_voltage(&zero_gamma, -0.3), zero_gamma.vt0);
    }

    #[test]
    fn threshold_hand_evaluation() {
        // VT0=0.3, gamma=0.4, phiF=0.35, VSB=0.5:
        // 0.3 + 0.4*(sqrt(1.2) - sqrt(0.7)) = 0.4035140353905026
        let p = DeviceParams { vt0: 0.3, gamma: 0.4, phi_f: 0.35, ..card() };
        let vt = threshold_voltage(&p, 0.5);
        assert!((vt - 0.4035140353905026).abs() < 1e-12, "vt = {vt}");
    }

    #[test]
    fn threshold_nondecreasing_in_vsb() {
        let p = card();
        let mut prev = threshold_voltage(&p, 0.0);
        for i in 1..=40 {
            let vt = threshold_voltage(&p, i as f64 * 0.025);
            assert!(vt >= prev);
            prev = vt;
        }
    }

    #[test]
    fn full_current_zero_at_vds_zero() {
        let p = card();
        let b = BiasPoint::new(0.5, 0.0, 0.0, 300.0);
        assert_eq!(drain_current_full(&p, &b), 0.0);
        assert_eq!(drain_current_unified(&p, &b), 0.0);
    }

    #[test]
    fn full_current_hand_evaluation() {
        // Paper-typical card, VGS=0, VDS=1.0, W=L:
        // Is * 10^15 * (1 - 10^-12.5) = 9.999999999996838e7
        let p = paper();
        let b = BiasPoint::new(0.0, 1.0, 0.0, 300.0);
        let i = drain_current_full(&p, &b);
        let expect = 9.999999999996838e7;
        assert!((i / expect - 1.0).abs() < 1e-12, "i = {i}");
    }

    #[test]
    fn simplified_over_full_ratio_at_50mv() {
        // At VDS = 50 mV, eta=1, S=80 mV: ratio = 1/(1 - 10^-0.625) = 1.3108520
        let p = paper();
        let b = BiasPoint::new(0.0, 0.05, 0.0, 300.0);
        let full = drain_current_full(&p, &b);
        let simp = drain_current_simplified(&p, &b).unwrap();
        let ratio = simp / full;
        assert!((ratio - 1.3108520).abs() < 1e-6, "ratio = {ratio}");
    }

    #[test]
    fn simplified_rejects_small_vds() {
        let p = card();
        let b = BiasPoint::new(0.3, 0.049, 0.0, 300.0);
        assert!(matches!(
            drain_current_simplified(&p, &b),
            Err(DeviceError::SimplifiedOutOfRange { .. })
        ));
    }

    #[test]
    fn simplified_upper_bounds_full() {
        let p = card();
        let mut st = 7u64;
        for _ in 0..200 {
            let b = BiasPoint::new(
                lcg(&mut st) * 1.2 - 0.3,
                0.05 + lcg(&mut st) * 1.15,
                lcg(&mut st) * 0.4,
                250.0 + lcg(&mut st) * 150.0,
            );
            let full = drain_current_full(&p, &b);
            let simp = drain_current_simplified(&p, &b).unwrap();
            assert!(simp >= full);
        }
        // Ratio approaches 1 for large VDS.
        let b = BiasPoint::new(0.0, 1.2, 0.0, 300.0);
        let r = drain_current_simplified(&p, &b).unwrap() / drain_current_full(&p, &b);
        assert!((r - 1.0).abs() < 1e-10);
    }

    #[test]
    fn swing_scales_linearly_with_temperature() {
        let p = card();
        assert_eq!(swing_at_temperature(&p, p.tref), p.swing);
        let s383 = swing_at_temperature(&p, 383.0);
        assert!((s383 - 0.08 * 383.0 / 300.0).abs() < 1e-15);
        assert!((s383 - 0.1021333).abs() < 1e-6);
        assert!((swing_at_temperature(&p, 150.0) - p.swing / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unified_matches_full_deep_subthreshold() {
        // Contract clause (a): within 1% whenever VGS - VT <= -4*S(T),
        // checked on both cards, 100 random points each.
        for p in [card(), paper()] {
            let mut st = 42u64;
            for _ in 0..100 {
                let t = 280.0 + lcg(&mut st) * 120.0;
                let s = swing_at_temperature(&p, t);
                let vsb = lcg(&mut st) * 0.3;
                let vt = threshold_voltage(&p, vsb);
                let vgs = vt - 4.0 * s - lcg(&mut st) * 0.3;
                let vds = 0.01 + lcg(&mut st) * 1.19;
                let b = BiasPoint::new(vgs, vds, vsb, t);
                let full = drain_current_full(&p, &b);
                let uni = drain_current_unified(&p, &b);
                assert!(
                    (uni / full - 1.0).abs() < 0.01,
                    "vgs-vt={} vds={} rel={}",
                    vgs - vt,
                    vds,
                    uni / full - 1.0
                );
            }
        }
    }

    #[test]
    fn unified_deep_point_and_equilibrium() {
        let p = card();
        let s = p.swing;
        let b = BiasPoint::new(p.vt0 - 5.0 * s, 0.6, 0.0, 300.0);
        let full = drain_current_full(&p, &b);
        let uni = drain_current_unified(&p, &b);
        assert!((uni / full - 1.0).abs() < 0.01);
        assert_eq!(drain_current_unified(&p, &BiasPoint::new(0.2, 0.0, 0.0, 300.0)), 0.0);
    }

    #[test]
    fn unified_monotone_in_vgs() {
        let p = card();
        for &vds in &[0.0_f64, 0.05, 0.3, 1.0] {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..=120 {
                let vgs = -0.2 + i as f64 * 0.01;
                let i_d = drain_current_unified(&p, &BiasPoint::new(vgs, vds, 0.0, 300.0));
                if vds > 0.0 {
                    assert!(i_d > prev, "not strictly increasing at vgs={vgs}, vds={vds}");
                } else {
                    assert!(i_d >= prev);
                }
                prev = i_d;
            }
        }
    }

    #[test]
    fn unified_nondecreasing_in_vds() {
        let p = card();
        for &vgs in &[0.0_f64, 0.2, 0.4] {
            let mut prev = -1.0;
            for i in 0..=120 {
                let vds = i as f64 * 0.01;
                let i_d = drain_current_unified(&p, &BiasPoint::new(vgs, vds, 0.0, 300.0));
                assert!(i_d >= prev);
                prev = i_d;
            }
        }
    }

    #[test]
    fn full_antisymmetry_under_swap() {
        let p = card();
        let mut st = 3u64;
        for _ in 0..100 {
            let vgs = lcg(&mut st) * 1.0 - 0.2;
            let vds = lcg(&mut st) * 1.0;
            let vsb = lcg(&mut st) * 0.3;
            let fwd = drain_current_full(&p, &BiasPoint::new(vgs, vds, vsb, 300.0));
            // Swap source and drain by hand and compare.
            let swapped = drain_current_full(&p, &BiasPoint::new(vgs - vds, -vds, vsb + vds, 300.0));
            assert!(
                (fwd + swapped).abs() <= 1e-12 * fwd.abs().max(swapped.abs()),
                "antisymmetry violated at vgs={vgs} vds={vds}"
            );
        }
    }

    #[test]
    fn leakage_strictly_decreasing_in_vsb() {
        let p = card();
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let vsb = i as f64 * 0.05;
            let i_d = drain_current_full(&p, &BiasPoint::new(0.0, 0.5, vsb, 300.0));
            assert!(i_d < prev);
            prev = i_d;
        }
    }

    #[test]
    fn unified_derivatives_match_finite_differences() {
        // Central differences at 20 random interior bias points, both
        // polarities, within 1e-4 relative error.
        let h = 1e-6;
        for p in [card(), DeviceParams::pmos()] {
            let mut st = 99u64;
            for _ in 0..20 {
                let vd = lcg(&mut st) * 1.0 - 0.2;
                let vg = lcg(&mut st) * 1.0 - 0.2;
                let vs = lcg(&mut st) * 0.4 - 0.1;
                let vb = if p.polarity == Polarity::Pmos { 1.0 } else { 0.0 };
                let t = 300.0;
                let e = eval_terminal(&p, vd, vg, vs, vb, t);
                let num = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
                let checks = [
                    (e.did_dvd, num(&|d| eval_terminal(&p, vd + d, vg, vs, vb, t).id)),
                    (e.did_dvg, num(&|d| eval_terminal(&p, vd, vg + d, vs, vb, t).id)),
                    (e.did_dvs, num(&|d| eval_terminal(&p, vd, vg, vs + d, vb, t).id)),
                    (e.did_dvb, num(&|d| eval_terminal(&p, vd, vg, vs, vb + d, t).id)),
                ];
                for (analytic, numeric) in checks {
                    let scale = analytic.abs().max(numeric.abs());
                    if scale < 1e-18 {
                        continue;
                    }
                    assert!(
                        (analytic - numeric).abs() / scale < 1e-4,
                        "derivative mismatch: analytic={analytic} numeric={numeric} at vd={vd} vg={vg} vs={vs}"
                    );
                }
            }
        }
    }

    #[test]
    fn terminal_eval_continuous_across_vds_zero() {
        let p = card();
        let a = eval_terminal(&p, 1e-9, 0.4, 0.0, 0.0, 300.0);
        let b = eval_terminal(&p, -1e-9, 0.4, 0.0, 0.0, 300.0);
        assert!((a.id - b.id).abs() < 1e-12);
        assert!((a.did_dvd - b.did_dvd).abs() / a.did_dvd.abs() < 1e-3);
    }

    #[test]
    fn pmos_mirrors_nmos() {
        let n = card();
        let p = DeviceParams { polarity: Polarity::Pmos, ..card() };
        let bn = BiasPoint::new(0.4, 0.6, 0.1, 300.0);
        let bp = BiasPoint::new(-0.4, -0.6, -0.1, 300.0);
        let i_n = drain_current_full(&n, &bn);
        let i_p = drain_current_full(&p, &bp);
        assert!((i_n + i_p).abs() < 1e-15 * i_n.abs());
    }

    #[test]
    fn validate_rejects_bad_cards() {
        let mut p = card();
        p.is0 = 0.0;
        assert!(p.validate().is_err());
        let mut p = card();
        p.swing = -0.1;
        assert!(p.validate().is_err());
        assert!(card().validate().is_ok());
    }
}
