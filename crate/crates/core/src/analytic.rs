//! Global, local and coupling analyses of the proxy system.
//!
//! The global analysis ties the per-node transmission probability to the
//! collision probability and the S–G throughput curve. The local analysis
//! gives the HOL service time in terms of a fixed collision probability.
//! Coupling the two yields the saturation throughput, the boundary and safe
//! bounded-mean-delay throughputs, the backoff factor that maximises the
//! latter, and the node count beyond which a saturated system starves.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::params::{check_probability, check_r, check_r0, Nodes, SystemParams};
use crate::roots::{bisect, DEFAULT_TOL};

/// Inset applied to open brackets such as `(0, 1/r)`.
const BRACKET_INSET: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    LeftOfPeak,
    Peak,
    RightOfPeak,
}

impl Branch {
    fn classify(g: f64) -> Self {
        if (g - 1.0).abs() <= 1e-9 {
            Branch::Peak
        } else if g < 1.0 {
            Branch::LeftOfPeak
        } else {
            Branch::RightOfPeak
        }
    }
}

/// A point on the S–G curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    /// System attempt rate G (attempts/slot).
    pub g: f64,
    /// System throughput S (packets/slot).
    pub s: f64,
    pub p_c: f64,
    /// Per-node transmission probability G/N; `None` in the asymptotic regime.
    pub p_t: Option<f64>,
    pub branch: Branch,
}

impl OperatingPoint {
    fn on_curve(g: f64, s: f64, n: Nodes) -> Self {
        // 1 − S/G evaluated through the curve to stay accurate for tiny G.
        let p_c = match n {
            Nodes::Infinite => -(-g).exp_m1(),
            Nodes::Finite(n) => -((n - 1) as f64 * (-g / f64::from(n)).ln_1p()).exp_m1(),
        };
        OperatingPoint {
            g,
            s,
            p_c,
            p_t: n.finite().map(|n| g / f64::from(n)),
            branch: Branch::classify(g),
        }
    }
}

/// Saturation operating point: every queue permanently backlogged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Saturation {
    pub g: f64,
    pub s: f64,
    pub p_c: f64,
}

impl Saturation {
    pub fn branch(&self) -> Branch {
        Branch::classify(self.g)
    }
}

/// Boundary point where `p_c · r² = 1` on the S–G curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbmd {
    pub g: f64,
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binding {
    BbmdBinding,
    SaturationBinding,
}

impl Binding {
    pub fn as_str(self) -> &'static str {
        match self {
            Binding::BbmdBinding => "bbmd-binding",
            Binding::SaturationBinding => "saturation-binding",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputLimits {
    pub s_sat: f64,
    pub g_sat: f64,
    pub p_c_sat: f64,
    pub s_bbmd: f64,
    pub g_bbmd: f64,
    pub s_sbmd: f64,
    pub binding: Binding,
}

/// `1 − (1 − p_t)^{n−1}`: collision probability seen by a transmitting node.
pub fn collision_prob(p_t: f64, n: u32) -> Result<f64> {
    check_probability("transmission probability", p_t)?;
    if n < 2 {
        return Err(domain(format!("node count must be >= 2, got {n}")));
    }
    Ok(-((n - 1) as f64 * (-p_t).ln_1p()).exp_m1())
}

/// Asymptotic collision probability `1 − e^{−G}` for attempt rate `g`.
pub fn collision_prob_asymptotic(g: f64) -> Result<f64> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(domain(format!("attempt rate must be >= 0, got {g}")));
    }
    Ok(-(-g).exp_m1())
}

/// Slotted-Aloha throughput `G (1 − G/N)^{N−1}`, or `G e^{−G}` asymptotically.
pub fn throughput_at(g: f64, n: Nodes) -> Result<f64> {
    if !(g.is_finite() && g >= 0.0) {
        return Err(domain(format!("attempt rate must be >= 0, got {g}")));
    }
    match n {
        Nodes::Infinite => Ok(g * (-g).exp()),
        Nodes::Finite(n) => {
            let nf = f64::from(n);
            if g > nf {
                return Err(domain(format!("attempt rate {g} exceeds node count {n}")));
            }
            Ok(g * (1.0 - g / nf).powi(n as i32 - 1))
        }
    }
}

/// Curve maximum, attained at `G = 1`.
pub fn peak_throughput(n: Nodes) -> f64 {
    match n {
        Nodes::Infinite => (-1.0f64).exp(),
        Nodes::Finite(n) => (1.0 - 1.0 / f64::from(n)).powi(n as i32 - 1),
    }
}

fn check_feasible_load(s_o: f64, n: Nodes) -> Result<f64> {
    if !(s_o.is_finite() && s_o > 0.0) {
        return Err(domain(format!("offered load must be > 0, got {s_o}")));
    }
    let peak = peak_throughput(n);
    if s_o >= peak {
        return Err(Error::InfeasibleLoad { offered: s_o, peak });
    }
    Ok(peak)
}

/// The non-saturated operating point for offered load `s_o`: the root of
/// `S(G) = s_o` on the left of the curve peak.
pub fn solve_operating_point(s_o: f64, n: Nodes) -> Result<OperatingPoint> {
    check_feasible_load(s_o, n)?;
    // G >= S_o, so scaling keeps the tolerance relative for light loads.
    let g = bisect(|g| curve(g, n) - s_o, 0.0, 1.0, DEFAULT_TOL * s_o.min(1.0))?;
    let mut op = OperatingPoint::on_curve(g, s_o, n);
    op.branch = Branch::LeftOfPeak;
    Ok(op)
}

/// The root of `S(G) = s_o` right of the peak. Only meaningful for drawing the
/// curve: it violates `p_c · r < 1` and is never an operating point.
pub fn right_branch_root(s_o: f64, n: Nodes) -> Result<OperatingPoint> {
    check_feasible_load(s_o, n)?;
    let hi = match n {
        Nodes::Finite(n) => f64::from(n),
        Nodes::Infinite => {
            let mut hi = 2.0;
            while curve(hi, n) > s_o {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(domain(format!("offered load {s_o} too small for right-branch search")));
                }
            }
            hi
        }
    };
    let g = bisect(|g| curve(g, n) - s_o, 1.0, hi, DEFAULT_TOL)?;
    let mut op = OperatingPoint::on_curve(g, s_o, n);
    op.branch = Branch::RightOfPeak;
    Ok(op)
}

fn curve(g: f64, n: Nodes) -> f64 {
    match n {
        Nodes::Infinite => g * (-g).exp(),
        Nodes::Finite(n) => {
            let nf = f64::from(n);
            g * (1.0 - g / nf).max(0.0).powi(n as i32 - 1)
        }
    }
}

/// Closed-form saturation point for N → ∞.
pub fn saturation_asymptotic(r: f64) -> Result<Saturation> {
    check_r(r)?;
    let g = (r / (r - 1.0)).ln();
    Ok(Saturation { g, s: (r - 1.0) / r * g, p_c: 1.0 / r })
}

/// Saturation point for finite `n`, from the collision-probability fixed point
/// `1 − p_c = (1 − (1 − p_c r) / (r0 (1 − p_c)))^{n−1}` on `(0, 1/r)`.
pub fn saturation_finite(r: f64, r0: f64, n: u32) -> Result<Saturation> {
    check_r(r)?;
    check_r0(r0)?;
    if n < 2 {
        return Err(domain(format!("node count must be >= 2, got {n}")));
    }
    let p_c = bisect(
        |p| saturation_residual(p, r, r0, n),
        BRACKET_INSET,
        1.0 / r - BRACKET_INSET,
        DEFAULT_TOL,
    )?;
    let p_t = (1.0 - p_c * r) / (r0 * (1.0 - p_c));
    if !(p_t > 0.0 && p_t <= 1.0) {
        return Err(Error::ModelViolation(format!(
            "implied transmission probability {p_t} outside (0, 1]"
        )));
    }
    let s = f64::from(n) * (1.0 - p_c * r) / r0;
    Ok(Saturation { g: s / (1.0 - p_c), s, p_c })
}

/// Residual of the saturation fixed point; zero at the solution.
pub fn saturation_residual(p_c: f64, r: f64, r0: f64, n: u32) -> f64 {
    let p_t = (1.0 - p_c * r) / (r0 * (1.0 - p_c));
    ((n - 1) as f64 * (-p_t).ln_1p()).exp() - (1.0 - p_c)
}

pub fn saturation(params: &SystemParams) -> Result<Saturation> {
    params.validate()?;
    match params.n {
        Nodes::Infinite => saturation_asymptotic(params.r),
        Nodes::Finite(n) => saturation_finite(params.r, params.r0, n),
    }
}

pub fn bbmd_asymptotic(r: f64) -> Result<Bbmd> {
    check_r(r)?;
    let r2 = r * r;
    let g = (r2 / (r2 - 1.0)).ln();
    Ok(Bbmd { g, s: (r2 - 1.0) / r2 * g })
}

/// Finite-N boundary point: the curve point with `p_c = 1/r²`.
pub fn bbmd_finite(r: f64, n: u32) -> Result<Bbmd> {
    check_r(r)?;
    if n < 2 {
        return Err(domain(format!("node count must be >= 2, got {n}")));
    }
    let keep = 1.0 - 1.0 / (r * r);
    let g = -f64::from(n) * (keep.ln() / f64::from(n - 1)).exp_m1();
    Ok(Bbmd { g, s: g * keep })
}

pub fn bbmd(r: f64, n: Nodes) -> Result<Bbmd> {
    match n {
        Nodes::Infinite => bbmd_asymptotic(r),
        Nodes::Finite(n) => bbmd_finite(r, n),
    }
}

/// Safe bounded-mean-delay throughput and the constraint that sets it.
///
/// For finite N the BBMD point may overtake the saturation point (larger G);
/// the feasible region then extends up to S_s regardless of S_BBMD.
pub fn sbmd(params: &SystemParams) -> Result<ThroughputLimits> {
    let sat = saturation(params)?;
    let b = bbmd(params.r, params.n)?;
    let overtaken = !params.n.is_infinite() && b.g > sat.g;
    let (s_sbmd, binding) = if overtaken || sat.s <= b.s {
        (sat.s, Binding::SaturationBinding)
    } else {
        (b.s, Binding::BbmdBinding)
    };
    Ok(ThroughputLimits {
        s_sat: sat.s,
        g_sat: sat.g,
        p_c_sat: sat.p_c,
        s_bbmd: b.s,
        g_bbmd: b.g,
        s_sbmd,
        binding,
    })
}

/// Backoff factor maximising the asymptotic S_SBMD, where S_BBMD(r) = S_s(r).
pub fn optimal_backoff_asymptotic() -> f64 {
    let gap = |r: f64| {
        let r2 = r * r;
        (r2 - 1.0) / r2 * (r2 / (r2 - 1.0)).ln() - (r - 1.0) / r * (r / (r - 1.0)).ln()
    };
    bisect(gap, 1.01, 3.0, 1e-6).expect("S_BBMD - S_s changes sign on [1.01, 3]")
}

/// Critical node count N_s*: a saturated system is non-starved iff N < N_s*.
pub fn critical_node_count(r: f64, r0: f64) -> Result<f64> {
    check_r(r)?;
    check_r0(r0)?;
    let base = 1.0 + 1.0 / r - 1.0 / r0;
    if base <= 0.0 {
        return Err(domain(format!("1 + 1/r - 1/r0 must be positive, got {base}")));
    }
    let c = base.ln();
    Ok(((r / (r - 1.0)).ln() - c) / (((r + 1.0) / r).ln() - c))
}
