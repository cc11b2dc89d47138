//! Local analysis: HOL service time and the M/G/1 multiple-vacation queue.
//!
//! With a fixed collision probability `p_c`, the HOL service time is a
//! mixture over the collision count `C ~ Geometric(1 − p_c)` of sums of
//! independent geometric gaps with means `r0 · r^j`. Each node's queue is an
//! M/G/1 queue whose server takes one-slot vacations whenever it is empty.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{bbmd_finite, solve_operating_point};
use crate::error::{domain, Error, Result};
use crate::params::{check_collision_probability, check_r, check_r0, Nodes, SystemParams};

/// A moment that is either finite or diverges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bounded {
    Finite(f64),
    Unbounded,
}

impl Bounded {
    pub fn finite(self) -> Option<f64> {
        match self {
            Bounded::Finite(v) => Some(v),
            Bounded::Unbounded => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Bounded::Finite(_))
    }

    fn map(self, f: impl FnOnce(f64) -> f64) -> Self {
        match self {
            Bounded::Finite(v) => Bounded::Finite(f(v)),
            Bounded::Unbounded => Bounded::Unbounded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceMoments {
    /// E[X] in slots.
    pub mean: Bounded,
    /// X''(1) = E[X(X − 1)].
    pub second_factorial: Bounded,
    /// E[X²].
    pub second_moment: Bounded,
    pub variance: Bounded,
    /// `p_c · r < 1`
    pub mean_bounded: bool,
    /// `p_c · r² < 1`
    pub second_bounded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate {
    /// E[D] in slots.
    pub mean_delay: Bounded,
    /// `p_c · r + λ_o · r0 < 1`
    pub non_saturated: bool,
    /// `p_c · r² < 1`
    pub service_var_bounded: bool,
    pub lambda_per_node: f64,
    pub p_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformContext {
    pub p_c: f64,
    pub r0: f64,
    pub r: f64,
    pub truncation_tol: f64,
    pub max_terms: usize,
}

impl TransformContext {
    pub fn new(p_c: f64, r0: f64, r: f64) -> Result<Self> {
        let ctx = TransformContext { p_c, r0, r, truncation_tol: 1e-12, max_terms: 10_000 };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn with_tolerance(mut self, truncation_tol: f64) -> Self {
        self.truncation_tol = truncation_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_collision_probability(self.p_c)?;
        check_r0(self.r0)?;
        check_r(self.r)?;
        if !(self.truncation_tol > 0.0) || self.max_terms == 0 {
            return Err(domain("truncation tolerance and term cap must be positive"));
        }
        Ok(())
    }

    /// E[X] = r0 / (1 − p_c r), if finite.
    pub fn mean_service(&self) -> Option<f64> {
        (self.p_c * self.r < 1.0).then(|| self.r0 / (1.0 - self.p_c * self.r))
    }
}

/// Value of a truncated series together with how it was truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<T> {
    pub value: T,
    pub terms: usize,
    /// The term cap was reached before the tail bound fell below tolerance.
    pub truncated: bool,
}

/// HOL service-time PGF X(z) for real `z` in [-1, 1].
pub fn service_pgf(z: f64, ctx: &TransformContext) -> Result<SeriesValue<f64>> {
    let v = service_pgf_complex(Complex64::new(z, 0.0), ctx)?;
    Ok(SeriesValue { value: v.value.re, terms: v.terms, truncated: v.truncated })
}

/// HOL service-time PGF X(z) on the closed unit disk.
pub fn service_pgf_complex(z: Complex64, ctx: &TransformContext) -> Result<SeriesValue<Complex64>> {
    ctx.validate()?;
    if !z.is_finite() || z.norm() > 1.0 + 1e-15 {
        return Err(domain(format!("PGF argument {z} outside the unit disk")));
    }
    let one_minus_z = Complex64::new(1.0, 0.0) - z;
    let mut prod = Complex64::new(1.0, 0.0);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut weight = 1.0 - ctx.p_c;
    let mut mean_gap = ctx.r0;
    for k in 0..ctx.max_terms {
        // Stage-k gap PGF z / (m − (m − 1) z), written as z / (m (1 − z) + z).
        let gap = if one_minus_z == Complex64::new(0.0, 0.0) {
            Complex64::new(1.0, 0.0)
        } else {
            z / (one_minus_z * mean_gap + z)
        };
        prod *= gap;
        sum += prod * weight;
        let tail = weight / (1.0 - ctx.p_c) * ctx.p_c;
        if tail < ctx.truncation_tol {
            return Ok(SeriesValue { value: sum, terms: k + 1, truncated: false });
        }
        weight *= ctx.p_c;
        mean_gap *= ctx.r;
    }
    Ok(SeriesValue { value: sum, terms: ctx.max_terms, truncated: true })
}

/// Evaluates `X*(s) = X(e^{−s})` and `1 − X*(s)` without cancellation.
fn laplace_pair(s: f64, ctx: &TransformContext) -> (f64, f64) {
    pgf_pair((-s).exp(), -(-s).exp_m1(), ctx)
}

/// `(X(z), 1 − X(z))` for real `z = 1 − u` in [0, 1], the second from positive terms only.
fn pgf_pair(z: f64, u: f64, ctx: &TransformContext) -> (f64, f64) {
    // P_k = prod of gap transforms, Q_k = 1 − P_k built from positive terms.
    let (mut p, mut q) = (1.0, 0.0);
    let (mut x, mut c) = (0.0, 0.0);
    let mut weight = 1.0 - ctx.p_c;
    let mut mean_gap = ctx.r0;
    for _ in 0..ctx.max_terms {
        let denom = mean_gap * u + z;
        let (gap, miss) = if denom.is_finite() { (z / denom, mean_gap * u / denom) } else { (0.0, 1.0) };
        q += p * miss;
        p *= gap;
        x += weight * p;
        c += weight * q;
        let tail = weight / (1.0 - ctx.p_c) * ctx.p_c;
        if tail < ctx.truncation_tol * c || (c == 0.0 && tail < ctx.truncation_tol) {
            break;
        }
        weight *= ctx.p_c;
        mean_gap *= ctx.r;
    }
    (x, c)
}

/// `1 − X(1 − u)` for `u` in [0, 1], accurate for tiny `u` where
/// `1 − service_pgf(1 − u)` would cancel.
pub fn service_pgf_complement(u: f64, ctx: &TransformContext) -> Result<f64> {
    ctx.validate()?;
    if !(0.0..=1.0).contains(&u) {
        return Err(domain(format!("complement argument must lie in [0, 1], got {u}")));
    }
    Ok(pgf_pair(1.0 - u, u, ctx).1)
}

/// Laplace transform of the one-slot vacation.
pub fn vacation_transform(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(domain(format!("Laplace argument must be >= 0, got {s}")));
    }
    Ok((-s).exp())
}

fn stable_utilisation(lambda_o: f64, ctx: &TransformContext) -> Result<f64> {
    ctx.validate()?;
    if !(lambda_o.is_finite() && lambda_o >= 0.0) {
        return Err(domain(format!("arrival rate must be >= 0, got {lambda_o}")));
    }
    let rho = match ctx.mean_service() {
        Some(m) => lambda_o * m,
        None => f64::INFINITY,
    };
    if rho >= 1.0 {
        return Err(Error::UnstableQueue { utilisation: rho });
    }
    Ok(rho)
}

fn delay_transform_unchecked(s: f64, lambda_o: f64, rho: f64, ctx: &TransformContext) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let (x, c) = laplace_pair(s, ctx);
    // (1 − ρ) X*(s) (V*(s) − 1) / (λ (1 − X*(s)) − s), with V̄ = 1.
    (1.0 - rho) * x * (-s).exp_m1() / (lambda_o * c - s)
}

/// Laplace transform D*(s) of the queuing delay (waiting plus service).
pub fn delay_transform(s: f64, lambda_o: f64, ctx: &TransformContext) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(domain(format!("Laplace argument must be >= 0, got {s}")));
    }
    let rho = stable_utilisation(lambda_o, ctx)?;
    Ok(delay_transform_unchecked(s, lambda_o, rho, ctx))
}

/// PGF Q(z) of the number of packets in a node's queue, HOL included.
pub fn queue_length_pgf(z: f64, lambda_o: f64, ctx: &TransformContext) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(domain(format!("queue PGF argument must lie in [0, 1], got {z}")));
    }
    let rho = stable_utilisation(lambda_o, ctx)?;
    // Q(z) = D*(λ (1 − z)).
    Ok(delay_transform_unchecked(lambda_o * (1.0 - z), lambda_o, rho, ctx))
}

pub fn service_moments(p_c: f64, r0: f64, r: f64) -> Result<ServiceMoments> {
    check_collision_probability(p_c)?;
    check_r0(r0)?;
    check_r(r)?;
    let mean_bounded = p_c * r < 1.0;
    let second_bounded = p_c < 1.0 / (r * r);
    let mean = if mean_bounded { Bounded::Finite(r0 / (1.0 - p_c * r)) } else { Bounded::Unbounded };
    let second_factorial = if second_bounded {
        Bounded::Finite(2.0 * r0 * (p_c * r * r + r0 - 1.0) / ((1.0 - p_c * r * r) * (1.0 - p_c * r)))
    } else {
        Bounded::Unbounded
    };
    let second_moment = match (second_factorial, mean) {
        (Bounded::Finite(f), Bounded::Finite(m)) => Bounded::Finite(f + m),
        _ => Bounded::Unbounded,
    };
    let variance = match mean {
        Bounded::Finite(m) => second_moment.map(|s2| s2 - m * m),
        Bounded::Unbounded => Bounded::Unbounded,
    };
    Ok(ServiceMoments { mean, second_factorial, second_moment, variance, mean_bounded, second_bounded })
}

/// The two convergence conditions for a finite mean delay:
/// `(p_c r + λ_o r0 < 1, p_c r² < 1)`.
pub fn boundedness_check(p_c: f64, r: f64, r0: f64, lambda_o: f64) -> (bool, bool) {
    (p_c * r + lambda_o * r0 < 1.0, p_c < 1.0 / (r * r))
}

/// Mean queuing delay for a fixed collision probability and per-node rate.
pub fn mean_delay_at(p_c: f64, r0: f64, r: f64, lambda_o: f64) -> Result<DelayEstimate> {
    check_collision_probability(p_c)?;
    check_r0(r0)?;
    check_r(r)?;
    if !(lambda_o.is_finite() && lambda_o >= 0.0) {
        return Err(domain(format!("arrival rate must be >= 0, got {lambda_o}")));
    }
    let (non_saturated, service_var_bounded) = boundedness_check(p_c, r, r0, lambda_o);
    let mean_delay = if non_saturated && service_var_bounded {
        let a = 1.0 - p_c * r;
        let b = 1.0 - p_c * r * r;
        let headroom = a - lambda_o * r0;
        Bounded::Finite(
            r0 / a + lambda_o * r0 * (p_c * r * r + 2.0 * r0 - 1.0) / (2.0 * b * headroom) + 0.5,
        )
    } else {
        Bounded::Unbounded
    };
    Ok(DelayEstimate { mean_delay, non_saturated, service_var_bounded, lambda_per_node: lambda_o, p_c })
}

/// Mean queuing delay at the left-branch operating point for `params.s_offered`.
pub fn mean_delay(params: &SystemParams) -> Result<DelayEstimate> {
    params.validate()?;
    let n = match params.n {
        Nodes::Finite(n) => n,
        Nodes::Infinite => return Err(domain("mean delay needs a finite node count")),
    };
    let s_o = params.s_offered.ok_or_else(|| domain("mean delay needs an offered load"))?;
    let op = solve_operating_point(s_o, params.n)?;
    let mut est = mean_delay_at(op.p_c, params.r0, params.r, s_o / f64::from(n))?;
    // p_c r² < 1 is the same as S_o < S_BBMD on the left branch; decide on the
    // load so the solver's last-bit error cannot move the boundary.
    let b = bbmd_finite(params.r, n)?;
    if b.g <= 1.0 && s_o >= b.s && est.service_var_bounded {
        est.service_var_bounded = false;
        est.mean_delay = Bounded::Unbounded;
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondMoment {
    Finite(f64),
    /// Finite-difference estimates disagree across step sizes, or E[X²] is
    /// already unbounded.
    Divergent,
}

pub const SECOND_MOMENT_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

/// Numerical E[D²] = D*''(0) by one-sided second differences.
///
/// D*(s) is only defined for `s ≥ 0`, so the stencil
/// `(2f(0) − 5f(h) + 4f(2h) − f(3h)) / h²` is used at each step in
/// [`SECOND_MOMENT_STEPS`]. Estimates spreading by more than 10% flag
/// divergence.
pub fn delay_second_moment_numeric(lambda_o: f64, ctx: &TransformContext) -> Result<SecondMoment> {
    let rho = stable_utilisation(lambda_o, ctx)?;
    if ctx.p_c >= 1.0 / (ctx.r * ctx.r) {
        return Ok(SecondMoment::Divergent);
    }
    let f = |s: f64| delay_transform_unchecked(s, lambda_o, rho, ctx);
    let estimates: Vec<f64> = SECOND_MOMENT_STEPS
        .iter()
        .map(|&h| (2.0 * f(0.0) - 5.0 * f(h) + 4.0 * f(2.0 * h) - f(3.0 * h)) / (h * h))
        .collect();
    let lo = estimates.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = estimates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo > 0.0 && hi.is_finite()) || hi / lo - 1.0 > 0.10 {
        return Ok(SecondMoment::Divergent);
    }
    Ok(SecondMoment::Finite(estimates[estimates.len() - 1]))
}
