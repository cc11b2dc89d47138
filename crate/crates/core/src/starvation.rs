//! Starvation diagnostics.
//!
//! A node that samples the channel at a random time finds a HOL packet whose
//! service time `Y` is length-biased, `P[Y = y] = y P[X = y] / E[X]`, so
//! `E[Y] = E[X²] / E[X]`. The system is called non-starved iff `E[Y]` is
//! finite, which for exponential backoff means `p_c r² < 1`. When it is not,
//! running means of service time fail to settle across replications.

use serde::{Deserialize, Serialize};

use crate::analytic::{critical_node_count, sbmd};
use crate::delay::{service_moments, Bounded};
use crate::error::{domain, Error, Result};
use crate::params::{check_collision_probability, check_r, check_r0, Nodes, SystemParams};
use crate::sim::{DepartureRecord, SimStats};

/// Running mean `X̄_j(n) = (X_1 + … + X_n) / n` of one replication's service
/// times, for `n = 1..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningMeanTrace {
    pub replication_id: u64,
    pub values: Vec<f64>,
}

impl RunningMeanTrace {
    pub fn final_mean(&self) -> f64 {
        *self.values.last().expect("trace is nonempty")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarvationFlag {
    Starved,
    NonStarved,
    Indeterminate,
}

impl StarvationFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            StarvationFlag::Starved => "starved",
            StarvationFlag::NonStarved => "non-starved",
            StarvationFlag::Indeterminate => "indeterminate",
        }
    }
}

/// Coefficient-of-variation cut-offs for [`divergence_score`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceThresholds {
    /// Spread above this flags starvation.
    pub starved_above: f64,
    /// Spread below this flags non-starvation.
    pub non_starved_below: f64,
}

impl Default for DivergenceThresholds {
    fn default() -> Self {
        DivergenceThresholds { starved_above: 0.10, non_starved_below: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScore {
    /// Sample standard deviation over sample mean of the final running means.
    pub spread: f64,
    pub flag: StarvationFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarvationVerdict {
    /// `p_c r² < 1`
    pub analytic_non_starved: bool,
    /// E[Y] in slots.
    pub e_y: Bounded,
    /// N_s* for the given `(r, r0)`, when the closed form is defined.
    pub critical_n: Option<f64>,
    pub empirical_spread: Option<f64>,
    pub empirical_flag: Option<StarvationFlag>,
}

impl StarvationVerdict {
    /// Attaches the divergence score of simulated final running means.
    pub fn with_empirical(mut self, score: DivergenceScore) -> Self {
        self.empirical_spread = Some(score.spread);
        self.empirical_flag = Some(score.flag);
        self
    }
}

/// Departures per node in consecutive windows of the measured horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowCounts {
    pub window_slots: u64,
    pub counts: Vec<Vec<u32>>,
    /// Per node, the longest run of empty windows in slots, capped at the horizon.
    pub max_zero_streak: Vec<u64>,
}

impl WindowCounts {
    fn from_counts(window_slots: u64, counts: Vec<Vec<u32>>, horizon: u64) -> Self {
        let max_zero_streak = counts
            .iter()
            .map(|c| {
                let (mut best, mut run) = (0u64, 0u64);
                for &k in c {
                    run = if k == 0 { run + 1 } else { 0 };
                    best = best.max(run);
                }
                (best * window_slots).min(horizon)
            })
            .collect();
        WindowCounts { window_slots, counts, max_zero_streak }
    }

    /// Uses the per-window counts a simulation collected with a window set.
    pub fn from_stats(stats: &SimStats) -> Result<Self> {
        match (stats.window_slots, &stats.window_counts) {
            (Some(w), Some(c)) => Ok(Self::from_counts(w, c.clone(), stats.slots_measured)),
            _ => Err(Error::Config("simulation was run without a window".into())),
        }
    }

    pub fn node_totals(&self) -> Vec<u64> {
        self.counts.iter().map(|c| c.iter().map(|&k| u64::from(k)).sum()).collect()
    }

    /// Mean departures per window over all nodes and windows.
    pub fn grand_mean(&self) -> f64 {
        let cells: usize = self.counts.iter().map(Vec::len).sum();
        if cells == 0 {
            return 0.0;
        }
        self.node_totals().iter().sum::<u64>() as f64 / cells as f64
    }

    pub fn longest_streak(&self) -> u64 {
        self.max_zero_streak.iter().copied().max().unwrap_or(0)
    }
}

fn check_samples(samples: &[u64]) -> Result<()> {
    if samples.is_empty() {
        return Err(domain("no service-time samples"));
    }
    if samples.contains(&0) {
        return Err(domain("service times must be positive"));
    }
    Ok(())
}

/// Empirical E[Y] = Σ x² / Σ x.
pub fn length_biased_mean(samples: &[u64]) -> Result<f64> {
    check_samples(samples)?;
    let (s1, s2) = samples.iter().fold((0.0, 0.0), |(a, b), &x| {
        let x = x as f64;
        (a + x, b + x * x)
    });
    Ok(s2 / s1)
}

/// Empirical Pr[Y > y] = Σ_{x > y} x / Σ x. A secondary diagnostic only; the
/// starvation verdict itself rests on the finiteness of E[Y].
pub fn length_biased_tail(samples: &[u64], y: u64) -> Result<f64> {
    check_samples(samples)?;
    let total: f64 = samples.iter().map(|&x| x as f64).sum();
    let above: f64 = samples.iter().filter(|&&x| x > y).map(|&x| x as f64).sum();
    Ok(above / total)
}

pub fn analytic_verdict(p_c: f64, r: f64, r0: f64) -> Result<StarvationVerdict> {
    check_collision_probability(p_c)?;
    check_r(r)?;
    check_r0(r0)?;
    let m = service_moments(p_c, r0, r)?;
    let e_y = match (m.second_moment, m.mean) {
        (Bounded::Finite(s2), Bounded::Finite(s1)) => Bounded::Finite(s2 / s1),
        _ => Bounded::Unbounded,
    };
    Ok(StarvationVerdict {
        analytic_non_starved: m.second_bounded,
        e_y,
        critical_n: critical_node_count(r, r0).ok().filter(|n| n.is_finite() && *n > 0.0),
        empirical_spread: None,
        empirical_flag: None,
    })
}

pub fn running_mean_trace(samples: &[u64], replication_id: u64) -> Result<RunningMeanTrace> {
    check_samples(samples)?;
    let mut sum = 0u64;
    let values = samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            sum += x;
            sum as f64 / (i + 1) as f64
        })
        .collect();
    Ok(RunningMeanTrace { replication_id, values })
}

pub fn divergence_score(finals: &[f64], thresholds: DivergenceThresholds) -> Result<DivergenceScore> {
    if finals.len() < 3 {
        return Err(Error::InsufficientReplications { needed: 3, got: finals.len() });
    }
    if finals.iter().any(|x| !x.is_finite() || *x <= 0.0) {
        return Err(domain("final running means must be positive and finite"));
    }
    let m = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / m;
    let var = finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let spread = var.sqrt() / mean;
    let flag = if spread > thresholds.starved_above {
        StarvationFlag::Starved
    } else if spread < thresholds.non_starved_below {
        StarvationFlag::NonStarved
    } else {
        StarvationFlag::Indeterminate
    };
    Ok(DivergenceScore { spread, flag })
}

/// Bins each node's departures from a trace into windows covering `[0, horizon)`.
pub fn window_counts(trace: &[DepartureRecord], window_slots: u64, n_nodes: usize, horizon: u64) -> Result<WindowCounts> {
    if window_slots == 0 {
        return Err(domain("window must be at least one slot"));
    }
    let windows = horizon.div_ceil(window_slots) as usize;
    let mut counts = vec![vec![0u32; windows]; n_nodes];
    for d in trace {
        let slot = d.departure_slot();
        if slot >= horizon {
            continue;
        }
        let row = counts
            .get_mut(d.node_id)
            .ok_or_else(|| domain(format!("node {} outside 0..{n_nodes}", d.node_id)))?;
        row[(slot / window_slots) as usize] += 1;
    }
    Ok(WindowCounts::from_counts(window_slots, counts, horizon))
}

/// Largest offered load with non-starved operation in the non-saturated,
/// asymptotic regime: the same as the bounded-mean-delay region, S_SBMD(r).
pub fn nonsaturated_starvation_region(r: f64) -> Result<f64> {
    Ok(sbmd(&SystemParams::new(1.0, r, Nodes::Infinite)?)?.s_sbmd)
}
