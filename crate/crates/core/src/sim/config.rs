use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Poisson arrivals at `S_o / N` per node.
    OpenLoad,
    /// Every queue permanently backlogged.
    Saturated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    /// All N nodes contend on a shared channel.
    Real,
    /// One queue whose attempts collide independently with fixed probability.
    Proxy { p_c: f64 },
}

/// Switches the system offered load to `s_offered` from slot `start` onward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadStep {
    pub start: u64,
    pub s_offered: f64,
}

/// Ends a run early once `node` has `departures` measured departures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopRule {
    pub node: usize,
    pub departures: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: SystemParams,
    pub mode: Mode,
    pub system: SystemKind,
    pub horizon_slots: u64,
    /// Slots discarded from all statistics.
    pub warmup_slots: u64,
    pub seed: u64,
    pub replication_index: u64,
    pub window_slots: Option<u64>,
    /// Piecewise-constant offered load overriding `params.s_offered`.
    pub load_schedule: Vec<LoadStep>,
    pub record_trace: bool,
    pub stop: Option<StopRule>,
}

impl SimConfig {
    /// Config with a warmup of 10% of the horizon.
    pub fn new(params: SystemParams, mode: Mode, system: SystemKind, horizon_slots: u64, seed: u64) -> Self {
        SimConfig {
            params,
            mode,
            system,
            horizon_slots,
            warmup_slots: horizon_slots / 10,
            seed,
            replication_index: 0,
            window_slots: None,
            load_schedule: Vec::new(),
            record_trace: false,
            stop: None,
        }
    }

    pub fn real(params: SystemParams, mode: Mode, horizon_slots: u64, seed: u64) -> Self {
        Self::new(params, mode, SystemKind::Real, horizon_slots, seed)
    }

    pub fn proxy(params: SystemParams, p_c: f64, mode: Mode, horizon_slots: u64, seed: u64) -> Self {
        Self::new(params, mode, SystemKind::Proxy { p_c }, horizon_slots, seed)
    }

    pub fn with_warmup(mut self, warmup_slots: u64) -> Self {
        self.warmup_slots = warmup_slots;
        self
    }

    pub fn with_window(mut self, window_slots: u64) -> Self {
        self.window_slots = Some(window_slots);
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    pub fn with_stop(mut self, node: usize, departures: u64) -> Self {
        self.stop = Some(StopRule { node, departures });
        self
    }

    pub fn with_schedule(mut self, steps: Vec<LoadStep>) -> Self {
        self.load_schedule = steps;
        self
    }

    pub fn with_replication(mut self, index: u64) -> Self {
        self.replication_index = index;
        self
    }

    /// Number of independent queues simulated.
    pub fn queue_count(&self) -> usize {
        match self.system {
            SystemKind::Real => self.params.n.finite().unwrap_or(0) as usize,
            SystemKind::Proxy { .. } => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.horizon_slots == 0 {
            return bad("horizon must be positive".into());
        }
        if self.warmup_slots >= self.horizon_slots {
            return bad(format!(
                "warmup ({}) must be shorter than the horizon ({})",
                self.warmup_slots, self.horizon_slots
            ));
        }
        if self.window_slots == Some(0) {
            return bad("window must be positive".into());
        }
        let needs_n = match self.system {
            SystemKind::Real => true,
            SystemKind::Proxy { p_c } => {
                if !(0.0..1.0).contains(&p_c) {
                    return bad(format!("proxy collision probability must lie in [0, 1), got {p_c}"));
                }
                self.mode == Mode::OpenLoad
            }
        };
        if needs_n && self.params.n.is_infinite() {
            return bad("this simulation needs a finite node count".into());
        }
        if self.mode == Mode::OpenLoad {
            if self.params.s_offered.is_none() && self.load_schedule.first().map(|s| s.start) != Some(0) {
                return bad("open-load mode needs an offered load".into());
            }
            for step in &self.load_schedule {
                if !(step.s_offered.is_finite() && step.s_offered >= 0.0) {
                    return bad(format!("scheduled load must be >= 0, got {}", step.s_offered));
                }
            }
            if self.load_schedule.windows(2).any(|w| w[0].start >= w[1].start) {
                return bad("load schedule must be strictly increasing in start slot".into());
            }
        }
        if let Some(stop) = self.stop {
            if stop.node >= self.queue_count() {
                return bad(format!("stop rule names node {} of {}", stop.node, self.queue_count()));
            }
        }
        Ok(())
    }

    /// Offered load in effect at the first slot.
    pub(crate) fn initial_load(&self) -> f64 {
        match self.load_schedule.first() {
            Some(step) if step.start == 0 => step.s_offered,
            _ => self.params.s_offered.unwrap_or(0.0),
        }
    }
}
