use super::config::{Mode, SimConfig, StopRule};
use super::node::{Departure, SlotEvents};
use super::stats::SimStats;

/// Accumulates [`SimStats`] from slot events once the warmup has elapsed.
pub(crate) struct Recorder {
    warmup: u64,
    open_load: bool,
    record_trace: bool,
    stop: Option<StopRule>,
    stats: SimStats,
}

impl Recorder {
    pub(crate) fn new(config: &SimConfig) -> Self {
        let nodes = config.queue_count();
        Recorder {
            warmup: config.warmup_slots,
            open_load: config.mode == Mode::OpenLoad,
            record_trace: config.record_trace,
            stop: config.stop,
            stats: SimStats::new(nodes, config.window_slots, config.horizon_slots - config.warmup_slots),
        }
    }

    pub(crate) fn start_measuring(&mut self, backlog: u64) {
        self.stats.backlog_start = backlog;
    }

    /// Records one slot; `collided_attempts` counts attempts lost to collision.
    pub(crate) fn record(&mut self, ev: &SlotEvents, attempts: u64, collided_attempts: u64) {
        if ev.slot < self.warmup {
            return;
        }
        let s = &mut self.stats;
        s.slots_measured += 1;
        s.total_attempts += attempts;
        s.total_collisions += collided_attempts;
        s.total_arrivals += ev.arrivals.len() as u64;
        s.arrivals_to_empty += ev.arrivals.iter().filter(|a| a.found_empty).count() as u64;
        if let Some(d) = &ev.departure {
            self.departure(d, ev.slot);
        }
    }

    /// Saturated mode counts each replacement packet as an arrival.
    pub(crate) fn replenished(&mut self, slot: u64) {
        if slot >= self.warmup {
            self.stats.total_arrivals += 1;
        }
    }

    fn departure(&mut self, d: &Departure, slot: u64) {
        let s = &mut self.stats;
        let node = d.node_id;
        s.total_departures += 1;
        s.per_node_departures[node] += 1;
        s.service_samples[node].push(d.service_slots);
        if self.open_load {
            s.delay_samples[node].push(d.delay());
        }
        if let (Some(w), Some(counts)) = (s.window_slots, s.window_counts.as_mut()) {
            let idx = ((slot - self.warmup) / w) as usize;
            counts[node][idx] += 1;
        }
        if self.record_trace {
            s.trace.push(*d);
        }
    }

    pub(crate) fn should_stop(&self) -> bool {
        match self.stop {
            Some(rule) => self.stats.per_node_departures[rule.node] >= rule.departures,
            None => false,
        }
    }

    pub(crate) fn finish(mut self, backlog: u64) -> SimStats {
        self.stats.backlog_end = backlog;
        self.stats.finish();
        self.stats
    }
}
