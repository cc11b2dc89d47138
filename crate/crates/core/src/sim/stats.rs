use serde::{Deserialize, Serialize};

/// One departed packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepartureRecord {
    pub node_id: usize,
    pub arrival_time: f64,
    /// End of the success slot.
    pub departure_time: f64,
    /// Slots from the first eligible slot through the success slot, inclusive.
    pub service_slots: u64,
    /// Backoff stage at the successful attempt.
    pub final_stage: u32,
}

impl DepartureRecord {
    pub fn delay(&self) -> f64 {
        self.departure_time - self.arrival_time
    }

    /// Slot in which the packet departed.
    pub fn departure_slot(&self) -> u64 {
        self.departure_time as u64 - 1
    }
}

/// Measurements from one simulation run, over the post-warmup window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimStats {
    pub slots_measured: u64,
    pub total_attempts: u64,
    /// Attempts that took part in a collision.
    pub total_collisions: u64,
    pub total_departures: u64,
    pub total_arrivals: u64,
    /// Arrivals that found their queue empty (HOL included).
    pub arrivals_to_empty: u64,
    /// Packets queued across all nodes when measurement started / ended.
    pub backlog_start: u64,
    pub backlog_end: u64,
    pub measured_g: f64,
    pub measured_s: f64,
    pub measured_pc: f64,
    pub per_node_departures: Vec<u64>,
    /// Per node, HOL service times of departed packets in departure order.
    pub service_samples: Vec<Vec<u64>>,
    /// Per node, queuing delays of departed packets (open-load mode only).
    pub delay_samples: Vec<Vec<f64>>,
    pub window_slots: Option<u64>,
    /// Per node, departures in each consecutive window.
    pub window_counts: Option<Vec<Vec<u32>>>,
    pub trace: Vec<DepartureRecord>,
}

impl SimStats {
    pub(crate) fn new(nodes: usize, window_slots: Option<u64>, measured_horizon: u64) -> Self {
        let windows = window_slots.map(|w| measured_horizon.div_ceil(w) as usize);
        SimStats {
            per_node_departures: vec![0; nodes],
            service_samples: vec![Vec::new(); nodes],
            delay_samples: vec![Vec::new(); nodes],
            window_slots,
            window_counts: windows.map(|w| vec![vec![0; w]; nodes]),
            ..Default::default()
        }
    }

    pub(crate) fn finish(&mut self) {
        let slots = self.slots_measured.max(1) as f64;
        self.measured_g = self.total_attempts as f64 / slots;
        self.measured_s = self.total_departures as f64 / slots;
        self.measured_pc = if self.total_attempts > 0 {
            self.total_collisions as f64 / self.total_attempts as f64
        } else {
            0.0
        };
        if let (Some(w), Some(counts)) = (self.window_slots, self.window_counts.as_mut()) {
            let used = self.slots_measured.div_ceil(w) as usize;
            for c in counts.iter_mut() {
                c.truncate(used);
            }
        }
    }

    pub fn all_service_samples(&self) -> impl Iterator<Item = u64> + '_ {
        self.service_samples.iter().flatten().copied()
    }

    pub fn all_delay_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.delay_samples.iter().flatten().copied()
    }

    pub fn mean_service(&self) -> Option<f64> {
        mean(self.all_service_samples().map(|x| x as f64))
    }

    pub fn mean_delay(&self) -> Option<f64> {
        mean(self.all_delay_samples())
    }

    /// Fraction of arrivals that found their queue empty; by PASTA, the
    /// time-average probability of an empty queue.
    pub fn empty_fraction(&self) -> Option<f64> {
        (self.total_arrivals > 0).then(|| self.arrivals_to_empty as f64 / self.total_arrivals as f64)
    }
}

fn mean(it: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = it.fold((0.0, 0u64), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}
