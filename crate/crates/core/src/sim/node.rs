use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

/// Local state of one queue: the queued packets' arrival times and the
/// backoff stage of the HOL packet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeState {
    /// Arrival timestamps in slots; the front entry is the HOL packet.
    pub queue: VecDeque<f64>,
    pub hol_stage: u32,
    /// First slot in which the HOL packet may transmit.
    pub hol_eligible_from: u64,
}

impl NodeState {
    /// A node holding one fresh packet that may contend from `slot`.
    pub fn backlogged(slot: u64) -> Self {
        NodeState { queue: VecDeque::from([slot as f64]), hol_stage: 0, hol_eligible_from: slot }
    }

    pub fn is_contending(&self, slot: u64) -> bool {
        !self.queue.is_empty() && self.hol_eligible_from <= slot
    }

    /// Per-slot transmission probability `1 / (r0 r^stage)` of the HOL packet.
    pub fn attempt_probability(&self, r0: f64, r: f64) -> f64 {
        stage_probability(r0, r, self.hol_stage)
    }

    /// Enqueues a packet arriving at `time` within `slot`. Returns whether the
    /// queue was empty; such a packet becomes HOL at the next slot boundary.
    pub fn arrive(&mut self, time: f64, slot: u64) -> bool {
        let was_empty = self.queue.is_empty();
        self.queue.push_back(time);
        if was_empty {
            self.hol_stage = 0;
            self.hol_eligible_from = slot + 1;
        }
        was_empty
    }

    pub fn collide(&mut self) {
        self.hol_stage += 1;
    }

    /// Removes the HOL packet after a success in `slot` and promotes the
    /// next-in-line packet at stage 0, eligible from the next slot.
    pub fn depart(&mut self, node_id: usize, slot: u64) -> Departure {
        let arrival_time = self.queue.pop_front().expect("departure from an empty queue");
        let d = Departure {
            node_id,
            arrival_time,
            departure_time: (slot + 1) as f64,
            service_slots: slot + 1 - self.hol_eligible_from,
            final_stage: self.hol_stage,
        };
        self.hol_stage = 0;
        self.hol_eligible_from = slot + 1;
        d
    }
}

pub(crate) fn stage_probability(r0: f64, r: f64, stage: u32) -> f64 {
    1.0 / (r0 * r.powi(stage.min(i32::MAX as u32) as i32))
}

pub use super::stats::DepartureRecord as Departure;

/// A packet entering a queue during a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub node_id: usize,
    pub time: f64,
    pub found_empty: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOutcome {
    Idle,
    Success(usize),
    Collision,
}

/// Everything that happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotEvents {
    pub slot: u64,
    /// Nodes that transmitted.
    pub attempts: Vec<usize>,
    pub outcome: SlotOutcome,
    pub departure: Option<Departure>,
    pub arrivals: Vec<Arrival>,
}

impl SlotEvents {
    pub fn new() -> Self {
        SlotEvents { slot: 0, attempts: Vec::new(), outcome: SlotOutcome::Idle, departure: None, arrivals: Vec::new() }
    }

    pub(crate) fn reset(&mut self, slot: u64) {
        self.slot = slot;
        self.attempts.clear();
        self.outcome = SlotOutcome::Idle;
        self.departure = None;
        self.arrivals.clear();
    }
}

impl Default for SlotEvents {
    fn default() -> Self {
        Self::new()
    }
}

/// Poisson arrival stream of one queue, kept as the time of the next arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ArrivalClock {
    rate: f64,
    next: f64,
}

impl ArrivalClock {
    pub(crate) fn new<R: Rng + ?Sized>(rate: f64, now: f64, rng: &mut R) -> Self {
        let mut c = ArrivalClock { rate, next: f64::INFINITY };
        c.reset(rate, now, rng);
        c
    }

    /// Changes the rate at time `now`; memorylessness lets the gap restart.
    pub(crate) fn reset<R: Rng + ?Sized>(&mut self, rate: f64, now: f64, rng: &mut R) {
        self.rate = rate;
        self.next = if rate > 0.0 {
            let gap: f64 = Exp1.sample(rng);
            now + gap / rate
        } else {
            f64::INFINITY
        };
    }

    /// Pops the next arrival if it falls before `until`.
    pub(crate) fn pop_before<R: Rng + ?Sized>(&mut self, until: f64, rng: &mut R) -> Option<f64> {
        if self.next < until {
            let t = self.next;
            let gap: f64 = Exp1.sample(rng);
            self.next += gap / self.rate;
            Some(t)
        } else {
            None
        }
    }
}
