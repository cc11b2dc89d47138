use rand::Rng;

use super::config::{Mode, SimConfig, SystemKind};
use super::node::{stage_probability, Arrival, ArrivalClock, NodeState, SlotEvents, SlotOutcome};
use super::recorder::Recorder;
use super::stats::SimStats;
use super::stream_rng;
use crate::error::{Error, Result};

const CACHED_STAGES: usize = 64;

/// Full state of the N-node system at a slot boundary.
#[derive(Debug, Clone)]
pub struct RealSystem {
    r0: f64,
    r: f64,
    pub nodes: Vec<NodeState>,
    /// Index of the next slot to simulate.
    pub slot: u64,
    saturated: bool,
    clocks: Vec<ArrivalClock>,
    stage_prob: [f64; CACHED_STAGES],
}

impl RealSystem {
    /// Empty queues with Poisson arrivals at `lambda` per node per slot.
    pub fn open<R: Rng + ?Sized>(n: usize, r0: f64, r: f64, lambda: f64, rng: &mut R) -> Self {
        let clocks = (0..n).map(|_| ArrivalClock::new(lambda, 0.0, rng)).collect();
        Self::build(vec![NodeState::default(); n], r0, r, false, clocks)
    }

    /// Every node permanently backlogged, all eligible from slot 0.
    pub fn saturated(n: usize, r0: f64, r: f64) -> Self {
        Self::build(vec![NodeState::backlogged(0); n], r0, r, true, Vec::new())
    }

    /// Starts from explicit node states (no arrivals unless `set_arrival_rate` is called).
    pub fn from_nodes(nodes: Vec<NodeState>, r0: f64, r: f64, saturated: bool) -> Self {
        Self::build(nodes, r0, r, saturated, Vec::new())
    }

    fn build(nodes: Vec<NodeState>, r0: f64, r: f64, saturated: bool, clocks: Vec<ArrivalClock>) -> Self {
        let mut stage_prob = [0.0; CACHED_STAGES];
        for (i, p) in stage_prob.iter_mut().enumerate() {
            *p = stage_probability(r0, r, i as u32);
        }
        RealSystem { r0, r, nodes, slot: 0, saturated, clocks, stage_prob }
    }

    pub fn set_arrival_rate<R: Rng + ?Sized>(&mut self, lambda: f64, rng: &mut R) {
        let now = self.slot as f64;
        if self.clocks.len() != self.nodes.len() {
            self.clocks = (0..self.nodes.len()).map(|_| ArrivalClock::new(lambda, now, rng)).collect();
        } else {
            for c in &mut self.clocks {
                c.reset(lambda, now, rng);
            }
        }
    }

    pub fn backlog(&self) -> u64 {
        self.nodes.iter().map(|n| n.queue.len() as u64).sum()
    }

    fn probability(&self, stage: u32) -> f64 {
        match self.stage_prob.get(stage as usize) {
            Some(&p) => p,
            None => stage_probability(self.r0, self.r, stage),
        }
    }

    /// Advances one slot, writing what happened into `ev`.
    ///
    /// Contending nodes transmit independently; a lone transmitter succeeds
    /// and departs at the end of the slot, two or more collide and all move
    /// up one backoff stage. Arrivals during the slot are queued after the
    /// attempt decision and may contend from the next slot.
    pub fn step_into<R: Rng + ?Sized>(&mut self, rng: &mut R, ev: &mut SlotEvents) {
        let slot = self.slot;
        ev.reset(slot);
        for (i, node) in self.nodes.iter().enumerate() {
            if node.is_contending(slot) && rng.random::<f64>() < self.probability(node.hol_stage) {
                ev.attempts.push(i);
            }
        }
        let end = (slot + 1) as f64;
        for (i, clock) in self.clocks.iter_mut().enumerate() {
            while let Some(t) = clock.pop_before(end, rng) {
                let found_empty = self.nodes[i].arrive(t, slot);
                ev.arrivals.push(Arrival { node_id: i, time: t, found_empty });
            }
        }
        match ev.attempts.len() {
            0 => ev.outcome = SlotOutcome::Idle,
            1 => {
                let i = ev.attempts[0];
                ev.outcome = SlotOutcome::Success(i);
                let node = &mut self.nodes[i];
                ev.departure = Some(node.depart(i, slot));
                if self.saturated && node.queue.is_empty() {
                    node.queue.push_back(end);
                }
            }
            _ => {
                ev.outcome = SlotOutcome::Collision;
                for &i in &ev.attempts {
                    self.nodes[i].collide();
                }
            }
        }
        self.slot += 1;
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> SlotEvents {
        let mut ev = SlotEvents::new();
        self.step_into(rng, &mut ev);
        ev
    }
}

/// Applies the per-slot protocol rules to `state` for one slot.
pub fn step_slot<R: Rng + ?Sized>(state: &mut RealSystem, rng: &mut R) -> SlotEvents {
    state.step(rng)
}

pub fn run_real(config: &SimConfig) -> Result<SimStats> {
    config.validate()?;
    if config.system != SystemKind::Real {
        return Err(Error::Config("run_real needs a real-system config".into()));
    }
    let n = config.queue_count();
    let (r0, r) = (config.params.r0, config.params.r);
    let mut rng = stream_rng(config.seed, config.replication_index);
    let mut sys = match config.mode {
        Mode::Saturated => RealSystem::saturated(n, r0, r),
        Mode::OpenLoad => RealSystem::open(n, r0, r, config.initial_load() / n as f64, &mut rng),
    };
    let mut schedule = config.load_schedule.iter().skip_while(|s| s.start == 0).peekable();
    let mut rec = Recorder::new(config);
    let mut ev = SlotEvents::new();
    for slot in 0..config.horizon_slots {
        if slot == config.warmup_slots {
            rec.start_measuring(sys.backlog());
        }
        if config.mode == Mode::OpenLoad {
            if let Some(step) = schedule.next_if(|s| s.start == slot) {
                sys.set_arrival_rate(step.s_offered / n as f64, &mut rng);
            }
        }
        sys.step_into(&mut rng, &mut ev);
        let collided = if ev.outcome == SlotOutcome::Collision { ev.attempts.len() as u64 } else { 0 };
        rec.record(&ev, ev.attempts.len() as u64, collided);
        if sys.saturated && ev.departure.is_some() {
            rec.replenished(slot);
        }
        if rec.should_stop() {
            break;
        }
    }
    Ok(rec.finish(sys.backlog()))
}
