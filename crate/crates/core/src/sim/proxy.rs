use rand::Rng;

use super::config::{Mode, SimConfig, SystemKind};
use super::node::{stage_probability, Arrival, ArrivalClock, NodeState, SlotEvents, SlotOutcome};
use super::recorder::Recorder;
use super::stats::SimStats;
use super::stream_rng;
use crate::error::{Error, Result};

/// Single queue whose every attempt collides independently with probability `p_c`.
pub fn run_proxy(config: &SimConfig) -> Result<SimStats> {
    config.validate()?;
    let p_c = match config.system {
        SystemKind::Proxy { p_c } => p_c,
        SystemKind::Real => return Err(Error::Config("run_proxy needs a proxy-system config".into())),
    };
    let (r0, r) = (config.params.r0, config.params.r);
    let saturated = config.mode == Mode::Saturated;
    // Open load uses the per-node share S_o / N of the system load.
    let per_node = |s: f64| s / f64::from(config.params.n.finite().unwrap_or(1));

    let mut rng = stream_rng(config.seed, config.replication_index);
    let mut node = if saturated { NodeState::backlogged(0) } else { NodeState::default() };
    let mut clock = (!saturated).then(|| ArrivalClock::new(per_node(config.initial_load()), 0.0, &mut rng));
    let mut schedule = config.load_schedule.iter().skip_while(|s| s.start == 0).peekable();
    let mut rec = Recorder::new(config);
    let mut ev = SlotEvents::new();

    for slot in 0..config.horizon_slots {
        if slot == config.warmup_slots {
            rec.start_measuring(node.queue.len() as u64);
        }
        ev.reset(slot);
        if let Some(clock) = clock.as_mut() {
            if let Some(step) = schedule.next_if(|s| s.start == slot) {
                clock.reset(per_node(step.s_offered), slot as f64, &mut rng);
            }
        }
        let transmits =
            node.is_contending(slot) && rng.random::<f64>() < stage_probability(r0, r, node.hol_stage);
        if transmits {
            ev.attempts.push(0);
        }
        if let Some(clock) = clock.as_mut() {
            let end = (slot + 1) as f64;
            while let Some(t) = clock.pop_before(end, &mut rng) {
                let found_empty = node.arrive(t, slot);
                ev.arrivals.push(Arrival { node_id: 0, time: t, found_empty });
            }
        }
        let mut collided = 0;
        if transmits {
            if rng.random::<f64>() < p_c {
                node.collide();
                ev.outcome = SlotOutcome::Collision;
                collided = 1;
            } else {
                ev.outcome = SlotOutcome::Success(0);
                ev.departure = Some(node.depart(0, slot));
                if saturated && node.queue.is_empty() {
                    node.queue.push_back((slot + 1) as f64);
                    rec.replenished(slot);
                }
            }
        }
        rec.record(&ev, ev.attempts.len() as u64, collided);
        if rec.should_stop() {
            break;
        }
    }
    Ok(rec.finish(node.queue.len() as u64))
}
