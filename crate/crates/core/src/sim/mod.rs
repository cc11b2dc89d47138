//! Slot-synchronous simulators of the real N-node system and the proxy
//! single-queue system, plus the replication harness.
//!
//! Slot `k` spans `[k, k + 1)`. A packet arriving inside slot `k` to an empty
//! queue first contends in slot `k + 1`; a successful packet departs at the
//! end of its slot. Delay is `departure − arrival` in slots.

mod config;
mod node;
mod proxy;
mod real;
mod recorder;
mod stats;

pub use config::{LoadStep, Mode, SimConfig, StopRule, SystemKind};
pub use node::{Arrival, Departure, NodeState, SlotEvents, SlotOutcome};
pub use proxy::run_proxy;
pub use real::{run_real, step_slot, RealSystem};
pub use stats::{DepartureRecord, SimStats};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};

/// Random stream for replication `index` under `seed`: ChaCha8 keyed by
/// `seed` (expanded with SplitMix64) on stream number `index`. Distinct
/// indices give non-overlapping streams.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs whichever simulator the config names.
pub fn run(config: &SimConfig) -> Result<SimStats> {
    match config.system {
        SystemKind::Real => run_real(config),
        SystemKind::Proxy { .. } => run_proxy(config),
    }
}

/// Runs `m` independent replications with indices `0..m`; output is ordered
/// by index and does not depend on scheduling.
pub fn replicate(config: &SimConfig, m: usize) -> Result<Vec<SimStats>> {
    if m == 0 {
        return Err(domain("replication count must be >= 1"));
    }
    config.validate()?;
    let one = |i: usize| run(&config.clone().with_replication(i as u64));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..m).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..m).map(one).collect()
    }
}
