//! Throughput, delay and starvation analysis of slotted Aloha under
//! exponential backoff, with simulators of the real N-node system and of the
//! fixed-collision-probability proxy system.
//!
//! * [`analytic`]: S–G curve, operating points, saturation, BBMD/SBMD limits,
//!   optimal backoff factor and critical node count.
//! * [`delay`]: HOL service-time PGF and moments, M/G/1-vacation transforms,
//!   mean queuing delay and its boundedness conditions.
//! * [`sim`]: slot-synchronous simulators and replication harness.
//! * [`starvation`]: length-biased service, running means, divergence score
//!   and windowed service counts.

pub mod analytic;
pub mod delay;
pub mod error;
pub mod params;
pub mod roots;
pub mod sim;
pub mod starvation;

pub use error::{Error, Result};
pub use params::{Nodes, SystemParams};
