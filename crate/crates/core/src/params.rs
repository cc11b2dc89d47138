use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Number of contending nodes. `Infinite` selects the asymptotic closed forms
/// and is never represented as a large integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Nodes {
    Finite(u32),
    Infinite,
}

impl Nodes {
    pub fn finite(self) -> Option<u32> {
        match self {
            Nodes::Finite(n) => Some(n),
            Nodes::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Nodes::Infinite)
    }

    pub(crate) fn validate(self) -> Result<Self> {
        match self {
            Nodes::Finite(n) if n < 2 => Err(domain(format!("node count must be >= 2, got {n}"))),
            other => Ok(other),
        }
    }
}

impl fmt::Display for Nodes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nodes::Finite(n) => write!(f, "{n}"),
            Nodes::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Nodes {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Nodes::Infinite);
        }
        let n: u32 = s
            .parse()
            .map_err(|_| domain(format!("node count must be an integer >= 2 or \"inf\", got {s:?}")))?;
        Nodes::Finite(n).validate()
    }
}

/// Protocol and load parameters shared by every analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// A fresh HOL packet transmits with probability `1 / r0`.
    pub r0: f64,
    /// Backoff factor dividing the transmission probability after each collision.
    pub r: f64,
    pub n: Nodes,
    /// System offered load S_o in packets per slot.
    pub s_offered: Option<f64>,
}

impl SystemParams {
    pub fn new(r0: f64, r: f64, n: Nodes) -> Result<Self> {
        let p = SystemParams { r0, r, n, s_offered: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_offered_load(mut self, s_offered: f64) -> Result<Self> {
        self.s_offered = Some(s_offered);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_r0(self.r0)?;
        check_r(self.r)?;
        self.n.validate()?;
        if let Some(s) = self.s_offered {
            if !(s.is_finite() && s > 0.0) {
                return Err(domain(format!("offered load must be > 0, got {s}")));
            }
        }
        Ok(())
    }

    /// Per-node arrival rate λ_o = S_o / N (finite N only).
    pub fn lambda_per_node(&self) -> Option<f64> {
        Some(self.s_offered? / f64::from(self.n.finite()?))
    }
}

pub(crate) fn check_r(r: f64) -> Result<()> {
    if r.is_finite() && r > 1.0 {
        Ok(())
    } else {
        Err(domain(format!("backoff factor r must be > 1, got {r}")))
    }
}

pub(crate) fn check_r0(r0: f64) -> Result<()> {
    if r0.is_finite() && r0 >= 1.0 {
        Ok(())
    } else {
        Err(domain(format!("initial divisor r0 must be >= 1, got {r0}")))
    }
}

pub(crate) fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

pub(crate) fn check_collision_probability(p_c: f64) -> Result<()> {
    if (0.0..1.0).contains(&p_c) {
        Ok(())
    } else {
        Err(domain(format!("collision probability must lie in [0, 1), got {p_c}")))
    }
}
