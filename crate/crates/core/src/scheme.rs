use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Delivery scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Each scheduled receiver is served at its own rate; decoding per block.
    StateAdaptive,
    /// Every scheduled receiver is served at the weakest scheduled rate.
    Blockwise,
    /// State-adaptive transport, decoded only at the end of the blocklength.
    Ergodic,
}

/// User-selection policy within a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Serve only the `t+1` strongest users.
    Opportunistic,
    /// Serve every `(t+1)`-subset for an equal share of the block.
    TimeShared,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::StateAdaptive, Scheme::Blockwise, Scheme::Ergodic];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::StateAdaptive => "state-adaptive",
            Scheme::Blockwise => "blockwise",
            Scheme::Ergodic => "ergodic",
        }
    }

    /// Decoding latency factor in the large-`n` limit.
    pub fn latency_factor(self) -> f64 {
        match self {
            Scheme::Ergodic => 1.0,
            _ => 0.5,
        }
    }

    /// Whether each scheduled receiver is limited by the weakest one.
    pub fn min_limited(self) -> bool {
        self == Scheme::Blockwise
    }
}

impl Policy {
    pub const ALL: [Policy; 2] = [Policy::Opportunistic, Policy::TimeShared];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Opportunistic => "opportunistic",
            Policy::TimeShared => "time-shared",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scheme {s:?}")))
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown policy {s:?}")))
    }
}
