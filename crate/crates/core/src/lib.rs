//! Opportunistic coded caching over block-fading broadcast channels.
//!
//! Files are split into queues indexed by `t`-subsets of receivers, each
//! receiver caches the queues whose index contains it, and in every channel
//! block the `t+1` strongest receivers are served with one XOR-coded
//! payload. The crate computes the achievable rate-memory trade-off and
//! simulates delivery bit by bit to measure decoding latency.

pub mod analytics;
pub mod channel;
pub mod delivery;
pub mod error;
pub mod params;
pub mod placement;
pub mod rng;
pub mod scheme;
pub mod subsets;

pub use analytics::{build_frontier, Frontier, McOptions, RateOracle, RatePoint};
pub use channel::{ChannelModel, DiscreteStateChannel, FadingModel};
pub use delivery::{DeliveryRun, DemandVector, LatencyReport};
pub use error::{Error, Result};
pub use params::SchemeParams;
pub use scheme::{Policy, Scheme};
pub use subsets::SubsetIndex;
