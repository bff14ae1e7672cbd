//! Rate-memory-latency analytics: waterfilling, Monte Carlo rates and the
//! rate-memory frontier.

mod frontier;
mod montecarlo;
mod oracle;
mod rates;
mod waterfill;

pub use frontier::{build_frontier, Frontier};
pub use montecarlo::{calibrate_lambda, GainSamples, McOptions, PowerRule, WaterfillingSolution, CALIBRATION_TOL};
pub use oracle::{RateOracle, SubsetService};
pub use rates::{
    discrete_user_one_rate, rate_blockwise, rate_ergodic, rate_nonopportunistic, rate_point, rate_state_adaptive,
    RatePoint,
};
pub use waterfill::{kkt_residual, solve_waterfilling};
