//! Achievable rate-memory-latency points per scheme and policy.

use serde::Serialize;

use crate::channel::{validate_symmetry, BlockState, ChannelModel, DiscreteStateChannel, StateValue};
use crate::error::{Error, Result};
use crate::scheme::{Policy, Scheme};
use crate::subsets::enumerate_subsets;

use super::montecarlo::{calibrate_lambda, McOptions, PowerRule};

/// One `(M/D, R, ρ)` operating point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePoint {
    pub scheme: Scheme,
    pub policy: Policy,
    pub t: usize,
    /// `R_t` in bits per channel use.
    pub rate: f64,
    /// `M_t/D = (t/K)·R_t`.
    pub m_over_d: f64,
    pub rho: f64,
    /// Monte Carlo standard error of `rate`; zero for discrete channels.
    pub stderr: f64,
    /// Per-user rate conditioned on being served: `R_t·(K−t)/(t+1)`.
    pub conditional_rate: f64,
    /// Calibrated water level, fading channels only.
    pub lambda: Option<f64>,
}

impl RatePoint {
    fn new(scheme: Scheme, policy: Policy, users: usize, t: usize, rate: f64, stderr: f64, lambda: Option<f64>) -> Self {
        RatePoint {
            scheme,
            policy,
            t,
            rate,
            m_over_d: t as f64 / users as f64 * rate,
            rho: scheme.latency_factor(),
            stderr,
            conditional_rate: rate * (users - t) as f64 / (t + 1) as f64,
            lambda,
        }
    }
}

/// Long-run delivery rate of user 1 (bits per use) and the probability that
/// user 1 is served, straight from the rate table and without any symmetry
/// check. `R_t` follows as `rate·K/(K−t)`.
pub fn discrete_user_one_rate(
    ch: &DiscreteStateChannel,
    t: usize,
    min_limited: bool,
    policy: Policy,
) -> Result<(f64, f64)> {
    let k = ch.users();
    if t >= k {
        return Err(Error::invalid(format!("t = {t} must be below K = {k}")));
    }
    let model = ChannelModel::Discrete(ch.clone());
    let mut rate = 0.0;
    let mut served = 0.0;
    let subsets = enumerate_subsets(k, t + 1)?;
    for (s, st) in ch.states().iter().enumerate() {
        let groups: Vec<(Vec<usize>, f64)> = match policy {
            Policy::Opportunistic => {
                let state = BlockState {
                    block: 0,
                    value: StateValue::Discrete(s),
                };
                vec![(model.schedule(&state, t)?.members().to_vec(), 1.0)]
            }
            Policy::TimeShared => subsets
                .iter()
                .map(|g| (g.members().to_vec(), 1.0 / subsets.len() as f64))
                .collect(),
        };
        for (g, share) in groups {
            if !g.contains(&1) {
                continue;
            }
            let r = if min_limited {
                g.iter().map(|&j| st.rates[j - 1]).fold(f64::INFINITY, f64::min)
            } else {
                st.rates[0]
            };
            rate += st.prob * share * r;
            served += st.prob * share;
        }
    }
    Ok((rate, served))
}

/// `R_t` for any scheme and policy.
///
/// Discrete channels must pass the symmetry check. The state-adaptive rate
/// is `(t+1)/(K−t)·Ī` with `Ī` the rate of user 1 conditioned on being
/// served; the blockwise rate solves `R(1 − t/K) = Σ_{s: 1∈G(s)} p(s)·min_j I_j(s)`.
/// Fading channels calibrate the waterfilling policy over `mc.samples`
/// common gain vectors.
pub fn rate_point(channel: &ChannelModel, scheme: Scheme, policy: Policy, t: usize, mc: &McOptions) -> Result<RatePoint> {
    let k = channel.users();
    if t >= k {
        return Err(Error::invalid(format!("t = {t} must be below K = {k}")));
    }
    match channel {
        ChannelModel::Discrete(ch) => {
            let report = validate_symmetry(ch);
            if let Some(witness) = report.witness {
                return Err(Error::Asymmetric { witness });
            }
            let (rate, served) = discrete_user_one_rate(ch, t, scheme.min_limited(), policy)?;
            let conditional = if served > 0.0 { rate / served } else { 0.0 };
            let r = match (scheme.min_limited(), policy) {
                // Conditional form, as the scheme defines it.
                (false, Policy::Opportunistic) => (t + 1) as f64 / (k - t) as f64 * conditional,
                _ => rate * k as f64 / (k - t) as f64,
            };
            Ok(RatePoint::new(scheme, policy, k, t, r, 0.0, None))
        }
        ChannelModel::Fading(model) => {
            let rule = PowerRule {
                t,
                policy,
                min_limited: scheme.min_limited(),
            };
            let sol = calibrate_lambda(model, &rule, mc)?;
            Ok(RatePoint::new(scheme, policy, k, t, sol.rate, sol.stderr, Some(sol.lambda)))
        }
    }
}

pub fn rate_state_adaptive(channel: &ChannelModel, t: usize, mc: &McOptions) -> Result<RatePoint> {
    rate_point(channel, Scheme::StateAdaptive, Policy::Opportunistic, t, mc)
}

pub fn rate_blockwise(channel: &ChannelModel, t: usize, mc: &McOptions) -> Result<RatePoint> {
    rate_point(channel, Scheme::Blockwise, Policy::Opportunistic, t, mc)
}

/// Same rate as state-adaptive, latency factor 1.
pub fn rate_ergodic(channel: &ChannelModel, t: usize, mc: &McOptions) -> Result<RatePoint> {
    rate_point(channel, Scheme::Ergodic, Policy::Opportunistic, t, mc)
}

pub fn rate_nonopportunistic(channel: &ChannelModel, t: usize, scheme: Scheme, mc: &McOptions) -> Result<RatePoint> {
    rate_point(channel, scheme, Policy::TimeShared, t, mc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{DiscreteState, FadingModel};

    fn mc() -> McOptions {
        McOptions { samples: 1000, seed: 1 }
    }

    #[test]
    fn single_state_reduces_to_formula() {
        let ch = ChannelModel::Discrete(DiscreteStateChannel::uniform(3, 1.5).unwrap());
        for t in 0..3 {
            let p = rate_state_adaptive(&ch, t, &mc()).unwrap();
            let want = (t + 1) as f64 / (3 - t) as f64 * 1.5;
            assert!((p.rate - want).abs() < 1e-12);
            assert!((p.m_over_d - t as f64 / 3.0 * want).abs() < 1e-12);
            assert_eq!(p.rho, 0.5);
            let e = rate_ergodic(&ch, t, &mc()).unwrap();
            assert_eq!(e.rate, p.rate);
            assert_eq!(e.rho, 1.0);
        }
    }

    #[test]
    fn blockwise_single_state_reduction() {
        let ch = DiscreteStateChannel::new(
            2,
            vec![DiscreteState {
                name: "a".into(),
                prob: 1.0,
                rates: vec![2.0, 1.0],
                order: Vec::new(),
            }],
        )
        .unwrap();
        let (rate, served) = discrete_user_one_rate(&ch, 1, true, Policy::Opportunistic).unwrap();
        assert_eq!(served, 1.0);
        // R(1 − 1/2) = 1
        assert_eq!(rate * 2.0 / (2 - 1) as f64, 2.0);
        // The checked entry point refuses this asymmetric table.
        assert!(matches!(
            rate_blockwise(&ChannelModel::Discrete(ch), 1, &mc()),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn two_state_swap_channel() {
        let ch = ChannelModel::Discrete(DiscreteStateChannel::rotations_of(&[2.0, 1.0]).unwrap());
        // t=0: user 1 is served in state (2,1) only, at rate 2.
        let sa = rate_state_adaptive(&ch, 0, &mc()).unwrap();
        assert!((sa.rate - 0.5 * 2.0).abs() < 1e-12);
        let bw = rate_blockwise(&ch, 0, &mc()).unwrap();
        assert_eq!(bw.rate, sa.rate);
        // t=1: both served; SA conditional rate 1.5, R = 2·1.5 = 3; blockwise min 1 → 2.
        assert!((rate_state_adaptive(&ch, 1, &mc()).unwrap().rate - 3.0).abs() < 1e-12);
        assert!((rate_blockwise(&ch, 1, &mc()).unwrap().rate - 2.0).abs() < 1e-12);
        // Time-shared t=0: each user half the time at its average rate 1.5.
        let ts = rate_nonopportunistic(&ch, 0, Scheme::StateAdaptive, &mc()).unwrap();
        assert!((ts.rate - 0.75).abs() < 1e-12);
    }

    #[test]
    fn nonopportunistic_equals_opportunistic_at_full_set() {
        let ch = ChannelModel::Fading(FadingModel::new(3, 4.0).unwrap());
        let m = McOptions { samples: 20_000, seed: 4 };
        for scheme in [Scheme::StateAdaptive, Scheme::Blockwise] {
            let a = rate_point(&ch, scheme, Policy::Opportunistic, 2, &m).unwrap();
            let b = rate_point(&ch, scheme, Policy::TimeShared, 2, &m).unwrap();
            assert!((a.rate - b.rate).abs() < 1e-9);
        }
    }

    #[test]
    fn ordering_blockwise_below_state_adaptive() {
        let ch = ChannelModel::Fading(FadingModel::new(3, 4.0).unwrap());
        let m = McOptions { samples: 20_000, seed: 4 };
        for t in 0..3 {
            for policy in Policy::ALL {
                let sa = rate_point(&ch, Scheme::StateAdaptive, policy, t, &m).unwrap();
                let bw = rate_point(&ch, Scheme::Blockwise, policy, t, &m).unwrap();
                if t == 0 {
                    assert!((sa.rate - bw.rate).abs() < 1e-9);
                } else {
                    assert!(bw.rate < sa.rate);
                }
            }
        }
    }
}
