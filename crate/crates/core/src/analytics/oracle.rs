use crate::channel::{BlockState, ChannelModel, StateValue};
use crate::error::{Error, Result};
use crate::scheme::{Policy, Scheme};
use crate::subsets::{enumerate_subsets, SubsetIndex};

use super::montecarlo::{calibrate_lambda, McOptions, PowerRule};
use super::waterfill::power_from_inverse;

/// One served group within a block.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetService {
    pub subset: SubsetIndex,
    /// The block is split into `share` equal sub-blocks; this group gets one.
    pub share: usize,
    /// Transmit power in this group's sub-block (fading only).
    pub power: Option<f64>,
    /// `I(X;Y_k|S=s)` for each member, in member order.
    pub rates: Vec<f64>,
}

impl SubsetService {
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn rate_of(&self, user: usize) -> Option<f64> {
        self.subset
            .members()
            .iter()
            .position(|&u| u == user)
            .map(|i| self.rates[i])
    }
}

/// Per-block schedule and link rates for one scheme/policy/t combination.
///
/// For fading channels this carries the calibrated water level; the power
/// rule is the one that is optimal for `power_scheme` (waterfilling on the
/// full scheduled set, or on its weakest member for blockwise).
#[derive(Debug, Clone, PartialEq)]
pub struct RateOracle {
    channel: ChannelModel,
    policy: Policy,
    t: usize,
    power_min_limited: bool,
    lambda: Option<f64>,
    subsets: Vec<SubsetIndex>,
}

impl RateOracle {
    /// Builds the oracle, calibrating `λ` on a fading channel.
    pub fn calibrate(channel: &ChannelModel, power_scheme: Scheme, policy: Policy, t: usize, mc: &McOptions) -> Result<Self> {
        let lambda = match channel {
            ChannelModel::Discrete(_) => None,
            ChannelModel::Fading(model) => {
                let rule = PowerRule {
                    t,
                    policy,
                    min_limited: power_scheme.min_limited(),
                };
                Some(calibrate_lambda(model, &rule, mc)?.lambda)
            }
        };
        Self::build(channel, power_scheme, policy, t, lambda)
    }

    /// Builds the oracle with a known water level (ignored for discrete channels).
    pub fn with_lambda(channel: &ChannelModel, power_scheme: Scheme, policy: Policy, t: usize, lambda: f64) -> Result<Self> {
        Self::build(channel, power_scheme, policy, t, Some(lambda))
    }

    fn build(channel: &ChannelModel, power_scheme: Scheme, policy: Policy, t: usize, lambda: Option<f64>) -> Result<Self> {
        let k = channel.users();
        if t >= k {
            return Err(Error::invalid(format!("t = {t} must be below K = {k}")));
        }
        let lambda = match channel {
            ChannelModel::Discrete(_) => None,
            ChannelModel::Fading(_) => match lambda {
                Some(l) if l > 0.0 && l.is_finite() => Some(l),
                _ => return Err(Error::invalid("fading oracle needs a positive water level")),
            },
        };
        let subsets = match policy {
            Policy::Opportunistic => Vec::new(),
            Policy::TimeShared => enumerate_subsets(k, t + 1)?,
        };
        Ok(RateOracle {
            channel: channel.clone(),
            policy,
            t,
            power_min_limited: power_scheme.min_limited(),
            lambda,
            subsets,
        })
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn lambda(&self) -> Option<f64> {
        self.lambda
    }

    /// Groups served in this block with their link rates.
    pub fn services(&self, state: &BlockState) -> Result<Vec<SubsetService>> {
        let groups: Vec<(SubsetIndex, usize)> = match self.policy {
            Policy::Opportunistic => vec![(self.channel.schedule(state, self.t)?, 1)],
            Policy::TimeShared => self.subsets.iter().map(|s| (s.clone(), self.subsets.len())).collect(),
        };
        groups
            .into_iter()
            .map(|(subset, share)| {
                let (power, rates) = self.link_rates(state, &subset)?;
                Ok(SubsetService {
                    subset,
                    share,
                    power,
                    rates,
                })
            })
            .collect()
    }

    fn link_rates(&self, state: &BlockState, subset: &SubsetIndex) -> Result<(Option<f64>, Vec<f64>)> {
        match (&self.channel, &state.value) {
            (ChannelModel::Discrete(ch), StateValue::Discrete(s)) if *s < ch.state_count() => {
                Ok((None, subset.members().iter().map(|&u| ch.rate(*s, u)).collect()))
            }
            (ChannelModel::Fading(m), StateValue::Gains(g)) if g.len() == m.users() => {
                let lambda = self.lambda.expect("fading oracle has a water level");
                let inv: Vec<f64> = subset
                    .members()
                    .iter()
                    .map(|&u| 1.0 / g[u - 1].max(f64::MIN_POSITIVE))
                    .collect();
                let p = if self.power_min_limited {
                    let weakest = inv.iter().copied().fold(0.0, f64::max);
                    (1.0 / lambda - weakest).max(0.0)
                } else {
                    power_from_inverse(&inv, lambda)
                };
                Ok((Some(p), inv.iter().map(|v| (1.0 + p / v).log2()).collect()))
            }
            _ => Err(Error::invalid("block state does not belong to this channel")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{DiscreteStateChannel, FadingModel};

    #[test]
    fn discrete_rates_come_from_table() {
        let ch = ChannelModel::Discrete(DiscreteStateChannel::rotations_of(&[2.0, 1.0, 0.5]).unwrap());
        let o = RateOracle::calibrate(&ch, Scheme::StateAdaptive, Policy::Opportunistic, 1, &McOptions::default()).unwrap();
        for b in 0..20 {
            let st = ch.sample_block_state(3, b);
            let sv = o.services(&st).unwrap();
            assert_eq!(sv.len(), 1);
            let mut sorted = sv[0].rates.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_eq!(sorted, vec![2.0, 1.0]);
        }
    }

    #[test]
    fn fading_waterfilling_power() {
        let ch = ChannelModel::Fading(FadingModel::new(2, 4.0).unwrap());
        let o = RateOracle::with_lambda(&ch, Scheme::StateAdaptive, Policy::Opportunistic, 0, 0.2).unwrap();
        let st = BlockState {
            block: 0,
            value: StateValue::Gains(vec![0.5, 1.0]),
        };
        let sv = o.services(&st).unwrap();
        assert_eq!(sv[0].subset.members(), &[2]);
        assert!((sv[0].power.unwrap() - 4.0).abs() < 1e-12);
        assert!((sv[0].rates[0] - 5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn timeshared_lists_every_group() {
        let ch = ChannelModel::Fading(FadingModel::new(3, 4.0).unwrap());
        let o = RateOracle::with_lambda(&ch, Scheme::Blockwise, Policy::TimeShared, 1, 0.3).unwrap();
        let st = ch.sample_block_state(1, 1);
        let sv = o.services(&st).unwrap();
        assert_eq!(sv.len(), 3);
        assert!(sv.iter().all(|s| s.share == 3));
    }
}
