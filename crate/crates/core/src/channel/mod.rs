//! Channel-state processes and user scheduling.

mod discrete;
mod fading;

pub use discrete::{order_by_strength, validate_symmetry, DiscreteState, DiscreteStateChannel, SymmetryReport};
pub use fading::FadingModel;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, substream, Purpose};
use crate::subsets::{binomial, enumerate_subsets, rank_of, SubsetIndex};

/// Either a discrete state table or Rayleigh block fading.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelModel {
    Discrete(DiscreteStateChannel),
    Fading(FadingModel),
}

/// Realized state of one coherence block.
#[derive(Debug, Clone, PartialEq)]
pub enum StateValue {
    /// Index into the discrete channel's state list.
    Discrete(usize),
    /// Per-user power gains `|h'_k|²`.
    Gains(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    pub block: u64,
    pub value: StateValue,
}

impl ChannelModel {
    pub fn users(&self) -> usize {
        match self {
            ChannelModel::Discrete(ch) => ch.users(),
            ChannelModel::Fading(m) => m.users(),
        }
    }

    /// State of block `block`, a pure function of `(seed, block)`.
    pub fn sample_block_state(&self, seed: u64, block: u64) -> BlockState {
        let mut rng = stream_rng(substream(seed, Purpose::States), block);
        let value = match self {
            ChannelModel::Discrete(ch) => StateValue::Discrete(ch.state_for(rng.random::<f64>())),
            ChannelModel::Fading(m) => StateValue::Gains(m.draw_gains(&mut rng)),
        };
        BlockState { block, value }
    }

    /// Users from strongest to weakest in this block.
    pub fn strength_order(&self, state: &BlockState) -> Result<Vec<usize>> {
        match (self, &state.value) {
            (ChannelModel::Discrete(ch), StateValue::Discrete(s)) if *s < ch.state_count() => {
                Ok(ch.order(*s).to_vec())
            }
            (ChannelModel::Fading(m), StateValue::Gains(g)) if g.len() == m.users() => {
                Ok(order_by_strength(g))
            }
            _ => Err(Error::invalid("block state does not belong to this channel")),
        }
    }

    /// The `t+1` strongest users of the block (the active set `G^{t+1}`).
    pub fn schedule(&self, state: &BlockState, t: usize) -> Result<SubsetIndex> {
        let order = self.strength_order(state)?;
        strongest(&order, t)
    }

    /// Short text label for transcripts.
    pub fn describe_state(&self, state: &BlockState) -> String {
        match (self, &state.value) {
            (ChannelModel::Discrete(ch), StateValue::Discrete(s)) => ch.states()[*s].name.clone(),
            (_, StateValue::Gains(g)) => g
                .iter()
                .map(|x| format!("{x:.6}"))
                .collect::<Vec<_>>()
                .join(";"),
            (_, StateValue::Discrete(s)) => format!("#{s}"),
        }
    }
}

fn strongest(order: &[usize], t: usize) -> Result<SubsetIndex> {
    if t + 1 > order.len() {
        return Err(Error::invalid(format!(
            "cannot schedule {} of {} users",
            t + 1,
            order.len()
        )));
    }
    rank_of(&order[..=t], order.len())
}

/// Active set for explicit per-user gains: the `t+1` largest, lower index
/// first on ties.
pub fn schedule_by_gain(gains: &[f64], t: usize) -> Result<SubsetIndex> {
    strongest(&order_by_strength(gains), t)
}

/// Non-opportunistic schedule: every `(t+1)`-subset, each for an equal
/// fraction of the block.
pub fn schedule_timeshared(users: usize, t: usize) -> Result<Vec<(SubsetIndex, f64)>> {
    if t + 1 > users {
        return Err(Error::invalid(format!("cannot schedule {} of {users} users", t + 1)));
    }
    let share = 1.0 / binomial(users, t + 1) as f64;
    Ok(enumerate_subsets(users, t + 1)?
        .into_iter()
        .map(|s| (s, share))
        .collect())
}
