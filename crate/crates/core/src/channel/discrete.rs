//! Discrete state-dependent broadcast channels given by a rate table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_TOL: f64 = 1e-12;
const MATCH_TOL: f64 = 1e-9;

/// One channel state: its probability, the per-user mutual information
/// `I(X;Y_k|S=s)` in bits per use, and the degradation order (strongest
/// user first, 1-indexed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteState {
    pub name: String,
    pub prob: f64,
    pub rates: Vec<f64>,
    #[serde(default)]
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateChannel {
    users: usize,
    states: Vec<DiscreteState>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    users: usize,
    #[serde(rename = "state")]
    states: Vec<DiscreteState>,
}

impl DiscreteStateChannel {
    /// Validates the table. An empty `order` is filled in from the rates by
    /// descending value, lower user index first on ties; a supplied order
    /// must be a permutation along which the rates do not increase.
    pub fn new(users: usize, mut states: Vec<DiscreteState>) -> Result<Self> {
        if users == 0 {
            return Err(Error::Parse("at least one user is required".into()));
        }
        if states.is_empty() {
            return Err(Error::Parse("at least one state is required".into()));
        }
        let mut total = 0.0;
        for st in &mut states {
            if st.rates.len() != users {
                return Err(Error::Parse(format!(
                    "state {:?} lists {} rates for {users} users",
                    st.name,
                    st.rates.len()
                )));
            }
            if !(st.prob >= 0.0) {
                return Err(Error::Parse(format!("state {:?} has negative probability", st.name)));
            }
            if st.rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
                return Err(Error::Parse(format!("state {:?} has a negative or non-finite rate", st.name)));
            }
            total += st.prob;
            if st.order.is_empty() {
                st.order = order_by_strength(&st.rates);
            } else {
                let mut seen = vec![false; users];
                for &u in &st.order {
                    if u == 0 || u > users || std::mem::replace(&mut seen[u - 1], true) {
                        return Err(Error::Parse(format!(
                            "state {:?}: order {:?} is not a permutation of 1..={users}",
                            st.name, st.order
                        )));
                    }
                }
                if st.order.len() != users {
                    return Err(Error::Parse(format!(
                        "state {:?}: order must list all {users} users",
                        st.name
                    )));
                }
                if st.order.windows(2).any(|w| st.rates[w[0] - 1] < st.rates[w[1] - 1]) {
                    return Err(Error::Parse(format!(
                        "state {:?}: rates increase along the degradation order {:?}",
                        st.name, st.order
                    )));
                }
            }
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::Parse(format!("state probabilities sum to {total}, not 1")));
        }
        let mut names: Vec<&str> = states.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Parse("state names must be unique".into()));
        }
        Ok(DiscreteStateChannel { users, states })
    }

    /// Parses the TOML channel description:
    ///
    /// ```toml
    /// users = 2
    /// [[state]]
    /// name = "A"
    /// prob = 0.5
    /// rates = [2.0, 1.0]
    /// order = [1, 2]    # optional
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ChannelFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(file.users, file.states)
    }

    /// A single state in which every user has rate `rate`.
    pub fn uniform(users: usize, rate: f64) -> Result<Self> {
        Self::new(
            users,
            vec![DiscreteState {
                name: "s0".into(),
                prob: 1.0,
                rates: vec![rate; users],
                order: Vec::new(),
            }],
        )
    }

    /// The symmetric channel whose states are all distinct rearrangements of
    /// `profile` across users, equally likely.
    pub fn rotations_of(profile: &[f64]) -> Result<Self> {
        let users = profile.len();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        permute_rows(profile.to_vec(), 0, &mut rows);
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.dedup();
        let p = 1.0 / rows.len() as f64;
        let states = rows
            .into_iter()
            .enumerate()
            .map(|(i, rates)| DiscreteState {
                name: format!("s{i}"),
                prob: p,
                rates,
                order: Vec::new(),
            })
            .collect();
        Self::new(users, states)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn states(&self) -> &[DiscreteState] {
        &self.states
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    /// Rate of (1-indexed) user `user` in state `state`.
    pub fn rate(&self, state: usize, user: usize) -> f64 {
        self.states[state].rates[user - 1]
    }

    pub fn order(&self, state: usize) -> &[usize] {
        &self.states[state].order
    }

    /// Draws a state index by inverse CDF of `u ∈ [0,1)`.
    pub fn state_for(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (i, st) in self.states.iter().enumerate() {
            acc += st.prob;
            if u < acc {
                return i;
            }
        }
        // Rounding in the cumulative sum: fall back to the last state with mass.
        self.states.iter().rposition(|s| s.prob > 0.0).unwrap_or(0)
    }
}

fn permute_rows(mut v: Vec<f64>, start: usize, out: &mut Vec<Vec<f64>>) {
    if start == v.len() {
        out.push(v);
        return;
    }
    for i in start..v.len() {
        v.swap(start, i);
        permute_rows(v.clone(), start + 1, out);
        v.swap(start, i);
    }
}

/// Users sorted by descending strength, lower index first on ties.
pub fn order_by_strength(strength: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..=strength.len()).collect();
    idx.sort_by(|&a, &b| {
        strength[b - 1]
            .partial_cmp(&strength[a - 1])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Outcome of [`validate_symmetry`].
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    /// A user permutation with no matching state permutation, as the
    /// 1-indexed images `ν(1), …, ν(K)`. `None` when the channel is symmetric.
    pub witness: Option<Vec<usize>>,
    /// For every checked generator `ν`, the state permutation `π_ν` found
    /// (state index images).
    pub state_maps: Vec<(Vec<usize>, Vec<usize>)>,
}

impl SymmetryReport {
    pub fn is_symmetric(&self) -> bool {
        self.witness.is_none()
    }
}

/// Checks the state-symmetry condition: for every user permutation `ν`
/// there is a state permutation `π_ν` with `p(π_ν(s)) = p(s)` and
/// `I_{ν(k)}(π_ν(s)) = I_k(s)`.
///
/// Permutations admitting such a `π` are closed under composition, so it
/// is enough to check the generators of the symmetric group: the swap of
/// users 1 and 2 and the cycle `k ↦ k+1 mod K`.
pub fn validate_symmetry(ch: &DiscreteStateChannel) -> SymmetryReport {
    let k = ch.users;
    let mut generators: Vec<Vec<usize>> = Vec::new();
    if k >= 2 {
        let mut swap: Vec<usize> = (1..=k).collect();
        swap.swap(0, 1);
        generators.push(swap);
        let cycle: Vec<usize> = (1..=k).map(|u| u % k + 1).collect();
        if !generators.contains(&cycle) {
            generators.push(cycle);
        }
    }
    let mut state_maps = Vec::new();
    for nu in generators {
        match match_states(ch, &nu) {
            Some(pi) => state_maps.push((nu, pi)),
            None => {
                return SymmetryReport {
                    witness: Some(nu),
                    state_maps,
                }
            }
        }
    }
    SymmetryReport {
        witness: None,
        state_maps,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MATCH_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Perfect matching between states `s` and candidate images `π(s)`.
fn match_states(ch: &DiscreteStateChannel, nu: &[usize]) -> Option<Vec<usize>> {
    let n = ch.states.len();
    let candidates: Vec<Vec<usize>> = ch
        .states
        .iter()
        .map(|src| {
            let mut target = vec![0.0; ch.users];
            for (k, &r) in src.rates.iter().enumerate() {
                target[nu[k] - 1] = r;
            }
            (0..n)
                .filter(|&j| {
                    let dst = &ch.states[j];
                    close(src.prob, dst.prob)
                        && dst.rates.iter().zip(&target).all(|(&a, &b)| close(a, b))
                })
                .collect()
        })
        .collect();

    // Kuhn's augmenting paths.
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(
        s: usize,
        cands: &[Vec<usize>],
        owner: &mut [Option<usize>],
        seen: &mut [bool],
    ) -> bool {
        for &j in &cands[s] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|o| augment(o, cands, owner, seen)) {
                owner[j] = Some(s);
                return true;
            }
        }
        false
    }
    for s in 0..n {
        let mut seen = vec![false; n];
        if !augment(s, &candidates, &mut owner, &mut seen) {
            return None;
        }
    }
    let mut pi = vec![0; n];
    for (j, o) in owner.iter().enumerate() {
        pi[o.expect("perfect matching")] = j;
    }
    Some(pi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(name: &str, prob: f64, rates: &[f64]) -> DiscreteState {
        DiscreteState {
            name: name.into(),
            prob,
            rates: rates.to_vec(),
            order: Vec::new(),
        }
    }

    #[test]
    fn uniform_single_state_is_symmetric() {
        let ch = DiscreteStateChannel::uniform(4, 1.5).unwrap();
        assert!(validate_symmetry(&ch).is_symmetric());
    }

    #[test]
    fn swap_symmetric_pair() {
        let ch = DiscreteStateChannel::new(
            2,
            vec![state("A", 0.5, &[2.0, 1.0]), state("B", 0.5, &[1.0, 2.0])],
        )
        .unwrap();
        let rep = validate_symmetry(&ch);
        assert!(rep.is_symmetric());
        assert_eq!(rep.state_maps, vec![(vec![2, 1], vec![1, 0])]);
    }

    #[test]
    fn asymmetric_single_state() {
        let ch = DiscreteStateChannel::new(2, vec![state("A", 1.0, &[2.0, 1.0])]).unwrap();
        let rep = validate_symmetry(&ch);
        assert_eq!(rep.witness, Some(vec![2, 1]));
    }

    #[test]
    fn unequal_probabilities_break_symmetry() {
        let ch = DiscreteStateChannel::new(
            2,
            vec![state("A", 0.6, &[2.0, 1.0]), state("B", 0.4, &[1.0, 2.0])],
        )
        .unwrap();
        assert!(!validate_symmetry(&ch).is_symmetric());
    }

    #[test]
    fn rotations_are_symmetric() {
        let ch = DiscreteStateChannel::rotations_of(&[3.0, 2.0, 0.5, 0.5]).unwrap();
        assert_eq!(ch.state_count(), 12);
        assert!(validate_symmetry(&ch).is_symmetric());
    }

    #[test]
    fn cycle_only_symmetry_is_rejected() {
        // Invariant under the 3-cycle but not under the swap of users 1 and 2.
        let ch = DiscreteStateChannel::new(
            3,
            vec![
                state("a", 1.0 / 3.0, &[3.0, 2.0, 1.0]),
                state("b", 1.0 / 3.0, &[1.0, 3.0, 2.0]),
                state("c", 1.0 / 3.0 + 1e-16, &[2.0, 1.0, 3.0]),
            ],
        )
        .unwrap();
        let rep = validate_symmetry(&ch);
        assert_eq!(rep.witness, Some(vec![2, 1, 3]));
    }

    #[test]
    fn parse_and_validate() {
        let text = r#"
            users = 2
            [[state]]
            name = "A"
            prob = 0.5
            rates = [2.0, 1.0]
            order = [1, 2]
            [[state]]
            name = "B"
            prob = 0.5
            rates = [1.0, 2.0]
        "#;
        let ch = DiscreteStateChannel::from_toml_str(text).unwrap();
        assert_eq!(ch.order(1), &[2, 1]);
        assert_eq!(ch.rate(0, 1), 2.0);

        let bad_order = text.replace("order = [1, 2]", "order = [2, 1]");
        assert!(DiscreteStateChannel::from_toml_str(&bad_order).is_err());
        let bad_prob = text.replacen("prob = 0.5", "prob = 0.4", 1);
        assert!(DiscreteStateChannel::from_toml_str(&bad_prob).is_err());
        let unknown = format!("{text}\nextra = 1\n");
        assert!(DiscreteStateChannel::from_toml_str(&unknown).is_err());
    }

    #[test]
    fn inverse_cdf_sampling() {
        let ch = DiscreteStateChannel::new(
            2,
            vec![state("A", 0.25, &[1.0, 1.0]), state("B", 0.75, &[1.0, 1.0])],
        )
        .unwrap();
        assert_eq!(ch.state_for(0.1), 0);
        assert_eq!(ch.state_for(0.3), 1);
        assert_eq!(ch.state_for(0.999_999), 1);
    }
}
