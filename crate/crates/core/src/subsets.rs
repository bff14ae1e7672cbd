//! User subsets in lexicographic rank order.
//!
//! Users are numbered `1..=K`. The size-`m` subsets of `{1,…,K}` are ranked
//! `1..=C(K,m)` in lexicographic order of their sorted member lists, so
//! `{1,2} < {1,3} < {2,3}` for `K = 3, m = 2`. Every queue, schedule and
//! cache entry in the crate refers to subsets by this rank.

use crate::error::{Error, Result};

/// Practical ceiling on the user count: `C(20,10) = 184_756` subsets is the
/// largest single enumeration we materialize.
pub const MAX_USERS: usize = 20;

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// A ranked subset of users.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsetIndex {
    rank: usize,
    members: Vec<usize>,
}

impl SubsetIndex {
    /// 1-based lexicographic rank among subsets of the same size.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Sorted, 1-indexed members.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, user: usize) -> bool {
        self.members.binary_search(&user).is_ok()
    }

    /// Members with `user` removed; `user` need not be a member.
    pub fn without(&self, user: usize) -> Vec<usize> {
        self.members.iter().copied().filter(|&u| u != user).collect()
    }
}

impl std::fmt::Display for SubsetIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, m) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "}}")
    }
}

fn check_users(k: usize) -> Result<()> {
    if k == 0 || k > MAX_USERS {
        return Err(Error::invalid(format!(
            "user count {k} outside 1..={MAX_USERS}"
        )));
    }
    Ok(())
}

/// All size-`m` subsets of `{1,…,K}` in lexicographic order; element `i`
/// has rank `i + 1`.
pub fn enumerate_subsets(k: usize, m: usize) -> Result<Vec<SubsetIndex>> {
    check_users(k)?;
    if m > k {
        return Err(Error::invalid(format!("subset size {m} exceeds user count {k}")));
    }
    let total = binomial(k, m);
    let mut out = Vec::with_capacity(total);
    let mut current: Vec<usize> = (1..=m).collect();
    loop {
        out.push(SubsetIndex {
            rank: out.len() + 1,
            members: current.clone(),
        });
        // Advance to the lexicographic successor.
        let mut i = m;
        loop {
            if i == 0 {
                debug_assert_eq!(out.len(), total);
                return Ok(out);
            }
            i -= 1;
            if current[i] < k - (m - 1 - i) {
                current[i] += 1;
                for j in i + 1..m {
                    current[j] = current[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Rank of `subset` among the subsets of its size. Members may be given in
/// any order but must be distinct and within `1..=K`.
pub fn rank_of(subset: &[usize], k: usize) -> Result<SubsetIndex> {
    check_users(k)?;
    let mut members = subset.to_vec();
    members.sort_unstable();
    if let Some(&bad) = members.iter().find(|&&u| u == 0 || u > k) {
        return Err(Error::invalid(format!("user {bad} outside 1..={k}")));
    }
    if members.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("duplicate user in {subset:?}")));
    }
    // Count the subsets that precede `members` lexicographically.
    let m = members.len();
    let mut rank = 0;
    let mut prev = 0;
    for (i, &u) in members.iter().enumerate() {
        for smaller in prev + 1..u {
            rank += binomial(k - smaller, m - i - 1);
        }
        prev = u;
    }
    Ok(SubsetIndex {
        rank: rank + 1,
        members,
    })
}
