//! Per-block budgets and zero-padded XOR coding.

use crate::analytics::SubsetService;
use crate::error::{Error, Result};
use crate::placement::{Bits, BitsRef, CacheContent};
use crate::scheme::Scheme;
use crate::subsets::{rank_of, SubsetIndex};

/// Bits that `user` can be sent in one (sub-)block of `length` channel
/// uses: `⌊length·(I − backoff)⌋`, clamped at zero. `I` is the user's own
/// rate, or for blockwise delivery the weakest rate of the served set.
pub fn block_budget(scheme: Scheme, service: &SubsetService, user: usize, length: u64, backoff: f64) -> Result<u64> {
    let own = service
        .rate_of(user)
        .ok_or_else(|| Error::invalid(format!("user {user} is not in {}", service.subset)))?;
    let rate = if scheme.min_limited() { service.min_rate() } else { own };
    let bits = (length as f64 * (rate - backoff)).floor();
    Ok(if bits > 0.0 { bits as u64 } else { 0 })
}

/// Where a segment `W_{k,b}` was read from. Every field is computable by
/// all receivers from the demands, the state history and the budgets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentHeader {
    pub user: usize,
    pub file: usize,
    /// Rank of `G∖{user}` among size-`t` subsets.
    pub rank: usize,
    pub start: usize,
    pub len: usize,
}

/// XOR of `parts`, each right-padded with zeros to the longest length.
pub fn padded_xor<'a>(parts: impl IntoIterator<Item = &'a BitsRef>) -> Bits {
    let mut out = Bits::new();
    for p in parts {
        if p.len() > out.len() {
            out.resize(p.len(), false);
        }
        *out.get_mut(..p.len()).expect("resized") ^= p;
    }
    out
}

/// Queue that serves `user` when `subset` is active: `Q_{d_user, subset∖{user}}`.
pub fn queue_rank(subset: &SubsetIndex, user: usize, users: usize) -> Result<usize> {
    Ok(rank_of(&subset.without(user), users)?.rank())
}

/// Transmit side of one block: XOR of the retrieved segments.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBlock {
    pub payload: Bits,
    pub headers: Vec<SegmentHeader>,
    /// `W_{k,b}`, kept for decodability checks.
    pub segments: Vec<Bits>,
}

/// Builds the payload from already-retrieved segments.
pub fn encode_block(headers: Vec<SegmentHeader>, segments: Vec<Bits>) -> EncodedBlock {
    let payload = padded_xor(segments.iter().map(|s| s.as_bitslice()));
    EncodedBlock {
        payload,
        headers,
        segments,
    }
}

/// Receiver `user`'s estimate `Ŵ_{user,b}`: XOR the payload with the other
/// members' segments taken from its own cache, then keep the first
/// `len` bits. `Ok(None)` when `user` is not among the headers.
pub fn decode_block(user: usize, payload: &BitsRef, cache: &CacheContent, headers: &[SegmentHeader]) -> Result<Option<Bits>> {
    let Some(own) = headers.iter().find(|h| h.user == user) else {
        return Ok(None);
    };
    let mut side: Vec<&BitsRef> = Vec::with_capacity(headers.len());
    for h in headers.iter().filter(|h| h.user != user) {
        let q = cache.get(h.file, h.rank).ok_or_else(|| {
            Error::internal(format!(
                "receiver {user} lacks queue (file {}, rank {}) needed for user {}",
                h.file, h.rank, h.user
            ))
        })?;
        let seg = q.get(h.start..h.start + h.len).ok_or_else(|| {
            Error::internal(format!(
                "segment {}..{} outside cached queue of {} bits",
                h.start,
                h.start + h.len,
                q.len()
            ))
        })?;
        side.push(seg);
    }
    let known = padded_xor(side);
    if own.len > payload.len() {
        return Err(Error::internal("payload shorter than the receiver's segment"));
    }
    let mut out = payload[..own.len].to_bitvec();
    let overlap = known.len().min(own.len);
    *out.get_mut(..overlap).expect("in range") ^= &known[..overlap];
    Ok(Some(out))
}
