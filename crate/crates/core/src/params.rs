//! Scheme parameters and the bit-count rounding policy.

use crate::error::{Error, Result};
use crate::subsets::{binomial, MAX_USERS};

/// Parameters of one coded-caching instance.
///
/// `rate` is the message rate `R` and `cache_rate` the cache rate `M`, both
/// in bits per channel use; the blocklength is `n = coherence · blocks`.
/// Each file carries `file_bits` bits: `n·R` rounded down to a multiple of
/// `C(K,t)` so that it splits evenly into queues. The dropped remainder is
/// kept in `discarded_bits`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeParams {
    users: usize,
    t: usize,
    files: usize,
    rate: f64,
    cache_rate: f64,
    coherence: u64,
    blocks: u64,
    eps: f64,
    file_bits: u64,
    discarded_bits: f64,
}

impl SchemeParams {
    /// Builds parameters for a given message rate; the cache rate follows as
    /// `M = (t/K)·R·D`.
    pub fn new(
        users: usize,
        t: usize,
        files: usize,
        rate: f64,
        coherence: u64,
        blocks: u64,
        eps: f64,
    ) -> Result<Self> {
        if users == 0 || users > MAX_USERS {
            return Err(Error::invalid(format!("user count {users} outside 1..={MAX_USERS}")));
        }
        if t >= users {
            return Err(Error::invalid(format!("t = {t} must lie in 0..={}", users - 1)));
        }
        if files == 0 {
            return Err(Error::invalid("file count must be positive"));
        }
        if coherence == 0 || blocks == 0 {
            return Err(Error::invalid("coherence length and block count must be positive"));
        }
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("rate back-off eps = {eps} must be finite and >= 0")));
        }
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!(
                "message rate {rate} must be finite and >= 0 (eps too large?)"
            )));
        }
        let n = coherence * blocks;
        let queues = binomial(users, t) as u64;
        if n < queues {
            return Err(Error::invalid(format!(
                "blocklength {n} is smaller than the queue count C({users},{t}) = {queues}"
            )));
        }
        let raw = n as f64 * rate;
        let file_bits = (raw / queues as f64).floor() as u64 * queues;
        Ok(SchemeParams {
            users,
            t,
            files,
            rate,
            cache_rate: t as f64 / users as f64 * rate * files as f64,
            coherence,
            blocks,
            eps,
            file_bits,
            discarded_bits: raw - file_bits as f64,
        })
    }

    /// Derives the message rate from the conditional per-user rate
    /// `Ī = I(X;Y_k | S, k ∈ G)` (or its blockwise/time-shared counterpart):
    /// `R = (t+1)/(K−t)·Ī − ε`.
    pub fn derive(
        users: usize,
        t: usize,
        files: usize,
        coherence: u64,
        blocks: u64,
        eps: f64,
        conditional_rate: f64,
    ) -> Result<Self> {
        if t >= users {
            return Err(Error::invalid(format!("t = {t} must be below K = {users}")));
        }
        let rate = (t + 1) as f64 / (users - t) as f64 * conditional_rate - eps;
        Self::new(users, t, files, rate, coherence, blocks, eps)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn files(&self) -> usize {
        self.files
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn cache_rate(&self) -> f64 {
        self.cache_rate
    }

    /// `M/D`, the normalized cache size.
    pub fn normalized_cache(&self) -> f64 {
        self.cache_rate / self.files as f64
    }

    pub fn coherence(&self) -> u64 {
        self.coherence
    }

    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn blocklength(&self) -> u64 {
        self.coherence * self.blocks
    }

    /// Number of queues per file, `C(K,t)`.
    pub fn queue_count(&self) -> usize {
        binomial(self.users, self.t)
    }

    pub fn file_bits(&self) -> u64 {
        self.file_bits
    }

    pub fn queue_bits(&self) -> u64 {
        self.file_bits / self.queue_count() as u64
    }

    /// Bits of `n·R` that did not fit the `C(K,t)` divisibility constraint.
    pub fn discarded_bits(&self) -> f64 {
        self.discarded_bits
    }

    /// Bits cached at every receiver: `D·C(K−1,t−1)·queue_bits`.
    pub fn cached_bits_per_user(&self) -> u64 {
        if self.t == 0 {
            return 0;
        }
        self.files as u64 * binomial(self.users - 1, self.t - 1) as u64 * self.queue_bits()
    }

    /// Bits of a demanded file that are not in the demander's cache.
    pub fn uncached_bits_per_user(&self) -> u64 {
        self.file_bits - self.cached_bits_per_user() / self.files as u64
    }

    /// Budget reduction per channel use from the rate back-off,
    /// `ε·(K−t)/(t+1)`.
    pub fn budget_backoff(&self) -> f64 {
        self.eps * (self.users - self.t) as f64 / (self.t + 1) as f64
    }
}
