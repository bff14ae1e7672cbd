//! Cache placement: queue split and receiver cache contents.
//!
//! File `d` is cut into `C(K,t)` equal contiguous segments; segment `ℓ`
//! becomes queue `Q_{d,𝒢_ℓ}` where `𝒢_ℓ` is the size-`t` subset of rank
//! `ℓ`. Receiver `k` stores every queue whose subset contains `k`, so each
//! queue lives in exactly `t` caches and the placement ignores both demands
//! and channel states.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use bitvec::prelude::*;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::params::SchemeParams;
use crate::rng::{stream_rng, substream, Purpose};
use crate::subsets::{enumerate_subsets, SubsetIndex};

pub type Bits = BitVec<u32, Lsb0>;
pub type BitsRef = BitSlice<u32, Lsb0>;

/// `D` equal-length random files, reproducible from a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FileLibrary {
    files: Vec<Bits>,
}

impl FileLibrary {
    pub fn random(files: usize, bits: u64, seed: u64) -> Self {
        let key = substream(seed, Purpose::Files);
        let files = (0..files)
            .map(|d| {
                let mut rng = stream_rng(key, d as u64);
                let words = bits.div_ceil(32) as usize;
                let mut raw = vec![0u32; words];
                for w in &mut raw {
                    *w = rng.next_u32();
                }
                let mut v = Bits::from_vec(raw);
                v.truncate(bits as usize);
                v
            })
            .collect();
        FileLibrary { files }
    }

    pub fn from_files(files: Vec<Bits>) -> Result<Self> {
        if files.is_empty() {
            return Err(Error::invalid("library needs at least one file"));
        }
        if files.iter().any(|f| f.len() != files[0].len()) {
            return Err(Error::invalid("all files must have equal length"));
        }
        Ok(FileLibrary { files })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// File `d` (1-indexed).
    pub fn file(&self, d: usize) -> &BitsRef {
        &self.files[d - 1]
    }

    pub fn file_bits(&self) -> usize {
        self.files.first().map_or(0, |f| f.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Queue {
    bits: Bits,
    cursor: usize,
}

impl Queue {
    pub fn bits(&self) -> &BitsRef {
        &self.bits
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    /// Removes up to `max` bits from the front.
    pub fn pop(&mut self, max: usize) -> Bits {
        let take = max.min(self.remaining());
        let out = self.bits[self.cursor..self.cursor + take].to_bitvec();
        self.cursor += take;
        out
    }
}

/// The per-file queues `Q_{d,𝒢}` with their read cursors.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueStore {
    users: usize,
    subsets: Vec<SubsetIndex>,
    // queues[d-1][rank-1]
    queues: Vec<Vec<Queue>>,
}

impl QueueStore {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn files(&self) -> usize {
        self.queues.len()
    }

    /// The size-`t` subsets labelling the queues, in rank order.
    pub fn subsets(&self) -> &[SubsetIndex] {
        &self.subsets
    }

    pub fn queue(&self, d: usize, rank: usize) -> &Queue {
        &self.queues[d - 1][rank - 1]
    }

    pub fn queue_mut(&mut self, d: usize, rank: usize) -> &mut Queue {
        &mut self.queues[d - 1][rank - 1]
    }

    /// Concatenation of file `d`'s queues in rank order.
    pub fn reassemble(&self, d: usize) -> Bits {
        let mut out = Bits::new();
        for q in &self.queues[d - 1] {
            out.extend_from_bitslice(&q.bits);
        }
        out
    }

    /// Bits still waiting in all queues.
    pub fn residual_bits(&self) -> u64 {
        self.queues
            .iter()
            .flatten()
            .map(|q| q.remaining() as u64)
            .sum()
    }

    /// Structured text dump: one line per queue with its receivers.
    pub fn layout(&self) -> String {
        let mut out = String::from("file,rank,subset,bits,cursor,cached_at\n");
        for (d, per_file) in self.queues.iter().enumerate() {
            for (sub, q) in self.subsets.iter().zip(per_file) {
                let holders: Vec<String> = sub.members().iter().map(|u| u.to_string()).collect();
                let _ = writeln!(
                    out,
                    "{},{},\"{}\",{},{},{}",
                    d + 1,
                    sub.rank(),
                    sub,
                    q.bits.len(),
                    q.cursor,
                    holders.join(" ")
                );
            }
        }
        out
    }
}

/// Splits every file into `C(K,t)` contiguous queues of equal length.
pub fn split_files(library: &FileLibrary, params: &SchemeParams) -> Result<QueueStore> {
    let subsets = enumerate_subsets(params.users(), params.t())?;
    let count = subsets.len();
    let len = library.file_bits();
    if len % count != 0 {
        return Err(Error::internal(format!(
            "file length {len} is not divisible by C({},{}) = {count}",
            params.users(),
            params.t()
        )));
    }
    if library.len() != params.files() {
        return Err(Error::invalid(format!(
            "library holds {} files, parameters expect {}",
            library.len(),
            params.files()
        )));
    }
    let seg = len / count;
    let queues = (1..=library.len())
        .map(|d| {
            let file = library.file(d);
            (0..count)
                .map(|l| Queue {
                    bits: file[l * seg..(l + 1) * seg].to_bitvec(),
                    cursor: 0,
                })
                .collect()
        })
        .collect();
    Ok(QueueStore {
        users: params.users(),
        subsets,
        queues,
    })
}

/// Receiver `k`'s cache: a full copy of every queue `(d, 𝒢)` with `k ∈ 𝒢`.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheContent {
    user: usize,
    entries: BTreeMap<(usize, usize), Bits>,
}

impl CacheContent {
    pub fn user(&self) -> usize {
        self.user
    }

    /// Cached copy of queue `(d, rank)`, if this receiver holds it.
    pub fn get(&self, d: usize, rank: usize) -> Option<&BitsRef> {
        self.entries.get(&(d, rank)).map(|b| b.as_bitslice())
    }

    pub fn holds(&self, d: usize, rank: usize) -> bool {
        self.entries.contains_key(&(d, rank))
    }

    /// Queue ids `(file, rank)` held.
    pub fn queue_ids(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.entries.keys().copied()
    }

    pub fn cached_bits(&self) -> u64 {
        self.entries.values().map(|b| b.len() as u64).sum()
    }
}

/// Builds all `K` receiver caches from freshly split queues.
pub fn build_caches(queues: &QueueStore) -> Vec<CacheContent> {
    (1..=queues.users)
        .map(|k| {
            let mut entries = BTreeMap::new();
            for d in 1..=queues.files() {
                for sub in queues.subsets.iter().filter(|s| s.contains(k)) {
                    entries.insert((d, sub.rank()), queues.queue(d, sub.rank()).bits.clone());
                }
            }
            CacheContent { user: k, entries }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits(s: &str) -> Bits {
        s.chars().map(|c| c == '1').collect()
    }

    #[test]
    fn contiguous_split_k3_t1() {
        let lib = FileLibrary::from_files(vec![bits("101100111")]).unwrap();
        let p = SchemeParams::new(3, 1, 1, 3.0, 3, 1, 0.0).unwrap();
        assert_eq!(p.file_bits(), 9);
        let q = split_files(&lib, &p).unwrap();
        assert_eq!(q.queue(1, 1).bits(), bits("101").as_bitslice());
        assert_eq!(q.queue(1, 2).bits(), bits("100").as_bitslice());
        assert_eq!(q.queue(1, 3).bits(), bits("111").as_bitslice());
        assert_eq!(q.subsets()[2].members(), &[3]);
    }

    #[test]
    fn t0_is_one_queue() {
        let lib = FileLibrary::random(2, 40, 1);
        let p = SchemeParams::new(3, 0, 2, 4.0, 10, 1, 0.0).unwrap();
        let q = split_files(&lib, &p).unwrap();
        assert_eq!(q.subsets().len(), 1);
        assert_eq!(q.queue(2, 1).bits(), lib.file(2));
        let caches = build_caches(&q);
        assert!(caches.iter().all(|c| c.cached_bits() == 0));
    }

    #[test]
    fn k4_t2_six_queues() {
        let lib = FileLibrary::random(1, 60, 3);
        let p = SchemeParams::new(4, 2, 1, 6.0, 10, 1, 0.0).unwrap();
        let q = split_files(&lib, &p).unwrap();
        assert_eq!(q.subsets().len(), 6);
        for r in 1..=6 {
            assert_eq!(q.queue(1, r).bits().len(), 10);
        }
    }

    #[test]
    fn indivisible_length_is_internal_error() {
        let lib = FileLibrary::random(1, 10, 3);
        let p = SchemeParams::new(3, 1, 1, 1.0, 9, 1, 0.0).unwrap();
        assert!(matches!(split_files(&lib, &p), Err(Error::Internal(_))));
    }

    #[test]
    fn membership_examples() {
        let lib = FileLibrary::random(1, 30, 3);
        let p = SchemeParams::new(3, 1, 1, 3.0, 10, 1, 0.0).unwrap();
        let caches = build_caches(&split_files(&lib, &p).unwrap());
        assert_eq!(caches[0].queue_ids().collect::<Vec<_>>(), vec![(1, 1)]);

        let p = SchemeParams::new(3, 2, 1, 3.0, 10, 1, 0.0).unwrap();
        let caches = build_caches(&split_files(&lib, &p).unwrap());
        // ranks of {1,2} and {1,3}
        assert_eq!(caches[0].queue_ids().collect::<Vec<_>>(), vec![(1, 1), (1, 2)]);
    }

    #[test]
    fn pop_advances_cursor() {
        let lib = FileLibrary::from_files(vec![bits("110101")]).unwrap();
        let p = SchemeParams::new(2, 0, 1, 6.0, 1, 1, 0.0).unwrap();
        let mut q = split_files(&lib, &p).unwrap();
        assert_eq!(q.queue_mut(1, 1).pop(4), bits("1101"));
        assert_eq!(q.queue_mut(1, 1).pop(4), bits("01"));
        assert!(q.queue_mut(1, 1).pop(4).is_empty());
        assert_eq!(q.residual_bits(), 0);
        assert!(q.layout().contains("1,1,\"{}\",6,6,"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn placement_invariants(k in 1usize..=5, t_frac in 0.0f64..1.0, files in 1usize..4, len in 1u64..40, seed: u64) {
            let t = ((k as f64) * t_frac) as usize;
            let p = SchemeParams::new(k, t, files, len as f64, 10, 1, 0.0).unwrap();
            let lib = FileLibrary::random(files, p.file_bits(), seed);
            let q = split_files(&lib, &p).unwrap();
            for d in 1..=files {
                let whole = q.reassemble(d);
                prop_assert_eq!(whole.as_bitslice(), lib.file(d));
            }
            let caches = build_caches(&q);
            for c in &caches {
                for sub in q.subsets() {
                    for d in 1..=files {
                        prop_assert_eq!(c.holds(d, sub.rank()), sub.contains(c.user()));
                    }
                }
                prop_assert_eq!(c.cached_bits() * k as u64, (t * files) as u64 * p.file_bits());
                prop_assert_eq!(c.cached_bits(), p.cached_bits_per_user());
            }
            for sub in q.subsets() {
                let holders = caches.iter().filter(|c| c.holds(1, sub.rank())).count();
                prop_assert_eq!(holders, t);
            }
        }
    }
}
