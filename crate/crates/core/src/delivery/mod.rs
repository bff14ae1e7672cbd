//! Block-by-block delivery over a simulated channel.

mod coding;
mod report;

pub use coding::{block_budget, decode_block, encode_block, padded_xor, queue_rank, EncodedBlock, SegmentHeader};
pub use report::{write_transcript_csv, BlockRecord, DemandSummary, LatencyReport, LatencySweep, TRANSCRIPT_HEADER};

use rayon::prelude::*;
use serde::Serialize;

use crate::analytics::RateOracle;
use crate::error::{Error, Result};
use crate::params::SchemeParams;
use crate::placement::{build_caches, split_files, Bits, FileLibrary, Queue};
use crate::rng::{mix64, substream, Purpose};
use crate::scheme::Scheme;

/// File requested by each receiver, 1-indexed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(demands: Vec<usize>, files: usize) -> Result<Self> {
        if demands.is_empty() {
            return Err(Error::invalid("demand vector is empty"));
        }
        if let Some(&d) = demands.iter().find(|&&d| d == 0 || d > files) {
            return Err(Error::invalid(format!("demand {d} outside 1..={files}")));
        }
        Ok(DemandVector(demands))
    }

    /// `d_k = ((k-1) mod D) + 1`: pairwise distinct whenever `D ≥ K`.
    pub fn distinct(users: usize, files: usize) -> Result<Self> {
        if files == 0 {
            return Err(Error::invalid("library is empty"));
        }
        Self::new((0..users).map(|k| k % files + 1).collect(), files)
    }

    /// Everyone asks for file `d`.
    pub fn all_same(users: usize, d: usize, files: usize) -> Result<Self> {
        Self::new(vec![d; users], files)
    }

    /// Default worst-case search set: distinct demands and all-equal demands.
    pub fn default_set(users: usize, files: usize) -> Result<Vec<Self>> {
        let mut set = vec![Self::distinct(users, files)?];
        let same = Self::all_same(users, 1, files)?;
        if same != set[0] {
            set.push(same);
        }
        Ok(set)
    }

    pub fn users(&self) -> usize {
        self.0.len()
    }

    /// Demand of receiver `k` (1-indexed).
    pub fn get(&self, k: usize) -> usize {
        self.0[k - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl std::fmt::Display for DemandVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(" "))
    }
}

/// Root seed of one Monte Carlo trial.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    mix64(substream(seed, Purpose::Trials) ^ mix64(trial))
}

/// One delivery run: a library, a placement and `B` channel blocks.
#[derive(Debug, Clone)]
pub struct DeliveryRun<'a> {
    pub scheme: Scheme,
    pub params: &'a SchemeParams,
    pub oracle: &'a RateOracle,
    pub demands: &'a DemandVector,
    pub seed: u64,
    pub trial: u64,
    pub keep_transcript: bool,
}

#[derive(Debug, Clone)]
pub struct DeliveryOutcome {
    pub report: LatencyReport,
    pub transcript: Vec<BlockRecord>,
}

impl DeliveryRun<'_> {
    pub fn run(&self) -> Result<DeliveryOutcome> {
        let p = self.params;
        let users = p.users();
        let t = p.t();
        if self.demands.users() != users {
            return Err(Error::invalid(format!(
                "{} demands for {users} receivers",
                self.demands.users()
            )));
        }
        if self.demands.as_slice().iter().any(|&d| d > p.files()) {
            return Err(Error::invalid("demand outside the library"));
        }
        if self.oracle.t() != t || self.oracle.channel().users() != users {
            return Err(Error::invalid("rate oracle does not match the scheme parameters"));
        }

        let seed = trial_seed(self.seed, self.trial);
        let library = FileLibrary::random(p.files(), p.file_bits(), seed);
        let store = split_files(&library, p)?;
        let caches = build_caches(&store);

        // views[k-1][rank-1]: receiver k's private read cursor into Q_{d_k,𝒢}, 𝒢 ∌ k.
        let mut views: Vec<Vec<Option<Queue>>> = (1..=users)
            .map(|k| {
                store
                    .subsets()
                    .iter()
                    .map(|g| (!g.contains(k)).then(|| store.queue(self.demands.get(k), g.rank()).clone()))
                    .collect()
            })
            .collect();
        // Decoded segments per receiver and queue, in delivery order.
        let mut decoded: Vec<Vec<Bits>> = vec![vec![Bits::new(); store.subsets().len()]; users];

        let blocks = p.blocks();
        let ts = p.coherence();
        let backoff = p.budget_backoff();
        let mut delivered = vec![0u64; users];
        let mut offered = vec![0u64; users];
        let mut weighted = vec![0u128; users];
        let mut per_block_offered = Vec::with_capacity(blocks as usize);
        let mut decode_failures = 0u64;
        let mut transmissions = 0u64;
        let mut transcript = Vec::new();

        for b in 1..=blocks {
            let state = self.oracle.channel().sample_block_state(seed, b);
            let services = self.oracle.services(&state)?;
            let mut mu_b = vec![0u64; users];
            let mut m_b = vec![0u64; users];
            let mut labels = Vec::with_capacity(services.len());
            for svc in &services {
                labels.push(svc.subset.to_string());
                let length = ts / svc.share as u64;
                let mut headers = Vec::with_capacity(svc.subset.len());
                let mut segments = Vec::with_capacity(svc.subset.len());
                for &k in svc.subset.members() {
                    let mu = block_budget(self.scheme, svc, k, length, backoff)?;
                    let rank = queue_rank(&svc.subset, k, users)?;
                    let q = views[k - 1][rank - 1]
                        .as_mut()
                        .ok_or_else(|| Error::internal(format!("receiver {k} caches its own queue {rank}")))?;
                    let start = q.cursor();
                    let seg = q.pop(usize::try_from(mu).unwrap_or(usize::MAX));
                    mu_b[k - 1] += mu;
                    m_b[k - 1] += seg.len() as u64;
                    headers.push(SegmentHeader {
                        user: k,
                        file: self.demands.get(k),
                        rank,
                        start,
                        len: seg.len(),
                    });
                    segments.push(seg);
                }
                let enc = encode_block(headers, segments);
                let capacity = length as f64 * (svc.max_rate() - backoff).max(0.0);
                if enc.payload.len() as f64 > capacity.floor() + 0.5 {
                    return Err(Error::internal(format!(
                        "block {b}: payload of {} bits exceeds the {capacity:.1}-bit link",
                        enc.payload.len()
                    )));
                }
                if !enc.payload.is_empty() {
                    transmissions += 1;
                }
                for (h, sent) in enc.headers.iter().zip(&enc.segments) {
                    let est = decode_block(h.user, &enc.payload, &caches[h.user - 1], &enc.headers)?
                        .ok_or_else(|| Error::internal("scheduled receiver produced no estimate"))?;
                    if &est != sent {
                        decode_failures += 1;
                    }
                    decoded[h.user - 1][h.rank - 1].extend_from_bitslice(&est);
                }
            }

            let credit = match self.scheme {
                Scheme::Ergodic => blocks,
                _ => b,
            };
            for k in 0..users {
                delivered[k] += m_b[k];
                offered[k] += mu_b[k];
                weighted[k] += u128::from(m_b[k]) * u128::from(credit);
            }
            per_block_offered.push(mu_b.iter().sum::<u64>() as f64 / (users as f64 * ts as f64));
            if self.keep_transcript {
                let state_label = self.oracle.channel().describe_state(&state);
                let schedule = labels.join("|");
                for k in 0..users {
                    transcript.push(BlockRecord {
                        trial: self.trial,
                        block: b,
                        receiver: k + 1,
                        state: state_label.clone(),
                        schedule: schedule.clone(),
                        mu: mu_b[k],
                        m: m_b[k],
                        credited_block: credit,
                    });
                }
            }
        }

        // Reassemble each receiver's file from cache plus decoded bits.
        let mut recovered = vec![0u64; users];
        for k in 1..=users {
            let d = self.demands.get(k);
            let mut ok = 0u64;
            for g in store.subsets() {
                let truth = store.queue(d, g.rank()).bits();
                if g.contains(k) {
                    if caches[k - 1].get(d, g.rank()) != Some(truth) {
                        return Err(Error::internal(format!("receiver {k} cache disagrees with queue {g}")));
                    }
                } else {
                    let got = &decoded[k - 1][g.rank() - 1];
                    ok += got.iter().zip(truth.iter()).take_while(|(a, b)| **a == **b).count() as u64;
                }
            }
            recovered[k - 1] = ok;
        }
        let residual: u64 = views.iter().flatten().flatten().map(|q| q.remaining() as u64).sum();

        let report = LatencyReport::assemble(
            self,
            delivered,
            offered,
            weighted,
            &per_block_offered,
            recovered,
            residual,
            decode_failures,
            transmissions,
        );
        Ok(DeliveryOutcome { report, transcript })
    }
}

/// Runs every `(demand, trial)` pair, in parallel, and summarizes the worst
/// demand vector by mean `ρ̄`. Results do not depend on the thread count.
pub fn latency_sweep(
    scheme: Scheme,
    params: &SchemeParams,
    oracle: &RateOracle,
    demand_set: &[DemandVector],
    trials: u64,
    seed: u64,
) -> Result<LatencySweep> {
    if demand_set.is_empty() || trials == 0 {
        return Err(Error::invalid("latency sweep needs at least one demand vector and one trial"));
    }
    let jobs: Vec<(usize, u64)> = (0..demand_set.len())
        .flat_map(|i| (0..trials).map(move |tr| (i, tr)))
        .collect();
    let reports: Vec<LatencyReport> = jobs
        .par_iter()
        .map(|&(i, trial)| {
            DeliveryRun {
                scheme,
                params,
                oracle,
                demands: &demand_set[i],
                seed,
                trial,
                keep_transcript: false,
            }
            .run()
            .map(|o| o.report)
        })
        .collect::<Result<_>>()?;
    Ok(LatencySweep::from_reports(demand_set, trials, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::{rate_point, McOptions};
    use crate::channel::{ChannelModel, DiscreteStateChannel, FadingModel};
    use crate::scheme::Policy;

    fn constant_fixture(scheme: Scheme, policy: Policy, blocks: u64) -> (SchemeParams, RateOracle) {
        // K=3, t=2, every user at 2 bits/use: R = 3·2 = 6, μ = 200 per block.
        let ch = ChannelModel::Discrete(DiscreteStateChannel::uniform(3, 2.0).unwrap());
        let mc = McOptions::default();
        let r = rate_point(&ch, scheme, policy, 2, &mc).unwrap().rate;
        assert!((r - 6.0).abs() < 1e-12);
        let p = SchemeParams::new(3, 2, 3, r, 100, blocks, 0.0).unwrap();
        let o = RateOracle::calibrate(&ch, scheme, policy, 2, &mc).unwrap();
        (p, o)
    }

    fn run(scheme: Scheme, p: &SchemeParams, o: &RateOracle, d: &DemandVector, seed: u64) -> DeliveryOutcome {
        DeliveryRun {
            scheme,
            params: p,
            oracle: o,
            demands: d,
            seed,
            trial: 0,
            keep_transcript: true,
        }
        .run()
        .unwrap()
    }

    #[test]
    fn constant_channel_closed_form_latency() {
        let blocks = 50;
        for scheme in Scheme::ALL {
            let (p, o) = constant_fixture(scheme, Policy::Opportunistic, blocks);
            let d = DemandVector::distinct(3, 3).unwrap();
            let out = run(scheme, &p, &o, &d, 11);
            let r = &out.report;
            assert!(r.complete(), "{scheme}");
            assert_eq!(r.residual_bits, 0);
            assert_eq!(r.decode_failures, 0);
            assert_eq!(r.delivered, vec![200 * blocks; 3]);
            let expected = match scheme {
                Scheme::Ergodic => 1.0,
                _ => (blocks + 1) as f64 / (2 * blocks) as f64,
            };
            assert!((r.rho - expected).abs() < 1e-12, "{scheme}: {}", r.rho);
            assert_eq!(out.transcript.len(), 3 * blocks as usize);
        }
    }

    #[test]
    fn time_shared_constant_channel_matches() {
        let (p, o) = constant_fixture(Scheme::StateAdaptive, Policy::TimeShared, 40);
        let d = DemandVector::distinct(3, 3).unwrap();
        let r = run(Scheme::StateAdaptive, &p, &o, &d, 5).report;
        assert!(r.complete());
        assert!((r.rho - 41.0 / 80.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_demands_are_decodable() {
        let (p, o) = constant_fixture(Scheme::StateAdaptive, Policy::Opportunistic, 10);
        for d in DemandVector::default_set(3, 3).unwrap() {
            let r = run(Scheme::StateAdaptive, &p, &o, &d, 2).report;
            assert!(r.complete(), "{d}");
            assert_eq!(r.decode_failures, 0);
        }
    }

    #[test]
    fn fading_run_decodes_every_segment() {
        let ch = ChannelModel::Fading(FadingModel::new(3, 4.0).unwrap());
        let mc = McOptions { samples: 50_000, seed: 3 };
        for (scheme, t) in [(Scheme::StateAdaptive, 1), (Scheme::Blockwise, 2), (Scheme::Ergodic, 0)] {
            let rp = rate_point(&ch, scheme, Policy::Opportunistic, t, &mc).unwrap();
            let p = SchemeParams::new(3, t, 3, rp.rate, 200, 400, 0.0).unwrap();
            let o = RateOracle::calibrate(&ch, scheme, Policy::Opportunistic, t, &mc).unwrap();
            let d = DemandVector::distinct(3, 3).unwrap();
            let r = run(scheme, &p, &o, &d, 8).report;
            assert_eq!(r.decode_failures, 0);
            assert!(r.transmissions > 0);
            // Everything delivered is correct, in order.
            for k in 0..3 {
                assert_eq!(r.recovered[k], r.delivered[k]);
            }
            assert!(r.residual_fraction < 0.1, "{scheme} t={t}: {}", r.residual_fraction);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let ch = ChannelModel::Discrete(DiscreteStateChannel::rotations_of(&[2.0, 1.0, 0.5]).unwrap());
        let mc = McOptions::default();
        let o = RateOracle::calibrate(&ch, Scheme::StateAdaptive, Policy::Opportunistic, 1, &mc).unwrap();
        let rp = rate_point(&ch, Scheme::StateAdaptive, Policy::Opportunistic, 1, &mc).unwrap();
        let p = SchemeParams::new(3, 1, 3, rp.rate, 30, 200, 0.0).unwrap();
        let d = DemandVector::distinct(3, 3).unwrap();
        let a = run(Scheme::StateAdaptive, &p, &o, &d, 9);
        let b = run(Scheme::StateAdaptive, &p, &o, &d, 9);
        assert_eq!(a.report, b.report);
        assert_eq!(a.transcript, b.transcript);
        let c = run(Scheme::StateAdaptive, &p, &o, &d, 10);
        assert_ne!(a.transcript, c.transcript);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let (p, o) = constant_fixture(Scheme::StateAdaptive, Policy::Opportunistic, 10);
        let d = DemandVector::new(vec![1, 2], 3).unwrap();
        let err = DeliveryRun {
            scheme: Scheme::StateAdaptive,
            params: &p,
            oracle: &o,
            demands: &d,
            seed: 1,
            trial: 0,
            keep_transcript: false,
        }
        .run();
        assert!(err.is_err());
        assert!(DemandVector::new(vec![0, 1], 3).is_err());
        assert!(DemandVector::new(vec![4], 3).is_err());
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let ch = ChannelModel::Discrete(DiscreteStateChannel::rotations_of(&[2.0, 1.0, 0.5]).unwrap());
        let mc = McOptions::default();
        let o = RateOracle::calibrate(&ch, Scheme::Blockwise, Policy::Opportunistic, 1, &mc).unwrap();
        let rp = rate_point(&ch, Scheme::Blockwise, Policy::Opportunistic, 1, &mc).unwrap();
        let p = SchemeParams::new(3, 1, 3, rp.rate, 30, 100, 0.0).unwrap();
        let set = DemandVector::default_set(3, 3).unwrap();
        let a = latency_sweep(Scheme::Blockwise, &p, &o, &set, 4, 1).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| latency_sweep(Scheme::Blockwise, &p, &o, &set, 4, 1).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.summaries.len(), 2);
    }
}
