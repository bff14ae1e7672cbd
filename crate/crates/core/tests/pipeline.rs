//! End-to-end runs on small discrete channels: placement, scheduling,
//! XOR delivery and decoding together.

use cachecast::analytics::rate_point;
use cachecast::channel::ChannelModel;
use cachecast::delivery::DeliveryRun;
use cachecast::{DemandVector, DiscreteStateChannel, McOptions, Policy, RateOracle, Scheme, SchemeParams};
use proptest::prelude::*;

fn rotations(profile: &[f64]) -> ChannelModel {
    ChannelModel::Discrete(DiscreteStateChannel::rotations_of(profile).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_delivered_bit_decodes(
        profile in prop::collection::vec(0.5f64..4.0, 2..=4),
        t_frac in 0.0f64..1.0,
        policy_ts in any::<bool>(),
        demands in prop::collection::vec(1usize..=3, 4),
        seed in any::<u64>(),
    ) {
        let k = profile.len();
        let t = ((t_frac * k as f64) as usize).min(k - 1);
        let policy = if policy_ts { Policy::TimeShared } else { Policy::Opportunistic };
        let ch = rotations(&profile);
        let mc = McOptions::default();
        let demands = DemandVector::new(demands[..k].to_vec(), 3).unwrap();
        for scheme in Scheme::ALL {
            let power_rule = if scheme.min_limited() { Scheme::Blockwise } else { Scheme::StateAdaptive };
            let rate = rate_point(&ch, scheme, policy, t, &mc).unwrap().rate;
            let eps = 0.05;
            let params = SchemeParams::new(k, t, 3, (rate - eps).max(0.0), 60, 120, eps).unwrap();
            let oracle = RateOracle::calibrate(&ch, power_rule, policy, t, &mc).unwrap();
            let out = DeliveryRun {
                scheme,
                params: &params,
                oracle: &oracle,
                demands: &demands,
                seed,
                trial: 0,
                keep_transcript: true,
            }
            .run()
            .unwrap();
            let r = &out.report;
            prop_assert_eq!(r.decode_failures, 0);
            prop_assert_eq!(out.transcript.len(), k * 120);
            for u in 0..k {
                prop_assert!(r.recovered[u] <= r.needed_bits);
                prop_assert!(r.delivered[u] <= r.offered[u]);
            }
            prop_assert!(r.rho >= 0.0 && r.rho <= 1.0 + 1e-12, "rho {}", r.rho);
            if scheme == Scheme::Ergodic && r.delivered.iter().any(|&d| d > 0) {
                prop_assert!((r.rho - 1.0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn same_seed_same_outcome_different_seed_differs() {
    let ch = rotations(&[3.0, 1.0, 0.5]);
    let mc = McOptions::default();
    let rate = rate_point(&ch, Scheme::Blockwise, Policy::Opportunistic, 1, &mc).unwrap().rate;
    let params = SchemeParams::new(3, 1, 3, rate - 0.02, 90, 300, 0.02).unwrap();
    let oracle = RateOracle::calibrate(&ch, Scheme::Blockwise, Policy::Opportunistic, 1, &mc).unwrap();
    let demands = DemandVector::distinct(3, 3).unwrap();
    let go = |seed| {
        DeliveryRun {
            scheme: Scheme::Blockwise,
            params: &params,
            oracle: &oracle,
            demands: &demands,
            seed,
            trial: 0,
            keep_transcript: true,
        }
        .run()
        .unwrap()
    };
    let (a, b, c) = (go(4), go(4), go(5));
    assert_eq!(a.report.delivered, b.report.delivered);
    assert_eq!(a.report.rho, b.report.rho);
    assert_ne!(
        a.transcript.iter().map(|r| r.state.clone()).collect::<Vec<_>>(),
        c.transcript.iter().map(|r| r.state.clone()).collect::<Vec<_>>()
    );
}
