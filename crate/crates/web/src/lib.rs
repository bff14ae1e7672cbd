//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a JSON string; on failure the JSON is
//! `{"error": "..."}`. The plain-Rust functions underneath are what the
//! native tests exercise.

use cachecast::analytics::{build_frontier, kkt_residual, rate_point, solve_waterfilling, McOptions, RateOracle};
use cachecast::channel::{ChannelModel, FadingModel};
use cachecast::delivery::{DeliveryRun, DemandVector};
use cachecast::{Policy, Result, Scheme, SchemeParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Serialize)]
pub struct Curve {
    pub scheme: Scheme,
    pub policy: Policy,
    /// `(M/D, R)` for t = 0..K−1.
    pub points: Vec<(f64, f64)>,
    /// Frontier polyline including the slope-1 extension.
    pub frontier: Vec<(f64, f64)>,
}

/// Rate-memory curves of the state-adaptive and blockwise schemes under both
/// policies on `users` Rayleigh-fading receivers.
pub fn frontier_curves(users: usize, power: f64, samples: usize, seed: u64) -> Result<Vec<Curve>> {
    let ch = ChannelModel::Fading(FadingModel::new(users, power)?);
    let mc = McOptions { samples, seed };
    let mut curves = Vec::new();
    for scheme in [Scheme::StateAdaptive, Scheme::Blockwise] {
        for policy in Policy::ALL {
            let points = (0..users)
                .map(|t| rate_point(&ch, scheme, policy, t, &mc).map(|p| (p.m_over_d, p.rate)))
                .collect::<Result<Vec<_>>>()?;
            curves.push(Curve {
                scheme,
                policy,
                points,
                frontier: Vec::new(),
            });
        }
    }
    let x_end = curves
        .iter()
        .filter_map(|c| c.points.last().map(|p| p.0))
        .fold(0.0, f64::max)
        + 2.0;
    for c in &mut curves {
        c.frontier = build_frontier(&c.points, true).polyline(x_end);
    }
    Ok(curves)
}

#[derive(Debug, Clone, Serialize)]
pub struct WaterfillView {
    /// Water level root `x`; the transmit power is `max(x, 0)`.
    pub x: f64,
    pub power: f64,
    pub kkt_residual: f64,
    /// `log2(1 + g_k·P)` per receiver.
    pub rates: Vec<f64>,
    /// `(λ, P(λ))` on a log grid around the requested `λ`.
    pub sweep: Vec<(f64, f64)>,
}

/// Power and rates for one gain vector served together at water level `λ`.
pub fn waterfill_view(gains: &[f64], lambda: f64) -> Result<WaterfillView> {
    let x = solve_waterfilling(gains, lambda)?;
    let power = x.max(0.0);
    let sweep = (0..=60)
        .map(|i| {
            let l = lambda * 10f64.powf((i as f64 - 30.0) / 15.0);
            solve_waterfilling(gains, l).map(|x| (l, x.max(0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WaterfillView {
        x,
        power,
        kkt_residual: if power > 0.0 { kkt_residual(gains, lambda, x) } else { 0.0 },
        rates: gains.iter().map(|g| (1.0 + g * power).log2()).collect(),
        sweep,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LatencyCurve {
    pub scheme: Scheme,
    pub rho: f64,
    /// Block indices at which `decoded` is sampled.
    pub blocks: Vec<u64>,
    /// Fraction of the needed bits decodable after each sampled block,
    /// averaged over receivers.
    pub decoded: Vec<f64>,
}

/// Cumulative decoded fraction over time for state-adaptive, blockwise and
/// ergodic delivery of one random library on `users` fading receivers.
pub fn latency_curves(
    users: usize,
    t: usize,
    power: f64,
    coherence: u64,
    blocks: u64,
    samples: usize,
    seed: u64,
) -> Result<Vec<LatencyCurve>> {
    let ch = ChannelModel::Fading(FadingModel::new(users, power)?);
    let mc = McOptions { samples, seed };
    let demands = DemandVector::distinct(users, users)?;
    let stride = blocks.div_ceil(200).max(1);
    let mut out = Vec::new();
    for scheme in Scheme::ALL {
        let power_rule = if scheme.min_limited() { Scheme::Blockwise } else { Scheme::StateAdaptive };
        let rate = rate_point(&ch, scheme, Policy::Opportunistic, t, &mc)?.rate;
        let eps = 0.01 * (t + 1) as f64 / (users - t) as f64;
        let params = SchemeParams::new(users, t, users, rate - eps, coherence, blocks, eps)?;
        let oracle = RateOracle::calibrate(&ch, power_rule, Policy::Opportunistic, t, &mc)?;
        let run = DeliveryRun {
            scheme,
            params: &params,
            oracle: &oracle,
            demands: &demands,
            seed,
            trial: 0,
            keep_transcript: true,
        }
        .run()?;
        let mut credited = vec![0u64; blocks as usize + 1];
        for r in &run.transcript {
            credited[r.credited_block as usize] += r.m;
        }
        let needed = (params.uncached_bits_per_user() * users as u64).max(1) as f64;
        let mut acc = 0u64;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for b in 1..=blocks {
            acc += credited[b as usize];
            if b % stride == 0 || b == blocks {
                xs.push(b);
                ys.push(acc as f64 / needed);
            }
        }
        out.push(LatencyCurve {
            scheme,
            rho: run.report.rho,
            blocks: xs,
            decoded: ys,
        });
    }
    Ok(out)
}

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

// Exports take `u32` so the page can pass plain JS numbers.
#[wasm_bindgen]
pub fn frontier(users: usize, power: f64, samples: usize, seed: u32) -> String {
    to_json(frontier_curves(users, power, samples, seed.into()))
}

#[wasm_bindgen]
pub fn waterfill(gains: &[f64], lambda: f64) -> String {
    to_json(waterfill_view(gains, lambda))
}

#[wasm_bindgen]
pub fn latency(users: usize, t: usize, power: f64, coherence: u32, blocks: u32, samples: usize, seed: u32) -> String {
    to_json(latency_curves(users, t, power, coherence.into(), blocks.into(), samples, seed.into()))
}
