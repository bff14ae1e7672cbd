//! Common-random-number Monte Carlo over Rayleigh gain vectors.

use rayon::prelude::*;

use crate::channel::FadingModel;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, substream, Purpose};
use crate::scheme::Policy;
use crate::subsets::enumerate_subsets;

use super::waterfill::{power_from_inverse, root_from_inverse};

/// Samples per RNG stream and per reduction chunk. Fixed so that results do
/// not depend on the thread count.
const CHUNK: usize = 4096;

/// Relative power-constraint tolerance the calibration aims for.
pub const CALIBRATION_TOL: f64 = 1e-9;

const LAMBDA_MIN: f64 = 1e-8;
const LAMBDA_MAX: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            samples: 1_000_000,
            seed: 1,
        }
    }
}

/// How a block's gains are turned into a power level and a sum rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PowerRule {
    pub t: usize,
    pub policy: Policy,
    /// Waterfill on the weakest scheduled gain and serve everyone at its rate.
    pub min_limited: bool,
}

/// A fixed sample of gain vectors, stored as inverse gains `1/g` both in
/// user order and sorted ascending (strongest user first).
pub struct GainSamples {
    users: usize,
    inv: Vec<f64>,
    inv_sorted: Vec<f64>,
}

#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Per-sample accumulation targets.
#[derive(Default, Clone, Copy)]
struct Moments {
    power: Kahan,
    rate: Kahan,
    rate_sq: Kahan,
    kkt: f64,
}

impl GainSamples {
    pub fn draw(model: &FadingModel, samples: usize, seed: u64) -> Self {
        let users = model.users();
        let key = substream(seed, Purpose::Gains);
        let chunks = samples.div_ceil(CHUNK);
        let inv: Vec<f64> = (0..chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = stream_rng(key, c as u64);
                let n = CHUNK.min(samples - c * CHUNK);
                let mut out = Vec::with_capacity(n * users);
                for _ in 0..n {
                    for g in model.draw_gains(&mut rng) {
                        // Exp(1) draws are positive; guard the reciprocal anyway.
                        out.push(1.0 / g.max(f64::MIN_POSITIVE));
                    }
                }
                out.into_iter()
            })
            .collect();
        let mut inv_sorted = inv.clone();
        inv_sorted
            .par_chunks_mut(users)
            .for_each(|row| row.sort_by(|a, b| a.partial_cmp(b).unwrap()));
        GainSamples {
            users,
            inv,
            inv_sorted,
        }
    }

    pub fn len(&self) -> usize {
        self.inv.len() / self.users
    }

    pub fn is_empty(&self) -> bool {
        self.inv.is_empty()
    }

    pub fn users(&self) -> usize {
        self.users
    }

    fn reduce(&self, rule: &PowerRule, lambda: f64, want_rates: bool) -> Moments {
        let groups: Vec<Vec<usize>> = match rule.policy {
            Policy::Opportunistic => Vec::new(),
            Policy::TimeShared => enumerate_subsets(self.users, rule.t + 1)
                .expect("t validated by caller")
                .into_iter()
                .map(|s| s.members().iter().map(|u| u - 1).collect())
                .collect(),
        };
        let n = self.len();
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Moments> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut m = Moments::default();
                let mut buf = vec![0.0; rule.t + 1];
                for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    let (p, r, kkt) = match rule.policy {
                        Policy::Opportunistic => {
                            let row = &self.inv_sorted[i * self.users..i * self.users + rule.t + 1];
                            eval_group(row, rule.min_limited, lambda, want_rates)
                        }
                        Policy::TimeShared => {
                            let row = &self.inv[i * self.users..(i + 1) * self.users];
                            let w = 1.0 / groups.len() as f64;
                            let (mut p, mut r, mut kkt) = (0.0, 0.0, 0.0f64);
                            for g in &groups {
                                for (b, &u) in buf.iter_mut().zip(g) {
                                    *b = row[u];
                                }
                                let (gp, gr, gk) = eval_group(&buf, rule.min_limited, lambda, want_rates);
                                p += w * gp;
                                r += w * gr;
                                kkt = kkt.max(gk);
                            }
                            (p, r, kkt)
                        }
                    };
                    m.power.add(p);
                    if want_rates {
                        m.rate.add(r);
                        m.rate_sq.add(r * r);
                        m.kkt = m.kkt.max(kkt);
                    }
                }
                m
            })
            .collect();
        let mut total = Moments::default();
        for p in parts {
            total.power.add(p.power.sum);
            total.rate.add(p.rate.sum);
            total.rate_sq.add(p.rate_sq.sum);
            total.kkt = total.kkt.max(p.kkt);
        }
        total
    }

    /// Average power `E[P(h')]` at water level `λ`.
    pub fn mean_power(&self, rule: &PowerRule, lambda: f64) -> f64 {
        self.reduce(rule, lambda, false).power.sum / self.len() as f64
    }

    /// Finds `λ` with `E[P(h')] = P` and evaluates the resulting sum rate.
    pub fn calibrate(&self, rule: &PowerRule, power: f64) -> Result<WaterfillingSolution> {
        if self.is_empty() {
            return Err(Error::Calibration("no gain samples".into()));
        }
        if rule.t >= self.users {
            return Err(Error::invalid(format!("t = {} must be below K = {}", rule.t, self.users)));
        }
        let f = |u: f64| self.mean_power(rule, u.exp()) - power;
        let (mut lo, mut hi) = (LAMBDA_MIN.ln(), LAMBDA_MAX.ln());
        let (mut f_lo, mut f_hi) = (f(lo), f(hi));
        if !(f_lo > 0.0 && f_hi < 0.0) {
            return Err(Error::Calibration(format!(
                "power {power} not bracketed for lambda in [{LAMBDA_MIN:e}, {LAMBDA_MAX:e}]"
            )));
        }
        let tol = CALIBRATION_TOL * power;
        let mut evaluations = 2;
        let mut u = lo;
        let mut fu = f_lo;
        // Bisection in log-λ until the bracket is narrow, then Illinois.
        let mut side = 0i8;
        while evaluations < 400 {
            u = if hi - lo > 1.0 {
                0.5 * (lo + hi)
            } else {
                (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
            };
            if !(u > lo && u < hi) {
                u = 0.5 * (lo + hi);
            }
            fu = f(u);
            evaluations += 1;
            if fu.abs() <= tol || hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
            if fu > 0.0 {
                lo = u;
                f_lo = fu;
                if side == 1 {
                    f_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = u;
                f_hi = fu;
                if side == -1 {
                    f_lo *= 0.5;
                }
                side = -1;
            }
        }
        if fu.abs() > 1e-3 * power {
            return Err(Error::Calibration(format!(
                "power mismatch {fu:e} after {evaluations} evaluations"
            )));
        }
        let lambda = u.exp();
        let m = self.reduce(rule, lambda, true);
        let n = self.len() as f64;
        let mean = m.rate.sum / n;
        let var = (m.rate_sq.sum / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        let served = (self.users - rule.t) as f64;
        Ok(WaterfillingSolution {
            lambda,
            target_power: power,
            achieved_power: m.power.sum / n,
            rate: mean / served,
            stderr: (var / n).sqrt() / served,
            kkt_max_residual: m.kkt,
            samples: self.len(),
            evaluations,
        })
    }
}

/// Power, sum rate (bits) and stationarity residual for one served group
/// given its inverse gains.
fn eval_group(inv: &[f64], min_limited: bool, lambda: f64, want_rates: bool) -> (f64, f64, f64) {
    if min_limited {
        let weakest = inv.iter().copied().fold(0.0f64, f64::max);
        let x = 1.0 / lambda - weakest;
        let p = x.max(0.0);
        if !want_rates {
            return (p, 0.0, 0.0);
        }
        let kkt = if p > 0.0 { (1.0 / (x + weakest) - lambda).abs() } else { 0.0 };
        (p, inv.len() as f64 * (1.0 + p / weakest).log2(), kkt)
    } else {
        if !want_rates {
            return (power_from_inverse(inv, lambda), 0.0, 0.0);
        }
        let x = root_from_inverse(inv, lambda);
        let p = x.max(0.0);
        let kkt = if p > 0.0 {
            (inv.iter().map(|v| 1.0 / (x + v)).sum::<f64>() - lambda).abs()
        } else {
            0.0
        };
        let r = inv.iter().map(|v| (1.0 + p / v).log2()).sum();
        (p, r, kkt)
    }
}

/// Calibrated waterfilling policy and the rate it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillingSolution {
    pub lambda: f64,
    pub target_power: f64,
    pub achieved_power: f64,
    /// `R_t = E[block sum rate]/(K−t)` in bits per use.
    pub rate: f64,
    pub stderr: f64,
    /// Largest `|λ − Σ 1/(x + 1/g_k)|` over samples with positive power.
    pub kkt_max_residual: f64,
    pub samples: usize,
    pub evaluations: usize,
}

/// Draws `mc.samples` gain vectors and calibrates the water level for
/// `rule` against the model's power constraint.
pub fn calibrate_lambda(model: &FadingModel, rule: &PowerRule, mc: &McOptions) -> Result<WaterfillingSolution> {
    GainSamples::draw(model, mc.samples, mc.seed).calibrate(rule, model.power())
}
