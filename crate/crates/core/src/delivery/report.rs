use std::io::Write;

use serde::Serialize;

use super::{DeliveryRun, DemandVector};
use crate::scheme::{Policy, Scheme};

/// Summary of one delivery run.
///
/// Latency is measured per delivered useful bit: `l_bit` is the mean, over
/// receivers, of `T_s · Σ_b m_{k,b}·c_b / Σ_b m_{k,b}` where `c_b` is the
/// block at which block `b`'s bits become decodable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub scheme: Scheme,
    pub policy: Policy,
    pub t: usize,
    pub trial: u64,
    pub demands: Vec<usize>,
    pub blocks: u64,
    pub coherence: u64,
    /// Useful bits delivered to each receiver.
    pub delivered: Vec<u64>,
    /// Sum of budgets `μ_{k,b}` for each receiver.
    pub offered: Vec<u64>,
    /// Uncached bits each receiver needs.
    pub needed_bits: u64,
    /// Bits of the demanded file each receiver reconstructed correctly.
    pub recovered: Vec<u64>,
    pub residual_bits: u64,
    pub residual_fraction: f64,
    pub decode_failures: u64,
    pub transmissions: u64,
    pub l_bit: f64,
    pub rho: f64,
    /// Offered bits per receiver per channel use, and its standard error over blocks.
    pub offered_rate: f64,
    pub offered_rate_stderr: f64,
    pub delivered_rate: f64,
}

impl LatencyReport {
    #[allow(clippy::too_many_arguments)]
    pub(super) fn assemble(
        run: &DeliveryRun<'_>,
        delivered: Vec<u64>,
        offered: Vec<u64>,
        weighted: Vec<u128>,
        per_block_offered: &[f64],
        recovered: Vec<u64>,
        residual_bits: u64,
        decode_failures: u64,
        transmissions: u64,
    ) -> Self {
        let p = run.params;
        let users = p.users() as f64;
        let n = p.blocklength() as f64;
        let ts = p.coherence() as f64;
        let per_user: Vec<f64> = delivered
            .iter()
            .zip(&weighted)
            .filter(|(d, _)| **d > 0)
            .map(|(d, w)| ts * (*w as f64) / (*d as f64))
            .collect();
        let l_bit = if per_user.is_empty() {
            0.0
        } else {
            per_user.iter().sum::<f64>() / per_user.len() as f64
        };
        let (mean, se) = mean_stderr(per_block_offered);
        let needed = p.uncached_bits_per_user();
        LatencyReport {
            scheme: run.scheme,
            policy: run.oracle.policy(),
            t: p.t(),
            trial: run.trial,
            demands: run.demands.as_slice().to_vec(),
            blocks: p.blocks(),
            coherence: p.coherence(),
            delivered: delivered.clone(),
            offered,
            needed_bits: needed,
            recovered,
            residual_bits,
            residual_fraction: if needed == 0 {
                0.0
            } else {
                residual_bits as f64 / (users * needed as f64)
            },
            decode_failures,
            transmissions,
            l_bit,
            rho: l_bit / n,
            offered_rate: mean,
            offered_rate_stderr: se,
            delivered_rate: delivered.iter().sum::<u64>() as f64 / (users * n),
        }
    }

    /// Smallest per-receiver fraction of the needed bits recovered.
    pub fn min_recovered_fraction(&self) -> f64 {
        if self.needed_bits == 0 {
            return 1.0;
        }
        self.recovered.iter().map(|&r| r as f64 / self.needed_bits as f64).fold(1.0, f64::min)
    }

    /// Whether every receiver reconstructed its whole file.
    pub fn complete(&self) -> bool {
        self.recovered.iter().all(|&r| r == self.needed_bits)
    }
}

pub(crate) fn mean_stderr(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Latency statistics of one demand vector across trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemandSummary {
    pub demands: Vec<usize>,
    pub trials: u64,
    pub mean_l_bit: f64,
    pub mean_rho: f64,
    pub rho_stderr: f64,
    pub max_residual_fraction: f64,
    /// Smallest fraction of needed bits any receiver reconstructed.
    pub min_recovered_fraction: f64,
    pub decode_failures: u64,
    pub offered_rate: f64,
    pub offered_rate_stderr: f64,
}

/// Per-demand summaries plus the worst one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencySweep {
    pub summaries: Vec<DemandSummary>,
    /// Index into `summaries` of the largest mean `ρ̄` (first on ties).
    pub worst: usize,
    pub worst_rho: f64,
    pub worst_l_bit: f64,
    #[serde(skip)]
    pub reports: Vec<LatencyReport>,
}

impl LatencySweep {
    /// Groups `reports`, ordered by demand vector then trial, into summaries.
    pub fn from_reports(demand_set: &[DemandVector], trials: u64, reports: Vec<LatencyReport>) -> Self {
        let summaries: Vec<DemandSummary> = demand_set
            .iter()
            .enumerate()
            .map(|(i, dv)| {
                let chunk = &reports[i * trials as usize..(i + 1) * trials as usize];
                let rho: Vec<f64> = chunk.iter().map(|r| r.rho).collect();
                let l: Vec<f64> = chunk.iter().map(|r| r.l_bit).collect();
                let rate: Vec<f64> = chunk.iter().map(|r| r.offered_rate).collect();
                let (mean_rho, rho_stderr) = mean_stderr(&rho);
                let (rate_mean, rate_se_trials) = mean_stderr(&rate);
                // One trial: fall back to the within-run block standard error.
                let rate_se = if chunk.len() > 1 {
                    rate_se_trials
                } else {
                    chunk[0].offered_rate_stderr
                };
                DemandSummary {
                    demands: dv.as_slice().to_vec(),
                    trials,
                    mean_l_bit: mean_stderr(&l).0,
                    mean_rho,
                    rho_stderr,
                    max_residual_fraction: chunk.iter().map(|r| r.residual_fraction).fold(0.0, f64::max),
                    min_recovered_fraction: chunk.iter().map(|r| r.min_recovered_fraction()).fold(1.0, f64::min),
                    decode_failures: chunk.iter().map(|r| r.decode_failures).sum(),
                    offered_rate: rate_mean,
                    offered_rate_stderr: rate_se,
                }
            })
            .collect();
        let mut worst = 0;
        for (i, s) in summaries.iter().enumerate() {
            if s.mean_rho > summaries[worst].mean_rho {
                worst = i;
            }
        }
        LatencySweep {
            worst_rho: summaries[worst].mean_rho,
            worst_l_bit: summaries[worst].mean_l_bit,
            worst,
            summaries,
            reports,
        }
    }
}

/// Per-receiver, per-block delivery record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockRecord {
    pub trial: u64,
    pub block: u64,
    pub receiver: usize,
    pub state: String,
    pub schedule: String,
    pub mu: u64,
    pub m: u64,
    pub credited_block: u64,
}

/// `demand` indexes the demand vector within the run's demand set.
pub const TRANSCRIPT_HEADER: &str = "scheme,policy,t,demand,trial,block,receiver,state,schedule,mu,m,credited_block";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes records as CSV, header first.
pub fn write_transcript_csv<W: Write>(
    mut out: W,
    scheme: Scheme,
    policy: Policy,
    t: usize,
    demand: usize,
    rows: &[BlockRecord],
    header: bool,
) -> std::io::Result<()> {
    if header {
        writeln!(out, "{TRANSCRIPT_HEADER}")?;
    }
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            scheme,
            policy,
            t,
            demand,
            r.trial,
            r.block,
            r.receiver,
            csv_field(&r.state),
            csv_field(&r.schedule),
            r.mu,
            r.m,
            r.credited_block
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stderr_of_constant_is_zero() {
        assert_eq!(mean_stderr(&[2.0, 2.0, 2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("{1,2}"), "\"{1,2}\"");
        assert_eq!(csv_field("s1"), "s1");
    }
}
