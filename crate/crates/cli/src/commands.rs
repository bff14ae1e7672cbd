use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cachecast::analytics::{build_frontier, calibrate_lambda, rate_point, McOptions, PowerRule, RateOracle, RatePoint};
use cachecast::channel::{validate_symmetry, ChannelModel};
use cachecast::delivery::{write_transcript_csv, DeliveryOutcome, DeliveryRun, DemandVector, LatencySweep};
use cachecast::placement::{build_caches, split_files, FileLibrary};
use cachecast::subsets::binomial;
use cachecast::{Policy, Scheme, SchemeParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Experiment, SCHEMA};

/// Failure classes, mapped to exit codes by `main`.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Validation(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<cachecast::Error> for CliError {
    fn from(e: cachecast::Error) -> Self {
        match e {
            cachecast::Error::Internal(_) => CliError::Validation(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

/// Command-line overrides applied on top of the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub samples: Option<usize>,
    pub trials: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, exp: &mut Experiment) -> Result<(), CliError> {
        let run = &mut exp.config.run;
        if let Some(s) = self.seed {
            run.seed = s;
        }
        if let Some(n) = self.samples {
            if n == 0 {
                return Err(CliError::Config("--samples must be positive".into()));
            }
            run.samples = n;
        }
        if let Some(t) = self.trials {
            if t == 0 {
                return Err(CliError::Config("--trials must be at least 1".into()));
            }
            run.trials = t;
        }
        if let Some(o) = &self.out {
            run.out = Some(o.clone());
        }
        Ok(())
    }
}

fn out_dir(exp: &Experiment) -> PathBuf {
    exp.config
        .run
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("out").join(&exp.name))
}

fn write_out(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

fn mc(exp: &Experiment) -> McOptions {
    McOptions {
        samples: exp.config.run.samples,
        seed: exp.config.run.seed,
    }
}

/// Blockwise delivery uses the max-min power rule; the other schemes share
/// the joint waterfilling rule.
fn power_scheme(scheme: Scheme) -> Scheme {
    if scheme.min_limited() {
        Scheme::Blockwise
    } else {
        Scheme::StateAdaptive
    }
}

pub const POINTS_HEADER: &str = "scheme,policy,t,M_over_D,R,rho,stderr";
pub const FRONTIER_HEADER: &str = "scheme,policy,M_over_D,R,kind";

pub struct RatesOutput {
    pub points: Vec<RatePoint>,
    pub points_csv: String,
    pub frontier_csv: String,
}

pub fn compute_rates(exp: &Experiment) -> Result<RatesOutput, CliError> {
    let run = &exp.config.run;
    let mc = mc(exp);
    let jobs: Vec<(Scheme, Policy, usize)> = run
        .schemes
        .iter()
        .flat_map(|&s| run.policies.iter().flat_map(move |&p| exp.t_values.iter().map(move |&t| (s, p, t))))
        .collect();
    let points: Vec<RatePoint> = jobs
        .iter()
        .map(|&(s, p, t)| rate_point(&exp.channel, s, p, t, &mc))
        .collect::<Result<_, _>>()?;

    let mut points_csv = format!("{POINTS_HEADER}\n");
    for p in &points {
        writeln!(
            points_csv,
            "{},{},{},{},{},{},{}",
            p.scheme, p.policy, p.t, p.m_over_d, p.rate, p.rho, p.stderr
        )
        .unwrap();
    }

    let mut curves = Vec::new();
    for &s in &run.schemes {
        for &p in &run.policies {
            let pts: Vec<(f64, f64)> = points
                .iter()
                .filter(|q| q.scheme == s && q.policy == p)
                .map(|q| (q.m_over_d, q.rate))
                .collect();
            curves.push((s, p, build_frontier(&pts, true)));
        }
    }
    let x_end = curves
        .iter()
        .filter_map(|(_, _, f)| f.vertices.last().map(|v| v.0))
        .fold(0.0, f64::max)
        + 2.0;
    let mut frontier_csv = format!("{FRONTIER_HEADER}\n");
    for (s, p, f) in &curves {
        for v in &f.vertices {
            writeln!(frontier_csv, "{s},{p},{},{},vertex", v.0, v.1).unwrap();
        }
        if let Some(&end) = f.polyline(x_end).get(f.vertices.len()) {
            writeln!(frontier_csv, "{s},{p},{},{},ray", end.0, end.1).unwrap();
        }
    }
    Ok(RatesOutput {
        points,
        points_csv,
        frontier_csv,
    })
}

pub fn cmd_rates(exp: &Experiment) -> Result<(), CliError> {
    let out = compute_rates(exp)?;
    let dir = out_dir(exp);
    write_out(&dir, "points.csv", out.points_csv.as_bytes())?;
    write_out(&dir, "frontier.csv", out.frontier_csv.as_bytes())?;
    println!("{:<15} {:<14} {:>2} {:>10} {:>10} {:>5} {:>9}", "scheme", "policy", "t", "M/D", "R", "rho", "stderr");
    for p in &out.points {
        println!(
            "{:<15} {:<14} {:>2} {:>10.4} {:>10.4} {:>5.2} {:>9.2e}",
            p.scheme.as_str(),
            p.policy.as_str(),
            p.t,
            p.m_over_d,
            p.rate,
            p.rho,
            p.stderr
        );
    }
    println!("wrote {}/points.csv and frontier.csv", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SimulationEntry {
    pub scheme: Scheme,
    pub policy: Policy,
    pub t: usize,
    /// Analytic `R_t` and the file rate `R_t − ε` actually placed.
    pub rate: f64,
    pub file_rate: f64,
    pub eps: f64,
    pub m_over_d: f64,
    /// `(R_t − ε)(1 − t/K)`: per-user uncached bits per channel use.
    pub analytic_delivery_rate: f64,
    pub file_bits: u64,
    pub discarded_bits: f64,
    pub lambda: Option<f64>,
    pub sweep: LatencySweep,
    /// Normal-approximation 95% interval for the worst demand's mean `ρ̄`.
    pub rho_ci95: (f64, f64),
}

#[derive(Debug, Serialize)]
pub struct SimulationReport {
    pub schema: u32,
    pub config: String,
    pub seed: u64,
    pub users: usize,
    pub files: usize,
    pub coherence: u64,
    pub blocks: u64,
    pub trials: u64,
    pub samples: usize,
    pub runs: Vec<SimulationEntry>,
}

pub struct SimulationOutput {
    pub report: SimulationReport,
    pub report_json: String,
    pub transcript_csv: Option<String>,
}

pub fn simulate(exp: &Experiment) -> Result<SimulationOutput, CliError> {
    let run = &exp.config.run;
    let k = exp.users();
    let files = exp.files();
    let mc = mc(exp);
    let demand_set: Vec<DemandVector> = match &run.demands {
        Some(ds) => ds
            .iter()
            .map(|d| DemandVector::new(d.clone(), files))
            .collect::<Result<_, _>>()?,
        None => vec![DemandVector::distinct(k, files)?],
    };
    let mut runs = Vec::new();
    let mut transcript = run.transcript.then(|| format!("{}\n", cachecast::delivery::TRANSCRIPT_HEADER));
    for &scheme in &run.schemes {
        for &policy in &run.policies {
            for &t in &exp.t_values {
                let point = rate_point(&exp.channel, scheme, policy, t, &mc)?;
                let eps = exp.eps(t);
                let file_rate = point.rate - eps;
                let params = SchemeParams::new(k, t, files, file_rate, run.coherence, run.blocks, eps)?;
                let oracle = RateOracle::calibrate(&exp.channel, power_scheme(scheme), policy, t, &mc)?;
                let jobs: Vec<(usize, u64)> = (0..demand_set.len())
                    .flat_map(|i| (0..run.trials).map(move |tr| (i, tr)))
                    .collect();
                let outcomes: Vec<DeliveryOutcome> = jobs
                    .par_iter()
                    .map(|&(i, trial)| {
                        DeliveryRun {
                            scheme,
                            params: &params,
                            oracle: &oracle,
                            demands: &demand_set[i],
                            seed: run.seed,
                            trial,
                            keep_transcript: run.transcript,
                        }
                        .run()
                    })
                    .collect::<Result<_, _>>()?;
                if let Some(buf) = transcript.as_mut() {
                    for (&(i, _), o) in jobs.iter().zip(&outcomes) {
                        let mut bytes = Vec::new();
                        write_transcript_csv(&mut bytes, scheme, policy, t, i, &o.transcript, false)
                            .expect("writing to memory");
                        buf.push_str(std::str::from_utf8(&bytes).expect("ascii csv"));
                    }
                }
                let reports = outcomes.into_iter().map(|o| o.report).collect();
                let sweep = LatencySweep::from_reports(&demand_set, run.trials, reports);
                let worst = &sweep.summaries[sweep.worst];
                let half = 1.96 * worst.rho_stderr;
                runs.push(SimulationEntry {
                    scheme,
                    policy,
                    t,
                    rate: point.rate,
                    file_rate,
                    eps,
                    m_over_d: point.m_over_d,
                    analytic_delivery_rate: file_rate * (1.0 - t as f64 / k as f64),
                    file_bits: params.file_bits(),
                    discarded_bits: params.discarded_bits(),
                    lambda: oracle.lambda(),
                    rho_ci95: (worst.mean_rho - half, worst.mean_rho + half),
                    sweep,
                });
            }
        }
    }
    let report = SimulationReport {
        schema: SCHEMA,
        config: exp.name.clone(),
        seed: run.seed,
        users: k,
        files,
        coherence: run.coherence,
        blocks: run.blocks,
        trials: run.trials,
        samples: run.samples,
        runs,
    };
    let report_json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    Ok(SimulationOutput {
        report,
        report_json,
        transcript_csv: transcript,
    })
}

pub fn cmd_simulate(exp: &Experiment) -> Result<(), CliError> {
    let out = simulate(exp)?;
    let dir = out_dir(exp);
    write_out(&dir, "report.json", out.report_json.as_bytes())?;
    if let Some(t) = &out.transcript_csv {
        write_out(&dir, "transcript.csv", t.as_bytes())?;
    }
    println!(
        "{:<15} {:<14} {:>2} {:>9} {:>9} {:>8} {:>9} {:>8}",
        "scheme", "policy", "t", "offered", "R-M/D", "rho", "residual", "failures"
    );
    let mut failures = 0;
    for r in &out.report.runs {
        let w = &r.sweep.summaries[r.sweep.worst];
        let f: u64 = r.sweep.summaries.iter().map(|s| s.decode_failures).sum();
        failures += f;
        println!(
            "{:<15} {:<14} {:>2} {:>9.4} {:>9.4} {:>8.4} {:>9.4} {:>8}",
            r.scheme.as_str(),
            r.policy.as_str(),
            r.t,
            w.offered_rate,
            r.analytic_delivery_rate,
            w.mean_rho,
            w.max_residual_fraction,
            f
        );
    }
    println!("wrote {}/report.json", dir.display());
    if failures > 0 {
        return Err(CliError::Validation(format!("{failures} segments failed to decode")));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct CheckReport {
    pub schema: u32,
    pub config: String,
    pub pass: bool,
    pub items: Vec<CheckItem>,
}

const KKT_TOL: f64 = 1e-8;
const POWER_TOL: f64 = 1e-3;

pub fn check(exp: &Experiment) -> Result<CheckReport, CliError> {
    let mut items = Vec::new();
    let k = exp.users();
    match &exp.channel {
        ChannelModel::Discrete(ch) => {
            let rep = validate_symmetry(ch);
            items.push(CheckItem {
                name: "symmetry".into(),
                pass: rep.is_symmetric(),
                detail: match &rep.witness {
                    None => format!("{} states, every user permutation has a matching state permutation", ch.state_count()),
                    Some(w) => format!("no state permutation matches user permutation {w:?}"),
                },
            });
        }
        ChannelModel::Fading(m) => {
            let mc = mc(exp);
            for min_limited in [false, true] {
                for &policy in &exp.config.run.policies {
                    for &t in &exp.t_values {
                        let rule = PowerRule { t, policy, min_limited };
                        let sol = calibrate_lambda(m, &rule, &mc)?;
                        let gap = (sol.achieved_power - m.power()).abs();
                        let rule_name = if min_limited { "min-limited" } else { "joint" };
                        items.push(CheckItem {
                            name: format!("waterfilling {rule_name} {policy} t={t}"),
                            pass: sol.kkt_max_residual <= KKT_TOL && gap <= POWER_TOL * m.power(),
                            detail: format!(
                                "lambda {:.6e}, max KKT residual {:.2e}, |E[P]-P| {:.2e}",
                                sol.lambda, sol.kkt_max_residual, gap
                            ),
                        });
                    }
                }
            }
        }
    }
    for &t in &exp.t_values {
        let q = binomial(k, t) as u64;
        let files = exp.files();
        let params = SchemeParams::new(k, t, files, 1.0, q, 8, 0.0)?;
        let library = FileLibrary::random(files, params.file_bits(), exp.config.run.seed);
        let store = split_files(&library, &params)?;
        let caches = build_caches(&store);
        let per_user = if t == 0 { 0 } else { files * binomial(k - 1, t - 1) };
        let mut ok = true;
        for (i, c) in caches.iter().enumerate() {
            let user = i + 1;
            ok &= c.cached_bits() == params.cached_bits_per_user();
            ok &= c
                .queue_ids()
                .all(|(_, rank)| store.subsets()[rank - 1].contains(user));
            ok &= c.queue_ids().count() == per_user;
        }
        for d in 1..=files {
            ok &= store.reassemble(d).as_bitslice() == library.file(d);
            for g in store.subsets() {
                ok &= caches.iter().filter(|c| c.holds(d, g.rank())).count() == t;
            }
        }
        items.push(CheckItem {
            name: format!("placement t={t}"),
            pass: ok,
            detail: format!(
                "{q} queues per file, {} cached bits per user of {} per file",
                params.cached_bits_per_user(),
                params.file_bits()
            ),
        });
    }
    Ok(CheckReport {
        schema: SCHEMA,
        config: exp.name.clone(),
        pass: items.iter().all(|i| i.pass),
        items,
    })
}

pub fn cmd_check(exp: &Experiment) -> Result<(), CliError> {
    let rep = check(exp)?;
    for i in &rep.items {
        println!("[{}] {}: {}", if i.pass { "pass" } else { "FAIL" }, i.name, i.detail);
    }
    if exp.config.run.out.is_some() {
        let json = serde_json::to_string_pretty(&rep).expect("report serializes") + "\n";
        let dir = out_dir(exp);
        write_out(&dir, "check.json", json.as_bytes())?;
    }
    if rep.pass {
        Ok(())
    } else {
        let failed: Vec<&str> = rep.items.iter().filter(|i| !i.pass).map(|i| i.name.as_str()).collect();
        Err(CliError::Validation(failed.join(", ")))
    }
}
