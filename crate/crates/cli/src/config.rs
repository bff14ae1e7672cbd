use std::fmt;
use std::path::{Path, PathBuf};

use cachecast::channel::{ChannelModel, DiscreteState, DiscreteStateChannel, FadingModel};
use cachecast::{Policy, Scheme};
use serde::{Deserialize, Deserializer, Serialize};

pub const SCHEMA: u32 = 1;

/// Configs shipped with the binary, addressable by name.
const BUNDLED: &[(&str, &str)] = &[
    ("fig1", include_str!("../../../configs/fig1.toml")),
    ("two-state", include_str!("../../../configs/two-state.toml")),
    ("asymmetric", include_str!("../../../configs/asymmetric.toml")),
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub channel: ChannelSpec,
    #[serde(default)]
    pub run: RunSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Fading {
        users: usize,
        power: f64,
    },
    /// Either `table` (a path, relative to the config file) or inline
    /// `users` plus `[[channel.state]]` entries.
    Discrete {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        table: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        users: Option<usize>,
        #[serde(default, rename = "state", skip_serializing_if = "Vec::is_empty")]
        states: Vec<DiscreteState>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum TSelect {
    All,
    List(Vec<usize>),
}

impl<'de> Deserialize<'de> for TSelect {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            List(Vec<usize>),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "all" => Ok(TSelect::All),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("t must be \"all\" or a list, got {w:?}"))),
            Raw::List(v) => Ok(TSelect::List(v)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(default = "default_t")]
    pub t: TSelect,
    #[serde(default = "default_files")]
    pub files: usize,
    #[serde(default = "default_coherence")]
    pub coherence: u64,
    #[serde(default = "default_blocks")]
    pub blocks: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Rate back-off for simulations. When absent, `0.01·(t+1)/(K−t)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Demand vectors to simulate; default is the all-distinct vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demands: Option<Vec<Vec<usize>>>,
    #[serde(default = "default_true")]
    pub transcript: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}
fn default_policies() -> Vec<Policy> {
    Policy::ALL.to_vec()
}
fn default_t() -> TSelect {
    TSelect::All
}
fn default_files() -> usize {
    0
}
fn default_coherence() -> u64 {
    100
}
fn default_blocks() -> u64 {
    10_000
}
fn default_trials() -> u64 {
    1
}
fn default_seed() -> u64 {
    1
}
fn default_samples() -> usize {
    1_000_000
}
fn default_true() -> bool {
    true
}

impl Default for RunSpec {
    fn default() -> Self {
        toml::from_str("").expect("all run fields have defaults")
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<cachecast::Error> for ConfigError {
    fn from(e: cachecast::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// A parsed config with its channel resolved.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub config: ExperimentConfig,
    pub channel: ChannelModel,
    pub t_values: Vec<usize>,
}

impl Experiment {
    pub fn users(&self) -> usize {
        self.channel.users()
    }

    pub fn files(&self) -> usize {
        if self.config.run.files == 0 {
            self.users()
        } else {
            self.config.run.files
        }
    }

    /// Back-off used when simulating parameter `t`.
    pub fn eps(&self, t: usize) -> f64 {
        let k = self.users();
        self.config
            .run
            .eps
            .unwrap_or(0.01 * (t + 1) as f64 / (k - t) as f64)
    }
}

/// Loads `arg`, a file path or the name of a bundled config.
pub fn load(arg: &str) -> Result<Experiment, ConfigError> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{arg}: {e}")))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        return parse(&text, &base, arg);
    }
    match BUNDLED.iter().find(|(name, _)| *name == arg) {
        Some((name, text)) => parse(text, Path::new("."), name),
        None => Err(ConfigError(format!(
            "{arg}: no such file and not a bundled config (bundled: {})",
            BUNDLED.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ))),
    }
}

pub fn parse(text: &str, base: &Path, name: &str) -> Result<Experiment, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| ConfigError(format!("{name}: {e}")))?;
    if config.schema != SCHEMA {
        return Err(ConfigError(format!(
            "{name}: schema {} is not supported (expected {SCHEMA})",
            config.schema
        )));
    }
    let channel = match &config.channel {
        ChannelSpec::Fading { users, power } => ChannelModel::Fading(FadingModel::new(*users, *power)?),
        ChannelSpec::Discrete { table, users, states } => match (table, users, states.is_empty()) {
            (Some(table), None, true) => {
                let p = base.join(table);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| ConfigError(format!("channel table {}: {e}", p.display())))?;
                ChannelModel::Discrete(DiscreteStateChannel::from_toml_str(&text)?)
            }
            (None, Some(users), false) => ChannelModel::Discrete(DiscreteStateChannel::new(*users, states.clone())?),
            _ => {
                return Err(ConfigError(format!(
                    "{name}: a discrete channel needs either `table` or `users` with [[channel.state]] entries"
                )))
            }
        },
    };
    let k = channel.users();
    let run = &config.run;
    let t_values = match &run.t {
        TSelect::All => (0..k).collect(),
        TSelect::List(v) => v.clone(),
    };
    if t_values.is_empty() {
        return Err(ConfigError(format!("{name}: empty t list")));
    }
    if let Some(&t) = t_values.iter().find(|&&t| t >= k) {
        return Err(ConfigError(format!("{name}: t = {t} outside 0..={}", k - 1)));
    }
    if run.trials == 0 {
        return Err(ConfigError(format!("{name}: trials must be at least 1")));
    }
    if run.samples == 0 {
        return Err(ConfigError(format!("{name}: samples must be positive")));
    }
    if run.schemes.is_empty() || run.policies.is_empty() {
        return Err(ConfigError(format!("{name}: empty scheme or policy list")));
    }
    if let Some(eps) = run.eps {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(ConfigError(format!("{name}: eps = {eps} must be finite and >= 0")));
        }
    }
    let exp = Experiment {
        name: name.to_string(),
        config,
        channel,
        t_values,
    };
    if let Some(ds) = &exp.config.run.demands {
        if ds.is_empty() {
            return Err(ConfigError(format!("{name}: empty demand list")));
        }
        for d in ds {
            if d.len() != k {
                return Err(ConfigError(format!("{name}: demand vector {d:?} needs {k} entries")));
            }
            cachecast::DemandVector::new(d.clone(), exp.files())?;
        }
    }
    Ok(exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        for (name, _) in BUNDLED {
            let e = load(name).unwrap();
            assert!(!e.t_values.is_empty(), "{name}");
        }
        assert_eq!(load("fig1").unwrap().t_values, vec![0, 1, 2]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "schema = 1\n[channel]\nkind = \"fading\"\nusers = 2\npower = 1.0\ncolour = 3\n";
        assert!(parse(text, Path::new("."), "x").is_err());
        let text = "schema = 1\nextra = 1\n[channel]\nkind = \"fading\"\nusers = 2\npower = 1.0\n";
        assert!(parse(text, Path::new("."), "x").is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let base = "schema = 1\n[channel]\nkind = \"fading\"\nusers = 3\npower = 4.0\n[run]\n";
        assert!(parse(&format!("{base}t = [3]\n"), Path::new("."), "x").is_err());
        assert!(parse(&format!("{base}t = \"some\"\n"), Path::new("."), "x").is_err());
        assert!(parse(&format!("{base}trials = 0\n"), Path::new("."), "x").is_err());
        assert!(parse(&format!("{base}demands = [[1, 2]]\n"), Path::new("."), "x").is_err());
        assert!(parse(&base.replace("schema = 1", "schema = 2"), Path::new("."), "x").is_err());
        assert!(parse(&base.replace("4.0", "-1.0"), Path::new("."), "x").is_err());
        assert!(parse(&format!("{base}t = [0, 2]\n"), Path::new("."), "x").is_ok());
    }

    #[test]
    fn default_eps_follows_t() {
        let e = load("fig1").unwrap();
        assert!((e.eps(1) - 0.01).abs() < 1e-15);
        assert!((e.eps(2) - 0.03).abs() < 1e-15);
        assert_eq!(e.files(), 3);
    }
}
