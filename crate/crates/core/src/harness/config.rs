//! Experiment configuration files.
//!
//! Grammar, line oriented:
//!
//! ```text
//! file        = { line }
//! line        = [ section | assignments ] [ "#" comment ]
//! section     = "[" name "]"
//! assignments = key "=" value { whitespace key "=" value }
//! value       = integer | real | bool | word | list
//! list        = value { "," value }        (no whitespace inside a list)
//! ```
//!
//! Sections are optional; when present, a key must belong to the section it
//! appears under. Omitted keys keep their defaults. Every key is listed in
//! [`KEYS`].

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dqn::{ExploreSchedule, Hyperparams, NetShape, OptimizerKind};
use crate::env::{CacheGeometry, Delays, RewardParams};
use crate::{Error, Result};

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "CODEDCACHE_OUT";

pub const ALL_SCHEMES: [&str; 5] = ["fdrl", "centralized", "lfu", "apcc", "nucc"];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // network
    pub n_contents: usize,
    pub k_faps: usize,
    pub cache_size: usize,
    pub requests_per_slot: usize,
    pub slots: usize,
    pub d_f: f64,
    pub d_a: f64,
    // popularity
    pub profiles: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub stay_prob: f64,
    // learning
    pub aggregation_period: usize,
    pub target_sync: u64,
    pub replay_capacity: usize,
    pub batch: usize,
    pub gamma: f64,
    pub learn_rate: f64,
    pub optimizer: OptimizerKind,
    pub explore_start: f64,
    pub explore_end: f64,
    pub explore_decay: u64,
    pub trunk: Vec<usize>,
    pub head: Vec<usize>,
    pub action_grid: Vec<usize>,
    // reward
    pub mu1: f64,
    pub mu2: f64,
    pub phi: f64,
    pub normalize_reward_rows: bool,
    // schemes
    pub schemes: Vec<String>,
    /// `None` means `1/(4N)`.
    pub apcc_threshold: Option<f64>,
    pub nucc_warmup: usize,
    /// Re-optimization period after warm-up; 0 keeps NUCC frozen.
    pub nucc_reestimate: usize,
    // output
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub smoothing_window: usize,
    pub checkpoints: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_contents: 200,
            k_faps: 5,
            cache_size: 30,
            requests_per_slot: 50,
            slots: 3000,
            d_f: 5.0,
            d_a: 1.0,
            profiles: 10,
            alpha_min: 0.5,
            alpha_max: 1.5,
            stay_prob: 0.8,
            aggregation_period: 20,
            target_sync: 200,
            replay_capacity: 5000,
            batch: 32,
            gamma: 0.9,
            learn_rate: 0.001,
            optimizer: OptimizerKind::adam(),
            explore_start: 1.0,
            explore_end: 0.05,
            explore_decay: 2000,
            trunk: vec![128, 128],
            head: vec![64],
            action_grid: Vec::new(),
            mu1: 0.95,
            mu2: 0.05,
            phi: 3.0,
            normalize_reward_rows: false,
            schemes: ALL_SCHEMES.iter().map(|s| s.to_string()).collect(),
            apcc_threshold: None,
            nucc_warmup: 100,
            nucc_reestimate: 0,
            seeds: vec![1, 2, 3, 4, 5],
            out_dir: std::env::var_os(OUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("results")),
            smoothing_window: 50,
            checkpoints: true,
        }
    }
}

impl ExperimentConfig {
    pub fn geometry(&self) -> CacheGeometry {
        CacheGeometry {
            n_contents: self.n_contents,
            k_faps: self.k_faps,
            cache_size: self.cache_size,
        }
    }

    pub fn delays(&self) -> Delays {
        Delays {
            d_f: self.d_f,
            d_a: self.d_a,
        }
    }

    pub fn reward_params(&self) -> RewardParams {
        RewardParams {
            mu1: self.mu1,
            mu2: self.mu2,
            phi: self.phi,
            normalize_rows: self.normalize_reward_rows,
        }
    }

    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            gamma: self.gamma,
            learn_rate: self.learn_rate,
            batch: self.batch,
            capacity: self.replay_capacity,
            target_sync_steps: self.target_sync,
            explore: ExploreSchedule {
                start: self.explore_start,
                end: self.explore_end,
                decay_steps: self.explore_decay,
            },
            optimizer: self.optimizer,
        }
    }

    pub fn net_shape(&self, n_actions: usize) -> NetShape {
        NetShape {
            input: 2 * self.n_contents + 1,
            trunk: self.trunk.clone(),
            value_hidden: self.head.clone(),
            advantage_hidden: self.head.clone(),
            n_actions,
        }
    }

    pub fn apcc_threshold(&self) -> f64 {
        self.apcc_threshold
            .unwrap_or(1.0 / (4.0 * self.n_contents as f64))
    }

    /// Checks every cross-field invariant. Returns warnings that do not
    /// invalidate the config.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.check().map_err(|(_, msg)| Error::Config(msg))
    }

    /// Like [`validate`](Self::validate), naming the keys a violation involves.
    fn check(&self) -> std::result::Result<Vec<String>, (&'static [&'static str], String)> {
        fn fail<T>(keys: &'static [&'static str], msg: String) -> std::result::Result<T, (&'static [&'static str], String)> {
            Err((keys, msg))
        }
        if self.cache_size == 0 || self.cache_size >= self.n_contents {
            return fail(
                &["cache_size", "n_contents"],
                format!("need 1 <= M < N, got M = {}, N = {}", self.cache_size, self.n_contents),
            );
        }
        if self.requests_per_slot < self.k_faps {
            return fail(
                &["requests_per_slot", "k_faps"],
                format!("need V >= K, got V = {}, K = {}", self.requests_per_slot, self.k_faps),
            );
        }
        if self.slots == 0 || self.profiles == 0 || self.aggregation_period == 0 {
            return fail(
                &["slots", "profiles", "aggregation_period"],
                "T, Z and T_s must be positive".into(),
            );
        }
        if !(self.d_f > 0.0 && self.d_a > 0.0) {
            return fail(&["d_f", "d_a"], "delays d_f and d_a must be positive".into());
        }
        if !(0.0 <= self.alpha_min && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return fail(
                &["alpha_range"],
                format!("alpha range [{}, {}] is empty", self.alpha_min, self.alpha_max),
            );
        }
        if !(0.0..=1.0).contains(&self.stay_prob) {
            return fail(&["stay_prob"], format!("stay_prob {} outside [0, 1]", self.stay_prob));
        }
        if let Err(e) = self.reward_params().validate() {
            return fail(&["mu1", "mu2", "phi"], e.to_string());
        }
        if let Err(e) = self.hyperparams().validate() {
            return fail(
                &[
                    "gamma",
                    "learn_rate",
                    "batch",
                    "replay_capacity",
                    "target_sync",
                    "explore_start",
                    "explore_end",
                    "explore_decay",
                ],
                e.to_string(),
            );
        }
        if self.seeds.is_empty() {
            return fail(&["seeds"], "at least one seed is required".into());
        }
        if self.schemes.is_empty() {
            return fail(&["schemes"], "at least one scheme is required".into());
        }
        if let Some(s) = self.schemes.iter().find(|s| !ALL_SCHEMES.contains(&s.as_str())) {
            return fail(&["schemes"], format!("unknown scheme '{s}', expected one of {ALL_SCHEMES:?}"));
        }
        if self.smoothing_window == 0 {
            return fail(&["smoothing_window"], "smoothing_window must be positive".into());
        }
        if self.trunk.iter().chain(&self.head).any(|&w| w == 0) {
            return fail(&["trunk", "head"], "hidden layer widths must be positive".into());
        }
        if let Err(e) = crate::env::build_action_space(self.geometry(), &self.action_grid) {
            return fail(&["k_faps", "cache_size", "n_contents", "action_grid"], e.to_string());
        }
        let mut warnings = Vec::new();
        if self.aggregation_period as u64 > self.target_sync {
            warnings.push(format!(
                "aggregation period T_s = {} exceeds target sync period E = {}",
                self.aggregation_period, self.target_sync
            ));
        }
        Ok(warnings)
    }

    /// Overrides a sweepable parameter.
    pub fn with_param(&self, name: &str, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParameter(format!("{name} needs an integer, got {v}")))
            }
        };
        match name {
            "M" => cfg.cache_size = as_count(value)?,
            "Z" => cfg.profiles = as_count(value)?,
            "K" => cfg.k_faps = as_count(value)?,
            "V" => cfg.requests_per_slot = as_count(value)?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "cannot sweep '{other}', expected one of M, Z, K, V"
                )))
            }
        }
        Ok(cfg)
    }
}

/// Every accepted key with its section.
pub const KEYS: &[(&str, &str)] = &[
    ("network", "n_contents"),
    ("network", "k_faps"),
    ("network", "cache_size"),
    ("network", "requests_per_slot"),
    ("network", "slots"),
    ("network", "d_f"),
    ("network", "d_a"),
    ("popularity", "profiles"),
    ("popularity", "alpha_range"),
    ("popularity", "stay_prob"),
    ("learning", "aggregation_period"),
    ("learning", "target_sync"),
    ("learning", "replay_capacity"),
    ("learning", "batch"),
    ("learning", "gamma"),
    ("learning", "learn_rate"),
    ("learning", "optimizer"),
    ("learning", "explore_start"),
    ("learning", "explore_end"),
    ("learning", "explore_decay"),
    ("learning", "trunk"),
    ("learning", "head"),
    ("learning", "action_grid"),
    ("reward", "mu1"),
    ("reward", "mu2"),
    ("reward", "phi"),
    ("reward", "normalize_reward_rows"),
    ("schemes", "schemes"),
    ("schemes", "apcc_threshold"),
    ("schemes", "nucc_warmup"),
    ("schemes", "nucc_reestimate"),
    ("output", "seeds"),
    ("output", "out_dir"),
    ("output", "smoothing_window"),
    ("output", "checkpoints"),
];

fn section_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(_, k)| *k == key).map(|(s, _)| *s)
}

struct Value<'a> {
    raw: &'a str,
    line: usize,
    key: &'a str,
}

impl Value<'_> {
    fn err(&self, what: &str) -> Error {
        Error::Parse {
            line: self.line,
            msg: format!("{}: expected {what}, got '{}'", self.key, self.raw),
        }
    }

    fn count(&self) -> Result<usize> {
        self.raw.parse().map_err(|_| self.err("a nonnegative integer"))
    }

    fn u64(&self) -> Result<u64> {
        self.raw.parse().map_err(|_| self.err("a nonnegative integer"))
    }

    fn real(&self) -> Result<f64> {
        self.raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err("a finite real"))
    }

    fn boolean(&self) -> Result<bool> {
        match self.raw {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(self.err("true or false")),
        }
    }

    fn items(&self) -> impl Iterator<Item = &str> {
        self.raw.split(',').filter(|s| !s.is_empty())
    }

    fn counts(&self) -> Result<Vec<usize>> {
        self.items()
            .map(|s| s.parse().map_err(|_| self.err("a list of integers")))
            .collect()
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut section: Option<String> = None;
    let mut seen = std::collections::HashMap::new();
    let mut last_line = 0;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        last_line = line_no;
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unterminated section header '{line}'"),
            })?;
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        for token in line.split_whitespace() {
            let (key, raw) = token.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("expected key=value, got '{token}'"),
            })?;
            let home = section_of(key).ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("unknown key '{key}'"),
            })?;
            if let Some(s) = &section {
                if s != home {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("key '{key}' belongs to [{home}], not [{s}]"),
                    });
                }
            }
            if seen.insert(key.to_string(), line_no).is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate key '{key}'"),
                });
            }
            assign(
                &mut cfg,
                Value {
                    raw,
                    line: line_no,
                    key,
                },
            )?;
        }
    }
    if let Err((keys, msg)) = cfg.check() {
        // Blame the latest line that set one of the involved keys.
        let line = keys.iter().filter_map(|k| seen.get(*k)).max().copied().unwrap_or(last_line);
        return Err(Error::Parse { line, msg });
    }
    Ok(cfg)
}

fn assign(cfg: &mut ExperimentConfig, v: Value<'_>) -> Result<()> {
    match v.key {
        "n_contents" => cfg.n_contents = v.count()?,
        "k_faps" => cfg.k_faps = v.count()?,
        "cache_size" => cfg.cache_size = v.count()?,
        "requests_per_slot" => cfg.requests_per_slot = v.count()?,
        "slots" => cfg.slots = v.count()?,
        "d_f" => cfg.d_f = v.real()?,
        "d_a" => cfg.d_a = v.real()?,
        "profiles" => cfg.profiles = v.count()?,
        "alpha_range" => {
            let parts: Vec<&str> = v.items().collect();
            let [lo, hi] = parts[..] else {
                return Err(v.err("two reals lo,hi"));
            };
            let real = |s: &str| s.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| v.err("two reals lo,hi"));
            cfg.alpha_min = real(lo)?;
            cfg.alpha_max = real(hi)?;
        }
        "stay_prob" => cfg.stay_prob = v.real()?,
        "aggregation_period" => cfg.aggregation_period = v.count()?,
        "target_sync" => cfg.target_sync = v.u64()?,
        "replay_capacity" => cfg.replay_capacity = v.count()?,
        "batch" => cfg.batch = v.count()?,
        "gamma" => cfg.gamma = v.real()?,
        "learn_rate" => cfg.learn_rate = v.real()?,
        "optimizer" => {
            cfg.optimizer = match v.raw {
                "adam" => OptimizerKind::adam(),
                "sgd" => OptimizerKind::Sgd,
                _ => return Err(v.err("adam or sgd")),
            }
        }
        "explore_start" => cfg.explore_start = v.real()?,
        "explore_end" => cfg.explore_end = v.real()?,
        "explore_decay" => cfg.explore_decay = v.u64()?,
        "trunk" => cfg.trunk = v.counts()?,
        "head" => cfg.head = v.counts()?,
        "action_grid" => cfg.action_grid = v.counts()?,
        "mu1" => cfg.mu1 = v.real()?,
        "mu2" => cfg.mu2 = v.real()?,
        "phi" => cfg.phi = v.real()?,
        "normalize_reward_rows" => cfg.normalize_reward_rows = v.boolean()?,
        "schemes" => cfg.schemes = v.items().map(str::to_string).collect(),
        "apcc_threshold" => {
            cfg.apcc_threshold = match v.raw {
                "auto" => None,
                _ => Some(v.real()?),
            }
        }
        "nucc_warmup" => cfg.nucc_warmup = v.count()?,
        "nucc_reestimate" => cfg.nucc_reestimate = v.count()?,
        "seeds" => {
            cfg.seeds = v
                .items()
                .map(|s| s.parse().map_err(|_| v.err("a list of integers")))
                .collect::<Result<_>>()?
        }
        "out_dir" => cfg.out_dir = PathBuf::from(v.raw),
        "smoothing_window" => cfg.smoothing_window = v.count()?,
        "checkpoints" => cfg.checkpoints = v.boolean()?,
        other => unreachable!("key {other} listed in KEYS without a parser"),
    }
    Ok(())
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Serializes every key; `parse_config(&emit_config(c)) == c`.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut w = |section: &str, pairs: Vec<(&str, String)>| {
        let _ = writeln!(out, "[{section}]");
        for (k, v) in pairs {
            let _ = writeln!(out, "{k}={v}");
        }
        out.push('\n');
    };
    w(
        "network",
        vec![
            ("n_contents", cfg.n_contents.to_string()),
            ("k_faps", cfg.k_faps.to_string()),
            ("cache_size", cfg.cache_size.to_string()),
            ("requests_per_slot", cfg.requests_per_slot.to_string()),
            ("slots", cfg.slots.to_string()),
            ("d_f", cfg.d_f.to_string()),
            ("d_a", cfg.d_a.to_string()),
        ],
    );
    w(
        "popularity",
        vec![
            ("profiles", cfg.profiles.to_string()),
            ("alpha_range", format!("{},{}", cfg.alpha_min, cfg.alpha_max)),
            ("stay_prob", cfg.stay_prob.to_string()),
        ],
    );
    w(
        "learning",
        vec![
            ("aggregation_period", cfg.aggregation_period.to_string()),
            ("target_sync", cfg.target_sync.to_string()),
            ("replay_capacity", cfg.replay_capacity.to_string()),
            ("batch", cfg.batch.to_string()),
            ("gamma", cfg.gamma.to_string()),
            ("learn_rate", cfg.learn_rate.to_string()),
            (
                "optimizer",
                match cfg.optimizer {
                    OptimizerKind::Sgd => "sgd".into(),
                    OptimizerKind::Adam { .. } => "adam".into(),
                },
            ),
            ("explore_start", cfg.explore_start.to_string()),
            ("explore_end", cfg.explore_end.to_string()),
            ("explore_decay", cfg.explore_decay.to_string()),
            ("trunk", join(&cfg.trunk)),
            ("head", join(&cfg.head)),
            ("action_grid", join(&cfg.action_grid)),
        ],
    );
    w(
        "reward",
        vec![
            ("mu1", cfg.mu1.to_string()),
            ("mu2", cfg.mu2.to_string()),
            ("phi", cfg.phi.to_string()),
            ("normalize_reward_rows", cfg.normalize_reward_rows.to_string()),
        ],
    );
    w(
        "schemes",
        vec![
            ("schemes", cfg.schemes.join(",")),
            (
                "apcc_threshold",
                cfg.apcc_threshold.map_or_else(|| "auto".into(), |t| t.to_string()),
            ),
            ("nucc_warmup", cfg.nucc_warmup.to_string()),
            ("nucc_reestimate", cfg.nucc_reestimate.to_string()),
        ],
    );
    w(
        "output",
        vec![
            ("seeds", join(&cfg.seeds)),
            ("out_dir", cfg.out_dir.display().to_string()),
            ("smoothing_window", cfg.smoothing_window.to_string()),
            ("checkpoints", cfg.checkpoints.to_string()),
        ],
    );
    out
}
