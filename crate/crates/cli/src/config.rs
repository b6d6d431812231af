//! Flat `key = value` configuration with flag overrides.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use twopoint_core::{
    BuiltinName, ObjectiveParams, ScheduleOverrides, SetupKind, DEFAULT_MC_SAMPLES,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: key.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: `{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// Raw settings plus a record of every value actually used, so output files
/// can echo the resolved configuration.
#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    resolved: RefCell<BTreeMap<String, String>>,
}

impl Config {
    pub fn parse_str(text: &str) -> Result<Config> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = split_pair(line).ok_or_else(|| {
                ConfigError::new(format!("line {}", i + 1), "expected `key = value`")
            })?;
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError::new(key, "given twice"));
            }
        }
        Ok(Config {
            values,
            resolved: RefCell::default(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        Config::parse_str(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), value.to_string());
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, pair: &str) -> Result<()> {
        let (k, v) =
            split_pair(pair).ok_or_else(|| ConfigError::new(pair, "expected KEY=VALUE"))?;
        self.set(k, v);
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(ConfigError::new(k, "unknown key")),
            None => Ok(()),
        }
    }

    fn record(&self, key: &str, value: String) {
        self.resolved.borrow_mut().insert(key.to_string(), value);
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn string(&self, key: &str, default: &str) -> String {
        let v = self.raw(key).unwrap_or(default).to_string();
        self.record(key, v.clone());
        v
    }

    pub fn optional_string(&self, key: &str) -> Option<String> {
        let v = self.raw(key)?.to_string();
        self.record(key, v.clone());
        Some(v)
    }

    pub fn parse<T: FromStr>(&self, key: &str, default: T, what: &str) -> Result<T>
    where
        T: fmt::Display,
    {
        match self.optional::<T>(key, what)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, default.to_string());
                Ok(default)
            }
        }
    }

    pub fn optional<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        let Some(raw) = self.raw(key) else {
            return Ok(None);
        };
        let v = raw
            .parse::<T>()
            .map_err(|_| ConfigError::new(key, format!("expected {what}, got `{raw}`")))?;
        self.record(key, raw.to_string());
        Ok(Some(v))
    }

    pub fn positive_usize(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.parse(key, default, "a positive integer")?;
        if v == 0 {
            return Err(ConfigError::new(key, "must be a positive integer (got 0)"));
        }
        Ok(v)
    }

    pub fn positive_f64(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.parse(key, default, "a number")?;
        check_positive(key, v)
    }

    pub fn optional_positive_f64(&self, key: &str) -> Result<Option<f64>> {
        self.optional::<f64>(key, "a number")?
            .map(|v| check_positive(key, v))
            .transpose()
    }

    /// A comma-separated list of positive integers.
    pub fn usize_list(&self, key: &str, default: &str) -> Result<Vec<usize>> {
        let raw = self.string(key, default);
        let items = split_list(&raw)
            .map(|s| {
                s.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(|| {
                    ConfigError::new(key, format!("must be a positive integer (got `{s}`)"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if items.is_empty() {
            return Err(ConfigError::new(key, "empty list"));
        }
        Ok(items)
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(raw) = self.optional_string(key) else {
            return Ok(None);
        };
        let v = split_list(&raw)
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        ConfigError::new(key, format!("expected a finite number, got `{s}`"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(v))
    }

    /// Every value consulted so far, defaults included.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.resolved.borrow().clone()
    }
}

fn split_pair(s: &str) -> Option<(&str, &str)> {
    let (k, v) = s.split_once('=')?;
    let k = k.trim();
    (!k.is_empty()).then_some((k, v.trim()))
}

fn split_list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn check_positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(
            key,
            format!("must be positive and finite (got {v})"),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Common {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

pub const COMMON_KEYS: &[&str] = &["seed", "out", "format"];

/// Resolves seed, output path and format. A missing seed is an error when
/// the settings came from a file; otherwise one is drawn and logged.
pub fn common(cfg: &Config, from_file: bool) -> Result<Common> {
    let seed = match cfg.optional::<u64>("seed", "an unsigned integer")? {
        Some(s) => s,
        None if from_file => {
            return Err(ConfigError::new("seed", "required in config files"));
        }
        None => {
            let s: u64 = rand::random();
            eprintln!("seed = {s}");
            cfg.record("seed", s.to_string());
            s
        }
    };
    // where the results go is not part of the experiment: not echoed
    let out = cfg.raw("out").map(PathBuf::from);
    let format = match cfg.string("format", "csv").as_str() {
        "csv" => OutputFormat::Csv,
        "json" => OutputFormat::Json,
        other => {
            return Err(ConfigError::new(
                "format",
                format!("expected csv or json, got `{other}`"),
            ))
        }
    };
    Ok(Common { seed, out, format })
}

pub fn geometry(cfg: &Config) -> Result<SetupKind> {
    match cfg.string("geometry", "l2ball").as_str() {
        "l2ball" => Ok(SetupKind::Euclidean {
            radius: cfg.positive_f64("radius", 1.0)?,
        }),
        "simplex" => Ok(SetupKind::Entropic),
        other => Err(ConfigError::new(
            "geometry",
            format!("expected l2ball or simplex, got `{other}`"),
        )),
    }
}

/// Checks that `kind` admits a domain of every dimension in `dims`.
pub fn check_dims(kind: SetupKind, dims: &[usize]) -> Result<()> {
    for &d in dims {
        kind.domain(d)
            .map_err(|e| ConfigError::new("d", format!("{e}")))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub setup: SetupKind,
    pub objective: String,
    pub params: ObjectiveParams,
    pub dims: Vec<usize>,
    pub horizons: Vec<usize>,
    pub replications: usize,
    pub overrides: ScheduleOverrides,
    pub mc_samples: usize,
    pub common: Common,
}

pub const BENCH_KEYS: &[&str] = &[
    "geometry",
    "radius",
    "objective",
    "center",
    "center_norm",
    "direction",
    "noise",
    "feature_norm",
    "d",
    "T",
    "replications",
    "reps",
    "eta",
    "delta",
    "mc_samples",
];

pub fn bench(cfg: &Config, from_file: bool) -> Result<BenchConfig> {
    let known: Vec<&str> = BENCH_KEYS.iter().chain(COMMON_KEYS).copied().collect();
    cfg.reject_unknown(&known)?;
    let common = common(cfg, from_file)?;
    let setup = geometry(cfg)?;
    let objective = cfg.string("objective", "abs_regression");
    objective
        .parse::<BuiltinName>()
        .map_err(|e| ConfigError::new("objective", e.to_string()))?;
    let dims = cfg.usize_list("d", "4")?;
    let horizons = cfg.usize_list("T", "1000")?;
    check_dims(setup, &dims)?;
    let rep_key = if cfg.contains("reps") && !cfg.contains("replications") {
        "reps"
    } else {
        "replications"
    };
    let replications = cfg.positive_usize(rep_key, 20)?;
    let defaults = ObjectiveParams::default();
    let center = cfg.f64_list("center")?;
    let direction = cfg.f64_list("direction")?;
    for (key, v) in [("center", &center), ("direction", &direction)] {
        if let Some(v) = v {
            if dims.iter().any(|&d| d != v.len()) {
                return Err(ConfigError::new(
                    key,
                    format!("has {} coordinates but d = {dims:?}", v.len()),
                ));
            }
        }
    }
    let params = ObjectiveParams {
        center,
        direction,
        center_norm: nonnegative(cfg, "center_norm", defaults.center_norm)?,
        noise: nonnegative(cfg, "noise", defaults.noise)?,
        feature_norm: cfg.positive_f64("feature_norm", defaults.feature_norm)?,
        seed: 0,
    };
    // surface domain/objective mismatches (e.g. a center outside the ball) now
    for &d in &dims {
        let domain = setup
            .domain(d)
            .map_err(|e| ConfigError::new("d", e.to_string()))?;
        twopoint_core::builtin_objective(&objective, &domain, &params)
            .map_err(|e| ConfigError::new(core_key(&e, "objective"), e.to_string()))?;
    }
    let overrides = ScheduleOverrides {
        eta: cfg.optional_positive_f64("eta")?,
        delta: cfg.optional_positive_f64("delta")?,
    };
    let mc_samples = cfg.parse("mc_samples", DEFAULT_MC_SAMPLES, "a nonnegative integer")?;
    if mc_samples == 1 {
        return Err(ConfigError::new("mc_samples", "must be 0 or at least 2"));
    }
    Ok(BenchConfig {
        setup,
        objective,
        params,
        dims,
        horizons,
        replications,
        overrides,
        mc_samples,
        common,
    })
}

fn nonnegative(cfg: &Config, key: &str, default: f64) -> Result<f64> {
    let v: f64 = cfg.parse(key, default, "a number")?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(
            key,
            format!("must be nonnegative (got {v})"),
        ))
    }
}

/// The config key a library error refers to, where it names one.
pub fn core_key(e: &twopoint_core::Error, fallback: &str) -> String {
    match e {
        twopoint_core::Error::InvalidParameter { name, .. } => (*name).to_string(),
        _ => fallback.to_string(),
    }
}

/// Settings for `check`.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub suites: Vec<String>,
    pub d: Option<usize>,
    pub horizon: usize,
    pub samples: Option<usize>,
    pub common: Common,
}

pub const CHECK_KEYS: &[&str] = &["suite", "suites", "d", "T", "samples"];

pub fn check(cfg: &Config, from_file: bool, all_suites: &[&str]) -> Result<CheckConfig> {
    let known: Vec<&str> = CHECK_KEYS.iter().chain(COMMON_KEYS).copied().collect();
    cfg.reject_unknown(&known)?;
    let common = common(cfg, from_file)?;
    let key = if cfg.contains("suite") {
        "suite"
    } else {
        "suites"
    };
    let raw = cfg.string(key, &all_suites.join(","));
    let suites: Vec<String> = split_list(&raw).map(str::to_string).collect();
    if suites.is_empty() {
        return Err(ConfigError::new(key, "no suites selected"));
    }
    if let Some(s) = suites.iter().find(|s| !all_suites.contains(&s.as_str())) {
        return Err(ConfigError::new(
            key,
            format!("unknown suite `{s}` (known: {})", all_suites.join(", ")),
        ));
    }
    let d = cfg.optional::<usize>("d", "a positive integer")?;
    if d == Some(0) {
        return Err(ConfigError::new("d", "must be a positive integer (got 0)"));
    }
    Ok(CheckConfig {
        suites,
        d,
        horizon: cfg.positive_usize("T", 1000)?,
        samples: cfg.optional::<usize>("samples", "a positive integer")?,
        common,
    })
}

/// Settings for `optimize`.
#[derive(Debug, Clone)]
pub struct OptimizeConfig {
    pub setup: SetupKind,
    pub d: usize,
    pub horizon: usize,
    pub budget: u64,
    pub child: String,
    pub child_args: Vec<String>,
    pub lipschitz: f64,
    pub overrides: ScheduleOverrides,
    pub common: Common,
}

pub const OPTIMIZE_KEYS: &[&str] = &[
    "geometry",
    "radius",
    "d",
    "T",
    "budget",
    "child",
    "child_args",
    "lipschitz",
    "eta",
    "delta",
];

pub fn optimize(cfg: &Config, from_file: bool) -> Result<OptimizeConfig> {
    let known: Vec<&str> = OPTIMIZE_KEYS.iter().chain(COMMON_KEYS).copied().collect();
    cfg.reject_unknown(&known)?;
    let common = common(cfg, from_file)?;
    let setup = geometry(cfg)?;
    let d = cfg
        .optional::<usize>("d", "a positive integer")?
        .ok_or_else(|| ConfigError::new("d", "required"))?;
    if d == 0 {
        return Err(ConfigError::new("d", "must be a positive integer (got 0)"));
    }
    check_dims(setup, &[d])?;
    let horizon = cfg.positive_usize("T", 1000)?;
    let budget = cfg.parse("budget", 2 * horizon as u64, "a nonnegative integer")?;
    if budget < 2 {
        return Err(ConfigError::new(
            "budget",
            "must allow at least one round (2 queries)",
        ));
    }
    let child = cfg.optional_string("child").ok_or_else(|| {
        ConfigError::new(
            "child",
            "required: program implementing the EVAL/VAL protocol",
        )
    })?;
    let child_args = cfg
        .optional_string("child_args")
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .unwrap_or_default();
    Ok(OptimizeConfig {
        setup,
        d,
        horizon,
        budget,
        child,
        child_args,
        lipschitz: cfg.positive_f64("lipschitz", 1.0)?,
        overrides: ScheduleOverrides {
            eta: cfg.optional_positive_f64("eta")?,
            delta: cfg.optional_positive_f64("delta")?,
        },
        common,
    })
}
