//! `key=value` run configuration shared by every command.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::exec::Execution;
use crate::flow::SweepSettings;
use crate::quadrature::QuadSettings;
use crate::seqspace::{TailMode, MIN_TRUNCATION};

/// Every accepted key, with its default rendered as text (`-` for unset).
const KEYS: &[(&str, &str)] = &[
    ("beta", "-"),
    ("s", "0.95"),
    ("N", "40"),
    ("M", "N/2"),
    ("t_max", "1000"),
    ("f_tol", "1e-6"),
    ("ode_rel_tol", "1e-8"),
    ("quad_rel_tol", "1e-10"),
    ("quad_abs_tol", "1e-14"),
    ("panel_budget", "4096"),
    ("tail", "frozen_exp"),
    ("execution", "parallel"),
    ("s_list", "0.9,0.99,0.999"),
    ("horizon", "5"),
    ("grid_intervals", "50"),
    ("compare_window", "min(10,M)"),
    ("delta", "0.05"),
    ("beta_start", "min(beta,0.4)"),
    ("threshold", "1e-4"),
    ("s_grid", "0.1,0.3,0.5,0.7,0.9"),
    ("t_grid", "0.1,0.3,0.5,0.7,0.9"),
    ("probes", "200"),
    ("seed", "24301"),
    ("resume", "-"),
    ("snapshot", "-"),
    ("plots", "true"),
    ("svg", "false"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn key(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            message: message.into(),
        }
    }

    pub(crate) fn general(message: impl Into<String>) -> Self {
        Self {
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "invalid `{k}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Unset means "take it from the input snapshot" where one is allowed.
    pub beta: Option<f64>,
    pub s: f64,
    pub order: usize,
    pub window: usize,
    pub t_max: f64,
    pub f_tol: f64,
    pub ode_rel_tol: f64,
    pub quad: QuadSettings,
    pub tail: TailMode,
    pub execution: Execution,
    pub s_list: Vec<f64>,
    pub sweep: SweepSettings,
    pub delta: f64,
    pub beta_start: Option<f64>,
    pub threshold: f64,
    pub s_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub probes: usize,
    pub seed: u64,
    pub resume: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
    pub plots: bool,
    pub svg: bool,
    /// Keys that were given explicitly.
    pub explicit: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        from_map(&BTreeMap::new()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    /// Resolved values of every key, in key order.
    pub fn canonical(&self) -> BTreeMap<&'static str, String> {
        let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map_or("-".to_string(), |p| p.display().to_string());
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        BTreeMap::from([
            ("beta", opt(self.beta)),
            ("s", self.s.to_string()),
            ("N", self.order.to_string()),
            ("M", self.window.to_string()),
            ("t_max", self.t_max.to_string()),
            ("f_tol", self.f_tol.to_string()),
            ("ode_rel_tol", self.ode_rel_tol.to_string()),
            ("quad_rel_tol", self.quad.rel_tol.to_string()),
            ("quad_abs_tol", self.quad.abs_tol.to_string()),
            ("panel_budget", self.quad.panel_budget.to_string()),
            ("tail", self.tail.to_string()),
            ("execution", self.execution.to_string()),
            ("s_list", list(&self.s_list)),
            ("horizon", self.sweep.horizon.to_string()),
            ("grid_intervals", self.sweep.grid_intervals.to_string()),
            ("compare_window", self.sweep.compare_window.to_string()),
            ("delta", self.delta.to_string()),
            ("beta_start", opt(self.beta_start)),
            ("threshold", self.threshold.to_string()),
            ("s_grid", list(&self.s_grid)),
            ("t_grid", list(&self.t_grid)),
            ("probes", self.probes.to_string()),
            ("seed", self.seed.to_string()),
            ("resume", path(&self.resume)),
            ("snapshot", path(&self.snapshot)),
            ("plots", self.plots.to_string()),
            ("svg", self.svg.to_string()),
        ])
    }

    /// SHA-256 of the canonical `key=value` listing, in hex.
    ///
    /// `execution` is left out: it never changes results.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for (k, v) in self.canonical() {
            if k != "execution" {
                hasher.update(format!("{k}={v}\n").as_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Fails when `beta` is unset.
    pub fn require_beta(&self) -> Result<f64, ConfigError> {
        self.beta
            .ok_or_else(|| ConfigError::key("beta", "required for this command"))
    }
}

/// Parses configuration text: one `key=value` per line, `#` comments.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    collect_lines(text, &mut map)?;
    from_map(&map)
}

/// Applies a config file's text and then command-line pairs (later wins).
pub fn parse_with_overrides(text: Option<&str>, args: &[String]) -> Result<RunConfig, ConfigError> {
    let mut map = BTreeMap::new();
    if let Some(text) = text {
        collect_lines(text, &mut map)?;
    }
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let arg = arg.strip_prefix("--").unwrap_or(arg);
        let (k, v) = match arg.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| ConfigError::key(arg, "missing value"))?;
                (arg.to_string(), v.clone())
            }
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    from_map(&map)
}

fn collect_lines(text: &str, map: &mut BTreeMap<String, String>) -> Result<(), ConfigError> {
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError::general(format!("line {}: expected key=value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(())
}

fn value<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse()
            .map_err(|e| ConfigError::key(key, format!("cannot parse `{raw}`: {e}"))),
    }
}

fn optional<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>, ConfigError>
where
    T::Err: fmt::Display,
{
    map.get(key)
        .map(|raw| {
            raw.parse()
                .map_err(|e| ConfigError::key(key, format!("cannot parse `{raw}`: {e}")))
        })
        .transpose()
}

fn list(map: &BTreeMap<String, String>, key: &str, default: &[f64]) -> Result<Vec<f64>, ConfigError> {
    match map.get(key) {
        None => Ok(default.to_vec()),
        Some(raw) => raw
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| ConfigError::key(key, format!("cannot parse `{p}`: {e}")))
            })
            .collect(),
    }
}

fn ensure(ok: bool, key: &str, message: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::key(key, message()))
    }
}

fn from_map(map: &BTreeMap<String, String>) -> Result<RunConfig, ConfigError> {
    if let Some(unknown) = map.keys().find(|k| !KEYS.iter().any(|(name, _)| name == k)) {
        return Err(ConfigError::key(unknown, "unknown key"));
    }
    let beta: Option<f64> = optional(map, "beta")?;
    if let Some(b) = beta {
        ensure((0.0..1.0).contains(&b), "beta", || format!("must lie in [0, 1), got {b}"))?;
    }
    let s: f64 = value(map, "s", 0.95)?;
    ensure(s > 0.0 && s <= 1.0, "s", || format!("must lie in (0, 1], got {s}"))?;
    let order: usize = value(map, "N", 40)?;
    ensure(order >= MIN_TRUNCATION, "N", || format!("must be at least {MIN_TRUNCATION}, got {order}"))?;
    let window: usize = value(map, "M", order / 2)?;
    ensure(window + 2 <= order, "M", || format!("must be at most N-2 = {}, got {window}", order - 2))?;

    let positive = |key: &str, default: f64| -> Result<f64, ConfigError> {
        let v: f64 = value(map, key, default)?;
        ensure(v > 0.0 && v.is_finite(), key, || format!("must be positive, got {v}"))?;
        Ok(v)
    };
    let t_max = positive("t_max", 1000.0)?;
    let f_tol = positive("f_tol", 1e-6)?;
    let ode_rel_tol = positive("ode_rel_tol", 1e-8)?;
    let quad = QuadSettings {
        rel_tol: positive("quad_rel_tol", 1e-10)?,
        abs_tol: positive("quad_abs_tol", 1e-14)?,
        panel_budget: value(map, "panel_budget", 4096)?,
        ..QuadSettings::default()
    };
    ensure(quad.panel_budget >= 1, "panel_budget", || "must be at least 1".into())?;

    let s_list = list(map, "s_list", &[0.9, 0.99, 0.999])?;
    ensure(
        s_list.iter().all(|&v| v > 0.0 && v < 1.0) && s_list.windows(2).all(|w| w[1] > w[0]),
        "s_list",
        || "values must be strictly increasing in (0, 1)".into(),
    )?;
    let sweep = SweepSettings {
        horizon: positive("horizon", 5.0)?,
        grid_intervals: value(map, "grid_intervals", 50)?,
        compare_window: value(map, "compare_window", window.min(10))?,
    };
    ensure(sweep.grid_intervals >= 1, "grid_intervals", || "must be at least 1".into())?;
    ensure(sweep.compare_window <= window, "compare_window", || format!("must be at most M = {window}"))?;

    let delta = positive("delta", 0.05)?;
    let beta_start: Option<f64> = optional(map, "beta_start")?;
    if let Some(b) = beta_start {
        ensure((0.0..1.0).contains(&b), "beta_start", || format!("must lie in [0, 1), got {b}"))?;
    }
    let s_grid = list(map, "s_grid", &[0.1, 0.3, 0.5, 0.7, 0.9])?;
    ensure(s_grid.iter().all(|v| (0.0..1.0).contains(v)), "s_grid", || "values must lie in [0, 1)".into())?;
    let t_grid = list(map, "t_grid", &[0.1, 0.3, 0.5, 0.7, 0.9])?;
    ensure(t_grid.iter().all(|&v| v > 0.0 && v < 1.0), "t_grid", || "values must lie in (0, 1)".into())?;

    Ok(RunConfig {
        beta,
        s,
        order,
        window,
        t_max,
        f_tol,
        ode_rel_tol,
        quad,
        tail: value(map, "tail", TailMode::default())?,
        execution: value(map, "execution", Execution::default())?,
        s_list,
        sweep,
        delta,
        beta_start,
        threshold: positive("threshold", 1e-4)?,
        s_grid,
        t_grid,
        probes: value(map, "probes", 200)?,
        seed: value(map, "seed", 24301)?,
        resume: optional(map, "resume")?,
        snapshot: optional(map, "snapshot")?,
        plots: value(map, "plots", true)?,
        svg: value(map, "svg", false)?,
        explicit: map.keys().cloned().collect(),
    })
}
