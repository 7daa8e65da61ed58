//! Flat `key=value` experiment configuration.
//!
//! Entries are separated by newlines or whitespace; `#` starts a comment.
//! Keys may use `-` or `_`. Command-line flags are applied as a second
//! layer over the file, so both share one validator.

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use vorocell::sampling::DensityKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Alpha,
    ZMoments,
    Cell,
    Diam,
    UnionVolCheck,
}

impl Command {
    pub const ALL: [Command; 5] =
        [Command::Alpha, Command::ZMoments, Command::Cell, Command::Diam, Command::UnionVolCheck];

    pub fn name(self) -> &'static str {
        match self {
            Command::Alpha => "alpha",
            Command::ZMoments => "zmoments",
            Command::Cell => "cell",
            Command::Diam => "diam",
            Command::UnionVolCheck => "unionvol-check",
        }
    }

    fn default_samples(self) -> u64 {
        match self {
            Command::Alpha => 1_000_000,
            Command::ZMoments => 100_000,
            Command::UnionVolCheck => 4000,
            Command::Cell | Command::Diam => 1,
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

/// Conditioning point: the origin of whatever dimension, or explicit coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum CenterSpec {
    Origin,
    Coords(Vec<f64>),
}

impl CenterSpec {
    pub fn coords(&self, dim: usize) -> Vec<f64> {
        match self {
            CenterSpec::Origin => vec![0.0; dim],
            CenterSpec::Coords(c) => c.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub dim: usize,
    pub density: DensityKind,
    pub x: CenterSpec,
    pub n: usize,
    pub replicates: usize,
    pub probes: usize,
    pub samples: u64,
    pub inner_samples: usize,
    pub k_max: usize,
    pub n_grid: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub seed: u64,
    pub workers: usize,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `command`; `samples` depends on the command.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            dim: 1,
            density: DensityKind::UniformBall { radius: 1.0 },
            x: CenterSpec::Origin,
            n: 2000,
            replicates: 2000,
            probes: 5000,
            samples: command.default_samples(),
            inner_samples: 256,
            k_max: 4,
            n_grid: vec![1000, 10_000],
            t_grid: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            seed: 0,
            workers: 1,
            output: None,
        }
    }

    /// Canonical text form; `parse_config(&c.render())` gives back `c`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let join = |v: &[String]| v.join(",");
        let x = match &self.x {
            CenterSpec::Origin => "origin".to_string(),
            CenterSpec::Coords(c) => join(&c.iter().map(f64::to_string).collect::<Vec<_>>()),
        };
        let _ = writeln!(out, "command={}", self.command);
        let _ = writeln!(out, "dim={}", self.dim);
        let _ = writeln!(out, "density={}", self.density);
        let _ = writeln!(out, "x={x}");
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "replicates={}", self.replicates);
        let _ = writeln!(out, "probes={}", self.probes);
        let _ = writeln!(out, "samples={}", self.samples);
        let _ = writeln!(out, "inner_samples={}", self.inner_samples);
        let _ = writeln!(out, "k_max={}", self.k_max);
        let _ = writeln!(out, "n_grid={}", join(&self.n_grid.iter().map(usize::to_string).collect::<Vec<_>>()));
        let _ = writeln!(out, "t_grid={}", join(&self.t_grid.iter().map(f64::to_string).collect::<Vec<_>>()));
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "workers={}", self.workers);
        if let Some(path) = &self.output {
            let _ = writeln!(out, "output={}", path.display());
        }
        out
    }
}

/// Where a value came from, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Line(usize),
    Flag,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Line(n) => write!(f, "line {n}"),
            Source::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{origin}: key `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub origin: Source,
    pub message: String,
}

impl ConfigError {
    fn new(key: &str, source: Source, message: impl Into<String>) -> Self {
        Self { key: key.to_string(), origin: source, message: message.into() }
    }
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub source: Source,
}

const KEYS: [&str; 15] = [
    "command",
    "dim",
    "density",
    "x",
    "n",
    "replicates",
    "probes",
    "samples",
    "inner_samples",
    "k_max",
    "n_grid",
    "t_grid",
    "seed",
    "workers",
    "output",
];

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Splits a document into entries, tagging each with its line number.
pub fn tokenize(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let source = Source::Line(i + 1);
        let line = line.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            let Some((key, value)) = token.split_once('=') else {
                return Err(ConfigError::new(token, source, "expected `key=value`"));
            };
            entries.push(Entry { key: normalize_key(key), value: value.to_string(), source });
        }
    }
    Ok(entries)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    build_config(tokenize(text)?, None)
}

/// Applies `entries` in order (later entries win across sources, duplicates
/// within one file are rejected). `command` overrides any `command` entry.
pub fn build_config(entries: Vec<Entry>, command: Option<Command>) -> Result<ExperimentConfig, ConfigError> {
    let mut seen: Vec<(String, Source)> = Vec::new();
    for e in &entries {
        if !KEYS.contains(&e.key.as_str()) {
            return Err(ConfigError::new(&e.key, e.source, "unknown key"));
        }
        if let Some((_, first)) = seen.iter().find(|(k, s)| k == &e.key && matches!(s, Source::Line(_))) {
            if matches!(e.source, Source::Line(_)) {
                return Err(ConfigError::new(&e.key, e.source, format!("duplicate key, first set on {first}")));
            }
        }
        seen.push((e.key.clone(), e.source));
    }
    let last = |key: &str| entries.iter().rev().find(|e| e.key == key);

    let command = match (command, last("command")) {
        (Some(c), _) => c,
        (None, Some(e)) => e.value.parse().map_err(|m| ConfigError::new("command", e.source, m))?,
        (None, None) => return Err(ConfigError::new("command", Source::Flag, "missing; choose a subcommand")),
    };
    let mut cfg = ExperimentConfig::new(command);
    for key in KEYS {
        let Some(e) = last(key) else { continue };
        let err = |m: String| ConfigError::new(key, e.source, m);
        let v = e.value.trim();
        match key {
            "command" => {}
            "dim" => cfg.dim = positive_count(v).map_err(err)? as usize,
            "density" => cfg.density = v.parse().map_err(|x: vorocell::Error| err(x.to_string()))?,
            "x" => cfg.x = parse_center(v).map_err(err)?,
            "n" => cfg.n = positive_count(v).map_err(err)? as usize,
            "replicates" => cfg.replicates = positive_count(v).map_err(err)? as usize,
            "probes" => cfg.probes = positive_count(v).map_err(err)? as usize,
            "samples" => cfg.samples = positive_count(v).map_err(err)?,
            "inner_samples" => cfg.inner_samples = positive_count(v).map_err(err)? as usize,
            "k_max" => cfg.k_max = positive_count(v).map_err(err)? as usize,
            "n_grid" => cfg.n_grid = parse_list(v, |s| positive_count(s).map(|c| c as usize)).map_err(err)?,
            "t_grid" => cfg.t_grid = parse_list(v, parse_finite).map_err(err)?,
            "seed" => cfg.seed = parse_count(v).map_err(err)?,
            "workers" => cfg.workers = positive_count(v).map_err(err)? as usize,
            "output" if v.is_empty() => return Err(err("empty path".into())),
            "output" => cfg.output = Some(PathBuf::from(v)),
            _ => unreachable!(),
        }
    }
    check_consistency(&cfg, &entries)?;
    Ok(cfg)
}

fn check_consistency(cfg: &ExperimentConfig, entries: &[Entry]) -> Result<(), ConfigError> {
    let source = |key: &str| entries.iter().rev().find(|e| e.key == key).map_or(Source::Flag, |e| e.source);
    if let CenterSpec::Coords(c) = &cfg.x {
        if c.len() != cfg.dim {
            let msg = format!("has {} coordinates but dim={}", c.len(), cfg.dim);
            return Err(ConfigError::new("x", source("x"), msg));
        }
    }
    if cfg.k_max > vorocell::moments::MAX_FACTORIAL {
        let msg = format!("must be <= {}", vorocell::moments::MAX_FACTORIAL);
        return Err(ConfigError::new("k_max", source("k_max"), msg));
    }
    if cfg.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::new("n_grid", source("n_grid"), "must be strictly increasing"));
    }
    if cfg.command == Command::Diam && cfg.probes < 2 {
        return Err(ConfigError::new("probes", source("probes"), "diam needs at least 2 probes"));
    }
    Ok(())
}

/// Nonnegative integer; accepts `1000000`, `1_000_000` and exact float forms like `1e6`.
pub fn parse_count(s: &str) -> Result<u64, String> {
    let cleaned = s.replace('_', "");
    if let Ok(v) = cleaned.parse::<u64>() {
        return Ok(v);
    }
    match cleaned.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53) => Ok(v as u64),
        Ok(_) => Err(format!("`{s}` is not a nonnegative integer")),
        Err(_) => Err(format!("cannot parse `{s}` as a count")),
    }
}

fn positive_count(s: &str) -> Result<u64, String> {
    match parse_count(s)? {
        0 => Err("must be >= 1".to_string()),
        v => Ok(v),
    }
}

fn parse_finite(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite real")),
    }
}

fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.is_empty() {
        return Err("empty list".to_string());
    }
    s.split(',').map(|p| item(p.trim())).collect()
}

fn parse_center(s: &str) -> Result<CenterSpec, String> {
    if s == "origin" {
        return Ok(CenterSpec::Origin);
    }
    parse_list(s, parse_finite).map(CenterSpec::Coords)
}
