//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. `n_list` is a comma
//! separated list. Keys:
//!
//! | key                | default                                  |
//! |--------------------|------------------------------------------|
//! | `scenario`         | required: `spline_m` or `tv`             |
//! | `m`                | `2` (splines only)                       |
//! | `f0`               | `sin2pi` for splines, `step3` for TV     |
//! | `n_list`           | `128, 256, 512, 1024, 2048, 4096, 8192`  |
//! | `reps`             | `100`                                    |
//! | `lambda_scale`     | `0.05` for splines, `0.3` for TV         |
//! | `alpha`            | `1/m` for splines, `1` for TV            |
//! | `seed`             | `20240601`                               |
//! | `radius_grid_size` | `64`                                     |
//! | `out_dir`          | unset                                    |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;
use tradeoff_core::experiments::{ExperimentConfig, Scenario, TrueFunction};

pub const KEYS: [&str; 10] = [
    "scenario",
    "m",
    "f0",
    "n_list",
    "reps",
    "lambda_scale",
    "alpha",
    "seed",
    "radius_grid_size",
    "out_dir",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{key}`: {message}")]
    Invalid { key: String, message: String },
}

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub out_dir: Option<PathBuf>,
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| invalid(key, format!("cannot parse {v:?}")))
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: BTreeMap<&str, &str> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| ConfigError::Parse { line: i + 1, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(parse_err(format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(parse_err(format!("empty value for `{key}`")));
        }
        if entries.insert(key, value).is_some() {
            return Err(parse_err(format!("duplicate key `{key}`")));
        }
    }

    let scenario = match entries.get("scenario").copied() {
        Some("spline_m") => {
            let m = match entries.get("m") {
                Some(v) => number("m", v)?,
                None => 2,
            };
            if m < 2 {
                return Err(invalid("m", format!("spline order must be at least 2, got {m}")));
            }
            Scenario::Spline { m }
        }
        Some("tv") => {
            if entries.contains_key("m") {
                return Err(invalid("m", "not allowed with scenario = tv"));
            }
            Scenario::Tv
        }
        Some(other) => {
            return Err(invalid("scenario", format!("expected spline_m or tv, got {other:?}")))
        }
        None => return Err(invalid("scenario", "missing")),
    };

    let mut cfg = ExperimentConfig::new(scenario);
    if let Some(v) = entries.get("f0") {
        cfg.f0 = TrueFunction::parse(v).ok_or_else(|| invalid("f0", format!("unknown function {v:?}")))?;
    }
    if let Some(v) = entries.get("n_list") {
        let inner = v.trim_start_matches('[').trim_end_matches(']');
        cfg.n_list = inner
            .split(',')
            .map(|s| number("n_list", s.trim()))
            .collect::<Result<_, _>>()?;
        if cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_list", "must be strictly increasing"));
        }
    }
    if let Some(v) = entries.get("reps") {
        cfg.reps = number("reps", v)?;
    }
    if let Some(v) = entries.get("lambda_scale") {
        cfg.lambda_scale = number("lambda_scale", v)?;
        if !(cfg.lambda_scale > 0.0 && cfg.lambda_scale.is_finite()) {
            return Err(invalid("lambda_scale", "must be positive"));
        }
    }
    if let Some(v) = entries.get("alpha") {
        cfg.alpha = number("alpha", v)?;
        if !(cfg.alpha > 0.0 && cfg.alpha < 2.0) {
            return Err(invalid("alpha", format!("must lie in (0, 2), got {}", cfg.alpha)));
        }
    }
    if let Some(v) = entries.get("seed") {
        cfg.master_seed = number("seed", v)?;
    }
    if let Some(v) = entries.get("radius_grid_size") {
        cfg.radius_grid_size = number("radius_grid_size", v)?;
    }
    cfg.validate().map_err(|e| invalid("config", e.to_string()))?;
    Ok(RunConfig {
        experiment: cfg,
        out_dir: entries.get("out_dir").map(PathBuf::from),
    })
}

/// Canonical text form; [`parse_str`] reads it back to an equal value.
pub fn emit(cfg: &RunConfig) -> String {
    let e = &cfg.experiment;
    let mut s = String::new();
    let _ = writeln!(s, "scenario = {}", e.scenario.name());
    if let Scenario::Spline { m } = e.scenario {
        let _ = writeln!(s, "m = {m}");
    }
    let _ = writeln!(s, "f0 = {}", e.f0.name());
    let n_list: Vec<String> = e.n_list.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(s, "n_list = {}", n_list.join(", "));
    let _ = writeln!(s, "reps = {}", e.reps);
    let _ = writeln!(s, "lambda_scale = {:?}", e.lambda_scale);
    let _ = writeln!(s, "alpha = {:?}", e.alpha);
    let _ = writeln!(s, "seed = {}", e.master_seed);
    let _ = writeln!(s, "radius_grid_size = {}", e.radius_grid_size);
    if let Some(dir) = &cfg.out_dir {
        let _ = writeln!(s, "out_dir = {}", dir.display());
    }
    s
}

/// SHA-256 of the canonical form of the experiment, excluding `out_dir`.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let text = emit(&RunConfig {
        experiment: cfg.clone(),
        out_dir: None,
    });
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
