use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::Deserialize;
use skirent_core::distributions::{parse_distribution, DayDistribution};

use crate::{CommonArgs, Format};

/// Run settings read from `--config`; every field can be overridden by a flag.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub b: Option<u64>,
    #[serde(rename = "R", alias = "r")]
    pub r: Option<f64>,
    pub lambda: Option<f64>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    /// Inline distribution or family object, or a path to a file holding one.
    pub distribution: Option<serde_json::Value>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub etas: Option<Vec<f64>>,
    pub trials: Option<u32>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Flags merged over the config file, validated on access.
#[derive(Debug)]
pub struct Settings {
    b: Option<u64>,
    r: Option<f64>,
    lambda: Option<f64>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    distribution: Option<serde_json::Value>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub etas: Option<Vec<f64>>,
    pub trials: Option<u32>,
}

impl Settings {
    pub fn merge(args: &CommonArgs, file: RunConfig) -> Self {
        Self {
            b: args.b.or(file.b),
            r: args.r.or(file.r),
            lambda: args.lambda.or(file.lambda),
            epsilon: args.epsilon.or(file.epsilon),
            seed: args.seed.or(file.seed),
            distribution: args.dist.clone().map(serde_json::Value::String).or(file.distribution),
            output: args.out.clone().or(file.output),
            format: args.format.or(file.format).unwrap_or(Format::Json),
            etas: file.etas,
            trials: file.trials,
        }
    }

    pub fn b(&self) -> anyhow::Result<u64> {
        let b = self.b.ok_or_else(|| anyhow!("missing --b"))?;
        if b < 2 {
            bail!("--b must be at least 2, got {b}");
        }
        Ok(b)
    }

    pub fn b_or(&self, default: u64) -> anyhow::Result<u64> {
        match self.b {
            Some(_) => self.b(),
            None => Ok(default),
        }
    }

    pub fn has_b(&self) -> bool {
        self.b.is_some()
    }

    pub fn r(&self) -> anyhow::Result<f64> {
        check_ratio(self.r.ok_or_else(|| anyhow!("missing --r"))?)
    }

    pub fn r_opt(&self) -> anyhow::Result<Option<f64>> {
        self.r.map(check_ratio).transpose()
    }

    pub fn r_or(&self, default: f64) -> anyhow::Result<f64> {
        check_ratio(self.r.unwrap_or(default))
    }

    pub fn lambda(&self) -> anyhow::Result<Option<f64>> {
        match self.lambda {
            Some(l) if !(l > 0.0 && l <= 1.0) => bail!("--lambda must lie in (0, 1], got {l}"),
            other => Ok(other),
        }
    }

    pub fn epsilon(&self) -> anyhow::Result<Option<f64>> {
        match self.epsilon {
            Some(e) if !(e > 0.0 && e.is_finite()) => bail!("--epsilon must be positive, got {e}"),
            other => Ok(other),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn distribution(&self) -> anyhow::Result<DayDistribution> {
        let value = self.distribution.as_ref().ok_or_else(|| anyhow!("missing --dist"))?;
        read_distribution(value)
    }

    pub fn distribution_opt(&self) -> anyhow::Result<Option<DayDistribution>> {
        self.distribution.as_ref().map(read_distribution).transpose()
    }
}

fn check_ratio(r: f64) -> anyhow::Result<f64> {
    if !(r > 1.0 && r.is_finite()) {
        bail!("--r must be a finite number above 1, got {r}");
    }
    Ok(r)
}

/// Accepts inline JSON, a path to a JSON file, or an already-parsed object.
pub fn read_distribution(value: &serde_json::Value) -> anyhow::Result<DayDistribution> {
    let text = match value {
        serde_json::Value::String(s) => read_inline_or_file(s)?,
        other => other.to_string(),
    };
    Ok(parse_distribution(&text)?)
}

pub fn read_inline_or_file(arg: &str) -> anyhow::Result<String> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        fs::read_to_string(arg).with_context(|| format!("reading {arg}"))
    }
}
