//! One module per subcommand. Each resolves its arguments through the
//! config layers, computes, and writes files through [`Output`].

pub mod decohere;
pub mod fit;
pub mod propagate;
pub mod signal;
pub mod state;
pub mod tomo;

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::config;
use crate::error::{usage, CliResult};
use crate::output::{Format, Output};

/// Settings shared by all commands, after flags and config are merged.
pub struct Ctx {
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub format: Format,
    /// Command fields of the config file.
    pub config: Value,
}

impl Ctx {
    /// Merges preset, config file and flags, in that order of precedence.
    pub fn resolve<T: Serialize + DeserializeOwned>(&self, preset: Value, flags: &T) -> CliResult<(T, Value)> {
        config::resolve(vec![preset, self.config.clone(), serde_json::to_value(flags)?])
    }

    pub fn seed(&self, what: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| usage(format!("{what} is stochastic: pass --seed or set `seed` in the config")))
    }

    pub fn output(&self) -> CliResult<Output> {
        Output::new(&self.out, self.format)
    }

    /// Config echo for the manifest: the merged command fields plus the
    /// globals that affect results.
    pub fn echo(&self, mut merged: Value) -> Value {
        if let Value::Object(map) = &mut merged {
            map.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
            map.insert("format".into(), serde_json::to_value(self.format).expect("enum serializes"));
        }
        merged
    }
}

/// `n` evenly spaced points over `[start, end]`, endpoints included.
pub fn linspace(start: f64, end: f64, n: usize) -> CliResult<Vec<f64>> {
    if !(start.is_finite() && end.is_finite()) {
        return Err(usage("grid bounds must be finite"));
    }
    if !(end > start) {
        return Err(usage(format!("empty grid: end = {end} must exceed start = {start}")));
    }
    if n < 2 {
        return Err(usage(format!("grid needs at least 2 points, got {n}")));
    }
    Ok((0..n).map(|i| start + (end - start) * i as f64 / (n - 1) as f64).collect())
}
