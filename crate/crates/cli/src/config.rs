//! Layered configuration: preset, then `--config` file, then flags.
//!
//! Each command's arguments derive both `clap::Args` and serde, with every
//! field optional. Layers are converted to JSON and overlaid key by key, with
//! nulls (unset flags) skipped, then deserialized strictly.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{usage, CliError, CliResult};
use crate::output::Format;

/// Top-level keys every config file may carry besides the command's fields.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Globals {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub threads: Option<usize>,
}

const GLOBAL_KEYS: [&str; 4] = ["seed", "out", "format", "threads"];

/// Splits a config file into its global keys and the command's own fields.
pub fn load(path: Option<&Path>) -> CliResult<(Globals, Value)> {
    let Some(path) = path else {
        return Ok((Globals::default(), Value::Object(Map::new())));
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(usage(format!("config {} must be a JSON object", path.display())));
    };
    let mut globals = Map::new();
    for key in GLOBAL_KEYS {
        if let Some(v) = map.remove(key) {
            globals.insert(key.to_string(), v);
        }
    }
    let globals: Globals = serde_json::from_value(Value::Object(globals))
        .map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    Ok((globals, Value::Object(map)))
}

/// Recursively overlays `top` onto `base`; nulls in `top` leave `base` alone.
pub fn overlay(base: &mut Value, top: Value) {
    match top {
        Value::Null => {}
        Value::Object(t) => {
            if !base.is_object() {
                *base = Value::Object(Map::new());
            }
            let b = base.as_object_mut().expect("just made an object");
            for (k, v) in t {
                if !v.is_null() {
                    overlay(b.entry(k).or_insert(Value::Null), v);
                }
            }
        }
        t => *base = t,
    }
}

/// Merges the layers in order and deserializes the result strictly. Returns
/// the parsed arguments and the merged JSON, for the manifest.
pub fn resolve<T: Serialize + DeserializeOwned>(layers: Vec<Value>) -> CliResult<(T, Value)> {
    let mut merged = Value::Object(Map::new());
    for layer in layers {
        overlay(&mut merged, layer);
    }
    let parsed = serde_json::from_value(merged.clone()).map_err(|e| usage(format!("configuration error: {e}")))?;
    Ok((parsed, merged))
}
