//! Merging of `--config` files with command-line flags.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Options for `command`: the config file's `command` section (or the whole
/// file when it has none), overlaid with every flag that was given. The
/// resolved configuration, defaults included, is logged.
pub fn resolve<A, R>(command: &str, file: Option<&Path>, flags: &A) -> Result<R>
where
    A: Serialize,
    R: DeserializeOwned + Serialize,
{
    let mut merged = match file {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let value: Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            section(value, command)?
        }
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags)? else {
        unreachable!("flag structs serialize to objects")
    };
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    let resolved: R = serde_json::from_value(Value::Object(merged))
        .with_context(|| format!("{command} options"))?;
    log::info!("{command} config: {}", serde_json::to_string(&resolved)?);
    Ok(resolved)
}

fn section(value: Value, command: &str) -> Result<Map<String, Value>> {
    let Value::Object(mut obj) = value else {
        bail!("config file must hold a JSON object")
    };
    match obj.remove(command) {
        Some(Value::Object(s)) => Ok(s),
        Some(_) => bail!("config section {command:?} must be an object"),
        None => Ok(obj),
    }
}
