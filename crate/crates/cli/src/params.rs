//! `--param key=value` overrides on top of a serializable default config.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use wlrbg::Error;

pub fn parse_kv(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected key=value, got `{s}`")),
    }
}

/// Values are read as JSON when they parse as JSON, otherwise as strings.
fn value_of(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

pub fn apply<T: Serialize + DeserializeOwned>(base: &T, params: &[(String, String)], what: &str) -> wlrbg::Result<T> {
    let mut value = serde_json::to_value(base)?;
    let map = value
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("{what} parameters are not a table")))?;
    for (key, raw) in params {
        if !map.contains_key(key) {
            let known: Vec<&str> = map.keys().map(String::as_str).collect();
            return Err(Error::Config(format!(
                "unknown parameter `{key}` for {what} (known: {})",
                known.join(", ")
            )));
        }
        map.insert(key.clone(), value_of(raw));
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{what}: {e}")))
}
