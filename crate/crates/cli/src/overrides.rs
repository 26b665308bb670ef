//! `--set a.b.c=value` overrides applied to the JSON form of a scenario.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: String,
    pub value: Value,
}

/// Parses `key=value`. The value is read as JSON when it parses as JSON
/// and taken as a plain string otherwise, so `name=hall` and `seed=3`
/// both work.
pub fn parse_assignment(text: &str) -> Result<Override, String> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| format!("override `{text}` is not of the form key=value"))?;
    if key.is_empty() {
        return Err(format!("override `{text}` has an empty key"));
    }
    Ok(Override {
        key: key.to_owned(),
        value: parse_value(raw),
    })
}

pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

/// Replaces the value at a dotted path. Every segment must already exist;
/// numeric segments index arrays.
pub fn apply(doc: &mut Value, key: &str, value: Value) -> Result<(), String> {
    let mut at = doc;
    for segment in key.split('.') {
        at = match at {
            Value::Object(map) => map.get_mut(segment),
            Value::Array(items) => segment.parse::<usize>().ok().and_then(move |i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| format!("unknown key `{key}` (no `{segment}`)"))?;
    }
    *at = value;
    Ok(())
}
