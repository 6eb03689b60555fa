//! Output formatting shared by the CSV and JSON writers.
//!
//! Every number leaves the crate rounded to 12 significant digits so that
//! repeated runs produce byte-identical files.

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;

/// Unit tag written next to every emitted quantity.
pub const UNITS: &str = "omega_T";

pub fn fmt_sig(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn round_sig(x: f64) -> f64 {
    if x.is_finite() {
        fmt_sig(x).parse().unwrap_or(x)
    } else {
        x
    }
}

fn round_value(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => n
            .as_f64()
            .and_then(|x| serde_json::Number::from_f64(round_sig(x)))
            .map(Value::Number)
            .unwrap_or(Value::Null),
        Value::Array(items) => Value::Array(items.into_iter().map(round_value).collect()),
        Value::Object(map) => {
            Value::Object(map.into_iter().map(|(k, v)| (k, round_value(v))).collect())
        }
        other => other,
    }
}

pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<Value> {
    Ok(round_value(serde_json::to_value(value)?))
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&to_rounded_json(value)?)?;
    s.push('\n');
    Ok(s)
}

/// Comment line heading every CSV file.
pub fn csv_preamble() -> String {
    format!("# units: xi and energies in {UNITS}; probabilities and errors dimensionless\n")
}
