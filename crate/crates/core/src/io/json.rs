//! Canonical JSON output.

use serde::Serialize;
use serde_json::{Number, Value};

use crate::Result;

/// Rounds to 9 significant digits; `-0.0` becomes `0.0`.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    // Formatting goes through Rust's own float printer, not the platform libc.
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Shortest decimal form of `round_sig9(x)`.
pub fn format_sig9(x: f64) -> String {
    let r = round_sig9(x);
    if r.is_finite() {
        format!("{r:?}")
    } else {
        r.to_string()
    }
}

/// Rounds every float in place. Non-finite floats become `null`.
pub fn canonicalize(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig9(n.as_f64().unwrap_or(0.0));
            *value = Number::from_f64(r).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Pretty JSON with sorted keys, rounded floats and a trailing newline.
pub fn to_canonical_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)?;
    canonicalize(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}
