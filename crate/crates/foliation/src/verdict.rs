//! Machine-readable CLI output: a Verdict envelope carrying the command
//! echo, input digests, the result payload, and a numerics record naming
//! every tolerance behind a numeric decision — plus a small structural
//! schema checker used to validate each document before it is emitted.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct Numerics {
    /// Every tolerance consulted while producing the payload, by name.
    pub tolerances: BTreeMap<String, f64>,
    /// Which decisions ran on the exact (Gaussian-rational) path.
    pub exact_path: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub command: Vec<String>,
    pub inputs: Vec<InputDigest>,
    pub payload: Value,
    pub numerics: Numerics,
}

pub fn digest_bytes(path: &str, bytes: &[u8]) -> InputDigest {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let sha256 = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    InputDigest { path: path.to_string(), sha256 }
}

// ---- structural schema validation ---------------------------------------------

/// Validate `value` against a structural schema supporting: `type` (string or
/// list), `properties`, `required`, `items`, `enum`, `additionalProperties`
/// (boolean), and `oneOf`.
pub fn validate(schema: &Value, value: &Value) -> Result<(), String> {
    validate_at(schema, value, "$")
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(n) => {
            if n.is_i64() || n.is_u64() {
                "integer"
            } else {
                "number"
            }
        }
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

fn type_matches(expected: &str, v: &Value) -> bool {
    match expected {
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        other => type_name(v) == other,
    }
}

fn validate_at(schema: &Value, value: &Value, path: &str) -> Result<(), String> {
    let obj = schema
        .as_object()
        .ok_or_else(|| format!("{path}: schema node is not an object"))?;
    if let Some(one_of) = obj.get("oneOf").and_then(Value::as_array) {
        let mut errs = Vec::new();
        for (i, sub) in one_of.iter().enumerate() {
            match validate_at(sub, value, path) {
                Ok(()) => return Ok(()),
                Err(e) => errs.push(format!("variant {i}: {e}")),
            }
        }
        return Err(format!("{path}: no oneOf variant matched ({})", errs.join("; ")));
    }
    if let Some(t) = obj.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, value),
            Value::Array(list) => list
                .iter()
                .filter_map(Value::as_str)
                .any(|s| type_matches(s, value)),
            _ => false,
        };
        if !ok {
            return Err(format!(
                "{path}: expected type {t}, found {}",
                type_name(value)
            ));
        }
    }
    if let Some(allowed) = obj.get("enum").and_then(Value::as_array) {
        if !allowed.contains(value) {
            return Err(format!("{path}: {value} not in enum {allowed:?}"));
        }
    }
    if let Some(map) = value.as_object() {
        if let Some(required) = obj.get("required").and_then(Value::as_array) {
            for key in required.iter().filter_map(Value::as_str) {
                if !map.contains_key(key) {
                    return Err(format!("{path}: missing required field '{key}'"));
                }
            }
        }
        let props = obj.get("properties").and_then(Value::as_object);
        if let Some(props) = props {
            for (key, sub) in props {
                if let Some(v) = map.get(key) {
                    validate_at(sub, v, &format!("{path}.{key}"))?;
                }
            }
        }
        if obj.get("additionalProperties") == Some(&Value::Bool(false)) {
            for key in map.keys() {
                if props.map(|p| !p.contains_key(key)).unwrap_or(true) {
                    return Err(format!("{path}: unexpected field '{key}'"));
                }
            }
        }
    }
    if let (Some(items), Some(arr)) = (obj.get("items"), value.as_array()) {
        for (i, v) in arr.iter().enumerate() {
            validate_at(items, v, &format!("{path}[{i}]"))?;
        }
    }
    Ok(())
}
