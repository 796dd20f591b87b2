use serde_json::Value;

use crate::CliError;

/// Apply `a.b.c=value` to a JSON object. The value is parsed as JSON, falling back to
/// a plain string; the addressed field must already exist.
pub fn apply_override(root: &mut Value, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override {spec:?} is not PATH=VALUE")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    for key in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(key),
            Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::Invalid(format!("override {path:?}: no field {key:?}")))?;
    }
    *node = value;
    Ok(())
}
