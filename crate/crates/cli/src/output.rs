use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::SCHEMA_VERSION;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Write through a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// `body`'s fields plus `tool_version` and `schema_version`.
pub fn stamped(body: &impl Serialize) -> Result<Value> {
    let mut map = match serde_json::to_value(body)? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("data".into(), other);
            m
        }
    };
    map.insert("tool_version".into(), Value::from(TOOL_VERSION));
    map.insert("schema_version".into(), Value::from(SCHEMA_VERSION));
    Ok(Value::Object(map))
}

pub fn write_json(path: &Path, body: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&stamped(body)?)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}
