//! Layered configuration: defaults, then a TOML file, then `key=value`
//! overrides with dotted keys.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("override `{0}` is not of the form key=value")]
    Override(String),
    #[error("override `{key}`: `{segment}` is not a table")]
    NotATable { key: String, segment: String },
    #[error("config file: {0}")]
    Parse(toml::de::Error),
    #[error("{0}")]
    Invalid(toml::de::Error),
    #[error("serialising defaults: {0}")]
    Serialise(toml::ser::Error),
}

/// Recursively copies `overlay` into `base`; nested tables merge key by key.
pub fn merge(base: &mut Table, overlay: Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses the right-hand side as a TOML value, falling back to a string.
fn parse_value(raw: &str) -> Value {
    let raw = raw.trim();
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Applies one `a.b.c=value` override.
pub fn set_key(table: &mut Table, assignment: &str) -> Result<(), LoadError> {
    let (key, raw) = assignment
        .split_once('=')
        .filter(|(k, _)| !k.trim().is_empty())
        .ok_or_else(|| LoadError::Override(assignment.to_string()))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    let (last, parents) = path
        .split_last()
        .expect("split yields at least one segment");
    let mut cursor = table;
    for segment in parents {
        let entry = cursor
            .entry(segment.to_string())
            .or_insert_with(|| Value::Table(Table::new()));
        cursor = entry.as_table_mut().ok_or_else(|| LoadError::NotATable {
            key: key.to_string(),
            segment: segment.to_string(),
        })?;
    }
    cursor.insert(last.to_string(), parse_value(raw));
    Ok(())
}

/// `defaults`, overlaid by the TOML text `file` and then by `overrides`.
pub fn layered<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: Option<&str>,
    overrides: &[String],
) -> Result<T, LoadError> {
    let mut table = Table::try_from(defaults).map_err(LoadError::Serialise)?;
    if let Some(text) = file {
        merge(&mut table, toml::from_str(text).map_err(LoadError::Parse)?);
    }
    for o in overrides {
        set_key(&mut table, o)?;
    }
    table.try_into().map_err(LoadError::Invalid)
}
