//! Flat JSON scenario files. Keys are the long flag names; flags given on the command line win.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: Map<String, Value>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(entries)) => {
                if let Some((k, _)) = entries.iter().find(|(_, v)| v.is_object() || v.is_array()) {
                    return Err(CliError::Usage(format!("config must be flat; key {k:?} holds a nested value")));
                }
                Ok(Self { entries })
            }
            Ok(_) => Err(CliError::Usage("config must be a JSON object".into())),
            Err(e) => Err(CliError::Usage(format!("malformed config: {e}"))),
        }
    }

    /// Rejects keys the current verb does not use.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.entries.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::Usage(format!("unknown config key {k:?} for this verb"))),
            None => Ok(()),
        }
    }

    /// The flag value when given, otherwise the config value under `key`.
    pub fn pick<T: DeserializeOwned>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.entries.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| CliError::Usage(format!("config key {key:?}: {e}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let c = Config::parse(r#"{"grid": 64, "surface": "paraboloid"}"#).unwrap();
        assert_eq!(c.pick(Some(32usize), "grid").unwrap(), Some(32));
        assert_eq!(c.pick::<usize>(None, "grid").unwrap(), Some(64));
        assert_eq!(c.pick::<String>(None, "surface").unwrap().as_deref(), Some("paraboloid"));
        assert_eq!(c.pick::<String>(None, "field").unwrap(), None);
        assert!(c.pick::<usize>(None, "surface").is_err());
        assert!(c.check_keys(&["grid", "surface"]).is_ok());
        assert!(c.check_keys(&["grid"]).is_err());
    }

    #[test]
    fn malformed() {
        assert!(Config::parse("[1, 2]").is_err());
        assert!(Config::parse("{\"grid\": ").is_err());
        assert!(Config::parse(r#"{"a": {"b": 1}}"#).is_err());
    }
}
