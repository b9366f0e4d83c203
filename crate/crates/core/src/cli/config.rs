//! Run configuration: a JSON document with `model`, `grid`, `task`, `seed`,
//! `tolerances` and `output_dir`, plus `--key value` overrides.

use crate::error::{Error, Result};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

/// Keys addressed at the top level when given without a dotted prefix.
const TOP_LEVEL: [&str; 2] = ["seed", "output_dir"];

#[derive(Clone, Debug)]
pub struct Config {
    pub root: Value,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let root: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        if !root.is_object() {
            return Err(Error::Config("config must be a JSON object".into()));
        }
        Ok(Self { root })
    }

    /// Applies `--key value` pairs. Dotted keys address nested fields; bare
    /// keys go to `task` except `seed` and `output_dir`. Values are read as
    /// JSON when they parse, as strings otherwise.
    pub fn apply_overrides(&mut self, args: &[String]) -> Result<()> {
        let mut it = args.iter();
        while let Some(flag) = it.next() {
            let key = flag
                .strip_prefix("--")
                .filter(|k| !k.is_empty())
                .ok_or_else(|| Error::Config(format!("expected `--key value`, got `{flag}`")))?;
            let raw = it.next().ok_or_else(|| Error::Config(format!("missing value for `--{key}`")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            let path = if key.contains('.') || TOP_LEVEL.contains(&key) { key.to_string() } else { format!("task.{key}") };
            self.set(&path, value)?;
        }
        Ok(())
    }

    fn set(&mut self, dotted: &str, value: Value) -> Result<()> {
        let mut node = &mut self.root;
        let parts: Vec<&str> = dotted.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::Config(format!("`{dotted}` crosses a non-object value")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value);
                return Ok(());
            }
            node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        }
        Ok(())
    }

    pub fn get(&self, dotted: &str) -> Option<&Value> {
        dotted.split('.').try_fold(&self.root, |v, k| v.get(k))
    }

    pub fn model_name(&self) -> Result<String> {
        self.get("model.name")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Error::Config("missing `model.name`".into()))
    }

    /// Model parameters with the `grid` section merged on top.
    pub fn model_params(&self) -> Value {
        let mut params = match self.get("model.params") {
            Some(Value::Object(m)) => m.clone(),
            _ => Map::new(),
        };
        if let Some(Value::Object(grid)) = self.get("grid") {
            for (k, v) in grid {
                params.insert(k.clone(), v.clone());
            }
        }
        Value::Object(params)
    }

    pub fn seed(&self) -> Result<u64> {
        match self.get("seed") {
            None => Ok(0),
            Some(v) => v.as_u64().ok_or_else(|| Error::Config("`seed` must be a nonnegative integer".into())),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output_dir").and_then(Value::as_str).unwrap_or("."))
    }

    pub fn task_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(&format!("task.{key}")) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| Error::Config(format!("`task.{key}` must be a number"))),
        }
    }

    pub fn task_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(&format!("task.{key}")) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|u| u as usize)
                .ok_or_else(|| Error::Config(format!("`task.{key}` must be a nonnegative integer"))),
        }
    }

    pub fn tolerance(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(&format!("tolerances.{key}")) {
            None => Ok(default),
            Some(v) => v.as_f64().ok_or_else(|| Error::Config(format!("`tolerances.{key}` must be a number"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_follow_dotted_paths() {
        let mut c = Config::parse(r#"{"model": {"name": "m1"}, "task": {"t": 1}}"#).unwrap();
        let args: Vec<String> = ["--t", "2.5", "--seed", "7", "--model.params.rate", "3", "--task.label", "abc"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        c.apply_overrides(&args).unwrap();
        assert_eq!(c.task_f64("t", 0.0).unwrap(), 2.5);
        assert_eq!(c.seed().unwrap(), 7);
        assert_eq!(c.get("model.params.rate"), Some(&Value::from(3)));
        assert_eq!(c.get("task.label"), Some(&Value::from("abc")));
    }

    #[test]
    fn grid_section_overrides_params() {
        let c = Config::parse(r#"{"model": {"name": "m1", "params": {"cells": 10}}, "grid": {"cells": 50}}"#).unwrap();
        assert_eq!(c.model_params()["cells"], 50);
    }

    #[test]
    fn malformed_input_is_a_config_error() {
        assert!(matches!(Config::parse("[1, 2]"), Err(Error::Config(_))));
        assert!(matches!(Config::parse("{"), Err(Error::Config(_))));
        let mut c = Config::parse("{}").unwrap();
        assert!(c.apply_overrides(&["--t".to_string()]).is_err());
        assert!(c.apply_overrides(&["t".to_string(), "1".to_string()]).is_err());
        assert!(c.model_name().is_err());
    }
}
