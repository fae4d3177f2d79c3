use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BenchError;

/// Benchmark parameters as given in a plan file or on the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Params(pub BTreeMap<String, Value>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    /// Parses `key=value`. The value is read as JSON when it parses, else as a string.
    pub fn parse_assignment(s: &str) -> Result<(String, Value), BenchError> {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| BenchError::InvalidParam { key: s.to_string(), reason: "expected key=value".into() })?;
        let k = k.trim();
        if k.is_empty() {
            return Err(BenchError::InvalidParam { key: s.to_string(), reason: "empty key".into() });
        }
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        Ok((k.to_string(), v))
    }

    pub fn from_assignments<'a>(items: impl IntoIterator<Item = &'a str>) -> Result<Self, BenchError> {
        let mut p = Params::new();
        for item in items {
            let (k, v) = Self::parse_assignment(item)?;
            p.0.insert(k, v);
        }
        Ok(p)
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.0.insert(key.to_string(), value.into());
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.0.get(key)
    }

    /// Non-negative integer parameter. Accepts JSON numbers or numeric strings
    /// (`"1e6"` style exponents included when they denote an integer).
    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, BenchError> {
        let Some(v) = self.0.get(key) else { return Ok(None) };
        let bad = |reason: &str| BenchError::InvalidParam { key: key.to_string(), reason: reason.to_string() };
        let as_f64 = match v {
            Value::Number(n) => {
                if let Some(u) = n.as_u64() {
                    return Ok(Some(u));
                }
                n.as_f64().ok_or_else(|| bad("not a number"))?
            }
            Value::String(s) => {
                if let Ok(u) = s.trim().replace('_', "").parse::<u64>() {
                    return Ok(Some(u));
                }
                s.trim().parse::<f64>().map_err(|_| bad("not an integer"))?
            }
            _ => return Err(bad("not an integer")),
        };
        if as_f64 >= 0.0 && as_f64.fract() == 0.0 && as_f64 < 1.8e19 {
            Ok(Some(as_f64 as u64))
        } else {
            Err(bad("not a non-negative integer"))
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, BenchError> {
        Ok(self.get_u64(key)?.map(|v| v as usize))
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>, BenchError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Bool(b)) => Ok(Some(*b)),
            Some(Value::String(s)) if s == "true" || s == "false" => Ok(Some(s == "true")),
            Some(_) => Err(BenchError::InvalidParam { key: key.to_string(), reason: "not a boolean".into() }),
        }
    }

    pub fn get_str(&self, key: &str) -> Option<String> {
        match self.0.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => Some(other.to_string()),
        }
    }

    /// Fails on keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<(), BenchError> {
        match self.0.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(BenchError::UnknownParam(k.clone())),
            None => Ok(()),
        }
    }

    /// `key=value` words, the inverse of [`Params::from_assignments`].
    pub fn to_assignments(&self) -> Vec<String> {
        self.0
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("{k}={s}"),
                other => format!("{k}={other}"),
            })
            .collect()
    }
}

impl fmt::Display for Params {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_assignments().join(" "))
    }
}
