//! Key-value parameters merged from a JSON config file and `--key value`
//! flags, with typed accessors that collect diagnostics.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use fekete_field::Vec3;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "field `{}`: {}", self.field, self.message)
    }
}

/// Normalized key: hyphens become underscores.
pub fn normalize_key(key: &str) -> String {
    key.replace('-', "_")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, Value>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: &str, value: Value) {
        self.values.insert(normalize_key(key), value);
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.values.remove(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.values.keys()
    }

    pub fn as_map(&self) -> &BTreeMap<String, Value> {
        &self.values
    }

    /// Parses `--key value` pairs. A flag followed by another flag or by
    /// nothing is a boolean switch.
    pub fn from_flags(args: &[String]) -> Result<Self, Vec<Diagnostic>> {
        let mut params = Params::new();
        let mut errors = Vec::new();
        let mut i = 0;
        while i < args.len() {
            let Some(key) = args[i].strip_prefix("--").filter(|k| !k.is_empty()) else {
                errors.push(Diagnostic::new(args[i].clone(), "expected a --key flag"));
                i += 1;
                continue;
            };
            let next = args.get(i + 1);
            match next {
                Some(v) if !is_flag(v) => {
                    params.insert(key, Value::String(v.clone()));
                    i += 2;
                }
                _ => {
                    params.insert(key, Value::Bool(true));
                    i += 1;
                }
            }
        }
        if errors.is_empty() {
            Ok(params)
        } else {
            Err(errors)
        }
    }

    /// Reads a JSON object. Keys under `parameters` are lifted to the top
    /// level; `command` is returned separately.
    pub fn from_config_file(path: &Path) -> Result<(Self, Option<String>), Diagnostic> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Diagnostic::new("config", format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| {
            Diagnostic::new("config", format!("invalid JSON at line {} column {}: {e}", e.line(), e.column()))
        })?;
        let Value::Object(map) = value else {
            return Err(Diagnostic::new("config", "top level must be a JSON object"));
        };
        let mut params = Params::new();
        let mut command = None;
        for (key, value) in map {
            match (key.as_str(), value) {
                ("command", Value::String(c)) => command = Some(c),
                ("command", _) => return Err(Diagnostic::new("command", "must be a string")),
                ("parameters", Value::Object(inner)) => {
                    for (k, v) in inner {
                        params.insert(&k, v);
                    }
                }
                ("parameters", _) => return Err(Diagnostic::new("parameters", "must be a JSON object")),
                (_, v) => params.insert(&key, v),
            }
        }
        Ok((params, command))
    }

    /// Values in `other` take precedence.
    pub fn merged_with(mut self, other: Params) -> Self {
        self.values.extend(other.values);
        self
    }
}

fn is_flag(s: &str) -> bool {
    s.starts_with("--") && s.len() > 2
}

/// Typed reads over a [`Params`] map that record every problem instead of
/// stopping at the first one.
pub struct Reader<'a> {
    params: &'a Params,
    used: Vec<String>,
    pub diagnostics: Vec<Diagnostic>,
}

fn value_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn value_list(v: &Value) -> Option<Vec<f64>> {
    match v {
        Value::Array(items) => items.iter().map(value_f64).collect(),
        Value::Number(_) => value_f64(v).map(|x| vec![x]),
        Value::String(s) => s
            .split(',')
            .map(|p| p.trim())
            .filter(|p| !p.is_empty())
            .map(|p| p.parse().ok())
            .collect(),
        _ => None,
    }
}

impl<'a> Reader<'a> {
    pub fn new(params: &'a Params) -> Self {
        Reader { params, used: Vec::new(), diagnostics: Vec::new() }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.used.push(key.to_string());
        self.params.values.get(key)
    }

    /// Whether `key` was given; marks it as known either way.
    pub fn has(&mut self, key: &str) -> bool {
        self.used.push(key.to_string());
        self.params.contains(key)
    }

    pub fn error(&mut self, field: &str, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic::new(field, message));
    }

    fn missing(&mut self, key: &str) {
        self.error(key, "missing required parameter");
    }

    pub fn opt_f64(&mut self, key: &str) -> Option<f64> {
        let v = self.raw(key)?;
        match value_f64(v) {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                self.error(key, format!("expected a finite number, got {v}"));
                None
            }
        }
    }

    pub fn f64(&mut self, key: &str) -> Option<f64> {
        if !self.params.contains(key) {
            self.used.push(key.to_string());
            self.missing(key);
            return None;
        }
        self.opt_f64(key)
    }

    pub fn f64_or(&mut self, key: &str, default: f64) -> Option<f64> {
        if self.params.contains(key) {
            self.opt_f64(key)
        } else {
            self.used.push(key.to_string());
            Some(default)
        }
    }

    /// Adds a diagnostic when `value` fails `ok`.
    pub fn check<T: Copy>(&mut self, key: &str, value: Option<T>, ok: impl Fn(T) -> bool, constraint: &str) -> Option<T> {
        match value {
            Some(v) if ok(v) => Some(v),
            Some(_) => {
                self.error(key, format!("must be {constraint}"));
                None
            }
            None => None,
        }
    }

    pub fn positive(&mut self, key: &str, value: Option<f64>) -> Option<f64> {
        self.check(key, value, |v| v > 0.0, "positive")
    }

    pub fn opt_u64(&mut self, key: &str) -> Option<u64> {
        let v = self.raw(key)?;
        let parsed = match v {
            Value::Number(n) => n.as_u64(),
            Value::String(s) => s.trim().parse().ok(),
            _ => None,
        };
        if parsed.is_none() {
            self.error(key, format!("expected a non-negative integer, got {v}"));
        }
        parsed
    }

    pub fn usize(&mut self, key: &str) -> Option<usize> {
        if !self.params.contains(key) {
            self.used.push(key.to_string());
            self.missing(key);
            return None;
        }
        self.opt_u64(key).map(|v| v as usize)
    }

    pub fn usize_or(&mut self, key: &str, default: usize) -> Option<usize> {
        if self.params.contains(key) {
            self.opt_u64(key).map(|v| v as usize)
        } else {
            self.used.push(key.to_string());
            Some(default)
        }
    }

    pub fn opt_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        match value_list(v) {
            Some(xs) if xs.iter().all(|x| x.is_finite()) => Some(xs),
            _ => {
                self.error(key, format!("expected a comma-separated list of numbers, got {v}"));
                None
            }
        }
    }

    pub fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        if !self.params.contains(key) {
            self.used.push(key.to_string());
            self.missing(key);
            return None;
        }
        self.opt_list(key)
    }

    pub fn vec3_or(&mut self, key: &str, default: Vec3) -> Option<Vec3> {
        if !self.params.contains(key) {
            self.used.push(key.to_string());
            return Some(default);
        }
        self.vec3(key)
    }

    pub fn vec3(&mut self, key: &str) -> Option<Vec3> {
        let xs = self.list(key)?;
        if xs.len() != 3 {
            self.error(key, format!("expected 3 components, got {}", xs.len()));
            return None;
        }
        Some(Vec3::new(xs[0], xs[1], xs[2]))
    }

    pub fn opt_string(&mut self, key: &str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.error(key, format!("expected a string, got {other}"));
                None
            }
        }
    }

    pub fn string_or(&mut self, key: &str, default: &str) -> Option<String> {
        if self.params.contains(key) {
            self.opt_string(key)
        } else {
            self.used.push(key.to_string());
            Some(default.to_string())
        }
    }

    /// One of `choices`, defaulting to the first.
    pub fn choice(&mut self, key: &str, choices: &[&str]) -> Option<String> {
        let s = self.string_or(key, choices[0])?;
        if choices.contains(&s.as_str()) {
            Some(s)
        } else {
            self.error(key, format!("must be one of {}", choices.join(", ")));
            None
        }
    }

    pub fn bool_or(&mut self, key: &str, default: bool) -> Option<bool> {
        let Some(v) = self.raw(key) else {
            return Some(default);
        };
        let parsed = match v {
            Value::Bool(b) => Some(*b),
            Value::String(s) => match s.as_str() {
                "true" | "yes" | "1" => Some(true),
                "false" | "no" | "0" => Some(false),
                _ => None,
            },
            _ => None,
        };
        if parsed.is_none() {
            self.error(key, format!("expected true or false, got {v}"));
        }
        parsed
    }

    /// Diagnostics for keys that no accessor asked for.
    pub fn finish(mut self) -> Vec<Diagnostic> {
        let unknown: Vec<String> = self
            .params
            .keys()
            .filter(|k| !self.used.contains(k))
            .cloned()
            .collect();
        for key in unknown {
            self.error(&key, "unknown parameter for this command");
        }
        self.diagnostics
    }
}
