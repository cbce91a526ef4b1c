//! Scenario files: TOML with a top-level `kind` and a `[parameters]` table.
//!
//! ```toml
//! kind = "noether"
//! out = "runs/noether"      # optional
//!
//! [parameters]
//! lagrangian = "quadratic"
//! vv = 1.0
//! ww = 1.0
//! alpha = 0.5
//! n = 256
//! q_a = 0.0
//! q_b = 1.0
//! symmetry = "space-translation"
//! ```

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use toml::{Table, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    OperatorTest,
    Extremal,
    Noether,
    Friction,
    Control,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::OperatorTest => "operator-test",
            Kind::Extremal => "extremal",
            Kind::Noether => "noether",
            Kind::Friction => "friction",
            Kind::Control => "control",
        }
    }

    fn parse(s: &str) -> Option<Kind> {
        [Kind::OperatorTest, Kind::Extremal, Kind::Noether, Kind::Friction, Kind::Control].into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: Kind,
    pub out: Option<PathBuf>,
    pub parameters: Table,
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, CliError> {
        let mut table: Table = text.parse().map_err(|e: toml::de::Error| {
            let (line, column) = match e.span() {
                Some(s) => {
                    let (l, c) = line_column(text, s.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            CliError::Parse { message: e.message().to_string(), line, column }
        })?;
        let kind = match table.remove("kind") {
            Some(Value::String(s)) => Kind::parse(&s).ok_or_else(|| {
                CliError::validation("kind", format!("unknown kind \"{s}\"; expected operator-test, extremal, noether, friction or control"))
            })?,
            Some(_) => return Err(CliError::validation("kind", "must be a string")),
            None => return Err(CliError::validation("kind", "missing")),
        };
        let out = match table.remove("out") {
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => return Err(CliError::validation("out", "must be a string")),
            None => None,
        };
        let parameters = match table.remove("parameters") {
            Some(Value::Table(t)) => t,
            Some(_) => return Err(CliError::validation("parameters", "must be a table")),
            None => Table::new(),
        };
        if let Some(k) = table.keys().next() {
            return Err(CliError::validation(k.as_str(), "unknown top-level key; parameters go in [parameters]"));
        }
        Ok(Scenario { kind, out, parameters })
    }

    pub fn load(path: &Path) -> Result<Scenario, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Scenario::parse(&text)
    }

    /// `{"kind": ..., "parameters": {...}}` for the manifest.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::json!({ "kind": self.kind, "parameters": self.parameters })
    }
}

/// Typed access to `[parameters]` that records which keys were read, so
/// leftovers can be reported as unknown.
pub struct Params<'a> {
    table: &'a Table,
    used: RefCell<BTreeSet<String>>,
}

impl<'a> Params<'a> {
    pub fn new(table: &'a Table) -> Self {
        Params { table, used: RefCell::new(BTreeSet::new()) }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.used.borrow_mut().insert(key.to_string());
        self.table.get(key)
    }

    pub fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn number(key: &str, v: &Value) -> Result<f64, CliError> {
        let x = match v {
            Value::Float(x) => *x,
            Value::Integer(i) => *i as f64,
            _ => return Err(CliError::validation(key, "must be a number")),
        };
        if !x.is_finite() {
            return Err(CliError::validation(key, "must be finite"));
        }
        Ok(x)
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        match self.get(key) {
            Some(v) => Self::number(key, v),
            None => Err(CliError::validation(key, "missing")),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        if self.has(key) { self.f64(key) } else { Ok(default) }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        match self.get(key) {
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(_) => Err(CliError::validation(key, "must be a non-negative integer")),
            None => Err(CliError::validation(key, "missing")),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        if self.has(key) { self.usize(key) } else { Ok(default) }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            Some(Value::Boolean(b)) => Ok(*b),
            Some(_) => Err(CliError::validation(key, "must be true or false")),
            None => Ok(default),
        }
    }

    pub fn str_or(&self, key: &str, default: &'a str) -> Result<&'a str, CliError> {
        match self.get(key) {
            Some(Value::String(s)) => Ok(s.as_str()),
            Some(_) => Err(CliError::validation(key, "must be a string")),
            None => Ok(default),
        }
    }

    pub fn str(&self, key: &str) -> Result<&'a str, CliError> {
        if !self.has(key) {
            self.get(key);
            return Err(CliError::validation(key, "missing"));
        }
        self.str_or(key, "")
    }

    /// A number or an array of numbers.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        match self.get(key) {
            Some(Value::Array(a)) => a.iter().map(|v| Self::number(key, v)).collect(),
            Some(v) => Ok(vec![Self::number(key, v)?]),
            None => Err(CliError::validation(key, "missing")),
        }
    }

    pub fn f64_list_or(&self, key: &str, default: Vec<f64>) -> Result<Vec<f64>, CliError> {
        if self.has(key) { self.f64_list(key) } else { Ok(default) }
    }

    pub fn usize_list_or(&self, key: &str, default: Vec<usize>) -> Result<Vec<usize>, CliError> {
        match self.get(key) {
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    _ => Err(CliError::validation(key, "must be a list of non-negative integers")),
                })
                .collect(),
            Some(_) => Err(CliError::validation(key, "must be a list of non-negative integers")),
            None => Ok(default),
        }
    }

    /// Rejects keys that were never read.
    pub fn finish(&self) -> Result<(), CliError> {
        let used = self.used.borrow();
        match self.table.keys().find(|k| !used.contains(k.as_str())) {
            Some(k) => Err(CliError::validation(k.as_str(), "unknown parameter for this scenario")),
            None => Ok(()),
        }
    }
}

/// Vector-valued boundary data of length `dim`; a scalar is broadcast.
pub fn state_vector(p: &Params, key: &str, dim: usize) -> Result<Vec<f64>, CliError> {
    let v = p.f64_list(key)?;
    match v.len() {
        1 => Ok(vec![v[0]; dim]),
        n if n == dim => Ok(v),
        n => Err(CliError::validation(key, format!("has {n} components, the state has {dim}"))),
    }
}

pub fn check_alpha(key: &str, alpha: f64) -> Result<f64, CliError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(alpha)
    } else {
        Err(CliError::validation(key, format!("must lie in (0, 1], got {alpha}")))
    }
}

pub const MAX_NODES: usize = 1 << 14;

pub fn check_intervals(key: &str, n: usize) -> Result<usize, CliError> {
    if (2..=MAX_NODES).contains(&n) {
        Ok(n)
    } else {
        Err(CliError::validation(key, format!("must lie in [2, {MAX_NODES}], got {n}")))
    }
}

pub fn check_positive(key: &str, x: f64) -> Result<f64, CliError> {
    if x > 0.0 { Ok(x) } else { Err(CliError::validation(key, format!("must be positive, got {x}"))) }
}
