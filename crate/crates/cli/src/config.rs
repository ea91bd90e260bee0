//! Parameter resolution: flag, then configuration files (last loaded wins),
//! then the built-in default. Every resolved value is recorded so the run
//! manifest can echo it and rebuild an equivalent command line.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use ptsym_core::dynamics::Model;
use ptsym_core::format::fmt_f64;
use ptsym_core::sweep::AxisRange;
use ptsym_core::StateVector;
use serde_json::{json, Value};

/// A malformed flag or configuration entry; exits with the validation code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// A value that can be echoed into a manifest and back onto a command line.
pub trait Param: FromStr + Clone {
    fn to_json(&self) -> Value;
    fn to_arg(&self) -> String;
}

impl Param for f64 {
    fn to_json(&self) -> Value {
        json!(self)
    }
    fn to_arg(&self) -> String {
        fmt_f64(*self)
    }
}

impl Param for usize {
    fn to_json(&self) -> Value {
        json!(self)
    }
    fn to_arg(&self) -> String {
        self.to_string()
    }
}

impl Param for u32 {
    fn to_json(&self) -> Value {
        json!(self)
    }
    fn to_arg(&self) -> String {
        self.to_string()
    }
}

impl Param for String {
    fn to_json(&self) -> Value {
        json!(self)
    }
    fn to_arg(&self) -> String {
        self.clone()
    }
}

impl Param for PathBuf {
    fn to_json(&self) -> Value {
        json!(self.display().to_string())
    }
    fn to_arg(&self) -> String {
        self.display().to_string()
    }
}

fn parse_list(s: &str, n: usize, what: &str) -> std::result::Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(format!("{what} needs {n} comma-separated numbers, got {s:?}"));
    }
    parts
        .iter()
        .map(|p| p.parse::<f64>().map_err(|_| format!("{what}: {p:?} is not a number")))
        .collect()
}

/// `--init x,p,y,q`.
#[derive(Debug, Clone, Copy)]
pub struct InitState(pub StateVector);

impl FromStr for InitState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let v = parse_list(s, 4, "init")?;
        Ok(Self(StateVector { x: v[0], p: v[1], y: v[2], q: v[3] }))
    }
}

impl Param for InitState {
    fn to_json(&self) -> Value {
        json!(self.0.to_array())
    }
    fn to_arg(&self) -> String {
        self.0.to_array().map(fmt_f64).join(",")
    }
}

/// An axis given as `lo,hi,n`.
#[derive(Debug, Clone, Copy)]
pub struct RangeArg(pub AxisRange);

impl FromStr for RangeArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("range needs lo,hi,n, got {s:?}"));
        }
        let lo = parts[0].parse().map_err(|_| format!("range: bad lo {:?}", parts[0]))?;
        let hi = parts[1].parse().map_err(|_| format!("range: bad hi {:?}", parts[1]))?;
        let n = parts[2].parse().map_err(|_| format!("range: bad count {:?}", parts[2]))?;
        Ok(Self(AxisRange::new(lo, hi, n)))
    }
}

impl Param for RangeArg {
    fn to_json(&self) -> Value {
        json!({ "lo": self.0.lo, "hi": self.0.hi, "n": self.0.n })
    }
    fn to_arg(&self) -> String {
        format!("{},{},{}", fmt_f64(self.0.lo), fmt_f64(self.0.hi), self.0.n)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModelArg(pub Model);

impl FromStr for ModelArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lossless" => Ok(Self(Model::Lossless)),
            "linear" | "linear-gain-loss" => Ok(Self(Model::LinearGainLoss)),
            "transfer" | "energy-transfer" => Ok(Self(Model::EnergyTransfer)),
            _ => Err(format!("model must be lossless, linear or transfer, got {s:?}")),
        }
    }
}

impl Param for ModelArg {
    fn to_json(&self) -> Value {
        json!(self.to_arg())
    }
    fn to_arg(&self) -> String {
        match self.0 {
            Model::Lossless => "lossless",
            Model::LinearGainLoss => "linear",
            Model::EnergyTransfer => "transfer",
        }
        .into()
    }
}

struct Layer {
    path: PathBuf,
    table: toml::Table,
    used: BTreeSet<String>,
}

struct Entry {
    key: String,
    value: Value,
    /// `None` when the value does not appear on a command line.
    arg: Option<Vec<String>>,
}

pub struct Settings {
    layers: Vec<Layer>,
    entries: Vec<Entry>,
}

fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

fn scalar(v: &toml::Value) -> Option<String> {
    match v {
        toml::Value::String(s) => Some(s.clone()),
        toml::Value::Integer(i) => Some(i.to_string()),
        toml::Value::Float(f) => Some(f.to_string()),
        toml::Value::Boolean(b) => Some(b.to_string()),
        toml::Value::Array(items) => items
            .iter()
            .map(scalar)
            .collect::<Option<Vec<_>>>()
            .map(|v| v.join(",")),
        _ => None,
    }
}

impl Settings {
    pub fn new() -> Self {
        Self {
            layers: Vec::new(),
            entries: Vec::new(),
        }
    }

    /// Add a TOML file that overrides previously loaded ones.
    pub fn load(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let table: toml::Table = text
            .parse()
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let table = table.into_iter().map(|(k, v)| (normalize(&k), v)).collect();
        self.layers.push(Layer {
            path: path.to_path_buf(),
            table,
            used: BTreeSet::new(),
        });
        Ok(())
    }

    fn mark_used(&mut self, key: &str) {
        for layer in &mut self.layers {
            if layer.table.contains_key(key) {
                layer.used.insert(key.to_string());
            }
        }
    }

    fn lookup(&mut self, key: &str) -> Result<Option<String>> {
        for layer in self.layers.iter_mut().rev() {
            if let Some(v) = layer.table.get(key) {
                layer.used.insert(key.to_string());
                return scalar(v).map(Some).ok_or_else(|| {
                    usage(format!("{}: {key} must be a scalar or a list", layer.path.display()))
                });
            }
        }
        Ok(None)
    }

    fn resolve<T: Param>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        if flag.is_some() {
            self.mark_used(key);
            return Ok(flag);
        }
        match self.lookup(key)? {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| usage(format!("config key {key}: {e}"))),
            None => Ok(None),
        }
    }

    fn record<T: Param>(&mut self, key: &str, value: &T) {
        self.entries.push(Entry {
            key: key.to_string(),
            value: value.to_json(),
            arg: Some(vec![format!("--{key}"), value.to_arg()]),
        });
    }

    pub fn get<T: Param>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.resolve(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn get_opt<T: Param>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        let v = self.resolve(key, flag)?;
        match &v {
            Some(v) => self.record(key, v),
            None => self.entries.push(Entry {
                key: key.to_string(),
                value: Value::Null,
                arg: None,
            }),
        }
        Ok(v)
    }

    pub fn require<T: Param>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get_opt(key, flag)?
            .ok_or_else(|| usage(format!("--{key} is required")))
    }

    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            self.mark_used(key);
        }
        let on = flag
            || match self.lookup(key)? {
                Some(raw) => raw
                    .parse()
                    .map_err(|_| usage(format!("config key {key} must be true or false")))?,
                None => false,
            };
        self.entries.push(Entry {
            key: key.to_string(),
            value: json!(on),
            arg: on.then(|| vec![format!("--{key}")]),
        });
        Ok(on)
    }

    /// Record a value that is not read from flags, such as a derived setting.
    pub fn note(&mut self, key: &str, value: Value) {
        self.entries.push(Entry {
            key: key.to_string(),
            value,
            arg: None,
        });
    }

    pub fn params(&self) -> Value {
        let map: serde_json::Map<String, Value> = self
            .entries
            .iter()
            .map(|e| (e.key.clone(), e.value.clone()))
            .collect();
        Value::Object(map)
    }

    /// Command line reproducing the resolved parameters without any
    /// configuration file.
    pub fn argv(&self, command: &str) -> Vec<String> {
        let mut out = vec![command.to_string()];
        for e in &self.entries {
            if let Some(arg) = &e.arg {
                out.extend(arg.iter().cloned());
            }
        }
        out
    }

    /// Configuration keys no command looked at.
    pub fn unused(&self) -> Vec<String> {
        self.layers
            .iter()
            .flat_map(|l| {
                l.table
                    .keys()
                    .filter(|k| !self.layers.iter().any(|m| m.used.contains(*k)))
                    .map(move |k| format!("{}: {k}", l.path.display()))
            })
            .collect()
    }
}
