use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mimome::Tolerance;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Formats `x` with 9 significant digits.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let e: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("exponent");
    if (-4..9).contains(&e) {
        format!("{:.*}", (8 - e) as usize, x)
    } else {
        sci
    }
}

/// JSON number, or `null` for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

impl InputDigest {
    pub fn new(role: &str, path: &Path, bytes: &[u8]) -> Self {
        let d = Sha256::digest(bytes);
        InputDigest {
            role: role.into(),
            path: path.to_path_buf(),
            sha256: d.iter().map(|b| format!("{b:02x}")).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: Vec<String>,
    pub subcommand: String,
    pub inputs: Vec<InputDigest>,
    pub tolerances: Tolerance,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub units: Map<String, Value>,
    pub results: Map<String, Value>,
    pub files: Vec<PathBuf>,
    pub status: String,
}

impl Report {
    pub fn new(subcommand: &str, tol: Tolerance, seed: u64) -> Self {
        let mut units = Map::new();
        units.insert("rates".into(), "bits".into());
        units.insert("power".into(), "linear, unit noise variance".into());
        units.insert("wall_time_s".into(), "seconds".into());
        Report {
            command: std::env::args().collect(),
            subcommand: subcommand.into(),
            inputs: Vec::new(),
            tolerances: tol,
            seed,
            threads: rayon::current_num_threads(),
            wall_time_s: 0.0,
            units,
            results: Map::new(),
            files: Vec::new(),
            status: "ok".into(),
        }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.results.insert(key.into(), v.into());
    }

    pub fn set_num(&mut self, key: &str, x: f64) {
        self.results.insert(key.into(), num(x));
    }

    pub fn unit(&mut self, key: &str, u: &str) {
        self.units.insert(key.into(), u.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// `key: value` lines with numbers at 9 significant digits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.results {
            out.push_str(&format!("{k}: {}\n", text_value(v)));
        }
        if self.status != "ok" {
            out.push_str(&format!("status: {}\n", self.status));
        }
        out
    }
}

fn text_value(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => sig9(x),
            _ => n.to_string(),
        },
        Value::Null => "inf".into(),
        Value::String(s) => s.clone(),
        Value::Array(a) => format!("[{}]", a.iter().map(text_value).collect::<Vec<_>>().join(", ")),
        Value::Object(o) => format!(
            "{{{}}}",
            o.iter().map(|(k, v)| format!("{k}: {}", text_value(v))).collect::<Vec<_>>().join(", ")
        ),
        Value::Bool(b) => b.to_string(),
    }
}

/// CSV with a single header row; numbers at 9 significant digits.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.iter().map(|&x| sig9(x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}
