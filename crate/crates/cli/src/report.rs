//! Deterministic report assembly: JSON with C-style `%.15g` number
//! formatting and sorted object keys, so identical inputs and seeds produce
//! identical bytes (wall-clock timings are the one informational exception,
//! carried under `timings_ms`).

use std::collections::BTreeMap;
use std::io::Write;

use serde_json::Value;

/// Formats a float the way C's `printf("%.15g", x)` does: 15 significant
/// digits, fixed or scientific depending on the exponent, trailing zeros
/// trimmed.
pub fn g15(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let formatted = format!("{:.14e}", x);
    let (mantissa, exp_str) = formatted.split_once('e').expect("exponential form");
    let exp: i32 = exp_str.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if negative { "-" } else { "" };

    if !(-4..15).contains(&exp) {
        // Scientific: d[.ddd]e±XX with at least two exponent digits.
        let head = &digits[..1];
        let tail = &digits[1..];
        let exp_sign = if exp < 0 { '-' } else { '+' };
        let exp_abs = exp.unsigned_abs();
        let body = if tail.is_empty() {
            head.to_string()
        } else {
            format!("{head}.{tail}")
        };
        format!("{sign}{body}e{exp_sign}{exp_abs:02}")
    } else if exp >= 0 {
        let exp = exp as usize;
        if digits.len() > exp + 1 {
            format!("{sign}{}.{}", &digits[..=exp], &digits[exp + 1..])
        } else {
            let zeros = "0".repeat(exp + 1 - digits.len());
            format!("{sign}{digits}{zeros}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{digits}")
    }
}

fn write_value<W: Write>(out: &mut W, value: &Value) -> std::io::Result<()> {
    match value {
        Value::Null => write!(out, "null"),
        Value::Bool(b) => write!(out, "{b}"),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}")
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}")
            } else {
                write!(out, "{}", g15(n.as_f64().unwrap_or(f64::NAN)))
            }
        }
        Value::String(s) => write!(out, "{}", Value::String(s.clone())),
        Value::Array(items) => {
            write!(out, "[")?;
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    write!(out, ",")?;
                }
                write_value(out, item)?;
            }
            write!(out, "]")
        }
        Value::Object(map) => {
            // serde_json's map is sorted by key, which keeps the bytes
            // stable.
            write!(out, "{{")?;
            for (i, (key, item)) in map.iter().enumerate() {
                if i > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{}:", Value::String(key.clone()))?;
                write_value(out, item)?;
            }
            write!(out, "}}")
        }
    }
}

/// Serializes a JSON value with `%.15g` floats and sorted keys.
pub fn to_deterministic_json(value: &Value) -> String {
    let mut buf = Vec::new();
    write_value(&mut buf, value).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf8")
}

/// One verification check inside a report.
#[derive(Debug, Clone)]
pub struct CheckRecord {
    pub name: String,
    pub passed: bool,
    pub details: Value,
}

/// Assembled run report.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub command: String,
    pub params: Option<(f64, f64, f64)>,
    pub seed: u64,
    pub checks: Vec<CheckRecord>,
    /// Replaces the computed pass/fail verdict (e.g. "excluded-case").
    pub verdict_override: Option<String>,
    pub timings_ms: BTreeMap<String, f64>,
    pub extra: BTreeMap<String, Value>,
}

impl RunReport {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            params: None,
            seed,
            checks: Vec::new(),
            verdict_override: None,
            timings_ms: BTreeMap::new(),
            extra: BTreeMap::new(),
        }
    }

    pub fn push_check(&mut self, name: &str, passed: bool, details: Value) {
        self.checks.push(CheckRecord {
            name: name.to_string(),
            passed,
            details,
        });
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Value {
        let mut root = serde_json::Map::new();
        root.insert("schema".into(), Value::from(1));
        root.insert("tool".into(), Value::from(env!("CARGO_PKG_NAME")));
        root.insert("version".into(), Value::from(env!("CARGO_PKG_VERSION")));
        root.insert("command".into(), Value::from(self.command.clone()));
        if let Some((a, b, d)) = self.params {
            let mut p = serde_json::Map::new();
            p.insert("a".into(), Value::from(a));
            p.insert("b".into(), Value::from(b));
            p.insert("d".into(), Value::from(d));
            root.insert("params".into(), Value::Object(p));
        }
        root.insert("seed".into(), Value::from(self.seed));
        let checks: Vec<Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut m = serde_json::Map::new();
                m.insert("name".into(), Value::from(c.name.clone()));
                m.insert("passed".into(), Value::from(c.passed));
                m.insert("details".into(), c.details.clone());
                Value::Object(m)
            })
            .collect();
        root.insert("checks".into(), Value::Array(checks));
        let verdict = match &self.verdict_override {
            Some(v) => v.clone(),
            None => if self.all_passed() { "pass" } else { "fail" }.to_string(),
        };
        root.insert("verdict".into(), Value::from(verdict));
        for (k, v) in &self.extra {
            root.insert(k.clone(), v.clone());
        }
        let timings: serde_json::Map<String, Value> = self
            .timings_ms
            .iter()
            .map(|(k, v)| (k.clone(), Value::from(*v)))
            .collect();
        root.insert("timings_ms".into(), Value::Object(timings));
        Value::Object(root)
    }
}
