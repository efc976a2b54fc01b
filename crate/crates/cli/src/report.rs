//! Run reports in text and machine (JSON) form.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::time::Duration;

/// One named result.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Probability(f64),
    Real(f64),
    Count(u64),
    Text(String),
    /// Outcome labels with probabilities.
    Table(Vec<(String, f64)>),
    /// Outcome labels with shot counts.
    Counts(Vec<(String, u64)>),
    Samples(Vec<String>),
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: Vec<String>,
    pub digest: String,
    pub seed: Option<u64>,
    pub elapsed: Duration,
    pub results: Vec<(String, Field)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `x` rounded to 15 significant digits.
pub fn round15(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.14e}").parse().unwrap_or(x)
}

/// Decimal text with 15 significant digits; exponent form for tiny values.
pub fn text15(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        return format!("{x:.14e}");
    }
    let decimals = (14 - mag).max(0) as usize;
    format!("{x:.decimals$}")
}

fn field_json(f: &Field) -> Value {
    match f {
        Field::Probability(p) | Field::Real(p) => json!(round15(*p)),
        Field::Count(c) => json!(c),
        Field::Text(s) => json!(s),
        Field::Table(rows) => Value::Array(
            rows.iter()
                .map(|(k, p)| json!({ "outcome": k, "probability": round15(*p) }))
                .collect(),
        ),
        Field::Counts(rows) => Value::Array(rows.iter().map(|(k, c)| json!({ "outcome": k, "count": c })).collect()),
        Field::Samples(s) => json!(s),
    }
}

impl Report {
    pub fn machine(&self) -> String {
        let mut results = Map::new();
        for (k, f) in &self.results {
            results.insert(k.clone(), field_json(f));
        }
        let v = json!({
            "command": self.command,
            "input_sha256": self.digest,
            "seed": self.seed,
            "elapsed_ms": self.elapsed.as_secs_f64() * 1e3,
            "version": env!("CARGO_PKG_VERSION"),
            "results": results,
        });
        serde_json::to_string_pretty(&v).expect("report serializes")
    }

    /// Human-readable form. Timing is left out so equal runs print equal text.
    pub fn text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command.join(" ")));
        out.push_str(&format!("input sha256: {}\n", self.digest));
        if let Some(s) = self.seed {
            out.push_str(&format!("seed: {s}\n"));
        }
        for (k, f) in &self.results {
            match f {
                Field::Probability(p) | Field::Real(p) => out.push_str(&format!("{k}: {}\n", text15(*p))),
                Field::Count(c) => out.push_str(&format!("{k}: {c}\n")),
                Field::Text(s) => out.push_str(&format!("{k}: {s}\n")),
                Field::Table(rows) => {
                    out.push_str(&format!("{k}:\n"));
                    for (label, p) in rows {
                        out.push_str(&format!("  {label}  {}\n", text15(*p)));
                    }
                }
                Field::Counts(rows) => {
                    out.push_str(&format!("{k}:\n"));
                    for (label, c) in rows {
                        out.push_str(&format!("  {label}  {c}\n"));
                    }
                }
                Field::Samples(s) => {
                    out.push_str(&format!("{k}:\n"));
                    for line in s {
                        out.push_str(&format!("  {line}\n"));
                    }
                }
            }
        }
        out.push_str(&format!("version: {}\n", env!("CARGO_PKG_VERSION")));
        out
    }
}
