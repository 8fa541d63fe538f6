use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Hex SHA-256 of the config's canonical JSON (object keys sorted).
pub fn config_hash(config: &Value) -> String {
    let canonical = serde_json::to_string(config).expect("json values serialize");
    format!("{:x}", Sha256::digest(canonical.as_bytes()))
}

/// Removes every `elapsed_ms` field, the only wall-clock data reports carry.
pub fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("elapsed_ms");
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

pub struct Envelope<'a> {
    pub name: &'a str,
    pub seed: u64,
    pub pass: bool,
    pub config: Value,
    pub report: Value,
    pub elapsed_ms: Option<f64>,
}

impl Envelope<'_> {
    pub fn to_json(&self) -> Value {
        let mut report = self.report.clone();
        if self.elapsed_ms.is_none() {
            strip_timings(&mut report);
        }
        let mut doc = json!({
            "schema": "dpal.report/v1",
            "experiment": self.name,
            "seed": self.seed,
            "config_hash": config_hash(&self.config),
            "versions": { "dpal": env!("CARGO_PKG_VERSION"), "dpal-core": dpal_core::VERSION },
            "pass": self.pass,
            "config": self.config,
            "report": report,
        });
        if let Some(ms) = self.elapsed_ms {
            doc["timings"] = json!({ "elapsed_ms": ms });
        }
        doc
    }

    /// Writes `<name>.json` and, when given, `<name>.csv`; returns the paths.
    pub fn write(&self, dir: &Path, csv: Option<&str>) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let json_path = dir.join(format!("{}.json", self.name));
        let mut text = serde_json::to_string_pretty(&self.to_json()).expect("json values serialize");
        text.push('\n');
        std::fs::write(&json_path, text).map_err(|e| CliError::io(&json_path, e))?;
        let mut out = vec![json_path];
        if let Some(csv) = csv {
            let p = dir.join(format!("{}.csv", self.name));
            std::fs::write(&p, csv).map_err(|e| CliError::io(&p, e))?;
            out.push(p);
        }
        Ok(out)
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}
