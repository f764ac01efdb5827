//! The JSON envelope shared by every command.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const REPORT_SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Clone, Serialize)]
pub struct InputInfo {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Hex SHA-256 of the input bytes, or of the canonical argument string
    /// for generated inputs.
    pub sha256: String,
}

impl InputInfo {
    pub fn file(path: &Path, bytes: &[u8]) -> Self {
        Self {
            path: Some(path.display().to_string()),
            sha256: digest(bytes),
        }
    }

    pub fn generated(description: &str) -> Self {
        Self {
            path: None,
            sha256: digest(description.as_bytes()),
        }
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub tol: f64,
    /// `default`, `env` (TSSPEC_TOL) or `flag`.
    pub source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl ErrorInfo {
    pub fn from_error(e: &tsspec::Error) -> Self {
        let debug = format!("{e:?}");
        let kind = debug
            .split(|c: char| !c.is_alphanumeric() && c != '_')
            .next()
            .unwrap_or("Error")
            .to_string();
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub input: InputInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    pub result: Value,
    /// Seconds; the only field that varies between identical runs.
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn emit(&self, out: Option<&Path>) -> std::io::Result<()> {
        let text =
            serde_json::to_string_pretty(self).expect("report serialization is infallible") + "\n";
        match out {
            Some(path) => fs::write(path, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}
