use std::io::Write;

use lightray::isotopy::IsotopyProfile;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub subject: String,
    pub class: String,
    pub verdict: String,
    /// `(start, end, sign)` runs of constant sign over the parameter grid.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intervals: Vec<(f64, f64, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl CheckOutcome {
    /// Passes when `residual < threshold`.
    pub fn below(name: &str, residual: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: residual < threshold,
            residual,
            threshold,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub command: String,
    /// SHA-256 of the effective configuration.
    pub config_digest: String,
    pub payload: Value,
    pub classifications: Vec<Classification>,
    pub checks: Vec<CheckOutcome>,
    /// Sign profile rows, exported as CSV.
    #[serde(skip)]
    pub profile: Option<IsotopyProfile>,
}

impl ResultEnvelope {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        serde_json::to_writer_pretty(&mut w, self).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let profile = self.profile.as_ref().ok_or_else(|| {
            CliError::Usage(format!(
                "'{}' has no sign profile; CSV output is available for isotopy and recover",
                self.command
            ))
        })?;
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::Io(e.to_string());
        out.write_record(["s", "sample_index", "value"]).map_err(io)?;
        for (s, i, v) in profile.rows() {
            out.write_record([s.to_string(), i.to_string(), v.to_string()])
                .map_err(io)?;
        }
        out.flush().map_err(|e| CliError::Io(e.to_string()))
    }
}

/// Hex SHA-256 of a serializable value's JSON text.
pub fn digest<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("configuration serializes");
    Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
