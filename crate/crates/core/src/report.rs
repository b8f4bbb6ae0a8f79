//! JSON reports and run manifests.
//!
//! Reports carry `schema_version: 1` and contain no wall-clock data, so
//! identical runs produce byte-identical files. The timestamp lives only in
//! the manifest and honours `SOURCE_DATE_EPOCH` when set.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{MuStarReport, ScalingReport};
use crate::error::{ChiError, Result};
use crate::lyapunov::{CertificateAnalysis, StabilityReport};
use crate::model::AssumptionReport;

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Slope window and fit quality required of an O(mu) sweep.
pub const SLOPE_RANGE: (f64, f64) = (0.9, 1.1);
pub const MIN_R2: f64 = 0.99;
/// Largest allowed ratio between the biggest and smallest `error / mu`
/// for the tail target.
pub const MAX_TAIL_SPREAD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// A scaling report plus its verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    #[serde(flatten)]
    pub report: ScalingReport,
    pub constant_spread: f64,
    pub pass: bool,
}

impl ScalingCheck {
    pub fn new(report: ScalingReport) -> Self {
        let spread = report.constant_spread();
        let slope_ok = report.slope >= SLOPE_RANGE.0
            && report.slope <= SLOPE_RANGE.1
            && report.r2 >= MIN_R2
            && !report.degenerate;
        let pass = match report.target {
            crate::analysis::ErrorTarget::FastTailError => slope_ok && spread <= MAX_TAIL_SPREAD,
            _ => slope_ok,
        };
        Self {
            report,
            constant_spread: spread,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub model: String,
    pub n_steps: usize,
    pub mu: f64,
    pub files: Vec<String>,
    pub rows_per_file: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub system: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Vec<ScalingCheck>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificateAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_star: Option<MuStarReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: &str, system: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            system: system.to_string(),
            status: Status::Fail,
            assumptions: None,
            scaling: None,
            certificates: None,
            stability: None,
            mu_star: None,
            simulation: None,
            error: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub exit_code: i32,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_index: Option<usize>,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub config_path: String,
    pub tool_version: String,
    pub timestamp_unix: u64,
    /// Fully resolved parameters (defaults filled in).
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<String>,
    pub outcome: Outcome,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &str) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config_path: config_path.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            timestamp_unix: timestamp(),
            parameters: BTreeMap::new(),
            outputs: Vec::new(),
            outcome: Outcome {
                exit_code: 0,
                status: Status::Pass,
                error: None,
                divergence_index: None,
            },
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.parameters.insert(key.to_string(), v);
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

fn timestamp() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<u64>().ok())
    {
        return v;
    }
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Writes `contents` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| ChiError::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        ChiError::Io(format!("{}: {e}", path.display()))
    })
}

/// The JSON schema describing [`Report`] documents.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
/// The JSON schema describing [`RunManifest`] documents.
pub const MANIFEST_SCHEMA: &str = include_str!("../schema/manifest.schema.json");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_omits_empty_sections() {
        let r = Report::new("validate", "LIN1");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["status"], "fail");
        assert!(v.get("scaling").is_none());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.json");
        write_atomic(&p, "one").unwrap();
        write_atomic(&p, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn schemas_are_json() {
        for s in [REPORT_SCHEMA, MANIFEST_SCHEMA] {
            let v: serde_json::Value = serde_json::from_str(s).unwrap();
            assert_eq!(v["type"], "object");
        }
    }
}
