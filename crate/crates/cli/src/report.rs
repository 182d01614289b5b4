//! The JSON audit report: one file per analyzed version pair.
//!
//! The schema ships in-repo at `schemas/report.schema.json` and is versioned
//! with the tool. Timings and the generation timestamp are informational and
//! excluded from determinism comparisons.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use upgradescan_core::ast::QualityMetrics;
use upgradescan_core::attrib::AttributionResult;
use upgradescan_core::classify::{RiskSummary, TypeClassification};
use upgradescan_core::detect::Finding;
use upgradescan_core::diff::ChangeRecord;
use upgradescan_core::matching::MatchPair;

pub const REPORT_SCHEMA_VERSION: &str = "1";

/// Published JSON schema for [`AnalysisReport`].
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionMeta {
    pub version_tag: String,
    pub source_hash: String,
    pub quality: QualityMetrics,
    /// Path or address the source came from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRecord {
    pub change_id: u32,
    pub finding_id: u32,
    pub backend: String,
    pub prompt: String,
    pub response: String,
    pub result: AttributionResult,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_ms: u64,
    pub ingest_ms: u64,
    pub diff_ms: u64,
    pub detect_ms: u64,
    pub match_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub tool_version: String,
    /// Seconds since the epoch; informational only.
    pub generated_at: u64,
    /// Pair label: proxy address for traced histories, else "v1->v2" paths.
    pub pair_label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proxy_address: Option<String>,
    pub v1: VersionMeta,
    pub v2: VersionMeta,
    /// False when any quality ratio fell below the 0.8 gate; analysis still
    /// runs but results carry a warning.
    pub quality_ok: bool,
    pub warnings: Vec<String>,
    pub changes: Vec<ChangeRecord>,
    pub v1_findings: Vec<Finding>,
    pub v2_findings: Vec<Finding>,
    pub matches: Vec<MatchPair>,
    pub classifications: Vec<TypeClassification>,
    pub summary: RiskSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attributions: Option<Vec<AttributionRecord>>,
    /// Aggregated (label, count) risk patterns when attribution ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub risk_patterns: Option<Vec<(String, u32)>>,
    pub timings: Timings,
}

impl AnalysisReport {
    /// Internal consistency: every match must reference a change id and a
    /// v2 finding id present in the report.
    pub fn references_are_consistent(&self) -> bool {
        self.matches.iter().all(|m| {
            self.changes.iter().any(|c| c.change_id == m.change_id)
                && self.v2_findings.iter().any(|f| f.finding_id == m.finding_id)
        })
    }

    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn write_to(&self, path: &Path) -> anyhow::Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        let mut file = fs::File::create(path)?;
        file.write_all(self.to_json_pretty()?.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }

    /// Clone with volatile fields zeroed, for determinism comparisons.
    pub fn normalized_for_comparison(&self) -> AnalysisReport {
        let mut copy = self.clone();
        copy.generated_at = 0;
        copy.timings = Timings::default();
        copy
    }
}

pub fn now_epoch_seconds() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_file_is_valid_json_schema() {
        let schema: serde_json::Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
        jsonschema::JSONSchema::compile(&schema).expect("schema compiles");
    }
}
