//! Attribution prompts and answer parsing.
//!
//! Each retained match can be sent to a language-model backend for root-cause
//! attribution. The prompt is a fixed template over five analysis dimensions;
//! the answer must be a JSON object with one key per dimension. A
//! deterministic stub backend produces schema-valid answers offline so the
//! whole path is testable without a network.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classify::TypeClassification;
use crate::detect::{Finding, VulnType};
use crate::diff::ChangeRecord;
use crate::matching::MatchPair;

/// The five analysis dimensions, rendered verbatim as prompt section
/// headings and mirrored by the JSON answer schema.
pub const DIMENSION_HEADINGS: [&str; 5] = [
    "Root cause analysis",
    "Impact of code changes on security",
    "Correlation of change types and vulnerability types",
    "Risk pattern labels",
    "Remediation recommendations",
];

/// Required keys of the JSON answer, in schema order.
pub const RESPONSE_KEYS: [&str; 5] =
    ["root_cause", "security_impact", "change_vuln_correlation", "risk_labels", "remediation"];

/// Canonical risk-pattern vocabulary; free-form labels are also accepted.
pub const RISK_MISSING_PRIVILEGE: &str = "missing privilege control";
pub const RISK_UNSYNCED_STATE: &str = "unsynchronized state variables";
pub const RISK_EXTERNAL_CALL: &str = "external call risks";

/// Everything needed to render and audit one attribution call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRequest {
    pub pair: MatchPair,
    pub change: ChangeRecord,
    pub finding: Finding,
    pub classification: TypeClassification,
    pub v1_snippet: String,
    pub v2_snippet: String,
    pub prompt_text: String,
}

impl AttributionRequest {
    pub fn new(
        pair: MatchPair,
        change: ChangeRecord,
        finding: Finding,
        classification: TypeClassification,
        v1_snippet: String,
        v2_snippet: String,
    ) -> AttributionRequest {
        let mut request = AttributionRequest {
            pair,
            change,
            finding,
            classification,
            v1_snippet,
            v2_snippet,
            prompt_text: String::new(),
        };
        request.prompt_text = build_prompt(&request);
        request
    }
}

fn snippet_or_placeholder(snippet: &str) -> &str {
    if snippet.trim().is_empty() {
        "(snippet unavailable)"
    } else {
        snippet
    }
}

/// Render the attribution prompt. Deterministic: a fixed fixture renders
/// byte-identically on every run.
pub fn build_prompt(request: &AttributionRequest) -> String {
    let change = &request.change;
    let finding = &request.finding;
    let scores = &request.pair.scores;
    let mut out = String::new();
    out.push_str("You are auditing one upgrade of a proxy-based smart contract.\n");
    out.push_str(
        "A code change between version V1 and version V2 has been matched to a detected vulnerability.\n\n",
    );
    out.push_str(&format!(
        "Change: {} of a {} node at V2 line {} (function: {})\n",
        change.op,
        change.node_kind.tag(),
        change.line,
        change.function_name.as_deref().unwrap_or("-")
    ));
    out.push_str(&format!(
        "Changed code:\n```\n{}\n```\n",
        snippet_or_placeholder(&change.snippet)
    ));
    out.push_str(&format!(
        "Old version context:\n```\n{}\n```\n",
        snippet_or_placeholder(&request.v1_snippet)
    ));
    out.push_str(&format!(
        "New version context:\n```\n{}\n```\n\n",
        snippet_or_placeholder(&request.v2_snippet)
    ));
    out.push_str(&format!(
        "Finding: {} ({:?}) at line {}: {}\n",
        finding.vuln_type, finding.severity, finding.line, finding.description
    ));
    out.push_str(&format!(
        "Upgrade classification for {}: {} ({})\n",
        request.classification.vuln_type,
        request.classification.behavior,
        request.classification.behavior.conclusion()
    ));
    out.push_str(&format!(
        "Match confidence {:.4} (position {:.4}, pattern {:.4}, semantic {:.4}, type {:.4})\n\n",
        request.pair.confidence, scores.s_pos, scores.s_pattern, scores.s_semantic, scores.s_type
    ));
    out.push_str("Analyze the pair along these five dimensions:\n");
    for (i, heading) in DIMENSION_HEADINGS.iter().enumerate() {
        out.push_str(&format!("{}. {}\n", i + 1, heading));
    }
    out.push_str(
        "\nAnswer with a single JSON object and nothing else, using exactly these keys:\n",
    );
    out.push_str(
        "{\"root_cause\": string, \"security_impact\": string, \"change_vuln_correlation\": string, \"risk_labels\": [string], \"remediation\": string}\n",
    );
    out
}

/// A parsed attribution answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub root_cause: String,
    pub security_impact: String,
    pub change_vuln_correlation: String,
    pub risk_labels: Vec<String>,
    pub remediation: String,
    /// The exact JSON object text the fields were extracted from.
    pub raw_json: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttribError {
    /// No JSON object anywhere in the response.
    NoJsonFound,
    /// A JSON object was found but required keys are missing.
    SchemaViolation(Vec<String>),
}

impl core::fmt::Display for AttribError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AttribError::NoJsonFound => f.write_str("no JSON object found in response"),
            AttribError::SchemaViolation(missing) => {
                write!(f, "attribution JSON missing keys: {}", missing.join(", "))
            }
        }
    }
}

impl core::error::Error for AttribError {}

/// Extract the first JSON object from a response, tolerating surrounding
/// prose, and validate the five-key schema.
pub fn parse_attribution(response_text: &str) -> Result<AttributionResult, AttribError> {
    let object = first_json_object(response_text).ok_or(AttribError::NoJsonFound)?;
    let map = object.as_object().expect("first_json_object returns objects");

    let missing: Vec<String> = RESPONSE_KEYS
        .iter()
        .filter(|k| !map.contains_key(**k))
        .map(|k| (*k).to_owned())
        .collect();
    if !missing.is_empty() {
        return Err(AttribError::SchemaViolation(missing));
    }

    let text = |key: &str| -> String {
        match &map[key] {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        }
    };
    let risk_labels = match &map["risk_labels"] {
        Value::Array(items) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect(),
        Value::String(s) => alloc::vec![s.clone()],
        other => alloc::vec![other.to_string()],
    };

    Ok(AttributionResult {
        root_cause: text("root_cause"),
        security_impact: text("security_impact"),
        change_vuln_correlation: text("change_vuln_correlation"),
        risk_labels,
        remediation: text("remediation"),
        raw_json: object.to_string(),
    })
}

/// First parseable JSON object in the text: try a streaming parse from each
/// `{` until one yields an object.
fn first_json_object(text: &str) -> Option<Value> {
    for (at, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[at..]).into_iter::<Value>();
        if let Some(Ok(value)) = stream.next() {
            if value.is_object() {
                return Some(value);
            }
        }
    }
    None
}

/// An attribution backend: turns a rendered request into a response text.
pub trait AttributionBackend {
    fn complete(&self, request: &AttributionRequest) -> Result<String, BackendError>;

    /// Backend name recorded in reports.
    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendError {
    Http(String),
    Other(String),
}

impl core::fmt::Display for BackendError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BackendError::Http(why) => write!(f, "attribution backend HTTP error: {why}"),
            BackendError::Other(why) => write!(f, "attribution backend error: {why}"),
        }
    }
}

impl core::error::Error for BackendError {}

/// Deterministic offline backend: answers derive from the request alone.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubBackend;

impl AttributionBackend for StubBackend {
    fn complete(&self, request: &AttributionRequest) -> Result<String, BackendError> {
        Ok(stub_backend(request))
    }

    fn name(&self) -> &'static str {
        "stub"
    }
}

/// Schema-valid JSON derived deterministically from the request.
pub fn stub_backend(request: &AttributionRequest) -> String {
    let vuln = request.finding.vuln_type;
    let op = request.change.op;
    let labels = stub_risk_labels(vuln);
    let remediation = match vuln {
        VulnType::Reentrancy => {
            "apply the checks-effects-interactions order or a reentrancy guard"
        }
        VulnType::AccessControl => "restore an owner/role check on the mutating entry point",
        VulnType::IntegerOverflow => {
            "use checked arithmetic (compiler >= 0.8 or a safe-math wrapper)"
        }
        VulnType::TxOriginAuth => "authorize with msg.sender instead of tx.origin",
        VulnType::UnprotectedDelegatecall => {
            "pin the delegatecall target or gate it behind an access guard"
        }
        VulnType::UninitializedProxy => {
            "add an initializer guard and lock the logic contract after deployment"
        }
        VulnType::StorageCollision => {
            "only append new state variables; never reorder or retype existing slots"
        }
        VulnType::UnprotectedUpgrade => "gate the upgrade entry point behind the proxy admin",
    };
    // BTreeMap keys serialize in sorted order, so output is reproducible.
    let mut map: BTreeMap<&str, Value> = BTreeMap::new();
    map.insert(
        "root_cause",
        Value::String(format!(
            "{} {} at line {} {} the {} pattern",
            op,
            request.change.node_kind.tag(),
            request.change.line,
            match request.classification.behavior {
                crate::classify::UpgradeBehavior::FixVulnerability => "removes",
                _ => "introduces",
            },
            vuln
        )),
    );
    map.insert(
        "security_impact",
        Value::String(format!(
            "{:?}-severity {} exposure in function {}",
            request.finding.severity,
            vuln,
            request.finding.function_name.as_deref().unwrap_or("-")
        )),
    );
    map.insert(
        "change_vuln_correlation",
        Value::String(format!(
            "{} operations correlate with {} findings (confidence {:.4})",
            op, vuln, request.pair.confidence
        )),
    );
    map.insert(
        "risk_labels",
        Value::Array(labels.iter().map(|l| Value::String((*l).to_owned())).collect()),
    );
    map.insert("remediation", Value::String(remediation.to_owned()));
    serde_json::to_string(&map).expect("stub JSON serializes")
}

fn stub_risk_labels(vuln: VulnType) -> Vec<&'static str> {
    match vuln {
        VulnType::Reentrancy | VulnType::UnprotectedDelegatecall => {
            alloc::vec![RISK_EXTERNAL_CALL]
        }
        VulnType::AccessControl
        | VulnType::TxOriginAuth
        | VulnType::UnprotectedUpgrade
        | VulnType::UninitializedProxy => alloc::vec![RISK_MISSING_PRIVILEGE],
        VulnType::StorageCollision => alloc::vec![RISK_UNSYNCED_STATE],
        VulnType::IntegerOverflow => alloc::vec!["unchecked arithmetic"],
    }
}

/// Aggregate normalized risk labels across results, sorted by count
/// descending then label ascending.
pub fn extract_risk_patterns(results: &[AttributionResult]) -> Vec<(String, u32)> {
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for result in results {
        for label in &result.risk_labels {
            let normalized = label.trim().to_lowercase();
            if normalized.is_empty() {
                continue;
            }
            *counts.entry(normalized).or_insert(0) += 1;
        }
    }
    let mut out: Vec<(String, u32)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}
