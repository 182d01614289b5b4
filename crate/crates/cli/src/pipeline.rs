//! The end-to-end analysis pipeline for one version pair:
//! ingest → quality gate → diff → detect on both versions → storage-layout
//! comparison → change-vulnerability matching → classification → optional
//! attribution → report assembly.

use std::time::Instant;

use anyhow::{Context, Result};
use serde_json::Value;

use upgradescan_core::ast::{self, Ast, LineIndex};
use upgradescan_core::attrib::{
    extract_risk_patterns, parse_attribution, AttributionBackend, AttributionRequest, StubBackend,
};
use upgradescan_core::classify::{classify_pair, risk_summary};
use upgradescan_core::detect::{self, sort_and_renumber};
use upgradescan_core::diff::{compute_changes, ChangeOp, DiffParams};
use upgradescan_core::matching::{match_all_with, MatchOptions};

use crate::cache::AstCache;
use crate::llm_http::HttpBackend;
use crate::report::{
    now_epoch_seconds, AnalysisReport, AttributionRecord, Timings, VersionMeta,
    REPORT_SCHEMA_VERSION,
};

/// One side of the pair: source text plus an optional compiler AST document.
#[derive(Debug, Clone, Default)]
pub struct ContractInput {
    /// Where the source came from, recorded in the report.
    pub origin: String,
    pub source: String,
    pub ast_document: Option<Value>,
}

#[derive(Debug, Clone)]
pub enum AttribMode {
    Off,
    Stub,
    Http { endpoint: String, model: String },
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub diff: DiffParams,
    pub matching: MatchOptions,
    pub attrib: AttribMode,
    pub pair_label: String,
    pub proxy_address: Option<String>,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            diff: DiffParams::default(),
            matching: MatchOptions::default(),
            attrib: AttribMode::Off,
            pair_label: String::new(),
            proxy_address: None,
        }
    }
}

/// Instrumentation counters surfaced to batch summaries and tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineStats {
    /// Number of sources actually parsed/ingested (cache misses).
    pub ingests: u32,
}

/// Ingest one input, going through the cache when one is provided.
fn load_ast(
    input: &ContractInput,
    version_tag: &str,
    cache: Option<&AstCache>,
    stats: &mut PipelineStats,
) -> Result<Ast> {
    let hash = ast::source_content_hash(&input.source);
    if let Some(cache) = cache {
        if let Some(mut cached) = cache.get(&hash) {
            cached.version_tag = version_tag.to_string();
            return Ok(cached);
        }
    }
    stats.ingests += 1;
    let mut tree = match &input.ast_document {
        Some(document) => ast::ingest_ast(document, &input.source, "")
            .with_context(|| format!("ingesting AST document for {}", input.origin))?,
        None => ast::parse_source(&input.source, ""),
    };
    if let Some(cache) = cache {
        let _ = cache.put(&tree);
    }
    tree.version_tag = version_tag.to_string();
    Ok(tree)
}

/// ±3-line context window used for attribution prompts.
fn context_window(source: &str, line: u32) -> String {
    let lines: Vec<&str> = source.lines().collect();
    if lines.is_empty() {
        return String::new();
    }
    let lo = line.saturating_sub(3).max(1) as usize;
    let hi = (line + 3).min(lines.len() as u32) as usize;
    if lo > hi {
        return String::new();
    }
    lines[lo - 1..hi].join("\n")
}

pub fn run_analysis(
    v1: &ContractInput,
    v2: &ContractInput,
    cache: Option<&AstCache>,
    options: &AnalyzeOptions,
) -> Result<(AnalysisReport, PipelineStats)> {
    let t_total = Instant::now();
    let mut stats = PipelineStats::default();
    let mut warnings = Vec::new();

    let t_ingest = Instant::now();
    let ast1 = load_ast(v1, "v1", cache, &mut stats)?;
    let ast2 = load_ast(v2, "v2", cache, &mut stats)?;
    let ingest_ms = t_ingest.elapsed().as_millis() as u64;

    let quality_ok = ast1.quality.is_usable() && ast2.quality.is_usable();
    if !ast1.quality.is_usable() {
        warnings.push(format!(
            "v1 AST quality below threshold: completeness {:.2}, structure {:.2}, semantics {:.2}",
            ast1.quality.node_completeness,
            ast1.quality.structural_integrity,
            ast1.quality.semantic_completeness
        ));
    }
    if !ast2.quality.is_usable() {
        warnings.push(format!(
            "v2 AST quality below threshold: completeness {:.2}, structure {:.2}, semantics {:.2}",
            ast2.quality.node_completeness,
            ast2.quality.structural_integrity,
            ast2.quality.semantic_completeness
        ));
    }

    let t_diff = Instant::now();
    let (_mapping, _script, changes) =
        compute_changes(&ast1, &ast2, &v1.source, &v2.source, &options.diff);
    let diff_ms = t_diff.elapsed().as_millis() as u64;

    let t_detect = Instant::now();
    let v1_findings = detect::detect(&ast1, &v1.source);
    let mut v2_findings = detect::detect(&ast2, &v2.source);
    let layout1 = detect::compute_storage_layout(&ast1);
    let layout2 = detect::compute_storage_layout(&ast2);
    let collisions = detect::compare_layouts(&layout1, &layout2);
    if !collisions.is_empty() {
        v2_findings.extend(collisions);
        sort_and_renumber(&mut v2_findings);
    }
    let detect_ms = t_detect.elapsed().as_millis() as u64;

    let t_match = Instant::now();
    let matches = match_all_with(&changes, &v2_findings, &v2.source, &options.matching);
    let match_ms = t_match.elapsed().as_millis() as u64;

    let classifications = classify_pair(&v1_findings, &v2_findings);
    let summary = risk_summary(&classifications, &v2_findings);

    let (attributions, risk_patterns) = match &options.attrib {
        AttribMode::Off => (None, None),
        mode => {
            let backend: Box<dyn AttributionBackend> = match mode {
                AttribMode::Stub => Box::new(StubBackend),
                AttribMode::Http { endpoint, model } => {
                    Box::new(HttpBackend::from_env(endpoint.clone(), model.clone()))
                }
                AttribMode::Off => unreachable!(),
            };
            let mut records = Vec::new();
            let mut results = Vec::new();
            for pair in &matches {
                let Some(change) = changes.iter().find(|c| c.change_id == pair.change_id) else {
                    continue;
                };
                let Some(finding) =
                    v2_findings.iter().find(|f| f.finding_id == pair.finding_id)
                else {
                    continue;
                };
                let Some(classification) =
                    classifications.iter().find(|c| c.vuln_type == finding.vuln_type)
                else {
                    continue;
                };
                // context windows: deletes anchor on the v1 side
                let (v1_line, v2_line) = match change.op {
                    ChangeOp::Delete => (change.line, finding.line),
                    _ => (change.line, change.line),
                };
                let request = AttributionRequest::new(
                    pair.clone(),
                    change.clone(),
                    finding.clone(),
                    classification.clone(),
                    context_window(&v1.source, v1_line),
                    context_window(&v2.source, v2_line),
                );
                match backend.complete(&request) {
                    Ok(response) => match parse_attribution(&response) {
                        Ok(result) => {
                            results.push(result.clone());
                            records.push(AttributionRecord {
                                change_id: pair.change_id,
                                finding_id: pair.finding_id,
                                backend: backend.name().to_string(),
                                prompt: request.prompt_text.clone(),
                                response,
                                result,
                            });
                        }
                        Err(e) => warnings.push(format!(
                            "attribution parse failed for change {} / finding {}: {e}",
                            pair.change_id, pair.finding_id
                        )),
                    },
                    Err(e) => warnings.push(format!(
                        "attribution backend failed for change {} / finding {}: {e}",
                        pair.change_id, pair.finding_id
                    )),
                }
            }
            let patterns = extract_risk_patterns(&results);
            (Some(records), Some(patterns))
        }
    };

    let report = AnalysisReport {
        schema_version: REPORT_SCHEMA_VERSION.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at: now_epoch_seconds(),
        pair_label: options.pair_label.clone(),
        proxy_address: options.proxy_address.clone(),
        v1: VersionMeta {
            version_tag: ast1.version_tag.clone(),
            source_hash: ast1.source_hash.clone(),
            quality: ast1.quality,
            origin: Some(v1.origin.clone()),
        },
        v2: VersionMeta {
            version_tag: ast2.version_tag.clone(),
            source_hash: ast2.source_hash.clone(),
            quality: ast2.quality,
            origin: Some(v2.origin.clone()),
        },
        quality_ok,
        warnings,
        changes,
        v1_findings,
        v2_findings,
        matches,
        classifications,
        summary,
        attributions,
        risk_patterns,
        timings: Timings {
            total_ms: t_total.elapsed().as_millis() as u64,
            ingest_ms,
            diff_ms,
            detect_ms,
            match_ms,
        },
    };
    debug_assert!(report.references_are_consistent());
    Ok((report, stats))
}

/// Extract a few lines of context around a line, exposed for trace reports.
pub fn snippet_at(source: &str, line: u32) -> String {
    let index = LineIndex::new(source);
    let span = upgradescan_core::ast::SourceSpan::new(line.max(1), 0, line.max(1), 200);
    ast::snippet(source, &index, &span)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(source: &str) -> ContractInput {
        ContractInput { origin: "test".into(), source: source.into(), ast_document: None }
    }

    #[test]
    fn identical_sources_produce_all_smooth_report() {
        let src = "pragma solidity ^0.8.0;\ncontract C {\n  address owner;\n  uint256 total;\n  function set(uint256 v) public {\n    require(msg.sender == owner);\n    total = v;\n  }\n}\n";
        let options = AnalyzeOptions { pair_label: "t".into(), ..Default::default() };
        let (report, stats) = run_analysis(&input(src), &input(src), None, &options).unwrap();
        assert!(report.changes.is_empty());
        assert!(report.matches.is_empty());
        assert_eq!(report.summary.verdict.as_str(), "SmoothUpgrade");
        assert!(report.quality_ok);
        assert_eq!(stats.ingests, 2);
        assert!(report.references_are_consistent());
    }

    #[test]
    fn injected_reentrancy_is_detected_classified_and_matched() {
        let v1 = "pragma solidity ^0.8.0;\ncontract Bank {\n  mapping(address => uint256) balances;\n  function withdraw() public {\n    uint256 amount = balances[msg.sender];\n    balances[msg.sender] = 0;\n  }\n}\n";
        let v2 = "pragma solidity ^0.8.0;\ncontract Bank {\n  mapping(address => uint256) balances;\n  function withdraw() public {\n    uint256 amount = balances[msg.sender];\n    (bool ok, ) = msg.sender.call{value: amount}(\"\");\n    balances[msg.sender] = 0;\n  }\n}\n";
        let options = AnalyzeOptions {
            pair_label: "reentrancy".into(),
            attrib: AttribMode::Stub,
            ..Default::default()
        };
        let (report, _) = run_analysis(&input(v1), &input(v2), None, &options).unwrap();
        assert!(report.v1_findings.is_empty(), "{:?}", report.v1_findings);
        assert!(report
            .v2_findings
            .iter()
            .any(|f| f.vuln_type.as_str() == "Reentrancy" && f.line == 6));
        assert_eq!(report.summary.verdict.as_str(), "IntroduceVulnerability");
        assert!(
            report.matches.iter().any(|m| m.confidence > 0.6),
            "expected a confident match, got {:?}",
            report.matches
        );
        let attributions = report.attributions.as_ref().unwrap();
        assert!(!attributions.is_empty());
        assert!(report
            .risk_patterns
            .as_ref()
            .unwrap()
            .iter()
            .any(|(label, _)| label == "external call risks"));
    }

    #[test]
    fn cache_hit_keeps_report_identical_and_skips_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let cache = crate::cache::AstCache::open(crate::cache::CacheConfig::new(dir.path()))
            .unwrap();
        let v1 = "contract A {\n  uint256 x;\n}\n";
        let v2 = "contract A {\n  uint256 x;\n  uint256 y;\n}\n";
        let options = AnalyzeOptions { pair_label: "c".into(), ..Default::default() };
        let (cold, cold_stats) =
            run_analysis(&input(v1), &input(v2), Some(&cache), &options).unwrap();
        assert_eq!(cold_stats.ingests, 2);
        let (warm, warm_stats) =
            run_analysis(&input(v1), &input(v2), Some(&cache), &options).unwrap();
        assert_eq!(warm_stats.ingests, 0, "warm run must not re-ingest");
        assert_eq!(
            serde_json::to_string(&cold.normalized_for_comparison()).unwrap(),
            serde_json::to_string(&warm.normalized_for_comparison()).unwrap()
        );
    }

    #[test]
    fn truncated_ast_document_fails_quality_gate_with_warning() {
        // a document whose root covers only 2 of 10 source lines: node
        // completeness 0.2 < 0.8
        let source = "line1\nline2\nline3\nline4\nline5\nline6\nline7\nline8\nline9\nline10";
        let document = serde_json::json!({
            "nodeType": "SourceUnit",
            "src": "0:11:0"
        });
        let truncated = ContractInput {
            origin: "truncated".into(),
            source: source.into(),
            ast_document: Some(document),
        };
        let options = AnalyzeOptions { pair_label: "q".into(), ..Default::default() };
        let (report, _) = run_analysis(&truncated, &truncated, None, &options).unwrap();
        assert!(!report.quality_ok);
        assert!(report.warnings.iter().any(|w| w.contains("quality below threshold")));
    }
}
