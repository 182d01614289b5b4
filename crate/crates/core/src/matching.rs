//! Change–vulnerability matching.
//!
//! Every (change, finding) pair is scored on four normalized dimensions —
//! position proximity, keyword pattern context, a six-feature semantic
//! composite, and change-type affinity — combined into a weighted confidence:
//!
//! ```text
//! C = min(1.0, 0.30·S_pos + 0.25·S_pattern + 0.30·S_semantic + 0.15·S_type)
//! ```
//!
//! Pairs above the retention threshold (default 0.6, strict) are kept,
//! many-to-many, sorted by confidence descending with (change_id, finding_id)
//! as the tie-break. All weights and lookup tables are fixed constants so a
//! report can be audited dimension by dimension.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::NodeKind;
use crate::detect::{Finding, VulnType};
use crate::diff::{ChangeOp, ChangeRecord};

/// Confidence weights over (position, pattern, semantic, type).
pub const CONFIDENCE_WEIGHTS: [f64; 4] = [0.3, 0.25, 0.3, 0.15];

/// Semantic feature weights over (F1..F6).
pub const SEMANTIC_WEIGHTS: [f64; 6] = [0.3, 0.2, 0.15, 0.15, 0.1, 0.1];

/// Retention threshold: pairs are kept when confidence exceeds it strictly.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DimensionScores {
    pub s_pos: f64,
    pub s_pattern: f64,
    pub s_semantic: f64,
    pub s_type: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticFeatures {
    pub f1_function_name: f64,
    pub f2_node_type: f64,
    pub f3_keyword_overlap: f64,
    pub f4_op_similarity: f64,
    pub f5_trait_match: f64,
    pub f6_impact_area: f64,
}

/// A retained (change, finding) pair with its full score breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub change_id: u32,
    pub finding_id: u32,
    pub scores: DimensionScores,
    pub features: SemanticFeatures,
    pub confidence: f64,
}

/// Matching knobs. `enhanced` off zeroes the semantic dimension, mirroring
/// the plain (non-semantic) matching mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchOptions {
    pub enhanced: bool,
    pub threshold: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { enhanced: true, threshold: DEFAULT_THRESHOLD }
    }
}

/// Position score: a step function of the absolute line distance.
pub fn position_score(change: &ChangeRecord, finding: &Finding) -> f64 {
    let linedist = (change.line as i64 - finding.line as i64).unsigned_abs();
    match linedist {
        0 => 1.0,
        1..=2 => 0.8,
        3..=5 => 0.5,
        6..=10 => 0.2,
        _ => 0.1,
    }
}

/// Pattern score: distinct finding keywords appearing (case-insensitive,
/// word-boundary) within the ±5-line window around the change, 0.1 each,
/// capped at 1.0.
pub fn pattern_score(change: &ChangeRecord, finding: &Finding, source: &str) -> f64 {
    let lines: Vec<&str> = source.lines().collect();
    pattern_score_in_lines(change, finding, &lines)
}

fn pattern_score_in_lines(change: &ChangeRecord, finding: &Finding, lines: &[&str]) -> f64 {
    let lo = change.line.saturating_sub(5).max(1) as usize;
    let hi = (change.line + 5).min(lines.len() as u32) as usize;
    if lo > hi || lines.is_empty() {
        return 0.0;
    }
    let window: String = lines[lo - 1..hi].join("\n").to_lowercase();
    let count = finding
        .keywords
        .iter()
        .filter(|kw| contains_word(&window, &kw.to_lowercase()))
        .count();
    (count as f64 * 0.1).min(1.0)
}

/// Word-boundary containment: the match may not be flanked by identifier
/// characters, so `balance` does not fire inside `balances`.
fn contains_word(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    let hay = haystack.as_bytes();
    let mut start = 0;
    while let Some(at) = haystack[start..].find(needle) {
        let begin = start + at;
        let end = begin + needle.len();
        let left_ok = begin == 0 || !is_word_byte(hay[begin - 1]);
        let right_ok = end >= hay.len() || !is_word_byte(hay[end]);
        if left_ok && right_ok {
            return true;
        }
        start = begin + 1;
    }
    false
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Semantic score: weighted composite of six features, each in `[0,1]`.
pub fn semantic_score(change: &ChangeRecord, finding: &Finding) -> (f64, SemanticFeatures) {
    let features = SemanticFeatures {
        f1_function_name: f1_function_name(change, finding),
        f2_node_type: f2_node_type(&change.node_kind, finding.vuln_type),
        f3_keyword_overlap: f3_keyword_overlap(change, finding),
        f4_op_similarity: f4_op_similarity(change.op, finding.vuln_type),
        f5_trait_match: f5_trait_match(change, finding.vuln_type),
        f6_impact_area: f6_impact_area(change, finding),
    };
    (combine_semantic(&features), features)
}

pub fn combine_semantic(f: &SemanticFeatures) -> f64 {
    let [w1, w2, w3, w4, w5, w6] = SEMANTIC_WEIGHTS;
    (w1 * f.f1_function_name
        + w2 * f.f2_node_type
        + w3 * f.f3_keyword_overlap
        + w4 * f.f4_op_similarity
        + w5 * f.f5_trait_match
        + w6 * f.f6_impact_area)
        .min(1.0)
}

/// F1: fuzzy function-name match, `1 − editdist/maxlen`; 0 when either side
/// has no enclosing function.
fn f1_function_name(change: &ChangeRecord, finding: &Finding) -> f64 {
    match (&change.function_name, &finding.function_name) {
        (Some(a), Some(b)) => {
            if a == b {
                1.0
            } else {
                let dist = levenshtein(a, b) as f64;
                let max_len = a.len().max(b.len()) as f64;
                if max_len == 0.0 {
                    0.0
                } else {
                    (1.0 - dist / max_len).max(0.0)
                }
            }
        }
        _ => 0.0,
    }
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = alloc::vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j + 1] + 1).min(cur[j] + 1).min(prev[j] + cost);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// F2: relevance of the changed node kind to the vulnerability type
/// (1.0 strong, 0.5 weak, 0.0 otherwise).
fn f2_node_type(kind: &NodeKind, vuln: VulnType) -> f64 {
    let tag = kind.tag();
    let (strong, weak): (&[&str], &[&str]) = match vuln {
        VulnType::Reentrancy => (
            &["FunctionCall", "MemberAccess", "FunctionCallOptions", "TupleDeclaration"],
            &["Assignment", "ExpressionStatement", "Block", "FunctionDefinition", "Identifier"],
        ),
        VulnType::AccessControl => (
            &["FunctionCall", "ExpressionStatement", "FunctionDefinition", "ModifierDefinition", "ModifierInvocation"],
            &["Identifier", "MemberAccess", "Assignment", "Visibility"],
        ),
        VulnType::IntegerOverflow => (
            &["BinaryOperation", "Assignment", "PragmaDirective"],
            &["ExpressionStatement", "VariableDeclaration", "FunctionCall", "Literal", "Identifier"],
        ),
        VulnType::TxOriginAuth => (
            &["MemberAccess", "BinaryOperation"],
            &["FunctionCall", "ExpressionStatement", "IfStatement", "Identifier"],
        ),
        VulnType::UnprotectedDelegatecall => (
            &["FunctionCall", "MemberAccess", "FunctionCallOptions", "TupleDeclaration"],
            &["ExpressionStatement", "FunctionDefinition", "Identifier"],
        ),
        VulnType::UninitializedProxy => (
            &["FunctionDefinition", "FunctionCall"],
            &["ModifierDefinition", "ModifierInvocation", "ExpressionStatement", "Block"],
        ),
        VulnType::StorageCollision => (
            &["VariableDeclaration"],
            &["ContractDefinition", "ElementaryTypeName", "Mapping", "ArrayTypeName", "Identifier"],
        ),
        VulnType::UnprotectedUpgrade => (
            &["FunctionDefinition", "ModifierInvocation"],
            &["FunctionCall", "Identifier", "ExpressionStatement", "Visibility"],
        ),
    };
    if strong.contains(&tag) {
        1.0
    } else if weak.contains(&tag) {
        0.5
    } else {
        0.0
    }
}

/// F3: Jaccard index between the change's identifiers plus snippet tokens and
/// the finding's keyword set, all lowercase.
fn f3_keyword_overlap(change: &ChangeRecord, finding: &Finding) -> f64 {
    let mut change_terms: alloc::collections::BTreeSet<String> =
        change.identifiers.iter().map(|s| s.to_lowercase()).collect();
    for token in tokenize_words(&change.snippet) {
        change_terms.insert(token);
    }
    let keywords: alloc::collections::BTreeSet<String> =
        finding.keywords.iter().map(|s| s.to_lowercase()).collect();
    if change_terms.is_empty() && keywords.is_empty() {
        return 0.0;
    }
    let inter = change_terms.intersection(&keywords).count();
    let union = change_terms.union(&keywords).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn tokenize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for b in text.bytes() {
        if is_word_byte(b) {
            cur.push(b.to_ascii_lowercase() as char);
        } else if !cur.is_empty() {
            out.push(core::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// F4: change-operation affinity per vulnerability type, in {0, 0.5, 1.0}.
fn f4_op_similarity(op: ChangeOp, vuln: VulnType) -> f64 {
    use ChangeOp::*;
    use VulnType::*;
    match (op, vuln) {
        (Insert, Reentrancy)
        | (Insert, UnprotectedDelegatecall)
        | (Insert, IntegerOverflow)
        | (Insert, TxOriginAuth)
        | (Delete, AccessControl)
        | (Delete, UninitializedProxy)
        | (Delete, UnprotectedUpgrade)
        | (Delete, StorageCollision)
        | (Update, IntegerOverflow)
        | (Update, StorageCollision)
        | (Move, Reentrancy)
        | (Move, StorageCollision) => 1.0,
        (Delete, TxOriginAuth) => 0.0,
        _ => 0.5,
    }
}

/// F5: 1.0 when the snippet contains any of the type's trait keywords.
fn f5_trait_match(change: &ChangeRecord, vuln: VulnType) -> f64 {
    let snippet = change.snippet.to_lowercase();
    for kw in vuln.keywords() {
        if contains_word(&snippet, kw) {
            return 1.0;
        }
    }
    0.0
}

/// F6: impact area. Same enclosing function scores 1.0; both inside functions
/// (different ones) or both at contract scope scores 0.5; a mixed
/// inside/outside pair scores 0.0.
fn f6_impact_area(change: &ChangeRecord, finding: &Finding) -> f64 {
    match (&change.function_name, &finding.function_name) {
        (Some(a), Some(b)) if a == b => 1.0,
        (Some(_), Some(_)) | (None, None) => 0.5,
        _ => 0.0,
    }
}

/// Change-type score: fixed table over (op, vulnerability type); unlisted
/// combinations floor at 0.1.
pub fn type_score(change: &ChangeRecord, finding: &Finding) -> f64 {
    use ChangeOp::*;
    use VulnType::*;
    match (change.op, finding.vuln_type) {
        (Delete, AccessControl) => 0.9,
        (Insert, Reentrancy) => 0.8,
        (Update, IntegerOverflow) => 0.7,
        (Insert, UnprotectedDelegatecall) => 0.8,
        (Delete, UninitializedProxy) => 0.8,
        (Update, AccessControl) => 0.6,
        (Move, _) => 0.4,
        _ => 0.1,
    }
}

/// Weighted confidence over the four dimensions, capped at 1.0.
pub fn confidence(scores: &DimensionScores) -> f64 {
    let [wp, wk, ws, wt] = CONFIDENCE_WEIGHTS;
    (wp * scores.s_pos + wk * scores.s_pattern + ws * scores.s_semantic + wt * scores.s_type)
        .min(1.0)
}

/// Score one pair under the given options.
pub fn score_pair(
    change: &ChangeRecord,
    finding: &Finding,
    source_lines: &[&str],
    options: &MatchOptions,
) -> MatchPair {
    let s_pos = position_score(change, finding);
    let s_pattern = pattern_score_in_lines(change, finding, source_lines);
    let (s_semantic, features) = if options.enhanced {
        semantic_score(change, finding)
    } else {
        (0.0, SemanticFeatures::default())
    };
    let s_type = type_score(change, finding);
    let scores = DimensionScores { s_pos, s_pattern, s_semantic, s_type };
    MatchPair {
        change_id: change.change_id,
        finding_id: finding.finding_id,
        confidence: confidence(&scores),
        scores,
        features,
    }
}

/// Evaluate the full cross product and retain pairs whose confidence exceeds
/// the threshold, sorted by confidence descending, ties by ascending
/// (change_id, finding_id). Retention is many-to-many.
pub fn match_all(changes: &[ChangeRecord], findings: &[Finding], source: &str) -> Vec<MatchPair> {
    match_all_with(changes, findings, source, &MatchOptions::default())
}

pub fn match_all_with(
    changes: &[ChangeRecord],
    findings: &[Finding],
    source: &str,
    options: &MatchOptions,
) -> Vec<MatchPair> {
    let lines: Vec<&str> = source.lines().collect();
    let mut pairs = Vec::new();
    for change in changes {
        for finding in findings {
            let pair = score_pair(change, finding, &lines, options);
            if pair.confidence > options.threshold {
                pairs.push(pair);
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| (a.change_id, a.finding_id).cmp(&(b.change_id, b.finding_id)))
    });
    pairs
}
