//! Brute-force oracle equivalence for the matcher: for small inputs the
//! production `match_all` must agree pair-for-pair with a plainly written
//! enumerate → filter → sort reimplementation.

use proptest::prelude::*;

use upgradescan_core::ast::{NodeKind, SourceSpan};
use upgradescan_core::detect::{Finding, Severity, VulnType};
use upgradescan_core::diff::{ChangeOp, ChangeRecord};
use upgradescan_core::matching::{
    confidence, match_all, pattern_score, position_score, semantic_score, type_score,
    DimensionScores, MatchPair,
};

const OPS: [ChangeOp; 4] = [ChangeOp::Insert, ChangeOp::Delete, ChangeOp::Update, ChangeOp::Move];
const KINDS: &[&str] = &[
    "FunctionCall",
    "FunctionDefinition",
    "Assignment",
    "ExpressionStatement",
    "VariableDeclaration",
    "BinaryOperation",
];
const FUNCS: [Option<&str>; 4] = [None, Some("withdraw"), Some("upgradeTo"), Some("initialize")];
const SNIPPETS: &[&str] = &[
    "",
    "msg.sender.call{value: amount}(\"\")",
    "require(msg.sender == owner)",
    "implementation = impl",
    "total = total + v",
];

fn arb_change() -> impl Strategy<Value = ChangeRecord> {
    (0u32..4, 1u32..60, 0usize..KINDS.len(), 0usize..FUNCS.len(), 0usize..SNIPPETS.len()).prop_map(
        |(op, line, kind, func, snip)| ChangeRecord {
            change_id: 0,
            op: OPS[op as usize],
            line,
            end_line: line,
            span: SourceSpan::new(line, 0, line, 10),
            function_name: FUNCS[func].map(String::from),
            node_kind: NodeKind::from_tag(KINDS[kind]),
            identifiers: SNIPPETS[snip]
                .split(|c: char| !c.is_alphanumeric())
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect(),
            snippet: SNIPPETS[snip].to_string(),
        },
    )
}

fn arb_finding() -> impl Strategy<Value = Finding> {
    (0usize..VulnType::ALL.len(), 1u32..60, 0usize..FUNCS.len()).prop_map(|(vt, line, func)| {
        let vuln_type = VulnType::ALL[vt];
        Finding {
            finding_id: 0,
            vuln_type,
            severity: Severity::High,
            line,
            function_name: FUNCS[func].map(String::from),
            description: String::new(),
            keywords: vuln_type.keywords().iter().map(|s| s.to_string()).collect(),
            detector_id: "oracle".into(),
        }
    })
}

/// The oracle: straight-line reimplementation of Algorithm 1's loop shape.
fn oracle_match(changes: &[ChangeRecord], findings: &[Finding], source: &str) -> Vec<MatchPair> {
    let mut kept: Vec<MatchPair> = Vec::new();
    for c in changes {
        for f in findings {
            let scores = DimensionScores {
                s_pos: position_score(c, f),
                s_pattern: pattern_score(c, f, source),
                s_semantic: semantic_score(c, f).0,
                s_type: type_score(c, f),
            };
            let conf = confidence(&scores);
            if conf > 0.6 {
                kept.push(MatchPair {
                    change_id: c.change_id,
                    finding_id: f.finding_id,
                    scores,
                    features: semantic_score(c, f).1,
                    confidence: conf,
                });
            }
        }
    }
    // selection sort by (confidence desc, ids asc): independent of the
    // production sort call
    let mut out: Vec<MatchPair> = Vec::with_capacity(kept.len());
    while !kept.is_empty() {
        let mut best = 0;
        for i in 1..kept.len() {
            let a = &kept[i];
            let b = &kept[best];
            let better = a.confidence > b.confidence
                || (a.confidence == b.confidence
                    && (a.change_id, a.finding_id) < (b.change_id, b.finding_id));
            if better {
                best = i;
            }
        }
        out.push(kept.remove(best));
    }
    out
}

const SOURCE: &str = "pragma solidity ^0.8.0;\ncontract C {\n  address owner;\n  uint256 total;\n  mapping(address => uint256) balances;\n  function withdraw() public {\n    uint256 amount = balances[msg.sender];\n    msg.sender.call{value: amount}(\"\");\n    balances[msg.sender] = 0;\n  }\n  function upgradeTo(address impl) external {\n    implementation = impl;\n  }\n  function initialize(address o) public {\n    owner = o;\n  }\n  function plain() public {\n    total = total + 1;\n  }\n}\n";

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn match_all_equals_brute_force_oracle(
        mut changes in prop::collection::vec(arb_change(), 0..10),
        mut findings in prop::collection::vec(arb_finding(), 0..10),
    ) {
        for (i, c) in changes.iter_mut().enumerate() {
            c.change_id = i as u32;
        }
        for (i, f) in findings.iter_mut().enumerate() {
            f.finding_id = i as u32;
        }
        let got = match_all(&changes, &findings, SOURCE);
        let expected = oracle_match(&changes, &findings, SOURCE);
        prop_assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(expected.iter()) {
            prop_assert_eq!((g.change_id, g.finding_id), (e.change_id, e.finding_id));
            prop_assert!((g.confidence - e.confidence).abs() < 1e-12);
        }
        // every retained pair clears the threshold strictly
        prop_assert!(got.iter().all(|p| p.confidence > 0.6));
        // sorted non-increasing
        prop_assert!(got.windows(2).all(|w| w[0].confidence >= w[1].confidence));
    }
}
