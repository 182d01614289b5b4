//! Seeded end-to-end detection: each fixture pair injects exactly one known
//! vulnerability through one known change. The pipeline must detect the
//! injected type at the injected line (±2), classify the pair as introducing
//! that type, and link the injecting change to the finding with confidence
//! above the retention threshold in at least 9 of 10 pairs.

use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use upgradescan::pipeline::{run_analysis, AnalyzeOptions, ContractInput};
use upgradescan_core::classify::UpgradeBehavior;
use upgradescan_core::detect::VulnType;

#[derive(Debug, Deserialize)]
struct SeedEntry {
    name: String,
    vuln_type: String,
    injected_line: u32,
    #[allow(dead_code)]
    change_op: String,
    #[allow(dead_code)]
    description: String,
}

fn fixture_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load_manifest() -> Vec<SeedEntry> {
    let path = fixture_root().join("seeded/manifest.json");
    serde_json::from_str(&fs::read_to_string(&path).expect("manifest")).expect("manifest JSON")
}

fn input(path: PathBuf) -> ContractInput {
    ContractInput {
        origin: path.display().to_string(),
        source: fs::read_to_string(&path).expect("fixture source"),
        ast_document: None,
    }
}

struct Outcome {
    name: String,
    detected_at_line: bool,
    classified_introduce: bool,
    linked_confidence: Option<f64>,
    v1_clean_of_type: bool,
}

fn run_corpus() -> Vec<Outcome> {
    let mut outcomes = Vec::new();
    for entry in load_manifest() {
        let dir = fixture_root().join("seeded").join(&entry.name);
        let options = AnalyzeOptions { pair_label: entry.name.clone(), ..Default::default() };
        let (report, _) =
            run_analysis(&input(dir.join("v1.sol")), &input(dir.join("v2.sol")), None, &options)
                .unwrap_or_else(|e| panic!("{}: {e}", entry.name));

        let vuln_type: VulnType = serde_json::from_value(serde_json::Value::String(
            entry.vuln_type.clone(),
        ))
        .expect("manifest vuln_type");

        let detected_at_line = report.v2_findings.iter().any(|f| {
            f.vuln_type == vuln_type
                && f.line.abs_diff(entry.injected_line) <= 2
        });
        let classified_introduce = report
            .classifications
            .iter()
            .find(|c| c.vuln_type == vuln_type)
            .map(|c| c.behavior == UpgradeBehavior::IntroduceVulnerability)
            .unwrap_or(false);
        let linked_confidence = report
            .matches
            .iter()
            .filter(|m| {
                report
                    .v2_findings
                    .iter()
                    .any(|f| f.finding_id == m.finding_id && f.vuln_type == vuln_type)
            })
            .map(|m| m.confidence)
            .fold(None, |best: Option<f64>, c| Some(best.map_or(c, |b| b.max(c))));
        let v1_clean_of_type =
            !report.v1_findings.iter().any(|f| f.vuln_type == vuln_type);

        outcomes.push(Outcome {
            name: entry.name,
            detected_at_line,
            classified_introduce,
            linked_confidence,
            v1_clean_of_type,
        });
    }
    outcomes
}

#[test]
fn seeded_corpus_detection_classification_and_linking() {
    let outcomes = run_corpus();
    assert_eq!(outcomes.len(), 10, "ten seeded pairs expected");

    for o in &outcomes {
        println!(
            "{:28} detected={} introduce={} v1_clean={} best_confidence={:?}",
            o.name, o.detected_at_line, o.classified_introduce, o.v1_clean_of_type,
            o.linked_confidence
        );
    }

    let detected = outcomes.iter().filter(|o| o.detected_at_line).count();
    let classified = outcomes.iter().filter(|o| o.classified_introduce).count();
    let linked = outcomes
        .iter()
        .filter(|o| o.linked_confidence.map(|c| c > 0.6).unwrap_or(false))
        .count();
    let clean = outcomes.iter().filter(|o| o.v1_clean_of_type).count();

    assert_eq!(detected, 10, "every injected vulnerability must be found at its line (±2)");
    assert_eq!(classified, 10, "every pair must classify as IntroduceVulnerability");
    assert_eq!(clean, 10, "v1 must be clean of the injected type");
    assert!(linked >= 9, "at least 9/10 pairs must link change to finding: got {linked}");
}
