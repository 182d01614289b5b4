//! Per-type classification of an upgrade's security effect and the
//! aggregated risk summary.
//!
//! The truth table over (present in v1, present in v2):
//!
//! | v1 | v2 | behavior               |
//! |----|----|------------------------|
//! | ✗  | ✓  | IntroduceVulnerability |
//! | ✓  | ✗  | FixVulnerability       |
//! | ✗  | ✗  | SmoothUpgrade          |
//! | ✓  | ✓  | InvalidUpgrade         |
//!
//! Presence is type-level: a version "has" a type when at least one finding
//! of that type exists.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::detect::{Finding, Severity, VulnType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UpgradeBehavior {
    IntroduceVulnerability,
    FixVulnerability,
    SmoothUpgrade,
    InvalidUpgrade,
}

impl UpgradeBehavior {
    pub fn as_str(&self) -> &'static str {
        match self {
            UpgradeBehavior::IntroduceVulnerability => "IntroduceVulnerability",
            UpgradeBehavior::FixVulnerability => "FixVulnerability",
            UpgradeBehavior::SmoothUpgrade => "SmoothUpgrade",
            UpgradeBehavior::InvalidUpgrade => "InvalidUpgrade",
        }
    }

    /// The security conclusion attached to each behavior.
    pub fn conclusion(&self) -> &'static str {
        match self {
            UpgradeBehavior::IntroduceVulnerability => "Risk Increased",
            UpgradeBehavior::FixVulnerability => "Security Improved",
            UpgradeBehavior::SmoothUpgrade => "No Security Impact",
            UpgradeBehavior::InvalidUpgrade => "Uncertain, needs analysis",
        }
    }
}

impl core::fmt::Display for UpgradeBehavior {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One taxonomy row: the upgrade's effect on one vulnerability type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypeClassification {
    pub vuln_type: VulnType,
    pub v1_present: bool,
    pub v2_present: bool,
    pub behavior: UpgradeBehavior,
    /// Ids of the findings backing each side's presence bit.
    pub v1_findings: Vec<u32>,
    pub v2_findings: Vec<u32>,
}

/// The four-row truth table.
pub fn classify_type(v1_present: bool, v2_present: bool) -> UpgradeBehavior {
    match (v1_present, v2_present) {
        (false, true) => UpgradeBehavior::IntroduceVulnerability,
        (true, false) => UpgradeBehavior::FixVulnerability,
        (false, false) => UpgradeBehavior::SmoothUpgrade,
        (true, true) => UpgradeBehavior::InvalidUpgrade,
    }
}

/// One classification row per taxonomy type, in declaration order.
pub fn classify_pair(v1_findings: &[Finding], v2_findings: &[Finding]) -> Vec<TypeClassification> {
    VulnType::ALL
        .iter()
        .map(|&vuln_type| {
            let v1: Vec<u32> = v1_findings
                .iter()
                .filter(|f| f.vuln_type == vuln_type)
                .map(|f| f.finding_id)
                .collect();
            let v2: Vec<u32> = v2_findings
                .iter()
                .filter(|f| f.vuln_type == vuln_type)
                .map(|f| f.finding_id)
                .collect();
            TypeClassification {
                vuln_type,
                v1_present: !v1.is_empty(),
                v2_present: !v2.is_empty(),
                behavior: classify_type(!v1.is_empty(), !v2.is_empty()),
                v1_findings: v1,
                v2_findings: v2,
            }
        })
        .collect()
}

/// Aggregated counts, severity distribution and overall verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSummary {
    pub introduced: u32,
    pub fixed: u32,
    pub smooth: u32,
    pub invalid: u32,
    /// Percentage of v2 findings at each severity; zeros when there are none.
    pub high_pct: f64,
    pub medium_pct: f64,
    pub low_pct: f64,
    pub verdict: UpgradeBehavior,
}

/// Summarize classification rows. Verdict precedence: any introduced row
/// dominates, then fixes, then invalid rows, else smooth.
pub fn risk_summary(classifications: &[TypeClassification], v2_findings: &[Finding]) -> RiskSummary {
    let count =
        |b: UpgradeBehavior| classifications.iter().filter(|c| c.behavior == b).count() as u32;
    let introduced = count(UpgradeBehavior::IntroduceVulnerability);
    let fixed = count(UpgradeBehavior::FixVulnerability);
    let smooth = count(UpgradeBehavior::SmoothUpgrade);
    let invalid = count(UpgradeBehavior::InvalidUpgrade);

    let total = v2_findings.len() as f64;
    let sev = |s: Severity| {
        if total == 0.0 {
            0.0
        } else {
            100.0 * v2_findings.iter().filter(|f| f.severity == s).count() as f64 / total
        }
    };

    let verdict = if introduced > 0 {
        UpgradeBehavior::IntroduceVulnerability
    } else if fixed > 0 {
        UpgradeBehavior::FixVulnerability
    } else if invalid > 0 {
        UpgradeBehavior::InvalidUpgrade
    } else {
        UpgradeBehavior::SmoothUpgrade
    };

    RiskSummary {
        introduced,
        fixed,
        smooth,
        invalid,
        high_pct: sev(Severity::High),
        medium_pct: sev(Severity::Medium),
        low_pct: sev(Severity::Low),
        verdict,
    }
}
