//! Batch processing over a manifest of version pairs.
//!
//! Entries run on a bounded worker pool; each failure is isolated to its
//! entry and collected into the summary instead of aborting the run.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::cache::AstCache;
use crate::pipeline::{run_analysis, AnalyzeOptions, ContractInput};

/// One manifest entry: an explicit source pair. Lines starting with `#` are
/// comments; JSON manifests are arrays of `{"v1": ..., "v2": ...}` objects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub v1: PathBuf,
    pub v2: PathBuf,
    #[serde(default)]
    pub label: Option<String>,
}

impl ManifestEntry {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            let stem = |p: &Path| {
                p.file_stem().and_then(|s| s.to_str()).unwrap_or("pair").to_string()
            };
            let parent = self
                .v2
                .parent()
                .and_then(|p| p.file_name())
                .and_then(|s| s.to_str())
                .unwrap_or("pair");
            format!("{}-{}", parent, stem(&self.v2))
        })
    }
}

/// Parse a manifest file: a JSON array or whitespace-separated line pairs.
pub fn parse_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        let entries: Vec<ManifestEntry> =
            serde_json::from_str(trimmed).context("parsing JSON manifest")?;
        return Ok(entries);
    }
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(v1), Some(v2)) = (parts.next(), parts.next()) else {
            anyhow::bail!("manifest line {} needs two paths: {line:?}", lineno + 1);
        };
        entries.push(ManifestEntry { v1: v1.into(), v2: v2.into(), label: None });
    }
    Ok(entries)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BatchSummary {
    pub total: usize,
    pub succeeded: usize,
    pub failed: Vec<BatchFailure>,
    pub verdict_counts: BTreeMap<String, u32>,
    /// Severity distribution over all v2 findings in the batch (percent).
    pub high_pct: f64,
    pub medium_pct: f64,
    pub low_pct: f64,
    pub cache_hit_rate: f64,
    pub reports: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchFailure {
    pub label: String,
    pub error: String,
}

fn load_input(path: &Path) -> Result<ContractInput> {
    let source = fs::read_to_string(path)
        .with_context(|| format!("reading source {}", path.display()))?;
    let ast_path = path.with_extension("ast.json");
    let ast_document = if ast_path.exists() {
        Some(
            serde_json::from_str(&fs::read_to_string(&ast_path)?)
                .with_context(|| format!("parsing {}", ast_path.display()))?,
        )
    } else {
        None
    };
    Ok(ContractInput {
        origin: path.display().to_string(),
        source,
        ast_document,
    })
}

/// Analyze one manifest entry and write its report under `out_dir`.
fn process_entry(
    entry: &ManifestEntry,
    out_dir: &Path,
    cache: Option<&AstCache>,
    options: &AnalyzeOptions,
) -> Result<(PathBuf, String, usize, usize, usize)> {
    let v1 = load_input(&entry.v1)?;
    let v2 = load_input(&entry.v2)?;
    let mut entry_options = options.clone();
    entry_options.pair_label = entry.label();
    let (report, _) = run_analysis(&v1, &v2, cache, &entry_options)?;
    let out_path = out_dir.join(format!("{}.report.json", entry.label()));
    report.write_to(&out_path)?;
    let high = report
        .v2_findings
        .iter()
        .filter(|f| f.severity == upgradescan_core::detect::Severity::High)
        .count();
    let medium = report
        .v2_findings
        .iter()
        .filter(|f| f.severity == upgradescan_core::detect::Severity::Medium)
        .count();
    let low = report.v2_findings.len() - high - medium;
    Ok((out_path, report.summary.verdict.as_str().to_string(), high, medium, low))
}

pub fn run_batch(
    manifest_path: &Path,
    out_dir: &Path,
    cache: Option<&AstCache>,
    options: &AnalyzeOptions,
    jobs: usize,
) -> Result<BatchSummary> {
    let entries = parse_manifest(manifest_path)?;
    fs::create_dir_all(out_dir)?;
    let jobs = jobs.max(1).min(entries.len().max(1));

    struct Tally {
        summary: BatchSummary,
        severities: (usize, usize, usize),
    }
    let next = Mutex::new(0usize);
    let tally = Mutex::new(Tally {
        summary: BatchSummary { total: entries.len(), ..Default::default() },
        severities: (0, 0, 0),
    });

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = {
                    let mut guard = next.lock().unwrap();
                    let i = *guard;
                    *guard += 1;
                    i
                };
                let Some(entry) = entries.get(index) else {
                    break;
                };
                let outcome = process_entry(entry, out_dir, cache, options);
                let mut tally = tally.lock().unwrap();
                match outcome {
                    Ok((path, verdict, high, medium, low)) => {
                        tally.summary.succeeded += 1;
                        tally.summary.reports.push(path);
                        *tally.summary.verdict_counts.entry(verdict).or_insert(0) += 1;
                        tally.severities.0 += high;
                        tally.severities.1 += medium;
                        tally.severities.2 += low;
                    }
                    Err(e) => tally.summary.failed.push(BatchFailure {
                        label: entry.label(),
                        error: format!("{e:#}"),
                    }),
                }
            });
        }
    });

    let Tally { mut summary, severities } = tally.into_inner().unwrap();
    let total_findings = (severities.0 + severities.1 + severities.2) as f64;
    if total_findings > 0.0 {
        summary.high_pct = 100.0 * severities.0 as f64 / total_findings;
        summary.medium_pct = 100.0 * severities.1 as f64 / total_findings;
        summary.low_pct = 100.0 * severities.2 as f64 / total_findings;
    }
    if let Some(cache) = cache {
        summary.cache_hit_rate = cache.stats().hit_rate();
    }
    summary.reports.sort();
    summary.failed.sort_by(|a, b| a.label.cmp(&b.label));
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, content: &str) {
        fs::write(path, content).unwrap();
    }

    #[test]
    fn parses_line_and_json_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let line_manifest = dir.path().join("pairs.txt");
        write(&line_manifest, "# comment\na/v1.sol a/v2.sol\n\nb/v1.sol b/v2.sol\n");
        let entries = parse_manifest(&line_manifest).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].v1, PathBuf::from("a/v1.sol"));

        let json_manifest = dir.path().join("pairs.json");
        write(
            &json_manifest,
            r#"[{"v1": "x/v1.sol", "v2": "x/v2.sol", "label": "x"}]"#,
        );
        let entries = parse_manifest(&json_manifest).unwrap();
        assert_eq!(entries[0].label(), "x");
    }

    #[test]
    fn empty_manifest_gives_empty_summary() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = dir.path().join("empty.txt");
        write(&manifest, "# nothing\n");
        let out = dir.path().join("out");
        let summary =
            run_batch(&manifest, &out, None, &AnalyzeOptions::default(), 2).unwrap();
        assert_eq!(summary.total, 0);
        assert_eq!(summary.succeeded, 0);
        assert!(summary.failed.is_empty());
    }

    #[test]
    fn failures_are_isolated_per_entry() {
        let dir = tempfile::tempdir().unwrap();
        let mut lines = String::new();
        for i in 0..9 {
            let v1 = dir.path().join(format!("p{i}_v1.sol"));
            let v2 = dir.path().join(format!("p{i}_v2.sol"));
            write(&v1, &format!("contract C{i} {{\n  uint256 a;\n}}\n"));
            write(&v2, &format!("contract C{i} {{\n  uint256 a;\n  uint256 b;\n}}\n"));
            lines.push_str(&format!("{} {}\n", v1.display(), v2.display()));
        }
        lines.push_str(&format!(
            "{} {}\n",
            dir.path().join("missing_v1.sol").display(),
            dir.path().join("missing_v2.sol").display()
        ));
        let manifest = dir.path().join("pairs.txt");
        write(&manifest, &lines);
        let out = dir.path().join("out");
        let summary =
            run_batch(&manifest, &out, None, &AnalyzeOptions::default(), 4).unwrap();
        assert_eq!(summary.total, 10);
        assert_eq!(summary.succeeded, 9);
        assert_eq!(summary.failed.len(), 1);
        assert_eq!(summary.reports.len(), 9);
        assert_eq!(summary.verdict_counts.values().sum::<u32>(), 9);
        for report in &summary.reports {
            assert!(report.exists());
        }
    }
}
