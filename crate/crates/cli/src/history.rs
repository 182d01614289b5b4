//! Proxy upgrade-history assembly: event logs → ordered version records with
//! fetched sources → the (V1, V2) analysis pair.

use anyhow::{Context, Result};
use thiserror::Error;

use upgradescan_core::trace::{
    dual_sort, parse_upgrade_events, select_pair, EventFilter, TraceError, VersionRecord,
};

use crate::fetch::{FetchError, SourceProvider};
use crate::pipeline::ContractInput;

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("no adjacent verified version pair is available for analysis")]
    NoAnalyzablePair,
}

/// A selected analysis pair plus assembly diagnostics.
#[derive(Debug)]
pub struct TracedPair {
    pub v1: ContractInput,
    pub v2: ContractInput,
    pub v1_address: String,
    pub v2_address: String,
    /// Addresses whose source could not be verified.
    pub unverified: Vec<String>,
    /// True when the default (latest) pair was replaced by an earlier one
    /// because a member had no verified source.
    pub downgraded: bool,
    pub history: Vec<VersionRecord>,
}

/// Build the ordered version history and pick the analysis pair.
///
/// Records whose source cannot be fetched stay in the history (they still
/// order the timeline) but are excluded from diffing; if the requested pair
/// touches one, the nearest earlier fully-verified adjacent pair is used and
/// the result is flagged as downgraded.
pub fn assemble_pair(
    provider: &SourceProvider,
    filter: &EventFilter,
    at: Option<usize>,
) -> Result<TracedPair> {
    let logs = provider.load_history().context("loading upgrade event history")?;
    let events = parse_upgrade_events(&logs, filter)?;
    let mut records: Vec<VersionRecord> =
        events.iter().map(VersionRecord::from_event).collect();

    let mut unverified = Vec::new();
    for record in &mut records {
        match provider.fetch_contract(&record.implementation_address) {
            Ok(fetched) => {
                record.source_text = Some(fetched.source_text);
                record.ast_document = fetched.ast_document;
                record.version_string = fetched.version;
            }
            Err(FetchError::NotVerified(addr)) => unverified.push(addr),
            Err(e) => return Err(e).context("fetching implementation source"),
        }
    }

    let ordered = dual_sort(&records);
    if ordered.len() < 2 {
        return Err(HistoryError::Trace(TraceError::InsufficientHistory {
            have: ordered.len(),
        })
        .into());
    }

    let has_source = |r: &VersionRecord| r.source_text.is_some();
    let (pair, downgraded) = match select_pair(&ordered, at) {
        Ok((a, b)) if has_source(a) && has_source(b) => (Some((a, b)), false),
        Ok(_) | Err(TraceError::InsufficientHistory { .. }) if at.is_none() => {
            // walk earlier adjacent pairs, newest first
            let mut found = None;
            for i in (0..ordered.len() - 1).rev() {
                let (a, b) = (&ordered[i], &ordered[i + 1]);
                if has_source(a) && has_source(b) {
                    found = Some((a, b));
                    break;
                }
            }
            (found, true)
        }
        Ok(_) => (None, true),
        Err(e) => return Err(e.into()),
    };

    let Some((v1, v2)) = pair else {
        return Err(HistoryError::NoAnalyzablePair.into());
    };

    Ok(TracedPair {
        v1: ContractInput {
            origin: v1.implementation_address.clone(),
            source: v1.source_text.clone().unwrap_or_default(),
            ast_document: v1.ast_document.clone(),
        },
        v2: ContractInput {
            origin: v2.implementation_address.clone(),
            source: v2.source_text.clone().unwrap_or_default(),
            ast_document: v2.ast_document.clone(),
        },
        v1_address: v1.implementation_address.clone(),
        v2_address: v2.implementation_address.clone(),
        unverified,
        downgraded,
        history: ordered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fetch::OfflineFixtures;
    use std::fs;
    use std::path::Path;
    use upgradescan_core::trace::UPGRADED_TOPIC;

    fn impl_addr(n: u64) -> String {
        format!("0x{:040x}", n)
    }

    fn write_history(dir: &Path, impls: &[u64]) {
        let events: Vec<serde_json::Value> = impls
            .iter()
            .enumerate()
            .map(|(i, n)| {
                serde_json::json!({
                    "address": "0x00000000000000000000000000000000000000ff",
                    "topics": [format!("0x{UPGRADED_TOPIC}"), format!("0x{:064x}", n)],
                    "data": "0x",
                    "block_number": 100 + i as u64,
                    "timestamp": 1_700_000_000 + i as u64,
                    "tx_hash": format!("0x{:064x}", i)
                })
            })
            .collect();
        fs::write(
            dir.join("history.json"),
            serde_json::to_string(&serde_json::json!({ "events": events })).unwrap(),
        )
        .unwrap();
    }

    #[test]
    fn two_verified_versions_select_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        write_history(dir.path(), &[1, 2]);
        for n in [1u64, 2] {
            fs::write(
                dir.path().join(format!("{}.sol", impl_addr(n))),
                format!("contract V{n} {{\n  uint256 x;\n}}\n"),
            )
            .unwrap();
        }
        let provider = SourceProvider::Offline(OfflineFixtures::new(dir.path()));
        let pair = assemble_pair(&provider, &EventFilter::default(), None).unwrap();
        assert_eq!(pair.v1_address, impl_addr(1));
        assert_eq!(pair.v2_address, impl_addr(2));
        assert!(!pair.downgraded);
        assert!(pair.unverified.is_empty());
    }

    #[test]
    fn single_version_is_insufficient() {
        let dir = tempfile::tempdir().unwrap();
        write_history(dir.path(), &[1]);
        let provider = SourceProvider::Offline(OfflineFixtures::new(dir.path()));
        let err = assemble_pair(&provider, &EventFilter::default(), None).unwrap_err();
        let trace_err = err.downcast_ref::<HistoryError>().unwrap();
        assert!(matches!(
            trace_err,
            HistoryError::Trace(TraceError::InsufficientHistory { have: 1 })
        ));
    }

    #[test]
    fn unverified_latest_downgrades_to_earlier_pair() {
        let dir = tempfile::tempdir().unwrap();
        write_history(dir.path(), &[1, 2, 3]);
        // only versions 1 and 2 have verified sources
        for n in [1u64, 2] {
            fs::write(
                dir.path().join(format!("{}.sol", impl_addr(n))),
                format!("contract V{n} {{\n  uint256 x;\n}}\n"),
            )
            .unwrap();
        }
        let provider = SourceProvider::Offline(OfflineFixtures::new(dir.path()));
        let pair = assemble_pair(&provider, &EventFilter::default(), None).unwrap();
        assert!(pair.downgraded);
        assert_eq!(pair.unverified, [impl_addr(3)]);
        assert_eq!(pair.v2_address, impl_addr(2));
    }

    #[test]
    fn no_verified_pair_at_all_errors() {
        let dir = tempfile::tempdir().unwrap();
        write_history(dir.path(), &[1, 2]);
        let provider = SourceProvider::Offline(OfflineFixtures::new(dir.path()));
        let err = assemble_pair(&provider, &EventFilter::default(), None).unwrap_err();
        assert!(matches!(
            err.downcast_ref::<HistoryError>(),
            Some(HistoryError::NoAnalyzablePair)
        ));
    }
}
