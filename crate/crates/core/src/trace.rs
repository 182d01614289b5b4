//! Implementation-history reconstruction for proxies: upgrade event log
//! parsing, version ordering and analysis-pair selection.
//!
//! Source fetching (HTTP or fixture files) lives in the companion crate;
//! everything here is pure so history handling can be tested offline.

use alloc::borrow::ToOwned;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// keccak256("Upgraded(address)"): topic0 of the standard proxy upgrade
/// event. Additional signatures can be admitted through [`EventFilter`].
pub const UPGRADED_TOPIC: &str =
    "bc7cd75a20ee27fd9adebab32041f755214dbc6bffa90cc0225b39da2e5c2d3b";

/// One raw log record, the shape stored in `history.json` fixtures and
/// returned by explorer APIs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawLog {
    #[serde(default)]
    pub address: String,
    pub topics: Vec<String>,
    #[serde(default)]
    pub data: String,
    pub block_number: u64,
    #[serde(default)]
    pub timestamp: u64,
    #[serde(default)]
    pub tx_hash: String,
}

/// A decoded proxy upgrade event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpgradeEvent {
    pub proxy_address: String,
    pub implementation_address: String,
    pub block_number: u64,
    pub timestamp: u64,
    pub tx_hash: String,
}

/// One implementation version in a proxy's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionRecord {
    pub implementation_address: String,
    pub version_string: Option<String>,
    pub timestamp: u64,
    pub block_number: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ast_document: Option<serde_json::Value>,
}

impl VersionRecord {
    pub fn from_event(event: &UpgradeEvent) -> VersionRecord {
        VersionRecord {
            implementation_address: event.implementation_address.clone(),
            version_string: None,
            timestamp: event.timestamp,
            block_number: event.block_number,
            source_text: None,
            ast_document: None,
        }
    }
}

/// Recognized upgrade-event topic0 values (lowercase, no 0x prefix).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFilter {
    pub topics: Vec<String>,
}

impl Default for EventFilter {
    fn default() -> Self {
        EventFilter { topics: alloc::vec![UPGRADED_TOPIC.to_owned()] }
    }
}

impl EventFilter {
    pub fn with_extra_topics<I: IntoIterator<Item = String>>(extra: I) -> EventFilter {
        let mut filter = EventFilter::default();
        filter.topics.extend(extra.into_iter().map(|t| normalize_hex(&t)));
        filter
    }

    fn matches(&self, topic0: &str) -> bool {
        let normalized = normalize_hex(topic0);
        self.topics.contains(&normalized)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceError {
    /// A log matched the upgrade signature but its topics cannot be decoded.
    MalformedLog(String),
    /// Fewer versions than an analysis pair needs.
    InsufficientHistory { have: usize },
}

impl core::fmt::Display for TraceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TraceError::MalformedLog(why) => write!(f, "malformed upgrade log: {why}"),
            TraceError::InsufficientHistory { have } => {
                write!(f, "need at least 2 implementation versions, found {have}")
            }
        }
    }
}

impl core::error::Error for TraceError {}

fn normalize_hex(s: &str) -> String {
    s.trim().trim_start_matches("0x").trim_start_matches("0X").to_lowercase()
}

/// Normalized `0x…` form of an address (checksum-insensitive).
pub fn normalize_address(s: &str) -> String {
    let mut out = String::from("0x");
    out.push_str(&normalize_hex(s));
    out
}

/// Filter logs down to recognized upgrade events and decode the new
/// implementation address from topic1. Input (block) order is preserved.
pub fn parse_upgrade_events(
    logs: &[RawLog],
    filter: &EventFilter,
) -> Result<Vec<UpgradeEvent>, TraceError> {
    let mut events = Vec::new();
    for log in logs {
        let Some(topic0) = log.topics.first() else {
            continue;
        };
        if !filter.matches(topic0) {
            continue;
        }
        let topic1 = log
            .topics
            .get(1)
            .ok_or_else(|| TraceError::MalformedLog("missing topic1".to_owned()))?;
        let raw = normalize_hex(topic1);
        let bytes = hex::decode(&raw)
            .map_err(|_| TraceError::MalformedLog(alloc::format!("topic1 not hex: {topic1}")))?;
        if bytes.len() != 32 {
            return Err(TraceError::MalformedLog(alloc::format!(
                "topic1 has {} bytes, expected 32",
                bytes.len()
            )));
        }
        let implementation_address = alloc::format!("0x{}", hex::encode(&bytes[12..]));
        events.push(UpgradeEvent {
            proxy_address: normalize_address(&log.address),
            implementation_address,
            block_number: log.block_number,
            timestamp: log.timestamp,
            tx_hash: log.tx_hash.clone(),
        });
    }
    Ok(events)
}

/// Parse `major.minor[.patch]` with an optional `v`/`V` prefix. Anything else
/// (pre-release tags, partial numbers) is unparseable and triggers the
/// timestamp fallback.
pub fn parse_version(s: &str) -> Option<(u64, u64, u64)> {
    let s = s.trim();
    let s = s.strip_prefix(['v', 'V']).unwrap_or(s);
    let mut parts = s.split('.');
    let major: u64 = parts.next()?.parse().ok()?;
    let minor: u64 = parts.next()?.parse().ok()?;
    let patch: u64 = match parts.next() {
        Some(p) => p.parse().ok()?,
        None => 0,
    };
    if parts.next().is_some() {
        return None;
    }
    Some((major, minor, patch))
}

/// Dual sort: when every record carries a parseable semantic version, order
/// by version (numeric compare per component); otherwise fall back to
/// (timestamp, block_number). Both orders are stable, so equal keys keep
/// their input order.
pub fn dual_sort(records: &[VersionRecord]) -> Vec<VersionRecord> {
    let mut out: Vec<VersionRecord> = records.to_vec();
    let versions: Option<Vec<(u64, u64, u64)>> = records
        .iter()
        .map(|r| r.version_string.as_deref().and_then(parse_version))
        .collect();
    match versions {
        Some(_) => {
            out.sort_by_key(|r| {
                r.version_string
                    .as_deref()
                    .and_then(parse_version)
                    .unwrap_or((0, 0, 0))
            });
        }
        None => {
            out.sort_by_key(|r| (r.timestamp, r.block_number));
        }
    }
    out
}

/// Select the analysis pair from an ordered history: by default the
/// penultimate and final versions; `at` picks any adjacent pair by index.
pub fn select_pair(
    ordered: &[VersionRecord],
    at: Option<usize>,
) -> Result<(&VersionRecord, &VersionRecord), TraceError> {
    if ordered.len() < 2 {
        return Err(TraceError::InsufficientHistory { have: ordered.len() });
    }
    let i = at.unwrap_or(ordered.len() - 2);
    if i + 1 >= ordered.len() {
        return Err(TraceError::InsufficientHistory { have: ordered.len() });
    }
    Ok((&ordered[i], &ordered[i + 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(version: Option<&str>, timestamp: u64, block: u64) -> VersionRecord {
        VersionRecord {
            implementation_address: alloc::format!("0x{:040x}", block),
            version_string: version.map(String::from),
            timestamp,
            block_number: block,
            source_text: None,
            ast_document: None,
        }
    }

    fn upgrade_log(impl_addr_tail: &str, block: u64) -> RawLog {
        RawLog {
            address: "0xAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAAA".into(),
            topics: alloc::vec![
                alloc::format!("0x{UPGRADED_TOPIC}"),
                alloc::format!("0x{:0>64}", impl_addr_tail),
            ],
            data: "0x".into(),
            block_number: block,
            timestamp: 1_700_000_000 + block,
            tx_hash: alloc::format!("0x{:064x}", block),
        }
    }

    #[test]
    fn parses_upgraded_events_and_extracts_address() {
        let logs = alloc::vec![upgrade_log("1234", 100), upgrade_log("beef", 200)];
        let events = parse_upgrade_events(&logs, &EventFilter::default()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(
            events[0].implementation_address,
            "0x0000000000000000000000000000000000001234"
        );
        assert_eq!(events[0].proxy_address, "0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa");
        assert_eq!(events[1].block_number, 200);
    }

    #[test]
    fn unrelated_topics_are_filtered_out() {
        let mut log = upgrade_log("1234", 100);
        log.topics[0] = alloc::format!("0x{:064x}", 7);
        let events = parse_upgrade_events(&[log], &EventFilter::default()).unwrap();
        assert!(events.is_empty());
    }

    #[test]
    fn truncated_topic1_is_malformed() {
        let mut log = upgrade_log("1234", 100);
        log.topics[1] = "0x1234".into();
        let err = parse_upgrade_events(&[log], &EventFilter::default()).unwrap_err();
        assert!(matches!(err, TraceError::MalformedLog(_)));

        let mut log2 = upgrade_log("1234", 100);
        log2.topics.truncate(1);
        let err2 = parse_upgrade_events(&[log2], &EventFilter::default()).unwrap_err();
        assert!(matches!(err2, TraceError::MalformedLog(_)));
    }

    #[test]
    fn extra_topics_are_configurable() {
        let custom = "11".repeat(32);
        let mut log = upgrade_log("1234", 100);
        log.topics[0] = alloc::format!("0x{custom}");
        assert!(parse_upgrade_events(&[log.clone()], &EventFilter::default())
            .unwrap()
            .is_empty());
        let filter = EventFilter::with_extra_topics([custom]);
        assert_eq!(parse_upgrade_events(&[log], &filter).unwrap().len(), 1);
    }

    #[test]
    fn semantic_versions_sort_numerically() {
        let records = alloc::vec![
            record(Some("v1.10.0"), 50, 5),
            record(Some("v1.2.0"), 90, 9),
        ];
        let sorted = dual_sort(&records);
        assert_eq!(sorted[0].version_string.as_deref(), Some("v1.2.0"));
        assert_eq!(sorted[1].version_string.as_deref(), Some("v1.10.0"));
    }

    #[test]
    fn one_unparseable_version_forces_timestamp_order() {
        let records = alloc::vec![
            record(Some("v2.0.0"), 300, 3),
            record(None, 100, 1),
            record(Some("v1.0.0"), 200, 2),
        ];
        let sorted = dual_sort(&records);
        let stamps: Vec<u64> = sorted.iter().map(|r| r.timestamp).collect();
        assert_eq!(stamps, [100, 200, 300]);
    }

    #[test]
    fn equal_keys_preserve_input_order() {
        let mut a = record(Some("1.0.0"), 100, 1);
        a.implementation_address = "0xaa".into();
        let mut b = record(Some("1.0"), 100, 1);
        b.implementation_address = "0xbb".into();
        let sorted = dual_sort(&[a, b]);
        assert_eq!(sorted[0].implementation_address, "0xaa");
        assert_eq!(sorted[1].implementation_address, "0xbb");
    }

    #[test]
    fn version_parser_accepts_prefixes_and_rejects_junk() {
        assert_eq!(parse_version("v1.2.3"), Some((1, 2, 3)));
        assert_eq!(parse_version("V2.0"), Some((2, 0, 0)));
        assert_eq!(parse_version("3.4.5"), Some((3, 4, 5)));
        assert_eq!(parse_version("1"), None);
        assert_eq!(parse_version("1.2.3.4"), None);
        assert_eq!(parse_version("1.2-rc1"), None);
        assert_eq!(parse_version("release-5"), None);
    }

    #[test]
    fn select_pair_defaults_to_last_two() {
        let records = alloc::vec![
            record(None, 100, 1),
            record(None, 200, 2),
            record(None, 300, 3),
        ];
        let (v1, v2) = select_pair(&records, None).unwrap();
        assert_eq!(v1.timestamp, 200);
        assert_eq!(v2.timestamp, 300);

        let (a, b) = select_pair(&records, Some(0)).unwrap();
        assert_eq!(a.timestamp, 100);
        assert_eq!(b.timestamp, 200);

        assert!(matches!(
            select_pair(&records[..1], None),
            Err(TraceError::InsufficientHistory { have: 1 })
        ));
        assert!(matches!(
            select_pair(&records, Some(2)),
            Err(TraceError::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn dual_sort_is_permutation_and_idempotent() {
        let records = alloc::vec![
            record(Some("v1.1.0"), 500, 9),
            record(Some("v0.9.0"), 400, 2),
            record(Some("v1.0.1"), 600, 4),
        ];
        let sorted = dual_sort(&records);
        assert_eq!(sorted.len(), records.len());
        for r in &records {
            assert!(sorted.contains(r));
        }
        assert_eq!(dual_sort(&sorted), sorted);
    }
}
