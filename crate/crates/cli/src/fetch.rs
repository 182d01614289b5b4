//! Contract source acquisition: offline fixture directories and an
//! Etherscan-compatible HTTP client with retry/backoff.
//!
//! Offline layout, one directory per proxy:
//!
//! ```text
//! fixtures/<proxy>/history.json        upgrade event logs
//! fixtures/<proxy>/<impl>.sol          verified source
//! fixtures/<proxy>/<impl>.ast.json     optional compiler AST document
//! fixtures/<proxy>/<impl>.meta.json    optional {contract_name, version}
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use upgradescan_core::trace::{normalize_address, RawLog};

/// Environment variable consulted for the explorer API key.
pub const API_KEY_ENV: &str = "ETHERSCAN_API_KEY";

#[derive(Debug, Error)]
pub enum FetchError {
    #[error("contract source not verified for {0}")]
    NotVerified(String),
    #[error("network error after retries: {0}")]
    Network(String),
    #[error("malformed explorer response: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct FetchedContract {
    pub source_text: String,
    pub ast_document: Option<Value>,
    pub contract_name: Option<String>,
    pub version: Option<String>,
}

pub enum SourceProvider {
    Offline(OfflineFixtures),
    Online(ExplorerClient),
}

impl SourceProvider {
    pub fn fetch_contract(&self, address: &str) -> Result<FetchedContract, FetchError> {
        match self {
            SourceProvider::Offline(fixtures) => fixtures.fetch(address),
            SourceProvider::Online(client) => client.fetch(address),
        }
    }

    /// Load the proxy's upgrade event history. Only fixture providers carry
    /// one; the online path would come from an RPC log query, which is out of
    /// scope here.
    pub fn load_history(&self) -> Result<Vec<RawLog>, FetchError> {
        match self {
            SourceProvider::Offline(fixtures) => fixtures.load_history(),
            SourceProvider::Online(_) => Err(FetchError::Malformed(
                "event history requires a fixture directory (see --fixtures)".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// offline fixtures
// ---------------------------------------------------------------------------

pub struct OfflineFixtures {
    dir: PathBuf,
}

#[derive(Debug, Deserialize)]
struct MetaFile {
    #[serde(default)]
    contract_name: Option<String>,
    #[serde(default)]
    version: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum HistoryFile {
    Wrapped { events: Vec<RawLog> },
    Bare(Vec<RawLog>),
}

impl OfflineFixtures {
    pub fn new(dir: impl Into<PathBuf>) -> OfflineFixtures {
        OfflineFixtures { dir: dir.into() }
    }

    pub fn load_history(&self) -> Result<Vec<RawLog>, FetchError> {
        let path = self.dir.join("history.json");
        let text = fs::read_to_string(&path)?;
        let parsed: HistoryFile = serde_json::from_str(&text)
            .map_err(|e| FetchError::Malformed(format!("{}: {e}", path.display())))?;
        Ok(match parsed {
            HistoryFile::Wrapped { events } => events,
            HistoryFile::Bare(events) => events,
        })
    }

    fn fetch(&self, address: &str) -> Result<FetchedContract, FetchError> {
        let key = normalize_address(address);
        let source_path = self.dir.join(format!("{key}.sol"));
        if !source_path.exists() {
            return Err(FetchError::NotVerified(key));
        }
        let source_text = fs::read_to_string(&source_path)?;
        let ast_document = read_optional_json(&self.dir.join(format!("{key}.ast.json")))?;
        let meta: Option<MetaFile> = read_optional_json(&self.dir.join(format!("{key}.meta.json")))?
            .map(|v| {
                serde_json::from_value(v)
                    .map_err(|e| FetchError::Malformed(format!("meta for {key}: {e}")))
            })
            .transpose()?;
        let (contract_name, version) = match meta {
            Some(m) => (m.contract_name, m.version),
            None => (None, None),
        };
        Ok(FetchedContract { source_text, ast_document, contract_name, version })
    }
}

fn read_optional_json(path: &Path) -> Result<Option<Value>, FetchError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path)?;
    let value = serde_json::from_str(&text)
        .map_err(|e| FetchError::Malformed(format!("{}: {e}", path.display())))?;
    Ok(Some(value))
}

// ---------------------------------------------------------------------------
// online explorer client
// ---------------------------------------------------------------------------

pub struct ExplorerClient {
    base_url: String,
    api_key: String,
    max_retries: u32,
    base_delay: Duration,
    http: reqwest::blocking::Client,
}

impl ExplorerClient {
    pub fn new(base_url: impl Into<String>, api_key: impl Into<String>) -> ExplorerClient {
        ExplorerClient {
            base_url: base_url.into(),
            api_key: api_key.into(),
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            http: reqwest::blocking::Client::new(),
        }
    }

    /// Shrink the backoff delay; test servers don't rate limit.
    pub fn with_base_delay(mut self, delay: Duration) -> ExplorerClient {
        self.base_delay = delay;
        self
    }

    pub fn with_max_retries(mut self, retries: u32) -> ExplorerClient {
        self.max_retries = retries;
        self
    }

    fn fetch(&self, address: &str) -> Result<FetchedContract, FetchError> {
        let address = normalize_address(address);
        let url = format!(
            "{}?module=contract&action=getsourcecode&address={}&apikey={}",
            self.base_url, address, self.api_key
        );
        let body = self.get_with_backoff(&url)?;
        let envelope: Value = serde_json::from_str(&body)
            .map_err(|e| FetchError::Malformed(format!("explorer envelope: {e}")))?;
        let result = envelope
            .get("result")
            .and_then(Value::as_array)
            .and_then(|items| items.first())
            .ok_or_else(|| FetchError::Malformed("missing result array".into()))?;
        let source = result.get("SourceCode").and_then(Value::as_str).unwrap_or("");
        if source.trim().is_empty() {
            return Err(FetchError::NotVerified(address));
        }
        let contract_name = result
            .get("ContractName")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .map(String::from);
        let version =
            result.get("Version").and_then(Value::as_str).filter(|s| !s.is_empty()).map(String::from);
        Ok(FetchedContract {
            source_text: source.to_string(),
            ast_document: None,
            contract_name,
            version,
        })
    }

    /// GET with exponential backoff: the initial request plus `max_retries`
    /// retries on 429/5xx/transport errors.
    fn get_with_backoff(&self, url: &str) -> Result<String, FetchError> {
        let mut last_error = String::new();
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                std::thread::sleep(self.base_delay * 2u32.pow(attempt - 1));
            }
            match self.http.get(url).send() {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        return response
                            .text()
                            .map_err(|e| FetchError::Network(e.to_string()));
                    }
                    if status.as_u16() == 429 || status.is_server_error() {
                        last_error = format!("HTTP {status}");
                        continue;
                    }
                    return Err(FetchError::Network(format!("HTTP {status}")));
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(FetchError::Network(last_error))
    }
}
