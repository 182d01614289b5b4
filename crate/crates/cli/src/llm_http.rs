//! Chat-completions-style HTTP backend for attribution.
//!
//! Sends the rendered prompt as a single user message and extracts the
//! assistant text. The test suite only uses the deterministic stub backend;
//! this client exists for live runs against a configured endpoint.

use serde_json::{json, Value};

use upgradescan_core::attrib::{AttributionBackend, AttributionRequest, BackendError};

/// Environment variable consulted for the model API key.
pub const LLM_KEY_ENV: &str = "UPGRADESCAN_LLM_API_KEY";

pub struct HttpBackend {
    endpoint: String,
    model: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: impl Into<String>,
    ) -> HttpBackend {
        HttpBackend {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: api_key.into(),
            http: reqwest::blocking::Client::new(),
        }
    }

    pub fn from_env(endpoint: impl Into<String>, model: impl Into<String>) -> HttpBackend {
        let api_key = std::env::var(LLM_KEY_ENV).unwrap_or_default();
        HttpBackend::new(endpoint, model, api_key)
    }
}

impl AttributionBackend for HttpBackend {
    fn complete(&self, request: &AttributionRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt_text}],
            "temperature": 0,
        });
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Http(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::Http(format!("HTTP {status}")));
        }
        let value: Value =
            response.json().map_err(|e| BackendError::Http(e.to_string()))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(String::from)
            .ok_or_else(|| BackendError::Other("response lacks choices[0].message.content".into()))
    }

    fn name(&self) -> &'static str {
        "http"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    use upgradescan_core::ast::{NodeKind, SourceSpan};
    use upgradescan_core::classify::{classify_type, TypeClassification};
    use upgradescan_core::detect::{Finding, Severity, VulnType};
    use upgradescan_core::diff::{ChangeOp, ChangeRecord};
    use upgradescan_core::matching::{DimensionScores, MatchPair, SemanticFeatures};

    fn sample_request() -> AttributionRequest {
        let vuln = VulnType::Reentrancy;
        AttributionRequest::new(
            MatchPair {
                change_id: 0,
                finding_id: 0,
                scores: DimensionScores { s_pos: 1.0, s_pattern: 0.2, s_semantic: 0.7, s_type: 0.8 },
                features: SemanticFeatures::default(),
                confidence: 0.68,
            },
            ChangeRecord {
                change_id: 0,
                op: ChangeOp::Insert,
                line: 7,
                end_line: 7,
                span: SourceSpan::new(7, 0, 7, 20),
                function_name: Some("withdraw".into()),
                node_kind: NodeKind::FunctionCall,
                identifiers: Default::default(),
                snippet: "msg.sender.call{value: v}(\"\")".into(),
            },
            Finding {
                finding_id: 0,
                vuln_type: vuln,
                severity: Severity::High,
                line: 7,
                function_name: Some("withdraw".into()),
                description: "call before state write".into(),
                keywords: vuln.keywords().iter().map(|s| s.to_string()).collect(),
                detector_id: "reentrancy".into(),
            },
            TypeClassification {
                vuln_type: vuln,
                v1_present: false,
                v2_present: true,
                behavior: classify_type(false, true),
                v1_findings: vec![],
                v2_findings: vec![0],
            },
            String::new(),
            String::new(),
        )
    }

    #[test]
    fn posts_prompt_and_extracts_content() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let reply = r#"{"choices":[{"message":{"role":"assistant","content":"{\"ok\":true}"}}]}"#;
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 65536];
            let n = stream.read(&mut buf).unwrap();
            let request = String::from_utf8_lossy(&buf[..n]).to_string();
            let payload = format!(
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(payload.as_bytes()).unwrap();
            request
        });
        let backend = HttpBackend::new(format!("http://{addr}/v1/chat/completions"), "m", "k");
        let content = backend.complete(&sample_request()).unwrap();
        assert_eq!(content, "{\"ok\":true}");
        let seen = handle.join().unwrap();
        assert!(seen.contains("Root cause analysis"));
        assert!(seen.contains("\"model\":\"m\""));
    }
}
