//! Recorded provider traffic: a JSON map from request fingerprints to
//! responses, latencies, and costs, for deterministic offline replay.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use url::Url;

use crate::error::{Error, Result};
use crate::ledger::UsdMicros;
use crate::providers::{ChatRequest, SearchResult};

pub const CASSETTE_VERSION: u32 = 1;

/// One recorded call: either a response payload or a recorded error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CassetteRecord {
    pub provider: String,
    /// The canonical request, kept for human inspection of fixtures.
    pub request: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RecordedError>,
    pub latency_ms: u64,
    pub cost: UsdMicros,
}

/// Serializable form of the errors a provider can legitimately produce.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordedError {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl RecordedError {
    /// Capture an error for the cassette. Returns None for error kinds that
    /// are caller bugs rather than provider outcomes (bad config, IO).
    pub fn from_error(err: &Error) -> Option<RecordedError> {
        let rec = |kind: &str, message: String| RecordedError {
            kind: kind.into(),
            message,
            detail: None,
        };
        match err {
            Error::ProviderUnavailable { reason, .. } => {
                Some(rec("provider_unavailable", reason.clone()))
            }
            Error::MalformedResponse { reason, .. } => {
                Some(rec("malformed_response", reason.clone()))
            }
            Error::FetchFailed { reason, .. } => Some(rec("fetch_failed", reason.clone())),
            Error::OversizeBody { limit, .. } => Some(RecordedError {
                kind: "oversize_body".into(),
                message: format!("body exceeds {limit} bytes"),
                detail: Some(serde_json::json!({ "limit": limit })),
            }),
            _ => None,
        }
    }

    /// Reconstruct the error on replay. `url` is the fetch target when the
    /// recorded call was a page fetch.
    pub fn into_error(&self, provider: &str, url: Option<&Url>) -> Error {
        let url_str = url.map(|u| u.to_string()).unwrap_or_default();
        match self.kind.as_str() {
            "fetch_failed" => Error::FetchFailed {
                url: url_str,
                reason: self.message.clone(),
            },
            "oversize_body" => Error::OversizeBody {
                url: url_str,
                limit: self
                    .detail
                    .as_ref()
                    .and_then(|d| d.get("limit"))
                    .and_then(Value::as_u64)
                    .unwrap_or(0) as usize,
            },
            "malformed_response" => Error::MalformedResponse {
                provider: provider.into(),
                reason: self.message.clone(),
            },
            _ => Error::ProviderUnavailable {
                provider: provider.into(),
                reason: self.message.clone(),
            },
        }
    }
}

/// The on-disk store. Entries are keyed by fingerprint and kept sorted so
/// committed fixtures diff cleanly.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct Cassette {
    pub version: u32,
    pub entries: BTreeMap<String, CassetteRecord>,
}

impl Cassette {
    pub fn new() -> Self {
        Cassette {
            version: CASSETTE_VERSION,
            entries: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let cassette: Cassette = serde_json::from_str(&raw)?;
        if cassette.version != CASSETTE_VERSION {
            return Err(Error::InvalidConfig(format!(
                "cassette {} has version {}, expected {CASSETTE_VERSION}",
                path.display(),
                cassette.version
            )));
        }
        Ok(cassette)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut out = serde_json::to_string_pretty(self)?;
        out.push('\n');
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn get(&self, fingerprint: &str) -> Option<&CassetteRecord> {
        self.entries.get(fingerprint)
    }

    pub fn insert(&mut self, fingerprint: String, record: CassetteRecord) {
        self.entries.insert(fingerprint, record);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Stable hash of provider name + canonicalized request body. Object keys
/// are sorted and keys starting with `_` (volatile, debug-only) are dropped,
/// so semantically equal requests always collide.
pub fn fingerprint(provider: &str, request: &Value) -> String {
    let mut canonical = String::new();
    write_canonical(request, &mut canonical);
    let mut hasher = Sha256::new();
    hasher.update(provider.as_bytes());
    hasher.update(b"\n");
    hasher.update(canonical.as_bytes());
    hex::encode(hasher.finalize())
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            out.push('{');
            let mut keys: Vec<&String> = map.keys().filter(|k| !k.starts_with('_')).collect();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(k).expect("string serializes"));
                out.push(':');
                write_canonical(&map[*k], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        leaf => out.push_str(&serde_json::to_string(leaf).expect("scalar serializes")),
    }
}

// Canonical request bodies, shared by the recorder and the replay client so
// fingerprints always line up.

pub fn chat_request_value(req: &ChatRequest) -> Value {
    serde_json::to_value(req).expect("chat request serializes")
}

pub fn embed_request_value(texts: &[String]) -> Value {
    serde_json::json!({ "inputs": texts })
}

pub fn text_search_request_value(query: &str, limit: usize) -> Value {
    serde_json::json!({ "query": query, "limit": limit })
}

pub fn image_search_request_value(image: &str, limit: usize) -> Value {
    serde_json::json!({ "image": image, "limit": limit })
}

pub fn fetch_request_value(url: &Url) -> Value {
    serde_json::json!({ "url": url.as_str() })
}

// Response payload shapes.

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatPayload {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedPayload {
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SearchPayload {
    pub results: Vec<SearchResult>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FetchPayload {
    pub content_type: String,
    pub body_b64: String,
}
