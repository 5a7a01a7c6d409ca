//! Provider interfaces: chat LLM, embeddings, text/image search, page fetch.
//!
//! Every call returns its payload together with a [`CallMeta`] so the caller
//! can bill cost and latency to exactly one pipeline stage. Implementations:
//! [`http`] for live HTTP+JSON endpoints, [`replay`] for cassette-backed
//! offline runs, [`fake`] for scripted in-process doubles.

pub mod cassette;
pub mod fake;
pub mod http;
pub mod replay;

use std::sync::Arc;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::ledger::CallMeta;

/// Chat message role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One segment of a chat message: plain text or an image reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessagePart {
    #[serde(rename = "text")]
    Text(String),
    #[serde(rename = "image")]
    Image(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<MessagePart>,
}

impl ChatMessage {
    pub fn text(role: Role, text: impl Into<String>) -> Self {
        ChatMessage {
            role,
            parts: vec![MessagePart::Text(text.into())],
        }
    }

    /// Concatenated text segments, ignoring image parts.
    pub fn joined_text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                MessagePart::Text(t) => Some(t.as_str()),
                MessagePart::Image(_) => None,
            })
            .collect::<Vec<_>>()
            .join("")
    }
}

/// Input to one chat completion call. Temperature is zero everywhere in the
/// pipeline; the field exists so deployments can loosen it deliberately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(messages: Vec<ChatMessage>) -> Self {
        ChatRequest {
            messages,
            temperature: 0.0,
        }
    }
}

/// Which search channel produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    TextSearch,
    ImageSearch,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Channel::TextSearch => write!(f, "text_search"),
            Channel::ImageSearch => write!(f, "image_search"),
        }
    }
}

/// One search hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchResult {
    pub url: Url,
    pub title: String,
    pub snippet: String,
    pub channel: Channel,
}

/// Fixed-length embedding. Dimensions must agree within one provider session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A fetched page before any stripping: raw bytes plus the declared type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub url: Url,
    pub content_type: String,
    pub body: Vec<u8>,
}

#[async_trait]
pub trait ChatProvider: Send + Sync {
    /// Full text response for one completion request.
    async fn chat(&self, req: &ChatRequest) -> Result<(String, CallMeta)>;
}

#[async_trait]
pub trait EmbeddingProvider: Send + Sync {
    /// One vector per input text; all vectors of equal dimension.
    async fn embed(&self, texts: &[String]) -> Result<(Vec<EmbeddingVector>, CallMeta)>;
}

#[async_trait]
pub trait TextSearchProvider: Send + Sync {
    async fn search_text(&self, query: &str, limit: usize)
        -> Result<(Vec<SearchResult>, CallMeta)>;
}

#[async_trait]
pub trait ImageSearchProvider: Send + Sync {
    async fn search_image(
        &self,
        image: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)>;
}

#[async_trait]
pub trait PageFetcher: Send + Sync {
    async fn fetch_page(&self, url: &Url) -> Result<(RawDocument, CallMeta)>;
}

/// The five providers a pipeline run needs, shareable across tasks.
#[derive(Clone)]
pub struct ProviderSet {
    pub chat: Arc<dyn ChatProvider>,
    pub embed: Arc<dyn EmbeddingProvider>,
    pub text_search: Arc<dyn TextSearchProvider>,
    pub image_search: Arc<dyn ImageSearchProvider>,
    pub fetcher: Arc<dyn PageFetcher>,
}

pub(crate) fn ensure_chat_pre(req: &ChatRequest) -> Result<()> {
    if req.messages.is_empty() {
        return Err(Error::InvalidConfig("chat request with no messages".into()));
    }
    Ok(())
}

pub(crate) fn ensure_embed_pre(texts: &[String]) -> Result<()> {
    if texts.is_empty() {
        return Err(Error::InvalidConfig("embed request with no inputs".into()));
    }
    if texts.iter().any(|t| t.is_empty()) {
        return Err(Error::InvalidConfig("embed inputs must be nonempty".into()));
    }
    Ok(())
}

pub(crate) fn ensure_search_pre(input: &str, limit: usize) -> Result<()> {
    if input.is_empty() {
        return Err(Error::InvalidConfig("search input must be nonempty".into()));
    }
    if limit == 0 {
        return Err(Error::InvalidConfig("search limit must be >= 1".into()));
    }
    Ok(())
}

pub(crate) fn ensure_fetch_pre(url: &Url) -> Result<()> {
    match url.scheme() {
        "http" | "https" => Ok(()),
        other => Err(Error::InvalidConfig(format!(
            "fetch_page needs an http(s) URL, got scheme {other:?}"
        ))),
    }
}

/// Force the channel tag, drop duplicate URLs (first wins), cap at `limit`.
pub(crate) fn normalize_results(
    results: Vec<SearchResult>,
    channel: Channel,
    limit: usize,
) -> Vec<SearchResult> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for mut r in results {
        if !seen.insert(r.url.as_str().to_string()) {
            continue;
        }
        r.channel = channel;
        out.push(r);
        if out.len() == limit {
            break;
        }
    }
    out
}

/// Check all embed vectors share one positive dimension.
pub(crate) fn ensure_embed_post(vectors: &[EmbeddingVector], expected: usize) -> Result<()> {
    if vectors.len() != expected {
        return Err(Error::MalformedResponse {
            provider: "embed".into(),
            reason: format!("expected {expected} vectors, got {}", vectors.len()),
        });
    }
    let dim = vectors.first().map(|v| v.dim()).unwrap_or(0);
    if dim == 0 || vectors.iter().any(|v| v.dim() != dim) {
        return Err(Error::MalformedResponse {
            provider: "embed".into(),
            reason: "vectors empty or of unequal dimension".into(),
        });
    }
    Ok(())
}
