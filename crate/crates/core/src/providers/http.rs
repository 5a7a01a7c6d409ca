//! Live HTTP+JSON provider clients.
//!
//! Wire shapes: chat `{messages, temperature}` → `{text, usage}`; embed
//! `{inputs}` → `{vectors, usage}`; search `{query|image, limit}` →
//! `{results, usage}`. `usage.cost` (decimal string or number, USD) is
//! optional and defaults to zero. Page fetch is a plain GET.

use std::time::{Duration, Instant};

use serde_json::Value;
use url::Url;

use crate::error::{Error, Result};
use crate::ledger::{CallMeta, UsdMicros};
use crate::providers::cassette;
use crate::providers::{
    ensure_chat_pre, ensure_embed_post, ensure_embed_pre, ensure_fetch_pre, ensure_search_pre,
    normalize_results, Channel, ChatProvider, ChatRequest, EmbeddingProvider, EmbeddingVector,
    ImageSearchProvider, PageFetcher, RawDocument, SearchResult, TextSearchProvider,
};

use async_trait::async_trait;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_MAX_ATTEMPTS: u32 = 3;
pub const DEFAULT_INITIAL_BACKOFF: Duration = Duration::from_millis(500);
pub const DEFAULT_MAX_BODY_BYTES: usize = 2 * 1024 * 1024;

/// Connection settings for one provider endpoint.
#[derive(Debug, Clone)]
pub struct HttpProviderConfig {
    pub url: String,
    /// Bearer token; sent as `Authorization: Bearer <key>` when present.
    pub api_key: Option<String>,
    pub timeout: Duration,
    /// Total attempts including the first (not extra retries).
    pub max_attempts: u32,
    /// First retry delay; doubles per subsequent retry.
    pub initial_backoff: Duration,
}

impl HttpProviderConfig {
    pub fn new(url: impl Into<String>) -> Self {
        HttpProviderConfig {
            url: url.into(),
            api_key: None,
            timeout: DEFAULT_TIMEOUT,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            initial_backoff: DEFAULT_INITIAL_BACKOFF,
        }
    }

    /// Read `<PREFIX>_URL` and `<PREFIX>_KEY` (e.g. `ALETHEIA_CHAT_URL`).
    pub fn from_env(prefix: &str) -> Option<Self> {
        let url = std::env::var(format!("{prefix}_URL")).ok()?;
        let mut cfg = HttpProviderConfig::new(url);
        cfg.api_key = std::env::var(format!("{prefix}_KEY")).ok();
        Some(cfg)
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retry(mut self, max_attempts: u32, initial_backoff: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.initial_backoff = initial_backoff;
        self
    }

    fn client(&self) -> Result<reqwest::Client> {
        reqwest::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("http client: {e}")))
    }
}

fn retryable_status(status: reqwest::StatusCode) -> bool {
    status.is_server_error() || status == reqwest::StatusCode::TOO_MANY_REQUESTS
}

/// POST a JSON body with bounded retries. Cost is taken from the final
/// successful response only, so failed attempts never accrue spend.
async fn post_json(
    client: &reqwest::Client,
    cfg: &HttpProviderConfig,
    provider: &str,
    body: &Value,
) -> Result<(Value, CallMeta)> {
    let start = Instant::now();
    let mut backoff = cfg.initial_backoff;
    let mut last_err = String::new();
    for attempt in 1..=cfg.max_attempts {
        if attempt > 1 {
            tokio::time::sleep(backoff).await;
            backoff *= 2;
        }
        let mut req = client.post(&cfg.url).json(body);
        if let Some(key) = &cfg.api_key {
            req = req.bearer_auth(key);
        }
        match req.send().await {
            Ok(resp) => {
                let status = resp.status();
                if status.is_success() {
                    let payload: Value =
                        resp.json().await.map_err(|e| Error::MalformedResponse {
                            provider: provider.into(),
                            reason: format!("response is not JSON: {e}"),
                        })?;
                    let cost = parse_usage_cost(provider, &payload)?;
                    let meta = CallMeta {
                        cost,
                        latency: start.elapsed(),
                    };
                    return Ok((payload, meta));
                }
                last_err = format!("status {status}");
                if !retryable_status(status) {
                    break;
                }
            }
            Err(e) => {
                last_err = e.to_string();
            }
        }
    }
    Err(Error::ProviderUnavailable {
        provider: provider.into(),
        reason: format!("{last_err} after {} attempt(s)", cfg.max_attempts),
    })
}

fn parse_usage_cost(provider: &str, payload: &Value) -> Result<UsdMicros> {
    match payload.get("usage").and_then(|u| u.get("cost")) {
        None => Ok(UsdMicros::ZERO),
        Some(v) => {
            serde_json::from_value(v.clone()).map_err(|e| Error::MalformedResponse {
                provider: provider.into(),
                reason: format!("usage.cost does not parse: {e}"),
            })
        }
    }
}

fn field<'a>(provider: &str, payload: &'a Value, name: &str) -> Result<&'a Value> {
    payload.get(name).ok_or_else(|| Error::MalformedResponse {
        provider: provider.into(),
        reason: format!("response missing {name:?}"),
    })
}

fn parse_results(provider: &str, payload: &Value, channel: Channel) -> Result<Vec<SearchResult>> {
    let raw = field(provider, payload, "results")?
        .as_array()
        .ok_or_else(|| Error::MalformedResponse {
            provider: provider.into(),
            reason: "results is not an array".into(),
        })?;
    let mut out = Vec::with_capacity(raw.len());
    for item in raw {
        let url_str = item.get("url").and_then(Value::as_str).unwrap_or("");
        let url = match Url::parse(url_str) {
            Ok(u) if matches!(u.scheme(), "http" | "https") => u,
            _ => {
                tracing::warn!(provider, url = url_str, "skipping result with bad URL");
                continue;
            }
        };
        out.push(SearchResult {
            url,
            title: item
                .get("title")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            snippet: item
                .get("snippet")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
            channel,
        });
    }
    Ok(out)
}

pub struct HttpChat {
    cfg: HttpProviderConfig,
    client: reqwest::Client,
}

impl HttpChat {
    pub fn new(cfg: HttpProviderConfig) -> Result<Self> {
        let client = cfg.client()?;
        Ok(HttpChat { cfg, client })
    }
}

#[async_trait]
impl ChatProvider for HttpChat {
    async fn chat(&self, req: &ChatRequest) -> Result<(String, CallMeta)> {
        ensure_chat_pre(req)?;
        let body = cassette::chat_request_value(req);
        let (payload, meta) = post_json(&self.client, &self.cfg, "chat", &body).await?;
        let text = field("chat", &payload, "text")?
            .as_str()
            .ok_or_else(|| Error::MalformedResponse {
                provider: "chat".into(),
                reason: "text is not a string".into(),
            })?
            .to_string();
        Ok((text, meta))
    }
}

pub struct HttpEmbed {
    cfg: HttpProviderConfig,
    client: reqwest::Client,
}

impl HttpEmbed {
    pub fn new(cfg: HttpProviderConfig) -> Result<Self> {
        let client = cfg.client()?;
        Ok(HttpEmbed { cfg, client })
    }
}

#[async_trait]
impl EmbeddingProvider for HttpEmbed {
    async fn embed(&self, texts: &[String]) -> Result<(Vec<EmbeddingVector>, CallMeta)> {
        ensure_embed_pre(texts)?;
        let body = cassette::embed_request_value(texts);
        let (payload, meta) = post_json(&self.client, &self.cfg, "embed", &body).await?;
        let vectors: Vec<Vec<f64>> = serde_json::from_value(field("embed", &payload, "vectors")?.clone())
            .map_err(|e| Error::MalformedResponse {
                provider: "embed".into(),
                reason: format!("vectors do not parse: {e}"),
            })?;
        let vectors: Vec<EmbeddingVector> = vectors
            .into_iter()
            .map(|values| EmbeddingVector { values })
            .collect();
        ensure_embed_post(&vectors, texts.len())?;
        Ok((vectors, meta))
    }
}

pub struct HttpTextSearch {
    cfg: HttpProviderConfig,
    client: reqwest::Client,
}

impl HttpTextSearch {
    pub fn new(cfg: HttpProviderConfig) -> Result<Self> {
        let client = cfg.client()?;
        Ok(HttpTextSearch { cfg, client })
    }
}

#[async_trait]
impl TextSearchProvider for HttpTextSearch {
    async fn search_text(
        &self,
        query: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        ensure_search_pre(query, limit)?;
        let body = cassette::text_search_request_value(query, limit);
        let (payload, meta) = post_json(&self.client, &self.cfg, "text_search", &body).await?;
        let results = parse_results("text_search", &payload, Channel::TextSearch)?;
        Ok((normalize_results(results, Channel::TextSearch, limit), meta))
    }
}

pub struct HttpImageSearch {
    cfg: HttpProviderConfig,
    client: reqwest::Client,
}

impl HttpImageSearch {
    pub fn new(cfg: HttpProviderConfig) -> Result<Self> {
        let client = cfg.client()?;
        Ok(HttpImageSearch { cfg, client })
    }
}

#[async_trait]
impl ImageSearchProvider for HttpImageSearch {
    async fn search_image(
        &self,
        image: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        ensure_search_pre(image, limit)?;
        let body = cassette::image_search_request_value(image, limit);
        let (payload, meta) = post_json(&self.client, &self.cfg, "image_search", &body).await?;
        let results = parse_results("image_search", &payload, Channel::ImageSearch)?;
        Ok((normalize_results(results, Channel::ImageSearch, limit), meta))
    }
}

/// Plain HTTP page fetcher with a body-size ceiling.
pub struct HttpFetcher {
    client: reqwest::Client,
    max_attempts: u32,
    initial_backoff: Duration,
    max_body_bytes: usize,
}

impl HttpFetcher {
    pub fn new(timeout: Duration, max_body_bytes: usize) -> Result<Self> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("http client: {e}")))?;
        Ok(HttpFetcher {
            client,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            initial_backoff: DEFAULT_INITIAL_BACKOFF,
            max_body_bytes,
        })
    }

    pub fn with_retry(mut self, max_attempts: u32, initial_backoff: Duration) -> Self {
        self.max_attempts = max_attempts.max(1);
        self.initial_backoff = initial_backoff;
        self
    }
}

#[async_trait]
impl PageFetcher for HttpFetcher {
    async fn fetch_page(&self, url: &Url) -> Result<(RawDocument, CallMeta)> {
        ensure_fetch_pre(url)?;
        let start = Instant::now();
        let mut backoff = self.initial_backoff;
        let mut last_err = String::new();
        for attempt in 1..=self.max_attempts {
            if attempt > 1 {
                tokio::time::sleep(backoff).await;
                backoff *= 2;
            }
            match self.client.get(url.clone()).send().await {
                Ok(resp) => {
                    let status = resp.status();
                    if !status.is_success() {
                        last_err = format!("status {status}");
                        if retryable_status(status) {
                            continue;
                        }
                        break;
                    }
                    if let Some(len) = resp.content_length() {
                        if len as usize > self.max_body_bytes {
                            return Err(Error::OversizeBody {
                                url: url.to_string(),
                                limit: self.max_body_bytes,
                            });
                        }
                    }
                    let content_type = resp
                        .headers()
                        .get(reqwest::header::CONTENT_TYPE)
                        .and_then(|v| v.to_str().ok())
                        .unwrap_or("application/octet-stream")
                        .to_string();
                    let body = resp.bytes().await.map_err(|e| Error::FetchFailed {
                        url: url.to_string(),
                        reason: format!("body read: {e}"),
                    })?;
                    if body.len() > self.max_body_bytes {
                        return Err(Error::OversizeBody {
                            url: url.to_string(),
                            limit: self.max_body_bytes,
                        });
                    }
                    let doc = RawDocument {
                        url: url.clone(),
                        content_type,
                        body: body.to_vec(),
                    };
                    let meta = CallMeta {
                        cost: UsdMicros::ZERO,
                        latency: start.elapsed(),
                    };
                    return Ok((doc, meta));
                }
                Err(e) => {
                    last_err = e.to_string();
                }
            }
        }
        Err(Error::FetchFailed {
            url: url.to_string(),
            reason: format!("{last_err} after {} attempt(s)", self.max_attempts),
        })
    }
}
