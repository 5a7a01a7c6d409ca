//! Cassette-backed provider doubles: strict replay and a recording wrapper.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use async_trait::async_trait;
use base64::Engine;
use serde_json::Value;
use url::Url;

use crate::error::{Error, Result};
use crate::ledger::{CallMeta, UsdMicros};
use crate::providers::cassette::{
    self, Cassette, CassetteRecord, ChatPayload, EmbedPayload, FetchPayload, RecordedError,
    SearchPayload,
};
use crate::providers::{
    ensure_chat_pre, ensure_embed_post, ensure_embed_pre, ensure_fetch_pre, ensure_search_pre,
    normalize_results, Channel, ChatProvider, ChatRequest, EmbeddingProvider, EmbeddingVector,
    ImageSearchProvider, PageFetcher, ProviderSet, RawDocument, SearchResult, TextSearchProvider,
};

fn b64() -> base64::engine::GeneralPurpose {
    base64::engine::general_purpose::STANDARD
}

/// Serves recorded responses only; any unrecorded request is
/// [`Error::ProviderUnavailable`].
pub struct ReplayProviders {
    cassette: Arc<Cassette>,
}

impl ReplayProviders {
    pub fn new(cassette: Cassette) -> Self {
        ReplayProviders {
            cassette: Arc::new(cassette),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(ReplayProviders::new(Cassette::load(path)?))
    }

    /// A [`ProviderSet`] in which all five providers replay this cassette.
    pub fn provider_set(self) -> ProviderSet {
        let hub = Arc::new(self);
        ProviderSet {
            chat: hub.clone(),
            embed: hub.clone(),
            text_search: hub.clone(),
            image_search: hub.clone(),
            fetcher: hub,
        }
    }

    fn lookup(
        &self,
        provider: &str,
        request: &Value,
        url: Option<&Url>,
    ) -> Result<(&CassetteRecord, CallMeta)> {
        let fp = cassette::fingerprint(provider, request);
        let rec = self.cassette.get(&fp).ok_or_else(|| {
            let summary = summarize_request(request);
            Error::ProviderUnavailable {
                provider: provider.to_string(),
                reason: format!("no recorded entry for {summary} (fingerprint {fp})"),
            }
        })?;
        if let Some(err) = &rec.error {
            return Err(err.into_error(provider, url));
        }
        let meta = CallMeta {
            cost: rec.cost,
            latency: Duration::from_millis(rec.latency_ms),
        };
        Ok((rec, meta))
    }
}

/// One short line about a request for replay-miss diagnostics.
fn summarize_request(request: &Value) -> String {
    for key in ["query", "image", "url"] {
        if let Some(v) = request.get(key).and_then(Value::as_str) {
            return format!("{key} {v:?}");
        }
    }
    if let Some(msgs) = request.get("messages").and_then(Value::as_array) {
        return format!("chat with {} messages", msgs.len());
    }
    if let Some(inputs) = request.get("inputs").and_then(Value::as_array) {
        return format!("embed with {} inputs", inputs.len());
    }
    "request".into()
}

fn decode<T: serde::de::DeserializeOwned>(provider: &str, rec: &CassetteRecord) -> Result<T> {
    let payload = rec.response.clone().ok_or_else(|| Error::MalformedResponse {
        provider: provider.into(),
        reason: "record has neither response nor error".into(),
    })?;
    serde_json::from_value(payload).map_err(|e| Error::MalformedResponse {
        provider: provider.into(),
        reason: format!("recorded payload does not parse: {e}"),
    })
}

#[async_trait]
impl ChatProvider for ReplayProviders {
    async fn chat(&self, req: &ChatRequest) -> Result<(String, CallMeta)> {
        ensure_chat_pre(req)?;
        let request = cassette::chat_request_value(req);
        let (rec, meta) = self.lookup("chat", &request, None)?;
        let payload: ChatPayload = decode("chat", rec)?;
        Ok((payload.text, meta))
    }
}

#[async_trait]
impl EmbeddingProvider for ReplayProviders {
    async fn embed(&self, texts: &[String]) -> Result<(Vec<EmbeddingVector>, CallMeta)> {
        ensure_embed_pre(texts)?;
        let request = cassette::embed_request_value(texts);
        let (rec, meta) = self.lookup("embed", &request, None)?;
        let payload: EmbedPayload = decode("embed", rec)?;
        let vectors: Vec<EmbeddingVector> = payload
            .vectors
            .into_iter()
            .map(|values| EmbeddingVector { values })
            .collect();
        ensure_embed_post(&vectors, texts.len())?;
        Ok((vectors, meta))
    }
}

#[async_trait]
impl TextSearchProvider for ReplayProviders {
    async fn search_text(
        &self,
        query: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        ensure_search_pre(query, limit)?;
        let request = cassette::text_search_request_value(query, limit);
        let (rec, meta) = self.lookup("text_search", &request, None)?;
        let payload: SearchPayload = decode("text_search", rec)?;
        Ok((
            normalize_results(payload.results, Channel::TextSearch, limit),
            meta,
        ))
    }
}

#[async_trait]
impl ImageSearchProvider for ReplayProviders {
    async fn search_image(
        &self,
        image: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        ensure_search_pre(image, limit)?;
        let request = cassette::image_search_request_value(image, limit);
        let (rec, meta) = self.lookup("image_search", &request, None)?;
        let payload: SearchPayload = decode("image_search", rec)?;
        Ok((
            normalize_results(payload.results, Channel::ImageSearch, limit),
            meta,
        ))
    }
}

#[async_trait]
impl PageFetcher for ReplayProviders {
    async fn fetch_page(&self, url: &Url) -> Result<(RawDocument, CallMeta)> {
        ensure_fetch_pre(url)?;
        let request = cassette::fetch_request_value(url);
        let (rec, meta) = self.lookup("fetch", &request, Some(url))?;
        let payload: FetchPayload = decode("fetch", rec)?;
        let body = b64()
            .decode(payload.body_b64.as_bytes())
            .map_err(|e| Error::MalformedResponse {
                provider: "fetch".into(),
                reason: format!("recorded body is not base64: {e}"),
            })?;
        Ok((
            RawDocument {
                url: url.clone(),
                content_type: payload.content_type,
                body,
            },
            meta,
        ))
    }
}

/// Wraps a live (or fake) provider set and writes every call into a cassette.
/// Concurrent calls append under a lock; reads never block replay since the
/// recorder owns its cassette until [`Recorder::save`].
pub struct Recorder {
    inner: ProviderSet,
    cassette: Mutex<Cassette>,
    path: Option<PathBuf>,
}

impl Recorder {
    pub fn new(inner: ProviderSet) -> Arc<Self> {
        Arc::new(Recorder {
            inner,
            cassette: Mutex::new(Cassette::new()),
            path: None,
        })
    }

    /// Recorder that will save to `path` (call [`Recorder::save`] when done).
    pub fn with_path(inner: ProviderSet, path: PathBuf) -> Arc<Self> {
        Arc::new(Recorder {
            inner,
            cassette: Mutex::new(Cassette::new()),
            path: Some(path),
        })
    }

    pub fn provider_set(self: &Arc<Self>) -> ProviderSet {
        ProviderSet {
            chat: self.clone(),
            embed: self.clone(),
            text_search: self.clone(),
            image_search: self.clone(),
            fetcher: self.clone(),
        }
    }

    pub fn save(&self) -> Result<()> {
        let path = self.path.as_ref().ok_or_else(|| {
            Error::InvalidConfig("recorder was built without an output path".into())
        })?;
        self.save_to(path)
    }

    pub fn save_to(&self, path: &Path) -> Result<()> {
        self.cassette.lock().expect("cassette poisoned").save(path)
    }

    fn record_ok(
        &self,
        provider: &str,
        request: Value,
        response: Value,
        meta: CallMeta,
    ) {
        let fp = cassette::fingerprint(provider, &request);
        self.cassette.lock().expect("cassette poisoned").insert(
            fp,
            CassetteRecord {
                provider: provider.into(),
                request,
                response: Some(response),
                error: None,
                latency_ms: meta.latency.as_millis() as u64,
                cost: meta.cost,
            },
        );
    }

    fn record_err(&self, provider: &str, request: Value, err: &Error, elapsed: Duration) {
        let Some(recorded) = RecordedError::from_error(err) else {
            return;
        };
        let fp = cassette::fingerprint(provider, &request);
        self.cassette.lock().expect("cassette poisoned").insert(
            fp,
            CassetteRecord {
                provider: provider.into(),
                request,
                response: None,
                error: Some(recorded),
                latency_ms: elapsed.as_millis() as u64,
                cost: UsdMicros::ZERO,
            },
        );
    }
}

#[async_trait]
impl ChatProvider for Recorder {
    async fn chat(&self, req: &ChatRequest) -> Result<(String, CallMeta)> {
        let request = cassette::chat_request_value(req);
        let start = Instant::now();
        match self.inner.chat.chat(req).await {
            Ok((text, meta)) => {
                let payload = serde_json::to_value(ChatPayload { text: text.clone() })?;
                self.record_ok("chat", request, payload, meta);
                Ok((text, meta))
            }
            Err(e) => {
                self.record_err("chat", request, &e, start.elapsed());
                Err(e)
            }
        }
    }
}

#[async_trait]
impl EmbeddingProvider for Recorder {
    async fn embed(&self, texts: &[String]) -> Result<(Vec<EmbeddingVector>, CallMeta)> {
        let request = cassette::embed_request_value(texts);
        let start = Instant::now();
        match self.inner.embed.embed(texts).await {
            Ok((vectors, meta)) => {
                let payload = serde_json::to_value(EmbedPayload {
                    vectors: vectors.iter().map(|v| v.values.clone()).collect(),
                })?;
                self.record_ok("embed", request, payload, meta);
                Ok((vectors, meta))
            }
            Err(e) => {
                self.record_err("embed", request, &e, start.elapsed());
                Err(e)
            }
        }
    }
}

#[async_trait]
impl TextSearchProvider for Recorder {
    async fn search_text(
        &self,
        query: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        let request = cassette::text_search_request_value(query, limit);
        let start = Instant::now();
        match self.inner.text_search.search_text(query, limit).await {
            Ok((results, meta)) => {
                let payload = serde_json::to_value(SearchPayload {
                    results: results.clone(),
                })?;
                self.record_ok("text_search", request, payload, meta);
                Ok((results, meta))
            }
            Err(e) => {
                self.record_err("text_search", request, &e, start.elapsed());
                Err(e)
            }
        }
    }
}

#[async_trait]
impl ImageSearchProvider for Recorder {
    async fn search_image(
        &self,
        image: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        let request = cassette::image_search_request_value(image, limit);
        let start = Instant::now();
        match self.inner.image_search.search_image(image, limit).await {
            Ok((results, meta)) => {
                let payload = serde_json::to_value(SearchPayload {
                    results: results.clone(),
                })?;
                self.record_ok("image_search", request, payload, meta);
                Ok((results, meta))
            }
            Err(e) => {
                self.record_err("image_search", request, &e, start.elapsed());
                Err(e)
            }
        }
    }
}

#[async_trait]
impl PageFetcher for Recorder {
    async fn fetch_page(&self, url: &Url) -> Result<(RawDocument, CallMeta)> {
        let request = cassette::fetch_request_value(url);
        let start = Instant::now();
        match self.inner.fetcher.fetch_page(url).await {
            Ok((doc, meta)) => {
                let payload = serde_json::to_value(FetchPayload {
                    content_type: doc.content_type.clone(),
                    body_b64: b64().encode(&doc.body),
                })?;
                self.record_ok("fetch", request, payload, meta);
                Ok((doc, meta))
            }
            Err(e) => {
                self.record_err("fetch", request, &e, start.elapsed());
                Err(e)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::fake::{FakeChat, FakeEmbed, FakeFetcher, FakeImageSearch, FakeTextSearch};
    use crate::providers::{ChatMessage, Role};

    fn fake_set() -> ProviderSet {
        ProviderSet {
            chat: Arc::new(FakeChat::new(|req: &ChatRequest| {
                Ok(format!("echo:{}", req.messages.last().unwrap().joined_text()))
            })),
            embed: Arc::new(FakeEmbed::hashed(4)),
            text_search: Arc::new(FakeTextSearch::new(|q: &str, _| {
                Ok(vec![SearchResult {
                    url: Url::parse(&format!("https://t.test/{}", q.len())).unwrap(),
                    title: q.into(),
                    snippet: "snippet".into(),
                    channel: Channel::TextSearch,
                }])
            })),
            image_search: Arc::new(FakeImageSearch::new(|_, _| Ok(vec![]))),
            fetcher: Arc::new(FakeFetcher::new(|url: &Url| {
                if url.path().contains("missing") {
                    Err(Error::FetchFailed {
                        url: url.to_string(),
                        reason: "status 404".into(),
                    })
                } else {
                    Ok(RawDocument {
                        url: url.clone(),
                        content_type: "text/html".into(),
                        body: b"<p>hi</p>".to_vec(),
                    })
                }
            })),
        }
    }

    #[tokio::test]
    async fn record_then_replay_round_trips() {
        let recorder = Recorder::new(fake_set());
        let recording = recorder.provider_set();

        let req = ChatRequest::new(vec![ChatMessage::text(Role::User, "ping")]);
        let (live_text, _) = recording.chat.chat(&req).await.unwrap();
        let (results, _) = recording.text_search.search_text("q", 3).await.unwrap();
        let url = Url::parse("https://t.test/page").unwrap();
        let (doc, _) = recording.fetcher.fetch_page(&url).await.unwrap();
        let bad = Url::parse("https://t.test/missing").unwrap();
        assert!(recording.fetcher.fetch_page(&bad).await.is_err());

        let cassette = {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.json");
            recorder.save_to(&path).unwrap();
            Cassette::load(&path).unwrap()
        };
        assert_eq!(cassette.len(), 4);

        let replay = ReplayProviders::new(cassette).provider_set();
        let (replayed_text, _) = replay.chat.chat(&req).await.unwrap();
        assert_eq!(replayed_text, live_text);
        let (replayed_results, _) = replay.text_search.search_text("q", 3).await.unwrap();
        assert_eq!(replayed_results, results);
        let (replayed_doc, _) = replay.fetcher.fetch_page(&url).await.unwrap();
        assert_eq!(replayed_doc, doc);
        // The recorded failure replays as the same error kind.
        assert!(matches!(
            replay.fetcher.fetch_page(&bad).await.unwrap_err(),
            Error::FetchFailed { .. }
        ));
    }

    #[tokio::test]
    async fn replay_miss_is_provider_unavailable() {
        let replay = ReplayProviders::new(Cassette::new()).provider_set();
        let err = replay
            .chat
            .chat(&ChatRequest::new(vec![ChatMessage::text(Role::User, "ping")]))
            .await
            .unwrap_err();
        assert!(matches!(err, Error::ProviderUnavailable { .. }));
        let err = replay.text_search.search_text("nope", 2).await.unwrap_err();
        match err {
            Error::ProviderUnavailable { provider, reason } => {
                assert_eq!(provider, "text_search");
                assert!(reason.contains("nope"), "reason should name the query: {reason}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[tokio::test]
    async fn replay_returns_recorded_cost_and_latency() {
        let mut cassette = Cassette::new();
        let req_value = cassette::embed_request_value(&["a".to_string()]);
        let fp = cassette::fingerprint("embed", &req_value);
        cassette.insert(
            fp,
            CassetteRecord {
                provider: "embed".into(),
                request: req_value,
                response: Some(serde_json::json!({"vectors": [[1.0, 0.0]]})),
                error: None,
                latency_ms: 250,
                cost: "0.002".parse().unwrap(),
            },
        );
        let replay = ReplayProviders::new(cassette).provider_set();
        let (vectors, meta) = replay.embed.embed(&["a".to_string()]).await.unwrap();
        assert_eq!(vectors[0].values, vec![1.0, 0.0]);
        assert_eq!(meta.latency, Duration::from_millis(250));
        assert_eq!(meta.cost, "0.002".parse().unwrap());
    }
}
