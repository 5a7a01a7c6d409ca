//! Scripted provider doubles. Responses come from caller-supplied closures;
//! latency injection and request logs support concurrency and transcript
//! assertions, and the fixture recorder drives these to build cassettes.

use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use sha2::{Digest, Sha256};
use url::Url;

use crate::error::Result;
use crate::ledger::{CallMeta, UsdMicros};
use crate::providers::{
    ensure_chat_pre, ensure_embed_post, ensure_embed_pre, ensure_fetch_pre, ensure_search_pre,
    normalize_results, Channel, ChatProvider, ChatRequest, EmbeddingProvider, EmbeddingVector,
    ImageSearchProvider, PageFetcher, RawDocument, SearchResult, TextSearchProvider,
};

async fn simulate(latency: Duration) {
    if !latency.is_zero() {
        tokio::time::sleep(latency).await;
    }
}

type ChatFn = Box<dyn Fn(&ChatRequest) -> Result<String> + Send + Sync>;

pub struct FakeChat {
    respond: ChatFn,
    latency: Duration,
    cost: UsdMicros,
    log: Mutex<Vec<ChatRequest>>,
}

impl FakeChat {
    pub fn new(respond: impl Fn(&ChatRequest) -> Result<String> + Send + Sync + 'static) -> Self {
        FakeChat {
            respond: Box::new(respond),
            latency: Duration::ZERO,
            cost: UsdMicros::ZERO,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn with_cost(mut self, cost: UsdMicros) -> Self {
        self.cost = cost;
        self
    }

    /// Every request seen so far, in call order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().expect("log poisoned").clone()
    }
}

#[async_trait]
impl ChatProvider for FakeChat {
    async fn chat(&self, req: &ChatRequest) -> Result<(String, CallMeta)> {
        ensure_chat_pre(req)?;
        simulate(self.latency).await;
        self.log.lock().expect("log poisoned").push(req.clone());
        let text = (self.respond)(req)?;
        Ok((
            text,
            CallMeta {
                cost: self.cost,
                latency: self.latency,
            },
        ))
    }
}

type EmbedFn = dyn Fn(&[String]) -> Result<Vec<Vec<f64>>> + Send + Sync;

pub struct FakeEmbed {
    respond: Box<EmbedFn>,
    latency: Duration,
    cost: UsdMicros,
    log: Mutex<Vec<Vec<String>>>,
}

impl FakeEmbed {
    pub fn new(respond: impl Fn(&[String]) -> Result<Vec<Vec<f64>>> + Send + Sync + 'static) -> Self {
        FakeEmbed {
            respond: Box::new(respond),
            latency: Duration::ZERO,
            cost: UsdMicros::ZERO,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Deterministic content-hash embeddings: equal texts map to equal unit
    /// vectors, distinct texts to (almost surely) distinct directions.
    pub fn hashed(dim: usize) -> Self {
        assert!(dim >= 1);
        FakeEmbed::new(move |texts| {
            Ok(texts.iter().map(|t| hashed_unit_vector(t, dim)).collect())
        })
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn with_cost(mut self, cost: UsdMicros) -> Self {
        self.cost = cost;
        self
    }

    pub fn requests(&self) -> Vec<Vec<String>> {
        self.log.lock().expect("log poisoned").clone()
    }
}

/// Unit vector derived from a SHA-256 of the text.
pub fn hashed_unit_vector(text: &str, dim: usize) -> Vec<f64> {
    let digest = Sha256::digest(text.as_bytes());
    let mut values: Vec<f64> = (0..dim)
        .map(|i| {
            let byte = digest[i % digest.len()];
            // Spread into [-1, 1], offset per position so short digests
            // still vary across dimensions.
            let mixed = byte.wrapping_mul(31).wrapping_add(i as u8);
            (mixed as f64 / 127.5) - 1.0
        })
        .collect();
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        values[0] = 1.0;
    } else {
        for v in &mut values {
            *v /= norm;
        }
    }
    values
}

#[async_trait]
impl EmbeddingProvider for FakeEmbed {
    async fn embed(&self, texts: &[String]) -> Result<(Vec<EmbeddingVector>, CallMeta)> {
        ensure_embed_pre(texts)?;
        simulate(self.latency).await;
        self.log.lock().expect("log poisoned").push(texts.to_vec());
        let vectors: Vec<EmbeddingVector> = (self.respond)(texts)?
            .into_iter()
            .map(|values| EmbeddingVector { values })
            .collect();
        ensure_embed_post(&vectors, texts.len())?;
        Ok((
            vectors,
            CallMeta {
                cost: self.cost,
                latency: self.latency,
            },
        ))
    }
}

type SearchFn = dyn Fn(&str, usize) -> Result<Vec<SearchResult>> + Send + Sync;

pub struct FakeTextSearch {
    respond: Box<SearchFn>,
    latency: Duration,
    cost: UsdMicros,
    log: Mutex<Vec<String>>,
}

impl FakeTextSearch {
    pub fn new(respond: impl Fn(&str, usize) -> Result<Vec<SearchResult>> + Send + Sync + 'static) -> Self {
        FakeTextSearch {
            respond: Box::new(respond),
            latency: Duration::ZERO,
            cost: UsdMicros::ZERO,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn with_cost(mut self, cost: UsdMicros) -> Self {
        self.cost = cost;
        self
    }

    pub fn queries(&self) -> Vec<String> {
        self.log.lock().expect("log poisoned").clone()
    }
}

#[async_trait]
impl TextSearchProvider for FakeTextSearch {
    async fn search_text(
        &self,
        query: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        ensure_search_pre(query, limit)?;
        simulate(self.latency).await;
        self.log.lock().expect("log poisoned").push(query.to_string());
        let results = (self.respond)(query, limit)?;
        Ok((
            normalize_results(results, Channel::TextSearch, limit),
            CallMeta {
                cost: self.cost,
                latency: self.latency,
            },
        ))
    }
}

pub struct FakeImageSearch {
    respond: Box<SearchFn>,
    latency: Duration,
    cost: UsdMicros,
    log: Mutex<Vec<String>>,
}

impl FakeImageSearch {
    pub fn new(respond: impl Fn(&str, usize) -> Result<Vec<SearchResult>> + Send + Sync + 'static) -> Self {
        FakeImageSearch {
            respond: Box::new(respond),
            latency: Duration::ZERO,
            cost: UsdMicros::ZERO,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn with_cost(mut self, cost: UsdMicros) -> Self {
        self.cost = cost;
        self
    }

    pub fn images(&self) -> Vec<String> {
        self.log.lock().expect("log poisoned").clone()
    }
}

#[async_trait]
impl ImageSearchProvider for FakeImageSearch {
    async fn search_image(
        &self,
        image: &str,
        limit: usize,
    ) -> Result<(Vec<SearchResult>, CallMeta)> {
        ensure_search_pre(image, limit)?;
        simulate(self.latency).await;
        self.log.lock().expect("log poisoned").push(image.to_string());
        let results = (self.respond)(image, limit)?;
        Ok((
            normalize_results(results, Channel::ImageSearch, limit),
            CallMeta {
                cost: self.cost,
                latency: self.latency,
            },
        ))
    }
}

type FetchFn = dyn Fn(&Url) -> Result<RawDocument> + Send + Sync;

pub struct FakeFetcher {
    respond: Box<FetchFn>,
    latency: Duration,
    log: Mutex<Vec<Url>>,
}

impl FakeFetcher {
    pub fn new(respond: impl Fn(&Url) -> Result<RawDocument> + Send + Sync + 'static) -> Self {
        FakeFetcher {
            respond: Box::new(respond),
            latency: Duration::ZERO,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_latency(mut self, latency: Duration) -> Self {
        self.latency = latency;
        self
    }

    pub fn urls(&self) -> Vec<Url> {
        self.log.lock().expect("log poisoned").clone()
    }
}

#[async_trait]
impl PageFetcher for FakeFetcher {
    async fn fetch_page(&self, url: &Url) -> Result<(RawDocument, CallMeta)> {
        ensure_fetch_pre(url)?;
        simulate(self.latency).await;
        self.log.lock().expect("log poisoned").push(url.clone());
        let doc = (self.respond)(url)?;
        Ok((
            doc,
            CallMeta {
                cost: UsdMicros::ZERO,
                latency: self.latency,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{ChatMessage, Role};

    #[tokio::test]
    async fn fake_chat_logs_and_responds() {
        let chat = FakeChat::new(|req: &ChatRequest| {
            Ok(format!("saw {} messages", req.messages.len()))
        })
        .with_cost("0.001".parse().unwrap());
        let req = ChatRequest::new(vec![ChatMessage::text(Role::User, "hello")]);
        let (text, meta) = chat.chat(&req).await.unwrap();
        assert_eq!(text, "saw 1 messages");
        assert_eq!(meta.cost, "0.001".parse().unwrap());
        assert_eq!(chat.requests().len(), 1);
    }

    #[tokio::test]
    async fn hashed_embeddings_are_deterministic_unit_vectors() {
        let embed = FakeEmbed::hashed(8);
        let texts = vec!["alpha".to_string(), "alpha".to_string(), "beta".to_string()];
        let (vectors, _) = embed.embed(&texts).await.unwrap();
        assert_eq!(vectors[0], vectors[1]);
        assert_ne!(vectors[0], vectors[2]);
        for v in &vectors {
            assert!((v.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[tokio::test]
    async fn latency_injection_is_reported_in_meta() {
        let search = FakeTextSearch::new(|_, _| Ok(vec![])).with_latency(Duration::from_millis(30));
        let start = std::time::Instant::now();
        let (_, meta) = search.search_text("q", 5).await.unwrap();
        assert!(start.elapsed() >= Duration::from_millis(30));
        assert_eq!(meta.latency, Duration::from_millis(30));
    }
}
