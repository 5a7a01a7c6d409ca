//! Candidate pool construction: run every sub-claim text search and the
//! reverse image search concurrently, then merge and deduplicate.

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::claim::Claim;
use crate::error::{Error, Result};
use crate::interpret::InterpretationResult;
use crate::ledger::{Bucket, StageMeter};
use crate::providers::{Channel, ProviderSet, SearchResult};

/// Final pool size per channel, counted after deduplication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelCounts {
    pub text_search: usize,
    pub image_search: usize,
}

/// Deduplicated candidate evidence sources in merge order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidatePool {
    pub candidates: Vec<SearchResult>,
    pub per_channel_counts: ChannelCounts,
}

impl CandidatePool {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Merge per-query text results (round-robin across queries by rank, so late
/// queries aren't starved) followed by image results in rank order; the
/// first occurrence of a URL wins.
pub fn merge_candidates(
    text_results: Vec<Vec<SearchResult>>,
    image_results: Vec<SearchResult>,
) -> CandidatePool {
    let mut ordered = Vec::new();
    let deepest = text_results.iter().map(Vec::len).max().unwrap_or(0);
    for rank in 0..deepest {
        for per_query in &text_results {
            if let Some(r) = per_query.get(rank) {
                ordered.push(r.clone());
            }
        }
    }
    ordered.extend(image_results);

    let mut seen = std::collections::HashSet::new();
    let mut counts = ChannelCounts::default();
    let mut candidates = Vec::new();
    for r in ordered {
        if !seen.insert(r.url.as_str().to_string()) {
            continue;
        }
        match r.channel {
            Channel::TextSearch => counts.text_search += 1,
            Channel::ImageSearch => counts.image_search += 1,
        }
        candidates.push(r);
    }
    CandidatePool {
        candidates,
        per_channel_counts: counts,
    }
}

/// Run both retrieval channels concurrently and assemble the pool.
///
/// Individual call failures degrade gracefully (logged, pool still built);
/// only when every issued call fails is [`Error::RetrievalEmpty`] raised.
pub async fn locate_candidates(
    providers: &ProviderSet,
    interp: &InterpretationResult,
    claim: &Claim,
    per_query_limit: usize,
    text_parallelism: usize,
    meter: &StageMeter,
) -> Result<CandidatePool> {
    let image = claim.image.as_ref().map(|i| i.locator().to_string());
    if interp.sub_claims.is_empty() && image.is_none() {
        return Err(Error::InvalidConfig(
            "nothing to retrieve: no sub-claims and no image".into(),
        ));
    }

    let text_channel = async {
        stream::iter(interp.sub_claims.iter().map(|sc| {
            let query = sc.query.clone();
            async move {
                let outcome = providers
                    .text_search
                    .search_text(&query, per_query_limit)
                    .await;
                (query, outcome)
            }
        }))
        .buffered(text_parallelism.max(1))
        .collect::<Vec<_>>()
        .await
    };

    let image_channel = async {
        match &image {
            Some(locator) => Some(
                providers
                    .image_search
                    .search_image(locator, per_query_limit)
                    .await,
            ),
            None => None,
        }
    };

    let (text_outcomes, image_outcome) = tokio::join!(text_channel, image_channel);

    let mut failures = Vec::new();
    let mut successes = 0usize;
    let mut text_results = Vec::with_capacity(text_outcomes.len());
    for (query, outcome) in text_outcomes {
        match outcome {
            Ok((results, meta)) => {
                meter.add(Bucket::Retrieve, meta);
                successes += 1;
                text_results.push(results);
            }
            Err(e) => {
                tracing::warn!(query = %query, error = %e, "text search failed; continuing");
                failures.push(format!("text search {query:?}: {e}"));
                text_results.push(Vec::new());
            }
        }
    }

    let image_results = match image_outcome {
        Some(Ok((results, meta))) => {
            meter.add(Bucket::Retrieve, meta);
            successes += 1;
            results
        }
        Some(Err(e)) => {
            tracing::warn!(error = %e, "image search failed; continuing");
            failures.push(format!("image search: {e}"));
            Vec::new()
        }
        None => Vec::new(),
    };

    if successes == 0 {
        return Err(Error::RetrievalEmpty(failures.join("; ")));
    }
    Ok(merge_candidates(text_results, image_results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claim::ImageRef;
    use crate::interpret::SubClaim;
    use crate::providers::fake::{
        FakeChat, FakeEmbed, FakeFetcher, FakeImageSearch, FakeTextSearch,
    };
    use std::sync::Arc;
    use std::time::Duration;
    use url::Url;

    fn hit(u: &str, channel: Channel) -> SearchResult {
        SearchResult {
            url: Url::parse(u).unwrap(),
            title: "t".into(),
            snippet: "s".into(),
            channel,
        }
    }

    fn interp(queries: &[&str]) -> InterpretationResult {
        InterpretationResult {
            sub_claims: queries
                .iter()
                .map(|q| SubClaim {
                    statement: q.to_string(),
                    query: q.to_string(),
                })
                .collect(),
            image_notes: None,
        }
    }

    fn claim_with_image() -> Claim {
        Claim {
            id: "c".into(),
            text: "t".into(),
            image: Some(ImageRef::from("img.png".to_string())),
            gold_label: None,
            published_at: None,
        }
    }

    fn set(
        text: FakeTextSearch,
        image: FakeImageSearch,
    ) -> ProviderSet {
        ProviderSet {
            chat: Arc::new(FakeChat::new(|_| Ok(String::new()))),
            embed: Arc::new(FakeEmbed::hashed(4)),
            text_search: Arc::new(text),
            image_search: Arc::new(image),
            fetcher: Arc::new(FakeFetcher::new(|_| panic!("no fetch in retrieve tests"))),
        }
    }

    #[test]
    fn merge_interleaves_round_robin_then_appends_image() {
        let a = vec![
            hit("https://x.test/a1", Channel::TextSearch),
            hit("https://x.test/a2", Channel::TextSearch),
            hit("https://x.test/a3", Channel::TextSearch),
        ];
        let b = vec![
            hit("https://x.test/b1", Channel::TextSearch),
            hit("https://x.test/b2", Channel::TextSearch),
        ];
        let img = vec![
            hit("https://x.test/i1", Channel::ImageSearch),
            hit("https://x.test/a2", Channel::ImageSearch), // dup of a2
        ];
        let pool = merge_candidates(vec![a, b], img);
        let order: Vec<&str> = pool.candidates.iter().map(|r| r.url.path()).collect();
        assert_eq!(order, vec!["/a1", "/b1", "/a2", "/b2", "/a3", "/i1"]);
        assert_eq!(pool.per_channel_counts.text_search, 5);
        assert_eq!(pool.per_channel_counts.image_search, 1);
    }

    #[test]
    fn merge_is_idempotent_on_deduplicated_input() {
        let pool = merge_candidates(
            vec![vec![
                hit("https://x.test/1", Channel::TextSearch),
                hit("https://x.test/2", Channel::TextSearch),
            ]],
            vec![hit("https://x.test/3", Channel::ImageSearch)],
        );
        let again = merge_candidates(vec![pool.candidates.clone()], vec![]);
        assert_eq!(again.candidates, pool.candidates);
    }

    #[tokio::test]
    async fn degrades_gracefully_when_one_channel_fails() {
        let providers = set(
            FakeTextSearch::new(|_, _| {
                Err(Error::ProviderUnavailable {
                    provider: "text_search".into(),
                    reason: "down".into(),
                })
            }),
            FakeImageSearch::new(|_, _| {
                Ok(vec![hit("https://x.test/i1", Channel::ImageSearch)])
            }),
        );
        let meter = StageMeter::new();
        let pool = locate_candidates(
            &providers,
            &interp(&["q1"]),
            &claim_with_image(),
            10,
            4,
            &meter,
        )
        .await
        .unwrap();
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.per_channel_counts.image_search, 1);
    }

    #[tokio::test]
    async fn all_failures_raise_retrieval_empty() {
        let providers = set(
            FakeTextSearch::new(|_, _| {
                Err(Error::ProviderUnavailable {
                    provider: "text_search".into(),
                    reason: "down".into(),
                })
            }),
            FakeImageSearch::new(|_, _| {
                Err(Error::ProviderUnavailable {
                    provider: "image_search".into(),
                    reason: "down".into(),
                })
            }),
        );
        let err = locate_candidates(
            &providers,
            &interp(&["q1", "q2"]),
            &claim_with_image(),
            10,
            4,
            &StageMeter::new(),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, Error::RetrievalEmpty(_)));
    }

    #[tokio::test]
    async fn channels_run_concurrently() {
        let latency = Duration::from_millis(100);
        let providers = set(
            FakeTextSearch::new(|q, _| {
                Ok(vec![hit(&format!("https://x.test/t-{q}"), Channel::TextSearch)])
            })
            .with_latency(latency),
            FakeImageSearch::new(|_, _| {
                Ok(vec![hit("https://x.test/i1", Channel::ImageSearch)])
            })
            .with_latency(latency),
        );
        let start = std::time::Instant::now();
        let pool = locate_candidates(
            &providers,
            &interp(&["q1", "q2"]),
            &claim_with_image(),
            10,
            4,
            &StageMeter::new(),
        )
        .await
        .unwrap();
        let wall = start.elapsed();
        assert_eq!(pool.len(), 3);
        // Two text queries (parallelism 4) + image channel all overlap.
        assert!(
            wall < Duration::from_millis(180),
            "expected concurrent channels, wall was {wall:?}"
        );
    }

    #[tokio::test]
    async fn pool_respects_size_bound_and_query_order() {
        let providers = set(
            FakeTextSearch::new(|q, limit| {
                Ok((0..limit)
                    .map(|i| hit(&format!("https://x.test/{q}/{i}"), Channel::TextSearch))
                    .collect())
            }),
            FakeImageSearch::new(|_, limit| {
                Ok((0..limit)
                    .map(|i| hit(&format!("https://img.test/{i}"), Channel::ImageSearch))
                    .collect())
            }),
        );
        let queries = ["a", "b", "c"];
        let pool = locate_candidates(
            &providers,
            &interp(&queries),
            &claim_with_image(),
            10,
            2,
            &StageMeter::new(),
        )
        .await
        .unwrap();
        assert!(pool.len() <= queries.len() * 10 + 10);
        assert_eq!(pool.len(), 40);
        // Round-robin: first three are rank-0 results of a, b, c in order.
        assert_eq!(pool.candidates[0].url.path(), "/a/0");
        assert_eq!(pool.candidates[1].url.path(), "/b/0");
        assert_eq!(pool.candidates[2].url.path(), "/c/0");
        assert_eq!(pool.candidates[39].url.path(), "/9");
    }

    #[tokio::test]
    async fn meter_collects_search_costs() {
        let providers = set(
            FakeTextSearch::new(|_, _| Ok(vec![])).with_cost("0.005".parse().unwrap()),
            FakeImageSearch::new(|_, _| Ok(vec![])).with_cost("0.005".parse().unwrap()),
        );
        let meter = StageMeter::new();
        locate_candidates(
            &providers,
            &interp(&["q1", "q2"]),
            &claim_with_image(),
            10,
            4,
            &meter,
        )
        .await
        .unwrap();
        let (costs, _) = meter.snapshot();
        // Two text searches and one image search.
        assert_eq!(costs.retrieve, "0.015".parse().unwrap());
    }
}
