//! Evidence evaluation: filter candidates by source credibility, score the
//! survivors on relevance and dimensional integrity, and rank by the
//! weighted quality score.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::extract::StructuredEvidence;
use crate::interpret::InterpretationResult;
use crate::ledger::{Bucket, StageMeter};
use crate::providers::{EmbeddingVector, ProviderSet};
use crate::Claim;

/// Credibility feature weights. They sum to 1 so a source with every signal
/// scores exactly 1.0.
pub const WEIGHT_HTTPS: f64 = 0.2;
pub const WEIGHT_ALLOWLIST: f64 = 0.4;
pub const WEIGHT_SHALLOW_PATH: f64 = 0.1;
pub const WEIGHT_EVENT_PRESENT: f64 = 0.2;
pub const WEIGHT_TEXT_LENGTH: f64 = 0.1;
/// Path segments beyond this count as a deep (less canonical) URL.
pub const MAX_SHALLOW_PATH_DEPTH: usize = 4;
/// Minimum summary length (chars) for the text-length feature.
pub const TEXT_LENGTH_FLOOR: usize = 80;

/// Domain suffixes, matched at label boundaries: `example.com` covers
/// `example.com` and `news.example.com` but not `notexample.com`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>")]
#[serde(into = "Vec<String>")]
pub struct DomainList {
    suffixes: Vec<String>,
}

impl DomainList {
    pub fn new<I, S>(suffixes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        DomainList {
            suffixes: suffixes
                .into_iter()
                .map(|s| s.as_ref().trim().trim_start_matches('.').to_ascii_lowercase())
                .filter(|s| !s.is_empty())
                .collect(),
        }
    }

    /// One suffix per line; `#` starts a comment; blank lines skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(DomainList::new(
            text.lines()
                .map(|l| l.split('#').next().unwrap_or("").trim())
                .filter(|l| !l.is_empty()),
        ))
    }

    pub fn matches(&self, host: &str) -> bool {
        let host = host.to_ascii_lowercase();
        self.suffixes.iter().any(|suffix| {
            host == *suffix
                || (host.len() > suffix.len()
                    && host.ends_with(suffix.as_str())
                    && host.as_bytes()[host.len() - suffix.len() - 1] == b'.')
        })
    }

    pub fn is_empty(&self) -> bool {
        self.suffixes.is_empty()
    }
}

impl From<Vec<String>> for DomainList {
    fn from(suffixes: Vec<String>) -> Self {
        DomainList::new(suffixes)
    }
}

impl From<DomainList> for Vec<String> {
    fn from(list: DomainList) -> Self {
        list.suffixes
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluatorConfig {
    pub alpha: f64,
    pub credibility_threshold: f64,
    pub top_k: usize,
    pub blacklist: DomainList,
    pub allowlist: DomainList,
}

impl Default for EvaluatorConfig {
    fn default() -> Self {
        EvaluatorConfig {
            alpha: 0.5,
            credibility_threshold: 0.5,
            top_k: 5,
            blacklist: DomainList::default(),
            allowlist: DomainList::default(),
        }
    }
}

impl EvaluatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(0.0..=1.0).contains(&self.credibility_threshold) {
            return Err(Error::InvalidConfig(format!(
                "credibility_threshold must lie in [0, 1], got {}",
                self.credibility_threshold
            )));
        }
        if self.top_k == 0 {
            return Err(Error::InvalidConfig("top_k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Evidence with its scores. `quality` is always derived from the other
/// scores through [`ScoredEvidence::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvidence {
    pub evidence: StructuredEvidence,
    pub credibility: f64,
    pub relevance: f64,
    pub integrity: f64,
    pub quality: f64,
}

impl ScoredEvidence {
    pub fn new(
        evidence: StructuredEvidence,
        credibility: f64,
        relevance: f64,
        integrity: f64,
        alpha: f64,
    ) -> Self {
        ScoredEvidence {
            evidence,
            credibility,
            relevance,
            integrity,
            quality: alpha * relevance + (1.0 - alpha) * integrity,
        }
    }

    pub fn url(&self) -> &Url {
        &self.evidence.source_url
    }
}

/// The claim's embedding-space representation: claim text plus image notes
/// when the interpretation produced them.
#[derive(Debug, Clone)]
pub struct ClaimRepresentation {
    pub vector: EmbeddingVector,
}

impl ClaimRepresentation {
    /// The text that stands in for the claim in embedding space.
    pub fn text_for(claim: &Claim, interpretation: &InterpretationResult) -> String {
        let mut text = claim.normalized_text();
        if let Some(notes) = interpretation.image_notes.as_deref() {
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(notes);
        }
        text
    }

    pub async fn build(
        providers: &ProviderSet,
        claim: &Claim,
        interpretation: &InterpretationResult,
        meter: &StageMeter,
    ) -> Result<Self> {
        let text = Self::text_for(claim, interpretation);
        if text.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "claim {} has no text or image notes to embed",
                claim.id
            )));
        }
        let (mut vectors, meta) = providers.embed.embed(&[text]).await?;
        meter.add(Bucket::Retrieve, meta);
        let vector = vectors.pop().ok_or_else(|| Error::MalformedResponse {
            provider: "embedding".into(),
            reason: "no vector returned for claim text".into(),
        })?;
        if vector.norm() == 0.0 {
            return Err(Error::MalformedResponse {
                provider: "embedding".into(),
                reason: "zero vector for claim representation".into(),
            });
        }
        Ok(ClaimRepresentation { vector })
    }
}

pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || a.dim() != b.dim() {
        return 0.0;
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}

/// Cosine clamped into [0, 1]: opposite-meaning text counts as irrelevant,
/// not negatively relevant.
fn clamped_relevance(claim: &EmbeddingVector, summary: &EmbeddingVector) -> f64 {
    cosine_similarity(claim, summary).clamp(0.0, 1.0)
}

fn event_populated(evidence: &StructuredEvidence) -> bool {
    evidence
        .dimensions
        .event
        .as_deref()
        .is_some_and(|v| !v.trim().is_empty())
}

/// Transparent source-credibility heuristic. A blacklisted domain is 0.0
/// outright; otherwise HTTPS (+0.2), allowlisted registrable domain (+0.4),
/// path depth ≤ 4 (+0.1), populated Event dimension (+0.2), and summary
/// length ≥ 80 chars (+0.1) add up to at most 1.0.
pub fn credibility_score(
    url: &Url,
    signals: Option<&StructuredEvidence>,
    cfg: &EvaluatorConfig,
) -> f64 {
    let host = url.host_str().unwrap_or("");
    if cfg.blacklist.matches(host) {
        return 0.0;
    }
    let mut score = 0.0;
    if url.scheme() == "https" {
        score += WEIGHT_HTTPS;
    }
    if cfg.allowlist.matches(host) {
        score += WEIGHT_ALLOWLIST;
    }
    if url.path_segments().map_or(0, |s| s.filter(|p| !p.is_empty()).count())
        <= MAX_SHALLOW_PATH_DEPTH
    {
        score += WEIGHT_SHALLOW_PATH;
    }
    if let Some(evidence) = signals {
        if event_populated(evidence) {
            score += WEIGHT_EVENT_PRESENT;
        }
        if evidence.summary.chars().count() >= TEXT_LENGTH_FLOOR {
            score += WEIGHT_TEXT_LENGTH;
        }
    }
    // The weights sum to 1 only up to float rounding; pin the boundary.
    score.min(1.0)
}

/// Share of the eight dimensions the extraction populated.
pub fn integrity_score(evidence: &StructuredEvidence) -> f64 {
    evidence.dimensions.populated_count() as f64 / 8.0
}

/// Embed one summary and compare it against the claim representation.
pub async fn relevance_score(
    providers: &ProviderSet,
    claim_rep: &ClaimRepresentation,
    evidence: &StructuredEvidence,
    meter: &StageMeter,
) -> Result<f64> {
    let (vectors, meta) = providers.embed.embed(std::slice::from_ref(&evidence.summary)).await?;
    meter.add(Bucket::Retrieve, meta);
    let vector = vectors.first().ok_or_else(|| Error::MalformedResponse {
        provider: "embedding".into(),
        reason: "no vector returned for evidence summary".into(),
    })?;
    Ok(clamped_relevance(&claim_rep.vector, vector))
}

/// Stage 1: keep items at or above the credibility threshold, order
/// preserved.
pub fn filter_by_credibility(
    items: Vec<ScoredEvidence>,
    cfg: &EvaluatorConfig,
) -> Vec<ScoredEvidence> {
    items
        .into_iter()
        .filter(|i| i.credibility >= cfg.credibility_threshold)
        .collect()
}

/// Total rank order: quality descending, then credibility descending, then
/// source URL ascending.
fn rank_order(a: &ScoredEvidence, b: &ScoredEvidence) -> Ordering {
    b.quality
        .total_cmp(&a.quality)
        .then_with(|| b.credibility.total_cmp(&a.credibility))
        .then_with(|| a.url().as_str().cmp(b.url().as_str()))
}

/// Filter and rank pre-scored items. The full ranked list is returned;
/// truncation to top_k happens where evidence is consumed.
pub fn rank_evidence_scored(
    items: Vec<ScoredEvidence>,
    cfg: &EvaluatorConfig,
) -> Vec<ScoredEvidence> {
    let mut survivors = filter_by_credibility(items, cfg);
    survivors.sort_by(rank_order);
    survivors
}

/// The full evaluation pass: credibility-filter the extracted evidence,
/// embed the surviving summaries in one batched call, score, and rank.
pub async fn rank_evidence(
    providers: &ProviderSet,
    claim_rep: &ClaimRepresentation,
    evidence_list: Vec<StructuredEvidence>,
    cfg: &EvaluatorConfig,
    meter: &StageMeter,
) -> Result<Vec<ScoredEvidence>> {
    cfg.validate()?;
    let survivors: Vec<(StructuredEvidence, f64)> = evidence_list
        .into_iter()
        .map(|ev| {
            let credibility = credibility_score(&ev.source_url, Some(&ev), cfg);
            (ev, credibility)
        })
        .filter(|(_, credibility)| *credibility >= cfg.credibility_threshold)
        .collect();
    if survivors.is_empty() {
        return Ok(Vec::new());
    }

    // One batched embedding call for every nonempty summary.
    let texts: Vec<String> = survivors
        .iter()
        .filter(|(ev, _)| !ev.summary.is_empty())
        .map(|(ev, _)| ev.summary.clone())
        .collect();
    let mut vectors = if texts.is_empty() {
        Vec::new()
    } else {
        let (vectors, meta) = providers.embed.embed(&texts).await?;
        meter.add(Bucket::Retrieve, meta);
        vectors
    };

    let mut vector_iter = vectors.drain(..);
    let mut scored = Vec::with_capacity(survivors.len());
    for (evidence, credibility) in survivors {
        let relevance = if evidence.summary.is_empty() {
            0.0
        } else {
            let vector = vector_iter.next().ok_or_else(|| Error::MalformedResponse {
                provider: "embedding".into(),
                reason: "fewer vectors than inputs".into(),
            })?;
            clamped_relevance(&claim_rep.vector, &vector)
        };
        let integrity = integrity_score(&evidence);
        scored.push(ScoredEvidence::new(
            evidence,
            credibility,
            relevance,
            integrity,
            cfg.alpha,
        ));
    }
    scored.sort_by(rank_order);
    Ok(scored)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::EvidenceDimensions;
    use crate::providers::fake::{
        FakeChat, FakeEmbed, FakeFetcher, FakeImageSearch, FakeTextSearch,
    };
    use crate::providers::{Channel, RawDocument};
    use proptest::prelude::*;
    use std::sync::Arc;

    // ---- independent oracle -------------------------------------------------
    // Pairwise "a outranks b" relation plus a selection sort over it; written
    // against the ranking contract, not the implementation.

    fn oracle_outranks(a: &ScoredEvidence, b: &ScoredEvidence) -> bool {
        if a.quality != b.quality {
            return a.quality > b.quality;
        }
        if a.credibility != b.credibility {
            return a.credibility > b.credibility;
        }
        a.url().as_str() < b.url().as_str()
    }

    pub(crate) fn oracle_rank(
        items: Vec<ScoredEvidence>,
        cfg: &EvaluatorConfig,
    ) -> Vec<ScoredEvidence> {
        let mut pool: Vec<ScoredEvidence> = items
            .into_iter()
            .filter(|i| i.credibility >= cfg.credibility_threshold)
            .collect();
        let mut ranked = Vec::with_capacity(pool.len());
        while !pool.is_empty() {
            let mut best = 0;
            for i in 1..pool.len() {
                if oracle_outranks(&pool[i], &pool[best]) {
                    best = i;
                }
            }
            ranked.push(pool.remove(best));
        }
        ranked
    }

    // ---- fixtures -----------------------------------------------------------

    fn dims_with(populated: usize) -> EvidenceDimensions {
        let mut dims = EvidenceDimensions::default();
        let slots: [&mut Option<String>; 8] = [
            &mut dims.people,
            &mut dims.event,
            &mut dims.location,
            &mut dims.time,
            &mut dims.reason,
            &mut dims.background,
            &mut dims.impact,
            &mut dims.followup,
        ];
        for slot in slots.into_iter().take(populated) {
            *slot = Some("value".into());
        }
        dims
    }

    fn evidence(url: &str, populated: usize, summary: &str) -> StructuredEvidence {
        StructuredEvidence {
            source_url: Url::parse(url).unwrap(),
            dimensions: dims_with(populated),
            summary: summary.into(),
            retrieved_at: 0,
            channel: Channel::TextSearch,
        }
    }

    fn scored(url: &str, credibility: f64, relevance: f64, integrity: f64, alpha: f64) -> ScoredEvidence {
        ScoredEvidence::new(evidence(url, 0, "s"), credibility, relevance, integrity, alpha)
    }

    fn urls(items: &[ScoredEvidence]) -> Vec<String> {
        items.iter().map(|i| i.url().to_string()).collect()
    }

    // ---- ranking vs. oracle -------------------------------------------------

    #[test]
    fn ranking_matches_oracle_on_random_sets() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let alpha: f64 = rng.random();
            let cfg = EvaluatorConfig {
                alpha,
                credibility_threshold: rng.random(),
                ..EvaluatorConfig::default()
            };
            let n = rng.random_range(0..=8);
            let items: Vec<ScoredEvidence> = (0..n)
                .map(|i| {
                    // Coarse grid so ties actually occur.
                    let r = (rng.random_range(0..=4) as f64) / 4.0;
                    let m = (rng.random_range(0..=8) as f64) / 8.0;
                    let c = (rng.random_range(0..=4) as f64) / 4.0;
                    scored(&format!("https://s{i}.test/"), c, r, m, alpha)
                })
                .collect();
            let got = rank_evidence_scored(items.clone(), &cfg);
            let want = oracle_rank(items, &cfg);
            assert_eq!(urls(&got), urls(&want));
        }
    }

    #[test]
    fn quality_is_exactly_the_weighted_sum() {
        let item = scored("https://a.test/", 1.0, 0.4, 0.5, 0.5);
        assert!((item.quality - 0.45).abs() < 1e-12);
        let item = scored("https://a.test/", 1.0, 0.3, 0.9, 0.25);
        assert!((item.quality - (0.25 * 0.3 + 0.75 * 0.9)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn ranked_output_is_nonincreasing_and_a_filtered_subset(
            scores in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0), 0..12),
            alpha in 0.0f64..=1.0,
            threshold in 0.0f64..=1.0,
        ) {
            let cfg = EvaluatorConfig { alpha, credibility_threshold: threshold, ..EvaluatorConfig::default() };
            let items: Vec<ScoredEvidence> = scores
                .iter()
                .enumerate()
                .map(|(i, (c, r, m))| scored(&format!("https://s{i}.test/"), *c, *r, *m, alpha))
                .collect();
            let ranked = rank_evidence_scored(items.clone(), &cfg);
            for window in ranked.windows(2) {
                prop_assert!(window[0].quality >= window[1].quality);
            }
            for item in &ranked {
                prop_assert!(item.credibility >= threshold);
                prop_assert!(items.iter().any(|orig| orig.url() == item.url()));
                prop_assert!((0.0..=1.0).contains(&item.quality));
            }
        }

        #[test]
        fn ranking_is_permutation_invariant(
            seed in 0u64..1000,
            n in 1usize..9,
        ) {
            use rand::prelude::*;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let alpha = 0.5;
            let cfg = EvaluatorConfig::default();
            let mut items: Vec<ScoredEvidence> = (0..n)
                .map(|i| {
                    let r = (rng.random_range(0..=2) as f64) / 2.0;
                    let m = (rng.random_range(0..=2) as f64) / 2.0;
                    scored(&format!("https://s{i}.test/"), 1.0, r, m, alpha)
                })
                .collect();
            let baseline = urls(&rank_evidence_scored(items.clone(), &cfg));
            items.shuffle(&mut rng);
            prop_assert_eq!(urls(&rank_evidence_scored(items, &cfg)), baseline);
        }

        #[test]
        fn alpha_boundaries_and_monotonicity(
            r in 0.0f64..=1.0,
            m in 0.0f64..=1.0,
            alpha in 0.0f64..=1.0,
            bump in 0.0f64..=0.5,
        ) {
            let base = scored("https://a.test/", 1.0, r, m, alpha);
            prop_assert!((0.0..=1.0).contains(&base.quality));
            // Exact boundary identities.
            prop_assert_eq!(scored("https://a.test/", 1.0, r, m, 1.0).quality, r);
            prop_assert_eq!(scored("https://a.test/", 1.0, r, m, 0.0).quality, m);
            // Monotone in r and in m.
            let up_r = scored("https://a.test/", 1.0, (r + bump).min(1.0), m, alpha);
            let up_m = scored("https://a.test/", 1.0, r, (m + bump).min(1.0), alpha);
            prop_assert!(up_r.quality >= base.quality - 1e-15);
            prop_assert!(up_m.quality >= base.quality - 1e-15);
        }

        #[test]
        fn alpha_one_ranks_by_relevance_alone(
            rs in proptest::collection::vec(0.0f64..=1.0, 1..8),
        ) {
            let cfg = EvaluatorConfig { alpha: 1.0, ..EvaluatorConfig::default() };
            let items: Vec<ScoredEvidence> = rs
                .iter()
                .enumerate()
                .map(|(i, r)| scored(&format!("https://s{i}.test/"), 1.0, *r, 0.99, 1.0))
                .collect();
            let ranked = rank_evidence_scored(items, &cfg);
            for window in ranked.windows(2) {
                prop_assert!(window[0].relevance >= window[1].relevance);
            }
        }

        #[test]
        fn integrity_is_always_an_eighth(populated in 0usize..=8) {
            let ev = evidence("https://a.test/", populated, "s");
            let m = integrity_score(&ev);
            prop_assert_eq!(m, populated as f64 / 8.0);
            prop_assert!((m * 8.0).fract() == 0.0);
        }
    }

    #[test]
    fn four_of_eight_is_exactly_half() {
        assert_eq!(integrity_score(&evidence("https://a.test/", 4, "s")), 0.5);
        assert_eq!(integrity_score(&evidence("https://a.test/", 0, "s")), 0.0);
        assert_eq!(integrity_score(&evidence("https://a.test/", 8, "s")), 1.0);
    }

    // ---- credibility --------------------------------------------------------

    #[test]
    fn blacklisted_domain_scores_zero_regardless_of_signals() {
        let cfg = EvaluatorConfig {
            blacklist: DomainList::new(["junk.example"]),
            allowlist: DomainList::new(["junk.example"]),
            ..EvaluatorConfig::default()
        };
        let ev = evidence("https://news.junk.example/a", 8, &"x".repeat(200));
        assert_eq!(
            credibility_score(&ev.source_url, Some(&ev), &cfg),
            0.0
        );
    }

    #[test]
    fn full_signal_allowlisted_source_scores_one() {
        let cfg = EvaluatorConfig {
            allowlist: DomainList::new(["gov.au"]),
            ..EvaluatorConfig::default()
        };
        let ev = evidence(
            "https://www.nationalsecurity.gov.au/what-australia-is-doing/terrorist-organisations",
            4,
            &"The listed terrorist organisations under Australian law are organisations, not individuals.".repeat(2),
        );
        let score = credibility_score(&ev.source_url, Some(&ev), &cfg);
        assert_eq!(score, 1.0);
        assert!(score >= cfg.credibility_threshold);
        // Determinism.
        assert_eq!(score, credibility_score(&ev.source_url, Some(&ev), &cfg));
    }

    #[test]
    fn feature_weights_are_individually_observable() {
        let cfg = EvaluatorConfig::default();
        let bare = Url::parse("http://plain.test/a/b/c/d/e").unwrap();
        assert_eq!(credibility_score(&bare, None, &cfg), 0.0);
        let https_deep = Url::parse("https://plain.test/a/b/c/d/e").unwrap();
        assert!((credibility_score(&https_deep, None, &cfg) - WEIGHT_HTTPS).abs() < 1e-12);
        let https_shallow = Url::parse("https://plain.test/a/b").unwrap();
        assert!(
            (credibility_score(&https_shallow, None, &cfg) - (WEIGHT_HTTPS + WEIGHT_SHALLOW_PATH))
                .abs()
                < 1e-12
        );
        let ev = evidence("https://plain.test/a", 4, &"x".repeat(TEXT_LENGTH_FLOOR));
        assert!(
            (credibility_score(&ev.source_url, Some(&ev), &cfg)
                - (WEIGHT_HTTPS + WEIGHT_SHALLOW_PATH + WEIGHT_EVENT_PRESENT + WEIGHT_TEXT_LENGTH))
                .abs()
                < 1e-12
        );
        // Short summary and no Event dimension drop those two weights.
        let thin = evidence("https://plain.test/a", 1, "short");
        let thin_only_people = {
            let mut e = thin.clone();
            e.dimensions = EvidenceDimensions {
                people: Some("p".into()),
                ..Default::default()
            };
            e
        };
        assert!(
            (credibility_score(&thin_only_people.source_url, Some(&thin_only_people), &cfg)
                - (WEIGHT_HTTPS + WEIGHT_SHALLOW_PATH))
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn domain_list_matches_at_label_boundaries() {
        let list = DomainList::new(["example.com", ".org"]);
        assert!(list.matches("example.com"));
        assert!(list.matches("news.example.com"));
        assert!(list.matches("EXAMPLE.COM"));
        assert!(!list.matches("notexample.com"));
        assert!(!list.matches("example.com.evil.test"));
        assert!(list.matches("archive.org"));
        assert!(!list.matches("fakeorg"));
    }

    #[test]
    fn domain_list_file_supports_comments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blacklist.txt");
        std::fs::write(&path, "# known junk\njunk.example\n\nspam.test # inline note\n").unwrap();
        let list = DomainList::from_file(&path).unwrap();
        assert!(list.matches("junk.example"));
        assert!(list.matches("www.spam.test"));
        assert!(!list.matches("fine.test"));
    }

    // ---- filtering ----------------------------------------------------------

    #[test]
    fn filter_keeps_items_at_or_above_threshold_in_order() {
        let cfg = EvaluatorConfig::default();
        let items = vec![
            scored("https://a.test/", 0.9, 0.0, 0.0, 0.5),
            scored("https://b.test/", 0.3, 0.0, 0.0, 0.5),
            scored("https://c.test/", 0.6, 0.0, 0.0, 0.5),
        ];
        let kept = filter_by_credibility(items.clone(), &cfg);
        assert_eq!(urls(&kept), vec!["https://a.test/", "https://c.test/"]);

        let none = filter_by_credibility(
            items.clone(),
            &EvaluatorConfig {
                credibility_threshold: 0.95,
                ..EvaluatorConfig::default()
            },
        );
        assert!(none.is_empty());

        let all = filter_by_credibility(
            items.clone(),
            &EvaluatorConfig {
                credibility_threshold: 0.0,
                ..EvaluatorConfig::default()
            },
        );
        assert_eq!(all.len(), items.len());
    }

    // ---- relevance & the async pass ----------------------------------------

    fn providers_with_embed(embed: FakeEmbed) -> (ProviderSet, Arc<FakeEmbed>) {
        let embed = Arc::new(embed);
        (
            ProviderSet {
                chat: Arc::new(FakeChat::new(|_| Ok(String::new()))),
                embed: embed.clone(),
                text_search: Arc::new(FakeTextSearch::new(|_, _| Ok(vec![]))),
                image_search: Arc::new(FakeImageSearch::new(|_, _| Ok(vec![]))),
                fetcher: Arc::new(FakeFetcher::new(|url: &Url| {
                    Ok(RawDocument {
                        url: url.clone(),
                        content_type: "text/plain".into(),
                        body: vec![],
                    })
                })),
            },
            embed,
        )
    }

    fn rep(values: &[f64]) -> ClaimRepresentation {
        ClaimRepresentation {
            vector: EmbeddingVector {
                values: values.to_vec(),
            },
        }
    }

    #[tokio::test]
    async fn relevance_of_identical_text_is_one() {
        let (providers, _) = providers_with_embed(FakeEmbed::hashed(8));
        let meter = StageMeter::new();
        let claim_text = "the sky is green".to_string();
        let (mut vectors, _) = providers.embed.embed(std::slice::from_ref(&claim_text)).await.unwrap();
        let claim_rep = ClaimRepresentation {
            vector: vectors.pop().unwrap(),
        };
        let ev = evidence("https://a.test/", 0, &claim_text);
        let r = relevance_score(&providers, &claim_rep, &ev, &meter).await.unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[tokio::test]
    async fn orthogonal_and_antiparallel_vectors_clamp_to_zero() {
        let (providers, _) = providers_with_embed(FakeEmbed::new(|texts| {
            Ok(texts
                .iter()
                .map(|t| {
                    if t.contains("orthogonal") {
                        vec![0.0, 1.0]
                    } else {
                        vec![-1.0, 0.0]
                    }
                })
                .collect())
        }));
        let meter = StageMeter::new();
        let claim_rep = rep(&[1.0, 0.0]);
        let ortho = evidence("https://a.test/", 0, "orthogonal text");
        let anti = evidence("https://b.test/", 0, "opposite text");
        assert_eq!(
            relevance_score(&providers, &claim_rep, &ortho, &meter).await.unwrap(),
            0.0
        );
        assert_eq!(
            relevance_score(&providers, &claim_rep, &anti, &meter).await.unwrap(),
            0.0
        );
    }

    #[tokio::test]
    async fn rank_evidence_batches_embeddings_and_skips_filtered_items() {
        let (providers, embed) = providers_with_embed(FakeEmbed::new(|texts| {
            Ok(texts
                .iter()
                .map(|t| if t.contains("match") { vec![1.0, 0.0] } else { vec![0.6, 0.8] })
                .collect())
        }));
        let cfg = EvaluatorConfig {
            blacklist: DomainList::new(["junk.example"]),
            ..EvaluatorConfig::default()
        };
        let meter = StageMeter::new();
        let long = "x".repeat(TEXT_LENGTH_FLOOR);
        let evidence_list = vec![
            evidence("https://one.test/a", 4, &format!("match {long}")),
            evidence("https://junk.example/a", 8, &format!("match {long}")),
            evidence("https://two.test/b", 2, &format!("other {long}")),
        ];
        let ranked = rank_evidence(&providers, &rep(&[1.0, 0.0]), evidence_list, &cfg, &meter)
            .await
            .unwrap();
        // The blacklisted item was filtered before any embedding happened.
        assert_eq!(embed.requests().len(), 1);
        assert_eq!(embed.requests()[0].len(), 2);
        assert_eq!(
            urls(&ranked),
            vec!["https://one.test/a", "https://two.test/b"]
        );
        // r=1.0, m=0.5 → q=0.75; r=0.6, m=0.25 → q=0.425.
        assert!((ranked[0].quality - 0.75).abs() < 1e-12);
        assert!((ranked[1].quality - 0.425).abs() < 1e-12);
        for item in &ranked {
            let expected = cfg.alpha * item.relevance + (1.0 - cfg.alpha) * item.integrity;
            assert!((item.quality - expected).abs() < 1e-12);
        }
    }

    #[tokio::test]
    async fn rank_evidence_on_empty_input_is_empty_without_calls() {
        let (providers, embed) = providers_with_embed(FakeEmbed::hashed(4));
        let ranked = rank_evidence(
            &providers,
            &rep(&[1.0]),
            vec![],
            &EvaluatorConfig::default(),
            &StageMeter::new(),
        )
        .await
        .unwrap();
        assert!(ranked.is_empty());
        assert!(embed.requests().is_empty());
    }

    #[tokio::test]
    async fn claim_representation_embeds_text_plus_image_notes() {
        let (providers, embed) = providers_with_embed(FakeEmbed::hashed(4));
        let meter = StageMeter::new();
        let claim = Claim {
            id: "c1".into(),
            text: "a claim".into(),
            image: None,
            gold_label: None,
            published_at: None,
        };
        let interp = InterpretationResult {
            sub_claims: vec![],
            image_notes: Some("a red car".into()),
        };
        ClaimRepresentation::build(&providers, &claim, &interp, &meter)
            .await
            .unwrap();
        assert_eq!(embed.requests()[0], vec!["a claim\na red car".to_string()]);
        let (costs, timings) = meter.snapshot();
        assert_eq!(costs.total(), crate::ledger::UsdMicros::ZERO);
        assert!(timings.retrieve >= std::time::Duration::ZERO);
    }

    #[tokio::test]
    async fn zero_claim_vector_is_rejected() {
        let (providers, _) = providers_with_embed(FakeEmbed::new(|texts| {
            Ok(texts.iter().map(|_| vec![0.0, 0.0]).collect())
        }));
        let claim = Claim {
            id: "c1".into(),
            text: "a claim".into(),
            image: None,
            gold_label: None,
            published_at: None,
        };
        let err = ClaimRepresentation::build(
            &providers,
            &claim,
            &InterpretationResult {
                sub_claims: vec![],
                image_notes: None,
            },
            &StageMeter::new(),
        )
        .await
        .unwrap_err();
        assert!(matches!(err, Error::MalformedResponse { .. }));
    }

    #[test]
    fn config_validation_rejects_out_of_range_values() {
        assert!(EvaluatorConfig::default().validate().is_ok());
        assert!(EvaluatorConfig {
            alpha: 1.2,
            ..EvaluatorConfig::default()
        }
        .validate()
        .is_err());
        assert!(EvaluatorConfig {
            credibility_threshold: -0.1,
            ..EvaluatorConfig::default()
        }
        .validate()
        .is_err());
        assert!(EvaluatorConfig {
            top_k: 0,
            ..EvaluatorConfig::default()
        }
        .validate()
        .is_err());
    }
}
