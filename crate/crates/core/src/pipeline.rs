//! Per-claim orchestration: compose interpretation, retrieval, extraction,
//! evaluation, and the verification protocol under a selected run mode.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::claim::Claim;
use crate::error::{Error, Result};
use crate::evaluate::{
    credibility_score, integrity_score, rank_evidence, ClaimRepresentation, EvaluatorConfig,
    ScoredEvidence,
};
use crate::extract::{extract_pool, ExtractOptions, StructuredEvidence};
use crate::interpret::{interpret_claim, passthrough_interpretation, InterpretationResult};
use crate::label::LabelMap;
use crate::ledger::StageMeter;
use crate::prompts::PromptSet;
use crate::providers::ProviderSet;
use crate::retrieve::{locate_candidates, CandidatePool};
use crate::verify::{direct_verify, run_verification_protocol, VerificationReport};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    Full,
    /// Skip interpretation; the whole claim text becomes the single query.
    NoInterpret,
    /// Replace ranking with a seeded uniform sample of the filtered pool.
    RandomEvidence,
    /// Zero-shot verification with no retrieval at all.
    Direct,
}

impl std::fmt::Display for RunMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunMode::Full => "full",
            RunMode::NoInterpret => "no_interpret",
            RunMode::RandomEvidence => "random_evidence",
            RunMode::Direct => "direct",
        })
    }
}

impl std::str::FromStr for RunMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(RunMode::Full),
            "no_interpret" => Ok(RunMode::NoInterpret),
            "random_evidence" => Ok(RunMode::RandomEvidence),
            "direct" => Ok(RunMode::Direct),
            other => Err(Error::InvalidConfig(format!(
                "unknown run mode {other:?}; expected full, no_interpret, random_evidence, or direct"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(flatten)]
    pub evaluator: EvaluatorConfig,
    pub max_subclaims: usize,
    pub per_query_limit: usize,
    pub max_extract_chars: usize,
    pub search_parallelism: usize,
    pub extract_parallelism: usize,
    /// Concurrent claims in a batch; each claim already fans out internally.
    pub claim_parallelism: usize,
    /// Root seed for the random-evidence ablation.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            evaluator: EvaluatorConfig::default(),
            max_subclaims: 4,
            per_query_limit: 10,
            max_extract_chars: crate::extract::DEFAULT_MAX_EXTRACT_CHARS,
            search_parallelism: 8,
            extract_parallelism: crate::extract::DEFAULT_EXTRACT_PARALLELISM,
            claim_parallelism: 2,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.evaluator.validate()?;
        for (name, value) in [
            ("max_subclaims", self.max_subclaims),
            ("per_query_limit", self.per_query_limit),
            ("max_extract_chars", self.max_extract_chars),
            ("search_parallelism", self.search_parallelism),
            ("extract_parallelism", self.extract_parallelism),
            ("claim_parallelism", self.claim_parallelism),
        ] {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

/// Stable per-claim seed so batch order cannot change a claim's sample.
fn claim_seed(seed: u64, claim_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(claim_id.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is longer than 8 bytes"))
}

/// Uniform sample of up to top_k items from the credibility-filtered pool;
/// sampled items carry zero relevance, so quality reduces to the integrity
/// term.
fn sample_random_evidence(
    evidence: Vec<StructuredEvidence>,
    cfg: &PipelineConfig,
    claim_id: &str,
) -> Vec<ScoredEvidence> {
    let survivors: Vec<(StructuredEvidence, f64)> = evidence
        .into_iter()
        .filter_map(|ev| {
            let credibility = credibility_score(&ev.source_url, Some(&ev), &cfg.evaluator);
            (credibility >= cfg.evaluator.credibility_threshold).then_some((ev, credibility))
        })
        .collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(claim_seed(cfg.seed, claim_id));
    let amount = cfg.evaluator.top_k.min(survivors.len());
    let picked = rand::seq::index::sample(&mut rng, survivors.len(), amount);
    let mut survivors: Vec<Option<(StructuredEvidence, f64)>> =
        survivors.into_iter().map(Some).collect();
    picked
        .into_iter()
        .map(|i| {
            let (ev, credibility) = survivors[i].take().expect("index sampled once");
            let integrity = integrity_score(&ev);
            ScoredEvidence::new(ev, credibility, 0.0, integrity, cfg.evaluator.alpha)
        })
        .collect()
}

/// Run one claim end to end and assemble its report. Costs and timings
/// accumulate on a fresh meter per claim.
pub async fn run_claim(
    providers: &ProviderSet,
    prompts: &PromptSet,
    labels: &LabelMap,
    cfg: &PipelineConfig,
    claim: &Claim,
    mode: RunMode,
) -> Result<VerificationReport> {
    let meter = StageMeter::new();
    run_claim_with_meter(providers, prompts, labels, cfg, claim, mode, &meter).await
}

/// As [`run_claim`], but metering on a caller-owned meter so spend is
/// observable even when the run fails partway.
pub async fn run_claim_with_meter(
    providers: &ProviderSet,
    prompts: &PromptSet,
    labels: &LabelMap,
    cfg: &PipelineConfig,
    claim: &Claim,
    mode: RunMode,
    meter: &StageMeter,
) -> Result<VerificationReport> {
    cfg.validate()?;
    claim.validate()?;

    if mode == RunMode::Direct {
        return direct_verify(providers, prompts, claim, meter).await;
    }

    let interpretation: InterpretationResult = match mode {
        RunMode::NoInterpret => passthrough_interpretation(claim)?,
        _ => interpret_claim(providers, prompts, claim, cfg.max_subclaims, meter).await?,
    };

    // Total search failure degrades to a no-evidence verdict rather than
    // aborting: the protocol still forces a binary answer.
    let pool = match locate_candidates(
        providers,
        &interpretation,
        claim,
        cfg.per_query_limit,
        cfg.search_parallelism,
        meter,
    )
    .await
    {
        Ok(pool) => pool,
        Err(Error::RetrievalEmpty(reason)) => {
            tracing::warn!(claim = %claim.id, reason = %reason, "retrieval empty; verifying without evidence");
            CandidatePool::default()
        }
        Err(other) => return Err(other),
    };

    let outcome = extract_pool(
        providers,
        prompts,
        &pool,
        ExtractOptions {
            max_extract_chars: cfg.max_extract_chars,
            parallelism: cfg.extract_parallelism,
        },
        meter,
    )
    .await;

    let ranked = if outcome.evidence.is_empty() {
        Vec::new()
    } else if mode == RunMode::RandomEvidence {
        sample_random_evidence(outcome.evidence, cfg, &claim.id)
    } else {
        let claim_rep = ClaimRepresentation::build(providers, claim, &interpretation, meter).await?;
        rank_evidence(providers, &claim_rep, outcome.evidence, &cfg.evaluator, meter).await?
    };

    run_verification_protocol(providers, prompts, labels, claim, &ranked, &cfg.evaluator, meter)
        .await
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claim::BinaryLabel;
    use crate::ledger::UsdMicros;
    use crate::providers::fake::{
        FakeChat, FakeEmbed, FakeFetcher, FakeImageSearch, FakeTextSearch,
    };
    use crate::providers::{Channel, ChatRequest, RawDocument, SearchResult};
    use std::sync::Arc;
    use url::Url;

    fn claim(id: &str, text: &str) -> Claim {
        Claim {
            id: id.into(),
            text: text.into(),
            image: None,
            gold_label: None,
            published_at: None,
        }
    }

    /// A chat fake that answers every pipeline stage by recognizing the
    /// instruction in the latest message.
    fn scripted_chat() -> FakeChat {
        FakeChat::new(|req: &ChatRequest| {
            let last = req.messages.last().expect("nonempty request").joined_text();
            if last.contains("multimodal misinformation interpreter") {
                Ok("1. Sub-claim: the sky over the city turned green\n   Query: green sky city\n\n2. Sub-claim: it happened this week\n   Query: green sky sighting date".into())
            } else if last.contains("summarize the provided article") {
                let marker = last
                    .rsplit("article body ")
                    .next()
                    .unwrap_or("?")
                    .split_whitespace()
                    .next()
                    .unwrap_or("?")
                    .to_string();
                Ok(format!(
                    "People: observers\nEvent: a green sky over the city\nLocation: not mentioned\nTime: this week\nSummary: Page {marker} reports a widely shared account of a green sky appearing over the city this week."
                ))
            } else if last.contains("The following list is the evidence") {
                Ok("Received and memorized.".into())
            } else if last.contains("Verify the claim based on the evidence") {
                Ok("Verdict: False.\n\nEvidence:\n\n1. The evidence 1 refutes the event of the claim.\n\nSummary: The reports contradict the claim.".into())
            } else if last.contains("do nothing but memorize it") {
                Ok("Memorized.".into())
            } else if last.contains("answer with 'no'") {
                Ok("No, I cannot verify this claim.".into())
            } else {
                Err(Error::MalformedResponse {
                    provider: "fake-chat".into(),
                    reason: format!("unscripted prompt: {}", &last[..last.len().min(60)]),
                })
            }
        })
    }

    fn search_hits(query: &str, limit: usize) -> Vec<SearchResult> {
        let slug: String = query
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect();
        (0..2.min(limit))
            .map(|i| SearchResult {
                url: Url::parse(&format!("https://{slug}.test/story-{i}")).unwrap(),
                title: format!("{query} {i}"),
                snippet: "snippet".into(),
                channel: Channel::TextSearch,
            })
            .collect()
    }

    fn full_provider_set() -> ProviderSet {
        ProviderSet {
            chat: Arc::new(scripted_chat().with_cost("0.01".parse().unwrap())),
            embed: Arc::new(FakeEmbed::hashed(16).with_cost("0.002".parse().unwrap())),
            text_search: Arc::new(
                FakeTextSearch::new(|q: &str, limit| Ok(search_hits(q, limit)))
                    .with_cost("0.005".parse().unwrap()),
            ),
            image_search: Arc::new(FakeImageSearch::new(|_, _| Ok(vec![]))),
            fetcher: Arc::new(FakeFetcher::new(|url: &Url| {
                Ok(RawDocument {
                    url: url.clone(),
                    content_type: "text/html".into(),
                    body: format!("<p>article body {}</p>", url.path()).into_bytes(),
                })
            })),
        }
    }

    async fn run(
        providers: &ProviderSet,
        cfg: &PipelineConfig,
        claim: &Claim,
        mode: RunMode,
    ) -> Result<VerificationReport> {
        run_claim(
            providers,
            &PromptSet::default(),
            &LabelMap::default(),
            cfg,
            claim,
            mode,
        )
        .await
    }

    #[tokio::test]
    async fn full_mode_produces_a_grounded_report_with_exact_accounting() {
        let providers = full_provider_set();
        let cfg = PipelineConfig::default();
        let c = claim("c1", "the sky turned green over the city this week");
        let report = run(&providers, &cfg, &c, RunMode::Full).await.unwrap();

        assert_eq!(report.verdict, Some(BinaryLabel::False));
        assert!(!report.abstained);
        assert!(!report.insufficient_evidence);
        // 2 queries × 2 hits, all distinct URLs, all extracted.
        assert_eq!(report.evidence_count(), 4);
        assert_eq!(report.citations.len(), 1);
        assert_eq!(report.justification_summary, "The reports contradict the claim.");
        for window in report.evidence.windows(2) {
            assert!(window[0].quality >= window[1].quality);
        }

        // Bucket-exact cost: interpret chat (0.01) + 2 searches (0.005) +
        // 2 embedding calls (0.002) → retrieve; 4 extraction chats →
        // summarize; 3 protocol turns → verify.
        assert_eq!(report.cost.retrieve, "0.024".parse::<UsdMicros>().unwrap());
        assert_eq!(report.cost.summarize, "0.04".parse::<UsdMicros>().unwrap());
        assert_eq!(report.cost.verify, "0.03".parse::<UsdMicros>().unwrap());
        assert_eq!(report.cost.total(), "0.094".parse::<UsdMicros>().unwrap());
        assert_eq!(
            report.timings.total(),
            report.timings.retrieve + report.timings.summarize + report.timings.verify
        );
    }

    #[tokio::test]
    async fn no_interpret_mode_sends_one_normalized_query() {
        let text_search = Arc::new(
            FakeTextSearch::new(|q: &str, limit| Ok(search_hits(q, limit))),
        );
        let providers = ProviderSet {
            text_search: text_search.clone(),
            ..full_provider_set()
        };
        let c = claim("c2", "  The   sky turned GREEN  ");
        let report = run(&providers, &PipelineConfig::default(), &c, RunMode::NoInterpret)
            .await
            .unwrap();
        assert_eq!(text_search.queries(), vec!["The sky turned GREEN".to_string()]);
        assert_eq!(report.verdict, Some(BinaryLabel::False));
        assert_eq!(report.evidence_count(), 2);
    }

    #[tokio::test]
    async fn random_evidence_mode_is_seed_deterministic_and_post_filter() {
        let providers = full_provider_set();
        let mut cfg = PipelineConfig {
            evaluator: EvaluatorConfig {
                top_k: 2,
                blacklist: crate::evaluate::DomainList::new(["green-sky-city.test"]),
                ..EvaluatorConfig::default()
            },
            seed: 7,
            ..PipelineConfig::default()
        };
        let c = claim("c3", "the sky turned green over the city this week");

        let first = run(&providers, &cfg, &c, RunMode::RandomEvidence).await.unwrap();
        let second = run(&providers, &cfg, &c, RunMode::RandomEvidence).await.unwrap();
        assert_eq!(
            serde_json::to_string(&first).unwrap(),
            serde_json::to_string(&second).unwrap()
        );
        // Both hits from the blacklisted domain were filtered before sampling.
        assert_eq!(first.evidence_count(), 2);
        for item in &first.evidence {
            assert_ne!(item.url.host_str(), Some("green-sky-city.test"));
            assert_eq!(item.relevance, 0.0);
            assert!((item.quality - 0.5 * item.integrity).abs() < 1e-12);
        }

        cfg.seed = 8;
        let third = run(&providers, &cfg, &c, RunMode::RandomEvidence).await.unwrap();
        assert_eq!(third.evidence_count(), 2);
        // Different seed may pick a different subset; it must still be
        // drawn from the surviving pool.
        for item in &third.evidence {
            assert_ne!(item.url.host_str(), Some("green-sky-city.test"));
        }
    }

    #[tokio::test]
    async fn direct_mode_skips_retrieval_entirely() {
        let text_search = Arc::new(FakeTextSearch::new(|_, _| {
            panic!("direct mode must not search")
        }));
        let providers = ProviderSet {
            text_search,
            ..full_provider_set()
        };
        let report = run(
            &providers,
            &PipelineConfig::default(),
            &claim("c4", "some claim"),
            RunMode::Direct,
        )
        .await
        .unwrap();
        assert!(report.abstained);
        assert_eq!(report.evidence_count(), 0);
        assert!(report.insufficient_evidence);
    }

    #[tokio::test]
    async fn total_search_failure_degrades_to_no_evidence_verdict() {
        let providers = ProviderSet {
            text_search: Arc::new(FakeTextSearch::new(|_, _| {
                Err(Error::ProviderUnavailable {
                    provider: "search".into(),
                    reason: "offline".into(),
                })
            })),
            ..full_provider_set()
        };
        let report = run(
            &providers,
            &PipelineConfig::default(),
            &claim("c5", "the sky turned green"),
            RunMode::Full,
        )
        .await
        .unwrap();
        assert!(report.insufficient_evidence);
        assert_eq!(report.evidence_count(), 0);
        assert!(report.verdict.is_some());
    }

    #[test]
    fn run_mode_parses_and_displays_symmetrically() {
        for mode in [
            RunMode::Full,
            RunMode::NoInterpret,
            RunMode::RandomEvidence,
            RunMode::Direct,
        ] {
            assert_eq!(mode.to_string().parse::<RunMode>().unwrap(), mode);
        }
        assert!("verbose".parse::<RunMode>().is_err());
        assert_eq!(serde_json::to_string(&RunMode::RandomEvidence).unwrap(), "\"random_evidence\"");
    }

    #[test]
    fn claim_seeds_differ_by_claim_and_root() {
        assert_eq!(claim_seed(7, "a"), claim_seed(7, "a"));
        assert_ne!(claim_seed(7, "a"), claim_seed(7, "b"));
        assert_ne!(claim_seed(7, "a"), claim_seed(8, "a"));
    }

    #[test]
    fn config_validation_covers_every_positive_field() {
        assert!(PipelineConfig::default().validate().is_ok());
        for patch in [
            |c: &mut PipelineConfig| c.max_subclaims = 0,
            |c: &mut PipelineConfig| c.per_query_limit = 0,
            |c: &mut PipelineConfig| c.max_extract_chars = 0,
            |c: &mut PipelineConfig| c.search_parallelism = 0,
            |c: &mut PipelineConfig| c.extract_parallelism = 0,
        ] {
            let mut cfg = PipelineConfig::default();
            patch(&mut cfg);
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn pipeline_config_deserializes_with_flattened_evaluator_fields() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"alpha": 0.75, "top_k": 3, "max_subclaims": 2, "blacklist": ["junk.example"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.evaluator.alpha, 0.75);
        assert_eq!(cfg.evaluator.top_k, 3);
        assert_eq!(cfg.max_subclaims, 2);
        assert!(cfg.evaluator.blacklist.matches("junk.example"));
        assert_eq!(cfg.per_query_limit, 10);
    }
}
