//! Regenerates the committed fixture scenarios under `fixtures/`: scripted
//! provider traffic recorded into replayable cassettes, plus the claims,
//! configs, datasets, and expected outputs the integration tests assert
//! against.
//!
//! Deterministic by construction — rerunning must produce byte-identical
//! files. Every scenario is validated here, at generation time, so a broken
//! fixture can never be committed silently.
//!
//! ```text
//! cargo run -p aletheia-core --example gen_fixtures
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use url::Url;

use aletheia_core::claim::{BinaryLabel, Claim, ImageRef};
use aletheia_core::error::Error;
use aletheia_core::evaluate::{cosine_similarity, credibility_score, EvaluatorConfig};
use aletheia_core::extract::{EvidenceDimensions, StructuredEvidence};
use aletheia_core::harness::{compute_metrics, load_dataset, run_batch};
use aletheia_core::label::LabelMap;
use aletheia_core::pipeline::{run_claim, PipelineConfig, RunMode};
use aletheia_core::prompts::PromptSet;
use aletheia_core::providers::cassette::Cassette;
use aletheia_core::providers::fake::{
    FakeChat, FakeEmbed, FakeFetcher, FakeImageSearch, FakeTextSearch,
};
use aletheia_core::providers::replay::{Recorder, ReplayProviders};
use aletheia_core::providers::{Channel, EmbeddingVector, ProviderSet, RawDocument, SearchResult};
use aletheia_core::verify::VerificationReport;

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) {
    let mut out = serde_json::to_string_pretty(value).expect("fixture value serializes");
    out.push('\n');
    std::fs::create_dir_all(path.parent().expect("fixture paths have parents")).unwrap();
    std::fs::write(path, out).unwrap();
}

fn report_json(report: &VerificationReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

// --- golden-1 scenario ---------------------------------------------------

const GOLDEN_CLAIM_TEXT: &str =
    "Australia declares George Soros a global terrorist!! Do you support this? Yes or No";
const GOLDEN_IMAGE: &str = "https://images.example/soros-portrait.jpg";
const GOLDEN_QUERY: &str = "\"Australia government\" \"George Soros\" \"terrorism\"";
const GOLDEN_IMAGE_NOTES: &str = "An elderly man wearing glasses, identified as George Soros.";

const GOLDEN_INTERPRETATION: &str = "1. Sub-claim: Australia declared George Soros a global terrorist.\n   Query: \"Australia government\" \"George Soros\" \"terrorism\"\n\nImage notes: An elderly man wearing glasses, identified as George Soros.";

const GOLDEN_VERDICT: &str = "Verdict: False.\n\nEvidence:\n\n1. The evidence 1 refutes the event of the claim.\n\n2. The evidence 2 refutes the event of the claim.\n\n4. The evidence 4 supports the background of the claim.\n\nSummary: Australia has no legal framework to list individuals as terrorists, and the claim about George Soros is unfounded.";

/// One candidate page: search hit, fetched body, scripted extraction, and the
/// design targets the generator re-checks before recording anything.
struct PageSpec {
    url: &'static str,
    channel: Channel,
    title: &'static str,
    snippet: &'static str,
    body: &'static str,
    /// Slot values in schema order; None renders as "Not mentioned."
    slots: [Option<&'static str>; 8],
    summary: &'static str,
    /// Cosine of the summary embedding against the claim representation.
    /// Only consulted for pages that survive the credibility filter.
    cos: f64,
    expected_credibility: f64,
}

fn golden_pages() -> Vec<PageSpec> {
    vec![
        PageSpec {
            url: "https://worldnewsdaily.example/politics/australia-soros-terror-designation",
            channel: Channel::TextSearch,
            title: "Australia 'declares Soros a terrorist', viral post says",
            snippet: "A post spreading across platforms claims Australia has designated George Soros.",
            body: "A post circulating widely on social media claims the Australian government has declared George Soros a global terrorist. The post pairs the text with a portrait of the financier and urges readers to share their support. Officials have not commented on the post's origin.",
            slots: [
                Some("George Soros"),
                Some("A viral post claims Australia designated George Soros a global terrorist."),
                None,
                None,
                None,
                None,
                None,
                None,
            ],
            summary: "A viral post claims Australia designated George Soros a global terrorist, spreading quickly across social media platforms.",
            cos: 0.3,
            expected_credibility: 0.6,
        },
        PageSpec {
            url: "http://patriotwire.example/breaking/soros/terror/listing/2023/full-story",
            channel: Channel::TextSearch,
            title: "BREAKING: Soros finally listed",
            snippet: "He has finally been listed, share before this is taken down.",
            body: "They have finally done it. Share this everywhere before it is taken down. The globalists cannot hide the listing any longer.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "A breathless repost of the Soros terror claim.",
            cos: 0.05,
            expected_credibility: 0.0,
        },
        PageSpec {
            url: "https://www.nationalsecurity.gov.au/what-australia-is-doing/terrorist-organisations",
            channel: Channel::TextSearch,
            title: "Terrorist organisations | Australian National Security",
            snippet: "The legal framework and procedures for listing terrorist organisations in Australia.",
            body: "The Australian National Security website outlines the legal framework and procedures for designating terrorist organisations under the Criminal Code Act 1995. Listing decisions apply to organisations and follow a statutory review process. The Minister must be satisfied on reasonable grounds before an organisation is listed, and each listing is re-examined on a fixed cycle.",
            slots: [
                None,
                Some("The Australian National Security website outlines the legal framework and procedures for designating terrorist organisations."),
                Some("Australia"),
                Some("Under the Criminal Code Act 1995, with listings reviewed on a statutory cycle."),
                None,
                Some("Only organisations, not individuals, can be listed as terrorist entities under Australian law."),
                None,
                None,
            ],
            summary: "The Australian National Security website outlines the legal framework and procedures for designating terrorist organisations under the Criminal Code Act 1995.",
            cos: 0.4, // placeholder; the exact vector is tuned at generation time
            expected_credibility: 1.0,
        },
        PageSpec {
            url: "https://reuters.example/world/asia-pacific/soros-australia-claim",
            channel: Channel::TextSearch,
            title: "Fact check: Australia has not designated George Soros",
            snippet: "No Australian government record supports the viral designation claim.",
            body: "Reuters examined the viral claim that Australia declared George Soros a global terrorist. A search of the federal register and the national security listings in May 2023 found no such designation, and a government spokesperson called the claim false.",
            slots: [
                None,
                Some("Fact check: Australia has not declared George Soros a terrorist; no such designation exists."),
                None,
                Some("May 2023"),
                None,
                None,
                None,
                None,
            ],
            summary: "Reuters fact checkers found no Australian government record designating George Soros a terrorist, and officials denied the viral claim.",
            cos: 0.5,
            expected_credibility: 0.6,
        },
        PageSpec {
            url: "http://conspiracydigest.example/s/australia-soros",
            channel: Channel::TextSearch,
            title: "What they are not telling you about Soros",
            snippet: "The truth about the Soros listing.",
            body: "Sources say the announcement is being suppressed. We will keep digging.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "An unsourced page alleging a suppressed announcement.",
            cos: 0.05,
            expected_credibility: 0.1,
        },
        PageSpec {
            url: "https://apnews.example/article/fact-check-soros-australia",
            channel: Channel::TextSearch,
            title: "Posts falsely claim Australia declared Soros a terrorist",
            snippet: "The story traces back to a satirical article reposted without its disclaimer.",
            body: "AP News traced the circulating story to a satirical website whose article was reposted without its disclaimer. George Soros has not been designated under any Australian instrument, and the satire site later acknowledged the piece was fiction.",
            slots: [
                Some("George Soros"),
                Some("Posts falsely claim Australia declared George Soros a terrorist."),
                None,
                None,
                None,
                Some("The story originated on a satirical website and was reposted without its disclaimer."),
                None,
                None,
            ],
            summary: "AP News reports the circulating Soros terror designation story is fabricated, tracing it to a satirical website repost.",
            cos: 0.2,
            expected_credibility: 0.6,
        },
        PageSpec {
            url: "https://blogspot.example/users/truthseeker88/posts/2023/05/soros-australia-terror/comments",
            channel: Channel::TextSearch,
            title: "my thoughts on the soros listing",
            snippet: "personal blog post about the listing rumour",
            body: "i saw the post about soros being listed in australia and i think people should look into it more. comments are open.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "A personal blog post repeating the rumour.",
            cos: 0.05,
            expected_credibility: 0.2,
        },
        PageSpec {
            url: "http://freedomfeed.example/latest/soros",
            channel: Channel::TextSearch,
            title: "Soros listing rumour spreads",
            snippet: "The rumour is everywhere today.",
            body: "The rumour spread across several channels today. No documents were provided.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "An aggregator page noting the rumour spread.",
            cos: 0.05,
            expected_credibility: 0.1,
        },
        PageSpec {
            url: "https://tabloidzone.example/celebrity/gossip/soros/terror/australia/story",
            channel: Channel::TextSearch,
            title: "Soros BANNED down under?!",
            snippet: "You will not believe what Australia just did.",
            body: "Tabloid Zone hears Australia has finally moved against George Soros, declaring him a terrorist. Insiders are stunned. More to come.",
            slots: [
                Some("George Soros"),
                Some("A tabloid repeats that Australia declared George Soros a terrorist."),
                None,
                None,
                None,
                None,
                None,
                None,
            ],
            summary: "A tabloid gossip page repeating the designation rumour.",
            cos: 0.1,
            expected_credibility: 0.4,
        },
        PageSpec {
            url: "http://clickmagnet.example/a/b/c/d/e/soros",
            channel: Channel::TextSearch,
            title: "10 facts about Soros (number 7 will shock you)",
            snippet: "Clickbait listicle.",
            body: "Number seven will shock you. Click next to continue.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "A clickbait listicle with no sourcing.",
            cos: 0.05,
            expected_credibility: 0.0,
        },
        PageSpec {
            url: "https://pinterest.example/pins/soros-portrait-83621",
            channel: Channel::ImageSearch,
            title: "George Soros portrait pin",
            snippet: "Pinned portrait photo.",
            body: "Portrait photo pinned to the board World Figures. Save for later.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "An image board pin of the portrait.",
            cos: 0.05,
            expected_credibility: 0.3,
        },
        PageSpec {
            url: "https://gettyimages.example/photo/george-soros-davos",
            channel: Channel::ImageSearch,
            title: "George Soros speaks in Davos - stock photo",
            snippet: "Editorial stock photograph of George Soros at the World Economic Forum.",
            body: "Editorial stock photograph. George Soros photographed speaking at the World Economic Forum in Davos. Licensing available for editorial reuse; release not required for newsworthy events.",
            slots: [
                Some("George Soros"),
                Some("George Soros photographed speaking at the World Economic Forum in Davos."),
                None,
                None,
                None,
                None,
                None,
                None,
            ],
            summary: "A stock photography page showing George Soros at the World Economic Forum, with licensing details for editorial reuse.",
            cos: 0.1,
            expected_credibility: 0.6,
        },
        PageSpec {
            url: "http://imagehost.example/f/9912/soros.jpg.html",
            channel: Channel::ImageSearch,
            title: "soros.jpg",
            snippet: "Uploaded image.",
            body: "Uploaded image soros.jpg. Direct link below the preview.",
            slots: [None, None, None, None, None, None, None, None],
            summary: "A bare image hosting page.",
            cos: 0.05,
            expected_credibility: 0.1,
        },
        PageSpec {
            url: "https://memegen.example/m/soros-australia-terror/variants/print/share",
            channel: Channel::ImageSearch,
            title: "Soros terror meme generator",
            snippet: "Make your own variant of the meme.",
            body: "Make your own variant of the Soros terror meme. Choose a caption and share.",
            slots: [None, None, None, None, None, None, None, None],
            summary: "A meme generator page for the viral image.",
            cos: 0.05,
            expected_credibility: 0.2,
        },
        PageSpec {
            url: "https://theguardian.example/world/2023/may/soros-conspiracy-theories",
            channel: Channel::ImageSearch,
            title: "Why conspiracy theories keep returning to George Soros",
            snippet: "The financier remains a recurring target of fabricated designation claims.",
            body: "The Guardian examines why fabricated claims about George Soros keep resurfacing, from fake government designations to doctored documents. Researchers say each wave borrows imagery from earlier ones, and the portrait attached to the latest post has circulated since 2018.",
            slots: [
                None,
                Some("Recurring fabricated designation claims target George Soros."),
                None,
                None,
                None,
                Some("The portrait attached to the latest post has circulated since 2018."),
                None,
                None,
            ],
            summary: "The Guardian examines recurring conspiracy theories targeting George Soros and why they repeatedly resurface across platforms.",
            cos: 0.25,
            expected_credibility: 0.6,
        },
        PageSpec {
            url: "http://socialsnap.example/p/112233",
            channel: Channel::ImageSearch,
            title: "Shared post 112233",
            snippet: "Reshared image post.",
            body: "Reshared image post. 412 reactions.",
            slots: [None, None, None, None, None, None, None, None],
            summary: "A reshared social media image post.",
            cos: 0.05,
            expected_credibility: 0.1,
        },
        PageSpec {
            url: "https://stockphotos.example/browse/people/politicians/europe/soros/portrait",
            channel: Channel::ImageSearch,
            title: "Browse: Soros portraits",
            snippet: "Category listing of portrait photos.",
            body: "Category listing. 48 portrait photos available for licensing.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "A stock photo category listing.",
            cos: 0.05,
            expected_credibility: 0.2,
        },
        PageSpec {
            url: "https://facebook.example/groups/realnewsaustralia/permalink/5566",
            channel: Channel::ImageSearch,
            title: "Real News Australia group post",
            snippet: "Group discussion of the designation post.",
            body: "Group members discuss the designation post. 96 comments, 300 shares.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "A group discussion thread sharing the post.",
            cos: 0.05,
            expected_credibility: 0.3,
        },
        PageSpec {
            url: "http://fayerwayer.example/soros-imagen",
            channel: Channel::ImageSearch,
            title: "La imagen de Soros que circula",
            snippet: "La imagen circula en redes sociales.",
            body: "La imagen circula en redes sociales junto a una afirmación sobre Australia.",
            slots: [Some("George Soros"), None, None, None, None, None, None, None],
            summary: "A short note that the image is circulating.",
            cos: 0.05,
            expected_credibility: 0.1,
        },
        PageSpec {
            url: "https://wikimedia.example/wiki/File:George_Soros_2018.jpg",
            channel: Channel::ImageSearch,
            title: "File:George Soros 2018.jpg",
            snippet: "File description page for the 2018 portrait.",
            body: "File description page. Portrait taken in 2018. Author and license details below.",
            slots: [Some("George Soros"), None, Some("Photographed in Brussels"), None, None, None, None, None],
            summary: "A file description page for the 2018 portrait.",
            cos: 0.05,
            expected_credibility: 0.3,
        },
    ]
}

fn render_page_html(page: &PageSpec) -> String {
    format!(
        "<!doctype html>\n<html>\n<head><title>{title}</title><style>body{{margin:0}}</style></head>\n<body>\n<nav><a href=\"/\">Home</a> <a href=\"/latest\">Latest</a> <a href=\"/about\">About</a></nav>\n<article>\n<h1>{title}</h1>\n<p>{body}</p>\n</article>\n<footer>&copy; 2023 &mdash; all rights reserved</footer>\n<script>window.track&&window.track();</script>\n</body>\n</html>\n",
        title = page.title,
        body = page.body,
    )
}

/// The nine-line labeled block the extraction chat returns for a page.
fn render_extraction(page: &PageSpec) -> String {
    const LABELS: [&str; 8] = [
        "People",
        "Event",
        "Location",
        "Time",
        "Reason",
        "Background",
        "Impact",
        "Follow-up",
    ];
    let mut out = String::new();
    for (label, slot) in LABELS.iter().zip(page.slots.iter()) {
        out.push_str(label);
        out.push_str(": ");
        out.push_str(slot.unwrap_or("Not mentioned."));
        out.push('\n');
    }
    out.push_str("Summary: ");
    out.push_str(page.summary);
    out
}

/// Search an exact unit-ish vector whose clamped cosine against `[1, 0]`
/// lands bit-exactly on `target`.
fn tuned_vector(target: f64) -> Vec<f64> {
    let claim = EmbeddingVector {
        values: vec![1.0, 0.0],
    };
    let start = (1.0 - target * target).sqrt();
    let (mut lo, mut hi) = (start, start);
    for _ in 0..4096 {
        for y in [lo, hi] {
            let v = EmbeddingVector {
                values: vec![target, y],
            };
            if cosine_similarity(&claim, &v) == target {
                return vec![target, y];
            }
        }
        lo = lo.next_down();
        hi = hi.next_up();
    }
    panic!("no second component within 4096 ulps makes the cosine land on {target}");
}

fn golden_config() -> PipelineConfig {
    PipelineConfig {
        evaluator: EvaluatorConfig {
            allowlist: vec!["nationalsecurity.gov.au".to_string()].into(),
            ..EvaluatorConfig::default()
        },
        ..PipelineConfig::default()
    }
}

fn golden_claim() -> Claim {
    Claim {
        id: "golden-1".into(),
        text: GOLDEN_CLAIM_TEXT.into(),
        image: Some(ImageRef::Url(GOLDEN_IMAGE.into())),
        gold_label: Some(BinaryLabel::False),
        published_at: None,
    }
}

/// Validate the page table against the real scoring code before recording:
/// every expected credibility must be reproduced exactly.
fn check_page_design(pages: &[PageSpec], cfg: &EvaluatorConfig) {
    for page in pages {
        let url = Url::parse(page.url).expect("page urls parse");
        let dims = EvidenceDimensions {
            people: page.slots[0].map(String::from),
            event: page.slots[1].map(String::from),
            location: page.slots[2].map(String::from),
            time: page.slots[3].map(String::from),
            reason: page.slots[4].map(String::from),
            background: page.slots[5].map(String::from),
            impact: page.slots[6].map(String::from),
            followup: page.slots[7].map(String::from),
        };
        let ev = StructuredEvidence {
            source_url: url.clone(),
            dimensions: dims,
            summary: page.summary.to_string(),
            retrieved_at: 0,
            channel: page.channel,
        };
        let got = credibility_score(&url, Some(&ev), cfg);
        assert!(
            (got - page.expected_credibility).abs() < 1e-12,
            "credibility design drifted for {}: got {got}, designed {}",
            page.url,
            page.expected_credibility
        );
    }
}

fn golden_provider_set(pages: Arc<Vec<PageSpec>>) -> ProviderSet {
    let claim_repr = format!("{GOLDEN_CLAIM_TEXT}\n{GOLDEN_IMAGE_NOTES}");
    let mut embed_table: Vec<(String, Vec<f64>)> = vec![(claim_repr, vec![1.0, 0.0])];
    for page in pages.iter() {
        let vector = if page.expected_credibility == 1.0 {
            tuned_vector(page.cos)
        } else {
            vec![page.cos, (1.0 - page.cos * page.cos).sqrt()]
        };
        embed_table.push((page.summary.to_string(), vector));
    }

    let chat_pages = pages.clone();
    let chat = FakeChat::new(move |req| {
        let text = req
            .messages
            .last()
            .expect("chat requests are nonempty")
            .joined_text();
        if text.contains("misinformation interpreter") {
            return Ok(GOLDEN_INTERPRETATION.to_string());
        }
        if text.contains("do nothing but memorize") {
            return Ok("Memorized.".to_string());
        }
        if text.contains("summarize the provided article") {
            let page = chat_pages
                .iter()
                .find(|p| text.contains(p.title))
                .unwrap_or_else(|| panic!("extraction prompt names no known page: {text}"));
            return Ok(render_extraction(page));
        }
        if text.contains("The following list is the evidence") {
            return Ok("I have received the evidence list.".to_string());
        }
        if text.contains("Verify the claim based on the evidence") {
            return Ok(GOLDEN_VERDICT.to_string());
        }
        panic!("unscripted chat prompt: {text:.80}");
    })
    .with_cost("0.01".parse().unwrap())
    .with_latency(Duration::from_millis(120));

    let embed = FakeEmbed::new(move |texts| {
        texts
            .iter()
            .map(|t| {
                embed_table
                    .iter()
                    .find(|(key, _)| key == t)
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| Error::InvalidConfig(format!("unscripted embed text: {t:?}")))
            })
            .collect()
    })
    .with_cost("0.002".parse().unwrap())
    .with_latency(Duration::from_millis(30));

    let hits = |pages: &[PageSpec], channel: Channel| -> Vec<SearchResult> {
        pages
            .iter()
            .filter(|p| p.channel == channel)
            .map(|p| SearchResult {
                url: Url::parse(p.url).unwrap(),
                title: p.title.to_string(),
                snippet: p.snippet.to_string(),
                channel,
            })
            .collect()
    };

    let text_pages = pages.clone();
    let text_search = FakeTextSearch::new(move |query, _| {
        assert_eq!(query, GOLDEN_QUERY, "unexpected text query");
        Ok(hits(&text_pages, Channel::TextSearch))
    })
    .with_cost("0.005".parse().unwrap())
    .with_latency(Duration::from_millis(80));

    let image_pages = pages.clone();
    let image_search = FakeImageSearch::new(move |image, _| {
        assert_eq!(image, GOLDEN_IMAGE, "unexpected image locator");
        Ok(hits(&image_pages, Channel::ImageSearch))
    })
    .with_cost("0.008".parse().unwrap())
    .with_latency(Duration::from_millis(90));

    let fetch_pages = pages;
    let fetcher = FakeFetcher::new(move |url| {
        let page = fetch_pages
            .iter()
            .find(|p| p.url == url.as_str())
            .unwrap_or_else(|| panic!("unscripted fetch: {url}"));
        Ok(RawDocument {
            url: url.clone(),
            content_type: "text/html; charset=utf-8".into(),
            body: render_page_html(page).into_bytes(),
        })
    })
    .with_latency(Duration::from_millis(60));

    ProviderSet {
        chat: Arc::new(chat),
        embed: Arc::new(embed),
        text_search: Arc::new(text_search),
        image_search: Arc::new(image_search),
        fetcher: Arc::new(fetcher),
    }
}

async fn gen_golden() {
    let dir = fixtures_root().join("golden");
    let pages = Arc::new(golden_pages());
    let cfg = golden_config();
    let claim = golden_claim();
    check_page_design(&pages, &cfg.evaluator);

    let recorder = Recorder::new(golden_provider_set(pages.clone()));
    let report = run_claim(
        &recorder.provider_set(),
        &PromptSet::default(),
        &LabelMap::default(),
        &cfg,
        &claim,
        RunMode::Full,
    )
    .await
    .expect("golden-1 run succeeds");

    // Design targets, checked against the real pipeline output.
    assert_eq!(report.verdict, Some(BinaryLabel::False));
    assert_eq!(report.evidence.len(), 5, "exactly five uploads");
    let top = &report.evidence[0];
    assert!(top.url.as_str().contains("nationalsecurity.gov.au"));
    assert_eq!(top.credibility, 1.0);
    assert_eq!(top.integrity, 0.5);
    assert_eq!(top.relevance, 0.4);
    assert_eq!(top.quality, 0.45);
    assert_eq!(report.citations.len(), 3);
    assert_eq!(report.citations[2].index, 4);
    assert!(report
        .justification_summary
        .contains("Australia has no legal framework to list individuals as terrorists"));

    let cassette_path = dir.join("cassette.json");
    recorder.save_to(&cassette_path).unwrap();

    let cassette = Cassette::load(&cassette_path).unwrap();
    let fetches = cassette
        .entries
        .values()
        .filter(|r| r.provider == "fetch")
        .count();
    assert_eq!(fetches, 20, "pool of twenty candidates");

    // Replay must reproduce the recorded run byte for byte.
    let replayed = run_claim(
        &ReplayProviders::from_path(&cassette_path).unwrap().provider_set(),
        &PromptSet::default(),
        &LabelMap::default(),
        &cfg,
        &claim,
        RunMode::Full,
    )
    .await
    .expect("golden-1 replay succeeds");
    assert_eq!(report_json(&report), report_json(&replayed));

    write_json(&dir.join("claim.json"), &claim);
    write_json(&dir.join("config.json"), &cfg);
    std::fs::write(dir.join("expected_report.json"), report_json(&report)).unwrap();
    println!("golden: {} cassette entries", cassette.len());
}

// --- batch scenario ---------------------------------------------------------

const BATCH_DATASET: &str = r#"{"id":"b1","text":"The Eiffel Tower is taller than the Statue of Liberty.","label":"true"}
{"id":"b2","text":"A photograph shows a shark swimming down a flooded Houston highway after the hurricane.","label":"Misleading"}
{"id":"b3","text":"A photo shows the Sydney Opera House lit up for the 2024 New Year fireworks.","label":"Miscapthioned"}
{"id":"b4","text":"NASA announced the sun will go completely dark for six days in December.","label":"Mostly False"}
"#;

fn batch_chat() -> FakeChat {
    FakeChat::new(|req| {
        let text = req.messages.last().unwrap().joined_text();
        let answer = if text.contains("Eiffel Tower") {
            "Yes. This claim is true: the Eiffel Tower stands roughly 300 metres tall, well above the Statue of Liberty's 93 metres."
        } else if text.contains("shark") {
            "Yes. The claim is true; the image has circulated alongside credible storm coverage."
        } else if text.contains("Opera House") {
            "Yes. This claim is false: the photograph long predates the event it is captioned with."
        } else if text.contains("sun will go completely dark") {
            "Yes. The claim is false; no such announcement exists in official records."
        } else {
            panic!("unscripted direct prompt: {text:.80}");
        };
        Ok(answer.to_string())
    })
    .with_cost("0.004".parse().unwrap())
    .with_latency(Duration::from_millis(100))
}

fn offline_rest_of_set(chat: FakeChat) -> ProviderSet {
    ProviderSet {
        chat: Arc::new(chat),
        embed: Arc::new(FakeEmbed::hashed(4)),
        text_search: Arc::new(FakeTextSearch::new(|_, _| Ok(vec![]))),
        image_search: Arc::new(FakeImageSearch::new(|_, _| Ok(vec![]))),
        fetcher: Arc::new(FakeFetcher::new(|url| {
            Err(Error::FetchFailed {
                url: url.to_string(),
                reason: "connection refused".into(),
            })
        })),
    }
}

async fn gen_batch() {
    let dir = fixtures_root().join("batch");
    std::fs::create_dir_all(&dir).unwrap();
    let dataset_path = dir.join("dataset.jsonl");
    std::fs::write(&dataset_path, BATCH_DATASET).unwrap();

    let labels = LabelMap::default();
    let records = load_dataset(&dataset_path, &labels).unwrap();
    assert_eq!(records.len(), 4);

    let cfg = PipelineConfig::default();
    let recorder = Recorder::new(offline_rest_of_set(batch_chat()));
    let reports = run_batch(
        &recorder.provider_set(),
        &PromptSet::default(),
        &labels,
        &cfg,
        &records,
        RunMode::Direct,
    )
    .await;

    let metrics = compute_metrics(&reports, &records).unwrap();
    assert!((metrics.accuracy - 0.75).abs() < 1e-12, "designed accuracy");
    assert!((metrics.verification_rate - 1.0).abs() < 1e-12);

    let cassette_path = dir.join("cassette.json");
    recorder.save_to(&cassette_path).unwrap();
    write_json(&dir.join("config.json"), &cfg);

    // Replay must reproduce the same reports and metrics.
    let replay = ReplayProviders::from_path(&cassette_path).unwrap().provider_set();
    let replayed = run_batch(&replay, &PromptSet::default(), &labels, &cfg, &records, RunMode::Direct).await;
    let metrics2 = compute_metrics(&replayed, &records).unwrap();
    assert_eq!(
        serde_json::to_string(&metrics).unwrap(),
        serde_json::to_string(&metrics2).unwrap()
    );
    println!("batch: {} records, accuracy {}", records.len(), metrics.accuracy);
}

// --- degradation scenario ----------------------------------------------------

const DEGRADATION_INTERPRETATION: &str = "1. Sub-claim: The Netherlands banned bicycles from all public roads.\n   Query: Netherlands bicycle ban public roads";

const DEGRADATION_VERDICT: &str = "Verdict: False.\n\nSummary: No evidence could be retrieved from any source, so the claim cannot be substantiated and is treated as unsupported.";

fn degradation_claim() -> Claim {
    Claim {
        id: "degradation-1".into(),
        text: "The Netherlands has banned all bicycles from public roads.".into(),
        image: None,
        gold_label: None,
        published_at: None,
    }
}

fn degradation_provider_set() -> ProviderSet {
    let chat = FakeChat::new(|req| {
        let text = req.messages.last().unwrap().joined_text();
        if text.contains("misinformation interpreter") {
            return Ok(DEGRADATION_INTERPRETATION.to_string());
        }
        if text.contains("do nothing but memorize") {
            return Ok("Memorized.".to_string());
        }
        if text.contains("Verify the claim based on the evidence") {
            return Ok(DEGRADATION_VERDICT.to_string());
        }
        panic!("unscripted chat prompt: {text:.80}");
    })
    .with_cost("0.01".parse().unwrap())
    .with_latency(Duration::from_millis(110));

    let text_search = FakeTextSearch::new(|_, _| {
        Ok([
            "https://rijksoverheid.example/onderwerpen/fiets/verbod",
            "https://dutchnews.example/2024/bicycle-ban-rumour",
            "https://nltimes.example/traffic/bicycle-road-rules",
        ]
        .iter()
        .map(|u| SearchResult {
            url: Url::parse(u).unwrap(),
            title: "result".into(),
            snippet: "snippet".into(),
            channel: Channel::TextSearch,
        })
        .collect())
    })
    .with_cost("0.005".parse().unwrap())
    .with_latency(Duration::from_millis(70));

    ProviderSet {
        chat: Arc::new(chat),
        embed: Arc::new(FakeEmbed::hashed(4)),
        text_search: Arc::new(text_search),
        image_search: Arc::new(FakeImageSearch::new(|_, _| Ok(vec![]))),
        fetcher: Arc::new(
            FakeFetcher::new(|url| {
                Err(Error::FetchFailed {
                    url: url.to_string(),
                    reason: "connection refused".into(),
                })
            })
            .with_latency(Duration::from_millis(40)),
        ),
    }
}

async fn gen_degradation() {
    let dir = fixtures_root().join("degradation");
    let claim = degradation_claim();
    let cfg = PipelineConfig::default();

    let recorder = Recorder::new(degradation_provider_set());
    let report = run_claim(
        &recorder.provider_set(),
        &PromptSet::default(),
        &LabelMap::default(),
        &cfg,
        &claim,
        RunMode::Full,
    )
    .await
    .expect("degraded run still produces a report");

    assert_eq!(report.evidence_count(), 0);
    assert!(report.insufficient_evidence);
    assert_eq!(report.verdict, Some(BinaryLabel::False));
    assert!(report.citations.is_empty());

    let cassette_path = dir.join("cassette.json");
    recorder.save_to(&cassette_path).unwrap();
    write_json(&dir.join("claim.json"), &claim);
    write_json(&dir.join("config.json"), &cfg);

    let replayed = run_claim(
        &ReplayProviders::from_path(&cassette_path).unwrap().provider_set(),
        &PromptSet::default(),
        &LabelMap::default(),
        &cfg,
        &claim,
        RunMode::Full,
    )
    .await
    .unwrap();
    assert_eq!(report_json(&report), report_json(&replayed));
    println!("degradation: evidence_count {}", report.evidence_count());
}

// --- ablation scenario -------------------------------------------------------

const ABLATION_DATASET: &str =
    "{\"id\":\"tram-1\",\"text\":\"City officials unveiled a new tram line downtown.\",\"label\":\"true\"}\n";

/// Ten candidates for the tram claim: six that clear the credibility filter
/// and four that do not, so seeded sampling has something real to choose from.
fn ablation_provider_set() -> ProviderSet {
    let chat = FakeChat::new(|req| {
        let text = req.messages.last().unwrap().joined_text();
        if text.contains("misinformation interpreter") {
            return Ok("1. Sub-claim: City officials unveiled a new tram line downtown.\n   Query: city tram line unveiled".into());
        }
        if text.contains("do nothing but memorize") {
            return Ok("Memorized.".into());
        }
        if text.contains("summarize the provided article") {
            if let Some(n) = (1..=6).find(|n| text.contains(&format!("tramline-{n}"))) {
                return Ok(format!(
                    "People: Not mentioned.\nEvent: The city opened tram line {n}.\nLocation: Not mentioned.\nTime: Not mentioned.\nReason: Not mentioned.\nBackground: Not mentioned.\nImpact: Not mentioned.\nFollow-up: Not mentioned.\nSummary: City crews opened new tram line {n} to passengers downtown after months of testing and schedule delays."
                ));
            }
            if let Some(n) = (1..=4).find(|n| text.contains(&format!("dudpage-{n}"))) {
                return Ok(format!(
                    "People: An unnamed blogger.\nEvent: Not mentioned.\nLocation: Not mentioned.\nTime: Not mentioned.\nReason: Not mentioned.\nBackground: Not mentioned.\nImpact: Not mentioned.\nFollow-up: Not mentioned.\nSummary: A dud page {n}."
                ));
            }
            panic!("extraction prompt names no known page: {text}");
        }
        if text.contains("The following list is the evidence") {
            return Ok("I have received the evidence list.".into());
        }
        if text.contains("Verify the claim based on the evidence") {
            return Ok("Verdict: True.\n\nSummary: Several city reports confirm the tram line opening.".into());
        }
        panic!("unscripted chat prompt: {text:.80}");
    })
    .with_cost("0.003".parse().unwrap())
    .with_latency(Duration::from_millis(90));

    let hits: Vec<SearchResult> = (1..=6)
        .map(|n| format!("https://city{n}.example/news"))
        .chain((1..=4).map(|n| format!("http://dud{n}.example/a/b/c/d/e")))
        .map(|u| SearchResult {
            url: Url::parse(&u).unwrap(),
            title: format!("page {u}"),
            snippet: "snippet".into(),
            channel: Channel::TextSearch,
        })
        .collect();
    let text_search = FakeTextSearch::new(move |_, _| Ok(hits.clone()))
        .with_cost("0.005".parse().unwrap())
        .with_latency(Duration::from_millis(60));

    let fetcher = FakeFetcher::new(|url| {
        let marker = if let Some(n) = url.host_str().and_then(|h| h.strip_prefix("city")) {
            format!("tramline-{}", n.trim_end_matches(".example"))
        } else if let Some(n) = url.host_str().and_then(|h| h.strip_prefix("dud")) {
            format!("dudpage-{}", n.trim_end_matches(".example"))
        } else {
            panic!("unscripted fetch: {url}");
        };
        Ok(RawDocument {
            url: url.clone(),
            content_type: "text/html".into(),
            body: format!(
                "<html><body><nav>home</nav><article><h1>City news</h1><p>Report {marker}: the municipal authority commented on the new line today.</p></article></body></html>"
            )
            .into_bytes(),
        })
    })
    .with_latency(Duration::from_millis(30));

    ProviderSet {
        chat: Arc::new(chat),
        embed: Arc::new(FakeEmbed::hashed(4)),
        text_search: Arc::new(text_search),
        image_search: Arc::new(FakeImageSearch::new(|_, _| Ok(vec![]))),
        fetcher: Arc::new(fetcher),
    }
}

fn reports_jsonl(reports: &[VerificationReport]) -> String {
    reports
        .iter()
        .map(|r| {
            let mut line = serde_json::to_string(r).expect("report serializes");
            line.push('\n');
            line
        })
        .collect()
}

async fn gen_ablation() {
    let dir = fixtures_root().join("ablation");
    std::fs::create_dir_all(&dir).unwrap();
    let dataset_path = dir.join("dataset.jsonl");
    std::fs::write(&dataset_path, ABLATION_DATASET).unwrap();

    let labels = LabelMap::default();
    let records = load_dataset(&dataset_path, &labels).unwrap();
    let cfg = PipelineConfig {
        evaluator: EvaluatorConfig {
            top_k: 3,
            ..EvaluatorConfig::default()
        },
        seed: 7,
        ..PipelineConfig::default()
    };

    let recorder = Recorder::new(ablation_provider_set());
    let reports = run_batch(
        &recorder.provider_set(),
        &PromptSet::default(),
        &labels,
        &cfg,
        &records,
        RunMode::RandomEvidence,
    )
    .await;
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0].verdict, Some(BinaryLabel::True));
    assert_eq!(reports[0].evidence.len(), 3, "samples exactly top_k");
    for view in &reports[0].evidence {
        assert!(view.url.as_str().starts_with("https://city"), "sampled a filtered-out page");
        assert_eq!(view.relevance, 0.0, "sampled evidence carries zero relevance");
    }

    let cassette_path = dir.join("cassette.json");
    recorder.save_to(&cassette_path).unwrap();
    write_json(&dir.join("config.json"), &cfg);

    // Two replays of the seeded sample must agree with the recording and
    // with each other, byte for byte.
    let mut replays = Vec::new();
    for _ in 0..2 {
        let replay = ReplayProviders::from_path(&cassette_path).unwrap().provider_set();
        replays.push(
            run_batch(&replay, &PromptSet::default(), &labels, &cfg, &records, RunMode::RandomEvidence)
                .await,
        );
    }
    assert_eq!(reports_jsonl(&replays[0]), reports_jsonl(&reports));
    assert_eq!(reports_jsonl(&replays[0]), reports_jsonl(&replays[1]));
    println!("ablation: {} sampled items", reports[0].evidence.len());
}

#[tokio::main]
async fn main() {
    gen_golden().await;
    gen_batch().await;
    gen_degradation().await;
    gen_ablation().await;
    println!("fixtures written to {}", fixtures_root().display());
}
