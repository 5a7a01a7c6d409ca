//! The staged verification protocol: initialize with the claim, upload the
//! top-ranked evidence, request a verdict in the fixed output grammar, and
//! assemble the report.

use serde::{Deserialize, Serialize};
use url::Url;

use crate::claim::{BinaryLabel, Claim};
use crate::error::{Error, Result};
use crate::evaluate::{EvaluatorConfig, ScoredEvidence};
use crate::label::LabelMap;
use crate::ledger::{Bucket, CostLedger, StageMeter, StageTimings};
use crate::prompts::{PromptSet, VERDICT_REMINDER};
use crate::providers::{ChatMessage, ChatRequest, MessagePart, ProviderSet, Role};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Supports,
    Refutes,
}

impl std::fmt::Display for Stance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stance::Supports => "supports",
            Stance::Refutes => "refutes",
        })
    }
}

/// One justification line tying the verdict to an uploaded evidence item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceCitation {
    /// 1-based position in the uploaded evidence list.
    pub index: usize,
    pub stance: Stance,
    /// The aspect of the claim the evidence bears on (e.g. "location").
    pub target_aspect: String,
    pub source_url: Url,
}

/// Evidence as it appears in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceView {
    pub url: Url,
    pub summary: String,
    pub credibility: f64,
    pub relevance: f64,
    pub integrity: f64,
    pub quality: f64,
}

impl From<&ScoredEvidence> for EvidenceView {
    fn from(item: &ScoredEvidence) -> Self {
        EvidenceView {
            url: item.evidence.source_url.clone(),
            summary: item.evidence.summary.clone(),
            credibility: item.credibility,
            relevance: item.relevance,
            integrity: item.integrity,
            quality: item.quality,
        }
    }
}

/// Final output for one claim. `verdict` is absent only when `abstained` is
/// set (direct mode) or `error` explains a failed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub claim_id: String,
    pub verdict: Option<BinaryLabel>,
    pub abstained: bool,
    pub insufficient_evidence: bool,
    pub justification_summary: String,
    pub citations: Vec<EvidenceCitation>,
    pub evidence: Vec<EvidenceView>,
    pub timings: StageTimings,
    pub cost: CostLedger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl VerificationReport {
    pub fn evidence_count(&self) -> usize {
        self.evidence.len()
    }

    /// A placeholder report for a claim whose pipeline run failed.
    pub fn from_error(claim_id: &str, error: &Error, meter: &StageMeter) -> Self {
        let (cost, timings) = meter.snapshot();
        VerificationReport {
            claim_id: claim_id.to_string(),
            verdict: None,
            abstained: false,
            insufficient_evidence: true,
            justification_summary: String::new(),
            citations: Vec::new(),
            evidence: Vec::new(),
            timings,
            cost,
            error: Some(error.to_string()),
        }
    }
}

/// What came out of the model's final verdict turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedVerdict {
    pub verdict: BinaryLabel,
    pub citations: Vec<ParsedCitation>,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedCitation {
    pub index: usize,
    pub stance: Stance,
    pub target_aspect: String,
}

fn first_binary_token(text: &str) -> Option<BinaryLabel> {
    for word in text.split(|c: char| !c.is_ascii_alphanumeric()) {
        if word.eq_ignore_ascii_case("true") {
            return Some(BinaryLabel::True);
        }
        if word.eq_ignore_ascii_case("false") {
            return Some(BinaryLabel::False);
        }
    }
    None
}

/// Parse the fixed output grammar: a `Verdict:` line with a True/False
/// token, optional numbered evidence lines carrying a supports/refutes
/// stance, and an optional `Summary:` tail.
pub fn parse_verdict_output(text: &str) -> Result<ParsedVerdict> {
    if text.trim().is_empty() {
        return Err(Error::VerdictParse("empty verdict response".into()));
    }
    let mut verdict: Option<BinaryLabel> = None;
    let mut citations = Vec::new();
    let mut summary = String::new();

    let mut lines = text.lines();
    for line in lines.by_ref() {
        let trimmed = line.trim();
        let lowered = trimmed.to_ascii_lowercase();
        if let Some(rest) = lowered.strip_prefix("verdict") {
            let rest = rest.trim_start();
            if let Some(rest) = rest.strip_prefix(':') {
                verdict = first_binary_token(rest);
                if verdict.is_none() {
                    return Err(Error::VerdictParse(format!(
                        "verdict line has no true/false token: {trimmed:?}"
                    )));
                }
                break;
            }
        }
    }
    let Some(verdict) = verdict else {
        return Err(Error::VerdictParse("no verdict line found".into()));
    };

    for line in lines {
        let trimmed = line.trim();
        let lowered = trimmed.to_ascii_lowercase();
        if let Some(rest) = lowered.strip_prefix("summary") {
            if let Some(rest) = rest.trim_start().strip_prefix(':') {
                let offset = trimmed.len() - rest.len();
                summary = trimmed[offset..].trim().to_string();
                continue;
            }
        }
        if !summary.is_empty() {
            // Summary continuation lines.
            if !trimmed.is_empty() {
                summary.push(' ');
                summary.push_str(trimmed);
            }
            continue;
        }
        if let Some(citation) = parse_citation_line(trimmed) {
            citations.push(citation);
        }
    }

    Ok(ParsedVerdict {
        verdict,
        citations,
        summary,
    })
}

/// "N. The evidence ... supports/refutes the X of the claim." → citation.
fn parse_citation_line(line: &str) -> Option<ParsedCitation> {
    let digits: String = line.chars().take_while(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return None;
    }
    let rest = line[digits.len()..].trim_start_matches(['.', ')']).trim();
    let index: usize = digits.parse().ok()?;

    let lowered = rest.to_ascii_lowercase();
    let (stance, stance_pos, stance_len) = ["supports", "refutes"]
        .iter()
        .filter_map(|token| {
            find_word(&lowered, token).map(|pos| {
                let stance = if *token == "supports" {
                    Stance::Supports
                } else {
                    Stance::Refutes
                };
                (stance, pos, token.len())
            })
        })
        .min_by_key(|(_, pos, _)| *pos)?;

    let mut tail = rest[stance_pos + stance_len..].trim_start();
    // Strip a leading article, but only at a word boundary.
    if let Some(after) = tail.strip_prefix("the") {
        if after.starts_with(char::is_whitespace) {
            tail = after.trim_start();
        }
    }
    let target = match tail.to_ascii_lowercase().find("of the claim") {
        Some(end) => tail[..end].trim(),
        None => tail.trim_end_matches(['.', '!']).trim(),
    };
    Some(ParsedCitation {
        index,
        stance,
        target_aspect: target.to_string(),
    })
}

/// Position of `word` in `hay` as a standalone word, if any.
fn find_word(hay: &str, word: &str) -> Option<usize> {
    let mut from = 0;
    while let Some(pos) = hay[from..].find(word) {
        let at = from + pos;
        let before_ok = at == 0
            || !hay[..at]
                .chars()
                .next_back()
                .is_some_and(|c| c.is_ascii_alphanumeric());
        let after_ok = !hay[at + word.len()..]
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphanumeric());
        if before_ok && after_ok {
            return Some(at);
        }
        from = at + word.len();
    }
    None
}

/// Serialize a parsed verdict back into the output grammar. Inverse of
/// [`parse_verdict_output`] on well-formed values.
pub fn render_verdict_output(parsed: &ParsedVerdict) -> String {
    let mut out = format!("Verdict: {}.", parsed.verdict);
    if !parsed.citations.is_empty() {
        out.push_str("\n\nEvidence:\n");
        for citation in &parsed.citations {
            out.push_str(&format!(
                "\n{}. The evidence {} {} the {} of the claim.",
                citation.index, citation.index, citation.stance, citation.target_aspect
            ));
        }
    }
    if !parsed.summary.is_empty() {
        out.push_str(&format!("\n\nSummary: {}", parsed.summary));
    }
    out
}

/// "1. summary (source: url)" lines, in rank order.
pub fn render_evidence_list(items: &[ScoredEvidence]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| {
            format!(
                "{}. {} (source: {})",
                i + 1,
                item.evidence.summary,
                item.evidence.source_url
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn claim_message(prompt: String, claim: &Claim) -> ChatMessage {
    let mut parts = vec![MessagePart::Text(prompt)];
    if let Some(image) = &claim.image {
        parts.push(MessagePart::Image(image.locator().to_string()));
    }
    ChatMessage { role: Role::User, parts }
}

async fn chat_turn(
    providers: &ProviderSet,
    conversation: &mut Vec<ChatMessage>,
    message: ChatMessage,
    meter: &StageMeter,
) -> Result<String> {
    conversation.push(message);
    let (text, meta) = providers
        .chat
        .chat(&ChatRequest::new(conversation.clone()))
        .await?;
    meter.add(Bucket::Verify, meta);
    conversation.push(ChatMessage::text(Role::Assistant, text.clone()));
    Ok(text)
}

/// Run the three-turn protocol over the ranked evidence and assemble the
/// report. With no surviving evidence the upload turn is skipped, the
/// insufficient-evidence flag is set, and the verdict is still forced
/// binary.
pub async fn run_verification_protocol(
    providers: &ProviderSet,
    prompts: &PromptSet,
    labels: &LabelMap,
    claim: &Claim,
    ranked: &[ScoredEvidence],
    cfg: &EvaluatorConfig,
    meter: &StageMeter,
) -> Result<VerificationReport> {
    let uploads = &ranked[..ranked.len().min(cfg.top_k)];
    let mut conversation = Vec::new();

    let image = claim.image.as_ref().map(|i| i.locator());
    let init = prompts.render_verify_init(&claim.normalized_text(), image);
    chat_turn(providers, &mut conversation, claim_message(init, claim), meter).await?;

    if !uploads.is_empty() {
        let upload = prompts.render_verify_upload(&render_evidence_list(uploads));
        chat_turn(
            providers,
            &mut conversation,
            ChatMessage::text(Role::User, upload),
            meter,
        )
        .await?;
    }

    let verdict_prompt = prompts.render_verify_verdict(labels);
    let response = chat_turn(
        providers,
        &mut conversation,
        ChatMessage::text(Role::User, verdict_prompt),
        meter,
    )
    .await?;

    let parsed = match parse_verdict_output(&response) {
        Ok(parsed) => parsed,
        Err(first) => {
            let retry = chat_turn(
                providers,
                &mut conversation,
                ChatMessage::text(Role::User, VERDICT_REMINDER),
                meter,
            )
            .await?;
            parse_verdict_output(&retry).map_err(|second| {
                Error::VerdictParse(format!("{first}; after reprompt: {second}"))
            })?
        }
    };

    let citations = resolve_citations(parsed.citations, uploads);
    let (cost, timings) = meter.snapshot();
    Ok(VerificationReport {
        claim_id: claim.id.clone(),
        verdict: Some(parsed.verdict),
        abstained: false,
        insufficient_evidence: uploads.is_empty(),
        justification_summary: parsed.summary,
        citations,
        evidence: uploads.iter().map(EvidenceView::from).collect(),
        timings,
        cost,
        error: None,
    })
}

/// Attach source URLs; citations pointing outside the uploaded list are
/// dropped with a warning.
fn resolve_citations(
    parsed: Vec<ParsedCitation>,
    uploads: &[ScoredEvidence],
) -> Vec<EvidenceCitation> {
    parsed
        .into_iter()
        .filter_map(|c| {
            if c.index == 0 || c.index > uploads.len() {
                tracing::warn!(index = c.index, uploaded = uploads.len(), "citation out of range");
                return None;
            }
            Some(EvidenceCitation {
                source_url: uploads[c.index - 1].evidence.source_url.clone(),
                index: c.index,
                stance: c.stance,
                target_aspect: c.target_aspect,
            })
        })
        .collect()
}

/// Detect the "no, I cannot verify" answer shape of the zero-shot prompt.
fn is_abstention(text: &str) -> bool {
    let lowered = text.to_ascii_lowercase();
    let first_word = lowered
        .split(|c: char| !c.is_ascii_alphanumeric())
        .find(|w| !w.is_empty());
    first_word == Some("no") || lowered.contains("cannot")
}

/// Zero-shot verification: one chat turn, no evidence. "No" answers are
/// recorded as abstentions rather than verdicts.
pub async fn direct_verify(
    providers: &ProviderSet,
    prompts: &PromptSet,
    claim: &Claim,
    meter: &StageMeter,
) -> Result<VerificationReport> {
    claim.validate()?;
    let prompt = prompts.render_direct(&claim.normalized_text());
    let request = ChatRequest::new(vec![claim_message(prompt, claim)]);
    let (response, meta) = providers.chat.chat(&request).await?;
    meter.add(Bucket::Verify, meta);

    let (verdict, abstained, summary) = if is_abstention(&response) {
        (None, true, String::new())
    } else {
        match first_binary_token(&response) {
            Some(label) => (Some(label), false, response.trim().to_string()),
            None => {
                return Err(Error::VerdictParse(format!(
                    "direct answer has neither abstention nor true/false token: {:?}",
                    response.trim()
                )))
            }
        }
    };

    let (cost, timings) = meter.snapshot();
    Ok(VerificationReport {
        claim_id: claim.id.clone(),
        verdict,
        abstained,
        insufficient_evidence: true,
        justification_summary: summary,
        citations: Vec::new(),
        evidence: Vec::new(),
        timings,
        cost,
        error: None,
    })
}
