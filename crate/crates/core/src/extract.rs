//! Evidence extraction: fetch each candidate page, strip boilerplate, and
//! have the LLM distill it into eight factual dimensions plus a summary.

use std::time::{SystemTime, UNIX_EPOCH};

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};
use url::Url;

use crate::error::{Error, Result};
use crate::ledger::{Bucket, StageMeter};
use crate::prompts::{PromptSet, EXTRACT_REMINDER};
use crate::providers::{
    ChatMessage, ChatRequest, Channel, ProviderSet, RawDocument, Role,
};
use crate::retrieve::CandidatePool;

pub const DEFAULT_MAX_EXTRACT_CHARS: usize = 12_000;
pub const DEFAULT_EXTRACT_PARALLELISM: usize = 6;

/// The eight factual dimensions. Every key is always present; a dimension
/// the source does not cover is `null`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceDimensions {
    #[serde(rename = "People")]
    pub people: Option<String>,
    #[serde(rename = "Event")]
    pub event: Option<String>,
    #[serde(rename = "Location")]
    pub location: Option<String>,
    #[serde(rename = "Time")]
    pub time: Option<String>,
    #[serde(rename = "Reason")]
    pub reason: Option<String>,
    #[serde(rename = "Background")]
    pub background: Option<String>,
    #[serde(rename = "Impact")]
    pub impact: Option<String>,
    #[serde(rename = "Followup")]
    pub followup: Option<String>,
}

impl EvidenceDimensions {
    /// Dimension values in canonical order.
    pub fn as_array(&self) -> [&Option<String>; 8] {
        [
            &self.people,
            &self.event,
            &self.location,
            &self.time,
            &self.reason,
            &self.background,
            &self.impact,
            &self.followup,
        ]
    }

    /// Number of dimensions that are present and non-blank.
    pub fn populated_count(&self) -> usize {
        self.as_array()
            .iter()
            .filter(|d| d.as_deref().is_some_and(|v| !v.trim().is_empty()))
            .count()
    }
}

/// One source page distilled into structured form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredEvidence {
    pub source_url: Url,
    pub dimensions: EvidenceDimensions,
    /// Concise prose rendering; nonempty whenever any dimension is populated.
    pub summary: String,
    /// Unix seconds at extraction time.
    pub retrieved_at: u64,
    pub channel: Channel,
}

/// Why a candidate produced no evidence record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub url: Url,
    pub reason: String,
}

/// Survivors (in pool order) plus a drop reason per lost candidate.
#[derive(Debug, Default)]
pub struct ExtractionOutcome {
    pub evidence: Vec<StructuredEvidence>,
    pub drops: Vec<DropRecord>,
}

#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub max_extract_chars: usize,
    pub parallelism: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            max_extract_chars: DEFAULT_MAX_EXTRACT_CHARS,
            parallelism: DEFAULT_EXTRACT_PARALLELISM,
        }
    }
}

enum DocumentKind {
    Html,
    Plain,
}

fn document_kind(content_type: &str) -> Result<DocumentKind> {
    let main = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    match main.as_str() {
        "text/html" | "application/xhtml+xml" => Ok(DocumentKind::Html),
        t if t.starts_with("text/") || t == "application/json" => Ok(DocumentKind::Plain),
        other => Err(Error::UnsupportedContentType {
            url: String::new(),
            content_type: other.to_string(),
        }),
    }
}

/// Reduce a raw document to readable text: drop script/style/nav chrome from
/// HTML, keep paragraph structure, and cap the length at a paragraph
/// boundary. Plain text passes through with only the cap applied.
pub fn strip_boilerplate(doc: &RawDocument, max_chars: usize) -> Result<String> {
    let kind = document_kind(&doc.content_type).map_err(|e| match e {
        Error::UnsupportedContentType { content_type, .. } => Error::UnsupportedContentType {
            url: doc.url.to_string(),
            content_type,
        },
        other => other,
    })?;
    let text = String::from_utf8_lossy(&doc.body);
    let cleaned = match kind {
        DocumentKind::Html => strip_html(&text),
        DocumentKind::Plain => text.into_owned(),
    };
    Ok(truncate_paragraphs(&cleaned, max_chars))
}

/// Elements whose entire content is boilerplate.
const SKIP_TAGS: &[&str] = &[
    "script", "style", "nav", "header", "footer", "aside", "noscript", "svg", "head", "iframe",
    "form", "button",
];

/// Elements that imply a paragraph break around their tags.
const BLOCK_TAGS: &[&str] = &[
    "p", "div", "section", "article", "main", "ul", "ol", "li", "table", "thead", "tbody", "tr",
    "td", "th", "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "pre", "figure", "figcaption",
    "hr", "dl", "dt", "dd",
];

fn strip_html(html: &str) -> String {
    let mut out = String::with_capacity(html.len() / 2);
    let mut rest = html;
    loop {
        match rest.find('<') {
            None => {
                decode_entities_into(rest, &mut out);
                break;
            }
            Some(i) => {
                decode_entities_into(&rest[..i], &mut out);
                rest = &rest[i..];
                if let Some(after) = rest.strip_prefix("<!--") {
                    rest = match after.find("-->") {
                        Some(j) => &after[j + 3..],
                        None => "",
                    };
                    continue;
                }
                let Some(end) = rest.find('>') else {
                    break; // dangling '<' at EOF
                };
                let tag_body = &rest[1..end];
                rest = &rest[end + 1..];
                let closing = tag_body.starts_with('/');
                let name: String = tag_body
                    .trim_start_matches('/')
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric())
                    .collect::<String>()
                    .to_ascii_lowercase();
                if name.is_empty() {
                    continue;
                }
                if !closing && SKIP_TAGS.contains(&name.as_str()) {
                    rest = skip_past_close(rest, &name);
                    out.push_str("\n\n");
                } else if name == "br" {
                    out.push('\n');
                } else if BLOCK_TAGS.contains(&name.as_str()) {
                    out.push_str("\n\n");
                }
            }
        }
    }
    // Collapse into clean paragraphs: inner whitespace runs become single
    // spaces, paragraph breaks survive.
    let paragraphs: Vec<String> = out
        .split("\n\n")
        .map(crate::claim::normalize_claim)
        .filter(|p| !p.is_empty())
        .collect();
    paragraphs.join("\n\n")
}

/// Advance past the matching close tag (case-insensitive); to the end of the
/// document when unclosed.
fn skip_past_close<'a>(rest: &'a str, name: &str) -> &'a str {
    let hay = rest.to_ascii_lowercase();
    let needle = format!("</{name}");
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&needle) {
        let at = from + pos;
        let after = at + needle.len();
        // Must be followed by '>' or whitespace then '>', else it's a longer
        // tag name (e.g. </head> vs </header>).
        let tail = &hay[after..];
        if tail.starts_with('>') {
            return &rest[after + 1..];
        }
        if tail.trim_start().starts_with('>') {
            let close = rest[after..].find('>').map(|j| after + j + 1).unwrap_or(rest.len());
            return &rest[close..];
        }
        from = after;
    }
    ""
}

fn decode_entities_into(text: &str, out: &mut String) {
    let mut rest = text;
    while let Some(i) = rest.find('&') {
        out.push_str(&rest[..i]);
        rest = &rest[i..];
        // An entity is at most ~10 chars to the semicolon.
        let semi = rest[..rest.len().min(12)].find(';');
        let Some(semi) = semi else {
            out.push('&');
            rest = &rest[1..];
            continue;
        };
        let entity = &rest[1..semi];
        let decoded: Option<String> = match entity {
            "amp" => Some("&".into()),
            "lt" => Some("<".into()),
            "gt" => Some(">".into()),
            "quot" => Some("\"".into()),
            "apos" => Some("'".into()),
            "nbsp" => Some(" ".into()),
            _ => entity
                .strip_prefix("#x")
                .or_else(|| entity.strip_prefix("#X"))
                .and_then(|h| u32::from_str_radix(h, 16).ok())
                .or_else(|| entity.strip_prefix('#').and_then(|d| d.parse().ok()))
                .and_then(char::from_u32)
                .map(String::from),
        };
        match decoded {
            Some(s) => {
                out.push_str(&s);
                rest = &rest[semi + 1..];
            }
            None => {
                out.push('&');
                rest = &rest[1..];
            }
        }
    }
    out.push_str(rest);
}

/// Cap `text` at `max_chars` characters, cutting at a paragraph boundary
/// when possible, else at a whitespace boundary.
fn truncate_paragraphs(text: &str, max_chars: usize) -> String {
    if text.chars().count() <= max_chars {
        return text.to_string();
    }
    let mut kept = String::new();
    for paragraph in text.split("\n\n") {
        let extra = if kept.is_empty() { 0 } else { 2 };
        if kept.chars().count() + extra + paragraph.chars().count() > max_chars {
            break;
        }
        if !kept.is_empty() {
            kept.push_str("\n\n");
        }
        kept.push_str(paragraph);
    }
    if !kept.is_empty() {
        return kept;
    }
    // The first paragraph alone exceeds the cap: cut at whitespace.
    let prefix: String = text.chars().take(max_chars).collect();
    match prefix.rfind(char::is_whitespace) {
        Some(cut) => prefix[..cut].trim_end().to_string(),
        None => prefix,
    }
}

/// Values that mean "the source does not cover this dimension".
fn is_absent_marker(value: &str) -> bool {
    let v = value
        .trim()
        .trim_end_matches('.')
        .to_ascii_lowercase();
    matches!(
        v.as_str(),
        "" | "not mentioned" | "none" | "n/a" | "na" | "unknown" | "not specified" | "not applicable"
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    People,
    Event,
    Location,
    Time,
    Reason,
    Background,
    Impact,
    Followup,
    Summary,
}

/// Recognized labels per slot; aliases cover the interrogative phrasing the
/// prompt itself uses ("the people (who)", ...).
const SLOT_LABELS: &[(Slot, &[&str])] = &[
    (Slot::People, &["people", "who"]),
    (Slot::Event, &["event", "what"]),
    (Slot::Location, &["location", "where"]),
    (Slot::Time, &["time", "when"]),
    (Slot::Reason, &["reason", "why"]),
    (Slot::Background, &["background"]),
    (Slot::Impact, &["impact"]),
    (Slot::Followup, &["follow-up", "followup", "follow up"]),
    (Slot::Summary, &["summary"]),
];

fn slot_value<'a>(
    dims: &'a mut EvidenceDimensions,
    summary: &'a mut Option<String>,
    slot: Slot,
) -> &'a mut Option<String> {
    match slot {
        Slot::People => &mut dims.people,
        Slot::Event => &mut dims.event,
        Slot::Location => &mut dims.location,
        Slot::Time => &mut dims.time,
        Slot::Reason => &mut dims.reason,
        Slot::Background => &mut dims.background,
        Slot::Impact => &mut dims.impact,
        Slot::Followup => &mut dims.followup,
        Slot::Summary => summary,
    }
}

/// Parse the labeled-section response into dimensions plus the explicit
/// summary, if the model gave one. Errors with a reason when no label at all
/// is recognized.
pub fn parse_dimensions(
    text: &str,
) -> std::result::Result<(EvidenceDimensions, Option<String>), String> {
    let mut dims = EvidenceDimensions::default();
    let mut summary: Option<String> = None;
    let mut open: Option<Slot> = None;
    let mut matched_any = false;

    for raw in text.lines() {
        let line = raw
            .trim()
            .trim_start_matches(['-', '*', '•', ' ']);
        if line.is_empty() {
            open = None;
            continue;
        }
        let hit = SLOT_LABELS
            .iter()
            .find_map(|(slot, aliases)| match_label(line, aliases).map(|v| (*slot, v)));
        match hit {
            Some((slot, value)) => {
                matched_any = true;
                *slot_value(&mut dims, &mut summary, slot) = Some(value);
                open = Some(slot);
            }
            None => {
                // Continuation line for the most recent label.
                if let Some(slot) = open {
                    if let Some(buf) = slot_value(&mut dims, &mut summary, slot).as_mut() {
                        if !buf.is_empty() {
                            buf.push(' ');
                        }
                        buf.push_str(line);
                    }
                }
            }
        }
    }

    if !matched_any {
        return Err("no labeled dimension lines found".into());
    }

    // Normalize values and blank out absence markers.
    let mut slots: [&mut Option<String>; 9] = [
        &mut dims.people,
        &mut dims.event,
        &mut dims.location,
        &mut dims.time,
        &mut dims.reason,
        &mut dims.background,
        &mut dims.impact,
        &mut dims.followup,
        &mut summary,
    ];
    for slot in slots.iter_mut() {
        if let Some(v) = slot.as_deref() {
            let norm = crate::claim::normalize_claim(v);
            **slot = if is_absent_marker(&norm) {
                None
            } else {
                Some(norm)
            };
        }
    }
    Ok((dims, summary))
}

/// If `line` begins with an alias (optionally followed by a parenthetical
/// like "(who)" and/or emphasis) and a colon, return the text after the
/// colon in its original case.
fn match_label(line: &str, aliases: &[&str]) -> Option<String> {
    let lowered = line.to_ascii_lowercase();
    for alias in aliases {
        let Some(tail) = lowered.strip_prefix(alias) else {
            continue;
        };
        let mut tail = tail.trim_start();
        if tail.starts_with('(') {
            match tail.find(')') {
                Some(close) => tail = tail[close + 1..].trim_start(),
                None => continue,
            }
        }
        tail = tail.trim_start_matches('*').trim_start();
        let Some(tail) = tail.strip_prefix(':') else {
            continue;
        };
        // ASCII lowercasing preserves byte offsets.
        let offset = lowered.len() - tail.len();
        let value = line[offset..].trim().trim_matches('*').trim();
        return Some(value.to_string());
    }
    None
}

/// One chat call distilling stripped page text into structured evidence,
/// retrying once with a format reminder.
pub async fn extract_structured_evidence(
    providers: &ProviderSet,
    prompts: &PromptSet,
    page_text: &str,
    source_url: &Url,
    channel: Channel,
    meter: &StageMeter,
) -> Result<StructuredEvidence> {
    if page_text.trim().is_empty() {
        return Err(Error::InvalidConfig(format!(
            "empty page text for {source_url}"
        )));
    }
    let first = ChatRequest::new(vec![ChatMessage::text(
        Role::User,
        prompts.render_summarize(page_text),
    )]);
    let (text, meta) = providers.chat.chat(&first).await?;
    meter.add(Bucket::Summarize, meta);

    let first_failure = match parse_dimensions(&text) {
        Ok(parsed) => return Ok(build_evidence(parsed, source_url, channel)),
        Err(reason) => reason,
    };

    let mut messages = first.messages.clone();
    messages.push(ChatMessage::text(Role::Assistant, text));
    messages.push(ChatMessage::text(Role::User, EXTRACT_REMINDER));
    let (retry_text, retry_meta) = providers.chat.chat(&ChatRequest::new(messages)).await?;
    meter.add(Bucket::Summarize, retry_meta);
    match parse_dimensions(&retry_text) {
        Ok(parsed) => Ok(build_evidence(parsed, source_url, channel)),
        Err(second_failure) => Err(Error::ExtractionParse {
            url: source_url.to_string(),
            reason: format!("{first_failure}; after reprompt: {second_failure}"),
        }),
    }
}

fn build_evidence(
    (dimensions, explicit_summary): (EvidenceDimensions, Option<String>),
    source_url: &Url,
    channel: Channel,
) -> StructuredEvidence {
    let summary = explicit_summary.unwrap_or_else(|| {
        dimensions
            .as_array()
            .iter()
            .filter_map(|d| d.as_deref())
            .collect::<Vec<_>>()
            .join("; ")
    });
    StructuredEvidence {
        source_url: source_url.clone(),
        dimensions,
        summary,
        retrieved_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        channel,
    }
}

/// Fetch + strip + extract every candidate with bounded parallelism.
/// Failures drop the candidate with a reason; survivors keep pool order.
pub async fn extract_pool(
    providers: &ProviderSet,
    prompts: &PromptSet,
    pool: &CandidatePool,
    opts: ExtractOptions,
    meter: &StageMeter,
) -> ExtractionOutcome {
    let processed: Vec<std::result::Result<StructuredEvidence, DropRecord>> =
        stream::iter(pool.candidates.iter().map(|candidate| async move {
            let url = candidate.url.clone();
            let doc = match providers.fetcher.fetch_page(&url).await {
                Ok((doc, meta)) => {
                    meter.add(Bucket::Summarize, meta);
                    doc
                }
                Err(e) => {
                    return Err(DropRecord {
                        url,
                        reason: e.to_string(),
                    })
                }
            };
            let text = match strip_boilerplate(&doc, opts.max_extract_chars) {
                Ok(t) => t,
                Err(e) => {
                    return Err(DropRecord {
                        url,
                        reason: e.to_string(),
                    })
                }
            };
            if text.trim().is_empty() {
                return Err(DropRecord {
                    url,
                    reason: "page has no extractable text".into(),
                });
            }
            extract_structured_evidence(providers, prompts, &text, &url, candidate.channel, meter)
                .await
                .map_err(|e| DropRecord {
                    url,
                    reason: e.to_string(),
                })
        }))
        .buffered(opts.parallelism.max(1))
        .collect()
        .await;

    let mut outcome = ExtractionOutcome::default();
    for item in processed {
        match item {
            Ok(ev) => outcome.evidence.push(ev),
            Err(drop) => {
                tracing::warn!(url = %drop.url, reason = %drop.reason, "candidate dropped");
                outcome.drops.push(drop);
            }
        }
    }
    outcome
}
