//! Claim interpretation: decompose a multimodal claim into sub-claims with
//! retrieval queries, plus notes on the image content.

use serde::{Deserialize, Serialize};

use crate::claim::{normalize_claim, Claim};
use crate::error::{Error, Result};
use crate::ledger::{Bucket, StageMeter};
use crate::prompts::{PromptSet, INTERPRET_REMINDER};
use crate::providers::{ChatMessage, ChatRequest, MessagePart, ProviderSet, Role};

pub const MAX_QUERY_CHARS: usize = 256;

/// One atomic factual assertion and the query used to search for it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubClaim {
    pub statement: String,
    pub query: String,
}

/// Interpreter output for one claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpretationResult {
    pub sub_claims: Vec<SubClaim>,
    /// Entities/scene/visible text in the image; present iff the claim has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_notes: Option<String>,
}

/// Cap a query at [`MAX_QUERY_CHARS`] characters.
fn truncate_query(q: &str) -> String {
    q.chars().take(MAX_QUERY_CHARS).collect::<String>().trim_end().to_string()
}

/// Skip interpretation: the whole normalized claim text becomes the single
/// statement and query (the "no interpretation" ablation).
pub fn passthrough_interpretation(claim: &Claim) -> Result<InterpretationResult> {
    let text = normalize_claim(claim.require_text()?);
    Ok(InterpretationResult {
        sub_claims: vec![SubClaim {
            statement: text.clone(),
            query: truncate_query(&text),
        }],
        image_notes: None,
    })
}

/// Run the interpreter prompt and parse its response, retrying once with a
/// format reminder before giving up.
pub async fn interpret_claim(
    providers: &ProviderSet,
    prompts: &PromptSet,
    claim: &Claim,
    max_subclaims: usize,
    meter: &StageMeter,
) -> Result<InterpretationResult> {
    claim.validate()?;
    let image = claim.image.as_ref().map(|i| i.locator().to_string());
    let rendered = prompts.render_interpret(&claim.normalized_text(), image.as_deref());
    let mut parts = vec![MessagePart::Text(rendered)];
    if let Some(img) = &image {
        parts.push(MessagePart::Image(img.clone()));
    }
    let first = ChatRequest::new(vec![ChatMessage {
        role: Role::User,
        parts,
    }]);

    let (text, meta) = providers.chat.chat(&first).await?;
    meter.add(Bucket::Retrieve, meta);
    let first_failure = match finish(&text, claim, max_subclaims) {
        Ok(result) => return Ok(result),
        Err(reason) => reason,
    };

    let mut messages = first.messages.clone();
    messages.push(ChatMessage::text(Role::Assistant, text));
    messages.push(ChatMessage::text(Role::User, INTERPRET_REMINDER));
    let (retry_text, retry_meta) = providers.chat.chat(&ChatRequest::new(messages)).await?;
    meter.add(Bucket::Retrieve, retry_meta);
    finish(&retry_text, claim, max_subclaims).map_err(|second_failure| {
        Error::InterpretationParse(format!(
            "{first_failure}; after reprompt: {second_failure}"
        ))
    })
}

/// Parse + validate against the claim's modalities. Error is a reason string
/// so the caller can decide whether to reprompt.
fn finish(
    response: &str,
    claim: &Claim,
    max_subclaims: usize,
) -> std::result::Result<InterpretationResult, String> {
    let (mut sub_claims, mut image_notes) = parse_interpretation(response)?;

    if claim.image.is_some() {
        if image_notes.is_none() {
            return Err("claim has an image but the response has no Image notes line".into());
        }
    } else {
        // Notes about a nonexistent image are hallucinated; drop them.
        image_notes = None;
    }

    // Image-only claims may answer with notes alone; derive the search entry
    // point from them.
    if sub_claims.is_empty() {
        if let Some(notes) = &image_notes {
            let text = normalize_claim(notes);
            if !text.is_empty() {
                sub_claims.push(SubClaim {
                    statement: text.clone(),
                    query: text,
                });
            }
        }
    }
    if sub_claims.is_empty() {
        return Err("no sub-claim/query pairs found".into());
    }

    // Case-insensitive query dedup, first occurrence wins.
    let mut seen = std::collections::HashSet::new();
    let mut deduped = Vec::new();
    for mut sc in sub_claims {
        sc.query = truncate_query(&sc.query);
        if sc.statement.is_empty() || sc.query.is_empty() {
            continue;
        }
        if seen.insert(sc.query.to_lowercase()) {
            deduped.push(sc);
        }
        if deduped.len() == max_subclaims {
            break;
        }
    }
    if deduped.is_empty() {
        return Err("no sub-claim/query pairs found".into());
    }
    Ok(InterpretationResult {
        sub_claims: deduped,
        image_notes,
    })
}

/// Line-oriented parse of the interpreter grammar: numbered "Sub-claim:" /
/// "Query:" blocks and an optional "Image notes:" line, tolerant of bullets,
/// blank lines, and continuation lines.
fn parse_interpretation(
    text: &str,
) -> std::result::Result<(Vec<SubClaim>, Option<String>), String> {
    #[derive(Clone, Copy, PartialEq)]
    enum Field {
        None,
        Statement,
        Query,
        Notes,
    }

    let mut blocks: Vec<(String, String)> = Vec::new();
    let mut notes: Option<String> = None;
    let mut field = Field::None;

    for raw in text.lines() {
        let line = strip_bullet(raw.trim());
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = strip_any_label(line, &["sub-claim", "subclaim", "sub claim"]) {
            blocks.push((rest.to_string(), String::new()));
            field = Field::Statement;
        } else if let Some(rest) = strip_any_label(line, &["query"]) {
            if let Some(last) = blocks.last_mut() {
                last.1 = rest.to_string();
                field = Field::Query;
            } else {
                field = Field::None;
            }
        } else if let Some(rest) = strip_any_label(line, &["image notes", "image note"]) {
            notes = Some(rest.to_string());
            field = Field::Notes;
        } else {
            // Continuation of whichever field is open.
            let target = match field {
                Field::Statement => blocks.last_mut().map(|b| &mut b.0),
                Field::Query => blocks.last_mut().map(|b| &mut b.1),
                Field::Notes => notes.as_mut(),
                Field::None => None,
            };
            if let Some(buf) = target {
                if !buf.is_empty() {
                    buf.push(' ');
                }
                buf.push_str(line);
            }
        }
    }

    let sub_claims: Vec<SubClaim> = blocks
        .into_iter()
        .map(|(s, q)| SubClaim {
            statement: normalize_claim(&s),
            query: normalize_claim(&q),
        })
        .filter(|sc| !sc.statement.is_empty() && !sc.query.is_empty())
        .collect();
    let notes = notes.map(|n| normalize_claim(&n)).filter(|n| !n.is_empty());

    if sub_claims.is_empty() && notes.is_none() {
        return Err("response contains no Sub-claim/Query blocks".into());
    }
    Ok((sub_claims, notes))
}

/// Drop leading list markers and emphasis asterisks.
fn strip_bullet(line: &str) -> &str {
    line.trim_start_matches(['-', '*', '•', ' '])
}

/// If the line starts with `<number>.` / `<number>)` and/or one of `labels`
/// followed by a colon, return the text after the colon.
fn strip_any_label<'a>(line: &'a str, labels: &[&str]) -> Option<&'a str> {
    let mut s = line.trim_start();
    let digits = s.chars().take_while(|c| c.is_ascii_digit()).count();
    if digits > 0 {
        let after = &s[digits..];
        if let Some(rest) = after.strip_prefix('.').or_else(|| after.strip_prefix(')')) {
            s = rest.trim_start();
        }
    }
    for label in labels {
        if s.len() >= label.len()
            && s.is_char_boundary(label.len())
            && s[..label.len()].eq_ignore_ascii_case(label)
        {
            let rest = s[label.len()..].trim_start();
            if let Some(value) = rest.strip_prefix(':') {
                return Some(value.trim_start_matches(['*', ' ']).trim());
            }
        }
    }
    None
}
