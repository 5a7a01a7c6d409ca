//! Prompt templates for every LLM call in the pipeline.
//!
//! Defaults are embedded; any template can be overridden by dropping a file
//! with the matching name (`interpret.txt`, `summarize.txt`, `verify_init.txt`,
//! `verify_upload.txt`, `verify_verdict.txt`, `output_format.txt`,
//! `direct.txt`) into a template directory. Placeholders use `{name}` syntax
//! and every occurrence is substituted.

use std::path::Path;

use crate::error::Result;
use crate::label::LabelMap;

const INTERPRET: &str = "You are a multimodal misinformation interpreter. Your task is to understand a claim that contains both text and image, and generate structured sub-claims and corresponding retrieval queries.\n\nInput:\n\nText: {claim}\n\nImage: {image}\n\nOutput:\n\n1. Sub-claim: ...\n\n   Query: ...\n\n...";

const SUMMARIZE: &str = "Suppose you are a professional fact-checker.\n\nPlease summarize the provided article by identifying the people (who), the event (what), the location (where), the time (when), the reason (why), the background of the event, the impact of the event, and the follow-up event. Ensure the summary remains concise and clear.";

const VERIFY_INIT: &str = "Suppose you are a professional fact-checker. I will give you a claim to verify. The following is the claim. {text} denotes the text part of the claim. {image} denotes the image part of the claim.\n\nText: {text}\n\nImage: {image}\n\nBefore I provide you with evidence to verify this claim, do nothing but memorize it.";

const VERIFY_UPLOAD: &str = "The following list is the evidence related to the claim. You need to remember it and do nothing until the next instruction.\n\nText evidence: {text_evidence_list}";

const VERIFY_VERDICT: &str = "Verify the claim based on the evidence that I provided to you. The verdict sets of the claim and the verification principle is shown below.\n\nTrue verdict set: {true_verdict_set}. False verdict set: {false_verdict_set}.\n\n(1) If your verification result is in the true verdict set, the claim is true. (2) If your verification result is in the false verdict set, the claim is false.\n\nNext, give the justification for the verdict result. Output your complete answers in the format of the following template.\n\n{output_format}";

const OUTPUT_FORMAT: &str = "Verdict: True/False.\n\nEvidence:\n\n1. The evidence {place_holder} supports/refutes the{place_holder} of the claim.\n\n2. The evidence {place_holder} supports/refutes the{place_holder} of the claim.\n\n3. ......\n\nSummary: Use a concise sentence to summarize including your prediction and reason.";

const DIRECT: &str = "Please verify the following claim. If you can verify the truthfulness of the claim, answer with 'yes' and explain why it is true or false. If you cannot verify it, answer with 'no' and provide the reason.";

/// Shown when the claim has no image, in place of an image reference.
pub const NO_IMAGE: &str = "(none)";

/// Appended when an interpreter response fails to parse and we retry once.
pub const INTERPRET_REMINDER: &str = "Your previous answer did not match the required format. Answer again as numbered blocks, each exactly:\n\n1. Sub-claim: <one atomic factual assertion>\n\n   Query: <a search query for that sub-claim>\n\nWhen an image is provided, also include one line starting with \"Image notes:\" describing entities, scene, and any visible text.";

/// Appended when a summarizer response fails to parse and we retry once.
pub const EXTRACT_REMINDER: &str = "Your previous answer did not match the required format. Answer again using one labeled line per item: People, Event, Location, Time, Reason, Background, Impact, Follow-up, Summary. Write \"not mentioned\" for items the article does not cover.";

/// Appended when a verdict response fails to parse and we retry once.
pub const VERDICT_REMINDER: &str = "Your previous answer did not match the required format. Answer again using exactly the template I gave you, starting with \"Verdict:\".";

/// The full template set used by one pipeline run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    pub interpret: String,
    pub summarize: String,
    pub verify_init: String,
    pub verify_upload: String,
    pub verify_verdict: String,
    pub output_format: String,
    pub direct: String,
}

impl Default for PromptSet {
    fn default() -> Self {
        PromptSet {
            interpret: INTERPRET.into(),
            summarize: SUMMARIZE.into(),
            verify_init: VERIFY_INIT.into(),
            verify_upload: VERIFY_UPLOAD.into(),
            verify_verdict: VERIFY_VERDICT.into(),
            output_format: OUTPUT_FORMAT.into(),
            direct: DIRECT.into(),
        }
    }
}

impl PromptSet {
    /// Defaults, with any template overridden by a same-named `.txt` file in
    /// `dir`. Missing files keep the default; read failures propagate.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut set = PromptSet::default();
        let overrides: [(&str, &mut String); 7] = [
            ("interpret.txt", &mut set.interpret),
            ("summarize.txt", &mut set.summarize),
            ("verify_init.txt", &mut set.verify_init),
            ("verify_upload.txt", &mut set.verify_upload),
            ("verify_verdict.txt", &mut set.verify_verdict),
            ("output_format.txt", &mut set.output_format),
            ("direct.txt", &mut set.direct),
        ];
        for (name, slot) in overrides {
            let path = dir.join(name);
            if path.exists() {
                *slot = std::fs::read_to_string(&path)?;
            }
        }
        Ok(set)
    }

    pub fn render_interpret(&self, claim_text: &str, image: Option<&str>) -> String {
        self.interpret
            .replace("{claim}", claim_text)
            .replace("{image}", image.unwrap_or(NO_IMAGE))
    }

    /// The summarize instruction followed by the stripped article text.
    pub fn render_summarize(&self, page_text: &str) -> String {
        format!("{}\n\n{page_text}", self.summarize)
    }

    pub fn render_verify_init(&self, claim_text: &str, image: Option<&str>) -> String {
        self.verify_init
            .replace("{text}", claim_text)
            .replace("{image}", image.unwrap_or(NO_IMAGE))
    }

    pub fn render_verify_upload(&self, evidence_list: &str) -> String {
        self.verify_upload.replace("{text_evidence_list}", evidence_list)
    }

    pub fn render_verify_verdict(&self, labels: &LabelMap) -> String {
        self.verify_verdict
            .replace("{true_verdict_set}", &LabelMap::render_set(labels.true_set()))
            .replace("{false_verdict_set}", &LabelMap::render_set(labels.false_set()))
            .replace("{output_format}", &self.output_format)
    }

    pub fn render_direct(&self, claim_text: &str) -> String {
        format!("{}\n\nClaim: {claim_text}", self.direct)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpret_substitutes_both_placeholders() {
        let p = PromptSet::default();
        let out = p.render_interpret("claim text", Some("img.png"));
        assert!(out.contains("Text: claim text"));
        assert!(out.contains("Image: img.png"));
        let out = p.render_interpret("claim text", None);
        assert!(out.contains(&format!("Image: {NO_IMAGE}")));
        assert!(!out.contains("{claim}"));
    }

    #[test]
    fn verdict_prompt_includes_label_sets_and_format() {
        let p = PromptSet::default();
        let out = p.render_verify_verdict(&LabelMap::default());
        assert!(out.contains("True verdict set: accurate,"));
        assert!(out.contains("mostly true"));
        assert!(out.contains("satire"));
        assert!(out.contains("Verdict: True/False."));
        // The model fills {place_holder} slots itself; they must survive.
        assert!(out.contains("{place_holder}"));
        assert!(!out.contains("{output_format}"));
    }

    #[test]
    fn upload_prompt_substitutes_list() {
        let p = PromptSet::default();
        let out = p.render_verify_upload("1. first\n2. second");
        assert!(out.ends_with("Text evidence: 1. first\n2. second"));
    }

    #[test]
    fn dir_overrides_replace_only_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("direct.txt"), "custom direct {x}").unwrap();
        let set = PromptSet::from_dir(dir.path()).unwrap();
        assert_eq!(set.direct, "custom direct {x}");
        assert_eq!(set.summarize, PromptSet::default().summarize);
    }

    #[test]
    fn templates_keep_expected_anchors() {
        let p = PromptSet::default();
        assert!(p.interpret.starts_with("You are a multimodal misinformation interpreter."));
        assert!(p.summarize.contains("the follow-up event"));
        assert!(p.verify_init.ends_with("do nothing but memorize it."));
        assert!(p.verify_upload.starts_with("The following list is the evidence"));
        assert!(p.direct.contains("answer with 'no'"));
    }
}
