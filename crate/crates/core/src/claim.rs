//! Claim inputs and the binary verdict type.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Final verdict of a verification run. There is no "unverified" member: a
/// full pipeline run always lands on one of the two sides, and direct-mode
/// abstention is carried separately on the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryLabel {
    True,
    False,
}

impl std::fmt::Display for BinaryLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BinaryLabel::True => write!(f, "true"),
            BinaryLabel::False => write!(f, "false"),
        }
    }
}

/// Where the image half of a claim lives. Serialized as a bare string; a
/// value with an http(s) scheme is treated as remote, anything else as a
/// local path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum ImageRef {
    Path(String),
    Url(String),
}

impl ImageRef {
    /// Stable string used when the image is referenced in prompts or search
    /// requests.
    pub fn locator(&self) -> &str {
        match self {
            ImageRef::Path(p) => p,
            ImageRef::Url(u) => u,
        }
    }
}

impl From<String> for ImageRef {
    fn from(s: String) -> Self {
        let lower = s.to_ascii_lowercase();
        if lower.starts_with("http://") || lower.starts_with("https://") {
            ImageRef::Url(s)
        } else {
            ImageRef::Path(s)
        }
    }
}

impl From<ImageRef> for String {
    fn from(r: ImageRef) -> Self {
        match r {
            ImageRef::Path(p) => p,
            ImageRef::Url(u) => u,
        }
    }
}

/// One multimodal claim to verify: text plus an optional image, plus the
/// gold label when the claim comes from an evaluation dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    #[serde(default)]
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<BinaryLabel>,
    /// Publication timestamp as given in the source dataset, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_at: Option<String>,
}

impl Claim {
    /// Claim text with whitespace runs collapsed and ends trimmed. Used as
    /// the single retrieval query when interpretation is skipped.
    pub fn normalized_text(&self) -> String {
        normalize_claim(&self.text)
    }

    /// Errors when the claim has no usable text (image-only claims cannot
    /// drive text retrieval without an interpreter).
    pub fn require_text(&self) -> Result<&str> {
        if self.text.trim().is_empty() {
            Err(Error::EmptyClaimText(self.id.clone()))
        } else {
            Ok(&self.text)
        }
    }

    /// A claim must carry at least one modality.
    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() && self.image.is_none() {
            return Err(Error::EmptyClaimText(self.id.clone()));
        }
        Ok(())
    }
}

/// Collapse any whitespace run (spaces, tabs, newlines) to one space and trim.
/// All non-whitespace characters pass through untouched.
pub fn normalize_claim(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_runs() {
        assert_eq!(normalize_claim("  a  b "), "a b");
        assert_eq!(normalize_claim(""), "");
        assert_eq!(normalize_claim("x"), "x");
        assert_eq!(normalize_claim("  a\t b\n\nc "), "a b c");
    }

    #[test]
    fn empty_text_is_rejected() {
        let c = Claim {
            id: "c1".into(),
            text: "  \n".into(),
            image: None,
            gold_label: None,
            published_at: None,
        };
        assert!(matches!(c.require_text(), Err(Error::EmptyClaimText(_))));
        assert!(c.validate().is_err());
    }

    #[test]
    fn image_only_claim_is_valid() {
        let c = Claim {
            id: "c2".into(),
            text: String::new(),
            image: Some(ImageRef::from("photo.jpg".to_string())),
            gold_label: None,
            published_at: None,
        };
        assert!(c.validate().is_ok());
        assert!(c.require_text().is_err());
    }

    #[test]
    fn image_ref_round_trips_as_string() {
        let r: ImageRef = serde_json::from_str("\"https://x.test/a.png\"").unwrap();
        assert_eq!(r, ImageRef::Url("https://x.test/a.png".into()));
        assert_eq!(serde_json::to_string(&r).unwrap(), "\"https://x.test/a.png\"");
        let p: ImageRef = serde_json::from_str("\"img/local.png\"").unwrap();
        assert_eq!(p, ImageRef::Path("img/local.png".into()));
    }

    #[test]
    fn binary_label_serializes_lowercase() {
        assert_eq!(serde_json::to_string(&BinaryLabel::True).unwrap(), "\"true\"");
        assert_eq!(
            serde_json::from_str::<BinaryLabel>("\"false\"").unwrap(),
            BinaryLabel::False
        );
    }
}
