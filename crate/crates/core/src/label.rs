//! Mapping from fine-grained fact-checker verdict strings to binary labels.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;

use crate::claim::BinaryLabel;
use crate::error::{Error, Result};

/// Verdict strings that count as true. The published checker vocabularies
/// mix hyphen and space forms, so everything is matched after
/// [`normalize_label`].
const DEFAULT_TRUE_LABELS: &[&str] = &[
    "Accurate",
    "Mostly-Accurate",
    "Correct",
    "Partially-Correct",
    "Mostly correct",
    "Partially True",
    "Mostly True",
    "True",
];

/// Verdict strings that count as false. "Missing Context" appears twice in
/// the source vocabulary; the duplicate collapses under normalization.
const DEFAULT_FALSE_LABELS: &[&str] = &[
    "Misleading",
    "Missing Context",
    "Altered",
    "Synthetic Media",
    "Miscapthioned",
    "Satire",
    "Fake News",
    "Inaccurate",
    "Incorrect",
    "Likely False",
    "Misrepresented",
    "Missing Context",
    "Mostly False",
];

/// Lowercase, treat hyphens as spaces, collapse whitespace runs, trim.
pub fn normalize_label(raw: &str) -> String {
    raw.to_lowercase()
        .replace('-', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Disjoint sets of normalized verdict strings for the two binary classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    true_set: BTreeSet<String>,
    false_set: BTreeSet<String>,
}

#[derive(Deserialize)]
struct LabelMapFile {
    true_labels: Vec<String>,
    false_labels: Vec<String>,
}

impl Default for LabelMap {
    fn default() -> Self {
        LabelMap::new(
            DEFAULT_TRUE_LABELS.iter().map(|s| s.to_string()),
            DEFAULT_FALSE_LABELS.iter().map(|s| s.to_string()),
        )
        .expect("built-in label sets are disjoint")
    }
}

impl LabelMap {
    /// Build from raw label lists, normalizing each entry. Fails if any
    /// normalized string would land in both sets.
    pub fn new(
        true_labels: impl IntoIterator<Item = String>,
        false_labels: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let true_set: BTreeSet<String> =
            true_labels.into_iter().map(|s| normalize_label(&s)).collect();
        let false_set: BTreeSet<String> =
            false_labels.into_iter().map(|s| normalize_label(&s)).collect();
        if let Some(shared) = true_set.intersection(&false_set).next() {
            return Err(Error::InvalidConfig(format!(
                "label {shared:?} appears in both true_labels and false_labels"
            )));
        }
        if true_set.contains("") || false_set.contains("") {
            return Err(Error::InvalidConfig(
                "label lists may not contain empty strings".into(),
            ));
        }
        Ok(LabelMap { true_set, false_set })
    }

    /// Load from a JSON file with `true_labels` / `false_labels` arrays.
    pub fn from_file(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        let file: LabelMapFile = serde_json::from_str(&raw)
            .map_err(|e| Error::InvalidConfig(format!("label map {}: {e}", path.display())))?;
        LabelMap::new(file.true_labels, file.false_labels)
    }

    pub fn true_set(&self) -> &BTreeSet<String> {
        &self.true_set
    }

    pub fn false_set(&self) -> &BTreeSet<String> {
        &self.false_set
    }

    /// Render a set for prompt interpolation: comma-separated, sorted.
    pub fn render_set(set: &BTreeSet<String>) -> String {
        set.iter().cloned().collect::<Vec<_>>().join(", ")
    }
}

/// Map a raw verdict string onto the binary scale.
pub fn map_verdict_label(raw: &str, map: &LabelMap) -> Result<BinaryLabel> {
    let norm = normalize_label(raw);
    if map.true_set.contains(&norm) {
        Ok(BinaryLabel::True)
    } else if map.false_set.contains(&norm) {
        Ok(BinaryLabel::False)
    } else {
        Err(Error::UnknownLabel(raw.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every default vocabulary entry, with its expected side.
    const TABLE: &[(&str, BinaryLabel)] = &[
        ("Accurate", BinaryLabel::True),
        ("Mostly-Accurate", BinaryLabel::True),
        ("Correct", BinaryLabel::True),
        ("Partially-Correct", BinaryLabel::True),
        ("Mostly correct", BinaryLabel::True),
        ("Partially True", BinaryLabel::True),
        ("Mostly True", BinaryLabel::True),
        ("True", BinaryLabel::True),
        ("Misleading", BinaryLabel::False),
        ("Missing Context", BinaryLabel::False),
        ("Altered", BinaryLabel::False),
        ("Synthetic Media", BinaryLabel::False),
        ("Miscapthioned", BinaryLabel::False),
        ("Satire", BinaryLabel::False),
        ("Fake News", BinaryLabel::False),
        ("Inaccurate", BinaryLabel::False),
        ("Incorrect", BinaryLabel::False),
        ("Likely False", BinaryLabel::False),
        ("Misrepresented", BinaryLabel::False),
        ("Missing Context", BinaryLabel::False),
        ("Mostly False", BinaryLabel::False),
    ];

    #[test]
    fn default_table_maps_every_entry() {
        assert_eq!(TABLE.len(), 21);
        let map = LabelMap::default();
        for (raw, want) in TABLE {
            assert_eq!(map_verdict_label(raw, &map).unwrap(), *want, "label {raw:?}");
        }
    }

    #[test]
    fn case_hyphen_and_whitespace_variants_map() {
        let map = LabelMap::default();
        for (raw, want) in TABLE {
            let upper = raw.to_uppercase();
            let lower = raw.to_lowercase();
            let hyphened = raw.replace(' ', "-");
            let spaced = format!("  {}  ", raw.replace('-', " "));
            for v in [upper, lower, hyphened, spaced] {
                assert_eq!(map_verdict_label(&v, &map).unwrap(), *want, "variant {v:?}");
            }
        }
    }

    #[test]
    fn unknown_label_is_an_error() {
        let map = LabelMap::default();
        for raw in ["plausible", "Miscaptioned", "half true", ""] {
            assert!(
                matches!(map_verdict_label(raw, &map), Err(Error::UnknownLabel(_))),
                "expected UnknownLabel for {raw:?}"
            );
        }
    }

    #[test]
    fn default_sets_have_expected_sizes() {
        let map = LabelMap::default();
        assert_eq!(map.true_set().len(), 8);
        // "missing context" is listed twice and collapses to one entry.
        assert_eq!(map.false_set().len(), 12);
    }

    #[test]
    fn overlapping_sets_are_rejected() {
        let err = LabelMap::new(
            vec!["True".to_string(), "Mostly-True".to_string()],
            vec!["mostly true".to_string()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn loads_from_json_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.json");
        std::fs::write(
            &path,
            r#"{"true_labels":["Yes","Confirmed"],"false_labels":["No"]}"#,
        )
        .unwrap();
        let map = LabelMap::from_file(&path).unwrap();
        assert_eq!(map_verdict_label("confirmed", &map).unwrap(), BinaryLabel::True);
        assert_eq!(map_verdict_label("NO", &map).unwrap(), BinaryLabel::False);
        assert!(map_verdict_label("true", &map).is_err());
    }

    #[test]
    fn render_set_is_sorted_and_comma_separated() {
        let map = LabelMap::new(
            vec!["b".to_string(), "a".to_string()],
            vec!["c".to_string()],
        )
        .unwrap();
        assert_eq!(LabelMap::render_set(map.true_set()), "a, b");
    }
}
