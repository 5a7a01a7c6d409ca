//! Error type shared across the pipeline.

use thiserror::Error;

/// Everything that can go wrong between loading a claim and writing a report.
#[derive(Debug, Error)]
pub enum Error {
    /// A model verdict string is not present in the configured label map.
    #[error("unknown verdict label: {0:?}")]
    UnknownLabel(String),

    /// A claim arrived with no usable text and no way to derive a query.
    #[error("claim {0:?} has no text to build a query from")]
    EmptyClaimText(String),

    /// A provider could not be reached, or a replay transcript has no entry
    /// for the request.
    #[error("provider {provider} unavailable: {reason}")]
    ProviderUnavailable { provider: String, reason: String },

    /// A provider answered with a payload that does not match its wire shape.
    #[error("malformed response from {provider}: {reason}")]
    MalformedResponse { provider: String, reason: String },

    /// A candidate page could not be fetched.
    #[error("fetch failed for {url}: {reason}")]
    FetchFailed { url: String, reason: String },

    /// A fetched body exceeded the configured size ceiling.
    #[error("body for {url} exceeds {limit} bytes")]
    OversizeBody { url: String, limit: usize },

    /// A fetched document is neither HTML nor plain text.
    #[error("unsupported content type {content_type:?} for {url}")]
    UnsupportedContentType { url: String, content_type: String },

    /// The interpreter output could not be parsed even after a reprompt.
    #[error("could not parse interpretation output: {0}")]
    InterpretationParse(String),

    /// The summarizer output could not be parsed even after a reprompt.
    #[error("could not parse extraction output for {url}: {reason}")]
    ExtractionParse { url: String, reason: String },

    /// The verdict turn could not be parsed even after a reprompt.
    #[error("could not parse verdict output: {0}")]
    VerdictParse(String),

    /// Every retrieval call failed, so there is no candidate pool at all.
    #[error("all retrieval channels failed: {0}")]
    RetrievalEmpty(String),

    /// One or more dataset lines were rejected.
    #[error("dataset {path} is malformed:\n{details}")]
    DatasetFormat { path: String, details: String },

    /// Predictions and gold labels do not line up by claim id.
    #[error("prediction/gold alignment error: {0}")]
    Alignment(String),

    /// A config file or flag combination is invalid.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
