//! Training-free multimodal claim verification: interpret a claim, retrieve
//! and extract evidence from the open web, score and rank it, then drive a
//! staged LLM verification protocol to a binary verdict with justification.

pub mod claim;
pub mod error;
pub mod evaluate;
pub mod extract;
pub mod harness;
pub mod interpret;
pub mod label;
pub mod ledger;
pub mod pipeline;
pub mod prompts;
pub mod providers;
pub mod retrieve;
pub mod verify;

pub use claim::{normalize_claim, BinaryLabel, Claim, ImageRef};
pub use error::{Error, Result};
pub use evaluate::{EvaluatorConfig, ScoredEvidence};
pub use extract::{EvidenceDimensions, StructuredEvidence};
pub use harness::{
    compute_metrics, load_dataset, render_metrics_table, run_batch, ConfusionMatrix,
    DatasetRecord, MetricsSummary,
};
pub use interpret::{InterpretationResult, SubClaim};
pub use pipeline::{run_claim, PipelineConfig, RunMode};
pub use verify::{EvidenceCitation, Stance, VerificationReport};
pub use label::{map_verdict_label, normalize_label, LabelMap};
pub use ledger::{Bucket, CallMeta, CostLedger, StageMeter, StageTimings, UsdMicros};
