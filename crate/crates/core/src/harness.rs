//! Batch driving: dataset loading, multi-claim pipeline execution, and
//! metric computation over the resulting reports.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::claim::{BinaryLabel, Claim, ImageRef};
use crate::error::{Error, Result};
use crate::label::{map_verdict_label, LabelMap};
use crate::ledger::{CostLedger, StageMeter, StageTimings};
use crate::pipeline::{run_claim_with_meter, PipelineConfig, RunMode};
use crate::prompts::PromptSet;
use crate::providers::ProviderSet;
use crate::verify::VerificationReport;

/// One dataset row: a claim whose gold label is guaranteed present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub claim: Claim,
}

impl DatasetRecord {
    pub fn gold_label(&self) -> BinaryLabel {
        self.claim.gold_label.expect("dataset records always carry a gold label")
    }
}

/// Raw JSONL row shape before label mapping and validation.
#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    text: String,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    published_at: Option<String>,
}

fn parse_gold_label(raw: &str, labels: &LabelMap) -> Result<BinaryLabel> {
    match crate::label::normalize_label(raw).as_str() {
        "true" => Ok(BinaryLabel::True),
        "false" => Ok(BinaryLabel::False),
        _ => map_verdict_label(raw, labels),
    }
}

/// Load a JSONL dataset, mapping labels through `labels` and resolving
/// relative image paths against the dataset's directory. All line errors are
/// aggregated into one report.
pub fn load_dataset(path: &Path, labels: &LabelMap) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::new();
    let mut problems = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = match serde_json::from_str(line) {
            Ok(raw) => raw,
            Err(e) => {
                problems.push(format!("line {lineno}: {e}"));
                continue;
            }
        };
        let gold = match raw.label.as_deref() {
            Some(label) => match parse_gold_label(label, labels) {
                Ok(gold) => gold,
                Err(e) => {
                    problems.push(format!("line {lineno}: {e}"));
                    continue;
                }
            },
            None => {
                problems.push(format!("line {lineno}: missing label"));
                continue;
            }
        };
        let image = match raw.image.map(ImageRef::from) {
            Some(ImageRef::Path(p)) => {
                let resolved = if Path::new(&p).is_absolute() {
                    std::path::PathBuf::from(&p)
                } else {
                    base.join(&p)
                };
                if !resolved.exists() {
                    problems.push(format!("line {lineno}: image file not found: {p}"));
                    continue;
                }
                Some(ImageRef::Path(resolved.to_string_lossy().into_owned()))
            }
            other => other,
        };
        let claim = Claim {
            id: raw.id,
            text: raw.text,
            image,
            gold_label: Some(gold),
            published_at: raw.published_at,
        };
        if let Err(e) = claim.validate() {
            problems.push(format!("line {lineno}: {e}"));
            continue;
        }
        records.push(DatasetRecord { claim });
    }

    if !problems.is_empty() {
        return Err(Error::DatasetFormat {
            path: path.display().to_string(),
            details: problems.join("; "),
        });
    }
    Ok(records)
}

/// Run every record through the pipeline with bounded claim-level
/// parallelism. Per-record failures become error reports; the batch never
/// aborts.
pub async fn run_batch(
    providers: &ProviderSet,
    prompts: &PromptSet,
    labels: &LabelMap,
    cfg: &PipelineConfig,
    records: &[DatasetRecord],
    mode: RunMode,
) -> Vec<VerificationReport> {
    stream::iter(records.iter().map(|record| async move {
        let meter = StageMeter::new();
        match run_claim_with_meter(providers, prompts, labels, cfg, &record.claim, mode, &meter)
            .await
        {
            Ok(report) => report,
            Err(e) => {
                tracing::warn!(claim = %record.claim.id, error = %e, "claim run failed");
                VerificationReport::from_error(&record.claim.id, &e, &meter)
            }
        }
    }))
    .buffered(cfg.claim_parallelism.max(1))
    .collect()
    .await
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
}

impl ConfusionMatrix {
    /// Records that produced a verdict.
    pub fn evaluated(&self) -> u64 {
        self.true_positives + self.false_positives + self.false_negatives + self.true_negatives
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub accuracy: f64,
    /// Macro average over the True and False classes.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: ConfusionMatrix,
    /// attempted / total; attempts are reports carrying a verdict.
    pub verification_rate: f64,
    /// correct / attempted.
    pub correctness_rate: f64,
    pub mean_timings: StageTimings,
    pub total_cost: CostLedger,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Score reports against gold labels. Reports and records must pair one to
/// one by claim id. Abstentions and error reports count toward totals but
/// not toward the confusion matrix.
pub fn compute_metrics(
    reports: &[VerificationReport],
    records: &[DatasetRecord],
) -> Result<MetricsSummary> {
    let mut gold: HashMap<&str, BinaryLabel> = HashMap::with_capacity(records.len());
    for record in records {
        if gold.insert(record.claim.id.as_str(), record.gold_label()).is_some() {
            return Err(Error::Alignment(format!(
                "duplicate claim id in records: {}",
                record.claim.id
            )));
        }
    }
    if reports.len() != records.len() {
        return Err(Error::Alignment(format!(
            "{} reports vs {} records",
            reports.len(),
            records.len()
        )));
    }

    let mut confusion = ConfusionMatrix::default();
    let mut attempted = 0u64;
    let mut correct = 0u64;
    let mut seen: HashMap<&str, ()> = HashMap::with_capacity(reports.len());
    let mut timing_sum = [Duration::ZERO; 3];
    let mut total_cost = CostLedger::default();

    for report in reports {
        let Some(label) = gold.get(report.claim_id.as_str()) else {
            return Err(Error::Alignment(format!(
                "report for unknown claim id: {}",
                report.claim_id
            )));
        };
        if seen.insert(report.claim_id.as_str(), ()).is_some() {
            return Err(Error::Alignment(format!(
                "duplicate claim id in reports: {}",
                report.claim_id
            )));
        }
        timing_sum[0] += report.timings.retrieve;
        timing_sum[1] += report.timings.summarize;
        timing_sum[2] += report.timings.verify;
        total_cost += report.cost;

        let Some(verdict) = report.verdict else {
            continue; // abstention or error: not attempted
        };
        attempted += 1;
        if verdict == *label {
            correct += 1;
        }
        match (verdict, label) {
            (BinaryLabel::True, BinaryLabel::True) => confusion.true_positives += 1,
            (BinaryLabel::True, BinaryLabel::False) => confusion.false_positives += 1,
            (BinaryLabel::False, BinaryLabel::True) => confusion.false_negatives += 1,
            (BinaryLabel::False, BinaryLabel::False) => confusion.true_negatives += 1,
        }
    }

    let ConfusionMatrix {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
    } = confusion;
    let precision_true = ratio(tp, tp + fp);
    let recall_true = ratio(tp, tp + fn_);
    let precision_false = ratio(tn, tn + fn_);
    let recall_false = ratio(tn, tn + fp);

    let n = reports.len() as u32;
    let mean_timings = if n == 0 {
        StageTimings::default()
    } else {
        StageTimings {
            retrieve: timing_sum[0] / n,
            summarize: timing_sum[1] / n,
            verify: timing_sum[2] / n,
        }
    };

    Ok(MetricsSummary {
        accuracy: ratio(tp + tn, confusion.evaluated()),
        precision: (precision_true + precision_false) / 2.0,
        recall: (recall_true + recall_false) / 2.0,
        f1: (f1_of(precision_true, recall_true) + f1_of(precision_false, recall_false)) / 2.0,
        confusion,
        verification_rate: ratio(attempted, reports.len() as u64),
        correctness_rate: ratio(correct, attempted),
        mean_timings,
        total_cost,
    })
}

/// Aligned plain-text rendering of a metrics summary.
pub fn render_metrics_table(metrics: &MetricsSummary) -> String {
    let c = &metrics.confusion;
    let rows: Vec<(&str, String)> = vec![
        ("accuracy", format!("{:.4}", metrics.accuracy)),
        ("precision", format!("{:.4}", metrics.precision)),
        ("recall", format!("{:.4}", metrics.recall)),
        ("f1", format!("{:.4}", metrics.f1)),
        (
            "confusion",
            format!(
                "TP={} FP={} FN={} TN={}",
                c.true_positives, c.false_positives, c.false_negatives, c.true_negatives
            ),
        ),
        ("verification_rate", format!("{:.4}", metrics.verification_rate)),
        ("correctness_rate", format!("{:.4}", metrics.correctness_rate)),
        (
            "mean_timings",
            format!(
                "retrieve={:.3}s summarize={:.3}s verify={:.3}s total={:.3}s",
                metrics.mean_timings.retrieve.as_secs_f64(),
                metrics.mean_timings.summarize.as_secs_f64(),
                metrics.mean_timings.verify.as_secs_f64(),
                metrics.mean_timings.total().as_secs_f64(),
            ),
        ),
        (
            "total_cost",
            format!(
                "retrieve={} summarize={} verify={} total={}",
                metrics.total_cost.retrieve,
                metrics.total_cost.summarize,
                metrics.total_cost.verify,
                metrics.total_cost.total(),
            ),
        ),
    ];
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}
