//! Detection-quality metrics and the per-frame posture error protocol.
//!
//! A frame passes when every tracked object lies within the threshold of its
//! own annotation and no object is lost. The error rate is the percentage of
//! frames that fail, i.e. that would need a correction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assignment::{build_cost_matrix, solve_lap};
use crate::error::{Error, Result};
use crate::model::{DetectionSet, GateConfig, TrackState};
use crate::search::TrackHistory;
use crate::simulator::MovementStrata;

/// Distance from the annotation beyond which a tracked object is wrong, µm.
pub const DEFAULT_THRESHOLD: f64 = 7.5;

/// Precision, recall and F1 of one detection set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScores {
    pub true_positives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores detections against annotation points with a one-to-one minimum
/// distance matching; matched pairs within `threshold` are true positives.
pub fn match_detections(
    detections: &DetectionSet,
    annotations: &DetectionSet,
    threshold: f64,
) -> Result<DetectionScores> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "match threshold must be positive, got {threshold}"
        )));
    }
    let tp = if annotations.is_empty() || detections.is_empty() {
        0
    } else {
        let rows = TrackState {
            frame_index: annotations.frame_index,
            positions: annotations.points.clone(),
            lost: vec![false; annotations.len()],
        };
        let cost = build_cost_matrix(&rows, detections, &GateConfig::Uniform(threshold))?;
        let (assignment, _) = solve_lap(&cost)?;
        assignment.detected().count()
    };
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, detections.len());
    let recall = ratio(tp, annotations.len());
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(DetectionScores {
        true_positives: tp,
        precision,
        recall,
        f1,
    })
}

/// Outcome of testing one tracked frame against its annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCheck {
    pub errors: Vec<f64>,
    pub threshold: f64,
    pub lost: Vec<usize>,
}

impl FrameCheck {
    pub fn failed_objects(&self) -> Vec<usize> {
        (0..self.errors.len())
            .filter(|&i| self.errors[i] > self.threshold)
            .collect()
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.lost.is_empty() && self.errors.iter().all(|&e| e <= self.threshold)
    }

    pub fn into_event(self, frame_index: usize) -> ErrorEvent {
        ErrorEvent {
            frame_index,
            failed_objects: self.failed_objects(),
            lost_objects: self.lost.clone(),
            max_error: self.max_error(),
        }
    }
}

/// A frame that needed a correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub frame_index: usize,
    /// Objects further than the threshold from their annotation.
    pub failed_objects: Vec<usize>,
    pub lost_objects: Vec<usize>,
    pub max_error: f64,
}

/// Per-object distances between a tracked state and its annotation.
pub fn frame_check(predicted: &TrackState, annotation: &TrackState, threshold: f64) -> Result<FrameCheck> {
    if predicted.len() != annotation.len() {
        return Err(Error::DimensionMismatch {
            expected: annotation.len(),
            actual: predicted.len(),
        });
    }
    Ok(FrameCheck {
        errors: predicted
            .positions
            .iter()
            .zip(&annotation.positions)
            .map(|(p, a)| (p - a).norm())
            .collect(),
        threshold,
        lost: (0..predicted.len()).filter(|&i| predicted.lost[i]).collect(),
    })
}

/// Whether every object is within `threshold` of its own annotation and none
/// is lost.
pub fn frame_passes(predicted: &TrackState, annotation: &TrackState, threshold: f64) -> Result<bool> {
    Ok(frame_check(predicted, annotation, threshold)?.passes())
}

/// Error rate within one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRate {
    /// Stratum family, e.g. `quartile` or `decile`.
    pub kind: String,
    /// 0-based label; quartile 3 is the top quartile.
    pub label: usize,
    pub frames: usize,
    pub failures: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub frames: usize,
    pub passed: Vec<bool>,
    pub events: Vec<ErrorEvent>,
    /// Percentage of failed frames.
    pub error_rate: f64,
    pub strata: Vec<StratumRate>,
}

impl EvalReport {
    pub fn stratum(&self, kind: &str, label: usize) -> Option<&StratumRate> {
        self.strata.iter().find(|s| s.kind == kind && s.label == label)
    }

    /// Error rate on the top movement quartile.
    pub fn top_quartile_rate(&self) -> Option<f64> {
        self.stratum("quartile", 3).map(|s| s.rate)
    }
}

fn rate(failures: usize, frames: usize) -> f64 {
    if frames == 0 {
        0.0
    } else {
        100.0 * failures as f64 / frames as f64
    }
}

/// Scores a tracking run frame by frame against aligned annotations.
///
/// Each frame's proposal is tested; a failed frame counts once. Movement
/// strata, when given, must cover every frame of the history.
pub fn score_run(
    history: &TrackHistory,
    annotations: &[TrackState],
    strata: Option<&MovementStrata>,
    threshold: f64,
) -> Result<EvalReport> {
    if annotations.len() != history.len() {
        return Err(Error::DimensionMismatch {
            expected: history.len(),
            actual: annotations.len(),
        });
    }
    let mut passed = Vec::with_capacity(history.len());
    let mut events = Vec::new();
    for (record, ann) in history.frames.iter().zip(annotations) {
        let check = frame_check(&record.proposal, ann, threshold)?;
        passed.push(check.passes());
        if !check.passes() {
            events.push(check.into_event(record.frame_index));
        }
    }

    let mut rates = Vec::new();
    if let Some(s) = strata {
        for (kind, bins) in [("quartile", 4usize), ("decile", 10)] {
            let mut frames = vec![0usize; bins];
            let mut failures = vec![0usize; bins];
            for (record, &ok) in history.frames.iter().zip(&passed) {
                let i = s
                    .frame_indices
                    .binary_search(&record.frame_index)
                    .map_err(|_| {
                        Error::InvalidInput(format!(
                            "frame {} has no movement label",
                            record.frame_index
                        ))
                    })?;
                let label = if bins == 4 { s.quartile[i] } else { s.decile[i] };
                frames[label] += 1;
                failures[label] += usize::from(!ok);
            }
            for label in 0..bins {
                rates.push(StratumRate {
                    kind: kind.to_string(),
                    label,
                    frames: frames[label],
                    failures: failures[label],
                    rate: rate(failures[label], frames[label]),
                });
            }
        }
    }
    Ok(EvalReport {
        threshold,
        frames: history.len(),
        error_rate: rate(events.len(), history.len()),
        passed,
        events,
        strata: rates,
    })
}

/// One benchmark cell: a configuration and its scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub k: usize,
    pub n: usize,
    pub gate: f64,
    pub regime: String,
    pub seed: u64,
    /// `all` or a quartile label `Q1`..`Q4`.
    pub stratum: String,
    pub frames: usize,
    pub failures: usize,
    pub error_rate: f64,
}

/// Expands a report into CSV rows: one overall row plus one per quartile.
pub fn report_rows(
    report: &EvalReport,
    model: &str,
    k: usize,
    n: usize,
    gate: f64,
    regime: &str,
    seed: u64,
) -> Vec<ReportRow> {
    let base = |stratum: String, frames: usize, failures: usize, error_rate: f64| ReportRow {
        model: model.to_string(),
        k,
        n,
        gate,
        regime: regime.to_string(),
        seed,
        stratum,
        frames,
        failures,
        error_rate,
    };
    let mut rows = vec![base(
        "all".into(),
        report.frames,
        report.events.len(),
        report.error_rate,
    )];
    rows.extend(
        report
            .strata
            .iter()
            .filter(|s| s.kind == "quartile")
            .map(|s| base(format!("Q{}", s.label + 1), s.frames, s.failures, s.rate)),
    );
    rows
}

/// Writes report rows as CSV with a header.
pub fn write_report_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
