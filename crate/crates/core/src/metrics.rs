//! Detection and identity metrics of tracker output against ground truth.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assoc::{solve_assignment, CostMatrix, INFEASIBLE};
use crate::geometry::{iou, BoundingBox};
use crate::simkit::GroundTruth;
use crate::tracker::FrameResult;

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("tracker output has {results} frames but ground truth has {truth}")]
    FrameCount { results: usize, truth: usize },
    #[error("iou threshold {0} must lie strictly between 0 and 1")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mota: f64,
    pub id_switches: u64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// Visible ground-truth boxes over all frames.
    pub gt_count: u64,
}

impl EvalReport {
    fn from_counts(tp: u64, fp: u64, fn_: u64, id_switches: u64) -> Self {
        let ratio = |num: u64, den: u64| {
            if den > 0 {
                num as f64 / den as f64
            } else {
                0.0
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let gt_count = tp + fn_;
        let mota = if gt_count > 0 {
            1.0 - (fn_ + fp + id_switches) as f64 / gt_count as f64
        } else {
            // Nothing to track: perfect unless something was invented.
            if fp == 0 {
                1.0
            } else {
                1.0 - fp as f64
            }
        };
        Self {
            precision,
            recall,
            f1,
            mota,
            id_switches,
            tp,
            fp,
            fn_,
            gt_count,
        }
    }
}

/// Score `results` against the visible boxes of `gt`, frame by frame.
///
/// Each frame is matched optimally on `1 − iou`, discarding pairs below
/// `iou_thresh`. An identity switch is counted whenever a ground-truth target
/// is matched to a different track id than at its previous matched frame.
pub fn evaluate(
    results: &[FrameResult],
    gt: &GroundTruth,
    iou_thresh: f64,
) -> Result<EvalReport, MetricsError> {
    if !(iou_thresh > 0.0 && iou_thresh < 1.0) {
        return Err(MetricsError::Threshold(iou_thresh));
    }
    if results.len() != gt.frames.len() {
        return Err(MetricsError::FrameCount {
            results: results.len(),
            truth: gt.frames.len(),
        });
    }

    let (mut tp, mut fp, mut fn_, mut idsw) = (0u64, 0u64, 0u64, 0u64);
    let mut last_match: HashMap<u64, u64> = HashMap::new();

    for (result, truth) in results.iter().zip(&gt.frames) {
        let mut truth: Vec<(u64, BoundingBox)> = truth
            .iter()
            .filter(|t| t.visible)
            .map(|t| (t.gid, t.bbox))
            .collect();
        truth.sort_by_key(|t| t.0);
        // Order hypotheses by geometry, not id, so the matching cannot depend
        // on how tracks are labelled or listed.
        let mut hyps: Vec<(u64, BoundingBox)> =
            result.tracks.iter().map(|t| (t.id, t.bbox)).collect();
        hyps.sort_by(|a, b| box_key(&a.1).partial_cmp(&box_key(&b.1)).unwrap());

        let mut cost = CostMatrix::infeasible(truth.len(), hyps.len());
        for (i, (_, g)) in truth.iter().enumerate() {
            for (j, (_, h)) in hyps.iter().enumerate() {
                let overlap = iou(g, h);
                let c = if overlap >= iou_thresh {
                    1.0 - overlap
                } else {
                    INFEASIBLE
                };
                cost.set(i, j, c).expect("cost in range");
            }
        }
        let assignment = solve_assignment(&cost);

        tp += assignment.pairs.len() as u64;
        fn_ += assignment.unmatched_tracks.len() as u64;
        fp += assignment.unmatched_detections.len() as u64;
        for &(i, j) in &assignment.pairs {
            let (gid, tid) = (truth[i].0, hyps[j].0);
            if let Some(prev) = last_match.insert(gid, tid) {
                if prev != tid {
                    idsw += 1;
                }
            }
        }
    }
    Ok(EvalReport::from_counts(tp, fp, fn_, idsw))
}

fn box_key(b: &BoundingBox) -> [f64; 4] {
    [b.x(), b.y(), b.w(), b.h()]
}

/// Per-metric differences `a − b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ReportDelta {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mota: f64,
    pub id_switches: f64,
    pub fp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
}

impl ReportDelta {
    fn between(a: &EvalReport, b: &EvalReport) -> Self {
        Self {
            precision: a.precision - b.precision,
            recall: a.recall - b.recall,
            f1: a.f1 - b.f1,
            mota: a.mota - b.mota,
            id_switches: a.id_switches as f64 - b.id_switches as f64,
            fp: a.fp as f64 - b.fp as f64,
            fn_: a.fn_ as f64 - b.fn_ as f64,
        }
    }

    /// `(name, delta, higher_is_better)` for every metric.
    pub fn entries(&self) -> [(&'static str, f64, bool); 7] {
        [
            ("precision", self.precision, true),
            ("recall", self.recall, true),
            ("f1", self.f1, true),
            ("mota", self.mota, true),
            ("id_switches", self.id_switches, false),
            ("fp", self.fp, false),
            ("fn", self.fn_, false),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Favors {
    A,
    B,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// Mean of per-scenario deltas.
    pub delta: ReportDelta,
    pub scenarios: usize,
}

impl Comparison {
    pub fn favors(&self, metric: &str) -> Option<Favors> {
        self.delta
            .entries()
            .into_iter()
            .find(|e| e.0 == metric)
            .map(|(_, d, higher)| {
                let d = if higher { d } else { -d };
                if d > 0.0 {
                    Favors::A
                } else if d < 0.0 {
                    Favors::B
                } else {
                    Favors::Tie
                }
            })
    }

    /// One line per metric: name, signed delta and which side it favours.
    pub fn summary(&self) -> String {
        let mut out = format!("comparison over {} scenario(s), a - b:\n", self.scenarios);
        for (name, d, _) in self.delta.entries() {
            let side = match self.favors(name).expect("known metric") {
                Favors::A => "a",
                Favors::B => "b",
                Favors::Tie => "tie",
            };
            out.push_str(&format!("{name:>12} {d:+.4} ({side})\n"));
        }
        out
    }
}

pub fn compare(a: &EvalReport, b: &EvalReport) -> Comparison {
    compare_suite(&[(*a, *b)])
}

/// Average the per-scenario deltas of paired reports.
pub fn compare_suite(pairs: &[(EvalReport, EvalReport)]) -> Comparison {
    let n = pairs.len();
    let mut sum = ReportDelta::default();
    for (a, b) in pairs {
        let d = ReportDelta::between(a, b);
        sum.precision += d.precision;
        sum.recall += d.recall;
        sum.f1 += d.f1;
        sum.mota += d.mota;
        sum.id_switches += d.id_switches;
        sum.fp += d.fp;
        sum.fn_ += d.fn_;
    }
    let k = if n > 0 { n as f64 } else { 1.0 };
    Comparison {
        delta: ReportDelta {
            precision: sum.precision / k,
            recall: sum.recall / k,
            f1: sum.f1 / k,
            mota: sum.mota / k,
            id_switches: sum.id_switches / k,
            fp: sum.fp / k,
            fn_: sum.fn_ / k,
        },
        scenarios: n,
    }
}
