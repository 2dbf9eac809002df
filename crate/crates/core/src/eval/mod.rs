//! Rectangle-metric scoring and dataset-level evaluation.
//!
//! A predicted grasp counts as correct when its orientation differs from
//! some ground-truth rectangle by less than 30 degrees and its oriented
//! Jaccard overlap with that same rectangle exceeds 25%.

mod geometry;

pub use geometry::{intersection_area, jaccard, GeometryError};

use crate::data::{assemble_input, DataError, InputSpec, SampleRecord, SplitMode};
use crate::grasp::GraspRectangle;
use ndarray::Array3;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("label list must be non-empty")]
    EmptyLabels,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("evaluation split is empty")]
    EmptySplit,
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("prediction failed: {0}")]
    Predictor(String),
}

/// Thresholds of the rectangle metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchCriteria {
    /// Maximum angle difference, radians.
    pub angle_threshold: f64,
    /// Minimum Jaccard overlap (exclusive).
    pub jaccard_threshold: f64,
    /// Number of decoded grasps given the chance to match.
    pub top_k: usize,
}

impl Default for MatchCriteria {
    fn default() -> Self {
        Self {
            angle_threshold: PI / 6.0,
            jaccard_threshold: 0.25,
            top_k: 1,
        }
    }
}

/// True when two grasp angles differ by less than `threshold` under the
/// pi-periodic identification of a two-jaw grasp.
pub fn angle_match(phi_pred: f64, phi_label: f64, threshold: f64) -> bool {
    angle_difference(phi_pred, phi_label) < threshold
}

/// Pi-periodic angular distance, in [0, pi/2].
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % PI;
    d.min(PI - d)
}

/// Outcome of scoring one prediction against a label set.
#[derive(Debug, Clone, Copy)]
pub struct MatchOutcome {
    pub matched: bool,
    pub best_jaccard: f64,
    pub best_angle_diff: f64,
}

/// Scores a predicted rectangle against the positive labels.
///
/// A prediction is correct when the angle and Jaccard conditions hold
/// against the same label. `best_jaccard`/`best_angle_diff` report over the
/// labels passing the angle test when any do, otherwise over all labels.
pub fn is_correct(
    pred: &GraspRectangle,
    labels: &[GraspRectangle],
    crit: &MatchCriteria,
) -> Result<MatchOutcome, EvalError> {
    if labels.is_empty() {
        return Err(EvalError::EmptyLabels);
    }
    let mut matched = false;
    let mut best_any = (0.0_f64, f64::MAX);
    let mut best_angle_ok: Option<(f64, f64)> = None;
    for label in labels {
        let diff = angle_difference(pred.theta(), label.theta());
        let j = jaccard(pred, label)?;
        if diff < crit.angle_threshold {
            if j > crit.jaccard_threshold {
                matched = true;
            }
            let entry = best_angle_ok.get_or_insert((j, diff));
            if j > entry.0 {
                *entry = (j, diff);
            }
        }
        if j > best_any.0 || (j == best_any.0 && diff < best_any.1) {
            best_any = (j, diff);
        }
    }
    let (best_jaccard, best_angle_diff) = best_angle_ok.unwrap_or(best_any);
    Ok(MatchOutcome {
        matched,
        best_jaccard,
        best_angle_diff,
    })
}

/// Per-sample evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleResult {
    pub sample_id: String,
    pub matched: bool,
    pub best_jaccard: f64,
    pub best_angle_diff: f64,
}

/// Dataset-level evaluation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_sample: Vec<SampleResult>,
    /// matched / scored, in [0, 1].
    pub accuracy: f64,
    pub split_mode: SplitMode,
    pub input_mode: String,
    /// Samples skipped due to I/O or shape errors: (sample_id, message).
    pub failed: Vec<(String, String)>,
}

impl EvalReport {
    pub fn matched_count(&self) -> usize {
        self.per_sample.iter().filter(|s| s.matched).count()
    }

    /// Structured text rendering: one record per sample plus a summary
    /// block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# graspkit evaluation report");
        let _ = writeln!(
            out,
            "# split={} input={} samples={}",
            self.split_mode,
            self.input_mode,
            self.per_sample.len()
        );
        let _ = writeln!(out, "sample_id\tmatched\tbest_jaccard\tbest_angle_diff_rad");
        for s in &self.per_sample {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}",
                s.sample_id, s.matched, s.best_jaccard, s.best_angle_diff
            );
        }
        let _ = writeln!(out, "# summary");
        let _ = writeln!(
            out,
            "accuracy\t{:.6}\t({}/{})",
            self.accuracy,
            self.matched_count(),
            self.per_sample.len()
        );
        for (id, msg) in &self.failed {
            let _ = writeln!(out, "# failed\t{id}\t{msg}");
        }
        out
    }
}

/// Anything that can produce grasp rectangles for an assembled input.
///
/// The network-backed predictor ignores `sample_id`; test predictors can
/// use it to inject known rectangles and bypass the network.
pub trait GraspPredictor {
    fn predict_rects(
        &self,
        sample_id: &str,
        input: &Array3<f32>,
    ) -> Result<Vec<GraspRectangle>, String>;
}

/// Runs the rectangle metric over a split of dataset records.
///
/// Samples that fail to load are excluded from the accuracy denominator
/// and reported in `failed`.
pub fn evaluate_records(
    predictor: &dyn GraspPredictor,
    records: &[SampleRecord],
    split_ids: &[String],
    input_spec: &InputSpec,
    crit: &MatchCriteria,
    split_mode: SplitMode,
) -> Result<EvalReport, EvalError> {
    if split_ids.is_empty() {
        return Err(EvalError::EmptySplit);
    }
    let by_id: std::collections::HashMap<&str, &SampleRecord> = records
        .iter()
        .map(|r| (r.sample_id.as_str(), r))
        .collect();
    let mut per_sample = Vec::new();
    let mut failed = Vec::new();
    for id in split_ids {
        let Some(rec) = by_id.get(id.as_str()) else {
            failed.push((id.clone(), "sample id not found in dataset".to_string()));
            continue;
        };
        let (input, labels) = match assemble_input(rec, input_spec) {
            Ok(v) => v,
            Err(e) => {
                failed.push((id.clone(), e.to_string()));
                continue;
            }
        };
        if labels.is_empty() {
            failed.push((id.clone(), "no labels survive input assembly".to_string()));
            continue;
        }
        let preds = match predictor.predict_rects(id, &input) {
            Ok(p) => p,
            Err(e) => {
                failed.push((id.clone(), e));
                continue;
            }
        };
        let mut best = MatchOutcome {
            matched: false,
            best_jaccard: 0.0,
            best_angle_diff: f64::MAX,
        };
        for pred in preds.iter().take(crit.top_k.max(1)) {
            let outcome = is_correct(pred, &labels, crit)?;
            if outcome.matched || (!best.matched && outcome.best_jaccard > best.best_jaccard) {
                best = outcome;
            }
            if best.matched {
                break;
            }
        }
        per_sample.push(SampleResult {
            sample_id: id.clone(),
            matched: best.matched,
            best_jaccard: best.best_jaccard,
            best_angle_diff: if best.best_angle_diff == f64::MAX {
                0.0
            } else {
                best.best_angle_diff
            },
        });
    }
    let scored = per_sample.len().max(1);
    let accuracy = per_sample.iter().filter(|s| s.matched).count() as f64 / scored as f64;
    Ok(EvalReport {
        per_sample,
        accuracy,
        split_mode,
        input_mode: input_spec.channels.to_string(),
        failed,
    })
}

/// One row of the component-ablation table.
#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    /// Gaussian grasp representation on (off = flat binary fill).
    pub ggr: bool,
    /// Receptive-field block on (off = one extra residual block).
    pub rfbm: bool,
    /// Attention fusion on (off = plain concat + conv).
    pub mdafn: bool,
    pub accuracy: f64,
    /// Published Cornell image-wise RGB-D accuracy for this setting.
    pub reference: f64,
}

/// Trains and evaluates the four component-ablation settings: each
/// component disabled in turn, then everything enabled. Reference
/// accuracies are the published values for the corresponding settings.
pub fn ablation_matrix(
    net_cfg: crate::net::NetworkConfig,
    records: &[SampleRecord],
    split: &crate::data::Split,
    base: &crate::train::TrainOptions,
) -> Result<Vec<AblationRow>, crate::train::TrainError> {
    use crate::grasp::EncodeMode;
    let settings = [
        (false, true, true, 97.8),
        (true, false, true, 94.4),
        (true, true, false, 96.6),
        (true, true, true, 98.9),
    ];
    let mut rows = Vec::with_capacity(settings.len());
    for (ggr, rfbm, mdafn, reference) in settings {
        let mut cfg = net_cfg;
        cfg.rfb_enabled = rfbm;
        cfg.mdafn_enabled = mdafn;
        let mut opts = base.clone();
        opts.encoder.mode = if ggr {
            EncodeMode::Gaussian
        } else {
            EncodeMode::Binary
        };
        opts.out_dir = base.out_dir.join(format!(
            "ablate_ggr{}_rfbm{}_mdafn{}",
            ggr as u8, rfbm as u8, mdafn as u8
        ));
        std::fs::create_dir_all(&opts.out_dir).map_err(|source| {
            crate::train::TrainError::Io {
                path: opts.out_dir.clone(),
                source,
            }
        })?;
        let mut net = crate::net::Network::<f32>::new(cfg, opts.train.seed)?;
        let outcome = crate::train::train(&mut net, records, split, &opts)?;
        rows.push(AblationRow {
            ggr,
            rfbm,
            mdafn,
            accuracy: outcome.best_val_accuracy,
            reference,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rect(x: f64, y: f64, theta: f64, w: f64, h: f64) -> GraspRectangle {
        GraspRectangle::new(x, y, theta, w, h).unwrap()
    }

    fn deg(d: f64) -> f64 {
        d.to_radians()
    }

    #[test]
    fn angle_match_pi_symmetry() {
        let thr = deg(30.0);
        assert!(angle_match(0.0, PI, thr));
        assert!(angle_match(deg(10.0), deg(35.0), thr));
        assert!(!angle_match(deg(10.0), deg(41.0), thr));
        // wraparound: 80 vs -80 degrees differ by 20 degrees
        assert!(angle_match(deg(80.0), deg(-80.0), thr));
        assert_abs_diff_eq!(
            angle_difference(deg(80.0), deg(-80.0)),
            deg(20.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn angle_match_symmetric_and_periodic() {
        for i in 0..200 {
            let a = -3.0 + 0.03 * i as f64;
            let b = 1.7 - 0.02 * i as f64;
            assert_eq!(
                angle_match(a, b, deg(30.0)),
                angle_match(b, a, deg(30.0))
            );
            assert_abs_diff_eq!(
                angle_difference(a, b),
                angle_difference(a + PI, b),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn is_correct_exact_label() {
        let label = rect(50.0, 60.0, 0.4, 30.0, 15.0);
        let crit = MatchCriteria::default();
        let out = is_correct(&label, &[label], &crit).unwrap();
        assert!(out.matched);
        assert_eq!(out.best_jaccard, 1.0);
    }

    #[test]
    fn is_correct_angle_gate_fails() {
        let label = rect(50.0, 60.0, 0.0, 30.0, 15.0);
        let pred = rect(50.0, 60.0, std::f64::consts::FRAC_PI_4, 30.0, 15.0);
        let out = is_correct(&pred, &[label], &MatchCriteria::default()).unwrap();
        assert!(!out.matched);
    }

    #[test]
    fn is_correct_translated_third_overlap() {
        // overlap exactly 100 / union 300 with equal angles: 1/3 > 0.25
        let label = rect(5.0, 10.0, 0.0, 10.0, 20.0);
        let pred = rect(10.0, 10.0, 0.0, 10.0, 20.0);
        let out = is_correct(&pred, &[label], &MatchCriteria::default()).unwrap();
        assert!(out.matched);
        assert_abs_diff_eq!(out.best_jaccard, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn is_correct_requires_same_label_conjunction() {
        // label A passes the angle test but overlaps too little; label B
        // overlaps heavily but fails the angle test -> no match
        let a = rect(200.0, 200.0, 0.0, 10.0, 5.0);
        let b = rect(50.0, 50.0, deg(80.0), 30.0, 15.0);
        let pred = rect(50.0, 50.0, 0.0, 30.0, 15.0);
        let out = is_correct(&pred, &[a, b], &MatchCriteria::default()).unwrap();
        assert!(!out.matched);
    }

    #[test]
    fn is_correct_rejects_empty_labels() {
        let pred = rect(0.0, 0.0, 0.0, 10.0, 5.0);
        assert!(is_correct(&pred, &[], &MatchCriteria::default()).is_err());
    }
}
