//! Detection error tradeoff (DET) evaluation.
//!
//! A DET curve plots the false negative rate against the false positive rate
//! as the decision threshold sweeps over the scores. An example is predicted
//! positive at threshold `t` iff `score > t`. Both the area under the curve
//! and the equal error rate are "lower is better".

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::learner::Predictor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub fnr: f64,
}

/// Sweep points in ascending FPR order, from the `+inf` threshold (nothing
/// accepted, `(0, 1)`) to the `-inf` threshold (everything accepted, `(1, 0)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
    pub positives: usize,
    pub negatives: usize,
}

pub fn det_curve(scores: &[f64], labels: &[bool]) -> Result<DetCurve> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("scores contain NaN".into()));
    }
    let positives = labels.iter().filter(|&&b| b).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (positives as f64, negatives as f64);
    let point = |threshold: f64, tp: usize, fp: usize| DetPoint {
        threshold,
        fpr: fp as f64 / n,
        fnr: (positives - tp) as f64 / p,
    };
    let mut points = vec![point(f64::INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        // Everything strictly above `s` is already counted.
        points.push(point(s, tp, fp));
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
    }
    points.push(point(f64::NEG_INFINITY, tp, fp));
    Ok(DetCurve {
        points,
        positives,
        negatives,
    })
}

/// Trapezoidal area under FNR as a function of FPR.
pub fn auc_det(curve: &DetCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].fnr + w[1].fnr) / 2.0)
        .sum()
}

/// Equal error rate: the first crossing of FNR and FPR by ascending FPR,
/// linearly interpolated between the two straddling sweep points.
pub fn eer(curve: &DetCurve) -> f64 {
    let pts = &curve.points;
    let gap = |q: &DetPoint| q.fnr - q.fpr;
    for k in 0..pts.len() {
        let d1 = gap(&pts[k]);
        if d1 > 0.0 {
            continue;
        }
        if d1 == 0.0 || k == 0 {
            return pts[k].fpr;
        }
        let (a, b) = (&pts[k - 1], &pts[k]);
        let d0 = gap(a);
        let t = d0 / (d0 - d1);
        return a.fpr + t * (b.fpr - a.fpr);
    }
    // Unreachable for curves from `det_curve`, which end at (1, 0).
    pts.last().map_or(0.0, |q| q.fpr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub event: String,
    pub positives: usize,
    pub negatives: usize,
    /// `None` when the event has no positives or no negatives in the set.
    pub auc: Option<f64>,
    pub eer: Option<f64>,
    #[serde(skip)]
    pub curve: Option<DetCurve>,
}

impl EventReport {
    pub fn is_skipped(&self) -> bool {
        self.auc.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub events: Vec<EventReport>,
}

/// Per-event DET metrics from a score matrix (`scores[example][class]`).
pub fn evaluate_scores(scores: &[Vec<f64>], test: &LabeledDataset) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if scores.len() != test.len() {
        return Err(Error::DimensionMismatch {
            expected: test.len(),
            actual: scores.len(),
        });
    }
    let mut events = Vec::with_capacity(test.num_classes());
    for (c, name) in test.class_names().iter().enumerate() {
        let labels: Vec<bool> = test.examples().iter().map(|r| r.label.get(c)).collect();
        let column = scores
            .iter()
            .map(|row| {
                row.get(c).copied().ok_or(Error::DimensionMismatch {
                    expected: test.num_classes(),
                    actual: row.len(),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let positives = labels.iter().filter(|&&b| b).count();
        let negatives = labels.len() - positives;
        let mut report = EventReport {
            event: name.clone(),
            positives,
            negatives,
            auc: None,
            eer: None,
            curve: None,
        };
        if positives > 0 && negatives > 0 {
            let curve = det_curve(&column, &labels)?;
            report.auc = Some(auc_det(&curve));
            report.eer = Some(eer(&curve));
            report.curve = Some(curve);
        }
        events.push(report);
    }
    Ok(MetricsReport { events })
}

pub fn evaluate(predictor: &dyn Predictor, test: &LabeledDataset) -> Result<MetricsReport> {
    if predictor.input_dim() != test.dim() || predictor.num_classes() != test.num_classes() {
        return Err(Error::InvalidConfig(format!(
            "predictor is {}->{}, test set is {}->{}",
            predictor.input_dim(),
            predictor.num_classes(),
            test.dim(),
            test.num_classes()
        )));
    }
    let scores = predictor.predict_proba_many(&test.features())?;
    evaluate_scores(&scores, test)
}

fn pct(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{:.2}", 100.0 * x))
}

impl MetricsReport {
    pub fn auc(&self, event: usize) -> Option<f64> {
        self.events.get(event).and_then(|e| e.auc)
    }

    pub fn eer(&self, event: usize) -> Option<f64> {
        self.events.get(event).and_then(|e| e.eer)
    }

    /// Mean AUC over evaluated events.
    pub fn mean_auc(&self) -> Option<f64> {
        let v: Vec<f64> = self.events.iter().filter_map(|e| e.auc).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Plain-text table with AUC and EER as percentages to two decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>8} {:>8} {:>9} {:>9}", "event", "AUC(%)", "EER(%)", "positives", "negatives");
        for e in &self.events {
            let _ = writeln!(
                out,
                "{:<16} {:>8} {:>8} {:>9} {:>9}",
                e.event,
                pct(e.auc),
                pct(e.eer),
                e.positives,
                e.negatives
            );
        }
        out
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Writes one `det_<event>.csv` per evaluated event into `dir` and
    /// returns the paths. Columns: `threshold,fpr,fnr`.
    pub fn save_det_points(&self, dir: impl AsRef<Path>) -> Result<Vec<std::path::PathBuf>> {
        let mut written = Vec::new();
        for e in &self.events {
            let Some(curve) = &e.curve else { continue };
            let path = dir.as_ref().join(format!("det_{}.csv", e.event));
            let mut text = String::from("threshold,fpr,fnr\n");
            for q in &curve.points {
                let _ = writeln!(text, "{},{},{}", q.threshold, q.fpr, q.fnr);
            }
            std::fs::write(&path, text).map_err(|err| Error::io(&path, err))?;
            written.push(path);
        }
        Ok(written)
    }
}
