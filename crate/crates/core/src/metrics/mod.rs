//! Instance-level evaluation with one-to-one matching.

mod hungarian;

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::LabelVolume;

pub use hungarian::{assignment_cost, hungarian};

/// Sparse pairwise overlaps between ground-truth and predicted instances.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapMatrix {
    pub gt_ids: Vec<u32>,
    pub pred_ids: Vec<u32>,
    pub gt_sizes: Vec<usize>,
    pub pred_sizes: Vec<usize>,
    /// Intersection counts keyed by (gt index, pred index); absent pairs are 0.
    pub intersections: BTreeMap<(usize, usize), usize>,
}

impl OverlapMatrix {
    /// `|A ∩ B| / |A ∪ B|` for one pair of indices.
    pub fn pair_accuracy(&self, g: usize, p: usize) -> f64 {
        match self.intersections.get(&(g, p)) {
            Some(&i) => i as f64 / (self.gt_sizes[g] + self.pred_sizes[p] - i) as f64,
            None => 0.0,
        }
    }

    pub fn intersection(&self, g: usize, p: usize) -> usize {
        self.intersections.get(&(g, p)).copied().unwrap_or(0)
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.gt_ids.len())
            .map(|g| (0..self.pred_ids.len()).map(|p| self.pair_accuracy(g, p)).collect())
            .collect()
    }
}

fn check_shapes(gt: &LabelVolume, pred: &LabelVolume) -> Result<()> {
    if gt.shape() != pred.shape() {
        return Err(Error::ShapeMismatch(gt.shape(), pred.shape()));
    }
    Ok(())
}

/// One pass over the voxels accumulating co-occurrence counts.
pub fn overlap_matrix(gt: &LabelVolume, pred: &LabelVolume) -> Result<OverlapMatrix> {
    check_shapes(gt, pred)?;
    let gt_counts = gt.counts();
    let pred_counts = pred.counts();
    let gt_index: HashMap<u32, usize> = gt_counts.iter().enumerate().map(|(i, &(id, _))| (id, i)).collect();
    let pred_index: HashMap<u32, usize> = pred_counts.iter().enumerate().map(|(i, &(id, _))| (id, i)).collect();
    let mut pairs: HashMap<(usize, usize), usize> = HashMap::new();
    for (&g, &p) in gt.labels().iter().zip(pred.labels()) {
        if g != 0 && p != 0 {
            *pairs.entry((gt_index[&g], pred_index[&p])).or_default() += 1;
        }
    }
    Ok(OverlapMatrix {
        gt_ids: gt_counts.iter().map(|c| c.0).collect(),
        pred_ids: pred_counts.iter().map(|c| c.0).collect(),
        gt_sizes: gt_counts.iter().map(|c| c.1).collect(),
        pred_sizes: pred_counts.iter().map(|c| c.1).collect(),
        intersections: pairs.into_iter().collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt_id: u32,
    pub pred_id: u32,
    pub pair_accuracy: f64,
    pub true_positive: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub n_gt: usize,
    pub n_pred: usize,
    /// Set when there are no predicted instances; precision is then 0.
    pub no_predictions: bool,
    /// Every pair produced by the assignment, including ones below threshold.
    pub matching: Vec<MatchedPair>,
    /// Sum of pair accuracy over the assignment.
    pub total_pair_accuracy: f64,
    /// Voxel-level scores pooled over true-positive pairs.
    pub voxel_precision: f64,
    pub voxel_recall: f64,
    pub voxel_accuracy: f64,
    pub match_threshold: f64,
    pub largest_only: bool,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Restricts labels to the instance with the most voxels (ties: lower id).
pub fn largest_instance(labels: &LabelVolume) -> LabelVolume {
    let Some(&(keep, _)) = labels.counts().iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))) else {
        return labels.clone();
    };
    let mut out = labels.clone();
    for l in out.labels_mut() {
        if *l != keep {
            *l = 0;
        }
    }
    out
}

/// Matches instances by maximum total pair accuracy and counts a matched pair
/// as a true positive when its accuracy exceeds `match_threshold`.
///
/// With `largest_only`, only the largest ground-truth instance is scored.
pub fn evaluate(gt: &LabelVolume, pred: &LabelVolume, match_threshold: f64, largest_only: bool) -> Result<EvalReport> {
    check_shapes(gt, pred)?;
    let restricted;
    let gt = if largest_only {
        restricted = largest_instance(gt);
        &restricted
    } else {
        gt
    };
    let m = overlap_matrix(gt, pred)?;
    let (n_gt, n_pred) = (m.gt_ids.len(), m.pred_ids.len());
    let cost: Vec<Vec<f64>> = m.dense().into_iter().map(|row| row.into_iter().map(|a| -a).collect()).collect();
    let assignment = if n_gt > 0 && n_pred > 0 { hungarian(&cost) } else { vec![None; n_gt] };
    let mut matching = Vec::new();
    let mut total = 0.0;
    let (mut inter, mut gt_vox, mut pred_vox) = (0usize, 0usize, 0usize);
    for (g, p) in assignment.iter().enumerate() {
        let Some(p) = *p else { continue };
        let acc = m.pair_accuracy(g, p);
        total += acc;
        let tp = acc > match_threshold;
        if tp {
            inter += m.intersection(g, p);
            gt_vox += m.gt_sizes[g];
            pred_vox += m.pred_sizes[p];
        }
        matching.push(MatchedPair {
            gt_id: m.gt_ids[g],
            pred_id: m.pred_ids[p],
            pair_accuracy: acc,
            true_positive: tp,
        });
    }
    let tp = matching.iter().filter(|p| p.true_positive).count();
    let (fp, fn_) = (n_pred - tp, n_gt - tp);
    Ok(EvalReport {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        accuracy: ratio(tp, tp + fp + fn_),
        tp,
        fp,
        fn_,
        n_gt,
        n_pred,
        no_predictions: n_pred == 0,
        matching,
        total_pair_accuracy: total,
        voxel_precision: ratio(inter, pred_vox),
        voxel_recall: ratio(inter, gt_vox),
        voxel_accuracy: ratio(inter, gt_vox + pred_vox - inter),
        match_threshold,
        largest_only,
    })
}

/// Fixed-order percentage summary, e.g. `Pre 100.00 Rec 100.00 Acc 100.00`.
pub fn format_table(r: &EvalReport) -> String {
    let mut s = format!(
        "Pre {:.2} Rec {:.2} Acc {:.2}",
        100.0 * r.precision,
        100.0 * r.recall,
        100.0 * r.accuracy
    );
    if r.largest_only {
        let _ = write!(
            s,
            "\nVoxel Pre {:.2} Rec {:.2} Acc {:.2}",
            100.0 * r.voxel_precision,
            100.0 * r.voxel_recall,
            100.0 * r.voxel_accuracy
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(labels: &[u32]) -> LabelVolume {
        LabelVolume::new([1, 1, labels.len()], labels.to_vec()).unwrap()
    }

    #[test]
    fn identical_is_perfect() {
        let gt = line(&[1, 1, 0, 2, 2, 2]);
        let relabeled = line(&[7, 7, 0, 3, 3, 3]);
        let r = evaluate(&gt, &relabeled, 0.0, false).unwrap();
        assert_eq!((r.precision, r.recall, r.accuracy), (1.0, 1.0, 1.0));
        assert_eq!(format_table(&r), "Pre 100.00 Rec 100.00 Acc 100.00");
        let m = overlap_matrix(&gt, &gt).unwrap();
        assert_eq!(m.dense(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn disjoint_is_all_zero() {
        let m = overlap_matrix(&line(&[1, 0]), &line(&[0, 1])).unwrap();
        assert!(m.intersections.is_empty());
        assert_eq!(m.dense(), vec![vec![0.0]]);
    }

    #[test]
    fn partial_overlap_arithmetic() {
        // A: 100 voxels, B: 60 voxels, 30 shared
        let mut g = vec![0u32; 130];
        let mut p = vec![0u32; 130];
        g[..100].fill(1);
        p[70..].fill(1);
        let m = overlap_matrix(&line(&g), &line(&p)).unwrap();
        assert_eq!(m.intersection(0, 0), 30);
        assert!((m.pair_accuracy(0, 0) - 30.0 / 130.0).abs() < 1e-15);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let r = evaluate(&line(&[1, 1]), &line(&[0, 0]), 0.0, false).unwrap();
        assert_eq!((r.precision, r.recall, r.accuracy), (0.0, 0.0, 0.0));
        assert!(r.no_predictions);
        assert_eq!(r.fn_, 1);
    }

    #[test]
    fn threshold_demotes_weak_matches() {
        let gt = line(&[1, 1, 1, 1, 0]);
        let pred = line(&[0, 0, 0, 2, 2]);
        let loose = evaluate(&gt, &pred, 0.0, false).unwrap();
        assert_eq!(loose.tp, 1);
        let strict = evaluate(&gt, &pred, 0.5, false).unwrap();
        assert_eq!((strict.tp, strict.fp, strict.fn_), (0, 1, 1));
        assert_eq!(strict.matching.len(), 1);
    }

    #[test]
    fn largest_only_reports_voxel_scores() {
        let gt = line(&[1, 1, 1, 1, 0, 2, 2]);
        let pred = line(&[5, 5, 5, 0, 0, 2, 2]);
        let r = evaluate(&gt, &pred, 0.0, true).unwrap();
        assert_eq!(r.n_gt, 1);
        assert_eq!(r.tp, 1);
        assert_eq!(r.fp, 1);
        assert_eq!(r.voxel_precision, 1.0);
        assert_eq!(r.voxel_recall, 0.75);
        assert_eq!(r.voxel_accuracy, 0.75);
        assert!(format_table(&r).contains("Voxel Pre 100.00 Rec 75.00 Acc 75.00"));
    }

    #[test]
    fn json_uses_fn_key() {
        let r = evaluate(&line(&[1]), &line(&[1]), 0.0, false).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["fn"], 0);
        assert_eq!(v["tp"], 1);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(matches!(evaluate(&line(&[1]), &line(&[1, 1]), 0.0, false), Err(Error::ShapeMismatch(..))));
    }
}
