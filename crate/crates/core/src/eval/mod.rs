//! Detection-quality evaluation: greedy one-to-one instance matching at
//! an IoU threshold, then per-attribute confusion matrices, accuracy,
//! and macro F1 over the matched pairs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::geom::PixelRect;
use crate::ingest::{DetectionRecord, ParseError};
use crate::taxonomy::{AttributeKind, Condition, ConstructionType, Material, UseType};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.75;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no matched pairs to score")]
    EmptyMatchSet,
}

/// One ground-truth building instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedInstance {
    pub image_id: String,
    pub bbox: PixelRect,
    /// Optional ground-truth mask for `--mask-iou` runs.
    pub mask: Option<Vec<[f64; 2]>>,
    pub construction_type: ConstructionType,
    pub material: Material,
    pub use_type: UseType,
    pub condition: Condition,
}

impl AnnotatedInstance {
    pub fn class_index(&self, kind: AttributeKind) -> usize {
        match kind {
            AttributeKind::ConstructionType => self.construction_type.index(),
            AttributeKind::Material => self.material.index(),
            AttributeKind::Use => self.use_type.index(),
            AttributeKind::Condition => self.condition.index(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AnnotationWire {
    image_id: String,
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<Vec<[f64; 2]>>,
    construction_type: ConstructionType,
    material: Material,
    #[serde(rename = "use")]
    use_type: UseType,
    condition: Condition,
}

/// Parse an annotations JSONL file (one instance per line).
pub fn parse_annotations(path: &Path) -> Result<Vec<AnnotatedInstance>, ParseError> {
    let file = File::open(path).map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source| ParseError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            return Err(ParseError::Line {
                path: path.to_path_buf(),
                line: line_no,
                message: "empty line".into(),
            });
        }
        let wire: AnnotationWire = serde_json::from_str(&line).map_err(|e| ParseError::Line {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        let bbox = PixelRect::from_corners(wire.bbox);
        if !bbox.is_valid() {
            return Err(ParseError::Field {
                path: path.to_path_buf(),
                line: line_no,
                field: "bbox".into(),
                message: "requires x_min < x_max and y_min < y_max".into(),
            });
        }
        out.push(AnnotatedInstance {
            image_id: wire.image_id,
            bbox,
            mask: wire.mask,
            construction_type: wire.construction_type,
            material: wire.material,
            use_type: wire.use_type,
            condition: wire.condition,
        });
    }
    Ok(out)
}

pub fn write_annotations_jsonl<W: Write>(
    mut w: W,
    instances: &[AnnotatedInstance],
) -> std::io::Result<()> {
    for a in instances {
        let wire = AnnotationWire {
            image_id: a.image_id.clone(),
            bbox: a.bbox.corners(),
            mask: a.mask.clone(),
            construction_type: a.construction_type,
            material: a.material,
            use_type: a.use_type,
            condition: a.condition,
        };
        serde_json::to_writer(&mut w, &wire)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Intersection over union of two pixel rectangles; 0 when disjoint.
pub fn iou(a: &PixelRect, b: &PixelRect) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Intersection over union of two simple pixel polygons.
pub fn polygon_iou(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    use geo::{Area, BooleanOps, LineString, Polygon};
    let to_poly = |pts: &[[f64; 2]]| {
        Polygon::new(LineString::from(pts.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>()), vec![])
    };
    let pa = to_poly(a);
    let pb = to_poly(b);
    let inter = pa.intersection(&pb).unsigned_area();
    let union = pa.unsigned_area() + pb.unsigned_area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub prediction: usize,
    pub truth: usize,
    pub iou: f64,
}

/// One-to-one matching between predictions and truths of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

/// Greedy one-to-one matching by descending IoU among pairs strictly
/// above `threshold`; IoU ties resolve by (truth index, prediction
/// index).
pub fn match_instances_by(
    n_predictions: usize,
    n_truths: usize,
    pair_iou: impl Fn(usize, usize) -> f64,
    threshold: f64,
) -> MatchSet {
    let mut candidates: Vec<MatchedPair> = Vec::new();
    for t in 0..n_truths {
        for p in 0..n_predictions {
            let v = pair_iou(p, t);
            if v > threshold {
                candidates.push(MatchedPair { prediction: p, truth: t, iou: v });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then_with(|| a.truth.cmp(&b.truth))
            .then_with(|| a.prediction.cmp(&b.prediction))
    });

    let mut pred_used = vec![false; n_predictions];
    let mut truth_used = vec![false; n_truths];
    let mut pairs = Vec::new();
    for c in candidates {
        if !pred_used[c.prediction] && !truth_used[c.truth] {
            pred_used[c.prediction] = true;
            truth_used[c.truth] = true;
            pairs.push(c);
        }
    }
    MatchSet {
        pairs,
        unmatched_predictions: (0..n_predictions).filter(|&p| !pred_used[p]).collect(),
        unmatched_truths: (0..n_truths).filter(|&t| !truth_used[t]).collect(),
    }
}

/// Box-IoU matching over one image's instances.
pub fn match_instances(preds: &[PixelRect], truths: &[PixelRect], threshold: f64) -> MatchSet {
    match_instances_by(preds.len(), truths.len(), |p, t| iou(&preds[p], &truths[t]), threshold)
}

/// Row = truth class, column = predicted class, axes over the full
/// taxonomy of one attribute.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<&'static str>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeMetrics {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub f1_macro: f64,
}

/// Score one attribute over matched (truth class, predicted class)
/// index pairs. Macro F1 averages per-class F1 over classes present in
/// either axis; a class with zero true positives scores 0.
pub fn attribute_metrics(
    pairs: &[(usize, usize)],
    kind: AttributeKind,
) -> Result<AttributeMetrics, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyMatchSet);
    }
    let classes = kind.classes();
    let k = classes.len();
    let mut counts = vec![vec![0usize; k]; k];
    for &(truth, pred) in pairs {
        counts[truth][pred] += 1;
    }

    let total: usize = pairs.len();
    let trace: usize = (0..k).map(|i| counts[i][i]).sum();
    let accuracy = trace as f64 / total as f64;

    let mut f1_sum = 0.0;
    let mut f1_classes = 0usize;
    for c in 0..k {
        let row: usize = counts[c].iter().sum();
        let col: usize = (0..k).map(|r| counts[r][c]).sum();
        if row == 0 && col == 0 {
            continue; // absent from both axes
        }
        f1_classes += 1;
        let tp = counts[c][c];
        if tp > 0 {
            let precision = tp as f64 / col as f64;
            let recall = tp as f64 / row as f64;
            f1_sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    let f1_macro = f1_sum / f1_classes as f64;

    Ok(AttributeMetrics {
        confusion: ConfusionMatrix { classes: classes.to_vec(), counts },
        accuracy,
        f1_macro,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub iou_threshold: f64,
    pub mask_iou: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { iou_threshold: DEFAULT_IOU_THRESHOLD, mask_iou: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionCounts {
    pub matched: usize,
    pub n_predictions: usize,
    pub n_truths: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub iou_threshold: f64,
    pub mask_iou: bool,
    pub detection: DetectionCounts,
    /// Keyed by attribute; `None` when there were no matched pairs.
    pub attributes: BTreeMap<AttributeKind, Option<AttributeMetrics>>,
}

/// Match per image and aggregate attribute metrics over all matched
/// pairs. Images are processed independently; the reduction is
/// order-independent integer counting.
pub fn evaluate(
    predictions: &[DetectionRecord],
    truths: &[AnnotatedInstance],
    opts: &EvalOptions,
) -> EvalReport {
    let mut images: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, p) in predictions.iter().enumerate() {
        images.entry(&p.image_id).or_default().0.push(i);
    }
    for (t, a) in truths.iter().enumerate() {
        images.entry(&a.image_id).or_default().1.push(t);
    }

    let per_image: Vec<Vec<(usize, usize)>> = images
        .par_iter()
        .map(|(_, (pred_idx, truth_idx))| {
            let pair_iou = |p: usize, t: usize| {
                let pred = &predictions[pred_idx[p]];
                let truth = &truths[truth_idx[t]];
                match (opts.mask_iou, &pred.mask, &truth.mask) {
                    (true, Some(pm), Some(tm)) => polygon_iou(pm, tm),
                    _ => iou(&pred.bbox, &truth.bbox),
                }
            };
            let ms = match_instances_by(pred_idx.len(), truth_idx.len(), pair_iou, opts.iou_threshold);
            ms.pairs
                .iter()
                .map(|pair| (pred_idx[pair.prediction], truth_idx[pair.truth]))
                .collect()
        })
        .collect();

    let matched: Vec<(usize, usize)> = per_image.into_iter().flatten().collect();
    let n_matched = matched.len();

    let mut attributes = BTreeMap::new();
    for kind in AttributeKind::ALL {
        let pairs: Vec<(usize, usize)> = matched
            .iter()
            .map(|&(p, t)| (truths[t].class_index(kind), predictions[p].attributes.class_index(kind)))
            .collect();
        attributes.insert(kind, attribute_metrics(&pairs, kind).ok());
    }

    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    EvalReport {
        iou_threshold: opts.iou_threshold,
        mask_iou: opts.mask_iou,
        detection: DetectionCounts {
            matched: n_matched,
            n_predictions: predictions.len(),
            n_truths: truths.len(),
            precision: ratio(n_matched, predictions.len()),
            recall: ratio(n_matched, truths.len()),
        },
        attributes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> PixelRect {
        PixelRect::from_corners([x0, y0, x1, y1])
    }

    #[test]
    fn iou_identity_disjoint_and_hand_case() {
        let a = rect(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &rect(5.0, 5.0, 6.0, 6.0)), 0.0);
        // intersection 1, union 7
        let b = rect(1.0, 1.0, 3.0, 3.0);
        assert!((iou(&a, &b) - 1.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn iou_is_symmetric_and_bounded_by_area_ratio() {
        let cases = [
            (rect(0.0, 0.0, 4.0, 2.0), rect(1.0, 0.5, 3.0, 4.0)),
            (rect(-2.0, -2.0, 2.0, 2.0), rect(0.0, 0.0, 1.0, 1.0)),
            (rect(0.0, 0.0, 1.0, 1.0), rect(0.25, 0.25, 0.75, 0.75)),
        ];
        for (a, b) in cases {
            assert_eq!(iou(&a, &b), iou(&b, &a));
            let ratio = (a.area() / b.area()).min(b.area() / a.area());
            assert!(iou(&a, &b) <= ratio + 1e-12);
        }
    }

    #[test]
    fn single_perfect_pair_matches() {
        let a = rect(0.0, 0.0, 2.0, 2.0);
        let ms = match_instances(&[a], &[a], 0.75);
        assert_eq!(ms.pairs.len(), 1);
        assert_eq!(ms.pairs[0].iou, 1.0);
        assert!(ms.unmatched_predictions.is_empty());
        assert!(ms.unmatched_truths.is_empty());
    }

    #[test]
    fn boundary_iou_is_unmatched() {
        // overlap 3x1 = 3, areas 4 and 3, union 4 -> iou exactly 0.75
        let pred = rect(0.0, 0.0, 4.0, 1.0);
        let truth = rect(1.0, 0.0, 4.0, 1.0);
        assert!((iou(&pred, &truth) - 0.75).abs() < 1e-12);
        let ms = match_instances(&[pred], &[truth], 0.75);
        assert!(ms.pairs.is_empty());
        assert_eq!(ms.unmatched_predictions, vec![0]);
        assert_eq!(ms.unmatched_truths, vec![0]);
    }

    #[test]
    fn higher_iou_prediction_wins_the_truth() {
        let truth = rect(0.0, 0.0, 10.0, 10.0);
        let strong = rect(0.0, 0.0, 10.0, 9.0); // iou 0.9
        let weak = rect(0.0, 0.0, 10.0, 8.0); // iou 0.8
        let ms = match_instances(&[weak, strong], &[truth], 0.75);
        assert_eq!(ms.pairs.len(), 1);
        assert_eq!(ms.pairs[0].prediction, 1);
        assert_eq!(ms.unmatched_predictions, vec![0]);
    }

    #[test]
    fn matching_is_one_to_one_and_respects_threshold() {
        let truths = vec![rect(0.0, 0.0, 4.0, 4.0), rect(10.0, 0.0, 14.0, 4.0)];
        let preds = vec![
            rect(0.0, 0.0, 4.0, 4.2),
            rect(0.1, 0.0, 4.0, 4.0),
            rect(10.0, 0.0, 14.0, 4.1),
            rect(100.0, 100.0, 101.0, 101.0),
        ];
        let ms = match_instances(&preds, &truths, 0.75);
        let mut seen_p = std::collections::BTreeSet::new();
        let mut seen_t = std::collections::BTreeSet::new();
        for pair in &ms.pairs {
            assert!(pair.iou > 0.75);
            assert!(seen_p.insert(pair.prediction), "prediction reused");
            assert!(seen_t.insert(pair.truth), "truth reused");
        }
        assert_eq!(ms.pairs.len() + ms.unmatched_predictions.len(), preds.len());
        assert_eq!(ms.pairs.len() + ms.unmatched_truths.len(), truths.len());
    }

    #[test]
    fn perfect_predictions_score_one() {
        let pairs: Vec<(usize, usize)> = vec![(0, 0), (1, 1), (0, 0), (1, 1)];
        let m = attribute_metrics(&pairs, AttributeKind::ConstructionType).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1_macro, 1.0);
        assert_eq!(m.confusion.total(), 4);
    }

    #[test]
    fn hand_confusion_two_by_two() {
        // [[2,1],[1,2]]: accuracy 4/6, each class F1 = 2/3
        let pairs = vec![(0, 0), (0, 0), (0, 1), (1, 0), (1, 1), (1, 1)];
        let m = attribute_metrics(&pairs, AttributeKind::ConstructionType).unwrap();
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-12);
        assert!((m.f1_macro - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.confusion.counts[0], vec![2, 1]);
        assert_eq!(m.confusion.counts[1], vec![1, 2]);
    }

    #[test]
    fn degenerate_single_class_predictor() {
        // all predictions class 0, truths balanced: accuracy 1/2,
        // F1(class 0) = 2/3, F1(class 1) = 0, macro 1/3
        let pairs = vec![(0, 0), (0, 0), (1, 0), (1, 0)];
        let m = attribute_metrics(&pairs, AttributeKind::ConstructionType).unwrap();
        assert!((m.accuracy - 0.5).abs() < 1e-12);
        assert!((m.f1_macro - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn metrics_ignore_pair_order() {
        let mut pairs = vec![(0, 1), (1, 1), (2, 0), (1, 1), (0, 0), (2, 2)];
        let a = attribute_metrics(&pairs, AttributeKind::Condition).unwrap();
        pairs.reverse();
        let b = attribute_metrics(&pairs, AttributeKind::Condition).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn accuracy_equals_macro_f1_for_symmetric_confusion() {
        // symmetric confusion with equal supports
        let pairs = vec![
            (0, 0),
            (0, 0),
            (0, 1),
            (1, 1),
            (1, 1),
            (1, 0),
        ];
        let m = attribute_metrics(&pairs, AttributeKind::ConstructionType).unwrap();
        assert!((m.accuracy - m.f1_macro).abs() < 1e-12);
    }

    #[test]
    fn empty_match_set_is_an_error() {
        assert!(matches!(
            attribute_metrics(&[], AttributeKind::Condition),
            Err(EvalError::EmptyMatchSet)
        ));
    }

    #[test]
    fn polygon_iou_of_half_overlapping_squares() {
        let a = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let b = [[1.0, 0.0], [3.0, 0.0], [3.0, 2.0], [1.0, 2.0]];
        // intersection 2, union 6
        assert!((polygon_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-9);
        assert!((polygon_iou(&a, &a) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn polygon_iou_handles_concave_shapes() {
        // L-shape vs the square filling its bounding box
        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let square = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        // areas: L = 3, square = 4, intersection = 3, union = 4
        assert!((polygon_iou(&l, &square) - 0.75).abs() < 1e-9);
    }
}
