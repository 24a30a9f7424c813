//! Layout-level comparison: box IoU and greedy class-aware matching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BoundingBox, ScreenLayout};

/// Intersection over union. Two identical zero-area boxes score 1; any other
/// pair with zero union scores 0.
pub fn layout_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x1().min(b.x1()) - a.x0().max(b.x0())).max(0.0);
    let ih = (a.y1().min(b.y1()) - a.y0().max(b.y0())).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub predicted: usize,
    pub truth: usize,
    pub matched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutMatchReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub n_predicted: usize,
    pub n_truth: usize,
    pub iou_threshold: f64,
    /// Keyed by canonical class name; unknown tokens pool under `OTHER`.
    pub per_class: BTreeMap<String, ClassCounts>,
}

/// Greedy one-to-one matching over all elements (root included).
///
/// Candidate pairs need the same class kind and IoU at or above the
/// threshold. Pairs are taken in descending IoU; ties go to the lower truth
/// pre-order index, then the lower predicted pre-order index.
///
/// # Panics
///
/// If `iou_threshold` is outside `(0, 1]`.
pub fn match_layouts(pred: &ScreenLayout, truth: &ScreenLayout, iou_threshold: f64) -> LayoutMatchReport {
    assert!(
        iou_threshold > 0.0 && iou_threshold <= 1.0,
        "iou_threshold must be in (0, 1], got {iou_threshold}"
    );
    let p: Vec<_> = pred.preorder().into_iter().map(|(_, e)| e).collect();
    let t: Vec<_> = truth.preorder().into_iter().map(|(_, e)| e).collect();

    let mut candidates = Vec::new();
    for (ti, te) in t.iter().enumerate() {
        for (pi, pe) in p.iter().enumerate() {
            if !pe.element_class.same_kind(&te.element_class) {
                continue;
            }
            let iou = layout_iou(&pe.bbox, &te.bbox);
            if iou >= iou_threshold {
                candidates.push((iou, ti, pi));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut truth_used = vec![false; t.len()];
    let mut pred_used = vec![false; p.len()];
    let mut per_class: BTreeMap<String, ClassCounts> = BTreeMap::new();
    for e in &p {
        per_class.entry(e.element_class.kind_name().to_string()).or_default().predicted += 1;
    }
    for e in &t {
        per_class.entry(e.element_class.kind_name().to_string()).or_default().truth += 1;
    }

    let mut matched = 0;
    for (_, ti, pi) in candidates {
        if truth_used[ti] || pred_used[pi] {
            continue;
        }
        truth_used[ti] = true;
        pred_used[pi] = true;
        matched += 1;
        per_class
            .get_mut(t[ti].element_class.kind_name())
            .expect("class seeded above")
            .matched += 1;
    }

    let precision = matched as f64 / p.len() as f64;
    let recall = matched as f64 / t.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    LayoutMatchReport {
        precision,
        recall,
        f1,
        matched,
        n_predicted: p.len(),
        n_truth: t.len(),
        iou_threshold,
        per_class,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{parse_layout, ElementClass, LayoutSource, UiElement};

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn iou_examples() {
        let a = bb(0.1, 0.2, 0.5, 0.7);
        assert_eq!(layout_iou(&a, &a), 1.0);
        assert_eq!(layout_iou(&bb(0.0, 0.0, 0.4, 0.4), &bb(0.6, 0.6, 1.0, 1.0)), 0.0);
        assert_eq!(layout_iou(&BoundingBox::UNIT, &bb(0.5, 0.0, 1.0, 1.0)), 0.5);
    }

    #[test]
    fn iou_degenerate_cases() {
        let line = bb(0.1, 0.5, 0.9, 0.5);
        assert_eq!(layout_iou(&line, &line), 1.0);
        assert_eq!(layout_iou(&line, &bb(0.1, 0.6, 0.9, 0.6)), 0.0);
        assert_eq!(layout_iou(&line, &BoundingBox::UNIT), 0.0);
    }

    fn five_element_truth() -> ScreenLayout {
        parse_layout(
            "CONTAINER root (0,0,1,1)\n  STATUSBAR sb (0,0,1,0.05)\n  TEXT title 'Inbox' (0.05,0.06,0.95,0.12)\n  LIST_ITEM m1 (0,0.15,1,0.25)\n  NAVBAR nav (0,0.92,1,1)\n",
        )
        .unwrap()
    }

    #[test]
    fn identical_layouts_match_perfectly() {
        let t = five_element_truth();
        let r = match_layouts(&t, &t, 0.5);
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.per_class["LIST_ITEM"], ClassCounts { predicted: 1, truth: 1, matched: 1 });
    }

    #[test]
    fn root_only_prediction() {
        let pred = ScreenLayout::root_only(LayoutSource::Predicted);
        let r = match_layouts(&pred, &five_element_truth(), 0.5);
        assert_eq!(r.matched, 1);
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 1.0 / 5.0);
    }

    #[test]
    fn strict_threshold_counts_only_exact_boxes() {
        let truth = five_element_truth();
        let pred = parse_layout(
            "CONTAINER root (0,0,1,1)\n  STATUSBAR sb (0,0,1,0.0501)\n  TEXT title 'Inbox' (0.05,0.06,0.95,0.12)\n  LIST_ITEM m1 (0,0.15,1,0.2501)\n  NAVBAR nav (0,0.92,1,1)\n",
        )
        .unwrap();
        let r = match_layouts(&pred, &truth, 1.0);
        assert_eq!(r.matched, 3);
        let loose = match_layouts(&pred, &truth, 0.9);
        assert_eq!(loose.matched, 5);
    }

    #[test]
    fn classes_must_agree() {
        let truth = ScreenLayout::new(
            UiElement::root().with_child(UiElement::new(ElementClass::Button, "b", bb(0.1, 0.1, 0.3, 0.2))),
            LayoutSource::Annotated,
            None,
        )
        .unwrap();
        let pred = ScreenLayout::new(
            UiElement::root().with_child(UiElement::new(ElementClass::Text, "b", bb(0.1, 0.1, 0.3, 0.2))),
            LayoutSource::Predicted,
            None,
        )
        .unwrap();
        assert_eq!(match_layouts(&pred, &truth, 0.5).matched, 1);
    }

    #[test]
    fn greedy_prefers_highest_iou() {
        // one truth box, two predictions of the same class; the better one wins
        let truth = parse_layout("BUTTON t (0.1,0.1,0.5,0.5)").unwrap();
        let pred = parse_layout("BUTTON a (0.1,0.1,0.45,0.5)\nBUTTON b (0.1,0.1,0.5,0.5)").unwrap();
        let r = match_layouts(&pred, &truth, 0.5);
        assert_eq!(r.matched, 2); // root + b
        assert_eq!(r.n_predicted, 3);
    }

    #[test]
    #[should_panic]
    fn zero_threshold_rejected() {
        let t = five_element_truth();
        match_layouts(&t, &t, 0.0);
    }
}
