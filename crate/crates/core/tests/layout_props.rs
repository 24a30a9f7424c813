use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use uisim_core::layout::{
    layout_iou, match_layouts, parse_layout, serialize_layout, BoundingBox, ElementClass, ScreenLayout, UiElement,
};
use uisim_testkit::layouts::{random_class, random_layout, LayoutParams};
use uisim_testkit::rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn dsl_round_trip(seed in any::<u64>()) {
        let layout = random_layout(&mut rng(seed), &LayoutParams::default());
        let text = serialize_layout(&layout);
        let parsed = parse_layout(&text).unwrap();
        prop_assert!(parsed.structurally_eq(&layout), "{}", text);
        prop_assert_eq!(parsed.source(), layout.source());
        prop_assert_eq!(parsed.screen_id(), layout.screen_id());
        prop_assert_eq!(parsed.element_count(), layout.element_count());
        // a second pass is a fixed point
        prop_assert_eq!(serialize_layout(&parsed), text);
    }

    #[test]
    fn serialization_is_deterministic(seed in any::<u64>()) {
        let a = random_layout(&mut rng(seed), &LayoutParams::default());
        let b = random_layout(&mut rng(seed), &LayoutParams::default());
        prop_assert_eq!(serialize_layout(&a), serialize_layout(&b));
        prop_assert_eq!(serialize_layout(&a.clone()), serialize_layout(&a));
    }

    #[test]
    fn iou_matches_grid_count(a in grid_box(), b in grid_box()) {
        let (ba, bb) = (to_box(a), to_box(b));
        let ab = layout_iou(&ba, &bb);
        prop_assert_eq!(ab, layout_iou(&bb, &ba));
        prop_assert!((0.0..=1.0).contains(&ab));
        let expected = grid_iou(a, b);
        prop_assert!((ab - expected).abs() < 1e-12, "{ab} vs {expected}");
        if !ba.is_degenerate() {
            prop_assert_eq!(layout_iou(&ba, &ba), 1.0);
        }
    }

    #[test]
    fn match_is_invariant_under_sibling_order(seed in any::<u64>()) {
        let mut r = rng(seed);
        let truth = random_layout(&mut r, &LayoutParams { max_depth: 4, max_elements: 60 });
        let (gx, gy) = (r.random_range(0.85..1.15), r.random_range(0.85..1.15));
        let pred_root = warp(truth.root(), gx, gy, &mut r, true);
        let pred = ScreenLayout::new(pred_root, truth.source(), None).unwrap();
        let threshold = 0.5;
        prop_assume!(candidate_ious_distinct(&pred, &truth, threshold));

        let mut shuffled_root = pred.root().clone();
        shuffle_children(&mut shuffled_root, &mut r);
        let shuffled = ScreenLayout::new(shuffled_root, pred.source(), None).unwrap();

        let base = match_layouts(&pred, &truth, threshold);
        let reordered = match_layouts(&shuffled, &truth, threshold);
        prop_assert_eq!(base.matched, reordered.matched);
        prop_assert_eq!(base.f1, reordered.f1);
        prop_assert_eq!(base.per_class, reordered.per_class);

        let mut shuffled_truth_root = truth.root().clone();
        shuffle_children(&mut shuffled_truth_root, &mut r);
        let shuffled_truth = ScreenLayout::new(shuffled_truth_root, truth.source(), None).unwrap();
        prop_assert_eq!(match_layouts(&pred, &shuffled_truth, threshold).f1, base.f1);
    }
}

/// Boxes on a 1/64 grid as integer corners.
fn grid_box() -> impl Strategy<Value = (u32, u32, u32, u32)> {
    (0u32..=64, 0u32..=64, 0u32..=64, 0u32..=64).prop_map(|(a, b, c, d)| (a.min(c), b.min(d), a.max(c), b.max(d)))
}

fn to_box((x0, y0, x1, y1): (u32, u32, u32, u32)) -> BoundingBox {
    let s = |v: u32| f64::from(v) / 64.0;
    BoundingBox::new(s(x0), s(y0), s(x1), s(y1)).unwrap()
}

/// IoU by counting unit cells, with identical empty boxes scoring 1.
fn grid_iou(a: (u32, u32, u32, u32), b: (u32, u32, u32, u32)) -> f64 {
    let inside = |r: (u32, u32, u32, u32), x: u32, y: u32| x >= r.0 && x < r.2 && y >= r.1 && y < r.3;
    let (mut inter, mut union) = (0u32, 0u32);
    for y in 0..64 {
        for x in 0..64 {
            let (ia, ib) = (inside(a, x, y), inside(b, x, y));
            inter += u32::from(ia && ib);
            union += u32::from(ia || ib);
        }
    }
    if union == 0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    f64::from(inter) / f64::from(union)
}

/// Applies `x -> x^gx`, `y -> y^gy` to every box, which fixes the unit square
/// and preserves nesting, and relabels some non-root classes.
fn warp(e: &UiElement, gx: f64, gy: f64, r: &mut impl Rng, is_root: bool) -> UiElement {
    let b = &e.bbox;
    let bbox = BoundingBox::new(b.x0().powf(gx), b.y0().powf(gy), b.x1().powf(gx), b.y1().powf(gy)).unwrap();
    let class = if !is_root && r.random_bool(0.2) {
        random_class(r)
    } else {
        e.element_class.clone()
    };
    let mut out = UiElement::new(class, e.name.clone(), bbox);
    out.children = e.children.iter().map(|c| warp(c, gx, gy, r, false)).collect();
    out
}

fn shuffle_children(e: &mut UiElement, r: &mut impl Rng) {
    e.children.shuffle(r);
    for c in &mut e.children {
        shuffle_children(c, r);
    }
}

fn candidate_ious_distinct(pred: &ScreenLayout, truth: &ScreenLayout, threshold: f64) -> bool {
    let mut ious = Vec::new();
    for (_, t) in truth.preorder() {
        for (_, p) in pred.preorder() {
            if p.element_class.same_kind(&t.element_class) {
                let v = layout_iou(&p.bbox, &t.bbox);
                if v >= threshold {
                    ious.push(v);
                }
            }
        }
    }
    ious.sort_by(f64::total_cmp);
    ious.windows(2).all(|w| w[0] != w[1])
}

#[test]
fn unknown_tokens_survive_round_trip() {
    let text = "CONTAINER root (0,0,1,1)\n  SLIDER volume (0.1,0.1,0.9,0.2)\n";
    let l = parse_layout(text).unwrap();
    let child = &l.root().children[0];
    assert_eq!(child.element_class, ElementClass::Other(Some("SLIDER".into())));
    assert!(parse_layout(&serialize_layout(&l)).unwrap().structurally_eq(&l));
}
