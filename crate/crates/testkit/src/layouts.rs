//! Random valid layouts.

use rand::seq::IndexedRandom;
use rand::Rng;

use uisim_core::layout::{BoundingBox, ElementClass, LayoutSource, ScreenLayout, UiElement};

#[derive(Debug, Clone, Copy)]
pub struct LayoutParams {
    /// Deepest element depth; the root is depth 0.
    pub max_depth: usize,
    /// Total elements including the root.
    pub max_elements: usize,
}

impl Default for LayoutParams {
    fn default() -> Self {
        LayoutParams {
            max_depth: 6,
            max_elements: 200,
        }
    }
}

const UNKNOWN_TOKENS: [&str; 4] = ["SLIDER", "Chip", "progress_bar", "WEBVIEW"];
const NAME_CHARS: &[char] = &[
    'a', 'b', 'k', 'z', 'A', 'Q', '0', '7', '_', '-', '.', ':', '/', ',', '\\', 'é', '中',
];
const TEXT_CHARS: &[char] = &[
    'a', 'Z', '3', ' ', ' ', '\'', '"', '\\', '\n', '\t', '\r', '(', ')', ',', '#', '@', 'é', '中', '🙂',
];

pub fn random_class(rng: &mut impl Rng) -> ElementClass {
    match rng.random_range(0..20) {
        0 | 1 => ElementClass::Other(None),
        2 => ElementClass::Other(Some(UNKNOWN_TOKENS.choose(rng).unwrap().to_string())),
        _ => ElementClass::KNOWN.choose(rng).unwrap().clone(),
    }
}

pub fn random_name(rng: &mut impl Rng) -> String {
    let len = rng.random_range(1..=10);
    (0..len).map(|_| *NAME_CHARS.choose(rng).unwrap()).collect()
}

pub fn random_text(rng: &mut impl Rng, max_len: usize) -> String {
    let len = rng.random_range(0..=max_len);
    (0..len).map(|_| *TEXT_CHARS.choose(rng).unwrap()).collect()
}

fn coordinate(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let v = lo + (hi - lo) * rng.random::<f64>();
    if rng.random_bool(0.3) {
        // already on the serialization grid, clamped back into range
        ((v * 1e4).round() / 1e4).clamp(lo, hi)
    } else {
        v
    }
}

/// A box inside `parent`, occasionally degenerate.
pub fn random_box_within(rng: &mut impl Rng, parent: &BoundingBox) -> BoundingBox {
    let x0 = coordinate(rng, parent.x0(), parent.x1());
    let y0 = coordinate(rng, parent.y0(), parent.y1());
    let (x1, y1) = if rng.random_bool(0.05) {
        (x0, coordinate(rng, y0, parent.y1()))
    } else {
        (coordinate(rng, x0, parent.x1()), coordinate(rng, y0, parent.y1()))
    };
    BoundingBox::new(x0, y0, x1, y1).expect("sub-box of a valid box is valid")
}

fn random_element(rng: &mut impl Rng, parent: &BoundingBox) -> UiElement {
    let mut e = UiElement::new(random_class(rng), random_name(rng), random_box_within(rng, parent));
    if rng.random_bool(0.5) {
        e = e.with_text(random_text(rng, 12));
    }
    if rng.random_bool(0.3) {
        e = e.with_description(random_text(rng, 20));
    }
    e
}

fn grow(rng: &mut impl Rng, parent: &mut UiElement, depth: usize, budget: &mut usize, params: &LayoutParams) {
    if depth >= params.max_depth {
        return;
    }
    let n = rng.random_range(0..=(*budget).min(6));
    for _ in 0..n {
        if *budget == 0 {
            return;
        }
        *budget -= 1;
        let mut child = random_element(rng, &parent.bbox);
        if rng.random_bool(0.45) {
            grow(rng, &mut child, depth + 1, budget, params);
        }
        parent.children.push(child);
    }
}

pub fn random_layout(rng: &mut impl Rng, params: &LayoutParams) -> ScreenLayout {
    let mut root = UiElement::root();
    let mut budget = rng.random_range(0..params.max_elements);
    while budget > 0 {
        let before = budget;
        grow(rng, &mut root, 0, &mut budget, params);
        if budget == before && rng.random_bool(0.5) {
            break;
        }
    }
    let source = *[LayoutSource::Annotated, LayoutSource::Predicted, LayoutSource::Scripted]
        .choose(rng)
        .unwrap();
    let screen_id = rng.random_bool(0.3).then(|| format!("screen-{}", rng.random_range(0..100)));
    ScreenLayout::new(root, source, screen_id).expect("generated layouts are valid")
}

/// A root with one non-degenerate child.
pub fn random_single_element_layout(rng: &mut impl Rng) -> ScreenLayout {
    let mut e;
    loop {
        e = random_element(rng, &BoundingBox::UNIT);
        if !e.bbox.is_degenerate() {
            break;
        }
    }
    ScreenLayout::new(UiElement::root().with_child(e), LayoutSource::Scripted, None).expect("valid")
}
