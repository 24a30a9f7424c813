//! Structured screen layouts.
//!
//! A [`ScreenLayout`] is an ordered tree of [`UiElement`]s with normalized
//! bounding boxes. It is what the layout predictor emits and what every
//! renderer consumes. The canonical text form lives in [`dsl`]; layout-level
//! comparison (IoU, greedy matching) lives in [`compare`].

pub mod compare;
pub mod dsl;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use compare::{layout_iou, match_layouts, ClassCounts, LayoutMatchReport};
pub use dsl::{parse_layout, serialize_layout};

/// Hard cap on the number of elements in one layout (root included).
pub const MAX_ELEMENTS: usize = 4096;
/// Hard cap on nesting depth; the root sits at depth 0.
pub const MAX_DEPTH: usize = 32;
/// Per-edge overflow a child may have past its parent.
pub const CONTAIN_TOLERANCE: f64 = 0.01;
/// Coordinates within this distance outside `[0, 1]` are clamped instead of rejected.
pub const BOUNDS_TOLERANCE: f64 = 1e-6;
/// Half of the serialization quantum (coordinates are printed with 4 decimals).
pub const COORD_EPSILON: f64 = 0.5e-4 + 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LayoutError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("bounds error{}: {message}", fmt_line(*.line))]
    Bounds { line: Option<usize>, message: String },
    #[error("depth error{}: nesting depth {depth} exceeds {MAX_DEPTH}", fmt_line(*.line))]
    Depth { line: Option<usize>, depth: usize },
    #[error("layout has {count} elements, more than the cap of {MAX_ELEMENTS}")]
    TooManyElements { count: usize },
    #[error("layout text is {bytes} bytes, more than the 1 MiB limit")]
    TooLarge { bytes: usize },
    #[error("invalid layout: {0}")]
    Invalid(String),
}

fn fmt_line(line: Option<usize>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

/// Normalized box, origin top-left, `x` rightward and `y` downward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct BoundingBox {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
}

impl TryFrom<BoxRepr> for BoundingBox {
    type Error = LayoutError;
    fn try_from(r: BoxRepr) -> Result<Self, Self::Error> {
        BoundingBox::new(r.x0, r.y0, r.x1, r.y1)
    }
}

impl From<BoundingBox> for BoxRepr {
    fn from(b: BoundingBox) -> Self {
        BoxRepr {
            x0: b.x0,
            y0: b.y0,
            x1: b.x1,
            y1: b.y1,
        }
    }
}

impl BoundingBox {
    pub const UNIT: BoundingBox = BoundingBox {
        x0: 0.0,
        y0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };

    /// Builds a box, clamping coordinates that stray past `[0, 1]` by at most
    /// [`BOUNDS_TOLERANCE`] and rejecting everything else.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, LayoutError> {
        let clamp = |v: f64, axis: &str| -> Result<f64, LayoutError> {
            if !v.is_finite() || !(-BOUNDS_TOLERANCE..=1.0 + BOUNDS_TOLERANCE).contains(&v) {
                return Err(LayoutError::Bounds {
                    line: None,
                    message: format!("{axis} = {v} is outside [0, 1]"),
                });
            }
            // `+ 0.0` folds -0.0 into 0.0
            Ok(v.clamp(0.0, 1.0) + 0.0)
        };
        let (x0, y0, x1, y1) = (clamp(x0, "x0")?, clamp(y0, "y0")?, clamp(x1, "x1")?, clamp(y1, "y1")?);
        if x1 < x0 - BOUNDS_TOLERANCE {
            return Err(LayoutError::Bounds {
                line: None,
                message: format!("inverted box: x1 = {x1} < x0 = {x0}"),
            });
        }
        if y1 < y0 - BOUNDS_TOLERANCE {
            return Err(LayoutError::Bounds {
                line: None,
                message: format!("inverted box: y1 = {y1} < y0 = {y0}"),
            });
        }
        Ok(BoundingBox {
            x0,
            y0,
            x1: x1.max(x0),
            y1: y1.max(y0),
        })
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn x1(&self) -> f64 {
        self.x1
    }
    pub fn y1(&self) -> f64 {
        self.y1
    }
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Zero-area boxes are legal (separators) but worth flagging.
    pub fn is_degenerate(&self) -> bool {
        self.x0 == self.x1 || self.y0 == self.y1
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    /// True when `inner` fits inside `self` with at most `tolerance` overflow per edge.
    pub fn contains_box(&self, inner: &BoundingBox, tolerance: f64) -> bool {
        let tol = tolerance + 1e-12;
        inner.x0 >= self.x0 - tol
            && inner.y0 >= self.y0 - tol
            && inner.x1 <= self.x1 + tol
            && inner.y1 <= self.y1 + tol
    }

    /// Equality at serialization precision.
    pub fn approx_eq(&self, other: &BoundingBox) -> bool {
        (self.x0 - other.x0).abs() <= COORD_EPSILON
            && (self.y0 - other.y0).abs() <= COORD_EPSILON
            && (self.x1 - other.x1).abs() <= COORD_EPSILON
            && (self.y1 - other.y1).abs() <= COORD_EPSILON
    }
}

/// Element kinds. Tokens outside the fixed vocabulary degrade to
/// [`ElementClass::Other`] and keep their original spelling.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElementClass {
    Button,
    Text,
    TextField,
    Image,
    Icon,
    Checkbox,
    Switch,
    ListItem,
    Navbar,
    Statusbar,
    Container,
    Other(Option<String>),
}

impl ElementClass {
    pub const KNOWN: [ElementClass; 11] = [
        ElementClass::Button,
        ElementClass::Text,
        ElementClass::TextField,
        ElementClass::Image,
        ElementClass::Icon,
        ElementClass::Checkbox,
        ElementClass::Switch,
        ElementClass::ListItem,
        ElementClass::Navbar,
        ElementClass::Statusbar,
        ElementClass::Container,
    ];

    /// Canonical vocabulary name; every unknown token maps to `OTHER`.
    pub fn kind_name(&self) -> &'static str {
        match self {
            ElementClass::Button => "BUTTON",
            ElementClass::Text => "TEXT",
            ElementClass::TextField => "TEXT_FIELD",
            ElementClass::Image => "IMAGE",
            ElementClass::Icon => "ICON",
            ElementClass::Checkbox => "CHECKBOX",
            ElementClass::Switch => "SWITCH",
            ElementClass::ListItem => "LIST_ITEM",
            ElementClass::Navbar => "NAVBAR",
            ElementClass::Statusbar => "STATUSBAR",
            ElementClass::Container => "CONTAINER",
            ElementClass::Other(_) => "OTHER",
        }
    }

    /// The token written to the DSL: the original spelling for unknown kinds.
    pub fn token(&self) -> &str {
        match self {
            ElementClass::Other(Some(raw)) => raw,
            other => other.kind_name(),
        }
    }

    /// Whether two classes are the same kind (all unknown tokens count as `OTHER`).
    pub fn same_kind(&self, other: &ElementClass) -> bool {
        self.kind_name() == other.kind_name()
    }

    fn is_token(s: &str) -> bool {
        let mut chars = s.chars();
        matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    }
}

impl FromStr for ElementClass {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !Self::is_token(s) {
            return Err(LayoutError::Invalid(format!("`{s}` is not a valid class token")));
        }
        let upper = s.to_ascii_uppercase();
        if upper == "OTHER" {
            return Ok(ElementClass::Other(None));
        }
        Ok(Self::KNOWN
            .iter()
            .find(|k| k.kind_name() == upper)
            .cloned()
            .unwrap_or_else(|| ElementClass::Other(Some(s.to_string()))))
    }
}

impl fmt::Display for ElementClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl Serialize for ElementClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for ElementClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiElement {
    pub element_class: ElementClass,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub text_content: Option<String>,
    pub bbox: BoundingBox,
    #[serde(default)]
    pub children: Vec<UiElement>,
}

impl UiElement {
    pub fn new(element_class: ElementClass, name: impl Into<String>, bbox: BoundingBox) -> Self {
        UiElement {
            element_class,
            name: name.into(),
            description: String::new(),
            text_content: None,
            bbox,
            children: Vec::new(),
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text_content = Some(text.into());
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_child(mut self, child: UiElement) -> Self {
        self.children.push(child);
        self
    }

    /// The placeholder root every layout starts from.
    pub fn root() -> Self {
        UiElement::new(ElementClass::Container, "root", BoundingBox::UNIT)
    }

    /// Number of elements in this subtree, self included.
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(UiElement::count).sum::<usize>()
    }

    fn structurally_eq(&self, other: &UiElement) -> bool {
        self.element_class == other.element_class
            && self.name == other.name
            && self.description == other.description
            && self.text_content == other.text_content
            && self.bbox.approx_eq(&other.bbox)
            && self.children.len() == other.children.len()
            && self
                .children
                .iter()
                .zip(&other.children)
                .all(|(a, b)| a.structurally_eq(b))
    }
}

pub(crate) fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with(['@', '#'])
        && !name
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || matches!(c, '\'' | '"' | '(' | ')'))
}

/// Where a layout came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum LayoutSource {
    #[default]
    #[serde(rename = "annotated")]
    Annotated,
    #[serde(rename = "predicted")]
    Predicted,
    #[serde(rename = "scripted")]
    Scripted,
    /// Placeholder used when a session starts without a layout.
    #[serde(rename = "annotated:absent")]
    AnnotatedAbsent,
}

impl LayoutSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayoutSource::Annotated => "annotated",
            LayoutSource::Predicted => "predicted",
            LayoutSource::Scripted => "scripted",
            LayoutSource::AnnotatedAbsent => "annotated:absent",
        }
    }
}

impl FromStr for LayoutSource {
    type Err = LayoutError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "annotated" => Ok(LayoutSource::Annotated),
            "predicted" => Ok(LayoutSource::Predicted),
            "scripted" => Ok(LayoutSource::Scripted),
            "annotated:absent" => Ok(LayoutSource::AnnotatedAbsent),
            other => Err(LayoutError::Invalid(format!("unknown layout source `{other}`"))),
        }
    }
}

/// A validated element tree. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayoutRepr", into = "LayoutRepr")]
pub struct ScreenLayout {
    root: UiElement,
    source: LayoutSource,
    screen_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct LayoutRepr {
    root: UiElement,
    #[serde(default)]
    source: LayoutSource,
    #[serde(default)]
    screen_id: Option<String>,
}

impl TryFrom<LayoutRepr> for ScreenLayout {
    type Error = LayoutError;
    fn try_from(r: LayoutRepr) -> Result<Self, Self::Error> {
        ScreenLayout::new(r.root, r.source, r.screen_id)
    }
}

impl From<ScreenLayout> for LayoutRepr {
    fn from(l: ScreenLayout) -> Self {
        LayoutRepr {
            root: l.root,
            source: l.source,
            screen_id: l.screen_id,
        }
    }
}

impl ScreenLayout {
    /// Validates every invariant: unit-square `CONTAINER` root, element and
    /// depth caps, child containment, and well-formed names.
    pub fn new(root: UiElement, source: LayoutSource, screen_id: Option<String>) -> Result<Self, LayoutError> {
        if root.element_class != ElementClass::Container {
            return Err(LayoutError::Invalid(format!(
                "root element must be CONTAINER, found {}",
                root.element_class
            )));
        }
        if root.bbox != BoundingBox::UNIT {
            return Err(LayoutError::Bounds {
                line: None,
                message: "root bbox must be the unit square".into(),
            });
        }
        if let Some(id) = &screen_id {
            if !is_valid_name(id) {
                return Err(LayoutError::Invalid(format!("invalid screen id `{id}`")));
            }
        }
        let count = root.count();
        if count > MAX_ELEMENTS {
            return Err(LayoutError::TooManyElements { count });
        }
        validate_subtree(&root, 0)?;
        Ok(ScreenLayout {
            root,
            source,
            screen_id,
        })
    }

    /// A lone root container.
    pub fn root_only(source: LayoutSource) -> Self {
        ScreenLayout {
            root: UiElement::root(),
            source,
            screen_id: None,
        }
    }

    pub fn root(&self) -> &UiElement {
        &self.root
    }

    pub fn source(&self) -> LayoutSource {
        self.source
    }

    pub fn screen_id(&self) -> Option<&str> {
        self.screen_id.as_deref()
    }

    pub fn with_source(mut self, source: LayoutSource) -> Self {
        self.source = source;
        self
    }

    pub fn with_screen_id(mut self, screen_id: Option<String>) -> Result<Self, LayoutError> {
        if let Some(id) = &screen_id {
            if !is_valid_name(id) {
                return Err(LayoutError::Invalid(format!("invalid screen id `{id}`")));
            }
        }
        self.screen_id = screen_id;
        Ok(self)
    }

    pub fn element_count(&self) -> usize {
        self.root.count()
    }

    /// Elements in pre-order, paired with their depth.
    pub fn preorder(&self) -> Vec<(usize, &UiElement)> {
        fn walk<'a>(e: &'a UiElement, depth: usize, out: &mut Vec<(usize, &'a UiElement)>) {
            out.push((depth, e));
            for c in &e.children {
                walk(c, depth + 1, out);
            }
        }
        let mut out = Vec::with_capacity(self.element_count());
        walk(&self.root, 0, &mut out);
        out
    }

    pub fn max_depth(&self) -> usize {
        self.preorder().iter().map(|(d, _)| *d).max().unwrap_or(0)
    }

    /// Tree equality at serialization precision, ignoring provenance
    /// (`source`, `screen_id`).
    pub fn structurally_eq(&self, other: &ScreenLayout) -> bool {
        self.root.structurally_eq(&other.root)
    }

    /// Canonical DSL text.
    pub fn to_dsl(&self) -> String {
        serialize_layout(self)
    }
}

impl FromStr for ScreenLayout {
    type Err = LayoutError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_layout(s)
    }
}

fn validate_subtree(e: &UiElement, depth: usize) -> Result<(), LayoutError> {
    if depth > MAX_DEPTH {
        return Err(LayoutError::Depth { line: None, depth });
    }
    if !is_valid_name(&e.name) {
        return Err(LayoutError::Invalid(format!("invalid element name `{}`", e.name)));
    }
    for c in &e.children {
        if !e.bbox.contains_box(&c.bbox, CONTAIN_TOLERANCE) {
            return Err(LayoutError::Bounds {
                line: None,
                message: format!("child `{}` overflows parent `{}` by more than {CONTAIN_TOLERANCE}", c.name, e.name),
            });
        }
        validate_subtree(c, depth + 1)?;
    }
    Ok(())
}
