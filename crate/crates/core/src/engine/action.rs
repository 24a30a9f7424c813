use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActionKind {
    Tap,
    Type,
    Scroll,
    OpenApp,
    Back,
    Home,
    Other,
}

/// Normalized screen point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPoint {
    pub x: f64,
    pub y: f64,
}

/// A user action: free text plus optional structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ActionRepr")]
pub struct SimAction {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ActionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<NormPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typed_text: Option<String>,
}

#[derive(Deserialize)]
struct ActionRepr {
    text: String,
    #[serde(default)]
    kind: Option<ActionKind>,
    #[serde(default)]
    point: Option<NormPoint>,
    #[serde(default)]
    typed_text: Option<String>,
}

impl TryFrom<ActionRepr> for SimAction {
    type Error = String;
    fn try_from(r: ActionRepr) -> Result<Self, Self::Error> {
        let a = SimAction {
            text: r.text,
            kind: r.kind,
            point: r.point,
            typed_text: r.typed_text,
        };
        a.check_structure()?;
        Ok(a)
    }
}

impl SimAction {
    pub fn new(text: impl Into<String>) -> Self {
        SimAction {
            text: text.into(),
            kind: None,
            point: None,
            typed_text: None,
        }
    }

    pub fn tap(text: impl Into<String>, x: f64, y: f64) -> Self {
        SimAction {
            text: text.into(),
            kind: Some(ActionKind::Tap),
            point: Some(NormPoint { x, y }),
            typed_text: None,
        }
    }

    pub fn typing(text: impl Into<String>, typed: impl Into<String>) -> Self {
        SimAction {
            text: text.into(),
            kind: Some(ActionKind::Type),
            point: None,
            typed_text: Some(typed.into()),
        }
    }

    pub fn with_kind(mut self, kind: ActionKind) -> Self {
        self.kind = Some(kind);
        self
    }

    fn check_structure(&self) -> Result<(), String> {
        if self.kind == Some(ActionKind::Tap) && self.point.is_none() {
            return Err("TAP actions need a point".into());
        }
        if self.kind == Some(ActionKind::Type) && self.typed_text.is_none() {
            return Err("TYPE actions need typed_text".into());
        }
        if let Some(p) = self.point {
            if !(0.0..=1.0).contains(&p.x) || !(0.0..=1.0).contains(&p.y) {
                return Err(format!("point ({}, {}) is not normalized", p.x, p.y));
            }
        }
        Ok(())
    }

    /// Full check, including non-empty text.
    pub fn validate(&self) -> Result<(), String> {
        if self.text.trim().is_empty() {
            return Err("action text is empty".into());
        }
        self.check_structure()
    }
}
