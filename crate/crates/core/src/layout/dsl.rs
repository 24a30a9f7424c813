//! The layout DSL: one element per line, two-space indentation per depth.
//!
//! ```text
//! @source predicted
//! @screen inbox
//! CONTAINER root (0.0000,0.0000,1.0000,1.0000)
//!   BUTTON send 'Send' (0.1000,0.8000,0.9000,0.9000) "sends the draft"
//! ```
//!
//! A line is `CLASS name ['text'] (x0,y0,x1,y1) ["description"]`. Lines
//! starting with `#` are comments; `@source` and `@screen` directives may
//! precede the first element. When the top level is anything other than a
//! single unit-square `CONTAINER`, the top-level elements are wrapped in a
//! synthetic root, so flat element lists parse as depth-1 trees.

use std::fmt::Write as _;

use super::{
    is_valid_name, BoundingBox, ElementClass, LayoutError, LayoutSource, ScreenLayout, UiElement,
    CONTAIN_TOLERANCE, MAX_DEPTH, MAX_ELEMENTS,
};

/// Upper bound on accepted input size.
pub const MAX_INPUT_BYTES: usize = 1 << 20;

const INDENT: &str = "  ";

pub fn parse_layout(text: &str) -> Result<ScreenLayout, LayoutError> {
    if text.len() > MAX_INPUT_BYTES {
        return Err(LayoutError::TooLarge { bytes: text.len() });
    }

    let mut source = LayoutSource::Annotated;
    let mut screen_id = None;
    let mut lines: Vec<ParsedLine> = Vec::new();

    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let body = raw.trim_start_matches(' ');
        if body.trim().is_empty() || body.starts_with('#') {
            continue;
        }
        let indent = raw.len() - body.len();
        if body.starts_with('\t') {
            return Err(syntax(line_no, indent + 1, "tabs are not allowed for indentation"));
        }
        if let Some(directive) = body.strip_prefix('@') {
            if indent != 0 || !lines.is_empty() {
                return Err(syntax(line_no, indent + 1, "directives must precede all elements"));
            }
            let (key, value) = directive.split_once(' ').unwrap_or((directive, ""));
            let value = value.trim();
            match key {
                "source" => {
                    source = value
                        .parse()
                        .map_err(|_| syntax(line_no, indent + 9, format!("unknown source `{value}`")))?;
                }
                "screen" => {
                    if !is_valid_name(value) {
                        return Err(syntax(line_no, indent + 9, format!("invalid screen id `{value}`")));
                    }
                    screen_id = Some(value.to_string());
                }
                other => return Err(syntax(line_no, 2, format!("unknown directive `@{other}`"))),
            }
            continue;
        }
        if indent % INDENT.len() != 0 {
            return Err(syntax(line_no, indent + 1, "indentation must be a multiple of two spaces"));
        }
        let level = indent / INDENT.len();
        let prev_level = lines.last().map(|l| l.level);
        match prev_level {
            None if level != 0 => return Err(syntax(line_no, 1, "first element must not be indented")),
            Some(p) if level > p + 1 => {
                return Err(syntax(line_no, indent + 1, "indentation jumps more than one level"))
            }
            _ => {}
        }
        if lines.len() >= MAX_ELEMENTS {
            return Err(LayoutError::TooManyElements { count: lines.len() + 1 });
        }
        let element = parse_element(body, line_no, indent)?;
        lines.push(ParsedLine {
            level,
            line: line_no,
            element,
        });
    }

    if lines.is_empty() {
        return Err(syntax(1, 1, "layout has no elements"));
    }

    let top_level = lines.iter().filter(|l| l.level == 0).count();
    let first = &lines[0].element;
    let wrap = !(top_level == 1
        && first.element_class == ElementClass::Container
        && first.bbox == BoundingBox::UNIT);
    let offset = usize::from(wrap);
    if lines.len() + offset > MAX_ELEMENTS {
        return Err(LayoutError::TooManyElements {
            count: lines.len() + offset,
        });
    }
    if let Some(l) = lines.iter().find(|l| l.level + offset > MAX_DEPTH) {
        return Err(LayoutError::Depth {
            line: Some(l.line),
            depth: l.level + offset,
        });
    }

    let mut stack: Vec<ParsedLine> = Vec::with_capacity(MAX_DEPTH + 2);
    if wrap {
        stack.push(ParsedLine {
            level: 0,
            line: 0,
            element: UiElement::root(),
        });
    }
    for mut pl in lines {
        pl.level += offset;
        while stack.last().is_some_and(|top| top.level >= pl.level) {
            attach(&mut stack)?;
        }
        stack.push(pl);
    }
    while stack.len() > 1 {
        attach(&mut stack)?;
    }
    let root = stack.pop().expect("stack holds the root").element;
    ScreenLayout::new(root, source, screen_id)
}

/// Canonical form: directives for non-default provenance, then elements in
/// pre-order with 4-decimal coordinates.
pub fn serialize_layout(layout: &ScreenLayout) -> String {
    let mut out = String::new();
    if layout.source() != LayoutSource::Annotated {
        let _ = writeln!(out, "@source {}", layout.source().as_str());
    }
    if let Some(id) = layout.screen_id() {
        let _ = writeln!(out, "@screen {id}");
    }
    write_element(&mut out, layout.root(), 0);
    out
}

fn write_element(out: &mut String, e: &UiElement, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
    out.push_str(e.element_class.token());
    out.push(' ');
    out.push_str(&e.name);
    if let Some(text) = &e.text_content {
        out.push(' ');
        write_quoted(out, text, '\'');
    }
    let b = &e.bbox;
    let _ = write!(out, " ({:.4},{:.4},{:.4},{:.4})", b.x0(), b.y0(), b.x1(), b.y1());
    if !e.description.is_empty() {
        out.push(' ');
        write_quoted(out, &e.description, '"');
    }
    out.push('\n');
    for c in &e.children {
        write_element(out, c, depth + 1);
    }
}

fn write_quoted(out: &mut String, s: &str, quote: char) {
    out.push(quote);
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if c == quote => {
                out.push('\\');
                out.push(c);
            }
            c => out.push(c),
        }
    }
    out.push(quote);
}

struct ParsedLine {
    level: usize,
    line: usize,
    element: UiElement,
}

fn attach(stack: &mut Vec<ParsedLine>) -> Result<(), LayoutError> {
    let child = stack.pop().expect("attach needs a child");
    let parent = stack.last_mut().expect("attach needs a parent");
    if !parent.element.bbox.contains_box(&child.element.bbox, CONTAIN_TOLERANCE) {
        return Err(LayoutError::Bounds {
            line: Some(child.line),
            message: format!(
                "`{}` overflows its parent `{}` by more than {CONTAIN_TOLERANCE}",
                child.element.name, parent.element.name
            ),
        });
    }
    parent.element.children.push(child.element);
    Ok(())
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> LayoutError {
    LayoutError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

/// Character cursor over one line; columns are 1-based.
struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    base_col: usize,
}

impl Cursor {
    fn new(src: &str, line: usize, indent: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            base_col: indent + 1,
        }
    }

    fn col(&self) -> usize {
        self.base_col + self.pos
    }

    fn err(&self, message: impl Into<String>) -> LayoutError {
        syntax(self.line, self.col(), message)
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_spaces(&mut self) -> bool {
        let start = self.pos;
        while self.peek() == Some(' ') {
            self.pos += 1;
        }
        self.pos > start
    }

    fn word(&mut self) -> String {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_whitespace() || matches!(c, '\'' | '"' | '(' | ')') {
                break;
            }
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn quoted(&mut self) -> Result<String, LayoutError> {
        let quote = self.peek().expect("caller checked for a quote");
        self.pos += 1;
        let mut out = String::new();
        loop {
            match self.peek() {
                None => return Err(self.err("unterminated string")),
                Some(c) if c == quote => {
                    self.pos += 1;
                    return Ok(out);
                }
                Some('\\') => {
                    self.pos += 1;
                    let esc = match self.peek() {
                        Some('\\') => '\\',
                        Some('\'') => '\'',
                        Some('"') => '"',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('t') => '\t',
                        Some(other) => return Err(self.err(format!("unknown escape `\\{other}`"))),
                        None => return Err(self.err("dangling escape")),
                    };
                    out.push(esc);
                    self.pos += 1;
                }
                Some(c) => {
                    out.push(c);
                    self.pos += 1;
                }
            }
        }
    }

    fn bbox(&mut self) -> Result<[f64; 4], LayoutError> {
        // caller checked for '('
        self.pos += 1;
        let mut coords = [0.0; 4];
        for (i, slot) in coords.iter_mut().enumerate() {
            self.skip_spaces();
            let start = self.pos;
            while self
                .peek()
                .is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
            {
                self.pos += 1;
            }
            let token: String = self.chars[start..self.pos].iter().collect();
            *slot = token
                .parse::<f64>()
                .map_err(|_| syntax(self.line, self.base_col + start, format!("bad coordinate `{token}`")))?;
            self.skip_spaces();
            let expected = if i == 3 { ')' } else { ',' };
            if self.peek() != Some(expected) {
                return Err(self.err(format!("expected `{expected}`")));
            }
            self.pos += 1;
        }
        Ok(coords)
    }
}

fn parse_element(body: &str, line: usize, indent: usize) -> Result<UiElement, LayoutError> {
    let mut cur = Cursor::new(body, line, indent);

    let class_col = cur.col();
    let token = cur.word();
    if token.is_empty() {
        return Err(cur.err("expected element class"));
    }
    let element_class: ElementClass = token
        .parse()
        .map_err(|_| syntax(line, class_col, format!("invalid class token `{token}`")))?;

    if !cur.skip_spaces() {
        return Err(cur.err("expected whitespace after class"));
    }
    let name_col = cur.col();
    let name = cur.word();
    if !is_valid_name(&name) {
        return Err(syntax(line, name_col, "expected element name"));
    }

    cur.skip_spaces();
    let mut text_content = None;
    if matches!(cur.peek(), Some('\'')) {
        text_content = Some(cur.quoted()?);
        cur.skip_spaces();
    }

    if cur.peek() != Some('(') {
        return Err(cur.err("expected bounding box `(x0,y0,x1,y1)`"));
    }
    let [x0, y0, x1, y1] = cur.bbox()?;
    let bbox = BoundingBox::new(x0, y0, x1, y1).map_err(|e| match e {
        LayoutError::Bounds { message, .. } => LayoutError::Bounds {
            line: Some(line),
            message,
        },
        other => other,
    })?;

    cur.skip_spaces();
    let mut description = String::new();
    if matches!(cur.peek(), Some('"')) {
        description = cur.quoted()?;
        cur.skip_spaces();
    }
    if cur.peek().is_some() {
        return Err(cur.err("unexpected trailing input"));
    }

    Ok(UiElement {
        element_class,
        name,
        description,
        text_content,
        bbox,
        children: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bb(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn minimal_document() {
        let l = parse_layout("CONTAINER root (0,0,1,1)").unwrap();
        assert_eq!(l.element_count(), 1);
        assert_eq!(l.root().name, "root");
        assert_eq!(serialize_layout(&l), "CONTAINER root (0.0000,0.0000,1.0000,1.0000)\n");
    }

    #[test]
    fn button_child_matches_hand_built_tree() {
        let l = parse_layout("CONTAINER root (0,0,1,1)\n  BUTTON send 'Send' (0.1,0.8,0.9,0.9)").unwrap();
        let expected = ScreenLayout::new(
            UiElement::root().with_child(
                UiElement::new(ElementClass::Button, "send", bb(0.1, 0.8, 0.9, 0.9)).with_text("Send"),
            ),
            LayoutSource::Annotated,
            None,
        )
        .unwrap();
        assert_eq!(l, expected);
        assert_eq!(l.root().children[0].text_content.as_deref(), Some("Send"));
    }

    #[test]
    fn inverted_box_is_bounds_error() {
        match parse_layout("BUTTON b (0.2,0.3,0.1,0.4)") {
            Err(LayoutError::Bounds { line: Some(1), .. }) => {}
            other => panic!("expected BoundsError, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_beyond_tolerance() {
        assert!(matches!(
            parse_layout("CONTAINER root (0,0,1,1)\n  TEXT t (0.1,0.1,1.00001,0.2)"),
            Err(LayoutError::Bounds { line: Some(2), .. })
        ));
        let ok = parse_layout("CONTAINER root (0,0,1,1)\n  TEXT t (0.1,0.1,1.0000005,0.2)").unwrap();
        assert_eq!(ok.root().children[0].bbox.x1(), 1.0);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let cases = [
            ("CONTAINER root (0,0,1,1)\n   TEXT t (0,0,1,1)", 2, 4),
            ("CONTAINER root (0,0,1,1)\n    TEXT t (0,0,1,1)", 2, 5),
            ("CONTAINER root (0,0,1,1)\n  TEXT t 'oops (0,0,1,1)", 2, 25),
            ("CONTAINER root (0,0,x,1)", 1, 21),
            ("CONTAINER root (0,0,1,1) junk", 1, 26),
            ("CONTAINER (0,0,1,1)", 1, 11),
        ];
        for (text, line, column) in cases {
            match parse_layout(text) {
                Err(LayoutError::Syntax { line: l, column: c, .. }) => {
                    assert_eq!((l, c), (line, column), "{text:?}")
                }
                other => panic!("{text:?}: expected syntax error, got {other:?}"),
            }
        }
    }

    #[test]
    fn depth_limit() {
        let mut text = String::from("CONTAINER root (0,0,1,1)\n");
        for d in 1..=33 {
            text.push_str(&"  ".repeat(d));
            text.push_str(&format!("CONTAINER c{d} (0,0,1,1)\n"));
        }
        assert!(matches!(parse_layout(&text), Err(LayoutError::Depth { line: Some(34), depth: 33 })));
        let ok: String = text.lines().take(33).map(|l| format!("{l}\n")).collect();
        assert_eq!(parse_layout(&ok).unwrap().max_depth(), 32);
    }

    #[test]
    fn flat_lists_become_depth_one_trees() {
        let l = parse_layout("TEXT a (0,0,0.5,0.1)\nTEXT b (0,0.1,0.5,0.2)\n").unwrap();
        assert_eq!(l.root().name, "root");
        assert_eq!(l.root().children.len(), 2);
        assert_eq!(l.max_depth(), 1);
    }

    #[test]
    fn directives_comments_and_escapes_round_trip() {
        let text = "# inbox screen\n@source predicted\n@screen inbox\nCONTAINER root (0,0,1,1)\n\n  TEXT t 'it\\'s \"ok\"\\n' (0,0,0.5,0.5) \"desc with \\\" quote\"\n  OTHER sep (0,0.5,1,0.5)\n  SLIDER s (0,0.6,1,0.7)\n";
        let l = parse_layout(text).unwrap();
        assert_eq!(l.source(), LayoutSource::Predicted);
        assert_eq!(l.screen_id(), Some("inbox"));
        let t = &l.root().children[0];
        assert_eq!(t.text_content.as_deref(), Some("it's \"ok\"\n"));
        assert_eq!(t.description, "desc with \" quote");
        assert!(l.root().children[1].bbox.is_degenerate());
        assert_eq!(l.root().children[2].element_class.token(), "SLIDER");
        let again = parse_layout(&serialize_layout(&l)).unwrap();
        assert_eq!(again, l);
    }

    #[test]
    fn equal_layouts_serialize_identically() {
        // built in code
        let a = ScreenLayout::new(
            UiElement::root()
                .with_child(UiElement::new(ElementClass::Navbar, "nav", bb(0.0, 0.9, 1.0, 1.0)))
                .with_child(UiElement::new(ElementClass::Text, "title", bb(0.05, 0.05, 0.95, 0.1)).with_text("Inbox")),
            LayoutSource::Annotated,
            None,
        )
        .unwrap();
        // parsed from sloppy text: flat list, odd spacing and number formats
        let b = parse_layout("NAVBAR nav (0.0 , 0.90000, 1, 1.0)\ntext   title 'Inbox'(5e-2,0.05,0.950,0.1)\n").unwrap();
        // decoded from JSON
        let c: ScreenLayout = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(serialize_layout(&a), serialize_layout(&b));
        assert_eq!(serialize_layout(&a), serialize_layout(&c));
    }

    #[test]
    fn rejects_oversize_input() {
        let big = "#".repeat(MAX_INPUT_BYTES + 1);
        assert!(matches!(parse_layout(&big), Err(LayoutError::TooLarge { .. })));
    }

    #[test]
    fn empty_and_misplaced_directive() {
        assert!(matches!(parse_layout("\n# nothing\n"), Err(LayoutError::Syntax { .. })));
        assert!(matches!(
            parse_layout("CONTAINER root (0,0,1,1)\n@source scripted"),
            Err(LayoutError::Syntax { line: 2, .. })
        ));
    }
}
