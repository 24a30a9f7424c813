//! Deterministic layout-to-image rasterizer.
//!
//! Elements are painted in pre-order so children land on top of parents.
//! The root is the canvas itself and is never painted. Every element's ink,
//! text included, stays inside its bounding box mapped to pixels with
//! round-half-up, which makes golden-image tests byte exact.

pub mod font;
mod image;
mod theme;

use thiserror::Error;

pub use self::image::{Image, ImageError, Rgb};
pub use self::theme::{ClassStyle, FontId, Theme};
use crate::layout::{BoundingBox, ElementClass, ScreenLayout, UiElement};

pub const MIN_DIMENSION: u32 = 16;
pub const MAX_DIMENSION: u32 = 4096;
pub const DEFAULT_WIDTH: u32 = 1080;
pub const DEFAULT_HEIGHT: u32 = 2400;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("resolution {width}x{height} outside [{MIN_DIMENSION}, {MAX_DIMENSION}]")]
    Resolution { width: u32, height: u32 },
    #[error("invalid theme: {0}")]
    Theme(String),
}

pub fn check_resolution(width: u32, height: u32) -> Result<(), RenderError> {
    let ok = |v: u32| (MIN_DIMENSION..=MAX_DIMENSION).contains(&v);
    if ok(width) && ok(height) {
        Ok(())
    } else {
        Err(RenderError::Resolution { width, height })
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelRect {
    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }
    pub fn is_empty(&self) -> bool {
        self.x0 >= self.x1 || self.y0 >= self.y1
    }
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
    fn inset(&self, by: u32) -> PixelRect {
        if self.width() <= 2 * by || self.height() <= 2 * by {
            return PixelRect {
                x0: self.x0,
                y0: self.y0,
                x1: self.x0,
                y1: self.y0,
            };
        }
        PixelRect {
            x0: self.x0 + by,
            y0: self.y0 + by,
            x1: self.x1 - by,
            y1: self.y1 - by,
        }
    }
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Maps a normalized box onto a `width x height` raster.
pub fn pixel_rect(bbox: &BoundingBox, width: u32, height: u32) -> PixelRect {
    let map = |v: f64, n: u32| round_half_up(v * f64::from(n)).clamp(0.0, f64::from(n)) as u32;
    PixelRect {
        x0: map(bbox.x0(), width),
        y0: map(bbox.y0(), height),
        x1: map(bbox.x1(), width),
        y1: map(bbox.y1(), height),
    }
}

pub fn render(layout: &ScreenLayout, theme: &Theme, width: u32, height: u32) -> Result<Image, RenderError> {
    check_resolution(width, height)?;
    theme.validate().map_err(RenderError::Theme)?;
    let mut img = Image::filled(width, height, theme.background_color);
    for child in &layout.root().children {
        draw_subtree(&mut img, child, theme);
    }
    Ok(img)
}

fn draw_subtree(img: &mut Image, e: &UiElement, theme: &Theme) {
    draw_element(img, e, theme);
    for c in &e.children {
        draw_subtree(img, c, theme);
    }
}

/// Pixel-center test against a rectangle with circular corners of radius `r`.
fn in_rounded(x: i64, y: i64, rect: &PixelRect, r: u32) -> bool {
    let (x0, y0, x1, y1) = (
        i64::from(rect.x0),
        i64::from(rect.y0),
        i64::from(rect.x1),
        i64::from(rect.y1),
    );
    if x < x0 || x >= x1 || y < y0 || y >= y1 {
        return false;
    }
    if r == 0 {
        return true;
    }
    let r = i64::from(r);
    // doubled coordinates keep pixel centers integral
    let (cx, cy) = (2 * x + 1, 2 * y + 1);
    let dx = if cx < 2 * (x0 + r) {
        2 * (x0 + r) - cx
    } else if cx > 2 * (x1 - r) {
        cx - 2 * (x1 - r)
    } else {
        return true;
    };
    let dy = if cy < 2 * (y0 + r) {
        2 * (y0 + r) - cy
    } else if cy > 2 * (y1 - r) {
        cy - 2 * (y1 - r)
    } else {
        return true;
    };
    dx * dx + dy * dy <= 4 * r * r
}

fn fill_rect(img: &mut Image, rect: &PixelRect, clip: &PixelRect, color: Rgb) {
    for y in rect.y0.max(clip.y0)..rect.y1.min(clip.y1) {
        for x in rect.x0.max(clip.x0)..rect.x1.min(clip.x1) {
            img.set(x, y, color);
        }
    }
}

fn outline_rect(img: &mut Image, rect: &PixelRect, color: Rgb) {
    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            if x == rect.x0 || x + 1 == rect.x1 || y == rect.y0 || y + 1 == rect.y1 {
                img.set(x, y, color);
            }
        }
    }
}

/// Draws `text` with its top-left glyph corner at `(x, y)`, clipped to `clip`.
fn draw_text(img: &mut Image, clip: &PixelRect, x: i64, y: i64, text: &str, scale: u32, color: Rgb) {
    let s = i64::from(scale);
    for (i, ch) in text.chars().enumerate() {
        let gx = x + i as i64 * i64::from(font::ADVANCE) * s;
        if gx >= i64::from(clip.x1) {
            break;
        }
        for col in 0..font::GLYPH_WIDTH {
            for row in 0..font::GLYPH_HEIGHT {
                if !font::ink(ch, col, row) {
                    continue;
                }
                for sy in 0..s {
                    for sx in 0..s {
                        let px = gx + i64::from(col) * s + sx;
                        let py = y + i64::from(row) * s + sy;
                        if px >= 0 && py >= 0 && clip.contains(px as u32, py as u32) {
                            img.set(px as u32, py as u32, color);
                        }
                    }
                }
            }
        }
    }
}

fn draw_element(img: &mut Image, e: &UiElement, theme: &Theme) {
    let rect = pixel_rect(&e.bbox, img.width(), img.height());
    if rect.is_empty() {
        return;
    }
    let style = theme.style(&e.element_class);
    let radius = theme
        .corner_radius_px
        .min(rect.width() / 2)
        .min(rect.height() / 2);

    for y in rect.y0..rect.y1 {
        for x in rect.x0..rect.x1 {
            let (xi, yi) = (i64::from(x), i64::from(y));
            if !in_rounded(xi, yi, &rect, radius) {
                continue;
            }
            let edge = !in_rounded(xi - 1, yi, &rect, radius)
                || !in_rounded(xi + 1, yi, &rect, radius)
                || !in_rounded(xi, yi - 1, &rect, radius)
                || !in_rounded(xi, yi + 1, &rect, radius);
            img.set(x, y, if edge { style.border } else { style.fill });
        }
    }

    let inner = rect.inset(1);
    let mut text_x = i64::from(rect.x0) + 2;
    match e.element_class {
        ElementClass::Image if !inner.is_empty() => {
            let (w, h) = (i64::from(inner.width()), i64::from(inner.height()));
            for t in 0..w {
                let dy = if w > 1 { t * (h - 1) / (w - 1) } else { 0 };
                let x = inner.x0 + t as u32;
                img.set(x, inner.y0 + dy as u32, style.border);
                img.set(x, inner.y1 - 1 - dy as u32, style.border);
            }
        }
        ElementClass::Icon => {
            let by = (rect.width().min(rect.height()) / 4).max(1);
            fill_rect(img, &rect.inset(by), &inner, style.border);
        }
        ElementClass::Checkbox => {
            let side = rect.height().saturating_sub(4).min(rect.width().saturating_sub(4));
            if side >= 3 {
                let y0 = rect.y0 + (rect.height() - side) / 2;
                let b = PixelRect {
                    x0: rect.x0 + 2,
                    y0,
                    x1: rect.x0 + 2 + side,
                    y1: y0 + side,
                };
                outline_rect(img, &b, style.border);
                text_x = i64::from(b.x1) + 2;
            }
        }
        ElementClass::Switch => {
            let side = rect.height().saturating_sub(4).min(rect.width() / 2);
            if side >= 1 {
                let y0 = rect.y0 + (rect.height() - side) / 2;
                let knob = PixelRect {
                    x0: rect.x1 - 2 - side,
                    y0,
                    x1: rect.x1 - 2,
                    y1: y0 + side,
                };
                fill_rect(img, &knob, &inner, style.border);
            }
        }
        ElementClass::Statusbar => {
            let bh = round_half_up(theme.statusbar_height_frac * f64::from(img.height()) * 0.5).max(1.0) as u32;
            let bw = 2 * bh;
            if rect.width() > bw + 4 && rect.height() > bh {
                let y0 = rect.y0 + (rect.height() - bh) / 2;
                let battery = PixelRect {
                    x0: rect.x1 - 2 - bw,
                    y0,
                    x1: rect.x1 - 2,
                    y1: y0 + bh,
                };
                fill_rect(img, &battery, &inner, theme.text_color);
            }
        }
        _ => {}
    }

    if let Some(text) = e.text_content.as_deref().filter(|t| !t.is_empty()) {
        let scale = theme.font_scale;
        let tw = i64::from(font::text_width(text, scale));
        let th = i64::from(font::GLYPH_HEIGHT * scale);
        let (w, h) = (i64::from(rect.width()), i64::from(rect.height()));
        let x = if e.element_class == ElementClass::Button && tw <= w - 4 {
            i64::from(rect.x0) + (w - tw) / 2
        } else {
            text_x
        };
        let y = i64::from(rect.y0) + ((h - th) / 2).max(0);
        draw_text(img, &inner, x, y, text, scale, theme.text_color);
    }
}

/// Returns a copy of `image` with every element's box outlined and
/// non-root elements labelled with their class token.
pub fn overlay_layout(image: &Image, layout: &ScreenLayout, theme: &Theme) -> Image {
    let mut out = image.clone();
    let (w, h) = (out.width(), out.height());
    for (i, (_, e)) in layout.preorder().into_iter().enumerate() {
        let rect = pixel_rect(&e.bbox, w, h);
        if rect.is_empty() {
            // zero-area boxes still get a visible 1px line
            let line = PixelRect {
                x0: rect.x0.min(w - 1),
                y0: rect.y0.min(h - 1),
                x1: rect.x1.max(rect.x0 + 1).min(w),
                y1: rect.y1.max(rect.y0 + 1).min(h),
            };
            fill_rect(&mut out, &line, &line, theme.overlay_color);
            continue;
        }
        outline_rect(&mut out, &rect, theme.overlay_color);
        if i > 0 {
            let label = e.element_class.token();
            draw_text(
                &mut out,
                &rect.inset(1),
                i64::from(rect.x0) + 2,
                i64::from(rect.y0) + 2,
                label,
                1,
                theme.overlay_color,
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{parse_layout, LayoutSource};

    fn ink_rect(img: &Image, bg: Rgb) -> Option<PixelRect> {
        let mut r: Option<PixelRect> = None;
        for y in 0..img.height() {
            for x in 0..img.width() {
                if img.get(x, y) != bg {
                    let cur = r.get_or_insert(PixelRect { x0: x, y0: y, x1: x + 1, y1: y + 1 });
                    cur.x0 = cur.x0.min(x);
                    cur.y0 = cur.y0.min(y);
                    cur.x1 = cur.x1.max(x + 1);
                    cur.y1 = cur.y1.max(y + 1);
                }
            }
        }
        r
    }

    #[test]
    fn root_only_is_uniform_background() {
        let theme = Theme::light();
        let img = render(&ScreenLayout::root_only(LayoutSource::Annotated), &theme, 108, 240).unwrap();
        assert!(img.pixels().chunks(3).all(|p| p == theme.background_color.0));
    }

    #[test]
    fn button_ink_stays_in_mapped_rect() {
        let theme = Theme::light();
        let l = parse_layout("BUTTON ok 'OK' (0.25,0.25,0.75,0.5)").unwrap();
        let img = render(&l, &theme, 100, 200).unwrap();
        let allowed = PixelRect { x0: 25, y0: 50, x1: 75, y1: 100 };
        for y in 0..200 {
            for x in 0..100 {
                if img.get(x, y) != theme.background_color {
                    assert!(allowed.contains(x, y), "ink at ({x},{y})");
                }
            }
        }
        // with no rounding the ink covers the rect exactly
        let square = Theme { corner_radius_px: 0, ..Theme::light() };
        let img = render(&l, &square, 100, 200).unwrap();
        assert_eq!(ink_rect(&img, square.background_color), Some(allowed));
    }

    #[test]
    fn resolution_bounds() {
        let l = ScreenLayout::root_only(LayoutSource::Annotated);
        let t = Theme::light();
        assert!(render(&l, &t, 15, 100).is_err());
        assert!(render(&l, &t, 16, 4097).is_err());
        assert!(render(&l, &t, 16, 16).is_ok());
        assert!(render(&l, &t, 4096, 16).is_ok());
    }

    #[test]
    fn invalid_theme_rejected() {
        let t = Theme { statusbar_height_frac: 0.2, ..Theme::light() };
        let l = ScreenLayout::root_only(LayoutSource::Annotated);
        assert!(matches!(render(&l, &t, 100, 100), Err(RenderError::Theme(_))));
    }

    #[test]
    fn text_is_clipped_to_box() {
        let theme = Theme { corner_radius_px: 0, ..Theme::light() };
        let l = parse_layout("TEXT t 'a very long line of text that overflows' (0.1,0.1,0.3,0.15)").unwrap();
        let img = render(&l, &theme, 108, 240).unwrap();
        let r = pixel_rect(&l.root().children[0].bbox, 108, 240);
        let ink = ink_rect(&img, theme.background_color).unwrap();
        assert!(ink.x0 >= r.x0 && ink.x1 <= r.x1 && ink.y0 >= r.y0 && ink.y1 <= r.y1);
        // some glyph pixels were drawn
        let text_px = img.pixels().chunks(3).filter(|p| *p == theme.text_color.0).count();
        assert!(text_px > 0);
    }

    #[test]
    fn render_is_deterministic() {
        let l = parse_layout(
            "CONTAINER root (0,0,1,1)\n  STATUSBAR sb (0,0,1,0.04)\n  IMAGE hero (0.05,0.1,0.95,0.4)\n  CHECKBOX c 'Remember' (0.05,0.45,0.6,0.5)\n  SWITCH s (0.7,0.45,0.95,0.5)\n  ICON i (0.1,0.6,0.2,0.65)\n",
        )
        .unwrap();
        let t = Theme::dark();
        assert_eq!(render(&l, &t, 108, 240).unwrap(), render(&l, &t, 108, 240).unwrap());
    }

    #[test]
    fn overlay_leaves_input_untouched_and_is_idempotent() {
        let theme = Theme::light();
        let l = parse_layout("CONTAINER root (0,0,1,1)\n  BUTTON b 'Go' (0.1,0.1,0.9,0.3)\n  OTHER sep (0,0.5,1,0.5)\n").unwrap();
        let base = render(&l, &theme, 108, 240).unwrap();
        let copy = base.clone();
        let once = overlay_layout(&base, &l, &theme);
        assert_eq!(base, copy);
        assert_ne!(once, base);
        let twice = overlay_layout(&once, &l, &theme);
        let changed = |a: &Image, b: &Image| -> Vec<(u32, u32)> {
            (0..a.height())
                .flat_map(|y| (0..a.width()).map(move |x| (x, y)))
                .filter(|&(x, y)| a.get(x, y) != b.get(x, y))
                .collect()
        };
        assert_eq!(changed(&base, &once), changed(&base, &twice));
    }

    #[test]
    fn overlay_root_only_outlines_frame() {
        let theme = Theme::light();
        let img = Image::filled(16, 16, theme.background_color);
        let out = overlay_layout(&img, &ScreenLayout::root_only(LayoutSource::Annotated), &theme);
        for y in 0..16 {
            for x in 0..16 {
                let edge = x == 0 || y == 0 || x == 15 || y == 15;
                assert_eq!(out.get(x, y) == theme.overlay_color, edge, "({x},{y})");
            }
        }
    }

    #[test]
    fn doubling_resolution_doubles_rects() {
        // coordinates on the 1/108 and 1/240 grids map exactly at both scales
        let b = BoundingBox::new(27.0 / 108.0, 60.0 / 240.0, 81.0 / 108.0, 121.0 / 240.0).unwrap();
        let r1 = pixel_rect(&b, 108, 240);
        let r2 = pixel_rect(&b, 216, 480);
        assert_eq!((r2.x0, r2.y0, r2.x1, r2.y1), (2 * r1.x0, 2 * r1.y0, 2 * r1.x1, 2 * r1.y1));
    }
}
