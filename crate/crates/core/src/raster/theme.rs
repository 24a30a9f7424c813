use serde::{Deserialize, Serialize};

use super::Rgb;
use crate::layout::ElementClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStyle {
    pub fill: Rgb,
    pub border: Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FontId {
    #[default]
    #[serde(rename = "mono5x7")]
    Mono5x7,
}

/// Flat-color styling for the rasterizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theme {
    pub name: String,
    pub background_color: Rgb,
    pub text_color: Rgb,
    /// Outline and label color used by overlays.
    pub overlay_color: Rgb,
    /// Indexed in [`Theme::style_index`] order.
    pub styles: [ClassStyle; 12],
    pub corner_radius_px: u32,
    pub font: FontId,
    /// Integer glyph magnification.
    pub font_scale: u32,
    pub statusbar_height_frac: f64,
}

const fn style(fill: Rgb, border: Rgb) -> ClassStyle {
    ClassStyle { fill, border }
}

impl Theme {
    pub fn light() -> Self {
        let bg = Rgb::new(250, 250, 250);
        Theme {
            name: "light".into(),
            background_color: bg,
            text_color: Rgb::new(33, 33, 33),
            overlay_color: Rgb::new(255, 0, 255),
            styles: [
                style(Rgb::new(25, 118, 210), Rgb::new(13, 71, 161)),   // BUTTON
                style(Rgb::new(255, 255, 255), Rgb::new(236, 236, 236)), // TEXT
                style(Rgb::new(240, 240, 240), Rgb::new(117, 117, 117)), // TEXT_FIELD
                style(Rgb::new(176, 190, 197), Rgb::new(120, 144, 156)), // IMAGE
                style(Rgb::new(255, 193, 7), Rgb::new(255, 143, 0)),     // ICON
                style(Rgb::new(255, 255, 255), Rgb::new(66, 66, 66)),    // CHECKBOX
                style(Rgb::new(200, 230, 201), Rgb::new(56, 142, 60)),   // SWITCH
                style(Rgb::new(255, 255, 255), Rgb::new(224, 224, 224)), // LIST_ITEM
                style(Rgb::new(238, 238, 238), Rgb::new(189, 189, 189)), // NAVBAR
                style(Rgb::new(21, 101, 192), Rgb::new(21, 101, 192)),   // STATUSBAR
                style(bg, Rgb::new(224, 224, 224)),                      // CONTAINER
                style(Rgb::new(225, 190, 231), Rgb::new(142, 36, 170)),  // OTHER
            ],
            corner_radius_px: 2,
            font: FontId::Mono5x7,
            font_scale: 1,
            statusbar_height_frac: 0.04,
        }
    }

    pub fn dark() -> Self {
        let bg = Rgb::new(18, 18, 18);
        Theme {
            name: "dark".into(),
            background_color: bg,
            text_color: Rgb::new(230, 230, 230),
            overlay_color: Rgb::new(0, 255, 128),
            styles: [
                style(Rgb::new(144, 202, 249), Rgb::new(100, 181, 246)),
                style(Rgb::new(30, 30, 30), Rgb::new(48, 48, 48)),
                style(Rgb::new(44, 44, 44), Rgb::new(158, 158, 158)),
                style(Rgb::new(69, 90, 100), Rgb::new(96, 125, 139)),
                style(Rgb::new(255, 213, 79), Rgb::new(255, 179, 0)),
                style(Rgb::new(30, 30, 30), Rgb::new(189, 189, 189)),
                style(Rgb::new(27, 94, 32), Rgb::new(102, 187, 106)),
                style(Rgb::new(30, 30, 30), Rgb::new(55, 55, 55)),
                style(Rgb::new(33, 33, 33), Rgb::new(66, 66, 66)),
                style(Rgb::new(0, 0, 0), Rgb::new(0, 0, 0)),
                style(bg, Rgb::new(48, 48, 48)),
                style(Rgb::new(74, 20, 140), Rgb::new(171, 71, 188)),
            ],
            corner_radius_px: 2,
            font: FontId::Mono5x7,
            font_scale: 1,
            statusbar_height_frac: 0.04,
        }
    }

    /// Built-in themes: `light` (default) and `dark`.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "light" | "default" => Some(Theme::light()),
            "dark" => Some(Theme::dark()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=0.1).contains(&self.statusbar_height_frac) {
            return Err(format!(
                "statusbar_height_frac {} outside [0, 0.1]",
                self.statusbar_height_frac
            ));
        }
        if self.font_scale == 0 {
            return Err("font_scale must be at least 1".into());
        }
        Ok(())
    }

    pub fn style_index(class: &ElementClass) -> usize {
        match class {
            ElementClass::Button => 0,
            ElementClass::Text => 1,
            ElementClass::TextField => 2,
            ElementClass::Image => 3,
            ElementClass::Icon => 4,
            ElementClass::Checkbox => 5,
            ElementClass::Switch => 6,
            ElementClass::ListItem => 7,
            ElementClass::Navbar => 8,
            ElementClass::Statusbar => 9,
            ElementClass::Container => 10,
            ElementClass::Other(_) => 11,
        }
    }

    pub fn style(&self, class: &ElementClass) -> ClassStyle {
        self.styles[Self::style_index(class)]
    }
}

impl Default for Theme {
    fn default() -> Self {
        Theme::light()
    }
}
