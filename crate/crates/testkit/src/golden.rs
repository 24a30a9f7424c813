//! Byte-exact rendering fixtures at 108x240.

use std::path::PathBuf;

pub const WIDTH: u32 = 108;
pub const HEIGHT: u32 = 240;

/// `(fixture, theme)` pairs; each has `golden/<fixture>.uil` and
/// `golden/<fixture>.<theme>.png`.
pub const CASES: [(&str, &str); 7] = [
    ("home", "light"),
    ("inbox", "light"),
    ("compose", "dark"),
    ("all_classes", "light"),
    ("all_classes", "dark"),
    ("nested_overflow", "light"),
    ("text_edges", "light"),
];

/// Set to regenerate the PNGs instead of comparing against them.
pub const UPDATE_ENV: &str = "UISIM_UPDATE_GOLDEN";

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("golden")
}

pub fn layout_path(fixture: &str) -> PathBuf {
    dir().join(format!("{fixture}.uil"))
}

pub fn png_path(fixture: &str, theme: &str) -> PathBuf {
    dir().join(format!("{fixture}.{theme}.png"))
}
