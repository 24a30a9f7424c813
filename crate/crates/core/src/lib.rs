//! Core of the UI world-model simulator.
//!
//! A step runs in two stages: a [`engine::LayoutPredictor`] turns the current
//! screen image and a user action into the next [`layout::ScreenLayout`], then
//! a [`engine::ScreenRenderer`] turns that layout into the next image.

pub mod layout;
pub mod raster;
pub mod engine;
pub mod fid;
pub mod session;
pub mod dataset;
