use async_trait::async_trait;

use super::{BackendDescriptor, BackendError, ScreenRenderer};
use crate::layout::ScreenLayout;
use crate::raster::{self, Image, RenderError, Theme};

/// Stage-2 backend backed by the deterministic rasterizer.
#[derive(Debug, Clone)]
pub struct BuiltinRenderer {
    theme: Theme,
    width: u32,
    height: u32,
}

impl BuiltinRenderer {
    pub fn new(theme: Theme, width: u32, height: u32) -> Result<Self, RenderError> {
        raster::check_resolution(width, height)?;
        theme.validate().map_err(RenderError::Theme)?;
        Ok(BuiltinRenderer { theme, width, height })
    }

    pub fn theme(&self) -> &Theme {
        &self.theme
    }
}

#[async_trait]
impl ScreenRenderer for BuiltinRenderer {
    fn descriptor(&self) -> BackendDescriptor {
        let mut d = BackendDescriptor::new("builtin-raster", env!("CARGO_PKG_VERSION"));
        d.metadata.insert("theme".into(), self.theme.name.clone());
        d
    }

    fn resolution(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    async fn render(&self, layout: &ScreenLayout) -> Result<Image, BackendError> {
        Ok(raster::render(layout, &self.theme, self.width, self.height)?)
    }
}
