//! Image cutouts from a set of gnomonic tiles: north-up, scaled, optionally
//! inverted and overlaid with catalog objects, served as 16-bit graymaps.

pub mod geometry;
pub mod pgm;
pub mod render;
pub mod service;
pub mod synth;
pub mod tiles;

pub use pgm::Gray16;
pub use render::{mosaic, overlay_objects, parse_opt, render, CutoutRequest, Overlay};
pub use service::{router, spawn, CutoutInfo, RunningCutout};
pub use tiles::{SkyObject, TileSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CutoutError {
    #[error("invalid parameter {name}: {message}")]
    InvalidParam { name: String, message: String },
    #[error("tile set i/o: {0}")]
    Io(String),
    #[error("tile set format: {0}")]
    Format(String),
}

impl CutoutError {
    pub fn invalid(name: &str, message: impl Into<String>) -> Self {
        Self::InvalidParam { name: name.into(), message: message.into() }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::InvalidParam { .. } => "invalid_parameter",
            Self::Io(_) => "io_error",
            Self::Format(_) => "format_error",
        }
    }
}
