//! Cutout requests and rendering.

use skyquery_core::sphere::SkyPos;

use crate::geometry::OutputFrame;
use crate::pgm::{Gray16, MAX_VALUE};
use crate::tiles::{SkyObject, TileSet, BACKGROUND};
use crate::CutoutError;

pub const MAX_SIZE: usize = 4096;
/// Ratio between the largest and smallest allowed scale.
pub const DYNAMIC_RANGE: f64 = 1e4;
/// The largest scale is this multiple of the native scale.
pub const MAX_ZOOM: f64 = 4.0;
pub const MARKER_RADIUS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Overlay {
    #[default]
    None,
    Objects,
    Spectra,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoutRequest {
    pub center: SkyPos,
    /// Output pixels per degree.
    pub scale: f64,
    pub width: usize,
    pub height: usize,
    pub invert: bool,
    pub overlay: Overlay,
}

/// Parses the `opt` flag string: `i` toggles inversion, `o` overlays all
/// objects, `s` only those with spectra.
pub fn parse_opt(opt: &str) -> Result<(bool, Overlay), CutoutError> {
    let mut invert = false;
    let mut overlay = Overlay::None;
    for c in opt.chars() {
        match c {
            'i' => invert = !invert,
            'o' => overlay = Overlay::Objects,
            's' if overlay == Overlay::None => overlay = Overlay::Spectra,
            's' => {}
            _ => return Err(CutoutError::invalid("opt", format!("unknown flag '{c}'; expected i, o or s"))),
        }
    }
    Ok((invert, overlay))
}

pub fn max_scale(native_scale: f64) -> f64 {
    native_scale * MAX_ZOOM
}

pub fn min_scale(native_scale: f64) -> f64 {
    max_scale(native_scale) / DYNAMIC_RANGE
}

impl CutoutRequest {
    pub fn validate(&self, native_scale: f64) -> Result<(), CutoutError> {
        let (lo, hi) = (min_scale(native_scale), max_scale(native_scale));
        // tolerate rounding when a client computes the bounds itself
        if !(self.scale.is_finite() && self.scale >= lo * (1.0 - 1e-12) && self.scale <= hi * (1.0 + 1e-12)) {
            return Err(CutoutError::invalid("scale", format!("scale {} outside [{lo}, {hi}] pixels per degree", self.scale)));
        }
        for (name, v) in [("width", self.width), ("height", self.height)] {
            if !(1..=MAX_SIZE).contains(&v) {
                return Err(CutoutError::invalid(name, format!("{name} {v} outside [1, {MAX_SIZE}]")));
            }
        }
        Ok(())
    }
}

fn frame(tiles: &TileSet, req: &CutoutRequest) -> Option<OutputFrame> {
    OutputFrame::new(&tiles.plane, &req.center, req.scale, req.width, req.height)
}

/// Composes, rotates north-up, resamples and crops. Inversion is applied
/// last. Zooming out samples a box-averaged level of the composed buffer so
/// that stars do not fall between samples.
pub fn mosaic(tiles: &TileSet, req: &CutoutRequest) -> Result<Gray16, CutoutError> {
    req.validate(tiles.native_scale)?;
    let mut img = Gray16::new(req.width, req.height, BACKGROUND);
    // a center on the far side of the tangent plane sees no tiles
    if let Some(f) = frame(tiles, req) {
        let level = tiles.level_for(tiles.native_scale / req.scale);
        for row in 0..req.height {
            for col in 0..req.width {
                let (u, v) = f.to_plane(col as f64, row as f64);
                let s = tiles.sample_level(u, v, level);
                img.set(col, row, s.round().clamp(0.0, MAX_VALUE as f64) as u16);
            }
        }
    }
    if req.invert {
        img.invert();
    }
    Ok(img)
}

/// Fractional output pixel of `pos`, or `None` when it cannot be projected.
pub fn project(tiles: &TileSet, req: &CutoutRequest, pos: &SkyPos) -> Option<(f64, f64)> {
    let f = frame(tiles, req)?;
    let (u, v) = tiles.plane.project(&pos.to_unitvec())?;
    Some(f.from_plane(u, v))
}

/// Draws a circle outline at full intensity around each object whose
/// projected center lies inside the frame.
pub fn overlay_objects(img: &mut Gray16, tiles: &TileSet, req: &CutoutRequest, objects: &[SkyObject]) {
    let r = MARKER_RADIUS;
    let reach = r.ceil() as i64 + 1;
    for o in objects {
        let Some((c, rw)) = project(tiles, req, &o.pos) else { continue };
        let (c, rw) = (c.round(), rw.round());
        if !(c >= 0.0 && rw >= 0.0 && c < img.width as f64 && rw < img.height as f64) {
            continue;
        }
        let (c, rw) = (c as i64, rw as i64);
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let d = ((dc * dc + dr * dr) as f64).sqrt();
                let (x, y) = (c + dc, rw + dr);
                if (d - r).abs() < 0.5 && x >= 0 && y >= 0 && (x as usize) < img.width && (y as usize) < img.height {
                    img.set(x as usize, y as usize, MAX_VALUE);
                }
            }
        }
    }
}

/// The full service pipeline: mosaic, optional inversion, then markers.
pub fn render(tiles: &TileSet, req: &CutoutRequest) -> Result<Gray16, CutoutError> {
    let mut img = mosaic(tiles, req)?;
    let selected: Vec<SkyObject> = match req.overlay {
        Overlay::None => Vec::new(),
        Overlay::Objects => tiles.objects.clone(),
        Overlay::Spectra => tiles.objects.iter().filter(|o| o.spectrum).copied().collect(),
    };
    overlay_objects(&mut img, tiles, req, &selected);
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tiles::Tile;

    fn blank_set() -> TileSet {
        TileSet::new(SkyPos::new(181.3, -0.76).unwrap(), 1800.0, vec![], vec![]).unwrap()
    }

    fn req(scale: f64, w: usize, h: usize) -> CutoutRequest {
        CutoutRequest {
            center: SkyPos::new(181.3, -0.76).unwrap(),
            scale,
            width: w,
            height: h,
            invert: false,
            overlay: Overlay::None,
        }
    }

    #[test]
    fn opt_flags() {
        assert_eq!(parse_opt("").unwrap(), (false, Overlay::None));
        assert_eq!(parse_opt("i").unwrap(), (true, Overlay::None));
        assert_eq!(parse_opt("ii").unwrap(), (false, Overlay::None));
        assert_eq!(parse_opt("s").unwrap(), (false, Overlay::Spectra));
        assert_eq!(parse_opt("so").unwrap(), (false, Overlay::Objects));
        assert_eq!(parse_opt("os").unwrap(), (false, Overlay::Objects));
        assert!(parse_opt("x").is_err());
    }

    #[test]
    fn bounds() {
        let set = blank_set();
        assert!(req(7200.0, 1, 4096).validate(1800.0).is_ok());
        assert!(req(0.72, 4096, 1).validate(1800.0).is_ok());
        assert!(req(0.71, 10, 10).validate(1800.0).is_err());
        assert!(req(7201.0, 10, 10).validate(1800.0).is_err());
        assert!(req(f64::NAN, 10, 10).validate(1800.0).is_err());
        assert!(req(100.0, 0, 10).validate(1800.0).is_err());
        assert!(req(100.0, 10, 4097).validate(1800.0).is_err());
        let img = mosaic(&set, &req(100.0, 7, 3)).unwrap();
        assert_eq!((img.width, img.height), (7, 3));
        assert!(img.data.iter().all(|&p| p == BACKGROUND));
    }

    #[test]
    fn marker_at_center() {
        let mut set = blank_set();
        let r = req(1800.0, 21, 21);
        let before = mosaic(&set, &r).unwrap();
        let mut img = before.clone();
        overlay_objects(&mut img, &set, &r, &[]);
        assert_eq!(img, before);
        set.objects = vec![SkyObject { pos: r.center, spectrum: false }];
        let img = render(&set, &CutoutRequest { overlay: Overlay::Objects, ..r }).unwrap();
        assert_eq!(img.get(10, 6), MAX_VALUE);
        assert_eq!(img.get(14, 10), MAX_VALUE);
        assert_eq!(img.get(10, 10), BACKGROUND);
        let none = render(&set, &CutoutRequest { overlay: Overlay::Spectra, ..r }).unwrap();
        assert_eq!(none, before);
    }

    #[test]
    fn far_side_center_is_background() {
        let t = Tile { image: Gray16::new(4, 4, 100), dx: -2, dy: -2 };
        let set = TileSet::new(SkyPos::new(10.0, 0.0).unwrap(), 1800.0, vec![t], vec![]).unwrap();
        let mut r = req(1800.0, 4, 4);
        r.center = SkyPos::new(190.0, 0.0).unwrap();
        assert!(mosaic(&set, &r).unwrap().data.iter().all(|&p| p == 0));
        r.center = SkyPos::new(10.0, 0.0).unwrap();
        assert!(mosaic(&set, &r).unwrap().data.iter().all(|&p| p == 100));
    }
}
