//! Tile sets: P5 tiles placed at integer offsets in a shared gnomonic plane.

use std::path::Path;

use serde::{Deserialize, Serialize};
use skyquery_core::sphere::SkyPos;

use crate::geometry::TilePlane;
use crate::pgm::Gray16;
use crate::CutoutError;

pub const BACKGROUND: u16 = 0;
const MANIFEST: &str = "manifest.toml";
/// Largest composed buffer, in pixels.
const MAX_BUFFER: i64 = 1 << 28;
/// Pyramid depth; level 14 pixels span 16384 native pixels, beyond the
/// widest zoom-out step.
const LEVELS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileEntry {
    pub file: String,
    /// Lower-left corner relative to the tangent point, in native pixels.
    pub dx: i64,
    pub dy: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tangent_ra: f64,
    pub tangent_dec: f64,
    /// Native pixels per degree.
    pub native_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objects: Option<String>,
    pub tiles: Vec<TileEntry>,
}

/// A detected object available for overlay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkyObject {
    pub pos: SkyPos,
    pub spectrum: bool,
}

#[derive(Debug, Clone)]
pub struct Tile {
    pub image: Gray16,
    pub dx: i64,
    pub dy: i64,
}

/// One level of the composed buffer. Level `n` averages 2ⁿ×2ⁿ blocks of
/// native pixels; `j` grows northward.
#[derive(Debug, Clone)]
struct Level {
    width: i64,
    height: i64,
    data: Vec<f32>,
}

impl Level {
    fn at(&self, i: i64, j: i64) -> f32 {
        if i < 0 || j < 0 || i >= self.width || j >= self.height {
            return BACKGROUND as f32;
        }
        self.data[(j * self.width + i) as usize]
    }

    fn reduce(&self) -> Level {
        let (w, h) = ((self.width + 1) / 2, (self.height + 1) / 2);
        let mut data = Vec::with_capacity((w * h) as usize);
        for j in 0..h {
            for i in 0..w {
                let s = self.at(2 * i, 2 * j) + self.at(2 * i + 1, 2 * j) + self.at(2 * i, 2 * j + 1) + self.at(2 * i + 1, 2 * j + 1);
                data.push(s / 4.0);
            }
        }
        Level { width: w, height: h, data }
    }
}

#[derive(Debug, Clone)]
pub struct TileSet {
    pub tangent: SkyPos,
    pub native_scale: f64,
    pub plane: TilePlane,
    pub tiles: Vec<Tile>,
    pub objects: Vec<SkyObject>,
    /// Lower-left corner of the composed buffer in plane pixels.
    origin: (i64, i64),
    levels: Vec<Level>,
}

impl TileSet {
    pub fn new(tangent: SkyPos, native_scale: f64, tiles: Vec<Tile>, objects: Vec<SkyObject>) -> Result<Self, CutoutError> {
        if !(native_scale.is_finite() && native_scale > 0.0) {
            return Err(CutoutError::Format(format!("native scale must be positive, got {native_scale}")));
        }
        for (n, t) in tiles.iter().enumerate() {
            if t.image.width == 0 || t.image.height == 0 {
                return Err(CutoutError::Format(format!("tile {n} is empty")));
            }
        }
        let x0 = tiles.iter().map(|t| t.dx).min().unwrap_or(0);
        let y0 = tiles.iter().map(|t| t.dy).min().unwrap_or(0);
        let x1 = tiles.iter().map(|t| t.dx + t.image.width as i64).max().unwrap_or(0);
        let y1 = tiles.iter().map(|t| t.dy + t.image.height as i64).max().unwrap_or(0);
        let (w, h) = (x1 - x0, y1 - y0);
        if w.saturating_mul(h) > MAX_BUFFER {
            return Err(CutoutError::Format(format!("tiles span {w}x{h} pixels, more than {MAX_BUFFER}")));
        }
        // integer placement, later tiles overwrite earlier ones
        let mut base = Level { width: w, height: h, data: vec![BACKGROUND as f32; (w * h) as usize] };
        for t in &tiles {
            for row in 0..t.image.height {
                let j = t.dy - y0 + (t.image.height - 1 - row) as i64;
                let start = (j * w + t.dx - x0) as usize;
                for col in 0..t.image.width {
                    base.data[start + col] = t.image.get(col, row) as f32;
                }
            }
        }
        let mut levels = vec![base];
        while levels.len() < LEVELS {
            let next = levels.last().expect("non-empty").reduce();
            levels.push(next);
        }
        Ok(Self { tangent, native_scale, plane: TilePlane::new(tangent, native_scale), tiles, objects, origin: (x0, y0), levels })
    }

    /// Composed mosaic value at integer plane pixel `(i, j)`; `j` grows
    /// northward. The last listed tile covering the pixel wins.
    pub fn pixel(&self, i: i64, j: i64) -> u16 {
        self.levels[0].at(i - self.origin.0, j - self.origin.1) as u16
    }

    /// Bilinear sample at plane position `(u, v)`; pixel `(i, j)` has its
    /// center at `(i + 0.5, j + 0.5)`.
    pub fn sample(&self, u: f64, v: f64) -> f64 {
        self.sample_level(u, v, 0)
    }

    /// Pyramid level to sample when one output pixel spans `step` native
    /// pixels, so each sample sees at most two level pixels per axis.
    pub fn level_for(&self, step: f64) -> usize {
        if !(step >= 2.0) {
            return 0;
        }
        (step.log2().floor() as usize).min(self.levels.len() - 1)
    }

    /// Bilinear sample of pyramid level `level` at plane position `(u, v)`.
    pub fn sample_level(&self, u: f64, v: f64, level: usize) -> f64 {
        let lv = &self.levels[level];
        let f = (1u64 << level) as f64;
        let fu = (u - self.origin.0 as f64) / f - 0.5;
        let fv = (v - self.origin.1 as f64) / f - 0.5;
        if !(fu > -2.0 && fv > -2.0 && fu < lv.width as f64 + 1.0 && fv < lv.height as f64 + 1.0) {
            return BACKGROUND as f64;
        }
        let (i0, j0) = (fu.floor(), fv.floor());
        let (tx, ty) = (fu - i0, fv - j0);
        let (i0, j0) = (i0 as i64, j0 as i64);
        let p = |di: i64, dj: i64| lv.at(i0 + di, j0 + dj) as f64;
        let bottom = p(0, 0) * (1.0 - tx) + p(1, 0) * tx;
        let top = p(0, 1) * (1.0 - tx) + p(1, 1) * tx;
        bottom * (1.0 - ty) + top * ty
    }

    /// Center and radius (degrees) of a cap enclosing every tile.
    pub fn footprint(&self) -> (SkyPos, f64) {
        let t = self.plane.tangent;
        let mut r: f64 = 0.0;
        for tile in &self.tiles {
            let (w, h) = (tile.image.width as f64, tile.image.height as f64);
            for (u, v) in [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)] {
                let p = self.plane.deproject(tile.dx as f64 + u, tile.dy as f64 + v);
                r = r.max(p.dot(&t).clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        (self.tangent, r)
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            tangent_ra: self.tangent.ra(),
            tangent_dec: self.tangent.dec(),
            native_scale: self.native_scale,
            objects: Some("objects.csv".into()),
            tiles: self
                .tiles
                .iter()
                .enumerate()
                .map(|(n, t)| TileEntry { file: format!("tile_{n:03}.pgm"), dx: t.dx, dy: t.dy })
                .collect(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), CutoutError> {
        let io = |e: std::io::Error| CutoutError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let manifest = self.manifest();
        for (entry, tile) in manifest.tiles.iter().zip(&self.tiles) {
            std::fs::write(dir.join(&entry.file), tile.image.to_p5()).map_err(io)?;
        }
        let mut csv = String::from("ra,dec,spectrum\n");
        for o in &self.objects {
            csv.push_str(&format!("{},{},{}\n", o.pos.ra(), o.pos.dec(), o.spectrum as u8));
        }
        std::fs::write(dir.join("objects.csv"), csv).map_err(io)?;
        let text = toml::to_string(&manifest).map_err(|e| CutoutError::Format(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST), text).map_err(io)
    }

    pub fn load(dir: &Path) -> Result<Self, CutoutError> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read(&p).map_err(|e| CutoutError::Io(format!("{}: {e}", p.display())))
        };
        let text = String::from_utf8(read(MANIFEST)?).map_err(|e| CutoutError::Format(e.to_string()))?;
        let m: Manifest = toml::from_str(&text).map_err(|e| CutoutError::Format(format!("{MANIFEST}: {e}")))?;
        let tangent = SkyPos::new(m.tangent_ra, m.tangent_dec).map_err(|e| CutoutError::Format(e.to_string()))?;
        let tiles = m
            .tiles
            .iter()
            .map(|e| {
                let image = Gray16::from_p5(&read(&e.file)?)
                    .map_err(|err| CutoutError::Format(format!("{}: {err}", e.file)))?;
                Ok(Tile { image, dx: e.dx, dy: e.dy })
            })
            .collect::<Result<Vec<_>, CutoutError>>()?;
        let objects = match &m.objects {
            Some(f) => parse_objects(&String::from_utf8_lossy(&read(f)?))?,
            None => Vec::new(),
        };
        Self::new(tangent, m.native_scale, tiles, objects)
    }
}

fn parse_objects(text: &str) -> Result<Vec<SkyObject>, CutoutError> {
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, line)| {
            let bad = || CutoutError::Format(format!("objects line {}: '{line}'", n + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let ra = f[0].parse().map_err(|_| bad())?;
            let dec = f[1].parse().map_err(|_| bad())?;
            let pos = SkyPos::new(ra, dec).map_err(|_| bad())?;
            Ok(SkyObject { pos, spectrum: f[2] == "1" })
        })
        .collect()
}
