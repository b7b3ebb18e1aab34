//! Synthetic star-field tile sets with known star positions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use skyquery_core::sphere::SkyPos;

use crate::geometry::TilePlane;
use crate::pgm::{Gray16, MAX_VALUE};
use crate::tiles::{SkyObject, Tile, TileSet};
use crate::CutoutError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TileSynthConfig {
    pub tangent_ra: f64,
    pub tangent_dec: f64,
    /// Pixels per degree.
    pub native_scale: f64,
    pub tile_width: usize,
    pub tile_height: usize,
    pub cols: usize,
    pub rows: usize,
    /// Pixels shared by neighbouring tiles.
    pub overlap: usize,
    pub stars: usize,
    pub spectra_fraction: f64,
    pub sky_level: f64,
    /// Half-width of the uniform per-pixel noise.
    pub noise: f64,
    /// Gaussian PSF sigma in pixels.
    pub psf_sigma: f64,
    pub seed: u64,
}

impl Default for TileSynthConfig {
    fn default() -> Self {
        Self {
            tangent_ra: 181.3,
            tangent_dec: -0.76,
            native_scale: 1800.0,
            tile_width: 256,
            tile_height: 256,
            cols: 6,
            rows: 6,
            overlap: 8,
            stars: 400,
            spectra_fraction: 0.1,
            sky_level: 1000.0,
            noise: 30.0,
            psf_sigma: 1.3,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthStar {
    pub pos: SkyPos,
    pub peak: f64,
    pub spectrum: bool,
}

impl TileSynthConfig {
    pub fn tangent(&self) -> Result<SkyPos, CutoutError> {
        SkyPos::new(self.tangent_ra, self.tangent_dec).map_err(|e| CutoutError::Format(e.to_string()))
    }

    fn extent(&self) -> (i64, i64) {
        let w = self.cols * (self.tile_width - self.overlap) + self.overlap;
        let h = self.rows * (self.tile_height - self.overlap) + self.overlap;
        (w as i64, h as i64)
    }

    /// Lower-left corner of the covered rectangle in plane pixels.
    fn origin(&self) -> (i64, i64) {
        let (w, h) = self.extent();
        (-w / 2, -h / 2)
    }

    fn check(&self) -> Result<(), CutoutError> {
        if self.tile_width == 0 || self.tile_height == 0 || self.cols == 0 || self.rows == 0 {
            return Err(CutoutError::Format("tile grid must be non-empty".into()));
        }
        if self.overlap >= self.tile_width.min(self.tile_height) {
            return Err(CutoutError::Format("overlap must be smaller than a tile".into()));
        }
        if !(self.psf_sigma > 0.0) {
            return Err(CutoutError::Format("psf_sigma must be positive".into()));
        }
        Ok(())
    }
}

/// Stars uniformly distributed over the tiled rectangle of the plane.
pub fn random_stars(cfg: &TileSynthConfig, rng: &mut impl Rng) -> Result<Vec<SynthStar>, CutoutError> {
    let plane = TilePlane::new(cfg.tangent()?, cfg.native_scale);
    let (x0, y0) = cfg.origin();
    let (w, h) = cfg.extent();
    Ok((0..cfg.stars)
        .map(|_| {
            let u = x0 as f64 + rng.random_range(0.0..w as f64);
            let v = y0 as f64 + rng.random_range(0.0..h as f64);
            let peak = 10f64.powf(rng.random_range(2.7..4.6));
            SynthStar { pos: plane.deproject(u, v).to_radec(), peak, spectrum: rng.random_bool(cfg.spectra_fraction) }
        })
        .collect())
}

/// Renders `stars` with a Gaussian PSF at their exact plane positions and
/// cuts the field into tiles listed row by row from the south.
pub fn render_tiles(cfg: &TileSynthConfig, stars: &[SynthStar]) -> Result<TileSet, CutoutError> {
    cfg.check()?;
    let tangent = cfg.tangent()?;
    let plane = TilePlane::new(tangent, cfg.native_scale);
    let (x0, y0) = cfg.origin();
    let (w, h) = cfg.extent();
    let (wu, hu) = (w as usize, h as usize);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x005e_ed0f_7117);
    // field[j][i], j northward
    let mut field: Vec<f64> = (0..wu * hu)
        .map(|_| cfg.sky_level + if cfg.noise > 0.0 { rng.random_range(-cfg.noise..=cfg.noise) } else { 0.0 })
        .collect();
    let reach = (5.0 * cfg.psf_sigma).ceil() as i64;
    let two_s2 = 2.0 * cfg.psf_sigma * cfg.psf_sigma;
    for s in stars {
        let Some((u, v)) = plane.project(&s.pos.to_unitvec()) else { continue };
        let (gu, gv) = (u - x0 as f64, v - y0 as f64);
        let (ci, cj) = (gu.floor() as i64, gv.floor() as i64);
        for j in cj - reach..=cj + reach {
            for i in ci - reach..=ci + reach {
                if i < 0 || j < 0 || i >= w || j >= h {
                    continue;
                }
                let (du, dv) = (i as f64 + 0.5 - gu, j as f64 + 0.5 - gv);
                field[j as usize * wu + i as usize] += s.peak * (-(du * du + dv * dv) / two_s2).exp();
            }
        }
    }
    let (tw, th) = (cfg.tile_width, cfg.tile_height);
    let mut tiles = Vec::with_capacity(cfg.rows * cfg.cols);
    for r in 0..cfg.rows {
        for c in 0..cfg.cols {
            let (gi0, gj0) = (c * (tw - cfg.overlap), r * (th - cfg.overlap));
            let mut image = Gray16::new(tw, th, 0);
            for row in 0..th {
                let gj = gj0 + th - 1 - row;
                for col in 0..tw {
                    let v = field[gj * wu + gi0 + col];
                    image.set(col, row, v.round().clamp(0.0, MAX_VALUE as f64) as u16);
                }
            }
            tiles.push(Tile { image, dx: x0 + gi0 as i64, dy: y0 + gj0 as i64 });
        }
    }
    let objects = stars.iter().map(|s| SkyObject { pos: s.pos, spectrum: s.spectrum }).collect();
    TileSet::new(tangent, cfg.native_scale, tiles, objects)
}

pub fn generate(cfg: &TileSynthConfig) -> Result<TileSet, CutoutError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stars = random_stars(cfg, &mut rng)?;
    render_tiles(cfg, &stars)
}
