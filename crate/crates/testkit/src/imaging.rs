//! Cutout checks against an independent geometry oracle: a gnomonic
//! projection about the request center itself, north up and east left.

use cutout::pgm::{Gray16, MAX_VALUE};
use cutout::render::{max_scale, min_scale, render, CutoutRequest, Overlay};
use cutout::synth::{render_tiles, SynthStar, TileSynthConfig};
use cutout::tiles::{SkyObject, Tile, TileSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyquery_core::sphere::{SkyPos, UnitVec3};
use skyquery_core::synth::{random_in_cap, tangent_basis};

use crate::checks::Check;

/// Fractional output `(col, row)` of `pos` for a request, computed without
/// the tile plane.
pub fn expected_pixel(req: &CutoutRequest, pos: &SkyPos) -> Option<(f64, f64)> {
    let c = req.center.to_unitvec();
    let p = pos.to_unitvec();
    let cos = p.dot(&c);
    if cos <= 0.0 {
        return None;
    }
    let (e, n) = tangent_basis(&c);
    let k = req.scale.to_degrees();
    let xi = p.as_vec().dot(&e) / cos * k;
    let eta = p.as_vec().dot(&n) / cos * k;
    Some((req.width as f64 / 2.0 - 0.5 - xi, req.height as f64 / 2.0 - 0.5 - eta))
}

fn random_tangent(rng: &mut impl Rng) -> SkyPos {
    SkyPos::new(rng.random_range(0.0..360.0), rng.random_range(-80.0..80.0)).expect("in range")
}

fn request(center: SkyPos, scale: f64, width: usize, height: usize) -> CutoutRequest {
    CutoutRequest { center, scale, width, height, invert: false, overlay: Overlay::None }
}

fn argmax(img: &Gray16, rows: std::ops::Range<usize>) -> (usize, usize) {
    let mut best = (0, rows.start, 0u16);
    for r in rows {
        for c in 0..img.width {
            if img.get(c, r) > best.2 {
                best = (c, r, img.get(c, r));
            }
        }
    }
    (best.0, best.1)
}

/// A star due north of the request center lands in the center column,
/// above a star placed at the center, for `n` random tangent points and
/// centers.
pub fn north_up(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = 101;
    let mid = size / 2;
    for i in 0..n {
        let tangent = random_tangent(&mut rng);
        let cfg = TileSynthConfig {
            tangent_ra: tangent.ra(),
            tangent_dec: tangent.dec(),
            native_scale: 1800.0,
            tile_width: 96,
            tile_height: 96,
            cols: 3,
            rows: 3,
            overlap: 0,
            sky_level: 0.0,
            noise: 0.0,
            psf_sigma: 1.2,
            ..Default::default()
        };
        // centers within 40 native pixels of the tangent point
        let center = random_in_cap(&mut rng, &tangent.to_unitvec(), (40.0 / cfg.native_scale).to_radians()).to_radec();
        let eps = 20.0 / cfg.native_scale;
        let north = SkyPos::new(center.ra(), center.dec() + eps).map_err(|e| e.to_string())?;
        let stars = [
            SynthStar { pos: center, peak: 20000.0, spectrum: false },
            SynthStar { pos: north, peak: 30000.0, spectrum: false },
        ];
        let set = render_tiles(&cfg, &stars).map_err(|e| e.to_string())?;
        let req = request(center, cfg.native_scale, size, size);
        let img = render(&set, &req).map_err(|e| e.to_string())?;
        let (nc, nr) = argmax(&img, 0..mid - 5);
        let (cc, cr) = argmax(&img, mid - 5..size);
        let (_, want_row) = expected_pixel(&req, &north).ok_or("north star behind the center")?;
        if nc != mid || nr != want_row.round() as usize || (cc, cr) != (mid, mid) || nr >= cr {
            return Err(format!(
                "case {i}: tangent {tangent}, center {center}: north star at ({nc}, {nr}), center star at ({cc}, {cr}), expected ({mid}, {want_row:.2}) and ({mid}, {mid})"
            ));
        }
    }
    Ok(format!("north-up holds for {n} random centers"))
}

/// Marker centroids agree with the oracle's projection within one pixel.
pub fn overlay_positions(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = 129;
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let tangent = random_tangent(&mut rng);
        let native = 1800.0;
        let scale = native * rng.random_range(0.25..4.0);
        let t = tangent.to_unitvec();
        let center = random_in_cap(&mut rng, &t, 0.2f64.to_radians()).to_radec();
        let req = CutoutRequest { overlay: Overlay::Objects, ..request(center, scale, size, size) };
        // somewhere at least 8 pixels inside the frame
        let half = (size as f64 / 2.0 - 8.0) / scale;
        let pos = offset(&center.to_unitvec(), rng.random_range(-half..half), rng.random_range(-half..half));
        let objects = vec![SkyObject { pos, spectrum: false }];
        let set = TileSet::new(tangent, native, vec![], objects).map_err(|e| e.to_string())?;
        let img = render(&set, &req).map_err(|e| e.to_string())?;
        let lit: Vec<(f64, f64)> = (0..size)
            .flat_map(|r| (0..size).map(move |c| (c, r)))
            .filter(|&(c, r)| img.get(c, r) == MAX_VALUE)
            .map(|(c, r)| (c as f64, r as f64))
            .collect();
        if lit.is_empty() {
            return Err(format!("case {i}: no marker drawn for {pos}"));
        }
        let (mc, mr) = (
            lit.iter().map(|p| p.0).sum::<f64>() / lit.len() as f64,
            lit.iter().map(|p| p.1).sum::<f64>() / lit.len() as f64,
        );
        let (ec, er) = expected_pixel(&req, &pos).ok_or("object behind the center")?;
        let d = (mc - ec).abs().max((mr - er).abs());
        worst = worst.max(d);
        if d > 1.0 {
            return Err(format!("case {i}: marker at ({mc:.2}, {mr:.2}), oracle ({ec:.2}, {er:.2})"));
        }
    }
    Ok(format!("{n} markers within {worst:.3} px of the oracle"))
}

fn offset(center: &UnitVec3, east_deg: f64, north_deg: f64) -> SkyPos {
    let (e, n) = tangent_basis(center);
    (center.as_vec() + e * east_deg.to_radians() + n * north_deg.to_radians()).normalized().expect("small offset").to_radec()
}

fn random_tile(rng: &mut impl Rng, w: usize, h: usize, dx: i64, dy: i64) -> Tile {
    let mut image = Gray16::new(w, h, 0);
    image.data.iter_mut().for_each(|p| *p = rng.random());
    Tile { image, dx, dy }
}

/// A native-scale request centered on the tangent point of a single tile
/// returns that tile, or its centered sub-rectangle, pixel for pixel.
pub fn single_tile_identity(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..5 {
        let tangent = random_tangent(&mut rng);
        let tile = random_tile(&mut rng, 64, 48, -32, -24);
        let set = TileSet::new(tangent, 3600.0, vec![tile.clone()], vec![]).map_err(|e| e.to_string())?;
        let whole = render(&set, &request(tangent, 3600.0, 64, 48)).map_err(|e| e.to_string())?;
        if whole != tile.image {
            return Err(format!("tangent {tangent}: full-tile cutout differs from the tile"));
        }
        let sub = render(&set, &request(tangent, 3600.0, 20, 10)).map_err(|e| e.to_string())?;
        for r in 0..10 {
            for c in 0..20 {
                if sub.get(c, r) != tile.image.get(c + 22, r + 19) {
                    return Err(format!("tangent {tangent}: sub-rectangle differs at ({c}, {r})"));
                }
            }
        }
    }
    Ok("single-tile cutouts are pixel-identical to the tile".into())
}

/// Exact dimensions, byte-exact inversion involution, both ends of the
/// scale range and determinism on the given tile set.
pub fn rendering_properties(set: &TileSet, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (center, radius) = set.footprint();
    let native = set.native_scale;
    for _ in 0..10 {
        let c = random_in_cap(&mut rng, &center.to_unitvec(), (radius * 0.8).to_radians()).to_radec();
        let (w, h) = (rng.random_range(1..200), rng.random_range(1..200));
        let scale = native * rng.random_range(0.1..2.0);
        let req = request(c, scale, w, h);
        let plain = render(set, &req).map_err(|e| e.to_string())?;
        if (plain.width, plain.height, plain.data.len()) != (w, h, w * h) {
            return Err(format!("requested {w}x{h}, got {}x{}", plain.width, plain.height));
        }
        let mut twice = render(set, &CutoutRequest { invert: true, ..req }).map_err(|e| e.to_string())?;
        twice.invert();
        if twice.to_p5() != plain.to_p5() {
            return Err(format!("inverting twice changed the image at {c}"));
        }
        if render(set, &req).map_err(|e| e.to_string())?.to_p5() != plain.to_p5() {
            return Err(format!("repeated request at {c} is not byte-identical"));
        }
    }
    let hi = render(set, &request(center, max_scale(native), 256, 256)).map_err(|e| e.to_string())?;
    let lo = render(set, &request(center, min_scale(native), 256, 256)).map_err(|e| e.to_string())?;
    let varied = |img: &Gray16| img.data.iter().any(|&p| p != img.data[0]);
    if !(varied(&hi) && varied(&lo)) {
        return Err("a scale extreme produced a flat image".into());
    }
    let lit = lo.data.iter().filter(|&&p| p != 0).count();
    if lit == 0 || lit > 16 {
        return Err(format!("at the minimum scale the tile set should cover a few pixels, covers {lit}"));
    }
    if render(set, &request(center, min_scale(native) * 0.99, 256, 256)).is_ok()
        || render(set, &request(center, max_scale(native) * 1.01, 256, 256)).is_ok()
    {
        return Err("scales outside the dynamic range were accepted".into());
    }
    Ok(format!("dimensions, inversion, determinism and scales {:.3}..{:.0} px/deg hold", min_scale(native), max_scale(native)))
}
