//! Gnomonic tile plane and the affine output frame of a cutout.

use skyquery_core::sphere::{SkyPos, UnitVec3, Vec3};
use skyquery_core::synth::tangent_basis;

/// Gnomonic projection about a tangent point, in pixel units: `u` grows
/// westward (east is to the left) and `v` northward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TilePlane {
    pub tangent: UnitVec3,
    east: Vec3,
    north: Vec3,
    /// Pixels per radian.
    k: f64,
}

impl TilePlane {
    pub fn new(tangent: SkyPos, native_scale: f64) -> Self {
        let t = tangent.to_unitvec();
        let (east, north) = tangent_basis(&t);
        Self { tangent: t, east, north, k: native_scale.to_degrees() }
    }

    /// `None` for points on or behind the tangent plane's horizon.
    pub fn project(&self, p: &UnitVec3) -> Option<(f64, f64)> {
        let c = p.dot(&self.tangent);
        if c <= 1e-12 {
            return None;
        }
        let xi = p.as_vec().dot(&self.east) / c;
        let eta = p.as_vec().dot(&self.north) / c;
        Some((-xi * self.k, eta * self.k))
    }

    pub fn deproject(&self, u: f64, v: f64) -> UnitVec3 {
        let (xi, eta) = (-u / self.k, v / self.k);
        (self.tangent.as_vec() + self.east * xi + self.north * eta).normalized().expect("tangent plane point")
    }
}

/// Maps output pixels to the tile plane: north up and east left at the
/// request center, `scale` pixels per degree. Built from the local Jacobian
/// of the projection, so the whole buffer is rotated and scaled about the
/// center's projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputFrame {
    pub width: usize,
    pub height: usize,
    center_uv: (f64, f64),
    /// Columns: tile-plane displacement per radian east and per radian north.
    jac: [[f64; 2]; 2],
    /// Radians per output pixel.
    step: f64,
}

impl OutputFrame {
    pub fn new(plane: &TilePlane, center: &SkyPos, scale: f64, width: usize, height: usize) -> Option<Self> {
        let c = center.to_unitvec();
        let center_uv = plane.project(&c)?;
        let (e, n) = tangent_basis(&c);
        let h = 1e-6;
        let diff = |d: Vec3| -> Option<[f64; 2]> {
            let plus = plane.project(&(c.as_vec() + d * h).normalized().ok()?)?;
            let minus = plane.project(&(c.as_vec() - d * h).normalized().ok()?)?;
            Some([(plus.0 - minus.0) / (2.0 * h), (plus.1 - minus.1) / (2.0 * h)])
        };
        let (je, jn) = (diff(e)?, diff(n)?);
        Some(Self { width, height, center_uv, jac: [je, jn], step: (1.0 / scale).to_radians() })
    }

    /// Tile-plane position of the center of output pixel `(col, row)`.
    pub fn to_plane(&self, col: f64, row: f64) -> (f64, f64) {
        let x = col + 0.5 - self.width as f64 / 2.0;
        let y = self.height as f64 / 2.0 - (row + 0.5);
        let (east, north) = (-x * self.step, y * self.step);
        (
            self.center_uv.0 + self.jac[0][0] * east + self.jac[1][0] * north,
            self.center_uv.1 + self.jac[0][1] * east + self.jac[1][1] * north,
        )
    }

    /// Fractional output pixel `(col, row)` whose center maps to `(u, v)`.
    pub fn from_plane(&self, u: f64, v: f64) -> (f64, f64) {
        let (du, dv) = (u - self.center_uv.0, v - self.center_uv.1);
        let [[a, c], [b, d]] = self.jac;
        // solve [a b; c d]·(east, north) = (du, dv)
        let det = a * d - b * c;
        let east = (d * du - b * dv) / det;
        let north = (a * dv - c * du) / det;
        let (x, y) = (-east / self.step, north / self.step);
        (x + self.width as f64 / 2.0 - 0.5, self.height as f64 / 2.0 - y - 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_round_trip() {
        let plane = TilePlane::new(SkyPos::new(181.3, -0.76).unwrap(), 1800.0);
        assert_eq!(plane.project(&plane.tangent), Some((0.0, 0.0)));
        for (ra, dec) in [(181.5, -0.5), (180.9, -1.2), (181.3, 0.0)] {
            let p = SkyPos::new(ra, dec).unwrap().to_unitvec();
            let (u, v) = plane.project(&p).unwrap();
            let back = plane.deproject(u, v);
            assert!((back.as_vec() - p.as_vec()).norm() < 1e-14);
        }
        let east = plane.project(&SkyPos::new(181.4, -0.76).unwrap().to_unitvec()).unwrap();
        assert!(east.0 < -170.0 && east.1.abs() < 1.0);
        assert!(plane.project(&SkyPos::new(1.3, 0.76).unwrap().to_unitvec()).is_none());
    }

    #[test]
    fn frame_round_trip_and_orientation() {
        let plane = TilePlane::new(SkyPos::new(10.0, 40.0).unwrap(), 3600.0);
        let f = OutputFrame::new(&plane, &SkyPos::new(10.3, 40.2).unwrap(), 1000.0, 200, 100).unwrap();
        for (c, r) in [(0.0, 0.0), (199.0, 99.0), (57.3, 12.9)] {
            let (u, v) = f.to_plane(c, r);
            let (c2, r2) = f.from_plane(u, v);
            assert!((c - c2).abs() < 1e-6 && (r - r2).abs() < 1e-6);
        }
        let at_native = OutputFrame::new(&plane, &SkyPos::new(10.0, 40.0).unwrap(), 3600.0, 4, 4).unwrap();
        let (u, v) = at_native.to_plane(3.0, 0.0);
        assert!((u - 1.5).abs() < 1e-6 && (v - 1.5).abs() < 1e-6, "{u} {v}");
    }
}
