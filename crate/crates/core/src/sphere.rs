//! Sky positions, Cartesian unit vectors and angular metrics.
//!
//! Degrees are used at every external interface, radians internally.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Radians per arcsecond.
pub const ARCSEC: f64 = PI / 648_000.0;
/// Radians per arcminute.
pub const ARCMIN: f64 = PI / 10_800.0;

/// Tolerance on `|v| - 1` accepted by [`unitvec_to_radec`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SphereError {
    #[error("declination {0} outside [-90, 90] degrees")]
    DecOutOfRange(f64),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("vector norm {0} is not 1 within tolerance")]
    NotUnit(f64),
    #[error("cannot normalize a zero-length vector")]
    ZeroVector,
}

/// A direction on the sky in degrees. `ra` is in `[0, 360)`, `dec` in `[-90, 90]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSkyPos")]
pub struct SkyPos {
    ra: f64,
    dec: f64,
}

#[derive(Deserialize)]
struct RawSkyPos {
    ra: f64,
    dec: f64,
}

impl TryFrom<RawSkyPos> for SkyPos {
    type Error = SphereError;
    fn try_from(r: RawSkyPos) -> Result<Self, SphereError> {
        SkyPos::new(r.ra, r.dec)
    }
}

impl SkyPos {
    /// Builds a position, wrapping `ra` into `[0, 360)`. A declination outside
    /// `[-90, 90]` is rejected rather than clamped.
    pub fn new(ra: f64, dec: f64) -> Result<Self, SphereError> {
        if !ra.is_finite() || !dec.is_finite() {
            return Err(SphereError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&dec) {
            return Err(SphereError::DecOutOfRange(dec));
        }
        let mut ra = ra.rem_euclid(360.0);
        if ra >= 360.0 {
            ra = 0.0;
        }
        Ok(Self { ra, dec })
    }

    pub fn ra(&self) -> f64 {
        self.ra
    }

    pub fn dec(&self) -> f64 {
        self.dec
    }

    pub fn to_unitvec(&self) -> UnitVec3 {
        radec_to_unitvec(*self)
    }
}

impl fmt::Display for SkyPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.ra, self.dec)
    }
}

/// A general Cartesian 3-vector (weighted sums, plane normals, ...).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(&self, o: &Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn normalized(&self) -> Result<UnitVec3, SphereError> {
        let n = self.norm();
        if !n.is_finite() {
            return Err(SphereError::NonFinite);
        }
        if n == 0.0 {
            return Err(SphereError::ZeroVector);
        }
        Ok(UnitVec3(Vec3::new(self.x / n, self.y / n, self.z / n)))
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// A direction as a Cartesian unit vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 3]", try_from = "[f64; 3]")]
pub struct UnitVec3(Vec3);

impl UnitVec3 {
    pub const X: UnitVec3 = UnitVec3(Vec3::new(1.0, 0.0, 0.0));
    pub const Y: UnitVec3 = UnitVec3(Vec3::new(0.0, 1.0, 0.0));
    pub const Z: UnitVec3 = UnitVec3(Vec3::new(0.0, 0.0, 1.0));

    /// Normalizes `(x, y, z)`.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, SphereError> {
        Vec3::new(x, y, z).normalized()
    }

    /// Accepts `(x, y, z)` only if it is already unit length within
    /// [`UNIT_TOLERANCE`]; the stored value is renormalized.
    pub fn try_unit(v: Vec3) -> Result<Self, SphereError> {
        let n = v.norm();
        if !n.is_finite() {
            return Err(SphereError::NonFinite);
        }
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(SphereError::NotUnit(n));
        }
        v.normalized()
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }

    pub fn y(&self) -> f64 {
        self.0.y
    }

    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn as_vec(&self) -> Vec3 {
        self.0
    }

    pub fn dot(&self, o: &UnitVec3) -> f64 {
        self.0.dot(&o.0)
    }

    pub fn cross(&self, o: &UnitVec3) -> Vec3 {
        self.0.cross(&o.0)
    }

    pub fn to_radec(&self) -> SkyPos {
        unitvec_to_radec(*self).expect("UnitVec3 is unit by construction")
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(v: UnitVec3) -> Self {
        [v.0.x, v.0.y, v.0.z]
    }
}

impl TryFrom<[f64; 3]> for UnitVec3 {
    type Error = SphereError;
    fn try_from(a: [f64; 3]) -> Result<Self, SphereError> {
        UnitVec3::try_unit(Vec3::new(a[0], a[1], a[2]))
    }
}

impl From<UnitVec3> for Vec3 {
    fn from(v: UnitVec3) -> Vec3 {
        v.0
    }
}

pub fn radec_to_unitvec(p: SkyPos) -> UnitVec3 {
    let ra = p.ra.to_radians();
    let dec = p.dec.to_radians();
    let (sin_dec, cos_dec) = dec.sin_cos();
    let (sin_ra, cos_ra) = ra.sin_cos();
    Vec3::new(cos_dec * cos_ra, cos_dec * sin_ra, sin_dec)
        .normalized()
        .expect("trig vector is never zero")
}

/// Inverse of [`radec_to_unitvec`]. At the poles (`|z| >= 1 - 1e-15`) `ra` is 0.
pub fn unitvec_to_radec(v: UnitVec3) -> Result<SkyPos, SphereError> {
    let n = v.0.norm();
    if (n - 1.0).abs() > UNIT_TOLERANCE {
        return Err(SphereError::NotUnit(n));
    }
    let Vec3 { x, y, z } = v.0;
    if z.abs() >= 1.0 - 1e-15 {
        return SkyPos::new(0.0, 90.0_f64.copysign(z));
    }
    let ra = y.atan2(x).to_degrees();
    // atan2 of the equatorial part avoids asin's loss of precision near the poles
    let dec = z.atan2(x.hypot(y)).to_degrees();
    SkyPos::new(ra, dec)
}

/// Great-circle distance in radians, from the chord length.
pub fn angular_separation(a: &UnitVec3, b: &UnitVec3) -> f64 {
    let chord = (a.0 - b.0).norm();
    2.0 * (chord / 2.0).min(1.0).asin()
}

/// `|a - b|^2`, the squared chord between two directions.
pub fn chord_squared(a: &UnitVec3, b: &UnitVec3) -> f64 {
    (a.0 - b.0).norm_squared()
}
