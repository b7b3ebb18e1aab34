//! Hierarchical Triangular Mesh.
//!
//! The sphere is split into the 8 faces of an octahedron, and every face is
//! recursively divided into 4 spherical triangles ("trixels") through the
//! normalized midpoints of its edges.
//!
//! Naming convention: the southern roots S0..S3 get ids 8..11 and the
//! northern roots N0..N3 ids 12..15. S0 spans `-z, +x, +y` (ra 0..90) and
//! the others follow counterclockwise in ra; likewise N0 spans `+z, +x, +y`.
//! Vertices are stored counterclockwise as seen from outside the sphere, the
//! pole first. A child id is `parent * 4 + k`, where children 0, 1, 2 are the
//! corner triangles at `v0`, `v1`, `v2` and child 3 is the center triangle.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sphere::{UnitVec3, Vec3};

pub const MAX_LEVEL: u8 = 20;
/// Index level used for catalog storage unless configured otherwise.
pub const DEFAULT_INDEX_LEVEL: u8 = 14;

/// Slack applied to cap comparisons; classification errs toward "partial".
const CAP_EPS: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HtmError {
    #[error("invalid trixel id {0}")]
    InvalidId(u64),
    #[error("level {0} exceeds the maximum of {MAX_LEVEL}")]
    LevelOverflow(u8),
    #[error("trixel id at level {id_level} looked up in a range set of level {set_level}")]
    LevelMismatch { id_level: u8, set_level: u8 },
    #[error("radius {0} rad outside (0, pi]")]
    InvalidRadius(String),
}

/// Bit-packed trixel address: a root in 8..15 followed by 2 bits per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
pub struct TrixelId(u64);

impl TrixelId {
    pub fn new(id: u64) -> Result<Self, HtmError> {
        if id < 8 {
            return Err(HtmError::InvalidId(id));
        }
        let bit = 63 - id.leading_zeros();
        if bit.is_multiple_of(2) || (bit - 3) / 2 > MAX_LEVEL as u32 {
            return Err(HtmError::InvalidId(id));
        }
        Ok(Self(id))
    }

    pub fn get(self) -> u64 {
        self.0
    }

    pub fn level(self) -> u8 {
        ((63 - self.0.leading_zeros() - 3) / 2) as u8
    }

    pub fn parent(self) -> Option<TrixelId> {
        (self.level() > 0).then_some(TrixelId(self.0 >> 2))
    }

    pub fn child(self, k: u8) -> Result<TrixelId, HtmError> {
        if self.level() >= MAX_LEVEL {
            return Err(HtmError::LevelOverflow(self.level() + 1));
        }
        Ok(TrixelId(self.0 * 4 + u64::from(k & 3)))
    }

    /// First and last descendant id at `level`.
    pub fn descendant_range(self, level: u8) -> (u64, u64) {
        let shift = 2 * u32::from(level.saturating_sub(self.level()));
        (self.0 << shift, ((self.0 + 1) << shift) - 1)
    }

    /// Conventional name, e.g. `N0` or `S3120`.
    pub fn name(self) -> String {
        let level = self.level();
        let root = self.0 >> (2 * u32::from(level));
        let mut s = if root < 12 {
            format!("S{}", root - 8)
        } else {
            format!("N{}", root - 12)
        };
        for l in (0..level).rev() {
            s.push(char::from(b'0' + ((self.0 >> (2 * u32::from(l))) & 3) as u8));
        }
        s
    }
}

impl TryFrom<u64> for TrixelId {
    type Error = HtmError;
    fn try_from(v: u64) -> Result<Self, HtmError> {
        TrixelId::new(v)
    }
}

impl From<TrixelId> for u64 {
    fn from(t: TrixelId) -> u64 {
        t.0
    }
}

impl fmt::Display for TrixelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A spherical triangle of the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trixel {
    pub id: TrixelId,
    pub v: [UnitVec3; 3],
}

fn unit(x: f64, y: f64, z: f64) -> UnitVec3 {
    UnitVec3::new(x, y, z).expect("axis vector")
}

fn midpoint(a: &UnitVec3, b: &UnitVec3) -> UnitVec3 {
    (a.as_vec() + b.as_vec())
        .normalized()
        .expect("trixel edges are shorter than pi")
}

/// The 8 octahedral faces, ids 8..15.
pub fn root_trixels() -> [Trixel; 8] {
    let (px, nx) = (unit(1., 0., 0.), unit(-1., 0., 0.));
    let (py, ny) = (unit(0., 1., 0.), unit(0., -1., 0.));
    let (pz, nz) = (unit(0., 0., 1.), unit(0., 0., -1.));
    let faces = [
        [nz, py, px],
        [nz, nx, py],
        [nz, ny, nx],
        [nz, px, ny],
        [pz, px, py],
        [pz, py, nx],
        [pz, nx, ny],
        [pz, ny, px],
    ];
    let mut out = [Trixel { id: TrixelId(8), v: faces[0] }; 8];
    for (i, v) in faces.into_iter().enumerate() {
        out[i] = Trixel { id: TrixelId(8 + i as u64), v };
    }
    out
}

impl Trixel {
    pub fn from_id(id: TrixelId) -> Trixel {
        let level = id.level();
        let root = (id.0 >> (2 * u32::from(level))) as usize - 8;
        let mut t = root_trixels()[root];
        for l in (0..level).rev() {
            let k = ((id.0 >> (2 * u32::from(l))) & 3) as usize;
            t = t.children().expect("level bounded by the id")[k];
        }
        t
    }

    pub fn level(&self) -> u8 {
        self.id.level()
    }

    /// Smallest of the three plane-side tests `p . (vi x vj)`.
    pub fn min_side(&self, p: &UnitVec3) -> f64 {
        let [a, b, c] = &self.v;
        let s0 = p.as_vec().dot(&a.cross(b));
        let s1 = p.as_vec().dot(&b.cross(c));
        let s2 = p.as_vec().dot(&c.cross(a));
        s0.min(s1).min(s2)
    }

    pub fn contains(&self, p: &UnitVec3) -> bool {
        self.min_side(p) >= 0.0
    }

    pub fn children(&self) -> Result<[Trixel; 4], HtmError> {
        let [v0, v1, v2] = self.v;
        let w0 = midpoint(&v1, &v2);
        let w1 = midpoint(&v0, &v2);
        let w2 = midpoint(&v0, &v1);
        Ok([
            Trixel { id: self.id.child(0)?, v: [v0, w2, w1] },
            Trixel { id: self.id.child(1)?, v: [v1, w0, w2] },
            Trixel { id: self.id.child(2)?, v: [v2, w1, w0] },
            Trixel { id: self.id.child(3)?, v: [w0, w1, w2] },
        ])
    }

    pub fn centroid(&self) -> UnitVec3 {
        (self.v[0].as_vec() + self.v[1].as_vec() + self.v[2].as_vec())
            .normalized()
            .expect("non-degenerate trixel")
    }

    /// Spherical excess in steradians.
    pub fn area(&self) -> f64 {
        let [a, b, c] = &self.v;
        let triple = a.as_vec().dot(&b.cross(c)).abs();
        let denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
        2.0 * triple.atan2(denom)
    }
}

/// Descends from the containing root to the trixel holding `p` at `level`.
/// Edge points go to the first containing candidate in id order.
pub fn trixel_of_point(p: &UnitVec3, level: u8) -> Result<TrixelId, HtmError> {
    if level > MAX_LEVEL {
        return Err(HtmError::LevelOverflow(level));
    }
    let mut t = pick(&root_trixels(), p);
    for _ in 0..level {
        t = pick(&t.children()?, p);
    }
    Ok(t.id)
}

fn pick<const N: usize>(candidates: &[Trixel; N], p: &UnitVec3) -> Trixel {
    if let Some(t) = candidates.iter().find(|t| t.contains(p)) {
        return *t;
    }
    // rounding on a shared edge can reject every candidate; take the least-outside one
    *candidates
        .iter()
        .max_by(|a, b| a.min_side(p).total_cmp(&b.min_side(p)))
        .expect("non-empty candidate list")
}

/// Sorted, disjoint, non-adjacent inclusive id ranges at a single level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrixelRangeSet {
    level: u8,
    ranges: Vec<(u64, u64)>,
}

impl TrixelRangeSet {
    pub fn empty(level: u8) -> Self {
        Self { level, ranges: Vec::new() }
    }

    /// Normalizes arbitrary ranges: sorts, then merges overlapping and adjacent ones.
    pub fn from_ranges(level: u8, mut ranges: Vec<(u64, u64)>) -> Self {
        ranges.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(ranges.len());
        for (lo, hi) in ranges {
            match merged.last_mut() {
                Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Self { level, ranges: merged }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn ranges(&self) -> &[(u64, u64)] {
        &self.ranges
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Number of trixel ids covered.
    pub fn id_count(&self) -> u64 {
        self.ranges.iter().map(|(lo, hi)| hi - lo + 1).sum()
    }

    pub fn iter_ids(&self) -> impl Iterator<Item = TrixelId> + '_ {
        self.ranges.iter().flat_map(|&(lo, hi)| (lo..=hi).map(TrixelId))
    }

    pub fn contains(&self, id: TrixelId) -> Result<bool, HtmError> {
        range_lookup(self, id)
    }
}

/// Binary search for `id` among the inclusive ranges.
pub fn range_lookup(set: &TrixelRangeSet, id: TrixelId) -> Result<bool, HtmError> {
    if id.level() != set.level {
        return Err(HtmError::LevelMismatch { id_level: id.level(), set_level: set.level });
    }
    let v = id.0;
    let idx = set.ranges.partition_point(|&(lo, _)| lo <= v);
    Ok(idx > 0 && set.ranges[idx - 1].1 >= v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CapRelation {
    Full,
    Partial,
    Disjoint,
}

struct Cap {
    center: UnitVec3,
    cos_radius: f64,
    whole_sky: bool,
}

/// Maximum and minimum of `c . x` over the short great-circle arc `p -> q`.
fn arc_extremes(c: &UnitVec3, p: &UnitVec3, q: &UnitVec3) -> (f64, f64) {
    let (dp, dq) = (c.dot(p), c.dot(q));
    let mut hi = dp.max(dq);
    let mut lo = dp.min(dq);
    let n = p.cross(q);
    let n2 = n.norm_squared();
    if n2 == 0.0 {
        return (hi, lo);
    }
    let cv = c.as_vec();
    let perp = cv - n * (cv.dot(&n) / n2);
    let plen = perp.norm();
    if plen < 1e-300 {
        return (hi, lo);
    }
    let m = perp * (1.0 / plen);
    let on_arc = |m: &Vec3| p.as_vec().cross(m).dot(&n) >= 0.0 && m.cross(&q.as_vec()).dot(&n) >= 0.0;
    if on_arc(&m) {
        hi = hi.max(plen);
    }
    if on_arc(&-m) {
        lo = lo.min(-plen);
    }
    (hi, lo)
}

impl Cap {
    fn classify(&self, t: &Trixel) -> CapRelation {
        if self.whole_sky {
            return CapRelation::Full;
        }
        let c = &self.center;
        let inside = |v: &UnitVec3| c.dot(v) >= self.cos_radius + CAP_EPS;
        let edges = [(0, 1), (1, 2), (2, 0)];
        if t.v.iter().all(inside) {
            let edges_inside = edges.iter().all(|&(i, j)| {
                arc_extremes(c, &t.v[i], &t.v[j]).1 >= self.cos_radius + CAP_EPS
            });
            let anti = UnitVec3::new(-c.x(), -c.y(), -c.z()).expect("unit");
            if edges_inside && t.min_side(&anti) < -CAP_EPS {
                return CapRelation::Full;
            }
            return CapRelation::Partial;
        }
        if t.min_side(c) >= -CAP_EPS {
            return CapRelation::Partial;
        }
        let closest = edges
            .iter()
            .map(|&(i, j)| arc_extremes(c, &t.v[i], &t.v[j]).0)
            .fold(f64::NEG_INFINITY, f64::max);
        if closest < self.cos_radius - CAP_EPS {
            CapRelation::Disjoint
        } else {
            CapRelation::Partial
        }
    }
}

/// Superset cover of the cap `{p : angle(p, center) <= radius}` as id ranges
/// at `level`.
pub fn cover_circle(center: &UnitVec3, radius: f64, level: u8) -> Result<TrixelRangeSet, HtmError> {
    if level > MAX_LEVEL {
        return Err(HtmError::LevelOverflow(level));
    }
    if !(radius > 0.0 && radius <= PI) {
        return Err(HtmError::InvalidRadius(radius.to_string()));
    }
    let cap = Cap {
        center: *center,
        cos_radius: radius.cos(),
        whole_sky: radius >= PI,
    };
    let mut out = Vec::new();
    let mut stack: Vec<Trixel> = root_trixels().to_vec();
    while let Some(t) = stack.pop() {
        match cap.classify(&t) {
            CapRelation::Disjoint => {}
            CapRelation::Full => out.push(t.id.descendant_range(level)),
            CapRelation::Partial if t.level() == level => out.push((t.id.0, t.id.0)),
            CapRelation::Partial => stack.extend(t.children()?),
        }
    }
    Ok(TrixelRangeSet::from_ranges(level, out))
}

/// Points sorted by their trixel id at a fixed level, for cone searches.
#[derive(Debug, Clone)]
pub struct PointIndex {
    level: u8,
    /// (trixel id, point index) sorted by id then index.
    entries: Vec<(u64, u32)>,
}

impl PointIndex {
    pub fn build(points: &[UnitVec3], level: u8) -> Result<Self, HtmError> {
        let mut entries = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            entries.push((trixel_of_point(p, level)?.get(), i as u32));
        }
        entries.sort_unstable();
        Ok(Self { level, entries })
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Point indices in htm order.
    pub fn order(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(_, i)| i as usize)
    }

    /// Indices of every point whose trixel lies in `ranges`, which must be at
    /// the index level.
    pub fn in_ranges(&self, ranges: &TrixelRangeSet) -> Result<Vec<usize>, HtmError> {
        if ranges.level() != self.level {
            return Err(HtmError::LevelMismatch { id_level: self.level, set_level: ranges.level() });
        }
        let mut out = Vec::new();
        for &(lo, hi) in ranges.ranges() {
            let start = self.entries.partition_point(|&(id, _)| id < lo);
            out.extend(self.entries[start..].iter().take_while(|&&(id, _)| id <= hi).map(|&(_, i)| i as usize));
        }
        Ok(out)
    }

    /// Superset of the points within `radius` of `center`. The cover is
    /// computed at a level matched to the radius, then widened to the index
    /// level.
    pub fn cone_candidates(&self, center: &UnitVec3, radius: f64) -> Result<Vec<usize>, HtmError> {
        let radius = radius.min(PI);
        let fit = ((PI / 2.0) / radius).log2().floor().max(0.0) as u8;
        let coarse = cover_circle(center, radius, fit.min(self.level))?;
        let shift = 2 * u32::from(self.level - coarse.level());
        let ranges = coarse.ranges().iter().map(|&(lo, hi)| (lo << shift, ((hi + 1) << shift) - 1)).collect();
        self.in_ranges(&TrixelRangeSet::from_ranges(self.level, ranges))
    }
}
