//! Inverse-variance cross-match of detections on the unit sphere.
//!
//! A tuple accumulates `a_vec = Σ wᵢxᵢ` and `a = Σ wᵢ` over its members.
//! The best common position is `a_vec / |a_vec|` and the minimum of
//! `Σ wᵢ|xᵢ − x|²` over unit `x` is `2(a − |a_vec|)`. Subtracting two nearly
//! equal numbers of order 1e10 leaves too few digits for arcsecond offsets,
//! so tuples also carry that χ² itself, updated with a cancellation-free
//! increment on every extension. The increment needs the offset of each new
//! member from the best position to full relative precision, which a unit
//! vector rounded to 1e-16 cannot supply at 0.1″ scales; tuples therefore
//! also keep the weighted sum of offsets from their first member.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::htm::{HtmError, PointIndex, DEFAULT_INDEX_LEVEL};
use crate::sphere::{chord_squared, UnitVec3, Vec3, ARCSEC};
use crate::table::Value;

/// Smallest accepted positional error; keeps weights below ~4e14 rad⁻².
pub const MIN_SIGMA_ARCSEC: f64 = 0.01;

/// Relative slack on the candidate search radius.
const RADIUS_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum XMatchError {
    #[error("positional error {0} arcsec must be at least {MIN_SIGMA_ARCSEC}")]
    InvalidSigma(f64),
    #[error("archive '{0}' is already a member of the tuple")]
    DuplicateArchive(String),
    #[error("carried attribute '{0}' supplied twice")]
    CarriedCollision(String),
    #[error("members cancel out: no defined best position")]
    Degenerate,
    #[error("threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Htm(#[from] HtmError),
}

/// Circular RMS positional error of an archive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ArchiveSigma(f64);

impl ArchiveSigma {
    pub fn new(arcsec: f64) -> Result<Self, XMatchError> {
        if arcsec.is_finite() && arcsec >= MIN_SIGMA_ARCSEC {
            Ok(Self(arcsec))
        } else {
            Err(XMatchError::InvalidSigma(arcsec))
        }
    }

    pub fn arcsec(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0 * ARCSEC
    }
}

impl TryFrom<f64> for ArchiveSigma {
    type Error = XMatchError;

    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ArchiveSigma> for f64 {
    fn from(s: ArchiveSigma) -> f64 {
        s.0
    }
}

/// `1/σ²` with σ in radians.
pub fn weight_of(sigma: ArchiveSigma) -> f64 {
    let s = sigma.radians();
    1.0 / (s * s)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Member {
    pub archive: String,
    pub key: i64,
}

impl fmt::Display for Member {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.archive, self.key)
    }
}

/// A partial cross-identification.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchTuple {
    pub a_vec: Vec3,
    pub a_weight: f64,
    /// Position of the first member.
    pub anchor: UnitVec3,
    /// `Σ wᵢ(xᵢ − anchor)`.
    pub offset_sum: Vec3,
    /// Minimum of `Σ wᵢ|xᵢ − x|²`, maintained incrementally.
    pub chi2: f64,
    pub members: Vec<Member>,
    /// Attribute values keyed by `alias.column`.
    pub carried: BTreeMap<String, Value>,
}

pub fn tuple_seed(
    pos: &UnitVec3,
    archive: &str,
    key: i64,
    sigma: ArchiveSigma,
    carried: BTreeMap<String, Value>,
) -> MatchTuple {
    let w = weight_of(sigma);
    MatchTuple {
        a_vec: pos.as_vec() * w,
        a_weight: w,
        anchor: *pos,
        offset_sum: Vec3::ZERO,
        chi2: 0.0,
        members: vec![Member { archive: archive.to_string(), key }],
        carried,
    }
}

/// `best_position − anchor`, accurate relative to its own size.
fn anchor_shift(t: &MatchTuple) -> Vec3 {
    let r = t.anchor.as_vec();
    let u = t.offset_sum * (1.0 / t.a_weight);
    // |r + u|² − 1, with the anchor's own rounding kept in
    let excess = 2.0 * r.dot(&u) + u.norm_squared() + (r.norm_squared() - 1.0);
    let n = (1.0 + excess).sqrt();
    u * (1.0 / n) + r * (-excess / (n * (1.0 + n)))
}

/// Increase of the minimum χ² when an object at `x` with weight `w` joins a
/// tuple. With `α = |a_vec|` and `b = a_vec/α` the increase is
/// `2(α + w − |a_vec + w·x|)`, rewritten as
/// `2αw|b − x|² / (α + w + |a_vec + w·x|)` to avoid the subtraction, with
/// `b − x` formed as `(anchor − x) + (b − anchor)`.
fn chi2_increment(t: &MatchTuple, x: &UnitVec3, w: f64) -> Result<(f64, Vec3), XMatchError> {
    best_position(t)?;
    let alpha = t.a_vec.norm();
    let new_vec = t.a_vec + x.as_vec() * w;
    let d = (t.anchor.as_vec() - x.as_vec()) + anchor_shift(t);
    let delta = 2.0 * alpha * w * d.norm_squared() / ((alpha + w) + new_vec.norm());
    Ok((delta, new_vec))
}

pub fn tuple_extend(
    t: &MatchTuple,
    pos: &UnitVec3,
    archive: &str,
    key: i64,
    sigma: ArchiveSigma,
    carried: BTreeMap<String, Value>,
) -> Result<MatchTuple, XMatchError> {
    if t.members.iter().any(|m| m.archive == archive) {
        return Err(XMatchError::DuplicateArchive(archive.to_string()));
    }
    let w = weight_of(sigma);
    let (delta, a_vec) = chi2_increment(t, pos, w)?;
    let mut merged = t.carried.clone();
    for (k, v) in carried {
        if merged.insert(k.clone(), v).is_some() {
            return Err(XMatchError::CarriedCollision(k));
        }
    }
    let mut members = t.members.clone();
    members.push(Member { archive: archive.to_string(), key });
    Ok(MatchTuple {
        a_vec,
        a_weight: t.a_weight + w,
        anchor: t.anchor,
        offset_sum: t.offset_sum + (pos.as_vec() - t.anchor.as_vec()) * w,
        chi2: t.chi2 + delta,
        members,
        carried: merged,
    })
}

pub fn best_position(t: &MatchTuple) -> Result<UnitVec3, XMatchError> {
    if t.a_vec.norm() < 1e-300 * t.a_weight {
        return Err(XMatchError::Degenerate);
    }
    (t.anchor.as_vec() + anchor_shift(t)).normalized().map_err(|_| XMatchError::Degenerate)
}

pub fn chi_square(t: &MatchTuple) -> f64 {
    t.chi2.max(0.0)
}

/// `m = √χ²`, the value compared against the XMATCH threshold.
pub fn match_statistic(t: &MatchTuple) -> f64 {
    chi_square(t).sqrt()
}

/// The textbook `2(a − |a_vec|)`; loses precision for small offsets.
pub fn chi_square_from_sums(a_vec: &Vec3, a_weight: f64) -> f64 {
    2.0 * (a_weight - a_vec.norm())
}

/// One local object offered to incoming tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub pos: UnitVec3,
    pub key: i64,
    pub carried: BTreeMap<String, Value>,
}

/// Candidates of one archive with an HTM index for cone searches.
#[derive(Debug, Clone)]
pub struct CandidateIndex {
    archive: String,
    sigma: ArchiveSigma,
    candidates: Vec<Candidate>,
    index: PointIndex,
}

impl CandidateIndex {
    pub fn new(archive: &str, sigma: ArchiveSigma, candidates: Vec<Candidate>) -> Result<Self, XMatchError> {
        let positions: Vec<UnitVec3> = candidates.iter().map(|c| c.pos).collect();
        let index = PointIndex::build(&positions, DEFAULT_INDEX_LEVEL)?;
        Ok(Self { archive: archive.to_string(), sigma, candidates, index })
    }

    pub fn archive(&self) -> &str {
        &self.archive
    }

    pub fn sigma(&self) -> ArchiveSigma {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// Candidates whose chord to `center` is at most `chord`, in index order.
    pub fn within_chord(&self, center: &UnitVec3, chord: f64) -> Result<Vec<&Candidate>, XMatchError> {
        let angle = 2.0 * (chord / 2.0).min(1.0).asin() * (1.0 + RADIUS_SLACK);
        let mut idx = self.index.cone_candidates(center, angle.max(1e-15))?;
        idx.sort_unstable();
        let c2 = chord * chord;
        Ok(idx
            .into_iter()
            .map(|i| &self.candidates[i])
            .filter(|c| chord_squared(center, &c.pos) <= c2)
            .collect())
    }
}

/// Search radius (as a chord) around a tuple's best position that contains
/// every candidate able to pass the θ test: `θ(σ + 1/√|a_vec|)`.
pub fn search_radius(t: &MatchTuple, sigma: ArchiveSigma, theta: f64) -> f64 {
    theta * (sigma.radians() + 1.0 / t.a_vec.norm().sqrt()) * (1.0 + RADIUS_SLACK)
}

/// Matches `incoming` tuples against one archive. A mandatory archive forks
/// each tuple once per matching candidate and drops unmatched tuples; a
/// dropout archive passes a tuple through unchanged only if nothing matches.
pub fn crossmatch_step(
    incoming: &[MatchTuple],
    local: &CandidateIndex,
    theta: f64,
    is_dropout: bool,
) -> Result<Vec<MatchTuple>, XMatchError> {
    crossmatch_step_scaled(incoming, local, theta, is_dropout, 1.0)
}

/// [`crossmatch_step`] with the search radius multiplied by `radius_scale`.
pub fn crossmatch_step_scaled(
    incoming: &[MatchTuple],
    local: &CandidateIndex,
    theta: f64,
    is_dropout: bool,
    radius_scale: f64,
) -> Result<Vec<MatchTuple>, XMatchError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(XMatchError::InvalidThreshold(theta));
    }
    let w = weight_of(local.sigma);
    let limit = theta * theta;
    let mut out = Vec::new();
    for t in incoming {
        let center = best_position(t)?;
        let r = search_radius(t, local.sigma, theta) * radius_scale;
        let mut matched = false;
        for c in local.within_chord(&center, r)? {
            let (delta, _) = chi2_increment(t, &c.pos, w)?;
            if t.chi2 + delta >= limit {
                continue;
            }
            matched = true;
            if is_dropout {
                break;
            }
            out.push(tuple_extend(t, &c.pos, &local.archive, c.key, local.sigma, c.carried.clone())?);
        }
        if is_dropout && !matched {
            out.push(t.clone());
        }
    }
    Ok(out)
}
