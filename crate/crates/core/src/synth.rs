//! Deterministic synthetic sky surveys.
//!
//! A population of true sources is drawn uniformly in a cap. Each archive
//! observes a random subset of them, perturbing every position by Gaussian
//! noise at its own positional error and deriving its own photometry. The
//! `bucket` column (uniform in 0..50) lets queries keep about 2% of rows.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::{default_functions, ArchiveMeta, CatalogError, CatalogTable, Coverage, TableSchema};
use crate::sphere::{SkyPos, UnitVec3, Vec3, ARCMIN, ARCSEC};
use crate::table::{ColumnInfo, ColumnType, Value};
use crate::xmatch::ArchiveSigma;

pub const BUCKETS: i64 = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurveyKind {
    /// Optical photometry: type, u g r i z.
    Optical,
    /// Near-infrared photometry: m_j m_h m_k.
    NearInfrared,
    /// Radio continuum: flux.
    Radio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurveySpec {
    pub archive: String,
    pub table: String,
    pub kind: SurveyKind,
    pub sigma_arcsec: f64,
    pub rows: usize,
    pub key_base: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub center: SkyPos,
    pub radius_arcmin: f64,
    pub true_sources: usize,
    pub surveys: Vec<SurveySpec>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let survey = |archive: &str, table: &str, kind, sigma_arcsec, key_base| SurveySpec {
            archive: archive.into(),
            table: table.into(),
            kind,
            sigma_arcsec,
            rows: 10_000,
            key_base,
        };
        Self {
            seed: 20_020_101,
            center: SkyPos::new(181.3, -0.76).expect("valid center"),
            radius_arcmin: 40.0,
            true_sources: 20_000,
            surveys: vec![
                survey("SDSS", "PhotoPrimary", SurveyKind::Optical, 0.1, 587_722_981_742_000_000),
                survey("TWOMASS", "PhotoPrimary", SurveyKind::NearInfrared, 0.3, 1_100_000_000),
                survey("FIRST", "Sources", SurveyKind::Radio, 1.0, 2_200_000_000),
            ],
        }
    }
}

#[derive(Debug, Clone)]
struct TrueSource {
    pos: UnitVec3,
    galaxy: bool,
    r: f64,
    /// Optical minus near-infrared colour, i − J.
    color: f64,
    flux: f64,
}

#[derive(Debug, Clone)]
pub struct SynthArchive {
    pub meta: ArchiveMeta,
    pub schema: TableSchema,
    pub rows: Vec<Vec<Value>>,
}

impl SynthArchive {
    pub fn into_table(self, level: u8) -> Result<CatalogTable, CatalogError> {
        CatalogTable::from_rows(self.schema, self.rows, level)
    }

    /// Writes `<dir>/<archive>.csv`; the schema is shipped separately.
    pub fn write_csv(&self, dir: &Path) -> std::io::Result<std::path::PathBuf> {
        let mut out = self.schema.columns.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::to_string).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let path = dir.join(format!("{}.csv", self.meta.archive_name.to_ascii_lowercase()));
        std::fs::write(&path, out)?;
        Ok(path)
    }
}

fn col(name: &str, ty: ColumnType, unit: &str, description: &str) -> ColumnInfo {
    ColumnInfo::new(name, ty).with_unit(unit).with_description(description)
}

pub fn schema_for(spec: &SurveySpec) -> TableSchema {
    let mut columns = vec![
        col("objId", ColumnType::Int64, "", "unique object identifier"),
        col("ra", ColumnType::Float64, "deg", "right ascension (J2000)"),
        col("dec", ColumnType::Float64, "deg", "declination (J2000)"),
    ];
    let description = match spec.kind {
        SurveyKind::Optical => {
            columns.push(col("type", ColumnType::Int64, "", "morphological class: 3 = galaxy, 6 = star"));
            for band in ["u", "g", "r", "i", "z"] {
                columns.push(col(band, ColumnType::Float64, "mag", &format!("{band}-band model magnitude")));
            }
            "primary optical photometric objects"
        }
        SurveyKind::NearInfrared => {
            for (name, band) in [("m_j", "J"), ("m_h", "H"), ("m_k", "Ks")] {
                columns.push(col(name, ColumnType::Float64, "mag", &format!("{band}-band magnitude")));
            }
            "near-infrared point source photometry"
        }
        SurveyKind::Radio => {
            columns.push(col("flux", ColumnType::Float64, "mJy", "integrated 20 cm radio flux density"));
            "radio continuum source catalog"
        }
    };
    columns.push(col("bucket", ColumnType::Int64, "", "uniform random partition 0..49 for selective workloads"));
    TableSchema {
        table_name: spec.table.clone(),
        description: description.into(),
        key_column: "objId".into(),
        ra_column: "ra".into(),
        dec_column: "dec".into(),
        columns,
    }
}

pub fn wavelength(kind: SurveyKind) -> &'static str {
    match kind {
        SurveyKind::Optical => "optical, u g r i z (350-900 nm)",
        SurveyKind::NearInfrared => "near-infrared, J H Ks (1.2-2.2 um)",
        SurveyKind::Radio => "radio, 20 cm (1.4 GHz)",
    }
}

/// Uniform point within `radius` (radians) of `center`.
pub fn random_in_cap(rng: &mut impl Rng, center: &UnitVec3, radius: f64) -> UnitVec3 {
    let cos_r = radius.cos();
    let z = rng.random_range(cos_r..=1.0);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    let (e1, e2) = tangent_basis(center);
    (center.as_vec() * z + e1 * (s * phi.cos()) + e2 * (s * phi.sin())).normalized().expect("unit")
}

/// East and north unit vectors at `p` (an arbitrary basis at the poles).
pub fn tangent_basis(p: &UnitVec3) -> (Vec3, Vec3) {
    let v = p.as_vec();
    let east = Vec3::new(-v.y, v.x, 0.0);
    let east = if east.norm() < 1e-12 { Vec3::new(0.0, 1.0, 0.0) } else { east * (1.0 / east.norm()) };
    let north = v.cross(&east);
    (east, north)
}

/// Moves `p` by independent Gaussian offsets of `sigma` radians per axis.
fn perturb(rng: &mut impl Rng, p: &UnitVec3, sigma: f64) -> UnitVec3 {
    let n = Normal::new(0.0, sigma).expect("sigma > 0");
    let (e, nn) = tangent_basis(p);
    (p.as_vec() + e * n.sample(rng) + nn * n.sample(rng)).normalized().expect("unit")
}

fn round_to(x: f64, digits: i32) -> f64 {
    let f = 10f64.powi(digits);
    (x * f).round() / f
}

pub fn generate(cfg: &SynthConfig) -> Vec<SynthArchive> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let center = cfg.center.to_unitvec();
    let color = Normal::new(1.5, 1.0).expect("valid");
    let sources: Vec<TrueSource> = (0..cfg.true_sources)
        .map(|_| TrueSource {
            pos: random_in_cap(&mut rng, &center, cfg.radius_arcmin * ARCMIN),
            galaxy: rng.random_bool(0.6),
            r: rng.random_range(14.0..23.0),
            color: color.sample(&mut rng),
            flux: (rng.random_range(0.0..1.0f64) * 6.0).exp(),
        })
        .collect();

    cfg.surveys
        .iter()
        .map(|spec| {
            let mut srng = ChaCha8Rng::seed_from_u64(cfg.seed ^ spec.key_base as u64);
            let schema = schema_for(spec);
            let sigma = spec.sigma_arcsec * ARCSEC;
            let jitter = Normal::new(0.0, 0.05).expect("valid");
            let mut picked = sample(&mut srng, sources.len(), spec.rows.min(sources.len())).into_vec();
            picked.sort_unstable();
            let rows = picked
                .iter()
                .enumerate()
                .map(|(n, &si)| {
                    let s = &sources[si];
                    let p = perturb(&mut srng, &s.pos, sigma).to_radec();
                    let mut row = vec![
                        Value::Int(spec.key_base + n as i64),
                        Value::Float(round_to(p.ra(), 10)),
                        Value::Float(round_to(p.dec(), 10)),
                    ];
                    let mut mag = |m: f64| Value::Float(round_to(m + jitter.sample(&mut srng), 3));
                    match spec.kind {
                        SurveyKind::Optical => {
                            let i = s.r - 0.3;
                            row.push(Value::Int(if s.galaxy { 3 } else { 6 }));
                            row.extend([mag(s.r + 1.8), mag(s.r + 0.7), mag(s.r), mag(i), mag(s.r - 0.5)]);
                        }
                        SurveyKind::NearInfrared => {
                            let j = s.r - 0.3 - s.color;
                            row.extend([mag(j), mag(j - 0.6), mag(j - 0.8)]);
                        }
                        SurveyKind::Radio => row.push(Value::Float(round_to(s.flux, 3))),
                    }
                    row.push(Value::Int(srng.random_range(0..BUCKETS)));
                    row
                })
                .collect();
            SynthArchive {
                meta: ArchiveMeta {
                    archive_name: spec.archive.clone(),
                    sky_coverage: vec![Coverage {
                        ra: cfg.center.ra(),
                        dec: cfg.center.dec(),
                        radius_arcmin: cfg.radius_arcmin,
                    }],
                    wavelength_coverage: wavelength(spec.kind).into(),
                    sigma: ArchiveSigma::new(spec.sigma_arcsec).expect("valid sigma"),
                    functions: default_functions(),
                },
                schema,
                rows,
            }
        })
        .collect()
}
