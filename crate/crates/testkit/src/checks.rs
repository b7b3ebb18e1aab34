//! Library-level checks shared by integration tests and the acceptance
//! gate. Each returns a one-line summary on success.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyquery_core::catalog::CatalogTable;
use skyquery_core::htm::{cover_circle, root_trixels, trixel_of_point};
use skyquery_core::query::{parse, QueryAst};
use skyquery_core::sphere::{angular_separation, SkyPos, UnitVec3, ARCSEC};
use skyquery_core::synth::{random_in_cap, tangent_basis};
use skyquery_core::xmatch::{chi_square, match_statistic, tuple_extend, tuple_seed, ArchiveSigma, MatchTuple};

use crate::gen::random_sql;
use crate::oracle::{min_chi2, scan};

pub type Check = Result<String, String>;

fn random_unit(rng: &mut impl Rng) -> UnitVec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let s = (1.0 - z * z).max(0.0).sqrt();
    UnitVec3::new(s * phi.cos(), s * phi.sin(), z).expect("unit by construction")
}

fn offset(center: &UnitVec3, east: f64, north: f64) -> UnitVec3 {
    let (e, n) = tangent_basis(center);
    (center.as_vec() + e * east + n * north).normalized().expect("small offset")
}

fn build(points: &[(UnitVec3, ArchiveSigma)]) -> MatchTuple {
    let mut t = tuple_seed(&points[0].0, "A0", 0, points[0].1, Default::default());
    for (i, (p, s)) in points.iter().enumerate().skip(1) {
        t = tuple_extend(&t, p, &format!("A{i}"), i as i64, *s, Default::default()).expect("distinct archives");
    }
    t
}

/// Incremental χ² against direct minimization for `n` random tuples of 2 to
/// 6 members scattered 1 to 5 σ around random sky positions.
pub fn chi2_identity(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let center = random_unit(&mut rng);
        let k = rng.random_range(2..=6);
        let points: Vec<(UnitVec3, ArchiveSigma)> = (0..k)
            .map(|_| {
                let s = ArchiveSigma::new(rng.random_range(0.1..2.0)).expect("valid sigma");
                let r = rng.random_range(1.0..5.0) * s.radians();
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                (offset(&center, r * phi.cos(), r * phi.sin()), s)
            })
            .collect();
        let t = build(&points);
        let want = min_chi2(&points);
        let rel = (chi_square(&t) - want).abs() / want;
        worst = worst.max(rel);
        if rel > 1e-10 {
            return Err(format!("relative error {rel:e} for a {k}-member tuple"));
        }
    }
    Ok(format!("{n} tuples, worst relative error {worst:.2e}"))
}

/// Two members with equal σ: `m = separation / (σ√2)`.
pub fn two_member_closed_form(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let s = ArchiveSigma::new(rng.random_range(0.05..2.0)).expect("valid sigma");
        let a = random_unit(&mut rng);
        let b = offset(&a, rng.random_range(0.1..10.0) * s.radians(), rng.random_range(-3.0..3.0) * s.radians());
        let m = match_statistic(&build(&[(a, s), (b, s)]));
        let want = angular_separation(&a, &b) / (s.radians() * 2f64.sqrt());
        let rel = (m - want).abs() / want;
        worst = worst.max(rel);
        if rel > 1e-6 {
            return Err(format!("m = {m}, expected {want}"));
        }
    }
    Ok(format!("{n} pairs, worst relative error {worst:.2e}"))
}

/// Fixed configurations with σ = 1″: a coincident member of huge σ, a
/// third member at the best position of a √2 pair, and an equilateral
/// triangle of side 1″.
pub fn chi2_special_cases() -> Check {
    let c = SkyPos::new(181.3, -0.76).expect("valid").to_unitvec();
    let s = ArchiveSigma::new(1.0).expect("valid");
    let pair_pts = [(offset(&c, -ARCSEC, 0.0), s), (offset(&c, ARCSEC, 0.0), s)];
    let pair = build(&pair_pts);
    let m2 = match_statistic(&pair);
    if (m2 - 2f64.sqrt()).abs() > 1e-6 {
        return Err(format!("pair statistic {m2}"));
    }
    let best = skyquery_core::xmatch::best_position(&pair).map_err(|e| e.to_string())?;

    let huge = ArchiveSigma::new(1e6).expect("valid");
    let ext = tuple_extend(&pair, &best, "HUGE", 1, huge, Default::default()).map_err(|e| e.to_string())?;
    if (match_statistic(&ext) - m2).abs() >= 1e-6 {
        return Err(format!("huge-σ member moved m from {m2} to {}", match_statistic(&ext)));
    }

    let third = tuple_extend(&pair, &best, "A2", 2, s, Default::default()).map_err(|e| e.to_string())?;
    let mut pts = pair_pts.to_vec();
    pts.push((best, s));
    let direct = min_chi2(&pts);
    if (third.chi2 - direct).abs() > 1e-12 * direct {
        return Err(format!("coincident third member: χ² {} vs direct {direct}", third.chi2));
    }

    let r = ARCSEC / 3f64.sqrt();
    let tri: Vec<(UnitVec3, ArchiveSigma)> = (0..3)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 3.0;
            (offset(&c, r * a.cos(), r * a.sin()), s)
        })
        .collect();
    let m3 = match_statistic(&build(&tri));
    let want = min_chi2(&tri).sqrt();
    if (m3 - want).abs() > 1e-6 {
        return Err(format!("triangle m {m3} vs direct {want}"));
    }
    Ok(format!("pair m = {m2:.6}, triangle m = {m3:.6}, coincident and huge-σ extensions agree"))
}

/// Indexed cone queries against a linear scan on `table`.
pub fn cone_vs_scan(table: &CatalogTable, cones: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = table.position(0);
    let mut total = 0;
    for _ in 0..cones {
        let c = random_in_cap(&mut rng, &center, 40.0 * skyquery_core::sphere::ARCMIN).to_radec();
        let r = rng.random_range(0.05..30.0);
        let sql = format!("SELECT COUNT(*) FROM T x WHERE AREA({},{},{r})", c.ra(), c.dec());
        let ast: QueryAst = parse(&sql).map_err(|e| e.to_string())?;
        let indexed = table.rows_in_area(ast.area.as_ref()).map_err(|e| e.to_string())?;
        let linear = scan(table, &ast, &[])?;
        if indexed != linear {
            return Err(format!("cone {sql}: {} indexed vs {} scanned", indexed.len(), linear.len()));
        }
        total += linear.len();
    }
    Ok(format!("{cones} cones, {total} rows, index equals scan"))
}

/// Points sampled inside random caps all fall in the cap's cover.
pub fn cover_soundness(caps: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..caps {
        let c = random_unit(&mut rng);
        let r = rng.random_range(ARCSEC.ln()..(std::f64::consts::FRAC_PI_2).ln()).exp();
        let level = ((std::f64::consts::FRAC_PI_2 / r).log2().floor() as i32 + 2).clamp(2, 20) as u8;
        let cover = cover_circle(&c, r, level).map_err(|e| e.to_string())?;
        for _ in 0..200 {
            let p = random_in_cap(&mut rng, &c, r);
            if angular_separation(&p, &c) <= r {
                let id = trixel_of_point(&p, level).map_err(|e| e.to_string())?;
                if !cover.contains(id).map_err(|e| e.to_string())? {
                    return Err(format!("point in cap of radius {r:e} outside its level-{level} cover"));
                }
            }
        }
    }
    Ok(format!("{caps} caps sound"))
}

/// Every random point lies in exactly one root trixel.
pub fn roots_partition(points: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roots = root_trixels();
    for _ in 0..points {
        let p = random_unit(&mut rng);
        let n = roots.iter().filter(|r| r.contains(&p)).count();
        if n != 1 {
            return Err(format!("{p:?} lies in {n} roots"));
        }
    }
    Ok(format!("{points} points, one root each"))
}

/// `parse(render(parse(q))) == parse(q)` for random query text.
pub fn parse_render_identity(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n {
        let sql = random_sql(&mut rng);
        let ast = parse(&sql).map_err(|e| format!("{sql}: {e}"))?;
        let rendered = ast.to_string();
        let again = parse(&rendered).map_err(|e| format!("{rendered}: {e}"))?;
        if again != ast {
            return Err(format!("round trip changed {sql}"));
        }
    }
    Ok(format!("{n} generated queries"))
}

/// Pretty JSON of the parsed query against a stored fixture, byte for byte.
pub fn ast_fixture(sql: &str, fixture: &str) -> Check {
    let ast = parse(sql).map_err(|e| e.to_string())?;
    let json = serde_json::to_string_pretty(&ast).map_err(|e| e.to_string())?;
    if json != fixture.trim_end() {
        return Err("serialized AST differs from the fixture".into());
    }
    Ok(format!("{} bytes", json.len()))
}

/// Every documented failure mode yields the right kind and position.
pub fn parser_error_cases() -> Check {
    use skyquery_core::query::QueryErrorKind::{Lexical, Semantic, Syntax};
    let cases = [
        ("SELECT o.a FROM X:T o WHERE XMATCH(o)<1 AND AREA(0,0,1)", Semantic, 28),
        ("SELECT z.a FROM X:T o", Semantic, 7),
        ("SELECT o.a FROM X:T o, Y:U o", Semantic, 23),
        ("SELECT o.a FROM X:T o, X:U t", Semantic, 23),
        ("SELECT o.a FROM X:T o, Y:U t WHERE o.a=1 OR XMATCH(o,t)<3", Semantic, 44),
        ("SELECT o.a FROM X:T o WHERE NOT AREA(1,2,3)", Semantic, 32),
        ("SELECT o.a FROM X:T o WHERE AREA(1,2,3) AND AREA(1,2,3)", Semantic, 44),
        ("SELECT o.a FROM X:T o, Y:U t WHERE XMATCH(o,t)<3 AND XMATCH(o,t)<2", Semantic, 53),
        ("SELECT o.a FROM X:T o WHERE AREA(1,2,0)", Semantic, 37),
        ("SELECT o.a FROM X:T o WHERE AREA(1,95,1)", Semantic, 28),
        ("SELECT o.a FROM X:T o WHERE o.a = 'x", Lexical, 34),
        ("SELECT o.a FROM X:T o WHERE o.a # 1", Lexical, 32),
        ("SELECT o.a FROM X:T o WHERE (o.a > 1", Syntax, 36),
        ("SELECT o.a X:T o", Syntax, 11),
        ("SELECT o.a FROM X:T o WHERE o.a < 1 < 2", Syntax, 36),
        ("SELECT o.a FROM X:T o, Y:U t WHERE XMATCH(o,t,!t)<3", Semantic, 47),
        ("SELECT o.a FROM X:T o, Y:U t WHERE XMATCH(o,t)<0", Semantic, 47),
    ];
    for (sql, kind, pos) in cases {
        match parse(sql) {
            Ok(_) => return Err(format!("accepted {sql}")),
            Err(e) if e.kind != kind || e.position != Some(pos) => {
                return Err(format!("{sql}: got {:?} at {:?}, want {kind:?} at {pos}", e.kind, e.position));
            }
            Err(e) if e.message.is_empty() => return Err(format!("{sql}: empty message")),
            Err(_) => {}
        }
    }
    Ok(format!("{} error cases", cases.len()))
}
