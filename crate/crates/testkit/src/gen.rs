//! Random federated queries over the synthetic archives.

use rand::seq::SliceRandom;
use rand::Rng;
use skyquery_core::sphere::ARCMIN;
use skyquery_core::synth::random_in_cap;
use skyquery_core::synth::SynthConfig;

struct Survey {
    archive: &'static str,
    table: &'static str,
    alias: &'static str,
    /// A magnitude-like column usable in local and cross predicates.
    value: &'static str,
    lo: f64,
    hi: f64,
}

const SURVEYS: [Survey; 3] = [
    Survey { archive: "SDSS", table: "PhotoPrimary", alias: "o", value: "r", lo: 16.0, hi: 22.0 },
    Survey { archive: "TWOMASS", table: "PhotoPrimary", alias: "t", value: "m_j", lo: 13.0, hi: 20.0 },
    Survey { archive: "FIRST", table: "Sources", alias: "p", value: "flux", lo: 2.0, hi: 200.0 },
];

#[derive(Debug, Clone)]
pub struct GeneratedQuery {
    pub sql: String,
    pub mandatory: Vec<String>,
    pub dropouts: Vec<String>,
}

/// A query with 2 or 3 mandatory archives, at most one dropout, θ in [1, 5]
/// and a cone inside the synthetic footprint.
pub fn federated_query(rng: &mut impl Rng, cfg: &SynthConfig) -> GeneratedQuery {
    let mut order: Vec<&Survey> = SURVEYS.iter().collect();
    order.shuffle(rng);
    let n_mand = rng.random_range(2..=3);
    let (mand, rest) = order.split_at(n_mand);
    let drop: Vec<&Survey> = rest.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
    let theta = (rng.random_range(1.0..=5.0f64) * 100.0).round() / 100.0;

    let radius = (rng.random_range(2.0..8.0f64) * 10.0).round() / 10.0;
    let inner = (cfg.radius_arcmin - radius).max(0.0) * ARCMIN;
    let c = random_in_cap(rng, &cfg.center.to_unitvec(), inner).to_radec();
    let (ra, dec) = ((c.ra() * 1e4).round() / 1e4, (c.dec() * 1e4).round() / 1e4);

    let mut select = Vec::new();
    for s in mand {
        select.push(format!("{}.objId", s.alias));
        if rng.random_bool(0.5) {
            select.push(format!("{}.{}", s.alias, s.value));
        }
    }
    let tables: Vec<String> = mand.iter().chain(&drop).map(|s| format!("{}:{} {}", s.archive, s.table, s.alias)).collect();
    let members: Vec<String> = mand
        .iter()
        .map(|s| s.alias.to_string())
        .chain(drop.iter().map(|s| format!("!{}", s.alias)))
        .collect();

    let mut wheres = vec![format!("XMATCH({})<{theta}", members.join(","))];
    for s in mand.iter().chain(&drop) {
        if rng.random_bool(0.4) {
            let cut = (rng.random_range(s.lo..s.hi) * 10.0).round() / 10.0;
            let op = if rng.random_bool(0.5) { "<" } else { ">" };
            wheres.push(format!("{}.{}{op}{cut}", s.alias, s.value));
        }
        if s.alias == "o" && rng.random_bool(0.3) {
            wheres.push(format!("o.type={}", if rng.random_bool(0.5) { 3 } else { 6 }));
        }
    }
    let has = |a: &str| mand.iter().any(|s| s.alias == a);
    if has("o") && has("t") && rng.random_bool(0.4) {
        let cut = (rng.random_range(0.0..3.0f64) * 10.0).round() / 10.0;
        wheres.push(format!("(o.r - t.m_j)>{cut}"));
    }
    wheres.push(format!("AREA({ra},{dec},{radius})"));
    GeneratedQuery {
        sql: format!("SELECT {} FROM {} WHERE {}", select.join(", "), tables.join(", "), wheres.join(" AND ")),
        mandatory: mand.iter().map(|s| s.alias.to_string()).collect(),
        dropouts: drop.iter().map(|s| s.alias.to_string()).collect(),
    }
}

fn pick<'a, T>(rng: &mut impl Rng, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

fn keyword(rng: &mut impl Rng, kw: &str) -> String {
    match rng.random_range(0..3) {
        0 => kw.to_ascii_lowercase(),
        1 => kw.to_string(),
        _ => kw.chars().enumerate().map(|(i, c)| if i % 2 == 0 { c.to_ascii_lowercase() } else { c }).collect(),
    }
}

fn literal(rng: &mut impl Rng) -> String {
    match rng.random_range(0..6) {
        0 => rng.random_range(0..1_000_000i64).to_string(),
        1 => format!("{:.3}", rng.random_range(0.0..100.0f64)),
        2 => format!("{}e{}", rng.random_range(1..10), rng.random_range(-20..20)),
        3 => format!("'{}'", pick(rng, &["galaxy", "it''s", "", "A B"])),
        4 => "0.1".into(),
        _ => format!("{:?}", rng.random_range(-1e6..1e6f64)),
    }
}

fn expr(rng: &mut impl Rng, aliases: &[&str], depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.3) {
        return if rng.random_bool(0.5) {
            format!("{}.{}", pick(rng, aliases), pick(rng, &["ra", "r", "m_j", "objId", "Type", "flux_20"]))
        } else {
            literal(rng)
        };
    }
    match rng.random_range(0..5) {
        0 => format!("( {} )", expr(rng, aliases, depth - 1)),
        1 => format!("- ( {} )", expr(rng, aliases, depth - 1)),
        2 => format!("( {} {} )", keyword(rng, "NOT"), expr(rng, aliases, depth - 1)),
        _ => {
            let ops = ["+", "-", "*", "/", "=", "!=", "<>", "<", "<=", ">", ">=", "AND", "OR"];
            let op = pick(rng, &ops);
            let op = if op.chars().all(|c| c.is_ascii_alphabetic()) { keyword(rng, op) } else { op.to_string() };
            let (l, r) = (expr(rng, aliases, depth - 1), expr(rng, aliases, depth - 1));
            // compound operands are parenthesized unless the operator is
            // left-associative arithmetic and the left side is arithmetic
            let arith = |e: &str| !e.contains(['=', '<', '>']) && !e.to_ascii_lowercase().contains(" or ")
                && !e.to_ascii_lowercase().contains(" and ") && !e.to_ascii_lowercase().contains("not");
            let wrap = |e: String, keep: bool| if keep || !e.contains(' ') { e } else { format!("( {e} )") };
            let left_ok = ["+", "-", "*", "/"].contains(&op.as_str()) && arith(&l) && (op == "+" || op == "-");
            format!("{} {op} {}", wrap(l, left_ok), wrap(r, false))
        }
    }
}

/// Random syntactically valid query text covering the whole dialect:
/// qualified and bare tables, COUNT(*), nested expressions, every operator,
/// AREA and XMATCH with dropouts, mixed keyword case.
pub fn random_sql(rng: &mut impl Rng) -> String {
    let all = ["o", "t", "p", "gal"];
    let n = rng.random_range(1..=4);
    let aliases = &all[..n];
    let qualified = rng.random_bool(0.7);
    let tables: Vec<String> = aliases
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let t = ["PhotoPrimary", "psc", "Sources", "Objects"][i];
            if qualified {
                format!("{}:{t} {a}", ["SDSS", "TWOMASS", "FIRST", "GALEX"][i])
            } else {
                format!("{t} {a}")
            }
        })
        .collect();
    let select = if rng.random_bool(0.2) {
        format!("{}(*)", keyword(rng, "COUNT"))
    } else {
        let k = rng.random_range(1..5);
        (0..k)
            .map(|_| format!("{}.{}", pick(rng, aliases), pick(rng, &["objId", "r", "m_j", "ra"])))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut terms = Vec::new();
    for _ in 0..rng.random_range(0..4) {
        let e = expr(rng, aliases, 4);
        // a top-level OR would swallow neighbouring AREA or XMATCH terms
        terms.push(if e.to_ascii_lowercase().contains(" or ") { format!("({e})") } else { e });
    }
    if rng.random_bool(0.6) {
        let ra = rng.random_range(0.0..360.0f64);
        let dec = rng.random_range(-90.0..=90.0f64);
        let r = rng.random_range(0.001..600.0f64);
        terms.insert(rng.random_range(0..=terms.len()), format!("{}({ra:.4}, {dec:.4}, {r:.3})", keyword(rng, "AREA")));
    }
    if n >= 2 && rng.random_bool(0.6) {
        let mut members: Vec<String> = aliases.iter().map(|a| a.to_string()).collect();
        if n >= 3 && rng.random_bool(0.5) {
            members[n - 1] = format!("!{}", members[n - 1]);
        }
        let theta = rng.random_range(0.5..10.0f64);
        terms.insert(
            rng.random_range(0..=terms.len()),
            format!("{}({}) < {theta:.2}", keyword(rng, "XMATCH"), members.join(", ")),
        );
    }
    let mut sql = format!("{} {select} {} {}", keyword(rng, "SELECT"), keyword(rng, "FROM"), tables.join(", "));
    if !terms.is_empty() {
        let and = format!(" {} ", keyword(rng, "AND"));
        sql.push_str(&format!(" {} {}", keyword(rng, "WHERE"), terms.join(&and)));
    }
    sql
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use skyquery_core::query::parse;

    use super::*;

    #[test]
    fn generated_queries_parse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cfg = SynthConfig::default();
        for _ in 0..200 {
            let q = federated_query(&mut rng, &cfg);
            let ast = parse(&q.sql).unwrap_or_else(|e| panic!("{}: {e}", q.sql));
            let xm = ast.xmatch.unwrap();
            assert_eq!(xm.mandatory, q.mandatory);
            assert_eq!(xm.dropouts, q.dropouts);
            assert!((1.0..=5.0).contains(&xm.threshold));
        }
    }

    #[test]
    fn random_sql_parses() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..500 {
            let sql = random_sql(&mut rng);
            parse(&sql).unwrap_or_else(|e| panic!("{sql}: {e}"));
        }
    }
}
