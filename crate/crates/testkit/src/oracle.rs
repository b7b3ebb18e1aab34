//! Reference implementations that trade speed for directness.

use std::collections::{BTreeMap, BTreeSet};

use skyquery_core::catalog::{Catalog, CatalogTable};
use skyquery_core::query::{eval_predicate, partition_predicates, ColumnRef, Expr, QueryAst, RowContext};
use skyquery_core::sphere::{angular_separation, UnitVec3, Vec3};
use skyquery_core::table::Value;
use skyquery_core::xmatch::{weight_of, ArchiveSigma, Member};

/// Member keys of one result tuple, sorted.
pub type KeySet = Vec<Member>;

fn weighted_sum_sq(points: &[(UnitVec3, f64)], x: &UnitVec3) -> f64 {
    points
        .iter()
        .map(|(p, w)| {
            let d = p.as_vec() - x.as_vec();
            w * d.norm_squared()
        })
        .sum()
}

/// Minimum over unit vectors `x` of `Σ wᵢ|xᵢ − x|²`, found by fixed-point
/// iteration on the sphere and evaluated term by term.
pub fn min_chi2(points: &[(UnitVec3, ArchiveSigma)]) -> f64 {
    let pts: Vec<(UnitVec3, f64)> = points.iter().map(|(p, s)| (*p, weight_of(*s))).collect();
    let total: f64 = pts.iter().map(|(_, w)| w).sum();
    let mut x = pts[0].0;
    for _ in 0..8 {
        let mut step = Vec3::ZERO;
        for (p, w) in &pts {
            step += (p.as_vec() - x.as_vec()) * (w / total);
        }
        let next = (x.as_vec() + step).normalized().expect("nonzero mean direction");
        let moved = (next.as_vec() - x.as_vec()).norm();
        x = next;
        if moved < 1e-18 {
            break;
        }
    }
    weighted_sum_sq(&pts, &x)
}

/// Lower bound on the χ² of any tuple containing both points.
fn pair_bound(a: &UnitVec3, wa: f64, b: &UnitVec3, wb: f64) -> f64 {
    let d = a.as_vec() - b.as_vec();
    wa * wb / (wa + wb) * d.norm_squared()
}

struct Row<'a> {
    table: &'a CatalogTable,
    row: usize,
}

impl RowContext for Row<'_> {
    fn value(&self, col: &ColumnRef) -> Option<Value> {
        self.table.column_index(&col.column).map(|i| self.table.value(self.row, i))
    }
}

struct Joined<'a>(&'a BTreeMap<String, Row<'a>>);

impl RowContext for Joined<'_> {
    fn value(&self, col: &ColumnRef) -> Option<Value> {
        self.0.get(&col.alias).and_then(|r| r.value(col))
    }
}

struct Side<'a> {
    alias: String,
    archive: String,
    table: &'a CatalogTable,
    weight: f64,
    sigma: ArchiveSigma,
    rows: Vec<usize>,
}

/// Rows of `table` passing the AREA test and `predicates`, by linear scan.
pub fn scan(table: &CatalogTable, ast: &QueryAst, predicates: &[Expr]) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for row in 0..table.len() {
        if let Some(a) = &ast.area {
            if angular_separation(&a.center.to_unitvec(), &table.position(row)) > a.radius_rad() {
                continue;
            }
        }
        let ctx = Row { table, row };
        let mut keep = true;
        for p in predicates {
            keep &= eval_predicate(p, &ctx).map_err(|e| e.to_string())?;
        }
        if keep {
            out.push(row);
        }
    }
    Ok(out)
}

fn side<'a>(ast: &QueryAst, alias: &str, catalogs: &[&'a Catalog]) -> Result<Side<'a>, String> {
    let t = ast.table(alias).ok_or_else(|| format!("unknown alias {alias}"))?;
    let archive = t.archive.clone().ok_or("federated queries name archives")?;
    let cat = catalogs
        .iter()
        .find(|c| c.meta.archive_name.eq_ignore_ascii_case(&archive))
        .ok_or_else(|| format!("no catalog for {archive}"))?;
    let table = cat.table(&t.table).map_err(|e| e.to_string())?;
    let parts = partition_predicates(ast);
    Ok(Side {
        alias: alias.to_string(),
        archive: cat.meta.archive_name.clone(),
        table,
        weight: weight_of(cat.meta.sigma),
        sigma: cat.meta.sigma,
        rows: scan(table, ast, parts.local_for(alias))?,
    })
}

/// Every tuple the federated XMATCH query should return, by exhaustive
/// enumeration of mandatory combinations followed by cross predicates and
/// the dropout veto.
pub fn federated_oracle(ast: &QueryAst, catalogs: &[&Catalog]) -> Result<BTreeSet<KeySet>, String> {
    let xm = ast.xmatch.as_ref().ok_or("query has no XMATCH")?;
    let limit = xm.threshold * xm.threshold;
    let prune = limit * (1.0 + 1e-6);
    let mandatory: Vec<Side> = xm.mandatory.iter().map(|a| side(ast, a, catalogs)).collect::<Result<_, _>>()?;
    let dropouts: Vec<Side> = xm.dropouts.iter().map(|a| side(ast, a, catalogs)).collect::<Result<_, _>>()?;
    let cross = partition_predicates(ast).cross;

    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for s in &mandatory {
        let mut next = Vec::new();
        for combo in &combos {
            for &r in &s.rows {
                let p = s.table.position(r);
                let ok = combo.iter().enumerate().all(|(j, &rj)| {
                    let o = &mandatory[j];
                    pair_bound(&o.table.position(rj), o.weight, &p, s.weight) <= prune
                });
                if ok {
                    let mut c = combo.clone();
                    c.push(r);
                    next.push(c);
                }
            }
        }
        combos = next;
    }

    let mut out = BTreeSet::new();
    for combo in combos {
        let pts: Vec<(UnitVec3, ArchiveSigma)> =
            combo.iter().zip(&mandatory).map(|(&r, s)| (s.table.position(r), s.sigma)).collect();
        if min_chi2(&pts) >= limit {
            continue;
        }
        let rows: BTreeMap<String, Row> =
            combo.iter().zip(&mandatory).map(|(&r, s)| (s.alias.clone(), Row { table: s.table, row: r })).collect();
        let mut keep = true;
        for p in &cross {
            keep &= eval_predicate(p, &Joined(&rows)).map_err(|e| e.to_string())?;
        }
        if !keep {
            continue;
        }
        let vetoed = dropouts.iter().any(|d| {
            d.rows.iter().any(|&r| {
                let q = d.table.position(r);
                if pts.iter().any(|(p, s)| pair_bound(p, weight_of(*s), &q, d.weight) > prune) {
                    return false;
                }
                let mut all = pts.clone();
                all.push((q, d.sigma));
                min_chi2(&all) < limit
            })
        });
        if vetoed {
            continue;
        }
        let mut keys: KeySet = combo
            .iter()
            .zip(&mandatory)
            .map(|(&r, s)| Member { archive: s.archive.clone(), key: s.table.key(r) })
            .collect();
        keys.sort();
        out.insert(keys);
    }
    Ok(out)
}

/// Sorted copy of each tuple's members.
pub fn key_sets<'a>(tuples: impl IntoIterator<Item = &'a [Member]>) -> BTreeSet<KeySet> {
    tuples
        .into_iter()
        .map(|m| {
            let mut v = m.to_vec();
            v.sort();
            v
        })
        .collect()
}
