//! The extended SQL dialect: `AREA(ra, dec, radius_arcmin)` cone restriction
//! and `XMATCH(a, b, !c) < θ` probabilistic cross-match, over
//! archive-qualified tables (`SDSS:PhotoPrimary o`).

mod ast;
mod error;
mod eval;
mod lexer;
mod parser;
mod render;

use std::collections::{BTreeMap, BTreeSet};

pub use ast::*;
pub use error::{QueryError, QueryErrorKind};
pub use eval::{eval, eval_predicate, EvalError, RowContext};
pub use parser::{parse, parse_predicate, MAX_AREA_RADIUS_ARCMIN};

/// WHERE conjuncts split by where they can be evaluated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartitionedPredicates {
    /// One entry per table alias, possibly empty.
    pub local: BTreeMap<String, Vec<Expr>>,
    /// Conjuncts spanning two or more aliases.
    pub cross: Vec<Expr>,
}

impl PartitionedPredicates {
    pub fn local_for(&self, alias: &str) -> &[Expr] {
        self.local.get(alias).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Constant conjuncts are copied to every alias.
pub fn partition_predicates(ast: &QueryAst) -> PartitionedPredicates {
    let mut out = PartitionedPredicates::default();
    for t in &ast.tables {
        out.local.entry(t.alias.clone()).or_default();
    }
    for p in &ast.predicates {
        let aliases = p.referenced_aliases();
        match aliases.len() {
            0 => out.local.values_mut().for_each(|l| l.push(p.clone())),
            1 => {
                let a = aliases.into_iter().next().expect("one alias");
                out.local.entry(a).or_default().push(p.clone());
            }
            _ => out.cross.push(p.clone()),
        }
    }
    out
}

/// Columns of `alias` referenced by cross-archive conjuncts, in first-use order.
pub fn cross_columns(ast: &QueryAst, alias: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for p in partition_predicates(ast).cross {
        for c in p.columns() {
            if c.alias == alias && !out.iter().any(|o| o.eq_ignore_ascii_case(&c.column)) {
                out.push(c.column.clone());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LocalMode {
    Count,
    /// Row retrieval; the node's key and position columns are always included.
    Select { key: String, ra: String, dec: String },
}

/// The single-table query a node runs for `alias`: its local conjuncts and
/// the AREA term, without archive prefix.
pub fn local_ast(
    ast: &QueryAst,
    alias: &str,
    mode: &LocalMode,
    extra_columns: &[String],
) -> Result<QueryAst, QueryError> {
    let table = ast
        .table(alias)
        .ok_or_else(|| QueryError::semantic(None, format!("unknown alias '{alias}'")))?;
    let select = match mode {
        LocalMode::Count => Projection::CountStar,
        LocalMode::Select { key, ra, dec } => {
            let mut cols: Vec<String> = Vec::new();
            let mut add = |c: &str| {
                if !cols.iter().any(|o| o.eq_ignore_ascii_case(c)) {
                    cols.push(c.to_string());
                }
            };
            for c in ast.select_columns().iter().filter(|c| c.alias == alias) {
                add(&c.column);
            }
            for c in [key, ra, dec] {
                add(c);
            }
            for c in cross_columns(ast, alias) {
                add(&c);
            }
            for c in extra_columns {
                add(c);
            }
            Projection::Columns(cols.into_iter().map(|c| ColumnRef::new(alias, c)).collect())
        }
    };
    Ok(QueryAst {
        select,
        tables: vec![TableRef { archive: None, table: table.table.clone(), alias: alias.to_string() }],
        area: ast.area,
        xmatch: None,
        predicates: partition_predicates(ast).local_for(alias).to_vec(),
    })
}

pub fn render_local_sql(
    ast: &QueryAst,
    alias: &str,
    mode: &LocalMode,
    extra_columns: &[String],
) -> Result<String, QueryError> {
    local_ast(ast, alias, mode, extra_columns).map(|a| a.to_string())
}

/// Every column each alias must supply for the federated result: selected
/// columns plus those referenced by predicates.
pub fn needed_columns(ast: &QueryAst) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in &ast.tables {
        out.entry(t.alias.clone()).or_default();
    }
    let mut add = |c: &ColumnRef| {
        out.entry(c.alias.clone()).or_default().insert(c.column.clone());
    };
    ast.select_columns().iter().for_each(&mut add);
    for p in &ast.predicates {
        p.visit_columns(&mut add);
    }
    out
}

#[cfg(test)]
mod tests;
