//! The work one node does for an `/xmatch` hop, independent of transport.

use std::collections::BTreeMap;

use skyquery_core::catalog::{Catalog, CatalogError};
use skyquery_core::query::{eval_predicate, parse, parse_predicate, ColumnRef, Expr, Projection, RowContext};
use skyquery_core::table::{ColumnInfo, Value};
use skyquery_core::xmatch::{crossmatch_step, tuple_seed, ArchiveSigma, Candidate, CandidateIndex, XMatchError};

use crate::batch::TupleBatch;
use crate::error::NodeError;
use crate::plan::{XMatchPlanStep, XMatchRequest};

fn mismatch(msg: impl Into<String>) -> NodeError {
    NodeError::bad_request("plan_mismatch", msg)
}

fn xmatch_err(e: XMatchError) -> NodeError {
    match e {
        XMatchError::Htm(_) | XMatchError::Degenerate => NodeError::internal(e.to_string()),
        _ => NodeError::bad_request("xmatch_error", e.to_string()),
    }
}

/// Checks the parts of a request that do not depend on catalog contents.
pub fn validate_request(req: &XMatchRequest) -> Result<(), NodeError> {
    let Some(last) = req.plan.last() else {
        return Err(mismatch("empty plan"));
    };
    if !(req.theta > 0.0 && req.theta.is_finite()) {
        return Err(NodeError::bad_request("xmatch_error", format!("invalid threshold {}", req.theta)));
    }
    if let Some(s) = req.plan.iter().find(|s| s.theta != req.theta) {
        return Err(mismatch(format!("step '{}' has threshold {} but the plan uses {}", s.alias, s.theta, req.theta)));
    }
    if last.is_dropout {
        return Err(mismatch("the last step seeds the chain and cannot be a dropout"));
    }
    Ok(())
}

/// Runs the step's local select and turns each row into a candidate whose
/// carried attributes are named `alias.column`.
pub fn local_candidates(catalog: &Catalog, step: &XMatchPlanStep) -> Result<(CandidateIndex, Vec<ColumnInfo>), NodeError> {
    if !step.archive_name.eq_ignore_ascii_case(&catalog.meta.archive_name) {
        return Err(mismatch(format!(
            "step for archive '{}' sent to node '{}'",
            step.archive_name, catalog.meta.archive_name
        )));
    }
    let sigma = catalog.meta.sigma;
    if (step.sigma_arcsec - sigma.arcsec()).abs() > 1e-12 * sigma.arcsec() {
        return Err(mismatch(format!("step sigma {} differs from archive sigma {}", step.sigma_arcsec, sigma.arcsec())));
    }
    let ast = parse(&step.local_sql).map_err(|e| NodeError::from(CatalogError::Query(e)))?;
    if ast.xmatch.is_some() || ast.tables.len() != 1 || ast.tables[0].alias != step.alias {
        return Err(mismatch(format!("local_sql must select from one table aliased '{}'", step.alias)));
    }
    let Projection::Columns(cols) = &ast.select else {
        return Err(mismatch("local_sql must select columns"));
    };
    let table = catalog.resolve(&ast)?;
    let rows = table.select_rows(&ast.predicates, ast.area.as_ref())?;
    let projected = table.project(&rows, cols, false)?;
    let carried: Vec<ColumnInfo> = projected
        .columns
        .iter()
        .map(|c| ColumnInfo { name: format!("{}.{}", step.alias, c.name), ..c.clone() })
        .collect();
    let candidates = rows
        .iter()
        .zip(projected.rows)
        .map(|(&r, values)| Candidate {
            pos: table.position(r),
            key: table.key(r),
            carried: carried.iter().map(|c| c.name.clone()).zip(values).collect(),
        })
        .collect();
    let index = CandidateIndex::new(&catalog.meta.archive_name, sigma, candidates).map_err(xmatch_err)?;
    Ok((index, carried))
}

struct Carried<'a>(&'a BTreeMap<String, Value>);

impl RowContext for Carried<'_> {
    fn value(&self, col: &ColumnRef) -> Option<Value> {
        let q = col.qualified();
        self.0
            .get(&q)
            .or_else(|| self.0.iter().find(|(k, _)| k.eq_ignore_ascii_case(&q)).map(|(_, v)| v))
            .cloned()
    }
}

fn covered(expr: &Expr, columns: &[ColumnInfo]) -> bool {
    expr.columns().iter().all(|c| {
        let q = c.qualified();
        columns.iter().any(|k| k.name.eq_ignore_ascii_case(&q))
    })
}

/// Performs this node's hop: seeds tuples when it is the last step,
/// otherwise extends (or vetoes) the incoming batch, then applies the cross
/// predicates that became evaluable here.
pub fn run_step(catalog: &Catalog, req: &XMatchRequest, incoming: Option<TupleBatch>) -> Result<TupleBatch, NodeError> {
    validate_request(req)?;
    let (index, local_cols) = local_candidates(catalog, &req.plan[0])?;
    apply_step(req, &index, local_cols, incoming)
}

/// The hop of `req.plan[0]` given its candidates, wherever they came from.
pub fn apply_step(
    req: &XMatchRequest,
    index: &CandidateIndex,
    local_cols: Vec<ColumnInfo>,
    incoming: Option<TupleBatch>,
) -> Result<TupleBatch, NodeError> {
    validate_request(req)?;
    let step = &req.plan[0];
    let predicates = req
        .cross_predicates
        .iter()
        .map(|p| parse_predicate(p).map_err(|e| NodeError::from(CatalogError::Query(e))))
        .collect::<Result<Vec<_>, _>>()?;

    let (mut out, before) = match incoming {
        None => {
            if req.plan.len() != 1 {
                return Err(mismatch("missing downstream batch"));
            }
            let sigma: ArchiveSigma = index.sigma();
            let tuples = index
                .candidates()
                .iter()
                .map(|c| tuple_seed(&c.pos, index.archive(), c.key, sigma, c.carried.clone()))
                .collect();
            (TupleBatch { carried: local_cols, tuples }, Vec::new())
        }
        Some(batch) => {
            let tuples = crossmatch_step(&batch.tuples, index, req.theta, step.is_dropout).map_err(xmatch_err)?;
            let mut carried = batch.carried.clone();
            if !step.is_dropout {
                if let Some(c) = local_cols.iter().find(|c| carried.iter().any(|k| k.name.eq_ignore_ascii_case(&c.name))) {
                    return Err(mismatch(format!("column '{}' carried twice", c.name)));
                }
                carried.extend(local_cols);
            }
            (TupleBatch { carried, tuples }, batch.carried)
        }
    };

    let due: Vec<&Expr> = predicates
        .iter()
        .filter(|p| covered(p, &out.carried) && !covered(p, &before))
        .collect();
    if !due.is_empty() {
        let mut kept = Vec::with_capacity(out.tuples.len());
        for t in out.tuples {
            let mut pass = true;
            for p in &due {
                if !eval_predicate(p, &Carried(&t.carried)).map_err(|e| NodeError::from(CatalogError::Eval(e)))? {
                    pass = false;
                    break;
                }
            }
            if pass {
                kept.push(t);
            }
        }
        out.tuples = kept;
    }
    Ok(out)
}
