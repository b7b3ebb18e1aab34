//! Planning: validation against the federation, call order by counts and
//! the per-step local queries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use skynode::{XMatchPlanStep, XMatchRequest};
use skyquery_core::catalog::{SchemaDocument, TableSchema};
use skyquery_core::query::{partition_predicates, render_local_sql, ColumnRef, LocalMode, Projection, QueryAst};
use skyquery_core::table::{ColumnInfo, ColumnType};

use crate::config::FederationConfig;
use crate::error::PortalError;

pub const SIGMA_COLUMN: &str = "_xmatch_sigma";

/// What the portal learns about a member before planning.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberMeta {
    pub archive: String,
    pub url: String,
    pub sigma_arcsec: f64,
    pub schema: SchemaDocument,
}

impl MemberMeta {
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.schema.tables.iter().find(|t| t.table_name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPlan {
    /// Call order: dropouts first, then mandatory archives by decreasing
    /// count. The last step seeds the chain.
    pub steps: Vec<XMatchPlanStep>,
    pub final_select: Vec<ColumnRef>,
    pub count_only: bool,
    /// In-area rows passing local predicates, by archive.
    pub counts: BTreeMap<String, u64>,
    pub theta: f64,
    pub cross_predicates: Vec<String>,
    /// Output columns, ending with the match statistic.
    pub output: Vec<ColumnInfo>,
}

impl ExecutionPlan {
    pub fn request(&self, plan_id: Option<String>) -> XMatchRequest {
        XMatchRequest {
            plan: self.steps.clone(),
            theta: self.theta,
            cross_predicates: self.cross_predicates.clone(),
            plan_id,
        }
    }

    /// A mandatory archive with nothing in the area makes the result empty.
    pub fn trivially_empty(&self) -> bool {
        self.steps
            .iter()
            .filter(|s| !s.is_dropout)
            .any(|s| self.counts.get(&s.archive_name) == Some(&0))
    }

    pub fn mandatory_order(&self) -> Vec<String> {
        self.steps.iter().filter(|s| !s.is_dropout).map(|s| s.alias.clone()).collect()
    }

    pub fn explain(&self) -> String {
        let mut s = format!("threshold {}\ncall order (the last step seeds the chain):\n", self.theta);
        for (i, st) in self.steps.iter().enumerate() {
            let count = self.counts.get(&st.archive_name).map_or("-".to_string(), u64::to_string);
            let _ = writeln!(
                s,
                "  {}. {} {} ({}) count={} sigma={}\"  {}\n     {}",
                i + 1,
                if st.is_dropout { "dropout  " } else { "mandatory" },
                st.alias,
                st.archive_name,
                count,
                st.sigma_arcsec,
                st.node_url,
                st.local_sql
            );
        }
        for p in &self.cross_predicates {
            let _ = writeln!(s, "cross predicate: {p}");
        }
        s
    }
}

fn find_column<'a>(table: &'a TableSchema, c: &ColumnRef) -> Result<&'a ColumnInfo, PortalError> {
    table
        .column(&c.column)
        .map(|(_, info)| info)
        .ok_or_else(|| PortalError::Plan(format!("unknown column '{}' in {}", c.qualified(), table.table_name)))
}

/// Checks that do not need the members: every table is an archive of the
/// federation and takes part in XMATCH, dropouts are not projected or used
/// across archives, and θ is within the configured limits.
pub fn validate_federated(ast: &QueryAst, cfg: &FederationConfig) -> Result<(), PortalError> {
    let xm = ast
        .xmatch
        .as_ref()
        .ok_or_else(|| PortalError::Plan("queries over several archives need an XMATCH clause".into()))?;
    if xm.mandatory.len() < 2 {
        return Err(PortalError::Plan("XMATCH needs at least 2 mandatory archives".into()));
    }
    if !(xm.threshold > cfg.theta_min && xm.threshold <= cfg.theta_max) {
        return Err(PortalError::Plan(format!(
            "XMATCH threshold {} outside ({}, {}]",
            xm.threshold, cfg.theta_min, cfg.theta_max
        )));
    }
    for t in &ast.tables {
        let archive = t
            .archive
            .as_ref()
            .ok_or_else(|| PortalError::Plan(format!("table '{}' must name its archive, as ARCHIVE:{}", t.alias, t.table)))?;
        if cfg.catalog(archive).is_none() {
            return Err(PortalError::Plan(format!("archive '{archive}' is not a catalog member of this federation")));
        }
        if !xm.mandatory.contains(&t.alias) && !xm.dropouts.contains(&t.alias) {
            return Err(PortalError::Plan(format!("alias '{}' does not take part in XMATCH", t.alias)));
        }
    }
    for c in ast.select_columns() {
        if ast.is_dropout(&c.alias) {
            return Err(PortalError::Plan(format!("dropout '{}' cannot be selected", c.qualified())));
        }
    }
    for p in partition_predicates(ast).cross {
        if let Some(a) = p.referenced_aliases().iter().find(|a| ast.is_dropout(a)) {
            return Err(PortalError::Plan(format!("dropout '{a}' cannot appear in the cross-archive condition {p}")));
        }
    }
    Ok(())
}

/// Builds the plan. `order` forces the call order of the mandatory aliases;
/// otherwise it is decreasing count, ties by archive name.
pub fn make_plan(
    ast: &QueryAst,
    counts: &BTreeMap<String, u64>,
    metas: &BTreeMap<String, MemberMeta>,
    order: Option<&[String]>,
) -> Result<ExecutionPlan, PortalError> {
    let xm = ast.xmatch.as_ref().ok_or_else(|| PortalError::Plan("no XMATCH clause".into()))?;
    if xm.mandatory.len() < 2 {
        return Err(PortalError::Plan("XMATCH needs at least 2 mandatory archives".into()));
    }
    let meta = |alias: &str| metas.get(alias).ok_or_else(|| PortalError::Internal(format!("no metadata for '{alias}'")));
    let table_of = |alias: &str| -> Result<&TableSchema, PortalError> {
        let m = meta(alias)?;
        let t = ast.table(alias).ok_or_else(|| PortalError::Internal(format!("unknown alias '{alias}'")))?;
        m.table(&t.table).ok_or_else(|| PortalError::Plan(format!("archive {} has no table '{}'", m.archive, t.table)))
    };
    let count_of = |alias: &str| -> Result<u64, PortalError> { Ok(counts.get(&meta(alias)?.archive).copied().unwrap_or(0)) };

    let mut mandatory: Vec<String> = xm.mandatory.clone();
    match order {
        Some(o) => {
            let mut a = o.to_vec();
            let mut b = mandatory.clone();
            a.sort();
            b.sort();
            if a != b {
                return Err(PortalError::Plan(format!("forced order {o:?} is not a permutation of {:?}", xm.mandatory)));
            }
            mandatory = o.to_vec();
        }
        None => {
            let mut keyed = Vec::new();
            for a in mandatory {
                keyed.push((count_of(&a)?, meta(&a)?.archive.clone(), a));
            }
            keyed.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.cmp(&y.1)));
            mandatory = keyed.into_iter().map(|k| k.2).collect();
        }
    }

    let mut columns = ast.select_columns().to_vec();
    for p in &ast.predicates {
        p.visit_columns(&mut |c| columns.push(c.clone()));
    }
    for c in &columns {
        find_column(table_of(&c.alias)?, c)?;
    }

    let mut steps = Vec::new();
    for alias in xm.dropouts.iter().chain(&mandatory) {
        let m = meta(alias)?;
        let t = table_of(alias)?;
        let mode = LocalMode::Select { key: t.key_column.clone(), ra: t.ra_column.clone(), dec: t.dec_column.clone() };
        steps.push(XMatchPlanStep {
            node_url: m.url.clone(),
            archive_name: m.archive.clone(),
            alias: alias.clone(),
            local_sql: render_local_sql(ast, alias, &mode, &[])?,
            sigma_arcsec: m.sigma_arcsec,
            is_dropout: ast.is_dropout(alias),
            theta: xm.threshold,
        });
    }

    let count_only = matches!(ast.select, Projection::CountStar);
    let output = if count_only {
        vec![ColumnInfo::new("count", ColumnType::Int64).with_description("number of matched tuples")]
    } else {
        let mut out = Vec::new();
        for c in ast.select_columns() {
            let info = find_column(table_of(&c.alias)?, c)?;
            out.push(ColumnInfo { name: c.qualified(), ..info.clone() });
        }
        out.push(ColumnInfo::new(SIGMA_COLUMN, ColumnType::Float64).with_description("match statistic sqrt(chi2) of the tuple"));
        out
    };
    let counts = steps
        .iter()
        .filter_map(|s| counts.get(&s.archive_name).map(|&n| (s.archive_name.clone(), n)))
        .collect();
    Ok(ExecutionPlan {
        steps,
        final_select: ast.select_columns().to_vec(),
        count_only,
        counts,
        theta: xm.threshold,
        cross_predicates: partition_predicates(ast).cross.iter().map(ToString::to_string).collect(),
        output,
    })
}

#[cfg(test)]
mod tests {
    use skyquery_core::query::parse;
    use skyquery_core::synth::{schema_for, SynthConfig};

    use super::*;
    use crate::config::Member;

    const SAMPLE: &str = "SELECT o.objId, o.r, o.type, t.objId, t.m_j FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t \
        WHERE XMATCH(o,t)<3.5 AND AREA(181.3,-0.76,6.5) AND o.type=3 AND (o.i - t.m_j)>2";

    fn metas(ast: &QueryAst) -> BTreeMap<String, MemberMeta> {
        let synth = SynthConfig::default();
        ast.tables
            .iter()
            .map(|t| {
                let spec = synth.surveys.iter().find(|s| Some(&s.archive) == t.archive.as_ref()).unwrap();
                let meta = MemberMeta {
                    archive: spec.archive.clone(),
                    url: format!("http://{}", spec.archive.to_lowercase()),
                    sigma_arcsec: spec.sigma_arcsec,
                    schema: SchemaDocument { archive: spec.archive.clone(), tables: vec![schema_for(spec)] },
                };
                (t.alias.clone(), meta)
            })
            .collect()
    }

    fn counts(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(a, n)| (a.to_string(), *n)).collect()
    }

    #[test]
    fn sample_calls_the_largest_first() {
        let ast = parse(SAMPLE).unwrap();
        let plan = make_plan(&ast, &counts(&[("SDSS", 5000), ("TWOMASS", 800)]), &metas(&ast), None).unwrap();
        let order: Vec<&str> = plan.steps.iter().map(|s| s.archive_name.as_str()).collect();
        assert_eq!(order, ["SDSS", "TWOMASS"]);
        assert_eq!(plan.cross_predicates, ["(o.i - t.m_j)>2"]);
        assert!(plan.steps[0].local_sql.contains("o.type=3"));
        assert!(plan.steps[0].local_sql.contains("o.i"));
        assert!(plan.steps[1].local_sql.contains("t.m_j"));
        let names: Vec<&str> = plan.output.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["o.objId", "o.r", "o.type", "t.objId", "t.m_j", SIGMA_COLUMN]);
        assert!(!plan.trivially_empty());
        // determinism
        assert_eq!(plan, make_plan(&ast, &counts(&[("SDSS", 5000), ("TWOMASS", 800)]), &metas(&ast), None).unwrap());
        let swapped = make_plan(&ast, &counts(&[("SDSS", 80), ("TWOMASS", 800)]), &metas(&ast), None).unwrap();
        assert_eq!(swapped.mandatory_order(), ["t", "o"]);
        let empty = make_plan(&ast, &counts(&[("SDSS", 0), ("TWOMASS", 800)]), &metas(&ast), None).unwrap();
        assert!(empty.trivially_empty());
    }

    #[test]
    fn dropouts_lead_and_ties_break_by_name() {
        let ast = parse(
            "SELECT o.objId, t.objId FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t, FIRST:Sources p \
             WHERE XMATCH(t,o,!p)<2 AND AREA(181.3,-0.76,5)",
        )
        .unwrap();
        let plan = make_plan(&ast, &counts(&[("SDSS", 7), ("TWOMASS", 7), ("FIRST", 100)]), &metas(&ast), None).unwrap();
        let order: Vec<(&str, bool)> = plan.steps.iter().map(|s| (s.archive_name.as_str(), s.is_dropout)).collect();
        assert_eq!(order, [("FIRST", true), ("SDSS", false), ("TWOMASS", false)]);
        let forced = make_plan(&ast, &BTreeMap::new(), &metas(&ast), Some(&["t".into(), "o".into()])).unwrap();
        assert_eq!(forced.mandatory_order(), ["t", "o"]);
        assert!(make_plan(&ast, &BTreeMap::new(), &metas(&ast), Some(&["t".into()])).is_err());
    }

    #[test]
    fn rejects_unknown_columns() {
        let ast = parse(
            "SELECT o.objId, t.nope FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t WHERE XMATCH(o,t)<2 AND AREA(181.3,-0.76,5)",
        )
        .unwrap();
        let e = make_plan(&ast, &BTreeMap::new(), &metas(&ast), None).unwrap_err();
        assert!(e.to_string().contains("t.nope"), "{e}");
    }

    #[test]
    fn validation() {
        let cfg = FederationConfig::new(
            ["SDSS", "TWOMASS", "FIRST"]
                .iter()
                .map(|a| Member { archive_name: a.to_string(), node_url: "http://x".into(), kind: Default::default() })
                .collect(),
        )
        .unwrap();
        let ok = |sql: &str| validate_federated(&parse(sql).unwrap(), &cfg);
        ok(SAMPLE).unwrap();
        let base = "FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t, FIRST:Sources p WHERE AREA(181.3,-0.76,5) AND ";
        assert!(ok(&format!("SELECT o.objId, p.flux {base} XMATCH(o,t,!p)<2")).is_err());
        assert!(ok(&format!("SELECT o.objId {base} XMATCH(o,t,!p)<2 AND o.r > p.flux")).is_err());
        ok(&format!("SELECT o.objId {base} XMATCH(o,t,!p)<2 AND p.flux > 10")).unwrap();
        assert!(ok(&format!("SELECT o.objId {base} XMATCH(o,t)<2")).is_err());
        assert!(ok(&format!("SELECT o.objId {base} XMATCH(o,t,p)<1000")).is_err());
        assert!(ok("SELECT o.objId FROM SDSS:PhotoPrimary o, GALEX:x g WHERE XMATCH(o,g)<2").is_err());
        assert!(ok("SELECT o.objId FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t").is_err());
    }
}
