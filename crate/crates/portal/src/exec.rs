//! Running queries: counts, the daisy chain, the star-join baseline and
//! the optional cutout.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use futures::future::try_join_all;
use serde::{Deserialize, Serialize};
use skynode::chain::apply_step;
use skynode::{NodeClient, NodeError, QueryRequest, TupleBatch, XMatchRequest};
use skyquery_core::query::{eval_predicate, local_ast, parse, partition_predicates, ColumnRef, Expr, LocalMode, QueryAst, RowContext};
use skyquery_core::sphere::SkyPos;
use skyquery_core::table::{ColumnInfo, ResultTable, Value};
use skyquery_core::xmatch::{match_statistic, ArchiveSigma, Candidate, CandidateIndex, Member};

use crate::config::FederationConfig;
use crate::error::PortalError;
use crate::plan::{make_plan, validate_federated, ExecutionPlan, MemberMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Counts, then the node-to-node chain.
    #[default]
    Daisy,
    /// Every member ships its in-area rows to the portal, which matches them.
    Star,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "daisy" => Ok(Mode::Daisy),
            "star" => Ok(Mode::Star),
            _ => Err(format!("unknown mode '{s}', expected daisy or star")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutput {
    pub result: ResultTable,
    pub plan: Option<ExecutionPlan>,
    /// Request and response body bytes of every data-plane exchange: count
    /// queries and the chain for the daisy mode, row pulls for the star mode.
    pub transfer_bytes: u64,
    /// Member keys of each output row, in row order.
    pub members: Vec<Vec<Member>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutoutImage {
    pub p5: Vec<u8>,
    pub ra: f64,
    pub dec: f64,
    pub scale: f64,
    pub size: usize,
}

pub struct Portal {
    pub config: FederationConfig,
    client: NodeClient,
    http: reqwest::Client,
    next_id: AtomicU64,
}

fn info_value<'a>(info: &'a ResultTable, key: &str) -> Option<&'a str> {
    info.rows.iter().find(|r| r.first().and_then(Value::as_str) == Some(key)).and_then(|r| r.get(1)?.as_str())
}

impl Portal {
    pub fn new(config: FederationConfig) -> Self {
        let client = NodeClient::new(config.timeout());
        let http = reqwest::Client::builder().timeout(config.timeout()).build().expect("http client configuration");
        Self { config, client, http, next_id: AtomicU64::new(1) }
    }

    pub fn client(&self) -> &NodeClient {
        &self.client
    }

    fn plan_id(&self) -> String {
        format!("q{}-{}", std::process::id(), self.next_id.fetch_add(1, Ordering::Relaxed))
    }

    fn url_of(&self, ast: &QueryAst, alias: &str) -> Result<(String, String), PortalError> {
        let archive = ast
            .table(alias)
            .and_then(|t| t.archive.clone())
            .ok_or_else(|| PortalError::Plan(format!("alias '{alias}' has no archive")))?;
        let m = self
            .config
            .catalog(&archive)
            .ok_or_else(|| PortalError::Plan(format!("archive '{archive}' is not a catalog member of this federation")))?;
        Ok((m.archive_name.clone(), m.node_url.clone()))
    }

    /// `/info` and `/schema` of every member the query references.
    pub async fn metadata(&self, ast: &QueryAst) -> Result<BTreeMap<String, MemberMeta>, PortalError> {
        let jobs = ast.tables.iter().map(|t| async move {
            let (archive, url) = self.url_of(ast, &t.alias)?;
            let (info, schema) = tokio::try_join!(self.client.info(&url), self.client.schema(&url))
                .map_err(|e| PortalError::member(&archive, e))?;
            let sigma_arcsec = info_value(&info, "positional_accuracy_arcsec")
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| PortalError::member(&archive, NodeError::new(502, "bad_response", "info lacks positional accuracy").at(&url)))?;
            let name = info_value(&info, "archive").unwrap_or(&archive).to_string();
            Ok::<_, PortalError>((t.alias.clone(), MemberMeta { archive: name, url, sigma_arcsec, schema }))
        });
        Ok(try_join_all(jobs).await?.into_iter().collect())
    }

    /// Count of in-area rows passing local predicates for each referenced
    /// archive, queried concurrently. Also returns the bytes exchanged.
    pub async fn gather_counts(&self, ast: &QueryAst) -> Result<(BTreeMap<String, u64>, u64), PortalError> {
        let jobs = ast.tables.iter().map(|t| async move {
            let (archive, url) = self.url_of(ast, &t.alias)?;
            let sql = skyquery_core::query::render_local_sql(ast, &t.alias, &LocalMode::Count, &[])?;
            let ex = self
                .client
                .query(&url, &QueryRequest { sql, plan_id: None })
                .await
                .map_err(|e| PortalError::member(&archive, e))?;
            let n = ex
                .body
                .rows
                .first()
                .and_then(|r| r.first())
                .and_then(Value::as_i64)
                .ok_or_else(|| PortalError::member(&archive, NodeError::new(502, "bad_response", "count query returned no count").at(&url)))?;
            Ok::<_, PortalError>((archive, n.max(0) as u64, ex.request_bytes + ex.response_bytes))
        });
        let results = try_join_all(jobs).await?;
        let bytes = results.iter().map(|r| r.2).sum();
        Ok((results.into_iter().map(|(a, n, _)| (a, n)).collect(), bytes))
    }

    /// Parses and validates `sql` for this federation.
    pub fn prepare(&self, sql: &str) -> Result<QueryAst, PortalError> {
        let ast = parse(sql)?;
        if ast.xmatch.is_some() || ast.tables.len() > 1 {
            validate_federated(&ast, &self.config)?;
        }
        Ok(ast)
    }

    /// Counts, metadata and the plan. `order` forces the mandatory call order.
    pub async fn plan(&self, ast: &QueryAst, order: Option<&[String]>) -> Result<(ExecutionPlan, u64), PortalError> {
        let (metas, (counts, bytes)) = tokio::try_join!(self.metadata(ast), self.gather_counts(ast))?;
        Ok((make_plan(ast, &counts, &metas, order)?, bytes))
    }

    /// Sends the plan down the chain and projects the returned tuples.
    pub async fn execute(&self, plan: &ExecutionPlan) -> Result<QueryOutput, PortalError> {
        if plan.trivially_empty() {
            return project(plan, TupleBatch::default(), 0);
        }
        let first = plan.steps.first().ok_or_else(|| PortalError::Internal("empty plan".into()))?;
        let reply = self
            .client
            .xmatch(&first.node_url, &plan.request(Some(self.plan_id())))
            .await
            .map_err(|e| PortalError::member(&first.archive_name, e))?;
        project(plan, reply.batch, reply.chain_bytes)
    }

    /// Daisy-chain execution of a federated query, counts included.
    pub async fn run_daisy(&self, ast: &QueryAst, order: Option<&[String]>) -> Result<QueryOutput, PortalError> {
        let (plan, count_bytes) = self.plan(ast, order).await?;
        let mut out = self.execute(&plan).await?;
        out.transfer_bytes += count_bytes;
        Ok(out)
    }

    /// The baseline: every member ships all its in-area rows to the portal,
    /// which applies the local predicates and runs the steps itself.
    pub async fn star_join(&self, ast: &QueryAst) -> Result<QueryOutput, PortalError> {
        let metas = self.metadata(ast).await?;
        let plan = make_plan(ast, &BTreeMap::new(), &metas, None)?;
        let plan_id = self.plan_id();
        let mut pulls = Vec::with_capacity(plan.steps.len());
        for s in &plan.steps {
            let meta = &metas[&s.alias];
            let table = ast.table(&s.alias).and_then(|t| meta.table(&t.table)).ok_or_else(|| PortalError::Internal("schema vanished".into()))?;
            let mode = LocalMode::Select { key: table.key_column.clone(), ra: table.ra_column.clone(), dec: table.dec_column.clone() };
            let (sql, filters) = area_sql(ast, &s.alias, &mode)?;
            pulls.push((s, mode, filters, QueryRequest { sql, plan_id: Some(plan_id.clone()) }));
        }
        let exchanges = try_join_all(pulls.iter().map(|(s, _, _, req)| async move {
            self.client.query(&s.node_url, req).await.map_err(|e| PortalError::member(&s.archive_name, e))
        }))
        .await?;
        let bytes = exchanges.iter().map(|e| e.request_bytes + e.response_bytes).sum();
        let mut inputs = Vec::with_capacity(exchanges.len());
        for ((step, mode, filters, _), ex) in pulls.iter().zip(exchanges) {
            let LocalMode::Select { key, ra, dec } = mode else { unreachable!("select mode") };
            let rows = filter_rows(&step.alias, ex.body, filters)?;
            inputs.push(candidates(step, &metas[&step.alias], key, ra, dec, rows)?);
        }
        let req = plan.request(Some(plan_id));
        let batch = tokio::task::spawn_blocking(move || local_chain(&req, inputs))
            .await
            .map_err(|e| PortalError::Internal(e.to_string()))??;
        project(&plan, batch, bytes)
    }

    /// A query without XMATCH over a single archive goes straight to it.
    pub async fn single(&self, ast: &QueryAst) -> Result<QueryOutput, PortalError> {
        let t = ast.tables.first().ok_or_else(|| PortalError::Plan("no table".into()))?;
        let (archive, url) = self.url_of(ast, &t.alias)?;
        let mut local = ast.clone();
        local.tables[0].archive = None;
        let ex = self
            .client
            .query(&url, &QueryRequest { sql: local.to_string(), plan_id: None })
            .await
            .map_err(|e| PortalError::member(&archive, e))?;
        Ok(QueryOutput { result: ex.body, plan: None, transfer_bytes: ex.request_bytes + ex.response_bytes, members: Vec::new() })
    }

    pub async fn run(&self, sql: &str, mode: Mode) -> Result<QueryOutput, PortalError> {
        let ast = self.prepare(sql)?;
        self.run_ast(&ast, mode).await
    }

    pub async fn run_ast(&self, ast: &QueryAst, mode: Mode) -> Result<QueryOutput, PortalError> {
        if ast.xmatch.is_none() {
            return self.single(ast).await;
        }
        match mode {
            Mode::Daisy => self.run_daisy(ast, None).await,
            Mode::Star => self.star_join(ast).await,
        }
    }

    /// Image of the query's AREA from the cutout member: `None` when the
    /// federation has no cutout service or the query no AREA.
    pub async fn cutout_for_area(&self, ast: &QueryAst) -> Option<Result<CutoutImage, String>> {
        let member = self.config.cutout()?;
        let area = ast.area?;
        Some(self.fetch_cutout(&member.node_url, area.center, area.radius_arcmin).await)
    }

    async fn fetch_cutout(&self, base: &str, center: SkyPos, radius_arcmin: f64) -> Result<CutoutImage, String> {
        let base = base.trim_end_matches('/');
        let info: cutout::CutoutInfo = self
            .http
            .get(format!("{base}/cutout/info"))
            .send()
            .await
            .map_err(|e| format!("{base}: {e}"))?
            .json_bytes()
            .await?;
        let scale = info.default_scale;
        let size = ((2.0 * radius_arcmin / 60.0 * scale).round() as usize).clamp(1, info.max_size);
        let resp = self
            .http
            .get(format!("{base}/cutout"))
            .query(&[
                ("ra", center.ra().to_string()),
                ("dec", center.dec().to_string()),
                ("scale", scale.to_string()),
                ("width", size.to_string()),
                ("height", size.to_string()),
            ])
            .send()
            .await
            .map_err(|e| format!("{base}: {e}"))?;
        let status = resp.status();
        let body = resp.bytes().await.map_err(|e| format!("{base}: {e}"))?;
        if !status.is_success() {
            return Err(format!("{base}: {status}: {}", String::from_utf8_lossy(&body[..body.len().min(300)])));
        }
        Ok(CutoutImage { p5: body.to_vec(), ra: center.ra(), dec: center.dec(), scale, size })
    }
}

trait JsonBytes {
    async fn json_bytes<T: serde::de::DeserializeOwned>(self) -> Result<T, String>;
}

impl JsonBytes for reqwest::Response {
    async fn json_bytes<T: serde::de::DeserializeOwned>(self) -> Result<T, String> {
        let url = self.url().to_string();
        let status = self.status();
        let bytes = self.bytes().await.map_err(|e| format!("{url}: {e}"))?;
        if !status.is_success() {
            return Err(format!("{url}: {status}"));
        }
        serde_json::from_slice(&bytes).map_err(|e| format!("{url}: {e}"))
    }
}

/// Area-only query for `alias` that also returns the columns its local
/// predicates need, together with those predicates.
fn area_sql(ast: &QueryAst, alias: &str, mode: &LocalMode) -> Result<(String, Vec<Expr>), PortalError> {
    let filters = partition_predicates(ast).local_for(alias).to_vec();
    let mut extra = Vec::new();
    for p in &filters {
        p.visit_columns(&mut |c| extra.push(c.column.clone()));
    }
    let mut local = local_ast(ast, alias, mode, &extra)?;
    local.predicates.clear();
    Ok((local.to_string(), filters))
}

struct PulledRow<'a> {
    alias: &'a str,
    table: &'a ResultTable,
    row: &'a [Value],
}

impl RowContext for PulledRow<'_> {
    fn value(&self, col: &ColumnRef) -> Option<Value> {
        if !col.alias.eq_ignore_ascii_case(self.alias) {
            return None;
        }
        self.table.column_index(&col.column).map(|i| self.row[i].clone())
    }
}

fn filter_rows(alias: &str, mut table: ResultTable, filters: &[Expr]) -> Result<ResultTable, PortalError> {
    if filters.is_empty() {
        return Ok(table);
    }
    let mut keep = Vec::with_capacity(table.rows.len());
    for row in &table.rows {
        let ctx = PulledRow { alias, table: &table, row };
        let mut ok = true;
        for f in filters {
            ok &= eval_predicate(f, &ctx).map_err(|e| PortalError::Plan(format!("{alias}: {e}")))?;
        }
        keep.push(ok);
    }
    let mut it = keep.into_iter();
    table.rows.retain(|_| it.next().unwrap_or(false));
    Ok(table)
}

/// Candidates from a pulled table, named exactly as the node would name them.
fn candidates(
    step: &skynode::XMatchPlanStep,
    meta: &MemberMeta,
    key: &str,
    ra: &str,
    dec: &str,
    table: ResultTable,
) -> Result<(CandidateIndex, Vec<ColumnInfo>), PortalError> {
    let bad = |m: String| PortalError::member(&meta.archive, NodeError::new(502, "bad_response", m).at(&meta.url));
    let col = |n: &str| table.column_index(n).ok_or_else(|| bad(format!("pulled rows lack column '{n}'")));
    let (k, r, d) = (col(key)?, col(ra)?, col(dec)?);
    let carried: Vec<ColumnInfo> =
        table.columns.iter().map(|c| ColumnInfo { name: format!("{}.{}", step.alias, c.name), ..c.clone() }).collect();
    let mut out = Vec::with_capacity(table.rows.len());
    for row in table.rows {
        let num = |i: usize| row[i].as_f64().ok_or_else(|| bad("non-numeric position".into()));
        let pos = SkyPos::new(num(r)?, num(d)?).map_err(|e| bad(e.to_string()))?.to_unitvec();
        let key = row[k].as_i64().ok_or_else(|| bad("non-integer key".into()))?;
        out.push(Candidate { pos, key, carried: carried.iter().map(|c| c.name.clone()).zip(row).collect() });
    }
    let sigma = ArchiveSigma::new(step.sigma_arcsec).map_err(|e| bad(e.to_string()))?;
    let index = CandidateIndex::new(&step.archive_name, sigma, out).map_err(|e| PortalError::Internal(e.to_string()))?;
    Ok((index, carried))
}

/// Runs the plan's steps in data-flow order, last step first.
fn local_chain(req: &XMatchRequest, inputs: Vec<(CandidateIndex, Vec<ColumnInfo>)>) -> Result<TupleBatch, PortalError> {
    let mut batch: Option<TupleBatch> = None;
    for (k, (index, cols)) in inputs.into_iter().enumerate().rev() {
        let hop = XMatchRequest { plan: req.plan[k..].to_vec(), ..req.clone() };
        let archive = hop.plan[0].archive_name.clone();
        batch = Some(apply_step(&hop, &index, cols, batch).map_err(|e| PortalError::member(&archive, e))?);
    }
    batch.ok_or_else(|| PortalError::Internal("empty plan".into()))
}

/// Final projection onto the selected columns plus the match statistic.
fn project(plan: &ExecutionPlan, batch: TupleBatch, transfer_bytes: u64) -> Result<QueryOutput, PortalError> {
    let members: Vec<Vec<Member>> = batch.tuples.iter().map(|t| t.members.clone()).collect();
    if plan.count_only {
        let result = ResultTable { columns: plan.output.clone(), rows: vec![vec![Value::Int(batch.tuples.len() as i64)]] };
        return Ok(QueryOutput { result, plan: Some(plan.clone()), transfer_bytes, members });
    }
    let mut rows = Vec::with_capacity(batch.tuples.len());
    for t in &batch.tuples {
        let mut row = Vec::with_capacity(plan.output.len());
        for c in &plan.final_select {
            let q = c.qualified();
            let v = t
                .carried
                .get(&q)
                .or_else(|| t.carried.iter().find(|(k, _)| k.eq_ignore_ascii_case(&q)).map(|(_, v)| v))
                .ok_or_else(|| PortalError::Internal(format!("column '{q}' missing from the returned tuples")))?;
            row.push(v.clone());
        }
        row.push(Value::Float(match_statistic(t)));
        rows.push(row);
    }
    let result = ResultTable { columns: plan.output.clone(), rows };
    Ok(QueryOutput { result, plan: Some(plan.clone()), transfer_bytes, members })
}
