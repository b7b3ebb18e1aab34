use std::collections::BTreeSet;
use std::time::Duration;

use skynode::{NodeClient, NodeState, QueryRequest, XMatchPlanStep, XMatchRequest};
use skyquery_core::catalog::{default_functions, ArchiveMeta, Catalog, CatalogTable, TableSchema};
use skyquery_core::query::{parse, partition_predicates, render_local_sql, LocalMode, QueryAst};
use skyquery_core::sphere::Vec3;
use skyquery_core::table::Value;
use skyquery_core::xmatch::{weight_of, ArchiveSigma};
use skyquery_testkit::federation::{small_config, Federation};
use skyquery_testkit::oracle::{federated_oracle, key_sets, scan};

fn client() -> NodeClient {
    NodeClient::new(Duration::from_secs(30))
}

/// Chain request for `sql`, calling the aliases in `call_order`.
fn request(fed: &Federation, sql: &str, call_order: &[&str], plan_id: &str) -> XMatchRequest {
    let ast = parse(sql).unwrap();
    let xm = ast.xmatch.clone().unwrap();
    let cross = partition_predicates(&ast).cross.iter().map(ToString::to_string).collect();
    let plan = call_order
        .iter()
        .map(|&alias| {
            let archive = ast.table(alias).unwrap().archive.clone().unwrap();
            let mode = LocalMode::Select { key: "objId".into(), ra: "ra".into(), dec: "dec".into() };
            XMatchPlanStep {
                node_url: fed.url(&archive).to_string(),
                archive_name: archive.clone(),
                alias: alias.to_string(),
                local_sql: render_local_sql(&ast, alias, &mode, &[]).unwrap(),
                sigma_arcsec: fed.member(&archive).catalog().meta.sigma.arcsec(),
                is_dropout: ast.is_dropout(alias),
                theta: xm.threshold,
            }
        })
        .collect();
    XMatchRequest { plan, theta: xm.threshold, cross_predicates: cross, plan_id: Some(plan_id.into()) }
}

async fn small_federation(stats: bool) -> Federation {
    Federation::launch(&small_config(3000), stats).await.unwrap()
}

const SAMPLE: &str = "SELECT o.objId, o.r, o.type, t.objId, t.m_j FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t \
    WHERE XMATCH(o,t)<3.5 AND AREA(181.3,-0.76,6.5) AND o.type=3 AND (o.i - t.m_j)>2";

#[tokio::test]
async fn metadata_endpoints() {
    let fed = small_federation(false).await;
    let c = client();
    let url = fed.url("SDSS");

    let info = c.info(url).await.unwrap();
    assert!(info.rows.iter().any(|r| r[0] == Value::Str("archive".into()) && r[1] == Value::Str("SDSS".into())));
    let schema = c.schema(url).await.unwrap();
    assert_eq!(schema.archive, "SDSS");
    assert_eq!(schema.tables[0].table_name, "PhotoPrimary");
    let tables = c.tables(url).await.unwrap();
    assert_eq!(tables.rows.len(), 1);
    let cols = c.columns(url, "photoprimary").await.unwrap();
    assert!(cols.rows.len() >= 10);
    let fns = c.functions(url).await.unwrap();
    assert_eq!(fns.rows.len(), default_functions().len());

    let e = c.columns(url, "Nope").await.unwrap_err();
    assert_eq!((e.status, e.code()), (404, "unknown_table"));
    assert_eq!(e.hop(), Some(url));

    let hits = c.docsearch(fed.url("FIRST"), "flux").await.unwrap();
    assert!(!hits.rows.is_empty());
    let http = reqwest::Client::new();
    let resp = http.get(format!("{url}/docsearch")).send().await.unwrap();
    assert_eq!(resp.status().as_u16(), 400);
    let body: serde_json::Value = serde_json::from_slice(&resp.bytes().await.unwrap()).unwrap();
    assert_eq!(body["error"]["code"], "missing_parameter");
}

#[tokio::test]
async fn query_endpoint() {
    let fed = small_federation(false).await;
    let c = client();
    let url = fed.url("SDSS");
    let table = fed.member("SDSS").catalog().table("PhotoPrimary").unwrap();

    let sql = "SELECT o.objId FROM PhotoPrimary o WHERE AREA(181.3,-0.76,6.5)";
    let got = c.query(url, &QueryRequest { sql: sql.into(), plan_id: None }).await.unwrap();
    let ast = parse(sql).unwrap();
    let want: Vec<Value> = scan(table, &ast, &[]).unwrap().into_iter().map(|r| Value::Int(table.key(r))).collect();
    assert!(!want.is_empty());
    let mut ids: Vec<Value> = got.body.rows.into_iter().map(|mut r| r.remove(0)).collect();
    ids.sort_by_key(|v| v.as_i64());
    assert_eq!(ids, want);
    assert_eq!(got.request_bytes as usize, serde_json::to_vec(&QueryRequest { sql: sql.into(), plan_id: None }).unwrap().len());

    let count_sql = "SELECT COUNT(*) FROM PhotoPrimary o WHERE o.type=3 AND AREA(181.3,-0.76,6.5)";
    let got = c.query(url, &QueryRequest { sql: count_sql.into(), plan_id: None }).await.unwrap();
    let n = scan(table, &parse(count_sql).unwrap(), &parse(count_sql).unwrap().predicates).unwrap().len();
    assert_eq!(got.body.rows, vec![vec![Value::Int(n as i64)]]);

    let e = c.query(url, &QueryRequest { sql: "SELECT o.objId FROM PhotoPrimary o WHERE".into(), plan_id: None }).await.unwrap_err();
    assert_eq!((e.status, e.code()), (400, "parse_error"));
    assert!(e.detail.message.contains("position 40"), "{}", e.detail.message);
    let e = c.query(url, &QueryRequest { sql: "SELECT o.nope FROM PhotoPrimary o".into(), plan_id: None }).await.unwrap_err();
    assert_eq!(e.code(), "unknown_column");
}

fn tiny_catalog(archive: &str, sigma: f64, rows: Vec<(i64, f64, f64, i64)>) -> Catalog {
    let schema = TableSchema::from_toml(
        r#"
table_name = "Objects"
description = "tiny"
key_column = "id"
ra_column = "ra"
dec_column = "dec"
[[columns]]
name = "id"
type = "int64"
[[columns]]
name = "ra"
type = "float64"
[[columns]]
name = "dec"
type = "float64"
[[columns]]
name = "flag"
type = "int64"
"#,
    )
    .unwrap();
    let rows = rows.into_iter().map(|(k, ra, dec, f)| vec![Value::Int(k), Value::Float(ra), Value::Float(dec), Value::Int(f)]).collect();
    let table = CatalogTable::from_rows(schema, rows, 14).unwrap();
    let meta = ArchiveMeta {
        archive_name: archive.into(),
        sky_coverage: vec![],
        wavelength_coverage: String::new(),
        sigma: ArchiveSigma::new(sigma).unwrap(),
        functions: default_functions(),
    };
    Catalog::new(meta, vec![table]).unwrap()
}

async fn spawn(c: Catalog) -> skynode::RunningNode {
    skynode::spawn(NodeState::new(c, true, Duration::from_secs(5)), "127.0.0.1:0".parse().unwrap()).await.unwrap()
}

fn step(node: &skynode::RunningNode, archive: &str, alias: &str, sigma: f64, dropout: bool) -> XMatchPlanStep {
    XMatchPlanStep {
        node_url: node.url.clone(),
        archive_name: archive.into(),
        alias: alias.into(),
        local_sql: format!("SELECT {alias}.id, {alias}.ra, {alias}.dec FROM Objects {alias} WHERE {alias}.flag=1 AND AREA(10,10,1)"),
        sigma_arcsec: sigma,
        is_dropout: dropout,
        theta: 3.5,
    }
}

#[tokio::test]
async fn two_node_chain_and_dropout() {
    let off = 0.2 / 3600.0;
    let a = spawn(tiny_catalog("A", 0.3, vec![(1, 10.0, 10.0, 1), (2, 10.01, 10.0, 0)])).await;
    let b = spawn(tiny_catalog("B", 0.3, vec![(7, 10.0 + off, 10.0, 1), (8, 10.01, 10.0, 1)])).await;
    let p = spawn(tiny_catalog("P", 0.3, vec![(9, 10.0, 10.0 + off, 1)])).await;
    let c = client();

    let req = XMatchRequest {
        plan: vec![step(&a, "A", "a", 0.3, false), step(&b, "B", "b", 0.3, false)],
        theta: 3.5,
        cross_predicates: vec![],
        plan_id: Some("two".into()),
    };
    let reply = c.xmatch(&a.url, &req).await.unwrap();
    let got = key_sets(reply.batch.tuples.iter().map(|t| t.members.as_slice()));
    assert_eq!(got.len(), 1);
    let keys: BTreeSet<i64> = got.iter().next().unwrap().iter().map(|m| m.key).collect();
    assert_eq!(keys, BTreeSet::from([1, 7]));
    assert!(reply.batch.carried.iter().any(|c| c.name == "b.id"));

    let mut vetoed = req.clone();
    vetoed.plan.insert(0, step(&p, "P", "p", 0.3, true));
    let reply = c.xmatch(&p.url, &vetoed).await.unwrap();
    assert!(reply.batch.tuples.is_empty());

    let far = spawn(tiny_catalog("P", 0.3, vec![(9, 10.0, 10.0 + 30.0 * off, 1)])).await;
    vetoed.plan[0] = step(&far, "P", "p", 0.3, true);
    let reply = c.xmatch(&far.url, &vetoed).await.unwrap();
    assert_eq!(reply.batch.tuples.len(), 1);
    assert!(!reply.batch.carried.iter().any(|c| c.name.starts_with("p.")));

    let mut wrong = req.clone();
    wrong.plan.swap(0, 1);
    let e = c.xmatch(&a.url, &wrong).await.unwrap_err();
    assert_eq!(e.code(), "plan_mismatch");
    assert_eq!(e.hop(), Some(b.url.as_str()));
}

fn sigma_of(fed: &Federation, archive: &str) -> ArchiveSigma {
    fed.member(archive).catalog().meta.sigma
}

#[tokio::test]
async fn three_node_chain_matches_oracle() {
    let fed = small_federation(true).await;
    let sql = "SELECT o.objId, t.objId, p.objId FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t, FIRST:Sources p \
        WHERE XMATCH(o,t,p)<4 AND AREA(181.3,-0.76,12) AND (o.r - t.m_j)>0.5";
    let ast: QueryAst = parse(sql).unwrap();
    let want = federated_oracle(&ast, &fed.catalogs()).unwrap();
    assert!(want.len() > 5, "{}", want.len());
    let c = client();
    let req = request(&fed, sql, &["o", "t", "p"], "three");
    let first = c.xmatch(fed.url("SDSS"), &req).await.unwrap();
    let got = key_sets(first.batch.tuples.iter().map(|t| t.members.as_slice()));
    assert_eq!(got, want);

    // identical calls agree
    let again = c.xmatch(fed.url("SDSS"), &req).await.unwrap();
    assert_eq!(key_sets(again.batch.tuples.iter().map(|t| t.members.as_slice())), want);

    // cumulative sums recomputed from member positions
    for t in &first.batch.tuples {
        let mut a_vec = Vec3::ZERO;
        let mut a = 0.0;
        for m in &t.members {
            let cat = fed.member(&m.archive).catalog();
            let table = &cat.tables()[0];
            let row = (0..table.len()).find(|&r| table.key(r) == m.key).unwrap();
            let w = weight_of(sigma_of(&fed, &m.archive));
            a_vec += table.position(row).as_vec() * w;
            a += w;
        }
        assert!(((t.a_weight - a) / a).abs() < 1e-9);
        assert!((t.a_vec - a_vec).norm() / a < 1e-9);
    }

    // one log entry per hop, and the chain header sums them
    let mut total = 0;
    for m in &fed.members {
        let hops: Vec<_> = m.node.stats().unwrap().for_plan("three").into_iter().filter(|e| e.endpoint == "/xmatch").collect();
        assert_eq!(hops.len(), 2, "{}", m.archive);
        total += hops[0].request_bytes + hops[0].response_bytes;
    }
    assert_eq!(first.chain_bytes, total);
    let over_wire = c.stats(fed.url("FIRST")).await.unwrap();
    assert!(over_wire.iter().any(|e| e.plan_id.as_deref() == Some("three")));
}

#[tokio::test]
async fn dropout_chain_matches_oracle() {
    let fed = small_federation(false).await;
    let sql = "SELECT o.objId, t.objId FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t, FIRST:Sources p \
        WHERE XMATCH(o,t,!p)<3 AND AREA(181.5,-0.9,10) AND o.type=6";
    let ast = parse(sql).unwrap();
    let want = federated_oracle(&ast, &fed.catalogs()).unwrap();
    let mut with_p = ast.clone();
    with_p.xmatch.as_mut().unwrap().dropouts.clear();
    let without_veto = federated_oracle(&with_p, &fed.catalogs()).unwrap();
    assert!(want.len() < without_veto.len(), "{} {}", want.len(), without_veto.len());
    let req = request(&fed, sql, &["p", "t", "o"], "drop");
    let got = client().xmatch(fed.url("FIRST"), &req).await.unwrap();
    assert_eq!(key_sets(got.batch.tuples.iter().map(|t| t.members.as_slice())), want);
}

#[tokio::test]
async fn errors_name_the_failing_hop() {
    let fed = small_federation(false).await;
    let c = client();
    let mut req = request(&fed, SAMPLE, &["o", "t"], "err");
    let dead = "http://127.0.0.1:9";
    req.plan[1].node_url = dead.into();
    let e = c.xmatch(fed.url("SDSS"), &req).await.unwrap_err();
    assert_eq!((e.status, e.code(), e.hop()), (502, "unreachable", Some(dead)));

    let mut req = request(&fed, SAMPLE, &["o", "t"], "err");
    req.plan[1].local_sql = "SELECT t.objId, t.ra, t.dec FROM PhotoPrimary t WHERE t.bogus>1".into();
    let e = c.xmatch(fed.url("SDSS"), &req).await.unwrap_err();
    assert_eq!(e.code(), "unknown_column");
    assert_eq!(e.hop(), Some(fed.url("TWOMASS")));

    let mut req = request(&fed, SAMPLE, &["o", "t"], "err");
    req.plan[0].theta = 2.0;
    let e = c.xmatch(fed.url("SDSS"), &req).await.unwrap_err();
    assert_eq!(e.code(), "plan_mismatch");

    let req = XMatchRequest { plan: vec![], theta: 3.0, cross_predicates: vec![], plan_id: None };
    let e = c.xmatch(fed.url("SDSS"), &req).await.unwrap_err();
    assert_eq!(e.status, 400);

    let mut req = request(&fed, SAMPLE, &["o", "t"], "err");
    req.cross_predicates = vec!["(o.i - t.m_j >".into()];
    let e = c.xmatch(fed.url("SDSS"), &req).await.unwrap_err();
    assert_eq!(e.code(), "parse_error");
}

#[tokio::test]
async fn sample_chain_with_cross_predicate() {
    let fed = small_federation(true).await;
    let ast = parse(SAMPLE).unwrap();
    let want = federated_oracle(&ast, &fed.catalogs()).unwrap();
    let c = client();
    for order in [["o", "t"], ["t", "o"]] {
        let req = request(&fed, SAMPLE, &order, "sample");
        let url = fed.url(ast.table(order[0]).unwrap().archive.as_deref().unwrap()).to_string();
        let got = c.xmatch(&url, &req).await.unwrap();
        assert_eq!(key_sets(got.batch.tuples.iter().map(|t| t.members.as_slice())), want);
        for t in &got.batch.tuples {
            let i = t.carried["o.i"].as_f64().unwrap();
            let j = t.carried["t.m_j"].as_f64().unwrap();
            assert!(i - j > 2.0);
        }
    }
}
