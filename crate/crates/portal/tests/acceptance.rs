//! The acceptance gate: one line per criterion, then a single assertion.

use std::collections::BTreeSet;
use std::future::Future;
use std::time::{Duration, Instant};

use cutout::synth::TileSynthConfig;
use portal::demo::{launch, DemoFederation, SAMPLE_SQL, SELECTIVE_SQL};
use portal::{Mode, Portal, QueryOutput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skynode::{NodeClient, NodeState};
use skyquery_core::query::parse;
use skyquery_core::synth::SynthConfig;
use skyquery_core::xmatch::Member;
use skyquery_testkit::checks::{self, Check};
use skyquery_testkit::gen::federated_query;
use skyquery_testkit::oracle::{federated_oracle, key_sets, KeySet};
use skyquery_testkit::{imaging, wire};

const SAMPLE_FIXTURE: &str = include_str!("../../core/tests/fixtures/sample_ast.json");

fn keys(out: &QueryOutput) -> BTreeSet<KeySet> {
    key_sets(out.members.iter().map(Vec::as_slice))
}

fn all(parts: Vec<Check>) -> Check {
    let mut ok = Vec::new();
    for p in parts {
        ok.push(p?);
    }
    Ok(ok.join("; "))
}

async fn sample_end_to_end(fed: &DemoFederation) -> Check {
    let portal = Portal::new(fed.config.clone());
    let sizes: Vec<usize> = fed.catalogs().iter().map(|c| c.tables()[0].len()).collect();
    if sizes.iter().any(|&n| n != 10_000) {
        return Err(format!("expected 10^4 rows per node, have {sizes:?}"));
    }
    let start = Instant::now();
    let out = portal.run(SAMPLE_SQL, Mode::Daisy).await.map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let expected = federated_oracle(&parse(SAMPLE_SQL).map_err(|e| e.to_string())?, &fed.catalogs())?;
    if expected.is_empty() {
        return Err("the oracle returns no tuples, the check would be vacuous".into());
    }
    if keys(&out) != expected {
        return Err(format!("{} tuples vs {} from the oracle", out.result.num_rows(), expected.len()));
    }
    if elapsed > Duration::from_secs(10) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("{} tuples equal the oracle's, {:.0} ms", expected.len(), elapsed.as_secs_f64() * 1e3))
}

async fn randomized_equivalence(fed: &DemoFederation, synth: &SynthConfig, n: usize) -> Check {
    let portal = Portal::new(fed.config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut tuples, mut nonempty) = (0, 0);
    for _ in 0..n {
        let q = federated_query(&mut rng, synth);
        let ast = portal.prepare(&q.sql).map_err(|e| format!("{}: {e}", q.sql))?;
        let expected = federated_oracle(&ast, &fed.catalogs())?;
        let daisy = portal.run_ast(&ast, Mode::Daisy).await.map_err(|e| format!("{}: {e}", q.sql))?;
        let star = portal.run_ast(&ast, Mode::Star).await.map_err(|e| format!("{}: {e}", q.sql))?;
        if keys(&daisy) != expected || keys(&star) != expected {
            return Err(format!(
                "{}: daisy {} star {} oracle {}",
                q.sql,
                daisy.members.len(),
                star.members.len(),
                expected.len()
            ));
        }
        tuples += expected.len();
        nonempty += usize::from(!expected.is_empty());
    }
    Ok(format!("{n} queries ({nonempty} non-empty, {tuples} tuples), daisy = star = oracle"))
}

fn permutations(xs: &[String]) -> Vec<Vec<String>> {
    if xs.len() <= 1 {
        return vec![xs.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..xs.len() {
        let mut rest = xs.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head.clone());
            out.push(p);
        }
    }
    out
}

async fn order_symmetry(fed: &DemoFederation, synth: &SynthConfig, n: usize) -> Check {
    let portal = Portal::new(fed.config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut done, mut tuples) = (0, 0);
    while done < n {
        let q = federated_query(&mut rng, synth);
        if q.mandatory.len() != 3 {
            continue;
        }
        let ast = portal.prepare(&q.sql).map_err(|e| e.to_string())?;
        let mut reference: Option<BTreeSet<Vec<Member>>> = None;
        for order in permutations(&q.mandatory) {
            let got = keys(&portal.run_daisy(&ast, Some(&order)).await.map_err(|e| format!("{}: {e}", q.sql))?);
            match &reference {
                None => reference = Some(got),
                Some(r) if *r != got => return Err(format!("{}: order {order:?} changes the result", q.sql)),
                Some(_) => {}
            }
        }
        tuples += reference.map_or(0, |r| r.len());
        done += 1;
    }
    Ok(format!("{n} three-archive queries x 6 orders identical ({tuples} tuples)"))
}

async fn transfer_saving(fed: &DemoFederation) -> Check {
    let portal = Portal::new(fed.config.clone());
    let mut last: Option<(u64, f64)> = None;
    let mut summary = Vec::new();
    for k in [50, 10, 1] {
        let sql = SELECTIVE_SQL.replace("o.bucket=0", &format!("o.bucket<{k}"));
        let daisy = portal.run(&sql, Mode::Daisy).await.map_err(|e| e.to_string())?;
        let star = portal.run(&sql, Mode::Star).await.map_err(|e| e.to_string())?;
        if keys(&daisy) != keys(&star) {
            return Err(format!("bucket<{k}: modes disagree"));
        }
        let ratio = star.transfer_bytes as f64 / daisy.transfer_bytes as f64;
        if let Some((d, r)) = last {
            if daisy.transfer_bytes > d || ratio < r {
                return Err(format!("bucket<{k}: reduction not monotone ({} bytes, {ratio:.1}x)", daisy.transfer_bytes));
            }
        }
        last = Some((daisy.transfer_bytes, ratio));
        summary.push(format!("{}%: {ratio:.1}x", 2 * k));
    }
    let daisy = portal.run(SELECTIVE_SQL, Mode::Daisy).await.map_err(|e| e.to_string())?;
    let star = portal.run(SELECTIVE_SQL, Mode::Star).await.map_err(|e| e.to_string())?;
    let ratio = star.transfer_bytes as f64 / daisy.transfer_bytes as f64;
    let line = format!("daisy {} B vs star {} B ({ratio:.1}x); {}", daisy.transfer_bytes, star.transfer_bytes, summary.join(", "));
    if daisy.transfer_bytes * 10 > star.transfer_bytes {
        return Err(line);
    }
    Ok(line)
}

async fn metadata(fed: &DemoFederation) -> Check {
    let client = NodeClient::new(Duration::from_secs(30));
    let mut parts = Vec::new();
    for n in &fed.nodes {
        parts.push(wire::metadata_surface(&client, &n.url, &n.state.catalog).await);
    }
    let fixture = skynode::spawn(
        NodeState::new(wire::docsearch_fixture(), false, Duration::from_secs(5)),
        "127.0.0.1:0".parse().expect("literal address"),
    )
    .await
    .map_err(|e| e.to_string())?;
    parts.push(wire::metadata_surface(&client, &fixture.url, &fixture.state.catalog).await);
    parts.push(wire::docsearch_semantics(&client, &fixture.url).await);
    all(parts)
}

fn cutout_imaging() -> Check {
    let set = cutout::synth::generate(&TileSynthConfig::default()).map_err(|e| e.to_string())?;
    all(vec![
        imaging::rendering_properties(&set, 8),
        imaging::north_up(20, 81),
        imaging::overlay_positions(50, 82),
        imaging::single_tile_identity(83),
    ])
}

fn report(lines: &mut Vec<(usize, Check)>, n: usize, name: &str, result: Check) {
    match &result {
        Ok(s) => println!("criterion {n} PASS {name}: {s}"),
        Err(e) => println!("criterion {n} FAIL {name}: {e}"),
    }
    lines.push((n, result));
}

fn block_on<F: Future>(rt: &tokio::runtime::Runtime, f: F) -> F::Output {
    rt.block_on(f)
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let synth = SynthConfig::default();
    let fed = block_on(&rt, launch(&synth, None, true)).unwrap();
    let mut lines = Vec::new();

    report(&mut lines, 1, "sample query end to end", block_on(&rt, sample_end_to_end(&fed)));
    report(&mut lines, 2, "distributed correctness", block_on(&rt, randomized_equivalence(&fed, &synth, 50)));
    report(&mut lines, 3, "match order symmetry", block_on(&rt, order_symmetry(&fed, &synth, 8)));
    report(
        &mut lines,
        4,
        "chi-square identity",
        all(vec![checks::chi2_identity(1000, 4), checks::two_member_closed_form(1000, 5), checks::chi2_special_cases()]),
    );
    let sdss = &fed.node("SDSS").unwrap().state.catalog.tables()[0];
    report(
        &mut lines,
        5,
        "htm correctness",
        all(vec![checks::cone_vs_scan(sdss, 100, 6), checks::cover_soundness(100, 7), checks::roots_partition(100_000, 8)]),
    );
    report(&mut lines, 6, "transfer saving", block_on(&rt, transfer_saving(&fed)));
    report(&mut lines, 7, "metadata surface", block_on(&rt, metadata(&fed)));
    report(&mut lines, 8, "cutout", cutout_imaging());
    report(
        &mut lines,
        9,
        "parser",
        all(vec![
            checks::ast_fixture(SAMPLE_SQL, SAMPLE_FIXTURE),
            checks::parse_render_identity(500, 9),
            checks::parser_error_cases(),
        ]),
    );

    let failed: Vec<usize> = lines.iter().filter(|(_, r)| r.is_err()).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("all {} criteria pass", lines.len());
}
