use proptest::prelude::*;

use super::*;
use crate::sphere::SkyPos;
use crate::table::Value;

pub(crate) const SAMPLE: &str = "SELECT o.objId, o.r, o.type, t.objId, t.m_j
FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t
WHERE XMATCH(o,t)<3.5 AND AREA(181.3,-0.76,6.5)
AND o.type=3 and (o.i - t.m_j)>2";

fn sample_expected() -> QueryAst {
    let cr = ColumnRef::new;
    QueryAst {
        select: Projection::Columns(vec![
            cr("o", "objId"),
            cr("o", "r"),
            cr("o", "type"),
            cr("t", "objId"),
            cr("t", "m_j"),
        ]),
        tables: vec![
            TableRef { archive: Some("SDSS".into()), table: "PhotoPrimary".into(), alias: "o".into() },
            TableRef { archive: Some("TWOMASS".into()), table: "PhotoPrimary".into(), alias: "t".into() },
        ],
        area: Some(AreaSpec { center: SkyPos::new(181.3, -0.76).unwrap(), radius_arcmin: 6.5 }),
        xmatch: Some(XMatchSpec { mandatory: vec!["o".into(), "t".into()], dropouts: vec![], threshold: 3.5 }),
        predicates: vec![
            Expr::binary(Expr::column("o", "type"), BinaryOp::Eq, Expr::int(3)),
            Expr::binary(
                Expr::nested(Expr::binary(Expr::column("o", "i"), BinaryOp::Sub, Expr::column("t", "m_j"))),
                BinaryOp::Gt,
                Expr::int(2),
            ),
        ],
    }
}

#[test]
fn sample_ast() {
    let ast = parse(SAMPLE).unwrap();
    assert_eq!(ast, sample_expected());
    let json = serde_json::to_string_pretty(&ast).unwrap();
    assert_eq!(json, include_str!("../../tests/fixtures/sample_ast.json").trim_end());
}

#[test]
fn sample_render_round_trip() {
    let ast = parse(SAMPLE).unwrap();
    let text = ast.to_string();
    assert_eq!(
        text,
        "SELECT o.objId, o.r, o.type, t.objId, t.m_j FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t \
         WHERE XMATCH(o,t)<3.5 AND o.type=3 AND (o.i - t.m_j)>2 AND AREA(181.3,-0.76,6.5)"
    );
    assert_eq!(parse(&text).unwrap(), ast);
}

#[test]
fn dropout_clause() {
    let ast = parse(
        "SELECT o.objId FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t, FIRST:Sources p \
         WHERE XMATCH(o,t,!p)<3.5 AND AREA(181.3,-0.76,6.5)",
    )
    .unwrap();
    let x = ast.xmatch.unwrap();
    assert_eq!(x.mandatory, vec!["o", "t"]);
    assert_eq!(x.dropouts, vec!["p"]);
    assert_eq!(x.threshold, 3.5);
}

#[test]
fn keywords_case_insensitive() {
    let ast = parse("select o.A from X:T o, Y:U t where xmatch(o,t)<2 and area(10,20,1) and o.A>1").unwrap();
    assert_eq!(ast.select_columns()[0].column, "A");
    assert!(ast.area.is_some() && ast.xmatch.is_some());
}

#[test]
fn node_local_queries() {
    let ast = parse("SELECT COUNT(*) FROM PhotoPrimary o WHERE o.type=3 AND AREA(181.3,-0.76,6.5)").unwrap();
    assert_eq!(ast.select, Projection::CountStar);
    assert_eq!(ast.tables[0].archive, None);
    let ast = parse("SELECT o.objId FROM PhotoPrimary o").unwrap();
    assert!(ast.predicates.is_empty() && ast.area.is_none());
}

fn err(src: &str) -> QueryError {
    parse(src).expect_err(src)
}

#[test]
fn error_cases_are_structured() {
    let e = err("SELECT o.a FROM X:T o WHERE XMATCH(o)<1 AND AREA(0,0,1)");
    assert_eq!(e.kind, QueryErrorKind::Semantic);
    assert_eq!(e.position, Some(28));
    assert!(e.message.contains("at least 2"));

    let e = err("SELECT z.a FROM X:T o");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(7)));
    assert!(e.message.contains("unknown alias"));

    let e = err("SELECT o.a FROM X:T o, Y:U o");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(23)));

    let e = err("SELECT o.a FROM X:T o, X:U t");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(23)));

    let e = err("SELECT o.a FROM X:T o, Y:U t WHERE o.a=1 OR XMATCH(o,t)<3");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(44)));

    let e = err("SELECT o.a FROM X:T o WHERE NOT AREA(1,2,3)");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(32)));

    let e = err("SELECT o.a FROM X:T o WHERE AREA(1,2,3) AND AREA(1,2,3)");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(44)));

    let e = err("SELECT o.a FROM X:T o, Y:U t WHERE XMATCH(o,t)<3 AND XMATCH(o,t)<2");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(53)));

    let e = err("SELECT o.a FROM X:T o WHERE AREA(1,2,0)");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(37)));

    let e = err("SELECT o.a FROM X:T o WHERE AREA(1,95,1)");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(28)));

    let e = err("SELECT o.a FROM X:T o WHERE o.a = 'x");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Lexical, Some(34)));

    let e = err("SELECT o.a FROM X:T o WHERE o.a # 1");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Lexical, Some(32)));

    let e = err("SELECT o.a FROM X:T o WHERE (o.a > 1");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Syntax, Some(36)));
    assert_eq!(e.expected.as_deref(), Some("')'"));
    assert_eq!(e.found.as_deref(), Some("end of input"));

    let e = err("SELECT o.a X:T o");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Syntax, Some(11)));
    assert_eq!(e.expected.as_deref(), Some("FROM"));

    let e = err("SELECT o.a FROM X:T o WHERE o.a < 1 < 2");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Syntax, Some(36)));

    let e = err("SELECT o.a FROM X:T select");
    assert_eq!(e.kind, QueryErrorKind::Syntax);

    let e = err("SELECT o.a FROM X:T o, Y:U t WHERE XMATCH(o,t,!t)<3");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(47)));

    let e = err("SELECT o.a FROM X:T o, Y:U t WHERE XMATCH(o,t)<0");
    assert_eq!((e.kind, e.position), (QueryErrorKind::Semantic, Some(47)));

    // errors serialize with their position for service responses
    let v = serde_json::to_value(&e).unwrap();
    assert_eq!(v["position"], 47);
    assert_eq!(v["kind"], "semantic");
}

#[test]
fn standalone_predicates() {
    let p = partition_predicates(&parse(SAMPLE).unwrap());
    assert_eq!(parse_predicate(&p.cross[0].to_string()).unwrap(), p.cross[0]);
    let e = parse_predicate("o.a>1 OR NOT t.b=2").unwrap();
    assert_eq!(e.to_string(), "o.a>1 OR NOT t.b=2");
    assert!(parse_predicate("o.a>1 )").is_err());
    assert!(parse_predicate("AREA(1,2,3)").is_err());
}

#[test]
fn partition_sample() {
    let p = partition_predicates(&parse(SAMPLE).unwrap());
    assert_eq!(p.local_for("o"), &[Expr::binary(Expr::column("o", "type"), BinaryOp::Eq, Expr::int(3))]);
    assert!(p.local_for("t").is_empty());
    assert_eq!(p.cross.len(), 1);
    assert_eq!(p.cross[0].to_string(), "(o.i - t.m_j)>2");
}

#[test]
fn partition_three_way_and_constants() {
    let ast = parse("SELECT o.a FROM X:T o, Y:U t WHERE o.r>20 AND t.m_j<15 AND o.r - t.m_j>2 AND 1=1").unwrap();
    let p = partition_predicates(&ast);
    let strs = |v: &[Expr]| v.iter().map(ToString::to_string).collect::<Vec<_>>();
    assert_eq!(strs(p.local_for("o")), vec!["o.r>20", "1=1"]);
    assert_eq!(strs(p.local_for("t")), vec!["t.m_j<15", "1=1"]);
    assert_eq!(strs(&p.cross), vec!["o.r - t.m_j>2"]);

    let empty = partition_predicates(&parse("SELECT o.a FROM X:T o, Y:U t WHERE AREA(1,1,1)").unwrap());
    assert!(empty.cross.is_empty() && empty.local.values().all(Vec::is_empty));
}

#[test]
fn local_sql_for_sample() {
    let ast = parse(SAMPLE).unwrap();
    assert_eq!(
        render_local_sql(&ast, "o", &LocalMode::Count, &[]).unwrap(),
        "SELECT COUNT(*) FROM PhotoPrimary o WHERE o.type=3 AND AREA(181.3,-0.76,6.5)"
    );
    let mode = LocalMode::Select { key: "objId".into(), ra: "ra".into(), dec: "dec".into() };
    let sql = render_local_sql(&ast, "o", &mode, &[]).unwrap();
    assert_eq!(
        sql,
        "SELECT o.objId, o.r, o.type, o.ra, o.dec, o.i FROM PhotoPrimary o WHERE o.type=3 AND AREA(181.3,-0.76,6.5)"
    );
    assert_eq!(parse(&sql).unwrap(), local_ast(&ast, "o", &mode, &[]).unwrap());

    let t = render_local_sql(&ast, "t", &mode, &["extra".into(), "objid".into()]).unwrap();
    assert_eq!(t, "SELECT t.objId, t.m_j, t.ra, t.dec, t.extra FROM PhotoPrimary t WHERE AREA(181.3,-0.76,6.5)");
    assert!(render_local_sql(&ast, "zz", &mode, &[]).is_err());
}

#[test]
fn needed_columns_cover_select_and_predicates() {
    let need = needed_columns(&parse(SAMPLE).unwrap());
    let o: Vec<_> = need["o"].iter().cloned().collect();
    assert_eq!(o, vec!["i", "objId", "r", "type"]);
    let t: Vec<_> = need["t"].iter().cloned().collect();
    assert_eq!(t, vec!["m_j", "objId"]);
}

#[test]
fn hand_built_or_root_stays_one_conjunct() {
    let mut ast = parse("SELECT o.a FROM X:T o WHERE o.a=1 OR o.a=2").unwrap();
    assert_eq!(ast.to_string(), "SELECT o.a FROM X:T o WHERE o.a=1 OR o.a=2");
    ast.area = Some(AreaSpec { center: SkyPos::new(1.0, 2.0).unwrap(), radius_arcmin: 3.0 });
    let re = parse(&ast.to_string()).unwrap();
    assert_eq!(re.predicates, vec![Expr::nested(ast.predicates[0].clone())]);
}

// ---- generated ASTs ----

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => op.precedence(),
        Expr::Unary { op: UnaryOp::Not, .. } => NOT_PRECEDENCE,
        Expr::Unary { op: UnaryOp::Neg, .. } => NEG_PRECEDENCE,
        _ => 8,
    }
}

fn wrap_if(e: Expr, cond: bool) -> Expr {
    if cond {
        Expr::nested(e)
    } else {
        e
    }
}

/// Inserts parentheses wherever printing would otherwise change the tree.
pub(crate) fn parenthesize(e: Expr) -> Expr {
    match e {
        Expr::Binary { left, op, right } => {
            let (l, r) = (parenthesize(*left), parenthesize(*right));
            let p = op.precedence();
            let (wl, wr) = if op.is_comparison() {
                (prec(&l) <= p, prec(&r) <= p)
            } else {
                (prec(&l) < p, prec(&r) <= p)
            };
            let (l, r) = (wrap_if(l, wl), wrap_if(r, wr));
            Expr::binary(l, op, r)
        }
        Expr::Unary { op: UnaryOp::Not, expr } => {
            let c = parenthesize(*expr);
            let w = prec(&c) < NOT_PRECEDENCE;
            Expr::Unary { op: UnaryOp::Not, expr: Box::new(wrap_if(c, w)) }
        }
        Expr::Unary { op: UnaryOp::Neg, expr } => {
            let c = parenthesize(*expr);
            let w = !matches!(c, Expr::Column(_) | Expr::Nested(_));
            Expr::Unary { op: UnaryOp::Neg, expr: Box::new(wrap_if(c, w)) }
        }
        Expr::Nested(e) => Expr::nested(parenthesize(*e)),
        leaf => leaf,
    }
}

const BIN_OPS: [BinaryOp; 12] = [
    BinaryOp::Add,
    BinaryOp::Sub,
    BinaryOp::Mul,
    BinaryOp::Div,
    BinaryOp::Eq,
    BinaryOp::NotEq,
    BinaryOp::Lt,
    BinaryOp::LtEq,
    BinaryOp::Gt,
    BinaryOp::GtEq,
    BinaryOp::And,
    BinaryOp::Or,
];

fn arb_literal() -> impl Strategy<Value = Literal> {
    prop_oneof![
        (-1_000_000_000_000i64..1_000_000_000_000).prop_map(Literal::Int),
        prop_oneof![-1e6..1e6f64, -1e300..1e300f64, Just(1e-7), Just(0.5)].prop_map(Literal::Float),
        "[a-zA-Z' _%]{0,8}".prop_map(Literal::Str),
    ]
}

fn arb_expr(aliases: Vec<String>) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (prop::sample::select(aliases), "[a-zA-Z_][a-zA-Z0-9_]{0,6}").prop_map(|(a, c)| Expr::column(&a, &c)),
        arb_literal().prop_map(Expr::Literal),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), prop::sample::select(BIN_OPS.to_vec()), inner.clone())
                .prop_map(|(l, op, r)| Expr::binary(l, op, r)),
            (inner.clone(), any::<bool>()).prop_map(|(e, not)| Expr::Unary {
                op: if not { UnaryOp::Not } else { UnaryOp::Neg },
                expr: Box::new(e),
            }),
            inner.prop_map(Expr::nested),
        ]
    })
}

pub(crate) fn arb_query() -> impl Strategy<Value = QueryAst> {
    let names = ["o", "t", "p", "gal", "x_1"];
    let archives = ["SDSS", "TWOMASS", "FIRST", "GALEX", "rosat"];
    (1usize..=3, any::<bool>())
        .prop_flat_map(move |(n, qualified)| {
            let aliases: Vec<String> = names[..n].iter().map(|s| s.to_string()).collect();
            let tables: Vec<TableRef> = (0..n)
                .map(|i| TableRef {
                    archive: qualified.then(|| archives[i].to_string()),
                    table: ["PhotoPrimary", "Sources", "psc"][i].to_string(),
                    alias: aliases[i].clone(),
                })
                .collect();
            let select = prop_oneof![
                Just(Projection::CountStar),
                prop::collection::vec(
                    (prop::sample::select(aliases.clone()), "[a-zA-Z_][a-zA-Z0-9_]{0,6}"),
                    1..5
                )
                .prop_map(|v| Projection::Columns(v.into_iter().map(|(a, c)| ColumnRef::new(a, c)).collect())),
            ];
            let area = prop::option::of((0.0..360.0f64, -90.0..=90.0f64, 1e-3..=10800.0f64).prop_map(
                |(ra, dec, r)| AreaSpec { center: SkyPos::new(ra, dec).unwrap(), radius_arcmin: r },
            ));
            let xmatch = if n >= 2 {
                (any::<bool>(), 1e-3..100.0f64, any::<bool>())
                    .prop_map(move |(present, threshold, drop_last)| {
                        present.then(|| {
                            let mut mandatory: Vec<String> = names[..n].iter().map(|s| s.to_string()).collect();
                            let mut dropouts = Vec::new();
                            if drop_last && n == 3 {
                                dropouts.push(mandatory.pop().unwrap());
                            }
                            XMatchSpec { mandatory, dropouts, threshold }
                        })
                    })
                    .boxed()
            } else {
                Just(None).boxed()
            };
            let preds = prop::collection::vec(arb_expr(aliases.clone()), 0..4);
            (Just(tables), select, area, xmatch, preds)
        })
        .prop_map(|(tables, select, area, xmatch, preds)| {
            let predicates = preds
                .into_iter()
                .map(|p| {
                    let p = parenthesize(p);
                    let w = matches!(p, Expr::Binary { op: BinaryOp::And | BinaryOp::Or, .. });
                    wrap_if(p, w)
                })
                .collect();
            QueryAst { select, tables, area, xmatch, predicates }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn parse_render_identity(ast in arb_query()) {
        let text = ast.to_string();
        let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{e}: {text}")))?;
        prop_assert_eq!(back, ast);
    }
}

// ---- partition oracle ----

struct CrossRow<'a> {
    o: &'a [i64; 2],
    t: &'a [i64; 2],
}

impl RowContext for CrossRow<'_> {
    fn value(&self, col: &ColumnRef) -> Option<Value> {
        let row = match col.alias.as_str() {
            "o" => self.o,
            "t" => self.t,
            _ => return None,
        };
        match col.column.as_str() {
            "a" => Some(Value::Int(row[0])),
            "b" => Some(Value::Int(row[1])),
            _ => None,
        }
    }
}

fn arb_numeric(depth: u32) -> BoxedStrategy<Expr> {
    let leaf = prop_oneof![
        (prop::sample::select(vec!["o", "t"]), prop::sample::select(vec!["a", "b"]))
            .prop_map(|(al, c)| Expr::column(al, c)),
        (-5i64..5).prop_map(Expr::int),
    ];
    if depth == 0 {
        return leaf.boxed();
    }
    prop_oneof![
        leaf,
        (arb_numeric(depth - 1), prop::sample::select(vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul]), arb_numeric(depth - 1))
            .prop_map(|(l, op, r)| Expr::binary(l, op, r)),
    ]
    .boxed()
}

fn arb_bool(depth: u32) -> BoxedStrategy<Expr> {
    let cmp = (
        arb_numeric(1),
        prop::sample::select(vec![BinaryOp::Lt, BinaryOp::GtEq, BinaryOp::Eq, BinaryOp::NotEq]),
        arb_numeric(1),
    )
        .prop_map(|(l, op, r)| Expr::binary(l, op, r));
    if depth == 0 {
        return cmp.boxed();
    }
    prop_oneof![
        2 => cmp,
        1 => (arb_bool(depth - 1), prop::sample::select(vec![BinaryOp::And, BinaryOp::Or]), arb_bool(depth - 1))
            .prop_map(|(l, op, r)| Expr::nested(Expr::binary(l, op, r))),
        1 => arb_bool(depth - 1).prop_map(|e| Expr::Unary { op: UnaryOp::Not, expr: Box::new(e) }),
    ]
    .boxed()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn partition_preserves_semantics(
        preds in prop::collection::vec(arb_bool(2), 1..5),
        o_rows in prop::collection::vec([-3i64..3, -3i64..3], 1..6),
        t_rows in prop::collection::vec([-3i64..3, -3i64..3], 1..6),
    ) {
        let predicates: Vec<Expr> = preds.into_iter().map(parenthesize).collect();
        let ast = QueryAst {
            select: Projection::CountStar,
            tables: vec![
                TableRef { archive: Some("A".into()), table: "T".into(), alias: "o".into() },
                TableRef { archive: Some("B".into()), table: "T".into(), alias: "t".into() },
            ],
            area: None,
            xmatch: None,
            predicates,
        };
        let ast = parse(&ast.to_string()).unwrap();
        let part = partition_predicates(&ast);

        // every conjunct lands in exactly one place (constants in every local list)
        for p in &ast.predicates {
            let n_local = part.local.values().filter(|l| l.contains(p)).count();
            let n_cross = part.cross.iter().filter(|c| *c == p).count();
            let aliases = p.referenced_aliases().len();
            match aliases {
                0 => prop_assert_eq!((n_local, n_cross), (2, 0)),
                1 => prop_assert_eq!((n_local, n_cross), (1, 0)),
                _ => prop_assert_eq!((n_local, n_cross), (0, 1)),
            }
        }

        let all = |e: &[Expr], row: &CrossRow| e.iter().all(|p| eval_predicate(p, row).unwrap());
        let mut direct = Vec::new();
        for (i, o) in o_rows.iter().enumerate() {
            for (j, t) in t_rows.iter().enumerate() {
                if all(&ast.predicates, &CrossRow { o, t }) {
                    direct.push((i, j));
                }
            }
        }
        // local filters first, each evaluated with a dummy row for the other alias
        let dummy = [0i64, 0];
        let o_keep: Vec<usize> = (0..o_rows.len())
            .filter(|&i| all(part.local_for("o"), &CrossRow { o: &o_rows[i], t: &dummy }))
            .collect();
        let t_keep: Vec<usize> = (0..t_rows.len())
            .filter(|&j| all(part.local_for("t"), &CrossRow { o: &dummy, t: &t_rows[j] }))
            .collect();
        let mut staged = Vec::new();
        for &i in &o_keep {
            for &j in &t_keep {
                if all(&part.cross, &CrossRow { o: &o_rows[i], t: &t_rows[j] }) {
                    staged.push((i, j));
                }
            }
        }
        prop_assert_eq!(direct, staged);
    }
}
