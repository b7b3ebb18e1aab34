//! Checks that talk to running nodes.

use std::collections::BTreeSet;

use skynode::NodeClient;
use skyquery_core::catalog::{ArchiveMeta, Catalog, CatalogTable, FunctionInfo, TableSchema};
use skyquery_core::table::{ResultTable, Value};
use skyquery_core::xmatch::ArchiveSigma;

use crate::checks::Check;

fn same(what: &str, wire: &ResultTable, local: &ResultTable) -> Result<(), String> {
    if wire.rows.iter().any(|r| r.len() != wire.columns.len()) {
        return Err(format!("{what}: ragged rows"));
    }
    if wire != local {
        return Err(format!("{what}: document differs from the catalog's own"));
    }
    Ok(())
}

/// All six metadata functions over the wire, each compared with the
/// document the catalog produces in process.
pub async fn metadata_surface(client: &NodeClient, url: &str, catalog: &Catalog) -> Check {
    same("/info", &client.info(url).await.map_err(e("/info"))?, &catalog.info())?;
    let schema = client.schema(url).await.map_err(e("/schema"))?;
    if schema != catalog.schema_document() {
        return Err("/schema: document differs".into());
    }
    for t in &schema.tables {
        TableSchema::from_toml(&t.to_toml()).map_err(|err| format!("/schema: {} does not validate: {err}", t.table_name))?;
    }
    same("/tables", &client.tables(url).await.map_err(e("/tables"))?, &catalog.tables_doc())?;
    for t in &schema.tables {
        let wire = client.columns(url, &t.table_name).await.map_err(e("/columns"))?;
        same("/columns", &wire, &catalog.columns_doc(&t.table_name).map_err(|err| err.to_string())?)?;
        if wire.num_rows() != t.columns.len() {
            return Err(format!("/columns: {} rows for {} columns", wire.num_rows(), t.columns.len()));
        }
    }
    same("/functions", &client.functions(url).await.map_err(e("/functions"))?, &catalog.functions_doc())?;
    for key in ["mag", "DEG", "identifier", "zzzz"] {
        same("/docsearch", &client.docsearch(url, key).await.map_err(e("/docsearch"))?, &catalog.docsearch(key))?;
    }
    Ok(format!("{} over {} table(s)", catalog.meta.archive_name, schema.tables.len()))
}

fn e(what: &'static str) -> impl Fn(skynode::NodeError) -> String {
    move |err| format!("{what}: {err}")
}

pub fn docsearch_fixture() -> Catalog {
    let schema = TableSchema::from_toml(
        r#"
table_name = "Galaxies"
description = "Extended sources from the deep field"
key_column = "gid"
ra_column = "ra"
dec_column = "dec"
[[columns]]
name = "gid"
type = "int64"
description = "unique galaxy identifier"
[[columns]]
name = "ra"
type = "float64"
unit = "deg"
description = "right ascension J2000"
[[columns]]
name = "dec"
type = "float64"
unit = "deg"
description = "declination J2000"
[[columns]]
name = "mag_r"
type = "float64"
unit = "mag"
description = "r-band model Magnitude"
[[columns]]
name = "z_phot"
type = "float64"
description = "photometric redshift"
[[columns]]
name = "morph"
type = "string"
description = "morphological class such as Spiral"
"#,
    )
    .expect("fixture schema");
    let row = vec![Value::Int(1), Value::Float(10.0), Value::Float(-5.0), Value::Float(20.5), Value::Float(0.3), Value::Str("E".into())];
    let table = CatalogTable::from_rows(schema, vec![row], 14).expect("fixture row");
    let meta = ArchiveMeta {
        archive_name: "DEEP".into(),
        sky_coverage: vec![],
        wavelength_coverage: "optical".into(),
        sigma: ArchiveSigma::new(0.2).expect("valid sigma"),
        functions: vec![FunctionInfo {
            name: "fGetNearby".into(),
            params: "ra, dec, r".into(),
            description: "objects within a radius of a point".into(),
        }],
    };
    Catalog::new(meta, vec![table]).expect("fixture catalog")
}

/// Case-insensitive substring search over the fixture served at `url`.
pub async fn docsearch_semantics(client: &NodeClient, url: &str) -> Check {
    let cases: [(&str, &[(&str, &str)]); 8] = [
        ("MAG", &[("column", "mag_r")]),
        ("deg", &[("column", "ra"), ("column", "dec")]),
        ("j2000", &[("column", "ra"), ("column", "dec")]),
        ("galax", &[("table", "Galaxies"), ("column", "gid")]),
        ("Radius", &[("function", "fGetNearby")]),
        ("spiral", &[("column", "morph")]),
        ("phot", &[("column", "z_phot")]),
        ("quasar", &[]),
    ];
    for (key, want) in cases {
        let got = client.docsearch(url, key).await.map_err(|e| format!("{key}: {e}"))?;
        let got: BTreeSet<(String, String)> = got
            .rows
            .iter()
            .map(|r| (r[0].as_str().unwrap_or("").to_string(), r[2].as_str().unwrap_or("").to_string()))
            .collect();
        let want: BTreeSet<(String, String)> = want.iter().map(|(k, n)| (k.to_string(), n.to_string())).collect();
        if got != want {
            return Err(format!("docsearch '{key}': got {got:?}, want {want:?}"));
        }
    }
    Ok(format!("{} fixture keys", cases.len()))
}
