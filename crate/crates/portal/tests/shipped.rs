//! The files under data/ agree with the generators they came from.

use std::path::PathBuf;

use portal::demo::{federation_config, node_config, BASE_PORT, SAMPLE_SQL, SELECTIVE_SQL};
use portal::FederationConfig;
use skyquery_core::catalog::TableSchema;
use skyquery_core::query::parse;
use skyquery_core::synth::{schema_for, SynthConfig};

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn read(rel: &str) -> String {
    std::fs::read_to_string(data().join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

#[test]
fn schemas_and_configs_match_the_generator() {
    let synth = SynthConfig::default();
    for (i, spec) in synth.surveys.iter().enumerate() {
        let stem = spec.archive.to_ascii_lowercase();
        let schema = TableSchema::from_toml(&read(&format!("schemas/{stem}.toml"))).unwrap();
        assert_eq!(schema, schema_for(spec), "{stem}");
        let node: skynode::NodeConfig = toml::from_str(&read(&format!("{stem}.toml"))).unwrap();
        assert_eq!(node, node_config(&synth, i, BASE_PORT + i as u16), "{stem}");
    }
    let fed = FederationConfig::load(&data().join("federation.toml")).unwrap();
    assert_eq!(fed, federation_config(&synth));
}

#[test]
fn sample_queries_parse() {
    assert_eq!(read("queries/sample.sql").trim_end(), SAMPLE_SQL);
    assert_eq!(read("queries/selective.sql").trim_end(), SELECTIVE_SQL);
    for q in ["sample.sql", "selective.sql", "dropout.sql"] {
        parse(&read(&format!("queries/{q}"))).unwrap_or_else(|e| panic!("{q}: {e}"));
    }
}
