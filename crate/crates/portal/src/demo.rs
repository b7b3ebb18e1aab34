//! The bundled synthetic federation: three catalog nodes and a cutout
//! service, either launched in-process or written to disk with configs.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use cutout::synth::TileSynthConfig;
use cutout::RunningCutout;
use skynode::config::TableFiles;
use skynode::{NodeConfig, NodeState, RunningNode};
use skyquery_core::catalog::{Catalog, Coverage};
use skyquery_core::htm::DEFAULT_INDEX_LEVEL;
use skyquery_core::synth::{generate, SynthConfig};

use crate::config::{FederationConfig, Member, MemberKind};

pub const SAMPLE_SQL: &str = "SELECT o.objId, o.r, o.type, t.objId, t.m_j
FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t
WHERE XMATCH(o,t)<3.5 AND AREA(181.3,-0.76,6.5)
AND o.type=3 and (o.i - t.m_j)>2";

/// Local predicates keep one in fifty in-area SDSS objects; the other
/// archive ships everything in the area under a star join.
pub const SELECTIVE_SQL: &str = "SELECT o.objId, o.r, t.objId, t.m_j \
FROM SDSS:PhotoPrimary o, TWOMASS:PhotoPrimary t \
WHERE XMATCH(o,t)<3.5 AND AREA(181.3,-0.76,20) AND o.bucket=0";

pub const CUTOUT_ARCHIVE: &str = "IMAGES";

pub struct DemoFederation {
    pub nodes: Vec<RunningNode>,
    pub cutout: Option<RunningCutout>,
    pub config: FederationConfig,
}

impl DemoFederation {
    pub fn catalogs(&self) -> Vec<&Catalog> {
        self.nodes.iter().map(|n| &n.state.catalog).collect()
    }

    pub fn node(&self, archive: &str) -> Option<&RunningNode> {
        self.nodes.iter().find(|n| n.state.catalog.meta.archive_name.eq_ignore_ascii_case(archive))
    }
}

/// Starts every node (and the cutout service when `tiles` is given) on
/// ephemeral local ports. Must run inside a tokio runtime.
pub async fn launch(synth: &SynthConfig, tiles: Option<&TileSynthConfig>, stats: bool) -> std::io::Result<DemoFederation> {
    let any: SocketAddr = "127.0.0.1:0".parse().expect("literal address");
    let mut nodes = Vec::new();
    let mut members = Vec::new();
    for a in generate(synth) {
        let meta = a.meta.clone();
        let table = a.into_table(DEFAULT_INDEX_LEVEL).map_err(std::io::Error::other)?;
        let catalog = Catalog::new(meta, vec![table]).map_err(std::io::Error::other)?;
        let archive_name = catalog.meta.archive_name.clone();
        let node = skynode::spawn(NodeState::new(catalog, stats, Duration::from_secs(30)), any).await?;
        members.push(Member { archive_name, node_url: node.url.clone(), kind: MemberKind::Catalog });
        nodes.push(node);
    }
    let cutout = match tiles {
        Some(t) => {
            let set = cutout::synth::generate(t).map_err(std::io::Error::other)?;
            let svc = cutout::spawn(Arc::new(set), any).await?;
            members.push(Member { archive_name: CUTOUT_ARCHIVE.into(), node_url: svc.url.clone(), kind: MemberKind::Cutout });
            Some(svc)
        }
        None => None,
    };
    let config = FederationConfig::new(members).map_err(std::io::Error::other)?;
    Ok(DemoFederation { nodes, cutout, config })
}

pub const BASE_PORT: u16 = 7101;
pub const CUTOUT_PORT: u16 = 7200;

/// Node config for one synthetic archive, with paths relative to the
/// config file.
pub fn node_config(synth: &SynthConfig, index: usize, port: u16) -> NodeConfig {
    let spec = &synth.surveys[index];
    let stem = spec.archive.to_ascii_lowercase();
    NodeConfig {
        archive: spec.archive.clone(),
        sigma_arcsec: spec.sigma_arcsec,
        bind: SocketAddr::from(([127, 0, 0, 1], port)),
        index_level: DEFAULT_INDEX_LEVEL,
        stats: true,
        timeout_secs: 30,
        wavelength_coverage: skyquery_core::synth::wavelength(spec.kind).into(),
        sky_coverage: vec![Coverage { ra: synth.center.ra(), dec: synth.center.dec(), radius_arcmin: synth.radius_arcmin }],
        functions: None,
        tables: vec![TableFiles { schema: PathBuf::from(format!("schemas/{stem}.toml")), data: PathBuf::from(format!("{stem}.csv")) }],
    }
}

pub fn federation_config(synth: &SynthConfig) -> FederationConfig {
    let mut members: Vec<Member> = synth
        .surveys
        .iter()
        .enumerate()
        .map(|(i, s)| Member {
            archive_name: s.archive.clone(),
            node_url: format!("http://127.0.0.1:{}", BASE_PORT + i as u16),
            kind: MemberKind::Catalog,
        })
        .collect();
    members.push(Member {
        archive_name: CUTOUT_ARCHIVE.into(),
        node_url: format!("http://127.0.0.1:{CUTOUT_PORT}"),
        kind: MemberKind::Cutout,
    });
    FederationConfig::new(members).expect("generated federation is valid")
}

/// Writes catalogs, schemas, node configs, the federation config and a
/// tile set under `dir`.
pub fn write_dataset(dir: &Path, synth: &SynthConfig, tiles: &TileSynthConfig) -> Result<Vec<PathBuf>, String> {
    let io = |p: &Path, e: std::io::Error| format!("{}: {e}", p.display());
    let schemas = dir.join("schemas");
    std::fs::create_dir_all(&schemas).map_err(|e| io(&schemas, e))?;
    let mut written = Vec::new();
    for (i, a) in generate(synth).iter().enumerate() {
        written.push(a.write_csv(dir).map_err(|e| io(dir, e))?);
        let stem = a.meta.archive_name.to_ascii_lowercase();
        let schema_path = schemas.join(format!("{stem}.toml"));
        std::fs::write(&schema_path, a.schema.to_toml()).map_err(|e| io(&schema_path, e))?;
        written.push(schema_path);
        let node_path = dir.join(format!("{stem}.toml"));
        let text = toml::to_string(&node_config(synth, i, BASE_PORT + i as u16)).map_err(|e| e.to_string())?;
        std::fs::write(&node_path, text).map_err(|e| io(&node_path, e))?;
        written.push(node_path);
    }
    let fed_path = dir.join("federation.toml");
    let text = toml::to_string(&federation_config(synth)).map_err(|e| e.to_string())?;
    std::fs::write(&fed_path, text).map_err(|e| io(&fed_path, e))?;
    written.push(fed_path);
    let tile_dir = dir.join("tiles");
    cutout::synth::generate(tiles).and_then(|set| set.save(&tile_dir)).map_err(|e| e.to_string())?;
    written.push(tile_dir);
    Ok(written)
}
