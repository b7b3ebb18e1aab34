use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use skyquery_core::catalog::{default_functions, ArchiveMeta, Catalog, CatalogTable, Coverage, FunctionInfo};
use skyquery_core::htm::DEFAULT_INDEX_LEVEL;
use skyquery_core::xmatch::ArchiveSigma;

use crate::error::NodeError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableFiles {
    pub schema: PathBuf,
    pub data: PathBuf,
}

/// One node, read from a TOML file. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    pub archive: String,
    pub sigma_arcsec: f64,
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    #[serde(default = "default_level")]
    pub index_level: u8,
    #[serde(default)]
    pub stats: bool,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub wavelength_coverage: String,
    #[serde(default)]
    pub sky_coverage: Vec<Coverage>,
    #[serde(default)]
    pub functions: Option<Vec<FunctionInfo>>,
    pub tables: Vec<TableFiles>,
}

fn default_bind() -> SocketAddr {
    "127.0.0.1:0".parse().expect("literal address")
}

fn default_level() -> u8 {
    DEFAULT_INDEX_LEVEL
}

fn default_timeout() -> u64 {
    30
}

impl NodeConfig {
    pub fn load(path: &Path) -> Result<Self, NodeError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NodeError::config(format!("{}: {e}", path.display())))?;
        let mut cfg: NodeConfig =
            toml::from_str(&text).map_err(|e| NodeError::config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for t in &mut cfg.tables {
            t.schema = base.join(&t.schema);
            t.data = base.join(&t.data);
        }
        Ok(cfg)
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    pub fn meta(&self) -> Result<ArchiveMeta, NodeError> {
        let sigma = ArchiveSigma::new(self.sigma_arcsec).map_err(|e| NodeError::config(e.to_string()))?;
        Ok(ArchiveMeta {
            archive_name: self.archive.clone(),
            sky_coverage: self.sky_coverage.clone(),
            wavelength_coverage: self.wavelength_coverage.clone(),
            sigma,
            functions: self.functions.clone().unwrap_or_else(default_functions),
        })
    }

    /// Loads every table. Runs before the service starts accepting requests.
    pub fn load_catalog(&self) -> Result<Catalog, NodeError> {
        let tables = self
            .tables
            .iter()
            .map(|t| CatalogTable::load(&t.schema, &t.data, self.index_level))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| NodeError::config(e.to_string()))?;
        Catalog::new(self.meta()?, tables).map_err(|e| NodeError::config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("node.toml");
        std::fs::write(
            &path,
            r#"
archive = "SDSS"
sigma_arcsec = 0.1
bind = "127.0.0.1:7101"
stats = true

[[sky_coverage]]
ra = 181.3
dec = -0.76
radius_arcmin = 40.0

[[tables]]
schema = "schemas/sdss.toml"
data = "sdss.csv"
"#,
        )
        .unwrap();
        let cfg = NodeConfig::load(&path).unwrap();
        assert_eq!(cfg.index_level, DEFAULT_INDEX_LEVEL);
        assert_eq!(cfg.timeout(), Duration::from_secs(30));
        assert_eq!(cfg.tables[0].data, dir.path().join("sdss.csv"));
        assert!(cfg.load_catalog().is_err());
        let bad = NodeConfig { sigma_arcsec: 0.0, ..cfg };
        assert!(bad.meta().is_err());
    }
}
