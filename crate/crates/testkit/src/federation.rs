use std::time::Duration;

use skynode::{NodeState, RunningNode};
use skyquery_core::catalog::Catalog;
use skyquery_core::htm::DEFAULT_INDEX_LEVEL;
use skyquery_core::synth::{generate, SynthConfig};

pub struct MemberNode {
    pub archive: String,
    pub node: RunningNode,
}

impl MemberNode {
    pub fn url(&self) -> &str {
        &self.node.url
    }

    pub fn catalog(&self) -> &Catalog {
        &self.node.state.catalog
    }
}

/// Synthetic archives, each served by an in-process node on an ephemeral
/// port. Nodes stop when the federation is dropped.
pub struct Federation {
    pub members: Vec<MemberNode>,
}

impl Federation {
    /// Must be called inside a tokio runtime.
    pub async fn launch(cfg: &SynthConfig, stats: bool) -> std::io::Result<Self> {
        let mut members = Vec::new();
        for a in generate(cfg) {
            let meta = a.meta.clone();
            let table = a.into_table(DEFAULT_INDEX_LEVEL).map_err(std::io::Error::other)?;
            let catalog = Catalog::new(meta, vec![table]).map_err(std::io::Error::other)?;
            let archive = catalog.meta.archive_name.clone();
            let state = NodeState::new(catalog, stats, Duration::from_secs(30));
            let node = skynode::spawn(state, "127.0.0.1:0".parse().expect("literal address")).await?;
            members.push(MemberNode { archive, node });
        }
        Ok(Self { members })
    }

    pub fn member(&self, archive: &str) -> &MemberNode {
        self.members
            .iter()
            .find(|m| m.archive.eq_ignore_ascii_case(archive))
            .unwrap_or_else(|| panic!("no member {archive}"))
    }

    pub fn url(&self, archive: &str) -> &str {
        self.member(archive).url()
    }

    pub fn catalogs(&self) -> Vec<&Catalog> {
        self.members.iter().map(MemberNode::catalog).collect()
    }
}

/// The default synthetic sky with fewer rows per archive.
pub fn small_config(rows: usize) -> SynthConfig {
    let mut c = SynthConfig { true_sources: rows * 2, ..SynthConfig::default() };
    c.surveys.iter_mut().for_each(|s| s.rows = rows);
    c
}
