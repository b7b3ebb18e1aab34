use std::collections::HashSet;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::PortalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MemberKind {
    #[default]
    Catalog,
    Cutout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub archive_name: String,
    pub node_url: String,
    #[serde(default)]
    pub kind: MemberKind,
}

/// The federation as seen by the portal, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederationConfig {
    pub members: Vec<Member>,
    #[serde(default = "default_theta_min")]
    pub theta_min: f64,
    #[serde(default = "default_theta_max")]
    pub theta_max: f64,
    /// Per-request timeout for every hop, seconds.
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_theta_min() -> f64 {
    0.0
}

fn default_theta_max() -> f64 {
    100.0
}

fn default_timeout() -> f64 {
    30.0
}

impl FederationConfig {
    pub fn new(members: Vec<Member>) -> Result<Self, PortalError> {
        let cfg = Self { members, theta_min: default_theta_min(), theta_max: default_theta_max(), timeout_secs: default_timeout() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PortalError> {
        let text = std::fs::read_to_string(path).map_err(|e| PortalError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = toml::from_str(&text).map_err(|e| PortalError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PortalError> {
        let mut seen = HashSet::new();
        for m in &self.members {
            if !seen.insert(m.archive_name.to_ascii_lowercase()) {
                return Err(PortalError::Config(format!("archive '{}' listed twice", m.archive_name)));
            }
            if !(m.node_url.starts_with("http://") || m.node_url.starts_with("https://")) {
                return Err(PortalError::Config(format!("member '{}' has a non-HTTP url '{}'", m.archive_name, m.node_url)));
            }
        }
        if !(self.theta_min >= 0.0 && self.theta_min < self.theta_max) {
            return Err(PortalError::Config(format!("theta limits [{}, {}] are empty", self.theta_min, self.theta_max)));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(PortalError::Config(format!("timeout {} must be positive", self.timeout_secs)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn catalog(&self, archive: &str) -> Option<&Member> {
        self.members.iter().find(|m| m.kind == MemberKind::Catalog && m.archive_name.eq_ignore_ascii_case(archive))
    }

    pub fn cutout(&self) -> Option<&Member> {
        self.members.iter().find(|m| m.kind == MemberKind::Cutout)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let cfg: FederationConfig = toml::from_str(
            r#"
timeout_secs = 5
[[members]]
archive_name = "SDSS"
node_url = "http://127.0.0.1:7101"
[[members]]
archive_name = "IMAGES"
node_url = "http://127.0.0.1:7200"
kind = "cutout"
"#,
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.timeout(), Duration::from_secs(5));
        assert_eq!(cfg.catalog("sdss").unwrap().node_url, "http://127.0.0.1:7101");
        assert!(cfg.catalog("IMAGES").is_none());
        assert_eq!(cfg.cutout().unwrap().archive_name, "IMAGES");
        let mut dup = cfg.clone();
        dup.members[1].archive_name = "sdss".into();
        assert!(dup.validate().is_err());
        let mut bad = cfg;
        bad.members[0].node_url = "127.0.0.1:1".into();
        assert!(bad.validate().is_err());
        assert!(FederationConfig::load(Path::new("/nonexistent/federation.toml")).is_err());
    }
}
