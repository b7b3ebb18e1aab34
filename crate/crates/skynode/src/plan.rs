use serde::{Deserialize, Serialize};

/// One hop of a cross-match chain as sent to `/xmatch`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XMatchPlanStep {
    pub node_url: String,
    pub archive_name: String,
    pub alias: String,
    /// Single-table select run by the node to produce its candidates.
    pub local_sql: String,
    pub sigma_arcsec: f64,
    pub is_dropout: bool,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XMatchRequest {
    /// Remaining steps; the receiving node is `plan[0]`.
    pub plan: Vec<XMatchPlanStep>,
    pub theta: f64,
    /// Conjuncts spanning several aliases, as SQL expression text.
    #[serde(default)]
    pub cross_predicates: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_id: Option<String>,
}

impl XMatchRequest {
    /// The request forwarded to the next node.
    pub fn downstream(&self) -> Option<XMatchRequest> {
        (self.plan.len() > 1).then(|| XMatchRequest { plan: self.plan[1..].to_vec(), ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub sql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plan_id: Option<String>,
}

/// Header on `/xmatch` responses: body bytes exchanged by this hop and every
/// hop below it.
pub const CHAIN_BYTES_HEADER: &str = "x-skyquery-chain-bytes";
