use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsEntry {
    pub plan_id: Option<String>,
    pub endpoint: String,
    pub request_bytes: u64,
    pub response_bytes: u64,
}

/// Body sizes of every `/query` and `/xmatch` exchange served by a node.
#[derive(Debug, Default)]
pub struct StatsLog {
    entries: Mutex<Vec<StatsEntry>>,
}

impl StatsLog {
    pub fn record(&self, entry: StatsEntry) {
        self.entries.lock().expect("stats lock").push(entry);
    }

    pub fn entries(&self) -> Vec<StatsEntry> {
        self.entries.lock().expect("stats lock").clone()
    }

    pub fn for_plan(&self, plan_id: &str) -> Vec<StatsEntry> {
        self.entries().into_iter().filter(|e| e.plan_id.as_deref() == Some(plan_id)).collect()
    }
}
