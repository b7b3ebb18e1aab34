//! Tuples on the wire. A batch is a [`ResultTable`] whose first thirteen
//! columns are reserved, followed by the carried attribute columns. The
//! anchor and offset-sum columns let the next hop continue the χ²
//! recurrence at full precision.

use std::collections::BTreeMap;

use skyquery_core::sphere::{UnitVec3, Vec3};
use skyquery_core::table::{ColumnInfo, ColumnType, ResultTable, Value};
use skyquery_core::xmatch::{match_statistic, MatchTuple, Member};

use crate::error::NodeError;

pub const RESERVED: [&str; 13] =
    ["_ax", "_ay", "_az", "_a", "_chi2", "_m", "_members", "_rx", "_ry", "_rz", "_ox", "_oy", "_oz"];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TupleBatch {
    /// Carried attribute columns, named `alias.column`.
    pub carried: Vec<ColumnInfo>,
    pub tuples: Vec<MatchTuple>,
}

pub fn encode_members(members: &[Member]) -> String {
    members.iter().map(Member::to_string).collect::<Vec<_>>().join(";")
}

pub fn decode_members(s: &str) -> Result<Vec<Member>, String> {
    s.split(';')
        .filter(|p| !p.is_empty())
        .map(|p| {
            let (a, k) = p.rsplit_once(':').ok_or_else(|| format!("malformed member '{p}'"))?;
            let key = k.parse().map_err(|_| format!("malformed member key '{k}'"))?;
            Ok(Member { archive: a.to_string(), key })
        })
        .collect()
}

fn reserved_columns() -> Vec<ColumnInfo> {
    let f = |n: &str, d: &str| ColumnInfo::new(n, ColumnType::Float64).with_description(d);
    vec![
        f("_ax", "x component of the weighted direction sum").with_unit("rad-2"),
        f("_ay", "y component of the weighted direction sum").with_unit("rad-2"),
        f("_az", "z component of the weighted direction sum").with_unit("rad-2"),
        f("_a", "sum of member weights").with_unit("rad-2"),
        f("_chi2", "minimum weighted squared deviation"),
        f("_m", "match statistic sqrt(chi2)"),
        ColumnInfo::new("_members", ColumnType::String).with_description("archive:key of each member"),
        f("_rx", "x component of the first member's position"),
        f("_ry", "y component of the first member's position"),
        f("_rz", "z component of the first member's position"),
        f("_ox", "x component of the weighted offset sum from the first member").with_unit("rad-1"),
        f("_oy", "y component of the weighted offset sum from the first member").with_unit("rad-1"),
        f("_oz", "z component of the weighted offset sum from the first member").with_unit("rad-1"),
    ]
}

impl TupleBatch {
    pub fn to_table(&self) -> ResultTable {
        let mut columns = reserved_columns();
        columns.extend(self.carried.iter().cloned());
        let rows = self
            .tuples
            .iter()
            .map(|t| {
                let mut row = vec![
                    Value::Float(t.a_vec.x),
                    Value::Float(t.a_vec.y),
                    Value::Float(t.a_vec.z),
                    Value::Float(t.a_weight),
                    Value::Float(t.chi2),
                    Value::Float(match_statistic(t)),
                    Value::Str(encode_members(&t.members)),
                    Value::Float(t.anchor.x()),
                    Value::Float(t.anchor.y()),
                    Value::Float(t.anchor.z()),
                    Value::Float(t.offset_sum.x),
                    Value::Float(t.offset_sum.y),
                    Value::Float(t.offset_sum.z),
                ];
                for c in &self.carried {
                    row.push(t.carried.get(&c.name).cloned().expect("every tuple carries every batch column"));
                }
                row
            })
            .collect();
        ResultTable { columns, rows }
    }

    pub fn from_table(table: ResultTable) -> Result<Self, NodeError> {
        let bad = |m: String| NodeError::bad_request("bad_batch", m);
        if table.columns.len() < RESERVED.len()
            || table.columns.iter().zip(RESERVED).any(|(c, r)| c.name != r)
        {
            return Err(bad(format!("tuple batch must start with columns {RESERVED:?}")));
        }
        let carried: Vec<ColumnInfo> = table.columns[RESERVED.len()..].to_vec();
        let mut tuples = Vec::with_capacity(table.rows.len());
        for (i, row) in table.rows.into_iter().enumerate() {
            let f = |j: usize| row[j].as_f64().ok_or_else(|| bad(format!("row {i}: {} is not numeric", RESERVED[j])));
            let a_vec = Vec3::new(f(0)?, f(1)?, f(2)?);
            let a_weight = f(3)?;
            let chi2 = f(4)?;
            let anchor = UnitVec3::new(f(7)?, f(8)?, f(9)?).map_err(|e| bad(format!("row {i}: anchor: {e}")))?;
            let offset_sum = Vec3::new(f(10)?, f(11)?, f(12)?);
            if !(a_weight > 0.0)
                || a_vec.norm() > a_weight * (1.0 + 1e-9)
                || !(chi2 >= 0.0)
                || (anchor.as_vec() * a_weight + offset_sum - a_vec).norm() > 1e-9 * a_weight
            {
                return Err(bad(format!("row {i}: inconsistent cumulative sums")));
            }
            let members = decode_members(row[6].as_str().ok_or_else(|| bad(format!("row {i}: _members")))?)
                .map_err(|e| bad(format!("row {i}: {e}")))?;
            let carried_vals: BTreeMap<String, Value> = carried
                .iter()
                .zip(row.into_iter().skip(RESERVED.len()))
                .map(|(c, v)| (c.name.clone(), v))
                .collect();
            tuples.push(MatchTuple { a_vec, a_weight, anchor, offset_sum, chi2, members, carried: carried_vals });
        }
        Ok(Self { carried, tuples })
    }
}
