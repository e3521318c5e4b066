use serde::{Deserialize, Serialize};

use crate::cpc::{length_bounds, select_params_prop1, select_params_prop2, tdma_period, RsCpcParams};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub scheme: String,
    /// Frame length in slots.
    #[serde(rename = "L")]
    pub frame_len: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<RsCpcParams>,
    /// Whether the row keeps its guarantee under arbitrary cyclic shifts,
    /// so that the quadratic floor applies to it.
    pub shift_invariant: bool,
    pub meets_floor: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    #[serde(rename = "M")]
    pub max_users: u64,
    #[serde(rename = "G")]
    pub cells: u64,
    pub delta: u64,
    pub floor: u64,
    pub rows: Vec<BaselineRow>,
    pub winner: String,
    /// Every shift-invariant row is at or above the floor.
    pub consistent: bool,
    pub notes: Vec<String>,
}

impl Comparison {
    pub fn row(&self, scheme: &str) -> Option<&BaselineRow> {
        self.rows.iter().find(|r| r.scheme == scheme)
    }
}

/// Frame lengths of TDMA, code-based scheduling and the cyclically
/// permutable code for `M` local users, `G` cells and `delta` slots of
/// asynchrony.
pub fn baseline_compare(max_users: u64, cells: u64, delta: u64) -> Result<Comparison> {
    let (_, floor) = length_bounds(max_users);
    let prop1 = select_params_prop1(max_users, cells, delta)?;
    let prop2 = select_params_prop2(max_users, cells)?;
    let row = |scheme: &str, frame_len: u64, params: Option<RsCpcParams>, shift_invariant: bool| BaselineRow {
        scheme: scheme.to_string(),
        frame_len,
        params,
        shift_invariant,
        meets_floor: frame_len >= floor,
    };
    let rows = vec![
        row("tdma", tdma_period(cells, delta), None, false),
        row("prop1", prop1.period, Some(prop1.params), false),
        row("prop2", prop2.period, Some(prop2.params), true),
    ];
    let winner = rows
        .iter()
        .min_by_key(|r| r.frame_len)
        .map(|r| r.scheme.clone())
        .expect("three rows");
    let consistent = rows.iter().filter(|r| r.shift_invariant).all(|r| r.meets_floor);

    let mut notes = Vec::new();
    if winner == "tdma" {
        notes.push(format!(
            "TDMA is shortest: with M = {max_users} close to G = {cells} there is little to gain from sharing slots"
        ));
    } else {
        notes.push(format!(
            "{winner} beats TDMA since M = {max_users} is small relative to G = {cells}"
        ));
    }
    for r in rows.iter().filter(|r| !r.shift_invariant && !r.meets_floor) {
        notes.push(format!(
            "{} is below the floor {floor}; it relies on frame synchronisation, not shift invariance",
            r.scheme
        ));
    }
    Ok(Comparison { max_users, cells, delta, floor, rows, winner, consistent, notes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tables() {
        let c = baseline_compare(3, 7, 0).unwrap();
        assert_eq!(c.floor, 8);
        assert_eq!(c.row("tdma").unwrap().frame_len, 7);
        assert_eq!(c.row("prop2").unwrap().frame_len, 84);
        assert_eq!(c.row("prop1").unwrap().frame_len, 42);
        assert_eq!(c.winner, "tdma");
        assert!(c.consistent);

        let c = baseline_compare(5, 37, 2).unwrap();
        assert_eq!(c.floor, 23);
        assert_eq!(c.row("tdma").unwrap().frame_len, 111);
        assert_eq!(c.row("prop1").unwrap().frame_len, 330);
        assert_eq!(c.row("prop2").unwrap().frame_len, 544);
    }
}
