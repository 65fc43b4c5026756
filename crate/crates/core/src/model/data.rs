//! Trajectory tables.
//!
//! One row per `(batch, t)`: `batch,t,<state columns>,<action columns>`. The
//! action cells of the final period are left empty.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::simulate::Trajectory;
use crate::error::{Error, Result};
use crate::numeric::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub batch: u64,
    /// `s_1, .., s_H`.
    pub states: Vec<Vec<f64>>,
    /// `a_1, .., a_{H-1}`.
    pub actions: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn from_trajectory(batch: u64, tr: &Trajectory) -> Self {
        Self { batch, states: tr.states.clone(), actions: tr.actions.clone() }
    }

    pub fn horizon(&self) -> usize {
        self.states.len()
    }
}

pub fn write_trajectories_csv<W: Write>(
    w: W,
    records: &[TrajectoryRecord],
    state_labels: &[String],
    action_labels: &[String],
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["batch".to_string(), "t".to_string()];
    header.extend(state_labels.iter().cloned());
    header.extend(action_labels.iter().cloned());
    out.write_record(&header)?;
    for rec in records {
        for (t, s) in rec.states.iter().enumerate() {
            let mut row = vec![rec.batch.to_string(), (t + 1).to_string()];
            row.extend(s.iter().map(|v| fmt_f64(*v)));
            match rec.actions.get(t) {
                Some(a) => row.extend(a.iter().map(|v| fmt_f64(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), action_labels.len())),
            }
            out.write_record(&row)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a trajectory table with `n` state and `m` action columns.
pub fn read_trajectories_csv<R: Read>(r: R, n: usize, m: usize) -> Result<Vec<TrajectoryRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.len() != 2 + n + m || &header[0] != "batch" || &header[1] != "t" {
        return Err(Error::Parse(format!(
            "expected header batch,t plus {n} state and {m} action columns, got {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows: BTreeMap<u64, BTreeMap<usize, (Vec<f64>, Option<Vec<f64>>)>> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|_| Error::Parse(format!("row {}: bad number '{}'", line + 2, &rec[i])))
        };
        let batch: u64 = rec[0].parse().map_err(|_| Error::Parse(format!("row {}: bad batch", line + 2)))?;
        let t: usize = rec[1].parse().map_err(|_| Error::Parse(format!("row {}: bad period", line + 2)))?;
        if t == 0 {
            return Err(Error::Parse(format!("row {}: periods are 1-based", line + 2)));
        }
        let s = (2..2 + n).map(field).collect::<Result<Vec<_>>>()?;
        let a = if (2 + n..2 + n + m).all(|i| rec[i].is_empty()) {
            None
        } else {
            Some((2 + n..2 + n + m).map(field).collect::<Result<Vec<_>>>()?)
        };
        if rows.entry(batch).or_default().insert(t, (s, a)).is_some() {
            return Err(Error::Parse(format!("duplicate row for batch {batch}, period {t}")));
        }
    }
    let mut out = Vec::with_capacity(rows.len());
    for (batch, periods) in rows {
        let h = periods.len();
        if periods.keys().copied().ne(1..=h) {
            return Err(Error::Parse(format!("batch {batch} has gaps in its periods")));
        }
        let mut states = Vec::with_capacity(h);
        let mut actions = Vec::with_capacity(h.saturating_sub(1));
        for (t, (s, a)) in periods {
            states.push(s);
            if t < h {
                actions.push(a.ok_or_else(|| Error::Parse(format!("batch {batch} is missing the action at {t}")))?);
            }
        }
        out.push(TrajectoryRecord { batch, states, actions });
    }
    Ok(out)
}
