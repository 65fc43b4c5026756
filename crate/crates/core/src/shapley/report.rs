//! Shapley-value reports and their file formats.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvReport {
    pub input_labels: Vec<String>,
    pub output_labels: Vec<String>,
    /// `sv[input][output]`.
    pub sv: Vec<Vec<f64>>,
    /// Variance of each estimate (per-walk variance divided by the walk count).
    pub mc_variance: Vec<Vec<f64>>,
    /// Sample variance of the per-walk marginal contributions.
    pub contribution_variance: Vec<Vec<f64>>,
    /// Mean of `g(O) - g(empty)` over walks.
    pub mean_span: Vec<f64>,
    /// `|sum_o Sh(o) - mean span|` per output.
    pub efficiency_residual: Vec<f64>,
    pub samples: usize,
    pub permutations: usize,
}

impl SvReport {
    /// Report from exact values (no Monte Carlo error).
    pub fn exact(input_labels: Vec<String>, output_labels: Vec<String>, sv: Vec<Vec<f64>>, span: Vec<f64>) -> Self {
        let zeros = vec![vec![0.0; output_labels.len()]; input_labels.len()];
        let efficiency_residual = span
            .iter()
            .enumerate()
            .map(|(j, s)| (sv.iter().map(|row| row[j]).sum::<f64>() - s).abs())
            .collect();
        Self {
            input_labels,
            output_labels,
            sv,
            mc_variance: zeros.clone(),
            contribution_variance: zeros,
            mean_span: span,
            efficiency_residual,
            samples: 1,
            permutations: 0,
        }
    }

    pub fn output_index(&self, label: &str) -> Option<usize> {
        self.output_labels.iter().position(|l| l == label)
    }

    /// The report restricted to the named outputs, in the given order.
    pub fn select_outputs(&self, labels: &[String]) -> Result<SvReport> {
        let idx = labels
            .iter()
            .map(|l| self.output_index(l).ok_or_else(|| Error::invalid(format!("unknown output {l:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let pick = |rows: &Vec<Vec<f64>>| rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
        Ok(SvReport {
            input_labels: self.input_labels.clone(),
            output_labels: labels.to_vec(),
            sv: pick(&self.sv),
            mc_variance: pick(&self.mc_variance),
            contribution_variance: pick(&self.contribution_variance),
            mean_span: idx.iter().map(|&j| self.mean_span[j]).collect(),
            efficiency_residual: idx.iter().map(|&j| self.efficiency_residual[j]).collect(),
            samples: self.samples,
            permutations: self.permutations,
        })
    }

    pub fn column(&self, output: usize) -> Vec<f64> {
        self.sv.iter().map(|row| row[output]).collect()
    }

    /// Rows are inputs, columns are outputs.
    pub fn write_wide_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["input".to_string()];
        header.extend(self.output_labels.iter().cloned());
        out.write_record(&header)?;
        for (label, row) in self.input_labels.iter().zip(&self.sv) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| fmt_f64(*v)));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    /// One row per `(input, output)` pair.
    pub fn write_long_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["input_label", "output_label", "sv", "mc_variance"])?;
        for (i, label) in self.input_labels.iter().enumerate() {
            for (j, olabel) in self.output_labels.iter().enumerate() {
                out.write_record([label.as_str(), olabel.as_str(), &fmt_f64(self.sv[i][j]), &fmt_f64(self.mc_variance[i][j])])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> SvReport {
        SvReport::exact(vec!["a".into(), "b".into()], vec!["y".into()], vec![vec![0.1], vec![1.0 / 3.0]], vec![0.1 + 1.0 / 3.0])
    }

    #[test]
    fn wide_and_long_layouts() {
        let r = report();
        let mut wide = Vec::new();
        r.write_wide_csv(&mut wide).unwrap();
        let text = String::from_utf8(wide).unwrap();
        assert_eq!(text.lines().next().unwrap(), "input,y");
        assert_eq!(text.lines().nth(2).unwrap(), "b,3.3333333333333331e-1");
        let mut long = Vec::new();
        r.write_long_csv(&mut long).unwrap();
        let text = String::from_utf8(long).unwrap();
        assert_eq!(text.lines().next().unwrap(), "input_label,output_label,sv,mc_variance");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn json_round_trip() {
        let r = report();
        let mut buf = Vec::new();
        r.write_json(&mut buf).unwrap();
        let back: SvReport = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, r);
        assert!(r.efficiency_residual[0] < 1e-15);
    }
}
