//! Brute-force oracles and the paired reuse/brute-force benchmark.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::instance::{random_instance, CovarianceKind};
use super::moments::PathwayVariant;
use super::policy::PolicyExactValue;
use crate::error::{Error, Result};
use crate::sampling::{sample_permutations, PermutationBatch, PermutationMethod};
use crate::shapley::{shapley_estimate, SvReport, ValueFunction, ValueMode};

/// Largest input count for which every permutation is enumerated.
pub const MAX_EXHAUSTIVE_INPUTS: usize = 8;

/// All `s!` permutations of `0..s` in lexicographic order.
pub fn all_permutations(s: usize) -> Result<PermutationBatch> {
    if s > MAX_EXHAUSTIVE_INPUTS {
        return Err(Error::InstanceTooLarge(format!("{s}! permutations")));
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..s).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..s).rev().find(|&i| cur[i - 1] < cur[i]) else { break };
        let j = (i..s).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    PermutationBatch::new(s, out)
}

/// Shapley values as the average over every permutation.
pub fn exhaustive_shapley<V: ValueFunction + ?Sized>(vf: &V) -> Result<SvReport> {
    shapley_estimate(vf, &all_permutations(vf.num_inputs())?)
}

/// Tasks timed by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchTask {
    PolicyPredictive,
    PolicyVariance,
}

impl BenchTask {
    pub const ALL: [BenchTask; 2] = [BenchTask::PolicyPredictive, BenchTask::PolicyVariance];

    pub fn name(self) -> &'static str {
        match self {
            BenchTask::PolicyPredictive => "policy-predictive",
            BenchTask::PolicyVariance => "policy-variance",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| Error::invalid(format!("unknown bench task {s:?}")))
    }

    fn mode(self) -> ValueMode {
        match self {
            BenchTask::PolicyPredictive => ValueMode::Expectation,
            BenchTask::PolicyVariance => ValueMode::Variance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub task: String,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub variant: String,
    pub wall_seconds: f64,
    pub checksum: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSettings {
    pub n: usize,
    pub m: usize,
    pub permutations: usize,
    /// Timed repetitions; the minimum is reported.
    pub repeats: usize,
}

impl Default for BenchSettings {
    fn default() -> Self {
        Self { n: 4, m: 1, permutations: 4, repeats: 5 }
    }
}

/// Checksum of a report: SV values rounded to 10 significant digits, summed in absolute value.
pub fn report_checksum(report: &SvReport) -> String {
    let total: f64 = report.sv.iter().flatten().map(|v| format!("{v:.9e}").parse::<f64>().unwrap_or(f64::NAN).abs()).sum();
    format!("{total:.9e}")
}

/// Paired reuse and brute-force runs of each task at each horizon.
pub fn brute_force_suite(tasks: &[BenchTask], horizons: &[usize], settings: BenchSettings, seed: u64) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &task in tasks {
        for &h in horizons {
            if h < 2 {
                return Err(Error::invalid("bench horizons must be at least 2"));
            }
            let inst = random_instance(h, settings.n, settings.m, CovarianceKind::Full, seed ^ h as u64)?;
            let models = std::slice::from_ref(&inst.model);
            let perms = sample_permutations(inst.policy.num_parameters(), settings.permutations, PermutationMethod::Random, seed)?;
            let mut pair = Vec::with_capacity(2);
            for variant in [PathwayVariant::Reuse, PathwayVariant::BruteForce] {
                let vf = PolicyExactValue::new(models, &inst.policy, &inst.reward, task.mode(), variant)?;
                let mut best = f64::INFINITY;
                let mut report = None;
                for _ in 0..settings.repeats.max(1) {
                    let start = Instant::now();
                    let r = shapley_estimate(&vf, &perms)?;
                    best = best.min(start.elapsed().as_secs_f64());
                    report = Some(r);
                }
                let checksum = report_checksum(&report.expect("at least one repeat"));
                pair.push(BenchRow {
                    task: task.name().to_string(),
                    horizon: h,
                    n: settings.n,
                    m: settings.m,
                    variant: variant.name().to_string(),
                    wall_seconds: best,
                    checksum,
                });
            }
            if pair[0].checksum != pair[1].checksum {
                return Err(Error::ChecksumMismatch {
                    task: task.name().to_string(),
                    horizon: h,
                    reuse: pair[0].checksum.clone(),
                    brute: pair[1].checksum.clone(),
                });
            }
            rows.extend(pair);
        }
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(w: W, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["task", "H", "n", "m", "variant", "wall_seconds", "checksum"])?;
    for r in rows {
        out.write_record([
            r.task.clone(),
            r.horizon.to_string(),
            r.n.to_string(),
            r.m.to_string(),
            r.variant.clone(),
            format!("{:.6e}", r.wall_seconds),
            r.checksum.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// `brute-force / reuse` wall-time ratio per horizon for one task.
pub fn speedups(rows: &[BenchRow], task: BenchTask) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for r in rows.iter().filter(|r| r.task == task.name() && r.variant == PathwayVariant::Reuse.name()) {
        if let Some(b) = rows.iter().find(|b| b.task == r.task && b.horizon == r.horizon && b.variant == PathwayVariant::BruteForce.name()) {
            out.push((r.horizon, b.wall_seconds / r.wall_seconds));
        }
    }
    out
}
