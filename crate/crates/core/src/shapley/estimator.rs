//! Permutation Shapley estimator.
//!
//! For posterior samples `q = 1..Q` and permutations `d = 1..D`, walk the
//! permutation, adding one input at a time, and credit each input with the
//! change in the value function:
//!
//! ```text
//! Sh(o) = 1/(QD) sum_q sum_d [ g(P_o^d u {o} | w_q) - g(P_o^d | w_q) ]
//! ```
//!
//! Each walk evaluates `|O| + 1` prefixes and yields contributions for every
//! output at once. Walks run in parallel in fixed-size blocks and are reduced
//! in walk order, so results do not depend on the thread count.

use rayon::prelude::*;

use super::report::SvReport;
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::sampling::PermutationBatch;

/// A set function `g(U)` with vector output, evaluated per posterior sample.
pub trait ValueFunction: Sync {
    fn num_inputs(&self) -> usize;
    fn num_outputs(&self) -> usize;
    fn input_labels(&self) -> Vec<String>;
    fn output_labels(&self) -> Vec<String>;

    /// Number of posterior samples `Q` the estimator averages over.
    fn num_samples(&self) -> usize {
        1
    }

    /// `g(U | w_sample)` for the walk `(sample, walk)`; `walk` keys common random numbers.
    fn evaluate(&self, sample: usize, walk: usize, members: &[bool], out: &mut [f64]) -> Result<()>;

    /// Values of every prefix of `order`, from the empty set to the full set.
    fn evaluate_walk(&self, sample: usize, walk: usize, order: &[usize], out: &mut [Vec<f64>]) -> Result<()> {
        let mut members = vec![false; self.num_inputs()];
        self.evaluate(sample, walk, &members, &mut out[0])?;
        for (step, &o) in order.iter().enumerate() {
            members[o] = true;
            self.evaluate(sample, walk, &members, &mut out[step + 1])?;
        }
        Ok(())
    }
}

const BLOCK: usize = 16;

struct WalkOutcome {
    /// `contrib[o * K + k]`.
    contrib: Vec<f64>,
    span: Vec<f64>,
}

fn run_walk<V: ValueFunction + ?Sized>(vf: &V, perms: &PermutationBatch, index: usize) -> Result<WalkOutcome> {
    let d_count = perms.len();
    let (q, d) = (index / d_count, index % d_count);
    let order = perms.get(d);
    let (n, k) = (vf.num_inputs(), vf.num_outputs());
    let mut values = vec![vec![0.0; k]; n + 1];
    vf.evaluate_walk(q, d, order, &mut values)?;
    let mut contrib = vec![0.0; n * k];
    for (step, &o) in order.iter().enumerate() {
        for j in 0..k {
            contrib[o * k + j] = values[step + 1][j] - values[step][j];
        }
    }
    let span = (0..k).map(|j| values[n][j] - values[0][j]).collect();
    Ok(WalkOutcome { contrib, span })
}

pub fn shapley_estimate<V: ValueFunction + ?Sized>(vf: &V, perms: &PermutationBatch) -> Result<SvReport> {
    let (n, k) = (vf.num_inputs(), vf.num_outputs());
    if perms.size() != n {
        return Err(Error::dims(format!("permutations have size {} but there are {n} inputs", perms.size())));
    }
    if perms.is_empty() {
        return Err(Error::invalid("at least one permutation is required"));
    }
    let q_count = vf.num_samples();
    if q_count == 0 {
        return Err(Error::EmptyEnsemble);
    }
    let walks = q_count * perms.len();
    let mut sum = vec![KahanSum::new(); n * k];
    let mut sumsq = vec![KahanSum::new(); n * k];
    let mut span = vec![KahanSum::new(); k];
    let mut start = 0;
    while start < walks {
        let end = (start + BLOCK).min(walks);
        let block: Vec<WalkOutcome> =
            (start..end).into_par_iter().map(|w| run_walk(vf, perms, w)).collect::<Result<_>>()?;
        for outcome in block {
            for (i, &c) in outcome.contrib.iter().enumerate() {
                sum[i].add(c);
                sumsq[i].add(c * c);
            }
            for (s, &v) in span.iter_mut().zip(&outcome.span) {
                s.add(v);
            }
        }
        start = end;
    }
    let nw = walks as f64;
    let mut sv = vec![vec![0.0; k]; n];
    let mut contribution_variance = vec![vec![0.0; k]; n];
    for o in 0..n {
        for j in 0..k {
            let s = sum[o * k + j].value();
            let mean = s / nw;
            sv[o][j] = mean;
            contribution_variance[o][j] = if walks > 1 {
                ((sumsq[o * k + j].value() - s * mean) / (nw - 1.0)).max(0.0)
            } else {
                0.0
            };
        }
    }
    let mean_span: Vec<f64> = span.iter().map(|s| s.value() / nw).collect();
    let efficiency_residual = (0..k)
        .map(|j| {
            let mut acc = KahanSum::new();
            for row in &sv {
                acc.add(row[j]);
            }
            (acc.value() - mean_span[j]).abs()
        })
        .collect();
    Ok(SvReport {
        input_labels: vf.input_labels(),
        output_labels: vf.output_labels(),
        mc_variance: contribution_variance.iter().map(|r| r.iter().map(|v| v / nw).collect()).collect(),
        contribution_variance,
        sv,
        mean_span,
        efficiency_residual,
        samples: q_count,
        permutations: perms.len(),
    })
}

/// Exact Shapley values by enumerating all `2^|O|` subsets, for small input sets.
pub fn exact_shapley<V: ValueFunction + ?Sized>(vf: &V, sample: usize) -> Result<Vec<Vec<f64>>> {
    let (n, k) = (vf.num_inputs(), vf.num_outputs());
    if n > 20 {
        return Err(Error::InstanceTooLarge(format!("exact enumeration over {n} inputs")));
    }
    let subsets = 1usize << n;
    let values: Vec<Vec<f64>> = (0..subsets)
        .into_par_iter()
        .map(|mask| {
            let members: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let mut out = vec![0.0; k];
            vf.evaluate(sample, 0, &members, &mut out).map(|_| out)
        })
        .collect::<Result<_>>()?;
    let mut fact = vec![1.0f64; n + 1];
    for i in 1..=n {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut sv = vec![vec![0.0; k]; n];
    for (o, row) in sv.iter_mut().enumerate() {
        for mask in 0..subsets {
            if mask >> o & 1 == 1 {
                continue;
            }
            let size = mask.count_ones() as usize;
            let weight = fact[size] * fact[n - size - 1] / fact[n];
            let with = &values[mask | (1 << o)];
            for j in 0..k {
                row[j] += weight * (with[j] - values[mask][j]);
            }
        }
    }
    Ok(sv)
}
