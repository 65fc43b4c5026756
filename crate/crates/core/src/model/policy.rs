//! Linear feedback policies `a_t = mu^a_t + theta_t^T (s_t - mu^s_t)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linear::LinearGaussianModel;
use crate::error::{Error, Result};

/// Serializable policy; `theta[t]` is `n x m`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPolicySpec {
    pub mu_s: Vec<Vec<f64>>,
    pub mu_a: Vec<Vec<f64>>,
    pub theta: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub bounds: Option<Vec<[f64; 2]>>,
}

/// Gains for periods `1..H`; the terminal period has no feedback and acts at `mu^a_H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearPolicySpec", into = "LinearPolicySpec")]
pub struct LinearPolicy {
    n: usize,
    m: usize,
    mu_s: Vec<DVector<f64>>,
    mu_a: Vec<DVector<f64>>,
    theta: Vec<DMatrix<f64>>,
    bounds: Option<Vec<[f64; 2]>>,
}

impl TryFrom<LinearPolicySpec> for LinearPolicy {
    type Error = Error;

    fn try_from(spec: LinearPolicySpec) -> Result<Self> {
        let h = spec.mu_s.len();
        if h == 0 || spec.mu_a.len() != h || spec.theta.len() + 1 != h {
            return Err(Error::dims("policy needs H centres and H-1 gain matrices"));
        }
        let n = spec.mu_s[0].len();
        let m = spec.mu_a[0].len();
        if spec.mu_s.iter().any(|v| v.len() != n) || spec.mu_a.iter().any(|v| v.len() != m) {
            return Err(Error::dims("policy centres have inconsistent lengths"));
        }
        let theta = spec
            .theta
            .iter()
            .map(|rows| {
                if rows.len() != n || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::dims(format!("policy gains must be {n}x{m}")));
                }
                Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(b) = &spec.bounds {
            if b.len() != m || b.iter().any(|[lo, hi]| lo > hi) {
                return Err(Error::invalid("action bounds must be m ordered pairs"));
            }
        }
        Ok(Self {
            n,
            m,
            mu_s: spec.mu_s.iter().map(|v| DVector::from_column_slice(v)).collect(),
            mu_a: spec.mu_a.iter().map(|v| DVector::from_column_slice(v)).collect(),
            theta,
            bounds: spec.bounds,
        })
    }
}

impl From<LinearPolicy> for LinearPolicySpec {
    fn from(p: LinearPolicy) -> Self {
        LinearPolicySpec {
            mu_s: p.mu_s.iter().map(|v| v.iter().copied().collect()).collect(),
            mu_a: p.mu_a.iter().map(|v| v.iter().copied().collect()).collect(),
            theta: p
                .theta
                .iter()
                .map(|t| (0..t.nrows()).map(|i| t.row(i).iter().copied().collect()).collect())
                .collect(),
            bounds: p.bounds,
        }
    }
}

impl LinearPolicy {
    pub fn new(
        mu_s: Vec<DVector<f64>>,
        mu_a: Vec<DVector<f64>>,
        theta: Vec<DMatrix<f64>>,
        bounds: Option<Vec<[f64; 2]>>,
    ) -> Result<Self> {
        let spec = LinearPolicy { n: 0, m: 0, mu_s, mu_a, theta, bounds };
        Self::try_from(LinearPolicySpec::from(spec))
    }

    /// Policy centred on the model's own means.
    pub fn for_linear_model(model: &LinearGaussianModel, theta: Vec<DMatrix<f64>>) -> Result<Self> {
        let h = crate::model::PkgModel::horizon(model);
        Self::new(
            (1..=h).map(|t| model.mu_s(t).clone()).collect(),
            (1..=h).map(|t| model.mu_a(t).clone()).collect(),
            theta,
            None,
        )
    }

    /// Open-loop policy: zero gains around the given centres.
    pub fn open_loop(mu_s: Vec<DVector<f64>>, mu_a: Vec<DVector<f64>>) -> Result<Self> {
        let n = mu_s.first().map_or(0, |v| v.len());
        let m = mu_a.first().map_or(0, |v| v.len());
        let theta = vec![DMatrix::zeros(n, m); mu_s.len().saturating_sub(1)];
        Self::new(mu_s, mu_a, theta, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.mu_s.len()
    }

    /// Gain matrix for 1-based period `t` in `1..H`.
    pub fn theta(&self, t: usize) -> &DMatrix<f64> {
        &self.theta[t - 1]
    }

    pub fn thetas(&self) -> &[DMatrix<f64>] {
        &self.theta
    }

    pub fn mu_s(&self, t: usize) -> &DVector<f64> {
        &self.mu_s[t - 1]
    }

    pub fn mu_a(&self, t: usize) -> &DVector<f64> {
        &self.mu_a[t - 1]
    }

    pub fn bounds(&self) -> Option<&[[f64; 2]]> {
        self.bounds.as_deref()
    }

    pub fn with_bounds(mut self, bounds: Option<Vec<[f64; 2]>>) -> Result<Self> {
        self.bounds = bounds;
        Self::try_from(LinearPolicySpec::from(self))
    }

    /// Action at 1-based period `t`; `t = H` returns the terminal anchor.
    pub fn action(&self, t: usize, state: &[f64], out: &mut [f64]) {
        let mu_a = &self.mu_a[t - 1];
        if t == self.horizon() {
            out[..self.m].copy_from_slice(mu_a.as_slice());
        } else {
            let theta = &self.theta[t - 1];
            let mu_s = &self.mu_s[t - 1];
            for j in 0..self.m {
                let mut v = mu_a[j];
                for i in 0..self.n {
                    v += theta[(i, j)] * (state[i] - mu_s[i]);
                }
                out[j] = v;
            }
        }
        if let Some(b) = &self.bounds {
            for (o, [lo, hi]) in out.iter_mut().zip(b) {
                *o = o.clamp(*lo, *hi);
            }
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.theta.len() * self.n * self.m
    }

    /// Gains flattened in `(t, i, j)` order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.num_parameters());
        for th in &self.theta {
            for i in 0..self.n {
                for j in 0..self.m {
                    w.push(th[(i, j)]);
                }
            }
        }
        w
    }

    /// `(t, i, j)` of flat parameter index `p`, with 1-based `t`.
    pub fn parameter_index(&self, p: usize) -> (usize, usize, usize) {
        let per = self.n * self.m;
        (p / per + 1, (p % per) / self.m, p % self.m)
    }

    pub fn parameter_labels(&self, state_labels: &[String], action_labels: &[String]) -> Vec<String> {
        (0..self.num_parameters())
            .map(|p| {
                let (t, i, j) = self.parameter_index(p);
                format!("theta[t={t},i={},j={}]", state_labels[i], action_labels[j])
            })
            .collect()
    }

    pub fn with_parameters(&self, w: &[f64]) -> Result<Self> {
        if w.len() != self.num_parameters() {
            return Err(Error::dims(format!("expected {} gains, got {}", self.num_parameters(), w.len())));
        }
        let mut out = self.clone();
        for (p, &v) in w.iter().enumerate() {
            let (t, i, j) = self.parameter_index(p);
            out.theta[t - 1][(i, j)] = v;
        }
        Ok(out)
    }

    /// Gains outside `keep` set to zero.
    pub fn masked(&self, keep: &[bool]) -> Self {
        let mut out = self.clone();
        for (p, &k) in keep.iter().enumerate() {
            if !k {
                let (t, i, j) = self.parameter_index(p);
                out.theta[t - 1][(i, j)] = 0.0;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy() -> LinearPolicy {
        LinearPolicy::new(
            vec![DVector::from_vec(vec![1.0, 2.0]); 3],
            vec![DVector::from_vec(vec![0.5]); 3],
            vec![DMatrix::from_row_slice(2, 1, &[0.1, -0.2]), DMatrix::from_row_slice(2, 1, &[0.3, 0.4])],
            Some(vec![[0.0, 10.0]]),
        )
        .unwrap()
    }

    #[test]
    fn action_and_terminal_anchor() {
        let p = policy();
        let mut a = [0.0];
        p.action(1, &[2.0, 1.0], &mut a);
        assert!((a[0] - (0.5 + 0.1 + 0.2)).abs() < 1e-15);
        p.action(1, &[-100.0, 2.0], &mut a);
        assert_eq!(a[0], 0.0);
        p.action(3, &[50.0, 50.0], &mut a);
        assert_eq!(a[0], 0.5);
    }

    #[test]
    fn parameter_order_and_mask() {
        let p = policy();
        assert_eq!(p.parameters(), vec![0.1, -0.2, 0.3, 0.4]);
        assert_eq!(p.parameter_index(3), (2, 1, 0));
        let q = p.masked(&[false, true, true, false]);
        assert_eq!(q.parameters(), vec![0.0, -0.2, 0.3, 0.0]);
        let labels = p.parameter_labels(&["X".into(), "Y".into()], &["F".into()]);
        assert_eq!(labels[1], "theta[t=1,i=Y,j=F]");
    }

    #[test]
    fn json_round_trip() {
        let p = policy();
        let back: LinearPolicy = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
