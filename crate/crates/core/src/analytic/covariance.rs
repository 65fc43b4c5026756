//! State covariances `Cov(s_p, s_q)` of a linear Gaussian model.
//!
//! Writing `Cov(s_p, s_q) = A1 + A2 + A3 + Cov(e_p, e_q)` with
//!
//! ```text
//! A1(p,q) = sum_{i<p} sum_{j<q} R_{i,p-1} Cov(e_i,e_j) R_{j,q-1}^T
//! A2(p,q) = sum_{i<p} R_{i,p-1} Cov(e_i,e_q)
//! A3(p,q) = sum_{j<q} Cov(e_p,e_j) R_{j,q-1}^T
//! ```
//!
//! the three parts satisfy one-step recursions in `p` and `q`:
//!
//! ```text
//! A1(p,q) = (A1(p,q-1) + A2(p,q-1)) C_{q-1}^T
//! A2(p,q) = C_{p-1} (A2(p-1,q) + Cov(e_{p-1},e_q))
//! A3(p,q) = (A3(p,q-1) + Cov(e_p,e_{q-1})) C_{q-1}^T
//! ```
//!
//! Only `p <= q` is stored; the lower triangle follows from
//! `A1(q,p) = A1(p,q)^T`, `A2(q,p) = A3(p,q)^T` and `A3(q,p) = A2(p,q)^T`.

use nalgebra::{DMatrix, RowDVector};

use super::pathway::pathway_from_coefficients;
use crate::model::{LinearGaussianModel, PkgModel};

/// Symmetric table of `n x n` blocks for periods `1..=H`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovTable {
    n: usize,
    h: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl CovTable {
    fn new(n: usize, h: usize) -> Self {
        Self { n, h, blocks: vec![DMatrix::zeros(n, n); h * h] }
    }

    pub fn horizon(&self) -> usize {
        self.h
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    /// `Cov(s_p, s_q)` for 1-based periods.
    pub fn get(&self, p: usize, q: usize) -> &DMatrix<f64> {
        &self.blocks[(p - 1) * self.h + (q - 1)]
    }

    fn set(&mut self, p: usize, q: usize, m: DMatrix<f64>) {
        self.blocks[(q - 1) * self.h + (p - 1)] = m.transpose();
        self.blocks[(p - 1) * self.h + (q - 1)] = m;
    }

    pub fn max_abs_diff(&self, other: &CovTable) -> f64 {
        self.blocks.iter().zip(&other.blocks).map(|(a, b)| (a - b).abs().max()).fold(0.0, f64::max)
    }
}

/// Covariance table by the three-part recursion, `O(H^2)` block products.
pub fn state_covariance(model: &LinearGaussianModel, maps: &[DMatrix<f64>]) -> CovTable {
    let (n, h) = (model.n(), model.horizon());
    let idx = |p: usize, q: usize| p * (h + 1) + q;
    let zero = DMatrix::<f64>::zeros(n, n);
    let mut a1 = vec![zero.clone(); (h + 1) * (h + 1)];
    let mut a2 = a1.clone();
    let mut a3 = a1.clone();
    let mut table = CovTable::new(n, h);
    for q in 1..=h {
        for p in 1..=q {
            let v1 = if q == 1 {
                zero.clone()
            } else {
                let (l1, l2) = if p <= q - 1 {
                    (a1[idx(p, q - 1)].clone(), a2[idx(p, q - 1)].clone())
                } else {
                    (a1[idx(q - 1, q)].transpose(), a3[idx(q - 1, q)].transpose())
                };
                (l1 + l2) * maps[q - 2].transpose()
            };
            let v2 = if p == 1 {
                zero.clone()
            } else {
                &maps[p - 2] * (&a2[idx(p - 1, q)] + model.cov_block(p - 1, q))
            };
            let v3 = if q == 1 {
                zero.clone()
            } else {
                let prev = if p <= q - 1 { a3[idx(p, q - 1)].clone() } else { a2[idx(q - 1, q)].transpose() };
                (prev + model.cov_block(p, q - 1)) * maps[q - 2].transpose()
            };
            let cov = &v1 + &v2 + &v3 + model.cov_block(p, q);
            a1[idx(p, q)] = v1;
            a2[idx(p, q)] = v2;
            a3[idx(p, q)] = v3;
            table.set(p, q, cov);
        }
    }
    table
}

/// Covariance table by the direct double sums, recomputing every pathway product.
pub fn state_covariance_direct(model: &LinearGaussianModel, theta: &[DMatrix<f64>]) -> CovTable {
    let (n, h) = (model.n(), model.horizon());
    let mut table = CovTable::new(n, h);
    for q in 1..=h {
        for p in 1..=q {
            let mut acc = DMatrix::zeros(n, n);
            for i in 1..=p {
                for j in 1..=q {
                    let ri = pathway_from_coefficients(model, theta, i, p - 1);
                    let rj = pathway_from_coefficients(model, theta, j, q - 1);
                    acc += ri * model.cov_block(i, j) * rj.transpose();
                }
            }
            table.set(p, q, acc);
        }
    }
    table
}

/// `Var(sum_t alpha_t s_t) = sum_{p,q} alpha_p Cov(s_p, s_q) alpha_q^T`.
pub fn reward_variance(alpha: &[RowDVector<f64>], table: &CovTable) -> f64 {
    let h = table.horizon();
    let mut total = 0.0;
    for p in 1..=h {
        for q in 1..=h {
            total += (&alpha[p - 1] * table.get(p, q) * alpha[q - 1].transpose())[(0, 0)];
        }
    }
    total
}
