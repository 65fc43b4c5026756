//! Per-period rewards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RewardSpec {
    /// `r_t = m_t + b_t^T a_t + c_t^T s_t`.
    Linear { m: Vec<f64>, b: Vec<Vec<f64>>, c: Vec<Vec<f64>> },
    /// Feed cost before the harvest and a citrate-value payoff at the final period.
    Fermentation {
        #[serde(default = "default_feed_cost")]
        feed_cost: f64,
        #[serde(default = "default_terminal_offset")]
        terminal_offset: f64,
        #[serde(default = "default_terminal_citrate")]
        terminal_citrate: f64,
    },
}

fn default_feed_cost() -> f64 {
    534.52
}

fn default_terminal_offset() -> f64 {
    -15.0
}

fn default_terminal_citrate() -> f64 {
    1.29
}

impl RewardSpec {
    pub fn fermentation() -> Self {
        RewardSpec::Fermentation {
            feed_cost: default_feed_cost(),
            terminal_offset: default_terminal_offset(),
            terminal_citrate: default_terminal_citrate(),
        }
    }

    pub fn validate(&self, horizon: usize, n: usize, m: usize) -> Result<()> {
        match self {
            RewardSpec::Linear { m: mt, b, c } => {
                if mt.len() != horizon || b.len() != horizon || c.len() != horizon {
                    return Err(Error::dims(format!("linear reward needs {horizon} periods")));
                }
                if b.iter().any(|v| v.len() != m) || c.iter().any(|v| v.len() != n) {
                    return Err(Error::dims("linear reward coefficients do not match the model"));
                }
                Ok(())
            }
            RewardSpec::Fermentation { .. } => {
                if n < 2 || m < 1 {
                    return Err(Error::dims("fermentation reward needs citrate in the state and a feed action"));
                }
                Ok(())
            }
        }
    }

    /// Reward at 1-based period `t` of a horizon-`h` trajectory.
    pub fn reward(&self, t: usize, h: usize, state: &[f64], action: &[f64]) -> f64 {
        match self {
            RewardSpec::Linear { m, b, c } => {
                let i = t - 1;
                let mut r = m[i];
                r += b[i].iter().zip(action).map(|(x, y)| x * y).sum::<f64>();
                r += c[i].iter().zip(state).map(|(x, y)| x * y).sum::<f64>();
                r
            }
            RewardSpec::Fermentation { feed_cost, terminal_offset, terminal_citrate } => {
                if t < h {
                    -feed_cost * action[0]
                } else {
                    terminal_offset + terminal_citrate * state[crate::model::kinetics::CITRATE]
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fermentation_reward() {
        let r = RewardSpec::fermentation();
        assert!((r.reward(1, 3, &[0.0, 5.0], &[0.01]) + 5.3452).abs() < 1e-12);
        assert!((r.reward(3, 3, &[0.0, 10.0], &[0.01]) - (-15.0 + 12.9)).abs() < 1e-12);
    }

    #[test]
    fn linear_reward() {
        let r = RewardSpec::Linear { m: vec![1.0], b: vec![vec![2.0]], c: vec![vec![3.0, -1.0]] };
        r.validate(1, 2, 1).unwrap();
        assert_eq!(r.reward(1, 1, &[1.0, 4.0], &[0.5]), 1.0 + 1.0 + 3.0 - 4.0);
        assert!(r.validate(2, 2, 1).is_err());
    }
}
