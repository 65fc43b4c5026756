//! Fed-batch citrate fermentation kinetics.
//!
//! State `(X_f, C, S, N, V)`: lipid-free cell mass, citrate, substrate,
//! nitrogen (g/L) and working volume (L). The action is the substrate feed
//! rate `F_S` (L/h). Lipid `L` evolves alongside as an auxiliary,
//! noise-free channel. One period is one explicit Euler step of length `dt`.

use serde::{Deserialize, Serialize};

use super::noise::{NoiseKind, NoiseSpec};
use super::{Parameterized, PkgModel};
use crate::error::{Error, Result};

pub const X_F: usize = 0;
pub const CITRATE: usize = 1;
pub const SUBSTRATE: usize = 2;
pub const NITROGEN: usize = 3;
pub const VOLUME: usize = 4;
pub const STATE_LABELS: [&str; 5] = ["X_f", "C", "S", "N", "V"];
pub const ACTION_LABELS: [&str; 1] = ["F_S"];

/// Fixed kinetic constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KineticConstants {
    pub alpha_l: f64,
    pub c_max: f64,
    pub k_in: f64,
    pub k_is: f64,
    pub k_ix: f64,
    pub k_n: f64,
    pub k_o: f64,
    pub k_s: f64,
    pub k_sl: f64,
    pub v_evap: f64,
    pub y_cs: f64,
    pub y_ls: f64,
    pub y_xn: f64,
    pub y_xs: f64,
    pub s_f: f64,
}

impl Default for KineticConstants {
    fn default() -> Self {
        Self {
            alpha_l: 0.1273,
            c_max: 130.90,
            k_in: 0.1229,
            k_is: 612.18,
            k_ix: 59.974,
            k_n: 0.0200,
            k_o: 0.3309,
            k_s: 0.0430,
            k_sl: 0.0217,
            v_evap: 0.0026,
            y_cs: 0.6826,
            y_ls: 0.3574,
            y_xn: 10.0,
            y_xs: 0.2386,
            s_f: 917.00,
        }
    }
}

/// The uncertain kinetic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertainParams {
    pub mu_max: f64,
    pub beta_lc_max: f64,
    pub m_s: f64,
    pub r_l: f64,
}

impl UncertainParams {
    pub const LABELS: [&'static str; 4] = ["mu_max", "beta_lc_max", "m_s", "r_l"];

    pub fn to_array(self) -> [f64; 4] {
        [self.mu_max, self.beta_lc_max, self.m_s, self.r_l]
    }

    pub fn from_slice(w: &[f64]) -> Result<Self> {
        if w.len() != 4 {
            return Err(Error::dims(format!("expected 4 kinetic parameters, got {}", w.len())));
        }
        Ok(Self { mu_max: w[0], beta_lc_max: w[1], m_s: w[2], r_l: w[3] })
    }
}

impl Default for UncertainParams {
    fn default() -> Self {
        Self { mu_max: 0.30, beta_lc_max: 0.10, m_s: 0.02, r_l: 0.40 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticNoise {
    pub kind: NoiseKind,
    pub scale: Vec<f64>,
}

impl Default for KineticNoise {
    fn default() -> Self {
        Self { kind: NoiseKind::Multiplicative, scale: vec![0.05, 0.05, 0.05, 0.05, 0.01] }
    }
}

/// Serializable description of a kinetic model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KineticSpec {
    pub horizon: usize,
    pub dt: f64,
    pub oxygen: f64,
    pub initial_state: Vec<f64>,
    pub initial_lipid: f64,
    pub constants: KineticConstants,
    pub params: UncertainParams,
    pub noise: KineticNoise,
}

impl Default for KineticSpec {
    fn default() -> Self {
        Self {
            horizon: 8,
            dt: 1.0,
            oxygen: 50.0,
            initial_state: vec![0.5, 0.0, 60.0, 1.5, 1.0],
            initial_lipid: 0.0,
            constants: KineticConstants::default(),
            params: UncertainParams::default(),
            noise: KineticNoise::default(),
        }
    }
}

/// Specific rates at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub mu: f64,
    pub beta_lc: f64,
    pub beta_c: f64,
    pub beta_l: f64,
    pub q_l: f64,
    pub q_s: f64,
}

/// Result of one Euler step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: [f64; 5],
    pub lipid: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "KineticSpec", into = "KineticSpec")]
pub struct KineticModel {
    spec: KineticSpec,
    noise: NoiseSpec,
}

impl TryFrom<KineticSpec> for KineticModel {
    type Error = Error;

    fn try_from(spec: KineticSpec) -> Result<Self> {
        KineticModel::new(spec)
    }
}

impl From<KineticModel> for KineticSpec {
    fn from(m: KineticModel) -> Self {
        m.spec
    }
}

impl Default for KineticModel {
    fn default() -> Self {
        Self::new(KineticSpec::default()).expect("default kinetic spec is valid")
    }
}

impl KineticModel {
    pub fn new(spec: KineticSpec) -> Result<Self> {
        if spec.horizon < 1 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if !(spec.dt > 0.0) {
            return Err(Error::invalid("time step must be positive"));
        }
        if spec.initial_state.len() != 5 {
            return Err(Error::dims("kinetic initial state must have 5 components"));
        }
        if spec.noise.scale.len() != 5 {
            return Err(Error::dims("kinetic noise needs 5 scales"));
        }
        if spec.noise.scale.iter().any(|s| *s < 0.0) {
            return Err(Error::invalid("noise scales must be non-negative"));
        }
        let noise = NoiseSpec::Independent { kind: spec.noise.kind, scale: spec.noise.scale.clone(), dt: spec.dt };
        Ok(Self { spec, noise })
    }

    pub fn spec(&self) -> &KineticSpec {
        &self.spec
    }

    pub fn params(&self) -> UncertainParams {
        self.spec.params
    }

    pub fn with_params(&self, params: UncertainParams) -> Self {
        let mut spec = self.spec.clone();
        spec.params = params;
        Self { spec, noise: self.noise.clone() }
    }

    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        let mut spec = self.spec.clone();
        spec.horizon = horizon;
        Self::new(spec)
    }

    pub fn rates(&self, state: &[f64], lipid: f64) -> Rates {
        let k = &self.spec.constants;
        let p = &self.spec.params;
        let (x, c, s, n) = (state[X_F], state[CITRATE], state[SUBSTRATE], state[NITROGEN]);
        let o = self.spec.oxygen;
        let monod_s = s / (k.k_s + s);
        let inhib_s = 1.0 / (1.0 + s / k.k_is);
        let monod_o = o / (k.k_o + o);
        let inhib_x = 1.0 / (1.0 + x / k.k_ix);
        let mu = p.mu_max * monod_s * inhib_s * (n / (k.k_n + n)) * monod_o * inhib_x;
        let tolerance = (1.0 - c / k.c_max).max(0.0);
        let beta_lc =
            (1.0 / (1.0 + n / k.k_in)) * monod_s * inhib_s * monod_o * inhib_x * tolerance * p.beta_lc_max;
        let beta_c = 2.0 * (1.0 - p.r_l) * beta_lc;
        let beta_l = 2.0 * p.r_l * beta_lc;
        let lipid_share = if lipid + x > 0.0 { lipid / (lipid + x) } else { 0.0 };
        let q_l = k.alpha_l * mu + p.r_l * beta_lc - k.k_sl * lipid_share * monod_o;
        let q_s = mu / k.y_xs + monod_o * monod_s * p.m_s + beta_c / k.y_cs + beta_l / k.y_ls;
        Rates { mu, beta_lc, beta_c, beta_l, q_l, q_s }
    }

    /// Euler mean of the next state and lipid before noise and clamping.
    pub fn euler_mean(&self, state: &[f64], lipid: f64, feed: f64) -> ([f64; 5], f64) {
        let k = &self.spec.constants;
        let dt = self.spec.dt;
        let r = self.rates(state, lipid);
        let (x, c, s, n, v) = (state[X_F], state[CITRATE], state[SUBSTRATE], state[NITROGEN], state[VOLUME]);
        let f_b = v / 1000.0 * (7.14 / k.y_xn * r.mu * x + 1.59 * r.beta_c * x);
        let dil = (f_b + feed) / v - k.v_evap / v;
        let next = [
            x + (r.mu * x - dil * x) * dt,
            c + (r.beta_c * x - dil * c) * dt,
            s + (-r.q_s * x + feed * k.s_f / v - dil * s) * dt,
            n + (-r.mu * x / k.y_xn - dil * n) * dt,
            v + (f_b + feed - k.v_evap) * dt,
        ];
        let lipid_next = lipid + (r.q_l * x - dil * lipid) * dt;
        (next, lipid_next)
    }

    /// One period from `state` with feed `action[0]`, adding already scaled residuals.
    pub fn advance(&self, period: usize, state: &[f64], lipid: f64, feed: f64, residual: &[f64]) -> Result<Step> {
        if !(state[VOLUME] > 0.0) {
            return Err(Error::NonPositiveVolume { period });
        }
        let (mean, lipid_next) = self.euler_mean(state, lipid, feed);
        let mut next = [0.0; 5];
        for i in 0..5 {
            next[i] = mean[i] + residual[i];
        }
        for i in [X_F, CITRATE, SUBSTRATE, NITROGEN] {
            next[i] = next[i].max(0.0);
        }
        let lipid_next = lipid_next.max(0.0);
        if next.iter().any(|v| !v.is_finite()) || !lipid_next.is_finite() {
            return Err(Error::NonFiniteState { period: period + 1 });
        }
        if next[VOLUME] <= 0.0 {
            return Err(Error::NonPositiveVolume { period: period + 1 });
        }
        Ok(Step { state: next, lipid: lipid_next })
    }

    /// One period driven by a standard-normal draw per state component.
    pub fn step(&self, state: &[f64], lipid: f64, action: &[f64], noise_draw: &[f64]) -> Result<Step> {
        let residual: Vec<f64> = (0..5)
            .map(|k| {
                NoiseSpec::independent_sd(self.spec.noise.kind, &self.spec.noise.scale, self.spec.dt, k, state[k])
                    * noise_draw[k]
            })
            .collect();
        self.advance(0, state, lipid, action[0], &residual)
    }
}

impl PkgModel for KineticModel {
    fn state_dim(&self) -> usize {
        5
    }

    fn action_dim(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.spec.horizon
    }

    fn initial_state(&self) -> &[f64] {
        &self.spec.initial_state
    }

    fn state_labels(&self) -> Vec<String> {
        STATE_LABELS.iter().map(|s| s.to_string()).collect()
    }

    fn action_labels(&self) -> Vec<String> {
        ACTION_LABELS.iter().map(|s| s.to_string()).collect()
    }

    fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    fn initial_aux(&self) -> Vec<f64> {
        vec![self.spec.initial_lipid]
    }

    fn initial(&self, residual: &[f64], out: &mut [f64]) -> Result<()> {
        for i in 0..5 {
            out[i] = self.spec.initial_state[i] + residual[i];
        }
        for i in [X_F, CITRATE, SUBSTRATE, NITROGEN] {
            out[i] = out[i].max(0.0);
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { period: 1 });
        }
        if out[VOLUME] <= 0.0 {
            return Err(Error::NonPositiveVolume { period: 1 });
        }
        Ok(())
    }

    fn transition(
        &self,
        t: usize,
        state: &[f64],
        aux: &mut [f64],
        action: &[f64],
        residual: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        let step = self.advance(t, state, aux[0], action[0], residual)?;
        out[..5].copy_from_slice(&step.state);
        aux[0] = step.lipid;
        Ok(())
    }
}

impl Parameterized for KineticModel {
    fn parameter_labels(&self) -> Vec<String> {
        UncertainParams::LABELS.iter().map(|s| s.to_string()).collect()
    }

    fn parameters(&self) -> Vec<f64> {
        self.spec.params.to_array().to_vec()
    }

    fn with_parameters(&self, w: &[f64]) -> Result<Self> {
        Ok(self.with_params(UncertainParams::from_slice(w)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_biomass_is_a_fixed_point_except_evaporation() {
        let mut spec = KineticSpec::default();
        spec.initial_state = vec![0.0, 3.0, 40.0, 1.0, 2.0];
        let m = KineticModel::new(spec).unwrap();
        let s = [0.0, 3.0, 40.0, 1.0, 2.0];
        let step = m.advance(1, &s, 0.0, 0.0, &[0.0; 5]).unwrap();
        assert_eq!(step.state[X_F], 0.0);
        assert!((step.state[VOLUME] - (2.0 - 0.0026)).abs() < 1e-15);
        // Evaporation concentrates the dissolved species.
        assert!((step.state[CITRATE] - (3.0 + 0.0026 / 2.0 * 3.0)).abs() < 1e-12);
    }

    #[test]
    fn citrate_production_stops_at_tolerance() {
        let m = KineticModel::default();
        let c_max = m.spec().constants.c_max;
        let r = m.rates(&[5.0, c_max, 30.0, 0.5, 1.0], 0.1);
        assert_eq!(r.beta_lc, 0.0);
        assert_eq!(r.beta_c, 0.0);
        assert!(r.mu > 0.0);
    }

    #[test]
    fn rates_match_hand_evaluation() {
        let m = KineticModel::default();
        let k = KineticConstants::default();
        let p = UncertainParams::default();
        let (x, c, s, n, o, l) = (2.0, 10.0, 50.0, 0.8, 50.0, 0.5);
        let r = m.rates(&[x, c, s, n, 1.0], l);
        let mu = p.mu_max * s / (k.k_s + s) / (1.0 + s / k.k_is) * n / (k.k_n + n) * o / (k.k_o + o) / (1.0 + x / k.k_ix);
        let blc = 1.0 / (1.0 + n / k.k_in) * s / (k.k_s + s) / (1.0 + s / k.k_is) * o / (k.k_o + o)
            / (1.0 + x / k.k_ix)
            * (1.0 - c / k.c_max)
            * p.beta_lc_max;
        assert!((r.mu - mu).abs() < 1e-15);
        assert!((r.beta_lc - blc).abs() < 1e-15);
        assert!((r.beta_c + r.beta_l - 2.0 * blc).abs() < 1e-15);
    }

    #[test]
    fn volume_failure_is_reported() {
        let m = KineticModel::default();
        let err = m.advance(3, &[1.0, 0.0, 10.0, 1.0, 0.001], 0.0, 0.0, &[0.0; 5]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveVolume { period: 4 }));
        let err = m.advance(3, &[1.0, 0.0, 10.0, 1.0, 0.0], 0.0, 0.0, &[0.0; 5]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveVolume { period: 3 }));
    }

    #[test]
    fn concentrations_are_clamped() {
        let m = KineticModel::default();
        let step = m.advance(1, &[0.5, 0.0, 60.0, 1.5, 1.0], 0.0, 0.0, &[-10.0, -10.0, 0.0, -10.0, 0.0]).unwrap();
        assert_eq!(step.state[X_F], 0.0);
        assert_eq!(step.state[CITRATE], 0.0);
        assert_eq!(step.state[NITROGEN], 0.0);
    }
}
