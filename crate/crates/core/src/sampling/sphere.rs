//! Maps from the unit cube to the unit sphere `S^{q-1}` in `R^q`.
//!
//! Three constructions are provided, each mapping uniform cube points to
//! uniform sphere points:
//!
//! * Box-Muller (`bmt`): pairs of cube coordinates become Gaussian pairs,
//!   which are normalised.
//! * Spherical coordinates (`sct`): each polar angle is obtained by inverting
//!   its marginal distribution with bisection.
//! * Dirichlet-radius construction (`tfww`): radii of successive coordinate
//!   circles are built from products of powered uniforms, then each circle
//!   gets a uniform angle.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereMethod {
    Bmt,
    Sct,
    Tfww,
}

impl SphereMethod {
    pub const ALL: [SphereMethod; 3] = [SphereMethod::Bmt, SphereMethod::Sct, SphereMethod::Tfww];

    pub fn name(self) -> &'static str {
        match self {
            SphereMethod::Bmt => "bmt",
            SphereMethod::Sct => "sct",
            SphereMethod::Tfww => "tfww",
        }
    }

    /// Number of cube coordinates consumed to produce one point of `S^{q-1}`.
    pub fn cube_dimension(self, ambient: usize) -> usize {
        match (self, ambient) {
            (_, 0) => 0,
            (_, 1) => 1,
            (SphereMethod::Bmt, q) => q + (q % 2),
            (_, q) => q - 1,
        }
    }

    pub fn map(self, cube: &[f64], ambient: usize) -> Result<Vec<f64>> {
        match self {
            SphereMethod::Bmt => bmt(cube, ambient),
            SphereMethod::Sct => sct(cube, ambient),
            SphereMethod::Tfww => tfww(cube, ambient),
        }
    }
}

fn check(cube: &[f64], ambient: usize, method: SphereMethod) -> Result<()> {
    if ambient == 0 {
        return Err(Error::invalid("sphere ambient dimension must be at least 1"));
    }
    let need = method.cube_dimension(ambient);
    if cube.len() != need {
        return Err(Error::dims(format!(
            "{} needs {need} cube coordinates for ambient dimension {ambient}, got {}",
            method.name(),
            cube.len()
        )));
    }
    if let Some(c) = cube.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::invalid(format!("cube coordinate {c} outside [0,1]")));
    }
    Ok(())
}

#[inline]
fn sign_point(c: f64) -> Vec<f64> {
    vec![if c < 0.5 { -1.0 } else { 1.0 }]
}

/// Box-Muller transform followed by normalisation.
pub fn bmt(cube: &[f64], ambient: usize) -> Result<Vec<f64>> {
    check(cube, ambient, SphereMethod::Bmt)?;
    if ambient == 1 {
        return Ok(sign_point(cube[0]));
    }
    let mut z = Vec::with_capacity(cube.len());
    for pair in cube.chunks_exact(2) {
        let u = if pair[0] > 0.0 { pair[0] } else { f64::MIN_POSITIVE };
        let r = (-2.0 * u.ln()).sqrt();
        let (s, c) = (TWO_PI * pair[1]).sin_cos();
        z.push(r * c);
        z.push(r * s);
    }
    z.truncate(ambient);
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        // Every radius vanished (all radial inputs equal to one); fall back
        // to the first axis direction.
        let mut x = vec![0.0; ambient];
        x[0] = 1.0;
        return Ok(x);
    }
    z.iter_mut().for_each(|v| *v /= norm);
    Ok(z)
}

/// `I_n(x) = \int_0^x sin^n(t) dt` by the standard reduction formula.
pub fn sine_power_integral(n: usize, x: f64) -> f64 {
    let (s, c) = x.sin_cos();
    let (mut acc, mut k, mut pow) = if n % 2 == 0 { (x, 0, s) } else { (1.0 - c, 1, s * s) };
    while k < n {
        k += 2;
        acc = -c * pow / k as f64 + (k - 1) as f64 / k as f64 * acc;
        pow *= s * s;
    }
    acc
}

fn invert_angle_cdf(n: usize, target: f64) -> f64 {
    let total = sine_power_integral(n, PI);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if sine_power_integral(n, PI * mid) / total < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Spherical-coordinate transform with inverse-CDF polar angles.
pub fn sct(cube: &[f64], ambient: usize) -> Result<Vec<f64>> {
    check(cube, ambient, SphereMethod::Sct)?;
    let q = ambient;
    if q == 1 {
        return Ok(sign_point(cube[0]));
    }
    let mut x = vec![0.0; q];
    let mut prod = 1.0;
    for j in 1..q {
        let angle = if j <= q - 2 {
            PI * invert_angle_cdf(q - j - 1, cube[j - 1])
        } else {
            TWO_PI * cube[j - 1]
        };
        let (s, c) = angle.sin_cos();
        x[j - 1] = prod * c;
        prod *= s;
    }
    x[q - 1] = prod;
    Ok(x)
}

/// Dirichlet-radius construction.
pub fn tfww(cube: &[f64], ambient: usize) -> Result<Vec<f64>> {
    check(cube, ambient, SphereMethod::Tfww)?;
    let q = ambient;
    if q == 1 {
        return Ok(sign_point(cube[0]));
    }
    let a = q / 2;
    let odd = q % 2 == 1;
    // c is 1-based in the construction; c(i) = cube[i - 1].
    let c = |i: usize| cube[i - 1];
    let mut g = vec![0.0; a + 1];
    g[a] = 1.0;
    for j in (1..a).rev() {
        let expo = if odd { 2.0 / (2 * j + 1) as f64 } else { 1.0 / j as f64 };
        g[j] = g[j + 1] * c(j).powf(expo);
    }
    let d: Vec<f64> = (1..=a).map(|l| (g[l] - g[l - 1]).max(0.0).sqrt()).collect();
    let mut x = vec![0.0; q];
    if odd {
        let ca = c(a);
        x[0] = d[0] * (1.0 - 2.0 * ca);
        let r = d[0] * 2.0 * (ca * (1.0 - ca)).max(0.0).sqrt();
        let (s, co) = (TWO_PI * c(a + 1)).sin_cos();
        x[1] = r * co;
        x[2] = r * s;
        for l in 2..=a {
            let (s, co) = (TWO_PI * c(a + l)).sin_cos();
            x[2 * l - 1] = d[l - 1] * co;
            x[2 * l] = d[l - 1] * s;
        }
    } else {
        for l in 1..=a {
            let (s, co) = (TWO_PI * c(a + l - 1)).sin_cos();
            x[2 * l - 2] = d[l - 1] * co;
            x[2 * l - 1] = d[l - 1] * s;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn sine_integral_matches_quadrature() {
        for n in 0..9 {
            for &x in &[0.3, 1.0, 2.0, PI] {
                let steps = 20_000;
                let h = x / steps as f64;
                let mut s = 0.0;
                for i in 0..steps {
                    let t = (i as f64 + 0.5) * h;
                    s += t.sin().powi(n as i32) * h;
                }
                assert!((sine_power_integral(n, x) - s).abs() < 1e-7, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn cube_dimensions() {
        assert_eq!(SphereMethod::Bmt.cube_dimension(5), 6);
        assert_eq!(SphereMethod::Bmt.cube_dimension(4), 4);
        assert_eq!(SphereMethod::Sct.cube_dimension(5), 4);
        assert_eq!(SphereMethod::Tfww.cube_dimension(5), 4);
        for m in SphereMethod::ALL {
            assert_eq!(m.cube_dimension(1), 1);
        }
    }

    #[test]
    fn two_sphere_is_archimedes_map() {
        let x = tfww(&[0.25, 0.0], 3).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!((x[1] - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!(x[2].abs() < 1e-15);
    }

    #[test]
    fn boundary_inputs_stay_on_sphere() {
        for q in 2..9 {
            for m in SphereMethod::ALL {
                for fill in [0.0, 1.0, 0.5] {
                    let cube = vec![fill; m.cube_dimension(q)];
                    let x = m.map(&cube, q).unwrap();
                    assert!((norm(&x) - 1.0).abs() < 1e-12, "{m:?} q={q} fill={fill}");
                }
            }
        }
    }

    #[test]
    fn rejects_wrong_lengths() {
        assert!(bmt(&[0.1, 0.2, 0.3], 3).is_err());
        assert!(sct(&[0.1], 3).is_err());
        assert!(tfww(&[0.1, 1.5], 3).is_err());
    }
}
