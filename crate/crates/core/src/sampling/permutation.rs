//! Permutation batches and their generators.
//!
//! Permutations are stored 0-based. The CSV representation is 1-based.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sobol::{DigitalShift, SobolSequence};
use super::sphere::SphereMethod;
use crate::error::{Error, Result};
use crate::rng;

/// A batch of permutations of `{0, .., size-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationBatch {
    size: usize,
    perms: Vec<Vec<usize>>,
}

impl PermutationBatch {
    pub fn new(size: usize, perms: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; size];
        for p in &perms {
            if p.len() != size {
                return Err(Error::dims(format!("permutation of length {} in a batch of size {size}", p.len())));
            }
            seen.iter_mut().for_each(|s| *s = false);
            for &i in p {
                if i >= size || seen[i] {
                    return Err(Error::invalid(format!("{p:?} is not a permutation of 0..{size}")));
                }
                seen[i] = true;
            }
        }
        Ok(Self { size, perms })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn len(&self) -> usize {
        self.perms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perms.is_empty()
    }

    pub fn get(&self, d: usize) -> &[usize] {
        &self.perms[d]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.perms.iter().map(Vec::as_slice)
    }

    pub fn into_inner(self) -> Vec<Vec<usize>> {
        self.perms
    }

    /// The batch followed by the reverse of each of its permutations.
    pub fn with_reverses(&self) -> Self {
        let mut perms = self.perms.clone();
        perms.extend(self.perms.iter().map(|p| reverse(p)));
        Self { size: self.size, perms }
    }
}

pub fn reverse(p: &[usize]) -> Vec<usize> {
    p.iter().rev().copied().collect()
}

/// Map a point on `S^{s-2}` to a permutation of `{0, .., s-1}`.
///
/// The point is lifted to the hyperplane orthogonal to the all-ones vector of
/// `R^s` with a Helmert basis and the coordinates are ranked in ascending
/// order, ties broken by index.
pub fn sphere_to_permutation(x: &[f64]) -> Vec<usize> {
    let s = x.len() + 1;
    let mut lifted = vec![0.0; s];
    // Row k (1-based) of the basis has k entries 1/sqrt(k^2+k) then -k/sqrt(k^2+k).
    let mut tail = 0.0;
    for j in (1..=s).rev() {
        if j <= s - 1 {
            let k = j as f64;
            tail += x[j - 1] / (k * k + k).sqrt();
        }
        let mut v = tail;
        if j >= 2 {
            let k = (j - 1) as f64;
            v -= k * x[j - 2] / (k * k + k).sqrt();
        }
        lifted[j - 1] = v;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    idx.sort_by(|&a, &b| lifted[a].total_cmp(&lifted[b]));
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMethod {
    /// Independent uniform shuffles.
    Random,
    Bmt,
    Sct,
    Tfww,
    /// Sobol points through the Dirichlet-radius map, each permutation paired with its reverse.
    TfwwVrt,
}

impl PermutationMethod {
    pub const ALL: [PermutationMethod; 5] = [
        PermutationMethod::Random,
        PermutationMethod::Bmt,
        PermutationMethod::Sct,
        PermutationMethod::Tfww,
        PermutationMethod::TfwwVrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PermutationMethod::Random => "random",
            PermutationMethod::Bmt => "bmt",
            PermutationMethod::Sct => "sct",
            PermutationMethod::Tfww => "tfww",
            PermutationMethod::TfwwVrt => "tfww-vrt",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::invalid(format!("unknown permutation method '{name}'")))
    }

    pub fn sphere(self) -> Option<SphereMethod> {
        match self {
            PermutationMethod::Random => None,
            PermutationMethod::Bmt => Some(SphereMethod::Bmt),
            PermutationMethod::Sct => Some(SphereMethod::Sct),
            PermutationMethod::Tfww | PermutationMethod::TfwwVrt => Some(SphereMethod::Tfww),
        }
    }

    pub fn default_cube(self) -> CubeSource {
        match self {
            PermutationMethod::TfwwVrt => CubeSource::Sobol,
            _ => CubeSource::Pseudo,
        }
    }
}

impl std::fmt::Display for PermutationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where cube points come from before the sphere map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubeSource {
    Pseudo,
    Sobol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationSampler {
    pub method: PermutationMethod,
    pub cube: CubeSource,
    pub seed: u64,
}

impl PermutationSampler {
    pub fn new(method: PermutationMethod, seed: u64) -> Self {
        Self { method, cube: method.default_cube(), seed }
    }

    pub fn with_cube(mut self, cube: CubeSource) -> Self {
        self.cube = cube;
        self
    }

    pub fn sample(&self, size: usize, count: usize) -> Result<PermutationBatch> {
        if size == 0 {
            return Err(Error::invalid("permutation size must be at least 1"));
        }
        let base = match self.method {
            PermutationMethod::TfwwVrt => {
                if count % 2 != 0 {
                    return Err(Error::invalid(format!(
                        "antithetic sampling needs an even count, got {count}"
                    )));
                }
                count / 2
            }
            _ => count,
        };
        let perms = match self.method.sphere() {
            None => (0..base)
                .into_par_iter()
                .map(|i| {
                    let mut p: Vec<usize> = (0..size).collect();
                    let mut r = rng::stream(self.seed, &[rng::domain::PERMUTATION, i as u64]);
                    p.shuffle(&mut r);
                    p
                })
                .collect(),
            Some(_) if size == 1 => vec![vec![0]; base],
            Some(sphere) => {
                let ambient = size - 1;
                let cube = cube_points(self.cube, sphere.cube_dimension(ambient), base, self.seed)?;
                cube.par_iter()
                    .map(|c| sphere.map(c, ambient).map(|x| sphere_to_permutation(&x)))
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let batch = PermutationBatch { size, perms };
        Ok(if self.method == PermutationMethod::TfwwVrt { batch.with_reverses() } else { batch })
    }
}

/// `count` cube points of dimension `dim`, pseudo-random or randomized Sobol.
pub fn cube_points(source: CubeSource, dim: usize, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    match source {
        CubeSource::Pseudo => Ok((0..count)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(seed, &[rng::domain::CUBE, i as u64]);
                (0..dim).map(|_| r.random::<f64>()).collect()
            })
            .collect()),
        CubeSource::Sobol => {
            let mut seq = SobolSequence::new(dim, &DigitalShift::Seeded(seed))?;
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut p = vec![0.0; dim];
                seq.next_into(&mut p);
                out.push(p);
            }
            Ok(out)
        }
    }
}

/// `count` permutations of `{0, .., size-1}` with the method's default cube source.
pub fn sample_permutations(size: usize, count: usize, method: PermutationMethod, seed: u64) -> Result<PermutationBatch> {
    PermutationSampler::new(method, seed).sample(size, count)
}

/// Mean absolute deviation from one half of the pairwise ordering frequencies.
pub fn discrepancy_score(batch: &PermutationBatch) -> f64 {
    let s = batch.size();
    if s < 2 || batch.is_empty() {
        return 0.0;
    }
    let positions: Vec<Vec<usize>> = batch
        .iter()
        .map(|p| {
            let mut pos = vec![0; s];
            for (k, &i) in p.iter().enumerate() {
                pos[i] = k;
            }
            pos
        })
        .collect();
    let d = batch.len() as f64;
    let mut total = 0.0;
    for i in 0..s {
        for j in i + 1..s {
            let before = positions.iter().filter(|pos| pos[i] < pos[j]).count();
            total += (before as f64 / d - 0.5).abs();
        }
    }
    total / (s * (s - 1) / 2) as f64
}

pub fn write_permutations_csv<W: Write>(mut w: W, batch: &PermutationBatch, method: &str, seed: u64) -> Result<()> {
    writeln!(w, "# method={method} seed={seed} s={}", batch.size())?;
    for p in batch.iter() {
        let row: Vec<String> = p.iter().map(|i| (i + 1).to_string()).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Parsed permutation file: the batch plus its header fields.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationFile {
    pub method: String,
    pub seed: u64,
    pub batch: PermutationBatch,
}

pub fn read_permutations_csv<R: BufRead>(r: R) -> Result<PermutationFile> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty permutation file".into()))??;
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse(format!("missing header line, got '{header}'")))?;
    let (mut method, mut seed, mut size) = (None, None, None);
    for field in body.split_whitespace() {
        match field.split_once('=') {
            Some(("method", v)) => method = Some(v.to_string()),
            Some(("seed", v)) => seed = v.parse().ok(),
            Some(("s", v)) => size = v.parse().ok(),
            _ => return Err(Error::Parse(format!("unexpected header field '{field}'"))),
        }
    }
    let (Some(method), Some(seed), Some(size)) = (method, seed, size) else {
        return Err(Error::Parse(format!("incomplete header '{header}'")));
    };
    let mut perms = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p = line
            .split(',')
            .map(|f| match f.trim().parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(Error::Parse(format!("bad permutation entry '{f}'"))),
            })
            .collect::<Result<Vec<_>>>()?;
        perms.push(p);
    }
    Ok(PermutationFile { method, seed, batch: PermutationBatch::new(size, perms)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helmert_lift_example() {
        assert_eq!(sphere_to_permutation(&[1.0, 0.0]), vec![1, 2, 0]);
    }

    #[test]
    fn lifted_point_is_orthogonal_to_ones() {
        // Recompute the lift with the explicit basis matrix.
        let x = [0.3, -0.5, 0.1, 0.7];
        let s = x.len() + 1;
        let mut lifted = vec![0.0; s];
        for k in 1..s {
            let norm = ((k * k + k) as f64).sqrt();
            for (j, l) in lifted.iter_mut().enumerate() {
                let t = if j < k { 1.0 / norm } else if j == k { -(k as f64) / norm } else { 0.0 };
                *l += t * x[k - 1];
            }
        }
        assert!(lifted.iter().sum::<f64>().abs() < 1e-14);
        let mut idx: Vec<usize> = (0..s).collect();
        idx.sort_by(|&a, &b| lifted[a].total_cmp(&lifted[b]));
        assert_eq!(sphere_to_permutation(&x), idx);
    }

    #[test]
    fn discrepancy_extremes() {
        let p = vec![2, 0, 3, 1];
        let pair = PermutationBatch::new(4, vec![p.clone(), reverse(&p)]).unwrap();
        assert_eq!(discrepancy_score(&pair), 0.0);
        let same = PermutationBatch::new(4, vec![p.clone(), p.clone(), p]).unwrap();
        assert_eq!(discrepancy_score(&same), 0.5);
    }

    #[test]
    fn vrt_requires_even_count() {
        assert!(sample_permutations(5, 7, PermutationMethod::TfwwVrt, 1).is_err());
        let b = sample_permutations(5, 8, PermutationMethod::TfwwVrt, 1).unwrap();
        for d in 0..4 {
            assert_eq!(b.get(d + 4), reverse(b.get(d)).as_slice());
        }
    }

    #[test]
    fn tiny_sizes() {
        for m in PermutationMethod::ALL {
            let b = sample_permutations(1, 4, m, 3).unwrap();
            assert!(b.iter().all(|p| p == [0]));
            let b = sample_permutations(2, 4, m, 3).unwrap();
            assert_eq!(b.len(), 4);
        }
    }

    #[test]
    fn csv_round_trip() {
        let b = sample_permutations(6, 5, PermutationMethod::Tfww, 9).unwrap();
        let mut buf = Vec::new();
        write_permutations_csv(&mut buf, &b, "tfww", 9).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# method=tfww seed=9 s=6\n"));
        let back = read_permutations_csv(buf.as_slice()).unwrap();
        assert_eq!(back.batch, b);
        assert_eq!(back.seed, 9);
        assert_eq!(back.method, "tfww");
    }

    #[test]
    fn rejects_non_permutations() {
        assert!(PermutationBatch::new(3, vec![vec![0, 0, 1]]).is_err());
        assert!(PermutationBatch::new(3, vec![vec![0, 1]]).is_err());
        assert!(read_permutations_csv("# method=x seed=1 s=2\n1,3\n".as_bytes()).is_err());
    }
}
