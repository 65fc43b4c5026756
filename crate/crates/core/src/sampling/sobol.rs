//! Randomized Sobol points.
//!
//! Direction numbers come from the Joe and Kuo `new-joe-kuo-6.1000` table, so
//! up to 1000 dimensions are available. Points are enumerated in Gray-code
//! order, starting at index 1 (the origin is skipped), and randomized by a
//! digital shift: every coordinate is XOR-ed with a fixed 32-bit word.

use std::sync::OnceLock;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

const BITS: usize = 32;
const SCALE: f64 = 1.0 / 4_294_967_296.0;
const TABLE: &str = include_str!("../../data/new-joe-kuo-6.1000.txt");

pub const MAX_DIMENSION: usize = 1000;

/// Randomization applied to the base sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DigitalShift {
    /// The unrandomized sequence.
    Zero,
    /// Shift words drawn from the stream keyed by this seed.
    Seeded(u64),
    /// Explicit shift words, one per dimension.
    Words(Vec<u32>),
}

impl DigitalShift {
    fn words(&self, dim: usize) -> Result<Vec<u32>> {
        match self {
            DigitalShift::Zero => Ok(vec![0; dim]),
            DigitalShift::Seeded(seed) => {
                let mut r = rng::stream(*seed, &[rng::domain::SHIFT, dim as u64]);
                Ok((0..dim).map(|_| r.random::<u32>()).collect())
            }
            DigitalShift::Words(w) if w.len() == dim => Ok(w.clone()),
            DigitalShift::Words(w) => Err(Error::dims(format!(
                "digital shift has {} words for {dim} dimensions",
                w.len()
            ))),
        }
    }
}

fn directions() -> &'static Vec<[u32; BITS]> {
    static DIRS: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    DIRS.get_or_init(|| {
        let mut dirs = Vec::with_capacity(MAX_DIMENSION);
        let mut first = [0u32; BITS];
        for (i, v) in first.iter_mut().enumerate() {
            *v = 1u32 << (BITS - 1 - i);
        }
        dirs.push(first);
        for line in TABLE.lines().skip(1) {
            let fields: Vec<u64> = line
                .split_whitespace()
                .map(|f| f.parse().expect("direction table is well formed"))
                .collect();
            if fields.len() < 3 {
                continue;
            }
            let s = fields[1] as usize;
            let a = fields[2];
            let m = &fields[3..3 + s];
            let mut v = [0u32; BITS];
            for i in 0..BITS {
                if i < s {
                    v[i] = (m[i] as u32) << (BITS - 1 - i);
                } else {
                    let mut x = v[i - s] ^ (v[i - s] >> s);
                    for k in 1..s {
                        if (a >> (s - 1 - k)) & 1 == 1 {
                            x ^= v[i - k];
                        }
                    }
                    v[i] = x;
                }
            }
            dirs.push(v);
        }
        dirs
    })
}

/// Gray-code Sobol enumerator.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dim: usize,
    index: u64,
    state: Vec<u32>,
    shift: Vec<u32>,
}

impl SobolSequence {
    pub fn new(dim: usize, shift: &DigitalShift) -> Result<Self> {
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::invalid(format!(
                "Sobol dimension must be in 1..={MAX_DIMENSION}, got {dim}"
            )));
        }
        Ok(Self {
            dim,
            index: 0,
            state: vec![0; dim],
            shift: shift.words(dim)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Write the next point into `out`.
    pub fn next_into(&mut self, out: &mut [f64]) {
        let c = self.index.trailing_ones() as usize;
        assert!(c < BITS, "Sobol sequence exhausted");
        let dirs = directions();
        for (j, x) in self.state.iter_mut().enumerate() {
            *x ^= dirs[j][c];
        }
        self.index += 1;
        for ((o, &x), &s) in out.iter_mut().zip(&self.state).zip(&self.shift) {
            *o = f64::from(x ^ s) * SCALE;
        }
    }
}

/// First `count` points of a digitally shifted Sobol sequence in `[0,1)^dim`.
pub fn sobol_points(dim: usize, count: usize, shift: &DigitalShift) -> Result<Vec<Vec<f64>>> {
    let mut seq = SobolSequence::new(dim, shift)?;
    let mut pts = Vec::with_capacity(count);
    for _ in 0..count {
        let mut p = vec![0.0; dim];
        seq.next_into(&mut p);
        pts.push(p);
    }
    Ok(pts)
}
