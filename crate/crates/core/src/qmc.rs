//! Sobol low-discrepancy points with random digital shifts.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Primitive polynomial degree, coefficient bits, and initial direction
/// integers for dimensions 2 through 16 (Joe–Kuo).
const DIRECTIONS: [(u32, u32, &[u32]); 15] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
];

pub const MAX_DIM: usize = DIRECTIONS.len() + 1;

const BITS: usize = 32;

#[derive(Clone, Debug)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
}

impl Sobol {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::unsupported(alloc::format!(
                "Sobol points support 1..={MAX_DIM} dimensions, got {dim}"
            )));
        }
        let mut directions = Vec::with_capacity(dim);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - k);
        }
        directions.push(first);
        for &(s, a, m) in DIRECTIONS.iter().take(dim - 1) {
            let s = s as usize;
            let mut v = [0u32; BITS];
            for k in 0..s {
                v[k] = m[k] << (BITS - 1 - k);
            }
            for k in s..BITS {
                let mut x = v[k - s] ^ (v[k - s] >> s);
                for i in 1..s {
                    if (a >> (s - 1 - i)) & 1 == 1 {
                        x ^= v[k - i];
                    }
                }
                v[k] = x;
            }
            directions.push(v);
        }
        Ok(Self { directions })
    }

    pub fn dim(&self) -> usize {
        self.directions.len()
    }

    /// Point `index` (Gray-code order) XOR-shifted by `shift`, mapped to the
    /// open unit cube by sampling cell midpoints.
    pub fn point(&self, index: u32, shift: &[u32], out: &mut [f64]) {
        let gray = index ^ (index >> 1);
        for (d, v) in self.directions.iter().enumerate() {
            let mut x = 0u32;
            let mut bits = gray;
            let mut k = 0;
            while bits != 0 {
                if bits & 1 == 1 {
                    x ^= v[k];
                }
                bits >>= 1;
                k += 1;
            }
            out[d] = ((x ^ shift[d]) as f64 + 0.5) * (1.0 / 4294967296.0);
        }
    }

    /// Independent digital shifts, one vector per replicate.
    pub fn shifts(&self, replicates: usize, seed: u64) -> Vec<Vec<u32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..replicates)
            .map(|_| (0..self.dim()).map(|_| rng.random::<u32>()).collect())
            .collect()
    }
}
