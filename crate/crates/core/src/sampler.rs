//! Uniform sampling of permutation vectors allowed by a tiling.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tiling::{PermutationVector, Tiling};

const DOMAIN_TILE: u64 = 0x7469_6c65;
const DOMAIN_COLUMN: u64 = 0x636f_6c75;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seeded source of independent, reproducible random substreams.
///
/// Each draw gets an index; within a draw, every (domain, index) pair maps
/// to its own ChaCha stream, so work split across columns or replicates
/// reproduces regardless of evaluation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeededRng {
    seed: u64,
    draws: u64,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self { seed, draws: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Reserves the next draw index.
    pub fn next_draw(&mut self) -> u64 {
        let d = self.draws;
        self.draws += 1;
        d
    }

    /// Deterministic stream for `(draw, domain, index)`.
    pub fn substream(&self, draw: u64, domain: u64, index: u64) -> ChaCha8Rng {
        let mut h = splitmix64(self.seed);
        for word in [draw, domain, index] {
            h = splitmix64(h ^ word);
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    /// A child generator whose streams are independent of this one's.
    pub fn fork(&self, label: u64) -> SeededRng {
        SeededRng::new(splitmix64(splitmix64(self.seed) ^ splitmix64(label ^ 0x666f_726b)))
    }

    /// General-purpose stream for non-permutation randomness.
    pub fn stream(&mut self, domain: u64) -> ChaCha8Rng {
        let d = self.next_draw();
        self.substream(d, domain, 0)
    }
}

/// Draws a permutation vector uniformly from those allowed by `tiling`.
///
/// Every tile gets one uniform shuffle of its rows, shared by all of its
/// columns; in each column the uncovered rows are shuffled among themselves.
pub fn sample_permutation(tiling: &Tiling, rng: &mut SeededRng) -> PermutationVector {
    let draw = rng.next_draw();
    let (n, m) = (tiling.n_rows(), tiling.n_cols());
    let mut perms = vec![vec![usize::MAX; n]; m];

    for (id, tile) in tiling.tiles() {
        let mut shuffled = tile.rows().to_vec();
        shuffled.shuffle(&mut rng.substream(draw, DOMAIN_TILE, id as u64));
        for &j in tile.cols() {
            for (&i, &src) in tile.rows().iter().zip(&shuffled) {
                perms[j][i] = src;
            }
        }
    }
    for (j, perm) in perms.iter_mut().enumerate() {
        let free = tiling.free_rows(j);
        if free.is_empty() {
            continue;
        }
        let mut shuffled = free.clone();
        shuffled.shuffle(&mut rng.substream(draw, DOMAIN_COLUMN, j as u64));
        for (&i, &src) in free.iter().zip(&shuffled) {
            perm[i] = src;
        }
    }
    PermutationVector { perms }
}

/// `out(i, j) = values(perms[j][i], j)`.
pub fn permute_matrix(values: &DMatrix<f64>, perms: &PermutationVector) -> Result<DMatrix<f64>> {
    let (n, m) = values.shape();
    if perms.n_cols() != m || perms.n_rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation vector is {}x{}, data is {n}x{m}",
            perms.n_rows(),
            perms.n_cols()
        )));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| values[(perms.perms[j][i], j)]))
}

/// Applies a permutation vector to a dataset.
pub fn apply(data: &Dataset, perms: &PermutationVector) -> Result<Dataset> {
    data.with_values(permute_matrix(data.values(), perms)?)
}
