//! Independent reference implementations used by the integration tests.
//!
//! Nothing here calls into the library's tiling, covariance or projection
//! code: the oracles work from the definitions directly.

#![allow(dead_code)]

use corand::{Dataset, ConstantColumnPolicy};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A rows × cols rectangle as plain index lists.
#[derive(Debug, Clone)]
pub struct Rect {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Rect {
    pub fn tile(&self) -> corand::Tile {
        corand::Tile::new(self.rows.iter().copied(), self.cols.iter().copied()).unwrap()
    }
}

/// Nonempty random subset of `0..k`, sorted.
pub fn random_subset(k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    loop {
        let s: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

pub fn random_rect(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Rect {
    Rect {
        rows: random_subset(n, rng),
        cols: random_subset(m, rng),
    }
}

/// A permutation vector as `perms[col][row]`: row `i` of the permuted column
/// takes the value of row `perms[col][i]`.
pub type Perms = Vec<Vec<usize>>;

/// Rows stay inside the rectangle and move identically in all its columns.
pub fn rect_allows(rect: &Rect, perms: &Perms) -> bool {
    let first = rect.cols[0];
    rect.rows.iter().all(|&i| {
        let target = perms[first][i];
        rect.rows.contains(&target) && rect.cols.iter().all(|&j| perms[j][i] == target)
    })
}

pub fn all_allow(rects: &[Rect], perms: &Perms) -> bool {
    rects.iter().all(|r| rect_allows(r, perms))
}

/// All permutations of `0..k` in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                prefix.push(x);
                go(prefix, used, out);
                prefix.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Every element of `(S_n)^m`.
pub fn all_vectors(n: usize, m: usize) -> Vec<Perms> {
    let base = permutations(n);
    let mut out: Vec<Perms> = vec![vec![]];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                base.iter().map(move |p| {
                    let mut v = prefix.clone();
                    v.push(p.clone());
                    v
                })
            })
            .collect();
    }
    out
}

/// Exact permutation covariance: the average of `ŶᵀŶ/n` over all vectors
/// allowed by `rects`, for already-centred `y`.
pub fn enumerated_covariance(y: &DMatrix<f64>, rects: &[Rect]) -> DMatrix<f64> {
    let (n, m) = y.shape();
    let mut acc = DMatrix::zeros(m, m);
    let mut count = 0usize;
    for perms in all_vectors(n, m) {
        if !all_allow(rects, &perms) {
            continue;
        }
        count += 1;
        for j in 0..m {
            for k in 0..m {
                acc[(j, k)] += (0..n).map(|i| y[(perms[j][i], j)] * y[(perms[k][i], k)]).sum::<f64>();
            }
        }
    }
    acc / (n as f64 * count as f64)
}

pub fn centre(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = x.clone();
    for mut c in y.column_iter_mut() {
        let mean = c.mean();
        c.add_scalar_mut(-mean);
    }
    y
}

/// z-scored data with a few latent factors so that columns correlate.
pub fn correlated_data(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Dataset {
    let latents = 3.min(m);
    let z = DMatrix::from_fn(n, latents, |_, _| rng.sample::<f64, _>(StandardNormal));
    let l = DMatrix::from_fn(latents, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = z * l + DMatrix::from_fn(n, m, |_, _| 0.7 * rng.sample::<f64, _>(StandardNormal));
    Dataset::from_matrix(x).unwrap().zscore(ConstantColumnPolicy::Error).unwrap()
}

pub fn quad(s: &DMatrix<f64>, v: &[f64]) -> f64 {
    let m = v.len();
    (0..m).map(|i| (0..m).map(|j| v[i] * s[(i, j)] * v[j]).sum::<f64>()).sum()
}

pub fn ratio(s1: &DMatrix<f64>, s2: &DMatrix<f64>, v: &[f64]) -> f64 {
    quad(s1, v) / quad(s2, v)
}

/// Quasi-uniform Fibonacci grid of `count` points on the upper unit
/// hemisphere. The gain is even in `v`, so this covers the whole sphere.
pub fn hemisphere_grid(count: usize) -> impl Iterator<Item = [f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count).map(move |k| {
        let z = (k as f64 + 0.5) / count as f64;
        let r = (1.0 - z * z).sqrt();
        let phi = golden * k as f64;
        [r * phi.cos(), r * phi.sin(), z]
    })
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Maximum of the ratio over the grid, then polished by successively finer
/// local grids around the best point.
pub fn grid_max(s1: &DMatrix<f64>, s2: &DMatrix<f64>, count: usize) -> (f64, [f64; 3]) {
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0, 1.0]);
    for p in hemisphere_grid(count) {
        let g = ratio(s1, s2, &p);
        if g > best.0 {
            best = (g, p);
        }
    }
    // tangent basis around the current best point, 11×11 local grid
    let mut step = 2.0 * (4.0 * std::f64::consts::PI / count as f64).sqrt();
    while step > 1e-10 {
        let c = best.1;
        let helper = if c[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let dot = helper[0] * c[0] + helper[1] * c[1] + helper[2] * c[2];
        let a = unit([helper[0] - dot * c[0], helper[1] - dot * c[1], helper[2] - dot * c[2]]);
        let b = [c[1] * a[2] - c[2] * a[1], c[2] * a[0] - c[0] * a[2], c[0] * a[1] - c[1] * a[0]];
        for s in -5..=5 {
            for t in -5..=5 {
                let (s, t) = (s as f64 * step / 5.0, t as f64 * step / 5.0);
                let p = unit([c[0] + s * a[0] + t * b[0], c[1] + s * a[1] + t * b[1], c[2] + s * a[2] + t * b[2]]);
                let g = ratio(s1, s2, &p);
                if g > best.0 {
                    best = (g, p);
                }
            }
        }
        step /= 4.0;
    }
    best
}

/// Uniform random unit vector.
pub fn random_unit(m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Leading eigenvector of a symmetric PSD matrix by power iteration.
pub fn power_iteration(a: &DMatrix<f64>) -> Vec<f64> {
    let m = a.nrows();
    let mut v = nalgebra::DVector::from_fn(m, |i, _| 1.0 + 0.01 * i as f64);
    v.normalize_mut();
    for _ in 0..200_000 {
        let mut next = a * &v;
        next.normalize_mut();
        let diff = (&next - &v).norm();
        v = next;
        if diff < 1e-15 {
            break;
        }
    }
    v.iter().copied().collect()
}

/// Correlation matrix of the columns of `x` (population moments).
pub fn correlation(x: &DMatrix<f64>) -> DMatrix<f64> {
    let y = centre(x);
    let n = y.nrows() as f64;
    let cov = y.tr_mul(&y) / n;
    DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt())
}

pub fn abs_cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).abs()
}

/// Shuffles `0..n` and returns the first `k`, sorted.
pub fn random_rows(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(k);
    all.sort_unstable();
    all
}
