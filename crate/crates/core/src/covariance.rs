//! Covariance of the uniform distribution over permutations allowed by a
//! tiling, computed in closed form or estimated by sampling.

use nalgebra::DMatrix;

use crate::dataset::CenteredData;
use crate::error::{Error, Result};
use crate::sampler::{permute_matrix, sample_permutation, SeededRng};
use crate::tiling::Tiling;

/// Symmetric m×m covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix(DMatrix<f64>);

impl CovMatrix {
    /// Wraps a square matrix, symmetrising it.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !values.is_square() {
            return Err(Error::DimensionMismatch(format!("covariance must be square, got {:?}", values.shape())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("covariance has non-finite entries".into()));
        }
        let sym = (&values + values.transpose()) * 0.5;
        Ok(Self(sym))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    /// `vᵀ Σ v`
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .map(|(j, &vj)| vj * v.iter().enumerate().map(|(k, &vk)| self.0[(j, k)] * vk).sum::<f64>())
            .sum()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Replaces every cell by the mean of its permutation group in that column:
/// the tile's rows if covered, else the column's uncovered rows.
fn group_means(y: &DMatrix<f64>, tiling: &Tiling) -> DMatrix<f64> {
    let (n, m) = y.shape();
    let mut a = DMatrix::zeros(n, m);
    for (_, tile) in tiling.tiles() {
        let k = tile.rows().len() as f64;
        for &j in tile.cols() {
            let mean = tile.rows().iter().map(|&i| y[(i, j)]).sum::<f64>() / k;
            for &i in tile.rows() {
                a[(i, j)] = mean;
            }
        }
    }
    for j in 0..m {
        let free = tiling.free_rows(j);
        if free.is_empty() {
            continue;
        }
        let mean = free.iter().map(|&i| y[(i, j)]).sum::<f64>() / free.len() as f64;
        for &i in &free {
            a[(i, j)] = mean;
        }
    }
    a
}

/// Exact covariance of the permutation distribution defined by `tiling`.
///
/// Off-diagonal entries pair rows that share a tile in both columns directly;
/// all other rows contribute the product of their group means. The diagonal
/// is the plain column variance, since permutations preserve marginals.
pub fn analytical_covariance(y: &CenteredData, tiling: &Tiling) -> Result<CovMatrix> {
    let (n, m) = y.values.shape();
    if tiling.n_rows() != n || tiling.n_cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "tiling is {}x{}, data is {n}x{m}",
            tiling.n_rows(),
            tiling.n_cols()
        )));
    }
    let yv = &y.values;
    let a = group_means(yv, tiling);
    // column-major id copy for cache-friendly pair scans
    let ids: Vec<Vec<u32>> = (0..m).map(|j| (0..n).map(|i| tiling.id_at(i, j)).collect()).collect();

    let mut cov = DMatrix::zeros(m, m);
    for j in 0..m {
        let yj = yv.column(j);
        cov[(j, j)] = yj.dot(&yj) / n as f64;
        for k in (j + 1)..m {
            let (yk, aj, ak) = (yv.column(k), a.column(j), a.column(k));
            let (idj, idk) = (&ids[j], &ids[k]);
            let mut acc = 0.0;
            for i in 0..n {
                acc += if idj[i] != 0 && idj[i] == idk[i] {
                    yj[i] * yk[i]
                } else {
                    aj[i] * ak[i]
                };
            }
            cov[(j, k)] = acc / n as f64;
            cov[(k, j)] = cov[(j, k)];
        }
    }
    CovMatrix::new(cov)
}

/// Average of `ŶᵀŶ/n` over `draws` sampled permutations of `y`.
///
/// Permutations preserve column means, so draws are not re-centred.
pub fn montecarlo_covariance(y: &CenteredData, tiling: &Tiling, draws: usize, rng: &mut SeededRng) -> Result<CovMatrix> {
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let (n, m) = y.values.shape();
    let mut acc = DMatrix::zeros(m, m);
    for _ in 0..draws {
        let pv = sample_permutation(tiling, rng);
        let p = permute_matrix(&y.values, &pv)?;
        acc += p.tr_mul(&p);
    }
    CovMatrix::new(acc / (n as f64 * draws as f64))
}

/// Plain `YᵀY/n`.
pub fn sample_covariance(y: &CenteredData) -> CovMatrix {
    let n = y.n_rows() as f64;
    CovMatrix(y.values.tr_mul(&y.values) / n)
}
