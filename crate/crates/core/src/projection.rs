//! Directions in which two covariance matrices differ most in variance.
//!
//! The gain `vᵀΣ₁v / vᵀΣ₂v` is maximised by whitening `Σ₂` (`WᵀΣ₂W = I`)
//! and taking principal directions of `WᵀΣ₁W`; the projection vectors are
//! `v = W·w`.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::covariance::CovMatrix;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Default eigenvalue floor for whitening, relative to the largest eigenvalue.
pub const DEFAULT_EPS_REL: f64 = 1e-8;

/// Eigenvalues closer than this (relative to the largest) are treated as tied.
const TIE_TOLERANCE: f64 = 1e-10;

/// Number of attribute names shown per axis.
pub const AXIS_LABEL_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningResult {
    pub w_matrix: DMatrix<f64>,
    /// `Σ₂` with its eigenvalues floored; `WᵀΣ₂ᵣW = I` holds exactly for this.
    pub regularized: DMatrix<f64>,
    pub clamped_count: usize,
}

/// Gain-ordered projection directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directions {
    pub vectors: Vec<Vec<f64>>,
    pub gains: Vec<f64>,
    pub clamped_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisLabel {
    pub name: String,
    pub weight: f64,
}

/// A two-dimensional view of the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewResult {
    pub directions: Vec<Vec<f64>>,
    pub gains: Vec<f64>,
    pub coords: Vec<[f64; 2]>,
    pub axis_labels: Vec<Vec<AxisLabel>>,
}

/// Eigenpairs of a symmetric matrix, largest eigenvalue first.
pub fn sym_eigen_desc(mat: &DMatrix<f64>) -> Vec<(f64, DVector<f64>)> {
    let sym = (mat + mat.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut pairs: Vec<(f64, DVector<f64>)> = eig
        .eigenvalues
        .iter()
        .zip(eig.eigenvectors.column_iter())
        .map(|(&l, v)| (l, v.into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    pairs
}

/// `vᵀΣ₁v / vᵀΣ₂v`.
pub fn gain(v: &[f64], sigma1: &CovMatrix, sigma2: &CovMatrix) -> Result<f64> {
    let m = sigma1.dim();
    if v.len() != m || sigma2.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} against {m}x{m} and {}x{} matrices",
            v.len(),
            sigma2.dim(),
            sigma2.dim()
        )));
    }
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    if norm2 == 0.0 {
        return Err(Error::InvalidArgument("direction is the zero vector".into()));
    }
    let den = sigma2.quadratic_form(v);
    let scale = sigma2.as_matrix().diagonal().amax().max(f64::MIN_POSITIVE);
    if den <= 1e-14 * norm2 * scale {
        return Err(Error::ZeroDenominator);
    }
    Ok(sigma1.quadratic_form(v) / den)
}

/// Whitening matrix `W = U·diag(1/√λ)` with eigenvalues floored at
/// `eps_rel · λ_max`.
pub fn whiten(sigma2: &CovMatrix, eps_rel: f64) -> Result<WhiteningResult> {
    let pairs = sym_eigen_desc(sigma2.as_matrix());
    let lambda_max = pairs.first().map_or(0.0, |p| p.0);
    if lambda_max.is_nan() || lambda_max <= 1e-300 {
        return Err(Error::ZeroCovariance);
    }
    let floor = eps_rel * lambda_max;
    let m = sigma2.dim();
    let mut w = DMatrix::zeros(m, m);
    let mut regularized = DMatrix::zeros(m, m);
    let mut clamped_count = 0;
    for (k, (lambda, u)) in pairs.iter().enumerate() {
        let l = if *lambda < floor {
            clamped_count += 1;
            floor
        } else {
            *lambda
        };
        w.set_column(k, &(u / l.sqrt()));
        regularized += u * u.transpose() * l;
    }
    Ok(WhiteningResult {
        w_matrix: w,
        regularized,
        clamped_count,
    })
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn sign_normalize(v: &mut [f64]) {
    let mut best = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = k;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn lexicographic_desc(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match y.total_cmp(x) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// The `count` directions of largest gain, `w`-orthogonal, unit length and
/// sign-normalised. Reported gains are eigenvalues of `WᵀΣ₁W`, which equal
/// the gain against the regularised `Σ₂`.
pub fn optimal_directions(sigma1: &CovMatrix, sigma2: &CovMatrix, count: usize) -> Result<Directions> {
    optimal_directions_with(sigma1, sigma2, count, DEFAULT_EPS_REL)
}

pub fn optimal_directions_with(sigma1: &CovMatrix, sigma2: &CovMatrix, count: usize, eps_rel: f64) -> Result<Directions> {
    let m = sigma1.dim();
    if sigma2.dim() != m {
        return Err(Error::DimensionMismatch(format!("{m}x{m} against {}x{}", sigma2.dim(), sigma2.dim())));
    }
    if count == 0 || count > m {
        return Err(Error::InvalidArgument(format!("cannot extract {count} directions in dimension {m}")));
    }
    let wr = whiten(sigma2, eps_rel)?;
    let w = &wr.w_matrix;
    let inner = w.transpose() * sigma1.as_matrix() * w;
    let pairs = sym_eigen_desc(&inner);

    let mut candidates: Vec<(f64, Vec<f64>)> = pairs
        .into_iter()
        .map(|(lambda, wk)| {
            let v = w * wk;
            let mut v: Vec<f64> = (&v / v.norm()).iter().copied().collect();
            sign_normalize(&mut v);
            (lambda, v)
        })
        .collect();

    // tied eigenvalues: order the members of each cluster lexicographically
    let scale = candidates.first().map_or(1.0, |c| c.0.abs().max(1.0));
    let mut start = 0;
    while start < candidates.len() {
        let head = candidates[start].0;
        let mut end = start + 1;
        while end < candidates.len() && head - candidates[end].0 <= TIE_TOLERANCE * scale {
            end += 1;
        }
        // gains keep their descending slots; only the vectors are reordered
        let mut vecs: Vec<Vec<f64>> = candidates[start..end].iter_mut().map(|c| std::mem::take(&mut c.1)).collect();
        vecs.sort_by(|a, b| lexicographic_desc(a, b));
        for (c, v) in candidates[start..end].iter_mut().zip(vecs) {
            c.1 = v;
        }
        start = end;
    }

    candidates.truncate(count);
    let (gains, vectors) = candidates.into_iter().unzip();
    Ok(Directions {
        vectors,
        gains,
        clamped_count: wr.clamped_count,
    })
}

/// Names of the `k` largest-|weight| attributes, descending.
pub fn top_weights(names: &[String], v: &[f64], k: usize) -> Vec<AxisLabel> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.into_iter()
        .take(k)
        .map(|j| AxisLabel {
            name: names[j].clone(),
            weight: v[j],
        })
        .collect()
}

/// Projects the data onto two directions.
pub fn project(data: &Dataset, directions: &Directions) -> Result<ViewResult> {
    if directions.vectors.len() != 2 {
        return Err(Error::InvalidArgument("a view needs exactly two directions".into()));
    }
    let m = data.n_cols();
    if directions.vectors.iter().any(|v| v.len() != m) {
        return Err(Error::DimensionMismatch(format!("directions do not match {m} columns")));
    }
    let coords = project_values(data.values(), &directions.vectors[0], &directions.vectors[1]);
    let axis_labels = directions
        .vectors
        .iter()
        .map(|v| top_weights(data.column_names(), v, AXIS_LABEL_COUNT))
        .collect();
    Ok(ViewResult {
        directions: directions.vectors.clone(),
        gains: directions.gains.clone(),
        coords,
        axis_labels,
    })
}

pub fn project_values(values: &DMatrix<f64>, v1: &[f64], v2: &[f64]) -> Vec<[f64; 2]> {
    let a = values * DVector::from_column_slice(v1);
    let b = values * DVector::from_column_slice(v2);
    a.iter().zip(b.iter()).map(|(&x, &y)| [x, y]).collect()
}
