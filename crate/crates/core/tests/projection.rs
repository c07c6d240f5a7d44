mod common;

use common::*;
use corand::projection::{gain, optimal_directions, whiten, DEFAULT_EPS_REL};
use corand::{analytical_covariance, assemble, CovMatrix, HypothesisSpec, Tile};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_pair(seed: u64, m: usize) -> (CovMatrix, CovMatrix) {
    let mut r = rng(seed);
    let n = 80;
    let data = correlated_data(n, m, &mut r);
    let user: Vec<Tile> = (0..2).map(|_| random_rect(n, m, &mut r).tile()).collect();
    let rows = random_rows(n, 40, &mut r);
    let half = m / 2;
    let spec = HypothesisSpec::new(rows, vec![(0..half).collect(), (half..m).collect()]).unwrap();
    let pair = assemble(&user, &spec, n, m).unwrap();
    let y = data.center();
    (
        analytical_covariance(&y, &pair.resolved_1).unwrap(),
        analytical_covariance(&y, &pair.resolved_2).unwrap(),
    )
}

#[test]
fn two_by_two_closed_form() {
    let s1 = CovMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap();
    let s2 = CovMatrix::new(DMatrix::identity(2, 2)).unwrap();
    let d = optimal_directions(&s1, &s2, 2).unwrap();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    assert!((d.vectors[0][0] - h).abs() < 1e-12 && (d.vectors[0][1] - h).abs() < 1e-12);
    assert!((d.vectors[1][0] - h).abs() < 1e-12 && (d.vectors[1][1] + h).abs() < 1e-12);
    assert!((d.gains[0] - 1.5).abs() < 1e-12 && (d.gains[1] - 0.5).abs() < 1e-12);
}

#[test]
fn beats_random_directions_in_higher_dimension() {
    for seed in 0..10 {
        let (s1, s2) = random_pair(seed, 8);
        let d = optimal_directions(&s1, &s2, 2).unwrap();
        let mut r = rng(1000 + seed);
        for _ in 0..1000 {
            let v = random_unit(8, &mut r);
            assert!(ratio(s1.as_matrix(), s2.as_matrix(), &v) <= d.gains[0] * (1.0 + 1e-9));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn direction_invariants(seed in 0u64..100_000) {
        let (s1, s2) = random_pair(seed, 6);
        let w = whiten(&s2, DEFAULT_EPS_REL).unwrap();
        let white = w.w_matrix.transpose() * &w.regularized * &w.w_matrix;
        prop_assert!((white - DMatrix::<f64>::identity(6, 6)).amax() < 1e-8);

        let d = optimal_directions(&s1, &s2, 2).unwrap();
        prop_assert!(d.gains[0] >= d.gains[1] && d.gains[1] > 0.0);
        for (v, g) in d.vectors.iter().zip(&d.gains) {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            let top = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            prop_assert!(top > 0.0);
            prop_assert!((gain(v, &s1, &s2).unwrap() - g).abs() <= 1e-8 * g.abs().max(1.0));
            let doubled: Vec<f64> = v.iter().map(|x| 2.0 * x).collect();
            prop_assert!((gain(&doubled, &s1, &s2).unwrap() - g).abs() <= 1e-8 * g.abs().max(1.0));
        }
    }
}
