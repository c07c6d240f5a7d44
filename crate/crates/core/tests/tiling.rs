mod common;

use std::time::Instant;

use common::*;
use corand::experiments::loglog_slope;
use corand::{PermutationVector, Tile, Tiling};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn allowed_mask(tiling: &Tiling, vectors: &[Perms]) -> Vec<bool> {
    vectors
        .iter()
        .map(|p| tiling.is_allowed(&PermutationVector::new(p.clone()).unwrap()))
        .collect()
}

#[test]
fn merge_order_does_not_change_allowed_set() {
    let vectors = all_vectors(4, 3);
    for seed in 0..40 {
        let mut r = rng(seed);
        let mut tiles: Vec<Tile> = (0..r.random_range(2..=5)).map(|_| random_rect(4, 3, &mut r).tile()).collect();
        let first = allowed_mask(&Tiling::from_tiles(4, 3, &tiles).unwrap(), &vectors);
        tiles.shuffle(&mut r);
        let second = allowed_mask(&Tiling::from_tiles(4, 3, &tiles).unwrap(), &vectors);
        assert_eq!(first, second, "seed {seed}");
    }
}

#[test]
fn nested_tile_splits_outer_tile() {
    let outer = Tile::new(0..4, 0..3).unwrap();
    let inner = Tile::new([1, 2], [0, 1]).unwrap();
    let t = Tiling::from_tiles(4, 3, [&outer, &inner]).unwrap();
    let rects: Vec<Rect> = [&outer, &inner]
        .iter()
        .map(|t| Rect { rows: t.rows().to_vec(), cols: t.cols().to_vec() })
        .collect();
    for p in all_vectors(4, 3) {
        let pv = PermutationVector::new(p.clone()).unwrap();
        assert_eq!(t.is_allowed(&pv), all_allow(&rects, &p));
    }
    assert_eq!(t.len(), 2);
}

#[test]
fn serde_round_trip() {
    let t = Tiling::from_tiles(6, 4, &[Tile::new([0, 1, 2], [0, 1]).unwrap(), Tile::new([2, 3], [1, 2, 3]).unwrap()]).unwrap();
    let json = serde_json::to_string(&t).unwrap();
    let back: Tiling = serde_json::from_str(&json).unwrap();
    assert_eq!(back.tile_list(), t.tile_list());
    assert!(serde_json::from_str::<Tiling>(r#"{"n":3,"m":2,"tiles":[{"id":1,"rows":[0,1],"cols":[0]},{"id":2,"rows":[1],"cols":[0,1]}]}"#).is_err());
}

#[test]
fn merge_cost_is_linear_in_matrix_size() {
    let mut r = rng(9);
    let mut sizes = Vec::new();
    let mut times = Vec::new();
    for &(n, m) in &[(2_000, 20), (4_000, 40), (8_000, 40), (16_000, 50)] {
        let tiles: Vec<Tile> = (0..4)
            .map(|_| {
                let rows = random_rows(n, n / 2, &mut r);
                let cols = random_rows(m, m / 2, &mut r);
                Tile::new(rows, cols).unwrap()
            })
            .collect();
        let mut samples: Vec<f64> = (0..5)
            .map(|_| {
                let start = Instant::now();
                std::hint::black_box(Tiling::from_tiles(n, m, &tiles).unwrap());
                start.elapsed().as_secs_f64()
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        sizes.push((n * m) as f64);
        times.push(samples[2]);
    }
    let slope = loglog_slope(&sizes, &times);
    assert!(slope < 1.4, "merge time grows with slope {slope}");
}

fn tile_strategy(n: usize, m: usize) -> impl Strategy<Value = Tile> {
    (
        proptest::collection::btree_set(0..n, 1..=n),
        proptest::collection::btree_set(0..m, 1..=m),
    )
        .prop_map(|(r, c)| Tile::new(r, c).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn merged_tiling_is_a_partition_of_the_covered_cells(tiles in proptest::collection::vec(tile_strategy(12, 6), 0..8)) {
        let t = Tiling::from_tiles(12, 6, &tiles).unwrap();
        t.audit().unwrap();
        let mut covered = [false; 12 * 6];
        for tile in &tiles {
            for &i in tile.rows() {
                for &j in tile.cols() {
                    covered[i * 6 + j] = true;
                }
            }
        }
        let mut seen = vec![0u32; 12 * 6];
        for (id, tile) in t.tiles() {
            for &i in tile.rows() {
                for &j in tile.cols() {
                    seen[i * 6 + j] += 1;
                    prop_assert_eq!(t.id_at(i, j), id);
                }
            }
        }
        for k in 0..covered.len() {
            prop_assert_eq!(seen[k], u32::from(covered[k]));
        }
    }

    #[test]
    fn sampled_vectors_are_allowed(tiles in proptest::collection::vec(tile_strategy(10, 5), 0..6), seed in 0u64..1000) {
        let t = Tiling::from_tiles(10, 5, &tiles).unwrap();
        let mut rng = corand::SeededRng::new(seed);
        for _ in 0..20 {
            let pv = corand::sample_permutation(&t, &mut rng);
            prop_assert!(pv.is_bijective());
            prop_assert!(t.is_allowed(&pv));
            prop_assert!(tiles.iter().all(|tile| tile.allows(&pv)));
        }
    }
}
