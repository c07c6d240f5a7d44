//! Hypothesis tilings and their resolution against the user's tiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiling::{Tile, Tiling};

/// Focus rows plus an ordered partition of the focus columns.
///
/// The first hypothesis keeps all relations among the focus columns; the
/// second keeps only relations inside each block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    rows: Vec<usize>,
    partition: Vec<Vec<usize>>,
}

impl HypothesisSpec {
    pub fn new(rows: Vec<usize>, partition: Vec<Vec<usize>>) -> Result<Self> {
        let mut rows = rows;
        rows.sort_unstable();
        rows.dedup();
        if rows.is_empty() {
            return Err(Error::InvalidHypothesis("row set is empty".into()));
        }
        if partition.is_empty() {
            return Err(Error::InvalidHypothesis("partition has no blocks".into()));
        }
        let mut partition = partition;
        let mut seen = std::collections::HashSet::new();
        for block in &mut partition {
            block.sort_unstable();
            block.dedup();
            if block.is_empty() {
                return Err(Error::InvalidHypothesis("empty partition block".into()));
            }
            for &c in block.iter() {
                if !seen.insert(c) {
                    return Err(Error::InvalidHypothesis(format!("column {c} appears in two blocks")));
                }
            }
        }
        Ok(Self { rows, partition })
    }

    /// All rows, every column its own block.
    pub fn unguided(n: usize, m: usize) -> Self {
        Self {
            rows: (0..n).collect(),
            partition: (0..m).map(|j| vec![j]).collect(),
        }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }

    /// Union of the partition blocks, sorted.
    pub fn columns(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.partition.iter().flatten().copied().collect();
        c.sort_unstable();
        c
    }

    pub fn check_bounds(&self, n: usize, m: usize) -> Result<()> {
        if self.rows.last().is_some_and(|&r| r >= n) {
            return Err(Error::InvalidHypothesis(format!("row index out of range (n={n})")));
        }
        if self.partition.iter().flatten().any(|&c| c >= m) {
            return Err(Error::InvalidHypothesis(format!("column index out of range (m={m})")));
        }
        Ok(())
    }

    /// The single joint tile and the per-block tiles.
    pub fn tilings(&self) -> (Vec<Tile>, Vec<Tile>) {
        let joint = Tile::new(self.rows.iter().copied(), self.columns()).expect("validated spec");
        let blocks = self
            .partition
            .iter()
            .map(|b| Tile::new(self.rows.iter().copied(), b.iter().copied()).expect("validated spec"))
            .collect();
        (vec![joint], blocks)
    }
}

/// User tiles plus a hypothesis spec, resolved into the two tilings whose
/// permutation distributions are contrasted.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisPair {
    pub user_tiles: Vec<Tile>,
    pub spec: HypothesisSpec,
    pub resolved_1: Tiling,
    pub resolved_2: Tiling,
}

/// Merges the user tiles and then the hypothesis tiles into each tiling.
pub fn assemble(user_tiles: &[Tile], spec: &HypothesisSpec, n: usize, m: usize) -> Result<HypothesisPair> {
    spec.check_bounds(n, m)?;
    let base = Tiling::from_tiles(n, m, user_tiles)?;
    let (h1, h2) = spec.tilings();
    let mut resolved_1 = base.clone();
    for t in &h1 {
        resolved_1.merge_in_place(t)?;
    }
    let mut resolved_2 = base;
    for t in &h2 {
        resolved_2.merge_in_place(t)?;
    }
    Ok(HypothesisPair {
        user_tiles: user_tiles.to_vec(),
        spec: spec.clone(),
        resolved_1,
        resolved_2,
    })
}
