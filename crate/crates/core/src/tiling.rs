//! Tiles, tilings and the permutation vectors they allow.
//!
//! A [`Tiling`] keeps its tiles as an `n × m` matrix of tile ids (0 marks an
//! uncovered cell) plus a registry from id to [`Tile`]. New tiles are merged
//! in with a single hash pass over the rows of the new tile, so adding a tile
//! costs `O(n·m)`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type TileId = u32;

/// A combinatorial rectangle of the data matrix: rows × columns.
///
/// Row and column sets are stored sorted and deduplicated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tile {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Tile {
    pub fn new(rows: impl IntoIterator<Item = usize>, cols: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut rows: Vec<usize> = rows.into_iter().collect();
        let mut cols: Vec<usize> = cols.into_iter().collect();
        rows.sort_unstable();
        rows.dedup();
        cols.sort_unstable();
        cols.dedup();
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::InvalidTile("rows and columns must be nonempty".into()));
        }
        Ok(Self { rows, cols })
    }

    /// Like [`Tile::new`] but also checks indices against an `n × m` matrix.
    pub fn new_in(
        rows: impl IntoIterator<Item = usize>,
        cols: impl IntoIterator<Item = usize>,
        n: usize,
        m: usize,
    ) -> Result<Self> {
        let t = Self::new(rows, cols)?;
        t.check_bounds(n, m)?;
        Ok(t)
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn check_bounds(&self, n: usize, m: usize) -> Result<()> {
        let max_row = *self.rows.last().expect("nonempty");
        let max_col = *self.cols.last().expect("nonempty");
        if max_row >= n || max_col >= m {
            return Err(Error::InvalidTile(format!(
                "tile reaches row {max_row}, column {max_col} in a {n}x{m} matrix"
            )));
        }
        Ok(())
    }

    /// Whether `perms` satisfies this tile's constraint: every row of the
    /// tile is mapped into the tile, identically across the tile's columns.
    pub fn allows(&self, perms: &PermutationVector) -> bool {
        let first = self.cols[0];
        self.rows.iter().all(|&i| {
            let target = perms.perms[first][i];
            self.rows.binary_search(&target).is_ok()
                && self.cols[1..].iter().all(|&j| perms.perms[j][i] == target)
        })
    }
}

/// One bijection of `[n]` per column: `perms[j][i]` is the source row placed
/// at row `i` of column `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PermutationVector {
    pub perms: Vec<Vec<usize>>,
}

impl PermutationVector {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            perms: vec![(0..n).collect(); m],
        }
    }

    pub fn new(perms: Vec<Vec<usize>>) -> Result<Self> {
        let pv = Self { perms };
        if !pv.is_bijective() {
            return Err(Error::InvalidArgument("every column must carry a bijection".into()));
        }
        Ok(pv)
    }

    pub fn n_rows(&self) -> usize {
        self.perms.first().map_or(0, Vec::len)
    }

    pub fn n_cols(&self) -> usize {
        self.perms.len()
    }

    pub fn is_bijective(&self) -> bool {
        let n = self.n_rows();
        self.perms.iter().all(|p| {
            if p.len() != n {
                return false;
            }
            let mut seen = vec![false; n];
            p.iter().all(|&x| x < n && !std::mem::replace(&mut seen[x], true))
        })
    }
}

/// Whether every tile in an arbitrary (possibly overlapping) set allows `perms`.
pub fn allowed_by_tiles(tiles: &[Tile], perms: &PermutationVector) -> bool {
    tiles.iter().all(|t| t.allows(perms))
}

/// A set of non-overlapping tiles over an `n × m` matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tiling {
    n: usize,
    m: usize,
    /// row-major `n × m` tile ids
    ids: Vec<TileId>,
    registry: BTreeMap<TileId, Tile>,
    next_id: TileId,
}

impl Tiling {
    /// The empty tiling: every permutation vector is allowed.
    pub fn new(n: usize, m: usize) -> Self {
        assert!(n >= 1 && m >= 1, "tiling needs a nonempty matrix");
        Self {
            n,
            m,
            ids: vec![0; n * m],
            registry: BTreeMap::new(),
            next_id: 1,
        }
    }

    /// Builds a tiling by merging each tile in turn.
    pub fn from_tiles<'a>(n: usize, m: usize, tiles: impl IntoIterator<Item = &'a Tile>) -> Result<Self> {
        let mut t = Self::new(n, m);
        for tile in tiles {
            t.merge_in_place(tile)?;
        }
        Ok(t)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.m
    }

    /// Tile id covering cell `(row, col)`, 0 when uncovered.
    #[inline]
    pub fn id_at(&self, row: usize, col: usize) -> TileId {
        self.ids[row * self.m + col]
    }

    pub fn tiles(&self) -> impl Iterator<Item = (TileId, &Tile)> {
        self.registry.iter().map(|(&id, t)| (id, t))
    }

    pub fn tile(&self, id: TileId) -> Option<&Tile> {
        self.registry.get(&id)
    }

    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    /// Rows of column `col` not covered by any tile.
    pub fn free_rows(&self, col: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.id_at(i, col) == 0).collect()
    }

    pub fn is_allowed(&self, perms: &PermutationVector) -> bool {
        perms.n_rows() == self.n
            && perms.n_cols() == self.m
            && self.registry.values().all(|t| t.allows(perms))
    }

    /// Returns this tiling with `tile` merged in; see [`Tiling::merge_in_place`].
    pub fn merge_tile(&self, tile: &Tile) -> Result<Self> {
        let mut out = self.clone();
        out.merge_in_place(tile)?;
        Ok(out)
    }

    /// Merges `tile` so that the result allows exactly the permutation
    /// vectors allowed by both the current tiling and the tile.
    ///
    /// Rows of the new tile are grouped by the vector of ids they carry over
    /// the tile's columns. Each group becomes one tile spanning the new
    /// tile's columns plus the columns of every existing tile it touched;
    /// the touched tiles lose those rows. Uncovered cells (id 0) never pull
    /// in extra columns.
    pub fn merge_in_place(&mut self, tile: &Tile) -> Result<()> {
        tile.check_bounds(self.n, self.m)?;
        let cols = tile.cols();

        let mut index: HashMap<Vec<TileId>, usize> = HashMap::new();
        let mut groups: Vec<(Vec<TileId>, Vec<usize>)> = Vec::new();
        for &i in tile.rows() {
            let key: Vec<TileId> = cols.iter().map(|&c| self.id_at(i, c)).collect();
            match index.get(&key) {
                Some(&g) => groups[g].1.push(i),
                None => {
                    index.insert(key.clone(), groups.len());
                    groups.push((key, vec![i]));
                }
            }
        }

        for (key, rows) in groups {
            let mut touched: Vec<TileId> = key.iter().copied().filter(|&p| p != 0).collect();
            touched.sort_unstable();
            touched.dedup();

            // Group covers a whole existing tile within its columns: renaming
            // it would change nothing.
            if touched.len() == 1 && !key.contains(&0) && self.registry[&touched[0]].rows.len() == rows.len() {
                continue;
            }

            let mut span: Vec<usize> = cols.to_vec();
            for p in &touched {
                span.extend_from_slice(&self.registry[p].cols);
            }
            span.sort_unstable();
            span.dedup();

            let id = self.next_id;
            self.next_id = self
                .next_id
                .checked_add(1)
                .ok_or_else(|| Error::InvalidTiling("tile id space exhausted".into()))?;
            for &i in &rows {
                let row = &mut self.ids[i * self.m..(i + 1) * self.m];
                for &c in &span {
                    row[c] = id;
                }
            }
            for p in touched {
                let old = self.registry.get_mut(&p).expect("touched tile is registered");
                old.rows = sorted_difference(&old.rows, &rows);
                if old.rows.is_empty() {
                    self.registry.remove(&p);
                }
            }
            self.registry.insert(id, Tile { rows, cols: span });
        }
        Ok(())
    }

    /// Checks the structural invariants: every registered tile occupies
    /// exactly its rectangle of the id matrix and nothing else is covered.
    pub fn audit(&self) -> Result<()> {
        let mut expected = vec![0 as TileId; self.n * self.m];
        for (&id, t) in &self.registry {
            if id == 0 || id >= self.next_id {
                return Err(Error::InvalidTiling(format!("tile id {id} out of sequence")));
            }
            t.check_bounds(self.n, self.m)?;
            for &i in &t.rows {
                for &c in &t.cols {
                    let cell = &mut expected[i * self.m + c];
                    if *cell != 0 {
                        return Err(Error::InvalidTiling(format!(
                            "tiles {} and {id} overlap at ({i}, {c})",
                            *cell
                        )));
                    }
                    *cell = id;
                }
            }
        }
        if expected != self.ids {
            return Err(Error::InvalidTiling("id matrix disagrees with registry".into()));
        }
        Ok(())
    }

    /// Registered tiles in id order.
    pub fn tile_list(&self) -> Vec<Tile> {
        self.registry.values().cloned().collect()
    }
}

fn sorted_difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len());
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TileRecord {
    id: TileId,
    rows: Vec<usize>,
    cols: Vec<usize>,
}

/// Serialized form: `{n, m, tiles: [{id, rows, cols}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TilingDoc {
    n: usize,
    m: usize,
    tiles: Vec<TileRecord>,
}

impl Serialize for Tiling {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TilingDoc {
            n: self.n,
            m: self.m,
            tiles: self
                .registry
                .iter()
                .map(|(&id, t)| TileRecord {
                    id,
                    rows: t.rows.clone(),
                    cols: t.cols.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Tiling {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = TilingDoc::deserialize(deserializer)?;
        Tiling::try_from(doc).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<TilingDoc> for Tiling {
    type Error = Error;

    fn try_from(doc: TilingDoc) -> Result<Self> {
        if doc.n == 0 || doc.m == 0 {
            return Err(Error::InvalidTiling("empty matrix".into()));
        }
        let mut t = Tiling::new(doc.n, doc.m);
        for rec in doc.tiles {
            if rec.id == 0 || t.registry.contains_key(&rec.id) {
                return Err(Error::InvalidTiling(format!("bad or duplicate tile id {}", rec.id)));
            }
            let tile = Tile::new_in(rec.rows, rec.cols, doc.n, doc.m)?;
            for &i in &tile.rows {
                for &c in &tile.cols {
                    let cell = &mut t.ids[i * doc.m + c];
                    if *cell != 0 {
                        return Err(Error::InvalidTiling(format!("tiles overlap at ({i}, {c})")));
                    }
                    *cell = rec.id;
                }
            }
            t.next_id = t.next_id.max(rec.id + 1);
            t.registry.insert(rec.id, tile);
        }
        Ok(t)
    }
}

/// All `k!` permutations of `0..k`, in lexicographic order.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                prefix.push(x);
                rec(prefix, used, out);
                prefix.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(k), &mut vec![false; k], &mut out);
    out
}

/// Visits every permutation vector on an `n × m` matrix (`(n!)^m` of them).
pub fn for_each_permutation_vector(n: usize, m: usize, mut visit: impl FnMut(&PermutationVector)) -> Result<()> {
    if n > 5 || m > 4 || n == 0 || m == 0 {
        return Err(Error::EnumerationBudget { n, m });
    }
    let base = all_permutations(n);
    let mut odometer = vec![0usize; m];
    let mut pv = PermutationVector::identity(n, m);
    loop {
        for (j, &k) in odometer.iter().enumerate() {
            pv.perms[j].clone_from(&base[k]);
        }
        visit(&pv);
        let mut j = 0;
        loop {
            if j == m {
                return Ok(());
            }
            odometer[j] += 1;
            if odometer[j] < base.len() {
                break;
            }
            odometer[j] = 0;
            j += 1;
        }
    }
}

/// Decides equivalence of two tile sets by enumerating every permutation
/// vector. Only feasible for `n ≤ 5`, `m ≤ 4`.
pub fn equivalent_bruteforce(tiles_a: &[Tile], tiles_b: &[Tile], n: usize, m: usize) -> Result<bool> {
    for t in tiles_a.iter().chain(tiles_b) {
        t.check_bounds(n, m)?;
    }
    let mut same = true;
    for_each_permutation_vector(n, m, |pv| {
        if same && allowed_by_tiles(tiles_a, pv) != allowed_by_tiles(tiles_b, pv) {
            same = false;
        }
    })?;
    Ok(same)
}

/// Number of permutation vectors allowed by a tile set (enumeration).
pub fn count_allowed(tiles: &[Tile], n: usize, m: usize) -> Result<usize> {
    let mut count = 0;
    for_each_permutation_vector(n, m, |pv| {
        if allowed_by_tiles(tiles, pv) {
            count += 1;
        }
    })?;
    Ok(count)
}
