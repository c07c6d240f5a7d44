//! Exploration session: the data, the tiles the analyst has committed, the
//! current hypothesis, and the most recent view.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::covariance::analytical_covariance;
use crate::dataset::{CenteredData, ConstantColumnPolicy, Dataset, ScalingState};
use crate::error::{Error, Result};
use crate::hypothesis::{assemble, HypothesisPair, HypothesisSpec};
use crate::projection::{optimal_directions, project, project_values, ViewResult};
use crate::sampler::{permute_matrix, sample_permutation, SeededRng};
use crate::selection::{suggest_attributes, AttributeRatio};
use crate::tiling::Tile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledTile {
    pub label: String,
    #[serde(flatten)]
    pub tile: Tile,
}

/// Which side of the hypothesis pair to sample from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl TryFrom<u8> for Which {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Which::One),
            2 => Ok(Which::Two),
            other => Err(Error::InvalidArgument(format!("which must be 1 or 2, got {other}"))),
        }
    }
}

#[derive(Debug, Clone)]
struct CachedView {
    view: ViewResult,
    pair: HypothesisPair,
}

/// Data for a parallel-coordinates panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcpPayload {
    pub tau: f64,
    /// Attributes in display order (ascending σ-ratio).
    pub attributes: Vec<AttributeRatio>,
    pub selection: Vec<usize>,
    /// One polyline per data row, values in attribute display order.
    pub values: Vec<Vec<f64>>,
}

/// Everything needed to rebuild a session given its dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSnapshot {
    pub id: String,
    pub dataset_id: String,
    pub seed: u64,
    pub version: u64,
    pub user_tiles: Vec<LabeledTile>,
    pub spec: HypothesisSpec,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    dataset_id: String,
    dataset: Arc<Dataset>,
    centered: Arc<CenteredData>,
    user_tiles: Vec<LabeledTile>,
    spec: HypothesisSpec,
    seed: u64,
    version: u64,
    cache: Option<CachedView>,
    computations: u64,
}

impl Session {
    /// Opens a session with no user tiles and the unguided hypothesis.
    pub fn create(id: impl Into<String>, dataset_id: impl Into<String>, dataset: Arc<Dataset>, seed: u64) -> Result<Self> {
        if dataset.n_cols() < 2 {
            return Err(Error::InvalidDataset("a session needs at least two columns".into()));
        }
        let spec = HypothesisSpec::unguided(dataset.n_rows(), dataset.n_cols());
        Ok(Self {
            id: id.into(),
            dataset_id: dataset_id.into(),
            centered: Arc::new(dataset.center()),
            dataset,
            user_tiles: Vec::new(),
            spec,
            seed,
            version: 0,
            cache: None,
            computations: 0,
        })
    }

    pub fn restore(snapshot: SessionSnapshot, dataset: Arc<Dataset>) -> Result<Self> {
        let mut s = Self::create(snapshot.id, snapshot.dataset_id, dataset, snapshot.seed)?;
        let (n, m) = (s.dataset.n_rows(), s.dataset.n_cols());
        snapshot.spec.check_bounds(n, m)?;
        for t in &snapshot.user_tiles {
            t.tile.check_bounds(n, m)?;
        }
        s.user_tiles = snapshot.user_tiles;
        s.spec = snapshot.spec;
        s.version = snapshot.version;
        Ok(s)
    }

    pub fn snapshot(&self) -> SessionSnapshot {
        SessionSnapshot {
            id: self.id.clone(),
            dataset_id: self.dataset_id.clone(),
            seed: self.seed,
            version: self.version,
            user_tiles: self.user_tiles.clone(),
            spec: self.spec.clone(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn user_tiles(&self) -> &[LabeledTile] {
        &self.user_tiles
    }

    pub fn spec(&self) -> &HypothesisSpec {
        &self.spec
    }

    /// How many views have actually been computed (cache misses).
    pub fn computations(&self) -> u64 {
        self.computations
    }

    pub fn cached_view(&self) -> Option<&ViewResult> {
        self.cache.as_ref().map(|c| &c.view)
    }

    pub fn cached_pair(&self) -> Option<&HypothesisPair> {
        self.cache.as_ref().map(|c| &c.pair)
    }

    fn touch(&mut self) -> u64 {
        self.cache = None;
        self.version += 1;
        self.version
    }

    /// Resolves the hypothesis pair and returns its most informative view.
    pub fn compute_view(&mut self) -> Result<&ViewResult> {
        if self.cache.is_none() {
            let (n, m) = (self.dataset.n_rows(), self.dataset.n_cols());
            let tiles: Vec<Tile> = self.user_tiles.iter().map(|t| t.tile.clone()).collect();
            let pair = assemble(&tiles, &self.spec, n, m)?;
            let s1 = analytical_covariance(&self.centered, &pair.resolved_1)?;
            let s2 = analytical_covariance(&self.centered, &pair.resolved_2)?;
            let dirs = optimal_directions(&s1, &s2, 2)?;
            let view = project(&self.dataset, &dirs)?;
            self.computations += 1;
            self.cache = Some(CachedView { view, pair });
        }
        Ok(&self.cache.as_ref().expect("just filled").view)
    }

    pub fn commit_tile(&mut self, rows: Vec<usize>, cols: Vec<usize>, label: impl Into<String>) -> Result<u64> {
        let tile = Tile::new_in(rows, cols, self.dataset.n_rows(), self.dataset.n_cols())?;
        self.user_tiles.push(LabeledTile {
            label: label.into(),
            tile,
        });
        Ok(self.touch())
    }

    /// Removes the most recently committed tile.
    pub fn rollback_last_tile(&mut self) -> Result<(LabeledTile, u64)> {
        let t = self.user_tiles.pop().ok_or(Error::NothingToRollBack)?;
        Ok((t, self.touch()))
    }

    pub fn set_hypothesis(&mut self, spec: HypothesisSpec) -> Result<u64> {
        spec.check_bounds(self.dataset.n_rows(), self.dataset.n_cols())?;
        self.spec = spec;
        Ok(self.touch())
    }

    /// Projects one random draw from either side of the cached pair onto the
    /// cached directions.
    pub fn sample_view(&self, which: Which, seed: u64) -> Result<Vec<[f64; 2]>> {
        let cache = self.cache.as_ref().ok_or(Error::NoView)?;
        let tiling = match which {
            Which::One => &cache.pair.resolved_1,
            Which::Two => &cache.pair.resolved_2,
        };
        let mut rng = SeededRng::new(seed);
        let pv = sample_permutation(tiling, &mut rng);
        let values = permute_matrix(self.dataset.values(), &pv)?;
        let d = &cache.view.directions;
        Ok(project_values(&values, &d[0], &d[1]))
    }

    pub fn pcp_payload(&self, rows: &[usize], tau: f64) -> Result<PcpPayload> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("empty selection".into()));
        }
        let suggestion = suggest_attributes(&self.dataset, rows, tau)?;
        let display = match self.dataset.scaling_state() {
            ScalingState::Raw => self.dataset.zscore(ConstantColumnPolicy::Zero)?,
            _ => (*self.dataset).clone(),
        };
        let order: Vec<usize> = suggestion.attributes.iter().map(|a| a.index).collect();
        let values = (0..display.n_rows())
            .map(|i| order.iter().map(|&j| display.values()[(i, j)]).collect())
            .collect();
        let mut selection = rows.to_vec();
        selection.sort_unstable();
        selection.dedup();
        Ok(PcpPayload {
            tau,
            attributes: suggestion.attributes,
            selection,
            values,
        })
    }
}
