//! Synthetic data generators for the batch experiments.
//!
//! Every generator returns a z-scored numeric dataset; categorical factors
//! (used to pick tile rows) ride along as pending categorical columns.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dataset::{CategoricalColumn, ConstantColumnPolicy, Dataset};
use crate::error::{Error, Result};
use crate::hypothesis::HypothesisSpec;
use crate::tiling::Tile;

/// Column names of the focus groups used in the German walkthrough.
pub const GERMAN_FOCUS_GROUPS: [&[&str]; 4] = [
    &["LEFT.2009", "CDU.2009", "SPD.2009", "FDP.2009", "GREEN.2009"],
    &["Elderly.pop.", "Old.Pop.", "Mid.aged.Pop.", "Young.Pop.", "Children.Pop."],
    &[
        "Agricult..workf.",
        "Prod..workf.",
        "Manufac..Workf.",
        "Constr..workf.",
        "Service.workf.",
        "Trade.workf.",
        "Finance.workf.",
        "Pub..serv..workf.",
    ],
    &["Highschool.degree", "No.school.degree", "Unemploy.", "Unempl..Youth", "Income"],
];


pub const GERMAN_OTHER: [&str; 9] = [
    "Pop.density",
    "GDP",
    "GDP.growth",
    "Turnout.2009",
    "Birth.rate",
    "Death.rate",
    "Migration",
    "Commuters",
    "Area",
];

const REGIONS: [&str; 4] = ["North", "South", "West", "East"];

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn factor(name: &str, labels: &[&str], codes: Vec<usize>) -> CategoricalColumn {
    CategoricalColumn {
        name: name.to_string(),
        labels: labels.iter().map(|s| s.to_string()).collect(),
        codes,
    }
}

fn finish(names: Vec<String>, values: DMatrix<f64>, factors: Vec<CategoricalColumn>) -> Result<Dataset> {
    let mut d = Dataset::new(names, values)?;
    for f in factors {
        d = d.with_categorical(f)?;
    }
    d.zscore(ConstantColumnPolicy::Zero)
}

/// Rows per label of a categorical factor carried by the dataset.
pub fn factor_levels(data: &Dataset, name: &str) -> Result<Vec<(String, Vec<usize>)>> {
    let f = data
        .pending_categorical()
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
    let mut out: Vec<(String, Vec<usize>)> = f.labels.iter().map(|l| (l.clone(), Vec::new())).collect();
    for (i, &c) in f.codes.iter().enumerate() {
        out[c].1.push(i);
    }
    Ok(out)
}

/// Rows where factor `name` equals `label`.
pub fn rows_with(data: &Dataset, name: &str, label: &str) -> Result<Vec<usize>> {
    Ok(factor_levels(data, name)?
        .into_iter()
        .find(|(l, _)| l == label)
        .map(|(_, rows)| rows)
        .unwrap_or_default())
}

/// Three random factors with 2, 16 and 4 levels, named like the German data.
fn random_factors(n: usize, rng: &mut ChaCha8Rng) -> Vec<CategoricalColumn> {
    let states: Vec<usize> = (0..n).map(|_| rng.random_range(0..16)).collect();
    let regions = states.iter().map(|s| s % 4).collect();
    let types = (0..n).map(|_| usize::from(rng.random_bool(0.72))).collect();
    let state_labels: Vec<String> = (1..=16).map(|s| format!("S{s:02}")).collect();
    let state_refs: Vec<&str> = state_labels.iter().map(String::as_str).collect();
    vec![
        factor("Type", &["Urban", "Rural"], types),
        factor("State", &state_refs, states),
        factor("Region", &REGIONS, regions),
    ]
}

/// i.i.d. standard normal data with random Type/State/Region factors.
pub fn gaussian(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let values = DMatrix::from_fn(n, m, |_, _| normal(rng));
    let factors = random_factors(n, rng);
    let names = (1..=m).map(|j| format!("x{j}")).collect();
    finish(names, values, factors)
}

/// 32 correlated socio-economic style attributes driven by latent factors,
/// with Type (2), State (16) and Region (4) factors.
pub fn german_layout(n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let factors = random_factors(n, rng);
    let (types, states, regions) = (&factors[0].codes, &factors[1].codes, &factors[2].codes);
    let state_effect: Vec<f64> = (0..16).map(|_| normal(rng)).collect();

    let latents = 4;
    let latent = DMatrix::from_fn(n, latents, |i, k| {
        let east = f64::from(regions[i] == 3);
        let urban = f64::from(types[i] == 0);
        match k {
            0 => 1.5 * east,
            1 => 1.2 * urban,
            2 => 0.5 * state_effect[states[i]],
            _ => 0.0,
        }
    });
    let latent = latent + DMatrix::from_fn(n, latents, |_, _| normal(rng));

    let mut names: Vec<String> = Vec::new();
    let mut block_of: Vec<usize> = Vec::new();
    for (b, group) in GERMAN_FOCUS_GROUPS.iter().enumerate() {
        names.extend(group.iter().map(|s| s.to_string()));
        block_of.extend(std::iter::repeat_n(b, group.len()));
    }
    names.extend(GERMAN_OTHER.iter().map(|s| s.to_string()));
    block_of.extend(std::iter::repeat_n(4, GERMAN_OTHER.len()));

    // each block leans on one latent factor, with random per-column loadings
    let emphasis = [[1.0, 0.4, 0.2, 0.1], [0.5, 0.2, 0.1, 1.0], [0.2, 1.0, 0.3, 0.2], [0.3, 0.6, 1.0, 0.2], [0.3, 0.5, 0.3, 0.3]];
    let m = names.len();
    let loadings = DMatrix::from_fn(latents, m, |k, j| {
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        sign * emphasis[block_of[j]][k] * (0.7 + 0.6 * rng.random::<f64>())
    });
    let values = &latent * loadings + DMatrix::from_fn(n, m, |_, _| 0.6 * normal(rng));
    finish(names, values, factors)
}

/// German-layout focus hypothesis: rural rows, the four attribute groups.
pub fn german_focus_spec(data: &Dataset) -> Result<HypothesisSpec> {
    let rows = rows_with(data, "Type", "Rural")?;
    let partition = GERMAN_FOCUS_GROUPS
        .iter()
        .map(|g| {
            g.iter()
                .map(|name| data.column_index(name).ok_or_else(|| Error::UnknownColumn(name.to_string())))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    HypothesisSpec::new(rows, partition)
}

/// Data with two planted patterns and a focus hypothesis.
#[derive(Debug, Clone)]
pub struct PlantedData {
    pub data: Dataset,
    /// Dominant cluster (rural rows of the East zone).
    pub cluster_rows: Vec<usize>,
    pub cluster_attrs: Vec<usize>,
    /// Weaker pattern (urban rows).
    pub second_rows: Vec<usize>,
    pub second_attrs: Vec<usize>,
    /// Rural rows, focus columns split into four blocks.
    pub focus: HypothesisSpec,
}

/// Correlated background plus a tight, strongly shifted cluster on the first
/// quarter of the attributes and a looser shifted group on the second
/// quarter. Needs `m >= 8`.
pub fn planted(n: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<PlantedData> {
    if m < 8 || n < 20 {
        return Err(Error::InvalidArgument(format!("planted generator needs n >= 20 and m >= 8, got {n}x{m}")));
    }
    let kinds: Vec<usize> = (0..n).map(|_| usize::from(rng.random_bool(0.7))).collect();
    let zones: Vec<usize> = (0..n).map(|_| rng.random_range(0..4)).collect();

    let latents = 3;
    let latent = DMatrix::from_fn(n, latents, |_, _| normal(rng));
    let loadings = DMatrix::from_fn(latents, m, |_, _| 0.8 * normal(rng));
    let mut values = latent * loadings + DMatrix::from_fn(n, m, |_, _| normal(rng));

    let quarter = m / 4;
    let cluster_attrs: Vec<usize> = (0..quarter).collect();
    let second_attrs: Vec<usize> = (quarter..2 * quarter).collect();
    let cluster_rows: Vec<usize> = (0..n).filter(|&i| kinds[i] == 1 && zones[i] == 3).collect();
    let second_rows: Vec<usize> = (0..n).filter(|&i| kinds[i] == 0).collect();

    let scale: Vec<f64> = (0..m)
        .map(|j| {
            let c = values.column(j);
            let mean = c.mean();
            (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt()
        })
        .collect();
    for &i in &cluster_rows {
        for &j in &cluster_attrs {
            values[(i, j)] = scale[j] * (3.0 + 0.15 * normal(rng));
        }
    }
    for &i in &second_rows {
        for &j in &second_attrs {
            values[(i, j)] = scale[j] * (-1.5 + 0.4 * normal(rng));
        }
    }

    let names = (1..=m).map(|j| format!("a{j}")).collect();
    let factors = vec![
        factor("Kind", &["Urban", "Rural"], kinds.clone()),
        factor("Zone", &REGIONS, zones),
    ];
    let data = finish(names, values, factors)?;

    let focus_rows: Vec<usize> = (0..n).filter(|&i| kinds[i] == 1).collect();
    let focus_cols = m - quarter;
    let block = focus_cols / 4;
    let partition = (0..4)
        .map(|b| {
            let end = if b == 3 { focus_cols } else { (b + 1) * block };
            (b * block..end).collect()
        })
        .collect();
    let focus = HypothesisSpec::new(focus_rows, partition)?;
    Ok(PlantedData {
        data,
        cluster_rows,
        cluster_attrs,
        second_rows,
        second_attrs,
        focus,
    })
}

/// How to rebuild a random tile on any subset of the rows: a factor level and
/// a column set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TileRecipe {
    pub factor: String,
    pub label: String,
    pub cols: Vec<usize>,
}

impl TileRecipe {
    /// Picks a random factor, one of its observed levels, and 2..=32 columns.
    pub fn random(data: &Dataset, rng: &mut ChaCha8Rng) -> Result<Self> {
        let factors = data.pending_categorical();
        if factors.is_empty() {
            return Err(Error::InvalidArgument("random tiles need categorical factors".into()));
        }
        let f = &factors[rng.random_range(0..factors.len())];
        let levels = factor_levels(data, &f.name)?;
        let observed: Vec<&(String, Vec<usize>)> = levels.iter().filter(|(_, r)| !r.is_empty()).collect();
        let (label, _) = observed[rng.random_range(0..observed.len())];
        let m = data.n_cols();
        let hi = m.min(32);
        let k = if hi <= 2 { hi } else { rng.random_range(2..=hi) };
        let mut cols: Vec<usize> = sample(rng, m, k).into_vec();
        cols.sort_unstable();
        Ok(Self {
            factor: f.name.clone(),
            label: label.clone(),
            cols,
        })
    }

    pub fn rows(&self, data: &Dataset) -> Result<Vec<usize>> {
        rows_with(data, &self.factor, &self.label)
    }

    /// The tile on `data`, or `None` if the level has no rows there.
    pub fn tile(&self, data: &Dataset) -> Result<Option<Tile>> {
        let rows = self.rows(data)?;
        if rows.is_empty() {
            return Ok(None);
        }
        Ok(Some(Tile::new_in(rows, self.cols.iter().copied(), data.n_rows(), data.n_cols())?))
    }

    /// Hypothesis joining the recipe's columns against singletons.
    pub fn singleton_spec(&self, data: &Dataset) -> Result<HypothesisSpec> {
        HypothesisSpec::new(self.rows(data)?, self.cols.iter().map(|&c| vec![c]).collect())
    }
}

/// The four-attribute toy: A and B strongly correlated, C = A + noise,
/// D = B + noise.
pub fn toy(n: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let a = normal(rng);
        let b = a + 0.1 * normal(rng);
        let c = a + 0.5 * normal(rng);
        let d = b + 0.5 * normal(rng);
        rows.push(vec![a, b, c, d]);
    }
    let names = ["A", "B", "C", "D"].iter().map(|s| s.to_string()).collect();
    Dataset::from_rows(names, &rows)?.zscore(ConstantColumnPolicy::Error)
}
