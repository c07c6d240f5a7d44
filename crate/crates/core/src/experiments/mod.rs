//! Batch experiments: stability under perturbation, running time, gain
//! matrices across hypothesis pairs, and the four-attribute toy.
//!
//! Every experiment is a pure function of its config (timings aside).

pub mod generators;

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::covariance::{analytical_covariance, CovMatrix};
use crate::dataset::{ConstantColumnPolicy, Dataset};
use crate::error::{Error, Result};
use crate::hypothesis::{assemble, HypothesisSpec};
use crate::projection::{optimal_directions, sign_normalize, sym_eigen_desc, whiten, DEFAULT_EPS_REL};
use crate::sampler::SeededRng;
use crate::selection::{suggest_attributes, GERMAN_WALKTHROUGH_TAU};
use crate::tiling::Tile;

use generators::TileRecipe;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Gaussian,
    PlantedStructure,
    GermanLayoutSynthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: Generator,
    pub n: usize,
    pub m: usize,
    pub noise_sigmas: Vec<f64>,
    pub row_removals: Vec<usize>,
    /// `(n, m)` grid for timing runs.
    pub sizes: Vec<[usize; 2]>,
    pub seed: u64,
    pub replicates: usize,
    /// Number of hypothesis pairs in the gain matrix (1..=4).
    pub pairs: usize,
    /// Threshold for attribute selection of the knowledge tile.
    pub tau: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: Generator::GermanLayoutSynthetic,
            n: 412,
            m: 32,
            noise_sigmas: vec![0.0, 1.0, 2.0, 5.0, 10.0],
            row_removals: vec![0, 100, 200],
            sizes: [500, 1000, 5000, 10000]
                .into_iter()
                .flat_map(|n| [10, 50, 100, 150, 200].map(|m| [n, m]))
                .collect(),
            seed: 1,
            replicates: 10,
            pairs: 4,
            tau: GERMAN_WALKTHROUGH_TAU,
        }
    }
}

impl ExperimentConfig {
    pub fn stability() -> Self {
        Self::default()
    }

    pub fn timing() -> Self {
        Self {
            generator: Generator::Gaussian,
            replicates: 5,
            ..Self::default()
        }
    }

    pub fn gains() -> Self {
        Self {
            generator: Generator::PlantedStructure,
            n: 400,
            m: 24,
            replicates: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.noise_sigmas.is_empty() || self.row_removals.is_empty() || self.sizes.is_empty() {
            return Err(Error::InvalidArgument("experiment lists must be nonempty".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicate count must be at least 1".into()));
        }
        if self.noise_sigmas.iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::InvalidArgument("noise levels must be nonnegative".into()));
        }
        if !(1..=4).contains(&self.pairs) {
            return Err(Error::InvalidArgument("gain matrix supports 1 to 4 hypothesis pairs".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    fn generate(&self, rng: &mut SeededRng) -> Result<Dataset> {
        let mut stream = rng.stream(1);
        match self.generator {
            Generator::Gaussian => generators::gaussian(self.n, self.m, &mut stream),
            Generator::GermanLayoutSynthetic => generators::german_layout(self.n, &mut stream),
            Generator::PlantedStructure => Ok(generators::planted(self.n, self.m, &mut stream)?.data),
        }
    }
}

/// Runs `f` over `items` on scoped threads; output order matches input.
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Σ₁ and the regularised Σ₂ for one hypothesis pair on one dataset.
#[derive(Debug, Clone)]
pub struct PairCovariances {
    pub sigma1: CovMatrix,
    pub sigma2: CovMatrix,
}

impl PairCovariances {
    pub fn compute(data: &Dataset, user_tiles: &[Tile], spec: &HypothesisSpec) -> Result<Self> {
        let pair = assemble(user_tiles, spec, data.n_rows(), data.n_cols())?;
        let y = data.center();
        let sigma1 = analytical_covariance(&y, &pair.resolved_1)?;
        let raw2 = analytical_covariance(&y, &pair.resolved_2)?;
        let sigma2 = CovMatrix::new(whiten(&raw2, DEFAULT_EPS_REL)?.regularized)?;
        Ok(Self { sigma1, sigma2 })
    }

    pub fn gain(&self, v: &[f64]) -> f64 {
        self.sigma1.quadratic_form(v) / self.sigma2.quadratic_form(v)
    }

    pub fn best_direction(&self) -> Result<(Vec<f64>, f64)> {
        let d = optimal_directions(&self.sigma1, &self.sigma2, 1)?;
        Ok((d.vectors[0].clone(), d.gains[0]))
    }
}

// ---------------------------------------------------------------- stability

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCell {
    pub sigma: f64,
    pub removed: usize,
    pub mean_relative_error: f64,
    pub replicate_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTable {
    pub sigmas: Vec<f64>,
    pub removals: Vec<usize>,
    /// Row-major over `sigmas × removals`.
    pub cells: Vec<StabilityCell>,
}

impl StabilityTable {
    pub fn get(&self, sigma: f64, removed: usize) -> Option<&StabilityCell> {
        self.cells.iter().find(|c| c.sigma == sigma && c.removed == removed)
    }
}

/// Removes `removed` rows, adds `sigma`-scaled noise, and re-z-scores.
/// `noise` is a full-size standard-normal matrix so that noise levels share
/// their draws.
fn perturb(data: &Dataset, keep: &[usize], noise: &DMatrix<f64>, sigma: f64) -> Result<Dataset> {
    let kept = if keep.len() == data.n_rows() {
        data.clone()
    } else {
        data.select_rows(keep)?
    };
    let mut values = kept.values().clone();
    if sigma != 0.0 {
        for (r, &i) in keep.iter().enumerate() {
            for j in 0..values.ncols() {
                values[(r, j)] += sigma * noise[(i, j)];
            }
        }
    }
    kept.with_values(values)?.zscore(ConstantColumnPolicy::Zero)
}

fn instantiate(recipes: &[TileRecipe], data: &Dataset) -> Result<Vec<Tile>> {
    Ok(recipes
        .iter()
        .map(|r| r.tile(data))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect())
}

struct StabilityReplicate {
    user: Vec<TileRecipe>,
    focus: TileRecipe,
    noise: DMatrix<f64>,
    keep: Vec<Vec<usize>>,
}

/// Relative loss in gain when the view is computed on perturbed data.
pub fn stability_experiment(cfg: &ExperimentConfig) -> Result<StabilityTable> {
    cfg.validate()?;
    let mut root = SeededRng::new(cfg.seed);
    let data = cfg.generate(&mut root)?;
    let n = data.n_rows();
    if let Some(&bad) = cfg.row_removals.iter().find(|&&dn| dn >= n) {
        return Err(Error::InvalidArgument(format!("cannot remove {bad} of {n} rows")));
    }

    let mut reps = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates {
        let fork = root.fork(r as u64);
        let mut tiles_rng = fork.substream(0, 1, 0);
        let user = (0..3)
            .map(|_| TileRecipe::random(&data, &mut tiles_rng))
            .collect::<Result<Vec<_>>>()?;
        let focus = TileRecipe::random(&data, &mut tiles_rng)?;
        let mut noise_rng = fork.substream(0, 2, 0);
        let noise = DMatrix::from_fn(n, data.n_cols(), |_, _| noise_rng.sample(StandardNormal));
        let keep = cfg
            .row_removals
            .iter()
            .enumerate()
            .map(|(k, &dn)| {
                let mut rng = fork.substream(0, 3, k as u64);
                let mut drop = sample(&mut rng, n, dn).into_vec();
                drop.sort_unstable();
                (0..n).filter(|i| drop.binary_search(i).is_err()).collect()
            })
            .collect();
        reps.push(StabilityReplicate { user, focus, noise, keep });
    }

    let per_rep: Vec<Result<Vec<f64>>> = par_map(&reps, |rep| {
        let all: Vec<usize> = (0..n).collect();
        let clean = perturb(&data, &all, &rep.noise, 0.0)?;
        let clean_pair = PairCovariances::compute(&clean, &instantiate(&rep.user, &clean)?, &rep.focus.singleton_spec(&clean)?)?;
        // evaluate through the same quadratic forms as the perturbed views
        let best = clean_pair.gain(&clean_pair.best_direction()?.0);
        let mut errors = Vec::new();
        for &sigma in &cfg.noise_sigmas {
            for keep in &rep.keep {
                let noisy = perturb(&data, keep, &rep.noise, sigma)?;
                let spec = rep.focus.singleton_spec(&noisy)?;
                let pair = PairCovariances::compute(&noisy, &instantiate(&rep.user, &noisy)?, &spec)?;
                let (v, _) = pair.best_direction()?;
                errors.push((best - clean_pair.gain(&v)) / best);
            }
        }
        Ok(errors)
    });
    let per_rep = per_rep.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut k = 0;
    for &sigma in &cfg.noise_sigmas {
        for &removed in &cfg.row_removals {
            let replicate_errors: Vec<f64> = per_rep.iter().map(|e| e[k]).collect();
            let mean = replicate_errors.iter().sum::<f64>() / replicate_errors.len() as f64;
            cells.push(StabilityCell {
                sigma,
                removed,
                mean_relative_error: mean,
                replicate_errors,
            });
            k += 1;
        }
    }
    Ok(StabilityTable {
        sigmas: cfg.noise_sigmas.clone(),
        removals: cfg.row_removals.clone(),
        cells,
    })
}

// ------------------------------------------------------------------- timing

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub n: usize,
    pub m: usize,
    pub t_model: f64,
    pub t_view: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingTable {
    pub rows: Vec<TimingRow>,
    /// Least-squares slope of `log t_model` against `log(n·m)`.
    pub model_slope: f64,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Times one model build (three random tiles plus hypothesis tiles, both
/// sides) and one view solve.
pub fn time_once(data: &Dataset, rng: &mut SeededRng) -> Result<(f64, f64)> {
    let mut stream = rng.stream(7);
    let user = (0..3)
        .map(|_| TileRecipe::random(data, &mut stream).and_then(|r| r.tile(data)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let spec = TileRecipe::random(data, &mut stream)?.singleton_spec(data)?;

    let start = Instant::now();
    let pair = assemble(&user, &spec, data.n_rows(), data.n_cols())?;
    let t_model = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let y = data.center();
    let s1 = analytical_covariance(&y, &pair.resolved_1)?;
    let s2 = analytical_covariance(&y, &pair.resolved_2)?;
    let dirs = optimal_directions(&s1, &s2, 2)?;
    let t_view = start.elapsed().as_secs_f64();
    std::hint::black_box(dirs);
    Ok((t_model, t_view))
}

pub fn timing_experiment(cfg: &ExperimentConfig) -> Result<TimingTable> {
    cfg.validate()?;
    let mut root = SeededRng::new(cfg.seed);
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &[n, m] in &cfg.sizes {
        let data = generators::gaussian(n, m, &mut root.stream(1))?;
        let mut models = Vec::with_capacity(cfg.replicates);
        let mut views = Vec::with_capacity(cfg.replicates);
        for _ in 0..cfg.replicates {
            let (tm, tv) = time_once(&data, &mut root)?;
            models.push(tm);
            views.push(tv);
        }
        rows.push(TimingRow {
            n,
            m,
            t_model: median(&mut models),
            t_view: median(&mut views),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n * r.m) as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.t_model.max(1e-9)).collect();
    let model_slope = if rows.len() >= 2 { loglog_slope(&xs, &ys) } else { f64::NAN };
    Ok(TimingTable { rows, model_slope })
}

// -------------------------------------------------------------- gain matrix

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTable {
    /// Hypothesis pair names (columns).
    pub pairs: Vec<String>,
    /// Direction names (rows): one per pair, then `pca`.
    pub directions: Vec<String>,
    /// `values[row][col]` = gain of direction `row` under pair `col`.
    pub values: Vec<Vec<f64>>,
    pub vectors: Vec<Vec<f64>>,
}

/// First principal component of the correlation matrix.
pub fn correlation_pc1(data: &Dataset) -> Vec<f64> {
    let y = data.center();
    let n = data.n_rows() as f64;
    let cov = y.values.tr_mul(&y.values) / n;
    let sd: Vec<f64> = (0..cov.nrows()).map(|j| cov[(j, j)].sqrt().max(f64::MIN_POSITIVE)).collect();
    let corr = DMatrix::from_fn(cov.nrows(), cov.ncols(), |i, j| cov[(i, j)] / (sd[i] * sd[j]));
    let (_, v) = sym_eigen_desc(&corr).swap_remove(0);
    let mut v: Vec<f64> = v.iter().copied().collect();
    sign_normalize(&mut v);
    v
}

/// Gains of each pair's optimal direction (and of the first principal
/// component) under every pair: unguided, unguided + knowledge tile, focus,
/// focus + knowledge tile. The knowledge tile covers the dominant planted
/// cluster with attributes picked by σ-ratio below `tau`.
pub fn gain_matrix(cfg: &ExperimentConfig) -> Result<GainTable> {
    cfg.validate()?;
    let mut root = SeededRng::new(cfg.seed);
    let planted = generators::planted(cfg.n, cfg.m, &mut root.stream(1))?;
    gain_matrix_on(&planted, cfg.tau, cfg.pairs)
}

pub fn gain_matrix_on(planted: &generators::PlantedData, tau: f64, pairs: usize) -> Result<GainTable> {
    let data = &planted.data;
    let (n, m) = (data.n_rows(), data.n_cols());
    let suggestion = suggest_attributes(data, &planted.cluster_rows, tau)?;
    let mut cols = suggestion.included();
    if cols.is_empty() {
        cols = planted.cluster_attrs.clone();
    }
    let knowledge = Tile::new_in(planted.cluster_rows.iter().copied(), cols, n, m)?;

    let unguided = HypothesisSpec::unguided(n, m);
    let all: [(&str, Vec<Tile>, &HypothesisSpec); 4] = [
        ("E,none", vec![], &unguided),
        ("E,t", vec![knowledge.clone()], &unguided),
        ("F,none", vec![], &planted.focus),
        ("F,t", vec![knowledge], &planted.focus),
    ];
    let chosen = &all[..pairs];
    let covs = chosen
        .iter()
        .map(|(_, tiles, spec)| PairCovariances::compute(data, tiles, spec))
        .collect::<Result<Vec<_>>>()?;
    let mut vectors = covs
        .iter()
        .map(|c| c.best_direction().map(|(v, _)| v))
        .collect::<Result<Vec<_>>>()?;
    vectors.push(correlation_pc1(data));

    let values = vectors.iter().map(|v| covs.iter().map(|c| c.gain(v)).collect()).collect();
    let mut directions: Vec<String> = chosen.iter().map(|(name, _, _)| format!("v[{name}]")).collect();
    directions.push("v[pca]".into());
    Ok(GainTable {
        pairs: chosen.iter().map(|(name, _, _)| format!("H[{name}]")).collect(),
        directions,
        values,
        vectors,
    })
}

// ---------------------------------------------------------------------- toy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyReport {
    pub first_direction: Vec<f64>,
    pub first_gain: f64,
    /// `|cos|` between the first direction and `(C + D)/√2`.
    pub first_alignment: f64,
    pub second_direction: Vec<f64>,
    pub second_gain: f64,
    /// Share of squared weight on A and B.
    pub second_ab_mass: f64,
}

/// Focus on C versus D, first without knowledge, then knowing A~C and B~D.
pub fn toy_example(seed: u64) -> Result<ToyReport> {
    let data = generators::toy(1000, &mut SeededRng::new(seed).stream(1))?;
    let n = data.n_rows();
    let spec = HypothesisSpec::new((0..n).collect(), vec![vec![2], vec![3]])?;
    let (v1, g1) = PairCovariances::compute(&data, &[], &spec)?.best_direction()?;
    let knowledge = [Tile::new(0..n, [0, 2])?, Tile::new(0..n, [1, 3])?];
    let (v2, g2) = PairCovariances::compute(&data, &knowledge, &spec)?.best_direction()?;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let first_alignment = (v1[2] * h + v1[3] * h).abs();
    let second_ab_mass = v2[0].powi(2) + v2[1].powi(2);
    Ok(ToyReport {
        first_direction: v1,
        first_gain: g1,
        first_alignment,
        second_direction: v2,
        second_gain: g2,
        second_ab_mass,
    })
}

// ------------------------------------------------------------------ output

impl StabilityTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("sigma");
        for dn in &self.removals {
            let _ = write!(out, ",dn_{dn}");
        }
        out.push('\n');
        for &s in &self.sigmas {
            let _ = write!(out, "{s}");
            for &dn in &self.removals {
                let _ = write!(out, ",{}", self.get(s, dn).map_or(f64::NAN, |c| c.mean_relative_error));
            }
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:>8}", "sigma");
        for dn in &self.removals {
            out.push_str(&format!("{:>12}", format!("dn={dn}")));
        }
        out.push('\n');
        for &s in &self.sigmas {
            out.push_str(&format!("{s:>8}"));
            for &dn in &self.removals {
                let e = self.get(s, dn).map_or(f64::NAN, |c| c.mean_relative_error);
                out.push_str(&format!("{e:>12.3}"));
            }
            out.push('\n');
        }
        out
    }
}

impl TimingTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,m,t_model,t_view\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", r.n, r.m, r.t_model, r.t_view);
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:>7} {:>5} {:>12} {:>12}\n", "n", "m", "t_model (s)", "t_view (s)");
        for r in &self.rows {
            out.push_str(&format!("{:>7} {:>5} {:>12.4} {:>12.4}\n", r.n, r.m, r.t_model, r.t_view));
        }
        out.push_str(&format!("log-log slope of t_model vs n*m: {:.3}\n", self.model_slope));
        out
    }
}

impl GainTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction");
        for p in &self.pairs {
            let _ = write!(out, ",{p}");
        }
        out.push('\n');
        for (name, row) in self.directions.iter().zip(&self.values) {
            out.push_str(name);
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = format!("{:>12}", "");
        for p in &self.pairs {
            out.push_str(&format!("{p:>12}"));
        }
        out.push('\n');
        for (name, row) in self.directions.iter().zip(&self.values) {
            out.push_str(&format!("{name:>12}"));
            for v in row {
                out.push_str(&format!("{v:>12.3}"));
            }
            out.push('\n');
        }
        out
    }
}

impl ToyReport {
    pub fn render(&self) -> String {
        let fmt = |v: &[f64]| {
            ["A", "B", "C", "D"]
                .iter()
                .zip(v)
                .map(|(n, w)| format!("{w:+.3}{n}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        format!(
            "no knowledge:       v = {}  gain {:.3}  |cos(v, C+D)| = {:.4}\n\
             knowing A~C, B~D:   v = {}  gain {:.3}  weight on A,B = {:.4}\n",
            fmt(&self.first_direction),
            self.first_gain,
            self.first_alignment,
            fmt(&self.second_direction),
            self.second_gain,
            self.second_ab_mass
        )
    }
}
