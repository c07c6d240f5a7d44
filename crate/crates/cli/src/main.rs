//! `corand` — batch experiments, one-off computations, and the HTTP service.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use corand::experiments::{self, ExperimentConfig};
use corand::projection::{optimal_directions, project};
use corand::{
    analytical_covariance, apply, assemble, load_csv, montecarlo_covariance, sample_permutation, ConstantColumnPolicy,
    Dataset, HypothesisSpec, LoadOptions, SeededRng, Tile, Tiling,
};
use corand_service::ServiceConfig;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "corand", version, about = "Guided exploration with constrained permutation backgrounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relative gain loss under added noise and removed rows.
    Stability(ExperimentArgs),
    /// Median running time of model building and view computation.
    Timing(ExperimentArgs),
    /// Gains of each hypothesis pair's optimal direction under every pair.
    Gains(ExperimentArgs),
    /// The four-attribute toy example.
    Toy(ExperimentArgs),
    /// Draw permuted copies of a dataset under a tiling.
    Sample(SampleArgs),
    /// Covariance matrix of the permutation distribution of a tiling.
    Cov(CovArgs),
    /// Most informative view for a hypothesis pair.
    View(ViewArgs),
    /// Run the HTTP/JSON service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ExperimentArgs {
    /// JSON experiment config; unset fields take the experiment's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the CSV table and JSON metadata.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scale {
    Zscore,
    None,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Columns to keep (comma-separated); all by default.
    #[arg(long, value_delimiter = ',')]
    columns: Option<Vec<String>>,
    /// Columns to treat as categorical (comma-separated).
    #[arg(long, value_delimiter = ',')]
    categorical: Vec<String>,
    /// Scaling of real-valued columns before use.
    #[arg(long, value_enum)]
    scale: Option<Scale>,
}

impl DataArgs {
    fn load(&self, default_scale: Scale) -> Result<Dataset> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        let options = LoadOptions {
            delimiter: self.delimiter as u8,
            columns: self.columns.clone(),
            categorical: self.categorical.clone(),
            ..LoadOptions::default()
        };
        let file = File::open(&self.data).with_context(|| format!("opening {}", self.data.display()))?;
        let mut d = load_csv(file, &options).with_context(|| format!("reading {}", self.data.display()))?;
        if let Scale::Zscore = self.scale.unwrap_or(default_scale) {
            d = d.zscore(ConstantColumnPolicy::Error)?;
        }
        Ok(d.onehot_encode()?)
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Tiling as JSON: `{n, m, tiles: [{id, rows, cols}]}` or a list of `{rows, cols}`.
    #[arg(long)]
    tiling: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Output directory; samples are written as sample-001.csv, ...
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CovArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    tiling: PathBuf,
    /// Also estimate the covariance from this many sampled permutations.
    #[arg(long)]
    montecarlo: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ViewArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Hypothesis as JSON: `{rows, partition}`; missing fields mean all rows / singleton columns.
    #[arg(long)]
    hypothesis: Option<PathBuf>,
    /// Known tiles as a JSON list of `{rows, cols}`.
    #[arg(long)]
    tiles: Option<PathBuf>,
    /// Coordinates CSV; a `.json` sidecar with directions and gains is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = "CORAND_HOST", default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, env = "CORAND_PORT", default_value_t = 8080)]
    port: u16,
    /// Largest accepted upload in bytes.
    #[arg(long, env = "CORAND_MAX_UPLOAD_BYTES", default_value_t = 64 * 1024 * 1024)]
    max_upload_bytes: usize,
    /// Views of larger datasets are downsampled to this many points.
    #[arg(long, env = "CORAND_MAX_POINTS", default_value_t = 20_000)]
    max_points: usize,
    /// Directory for session snapshots.
    #[arg(long, env = "CORAND_SNAPSHOT_DIR")]
    snapshot_dir: Option<PathBuf>,
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn parse_tiles(value: Value) -> Result<Vec<Tile>> {
    let records: Vec<Value> = serde_json::from_value(value).context("expected a list of tiles")?;
    records
        .into_iter()
        .map(|r| {
            let rows: Vec<usize> = serde_json::from_value(r["rows"].clone()).context("tile rows")?;
            let cols: Vec<usize> = serde_json::from_value(r["cols"].clone()).context("tile cols")?;
            Ok(Tile::new(rows, cols)?)
        })
        .collect()
}

fn read_tiling(path: &Path, n: usize, m: usize) -> Result<Tiling> {
    let value = read_json(path)?;
    let tiling = if value.is_array() {
        let tiles = parse_tiles(value)?;
        for t in &tiles {
            t.check_bounds(n, m)?;
        }
        Tiling::from_tiles(n, m, &tiles)?
    } else {
        serde_json::from_value::<Tiling>(value).context("invalid tiling")?
    };
    if (tiling.n_rows(), tiling.n_cols()) != (n, m) {
        bail!("tiling is {}x{} but the data are {n}x{m}", tiling.n_rows(), tiling.n_cols());
    }
    Ok(tiling)
}

fn load_config(args: &ExperimentArgs, preset: ExperimentConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        None => preset,
        Some(path) => {
            // fields missing from the file fall back to the preset
            let mut base = serde_json::to_value(&preset)?;
            if let (Value::Object(b), Value::Object(over)) = (&mut base, read_json(path)?) {
                b.extend(over);
            } else {
                bail!("config must be a JSON object");
            }
            serde_json::from_value(base).context("invalid experiment config")?
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(out: Option<&Path>, name: &str, csv: &str, meta: Value) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{name}.csv")), csv)?;
        std::fs::write(dir.join(format!("{name}.json")), serde_json::to_string_pretty(&meta)?)?;
    }
    Ok(())
}

fn metadata(cfg: Option<&ExperimentConfig>, seed: u64, wall: f64, results: Value) -> Value {
    json!({
        "config": cfg,
        "config_sha256": cfg.map(ExperimentConfig::hash),
        "seed": seed,
        "wall_time_s": wall,
        "version": env!("CARGO_PKG_VERSION"),
        "results": results,
    })
}

fn run_experiment(command: &Command, args: &ExperimentArgs) -> Result<()> {
    let out = args.out.as_deref();
    let start = Instant::now();
    match command {
        Command::Stability(_) => {
            let cfg = load_config(args, ExperimentConfig::stability())?;
            let table = experiments::stability_experiment(&cfg)?;
            let meta = metadata(Some(&cfg), cfg.seed, start.elapsed().as_secs_f64(), serde_json::to_value(&table)?);
            write_outputs(out, "stability", &table.to_csv(), meta)?;
            print!("{}", table.render());
        }
        Command::Timing(_) => {
            let cfg = load_config(args, ExperimentConfig::timing())?;
            let table = experiments::timing_experiment(&cfg)?;
            let meta = metadata(Some(&cfg), cfg.seed, start.elapsed().as_secs_f64(), serde_json::to_value(&table)?);
            write_outputs(out, "timing", &table.to_csv(), meta)?;
            print!("{}", table.render());
        }
        Command::Gains(_) => {
            let cfg = load_config(args, ExperimentConfig::gains())?;
            let table = experiments::gain_matrix(&cfg)?;
            let meta = metadata(Some(&cfg), cfg.seed, start.elapsed().as_secs_f64(), serde_json::to_value(&table)?);
            write_outputs(out, "gains", &table.to_csv(), meta)?;
            print!("{}", table.render());
        }
        Command::Toy(_) => {
            if args.config.is_some() {
                bail!("the toy example takes no config, only --seed");
            }
            let seed = args.seed.unwrap_or(1);
            let report = experiments::toy_example(seed)?;
            let mut csv = String::from("scenario,A,B,C,D,gain\n");
            for (name, v, g) in [
                ("no_knowledge", &report.first_direction, report.first_gain),
                ("known_pairs", &report.second_direction, report.second_gain),
            ] {
                csv.push_str(&format!("{name},{},{},{},{},{g}\n", v[0], v[1], v[2], v[3]));
            }
            let meta = metadata(None, seed, start.elapsed().as_secs_f64(), serde_json::to_value(&report)?);
            write_outputs(out, "toy", &csv, meta)?;
            print!("{}", report.render());
        }
        _ => unreachable!("not an experiment"),
    }
    Ok(())
}

fn run_sample(args: &SampleArgs) -> Result<()> {
    let data = args.data.load(Scale::None)?;
    let tiling = read_tiling(&args.tiling, data.n_rows(), data.n_cols())?;
    std::fs::create_dir_all(&args.out)?;
    let mut rng = SeededRng::new(args.seed);
    for k in 1..=args.count {
        let pv = sample_permutation(&tiling, &mut rng);
        let path = args.out.join(format!("sample-{k:03}.csv"));
        apply(&data, &pv)?.write_csv(BufWriter::new(File::create(&path)?))?;
    }
    eprintln!("wrote {} samples to {}", args.count, args.out.display());
    Ok(())
}

fn print_matrix(out: &mut impl Write, names: &[String], m: &nalgebra::DMatrix<f64>) -> Result<()> {
    writeln!(out, ",{}", names.join(","))?;
    for (i, name) in names.iter().enumerate() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        writeln!(out, "{name},{}", row.join(","))?;
    }
    Ok(())
}

fn run_cov(args: &CovArgs) -> Result<()> {
    let data = args.data.load(Scale::Zscore)?;
    let tiling = read_tiling(&args.tiling, data.n_rows(), data.n_cols())?;
    let y = data.center();
    let cov = analytical_covariance(&y, &tiling)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    print_matrix(&mut out, data.column_names(), cov.as_matrix())?;
    if let Some(draws) = args.montecarlo {
        let mc = montecarlo_covariance(&y, &tiling, draws, &mut SeededRng::new(args.seed))?;
        writeln!(out)?;
        print_matrix(&mut out, data.column_names(), mc.as_matrix())?;
        eprintln!(
            "max |analytical - Monte-Carlo| over {draws} draws: {:.4}",
            (cov.as_matrix() - mc.as_matrix()).amax()
        );
    }
    Ok(())
}

fn run_view(args: &ViewArgs) -> Result<()> {
    let data = args.data.load(Scale::Zscore)?;
    let (n, m) = (data.n_rows(), data.n_cols());
    let spec = match &args.hypothesis {
        None => HypothesisSpec::unguided(n, m),
        Some(path) => {
            let v = read_json(path)?;
            let rows = match &v["rows"] {
                Value::Null => (0..n).collect(),
                r => serde_json::from_value(r.clone()).context("hypothesis rows")?,
            };
            let partition = match &v["partition"] {
                Value::Null => (0..m).map(|j| vec![j]).collect(),
                p => serde_json::from_value(p.clone()).context("hypothesis partition")?,
            };
            HypothesisSpec::new(rows, partition)?
        }
    };
    let tiles = match &args.tiles {
        None => Vec::new(),
        Some(path) => parse_tiles(read_json(path)?)?,
    };
    let pair = assemble(&tiles, &spec, n, m)?;
    let y = data.center();
    let s1 = analytical_covariance(&y, &pair.resolved_1)?;
    let s2 = analytical_covariance(&y, &pair.resolved_2)?;
    let dirs = optimal_directions(&s1, &s2, 2)?;
    let view = project(&data, &dirs)?;

    let mut w = csv_writer(&args.out)?;
    writeln!(w, "x,y")?;
    for [x, y] in &view.coords {
        writeln!(w, "{x},{y}")?;
    }
    w.flush()?;
    let sidecar = args.out.with_extension("json");
    let meta = json!({
        "columns": data.column_names(),
        "directions": view.directions,
        "gains": view.gains,
        "axis_labels": view.axis_labels,
        "clamped_eigenvalues": dirs.clamped_count,
    });
    std::fs::write(&sidecar, serde_json::to_string_pretty(&meta)?)?;
    println!("gains {:.4} {:.4}", view.gains[0], view.gains[1]);
    for (k, labels) in view.axis_labels.iter().enumerate() {
        let names: Vec<String> = labels.iter().map(|l| format!("{:+.2} {}", l.weight, l.name)).collect();
        println!("axis {}: {}", k + 1, names.join(", "));
    }
    Ok(())
}

fn csv_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn run_serve(args: &ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        max_upload_bytes: args.max_upload_bytes,
        max_points: args.max_points,
        snapshot_dir: args.snapshot_dir.clone(),
    };
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(corand_service::serve(addr, config))?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match &cli.command {
        c @ (Command::Stability(a) | Command::Timing(a) | Command::Gains(a) | Command::Toy(a)) => run_experiment(c, a),
        Command::Sample(a) => run_sample(a),
        Command::Cov(a) => run_cov(a),
        Command::View(a) => run_view(a),
        Command::Serve(a) => run_serve(a),
    }
}
