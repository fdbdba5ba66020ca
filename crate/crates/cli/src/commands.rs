use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use rand_distr::{Distribution, Normal, Uniform};
use tbrf::data::read_numeric_rows;
use tbrf::{
    load_csv, model, train_test_split, Dataset, Error, Forest, HyperParams, RandomStream, Scalar,
    ScalarKind,
};

use crate::report::RunReport;
use crate::ParamArgs;

/// Stream for the train/test split, outside the per-tree namespace.
pub const SPLIT_STREAM: [u64; 2] = [u64::MAX, 1];
/// Stream for synthetic data.
pub const SYNTH_STREAM: [u64; 2] = [u64::MAX, tbrf::rng::purpose::SYNTH];

type Result<T> = std::result::Result<T, Error>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(io_err(path))
}

/// Writes to `path`, or to stdout when it is absent.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn sidecar(model: &Path, ext: &str) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Training CSV, target in the last column.
    #[arg(long)]
    pub data: PathBuf,
    /// The CSV files have a header row.
    #[arg(long)]
    pub header: bool,
    /// Where to save the model.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub trees: Option<String>,
    #[arg(long)]
    pub cells: Option<String>,
    #[arg(long)]
    pub candidates: Option<String>,
    #[arg(long)]
    pub pro: Option<String>,
    #[command(flatten)]
    pub params: ParamArgs,
    /// Separate labelled test file. Without it, `--test-fraction` of the
    /// data is held out.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    /// Write the held-out rows here.
    #[arg(long)]
    pub test_out: Option<PathBuf>,
    /// Key-value report (default: `<model>.report`).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Append a CSV row of the report here.
    #[arg(long)]
    pub report_csv: Option<PathBuf>,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let params = args.params.resolve(&[
        ("trees", args.trees.clone()),
        ("cells", args.cells.clone()),
        ("candidates", args.candidates.clone()),
        ("split_fraction", args.pro.clone()),
    ])?;
    match args.params.precision {
        ScalarKind::F64 => train_as::<f64>(args, &params),
        ScalarKind::F32 => train_as::<f32>(args, &params),
    }
}

/// Splits `data` with the stream reserved for that purpose.
pub fn split<T: Scalar>(
    data: &Dataset<T>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    let mut stream = RandomStream::at(seed, SPLIT_STREAM.to_vec());
    train_test_split(data, test_fraction, &mut stream)
}

/// Trains on `train` and scores on `test`.
pub fn run<T: Scalar>(
    train: &Dataset<T>,
    test: &Dataset<T>,
    params: &HyperParams,
    workers: usize,
) -> Result<(Forest<T>, RunReport)> {
    let start = Instant::now();
    let forest = Forest::train_with_workers(train, params, workers)?;
    let train_time_seconds = start.elapsed().as_secs_f64();
    let test_mse = forest.evaluate(test)?.as_f64();
    let per_tree_mse = forest
        .per_tree_mse(test)?
        .iter()
        .map(|v| v.as_f64())
        .collect();
    let report = RunReport {
        params: params.clone(),
        train_time_seconds,
        test_mse,
        per_tree_mse,
        n_train: train.len(),
        n_test: test.len(),
        seed: params.master_seed,
    };
    Ok((forest, report))
}

fn train_as<T: Scalar>(args: &TrainArgs, params: &HyperParams) -> Result<()> {
    let data: Dataset<T> = load_csv(&args.data, args.header)?;
    let (train, test) = match &args.test {
        Some(path) => (data, load_csv(path, args.header)?),
        None => split(&data, args.test_fraction, params.master_seed)?,
    };
    if let Some(path) = &args.test_out {
        test.save_csv(path, args.header)?;
    }
    let (forest, report) = run(&train, &test, params, args.params.workers()?)?;
    model::save(&forest, &args.model)?;
    let train_mse = forest.evaluate(&train)?;
    model::save_metadata(
        &forest,
        &[
            ("train_mse", train_mse.to_string()),
            ("test_mse", report.test_mse.to_string()),
        ],
        sidecar(&args.model, ".meta"),
    )?;
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| sidecar(&args.model, ".report"));
    let text = report.key_values();
    fs::write(&report_path, &text).map_err(io_err(&report_path))?;
    if let Some(path) = &args.report_csv {
        report.append_csv(path)?;
    }
    print!("{text}");
    Ok(())
}

fn model_kind(path: &Path) -> Result<(ScalarKind, Vec<u8>)> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok((model::peek_scalar_kind(&bytes)?, bytes))
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with the model's features, optionally followed by a target.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Output CSV (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let (kind, bytes) = model_kind(&args.model)?;
    match kind {
        ScalarKind::F64 => predict_as::<f64>(args, &bytes),
        ScalarKind::F32 => predict_as::<f32>(args, &bytes),
    }
}

fn predict_as<T: Scalar>(args: &PredictArgs, bytes: &[u8]) -> Result<()> {
    let forest: Forest<T> = model::from_bytes(bytes)?;
    let d = forest.dim();
    let text = fs::read_to_string(&args.data).map_err(io_err(&args.data))?;
    let rows: Vec<Vec<T>> = read_numeric_rows(text.as_bytes(), args.header)?;
    let width = rows.first().map_or(d, Vec::len);
    if width != d && width != d + 1 {
        return Err(Error::Invalid(format!(
            "{} has {width} columns, model expects {d} features (plus an optional target)",
            args.data.display()
        )));
    }
    let header = match text.lines().next().filter(|_| args.header) {
        Some(line) => line.trim().to_string(),
        None => {
            let mut names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
            if width == d + 1 {
                names.push("y".into());
            }
            names.join(",")
        }
    };
    let features: Vec<&[T]> = rows.iter().map(|r| &r[..d]).collect();
    let preds = forest.predict_batch(&features)?;
    let mut out = output(args.out.as_deref())?;
    let path = args.out.clone().unwrap_or_else(|| "<stdout>".into());
    let werr = io_err(&path);
    let mut body = String::with_capacity(rows.len() * 32);
    body.push_str(&header);
    body.push_str(",prediction\n");
    for (row, p) in rows.iter().zip(&preds) {
        for v in row {
            body.push_str(&v.to_string());
            body.push(',');
        }
        body.push_str(&p.to_string());
        body.push('\n');
    }
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(werr)
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub header: bool,
    /// Also print the MSE of every tree.
    #[arg(long)]
    pub per_tree: bool,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let (kind, bytes) = model_kind(&args.model)?;
    match kind {
        ScalarKind::F64 => evaluate_as::<f64>(args, &bytes),
        ScalarKind::F32 => evaluate_as::<f32>(args, &bytes),
    }
}

fn evaluate_as<T: Scalar>(args: &EvaluateArgs, bytes: &[u8]) -> Result<()> {
    let forest: Forest<T> = model::from_bytes(bytes)?;
    let data: Dataset<T> = load_csv(&args.data, args.header)?;
    println!("test_mse = {}", forest.evaluate(&data)?.as_f64());
    println!("n_test = {}", data.len());
    if args.per_tree {
        let per_tree: Vec<String> = forest
            .per_tree_mse(&data)?
            .iter()
            .map(|v| v.as_f64().to_string())
            .collect();
        println!("per_tree_mse = {}", per_tree.join(","));
    }
    Ok(())
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SynthKind {
    /// `y = sin(x) + noise`, `x ~ U(0, 10)`.
    Sin,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "sin")]
    pub kind: SynthKind,
    #[arg(long)]
    pub n: usize,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 0.2)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write an `x0,y` header row.
    #[arg(long)]
    pub header: bool,
}

/// `n` samples of the sine benchmark.
pub fn sine_samples(n: usize, noise_sd: f64, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::Invalid("n must be at least 1".into()));
    }
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|_| Error::Invalid(format!("noise_sd must be non-negative, got {noise_sd}")))?;
    let uniform = Uniform::new(0.0, 10.0).expect("valid range");
    let mut stream = RandomStream::at(seed, SYNTH_STREAM.to_vec());
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = uniform.sample(&mut stream);
        let e: f64 = noise.sample(&mut stream);
        xs.push(x);
        ys.push(x.sin() + e);
    }
    Ok((xs, ys))
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let SynthKind::Sin = args.kind;
    let (xs, ys) = sine_samples(args.n, args.noise_sd, args.seed)?;
    let data = Dataset::new(xs, ys, 1)?;
    data.save_csv(&args.out, args.header)
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Lower corner, comma separated (default: the training bounding box).
    #[arg(long)]
    pub lower: Option<String>,
    #[arg(long)]
    pub upper: Option<String>,
    /// Points per axis.
    #[arg(long, default_value_t = 101)]
    pub resolution: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_corner(text: &str, d: usize) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Invalid(format!("cannot parse coordinate {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != d {
        return Err(Error::Invalid(format!(
            "expected {d} coordinates, got {}",
            values.len()
        )));
    }
    Ok(values)
}

/// Coordinates of `resolution` evenly spaced points from `lo` to `hi`.
pub fn axis_points(lo: f64, hi: f64, resolution: usize) -> Vec<f64> {
    if resolution == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (resolution - 1) as f64;
    (0..resolution)
        .map(|i| {
            if i + 1 == resolution {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect()
}

pub fn grid_export(args: &GridArgs) -> Result<()> {
    let (kind, bytes) = model_kind(&args.model)?;
    match kind {
        ScalarKind::F64 => grid_as::<f64>(args, &bytes),
        ScalarKind::F32 => grid_as::<f32>(args, &bytes),
    }
}

fn grid_as<T: Scalar>(args: &GridArgs, bytes: &[u8]) -> Result<()> {
    let forest: Forest<T> = model::from_bytes(bytes)?;
    let d = forest.dim();
    if d > 2 {
        return Err(Error::Invalid(format!(
            "grid export needs a 1-D or 2-D model, this one has {d} features"
        )));
    }
    if args.resolution == 0 {
        return Err(Error::Invalid("resolution must be at least 1".into()));
    }
    let lower = match &args.lower {
        Some(s) => parse_corner(s, d)?,
        None => forest.meta.lower.iter().map(|v| v.as_f64()).collect(),
    };
    let upper = match &args.upper {
        Some(s) => parse_corner(s, d)?,
        None => forest.meta.upper.iter().map(|v| v.as_f64()).collect(),
    };
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| axis_points(lower[i], upper[i], args.resolution))
        .collect();
    let points: Vec<Vec<f64>> = match d {
        1 => axes[0].iter().map(|&x| vec![x]).collect(),
        _ => axes[0]
            .iter()
            .flat_map(|&x| axes[1].iter().map(move |&y| vec![x, y]))
            .collect(),
    };
    let typed: Vec<Vec<T>> = points
        .iter()
        .map(|p| p.iter().map(|&v| T::lit(v)).collect())
        .collect();
    let preds = forest.predict_batch(&typed)?;
    let mut body = (0..d).map(|i| format!("x{i},")).collect::<String>();
    body.push_str("prediction\n");
    for (p, y) in typed.iter().zip(&preds) {
        for v in p {
            body.push_str(&v.to_string());
            body.push(',');
        }
        body.push_str(&y.to_string());
        body.push('\n');
    }
    let path = args.out.clone().unwrap_or_else(|| "<stdout>".into());
    let mut out = output(args.out.as_deref())?;
    out.write_all(body.as_bytes())
        .and_then(|_| out.flush())
        .map_err(io_err(&path))
}
