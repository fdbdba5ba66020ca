use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use tbrf::{load_csv, Dataset, Error, HyperParams};

use crate::commands::{run, sine_samples, split};
use crate::ParamArgs;

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Labelled CSV. Without it the sine benchmark is generated.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub header: bool,
    /// Sine benchmark size.
    #[arg(long, default_value_t = 50_000)]
    pub synth_n: usize,
    #[arg(long, default_value_t = 0.2)]
    pub noise_sd: f64,
    #[arg(long, default_value_t = 0)]
    pub synth_seed: u64,
    /// Comma-separated values to sweep.
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
    /// Repeats per grid point; repeat `r` uses seed `seed + r` for both the
    /// split and the forest.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    /// Output table (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const COLUMNS: &str =
    "trees,cells,candidates,pro,repeats,failures,mse_mean,mse_sd,time_mean,time_sd,error";

fn list<V: std::str::FromStr>(
    name: &str,
    text: &Option<String>,
    default: V,
) -> Result<Vec<V>, Error> {
    match text {
        None => Ok(vec![default]),
        Some(t) => t
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| Error::Invalid(format!("{name}: cannot parse {s:?}")))
            })
            .collect(),
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn point_row(
    data: &Dataset<f64>,
    params: &HyperParams,
    repeats: usize,
    test_fraction: f64,
    workers: usize,
) -> String {
    let mut mses = Vec::new();
    let mut times = Vec::new();
    let mut last_error = String::new();
    for r in 0..repeats {
        let seed = params.master_seed.wrapping_add(r as u64);
        let params = HyperParams {
            master_seed: seed,
            ..params.clone()
        };
        let outcome = split(data, test_fraction, seed)
            .and_then(|(train, test)| run(&train, &test, &params, workers));
        match outcome {
            Ok((_, report)) => {
                mses.push(report.test_mse);
                times.push(report.train_time_seconds);
            }
            Err(e) => last_error = e.to_string().replace([',', '\n'], ";"),
        }
    }
    let (mse_mean, mse_sd) = mean_sd(&mses);
    let (time_mean, time_sd) = mean_sd(&times);
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        params.trees,
        params.cells,
        params.candidates,
        params.split_fraction,
        repeats,
        repeats - mses.len(),
        mse_mean,
        mse_sd,
        time_mean,
        time_sd,
        last_error
    )
}

pub fn bench(args: &BenchArgs) -> Result<(), Error> {
    if args.repeats == 0 {
        return Err(Error::Invalid("repeats must be at least 1".into()));
    }
    let base = args.params.resolve(&[])?;
    let workers = args.params.workers()?;
    let trees = list("trees", &args.trees, base.trees)?;
    let cells = list("cells", &args.cells, base.cells)?;
    let candidates = list("candidates", &args.candidates, base.candidates)?;
    let pros = list("pro", &args.pro, base.split_fraction)?;
    let data: Dataset<f64> = match &args.data {
        Some(path) => load_csv(path, args.header)?,
        None => {
            let (xs, ys) = sine_samples(args.synth_n, args.noise_sd, args.synth_seed)?;
            Dataset::new(xs, ys, 1)?
        }
    };
    let path = args.out.clone().unwrap_or_else(|| "<stdout>".into());
    let io = |e| Error::Io {
        path: path.clone(),
        source: e,
    };
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(io)?),
        None => Box::new(std::io::stdout()),
    };
    writeln!(out, "{COLUMNS}").map_err(io)?;
    for &t in &trees {
        for &m in &cells {
            for &k in &candidates {
                for &pro in &pros {
                    let params = HyperParams {
                        trees: t,
                        cells: m,
                        candidates: k,
                        split_fraction: pro,
                        ..base.clone()
                    };
                    let row = match params.validate() {
                        Ok(()) => {
                            point_row(&data, &params, args.repeats, args.test_fraction, workers)
                        }
                        Err(e) => format!(
                            "{t},{m},{k},{pro},{},{},NaN,NaN,NaN,NaN,{}",
                            args.repeats,
                            args.repeats,
                            e.to_string().replace([',', '\n'], ";")
                        ),
                    };
                    writeln!(out, "{row}").map_err(io)?;
                    out.flush().map_err(io)?;
                }
            }
        }
    }
    Ok(())
}
