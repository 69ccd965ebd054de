use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::Serialize;

use sparse_ar::estimator::fit_pcmle;
use sparse_ar::forecast::evaluate;
use sparse_ar::io;
use sparse_ar::montecarlo::{curve_csv, probability_curve, raw_csv, run_experiment, summary_csv};
use sparse_ar::selection::fpe_select;
use sparse_ar::{
    fit_mle, gaussian_scale_estimate, simulate, tune, Error, FitOptions, FitResult, InnovationFamily, PenaltyKind,
    Result, TuningGrid,
};

const DEFAULT_LAMBDA_GRID: &str = "0.005:0.2:16";

#[derive(Parser)]
#[command(name = "sparse-ar", version, about = "Sparse AR model fitting by penalized conditional likelihood")]
struct Cli {
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true, env = "SPARSE_AR_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a stationary series from a model file.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = sparse_ar::ar::DEFAULT_BURN_IN)]
        burn_in: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit an AR(p) model, optionally penalized and tuned on a holdout.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        order: u64,
        #[arg(long, value_enum, default_value_t = Family::Gaussian)]
        innovation: Family,
        #[arg(long)]
        df: Option<f64>,
        /// Gaussian scale; estimated from least-squares residuals when absent.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, value_enum, default_value_t = PenaltyArg::Scad)]
        penalty: PenaltyArg,
        /// `lo:hi:n` geometric grid or a single λ.
        #[arg(long, default_value = DEFAULT_LAMBDA_GRID)]
        lambda_grid: String,
        #[arg(long, value_delimiter = ',', default_value = "2.1")]
        a: Vec<f64>,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Choose an AR order by Final Prediction Error.
    Select {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        pmax: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score rolling k-step forecasts of fitted models over a holdout.
    Forecast {
        #[arg(long)]
        input: PathBuf,
        /// One or more fit files; each gets its own report.
        #[arg(long, num_args = 1.., required = true)]
        fit: Vec<PathBuf>,
        /// 1 if the fits model first differences of the input.
        #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
        difference: u8,
        #[arg(long)]
        holdout: usize,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        steps: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a design file.
    Mc {
        #[arg(long)]
        design: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the design's master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gaussian,
    #[value(name = "student_t")]
    StudentT,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PenaltyArg {
    Scad,
    Lasso,
    None,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_) | Error::Model(_) => 1,
        Error::DegenerateData(_) | Error::Scoring { .. } | Error::Io { .. } | Error::Format(_) => 2,
        Error::Convergence { .. } => 3,
    }
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(p) => io::write_json(p, value),
        None => {
            println!("{}", io::to_json(value)?);
            Ok(())
        }
    }
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::rng().random::<u64>();
        eprintln!("seed: {s}");
        s
    })
}

fn innovation_for(family: Family, df: Option<f64>, sigma: Option<f64>, series: &[f64], order: usize) -> Result<InnovationFamily> {
    match family {
        Family::StudentT => {
            if sigma.is_some() {
                return Err(Error::InvalidInput("--sigma applies to gaussian innovations only".into()));
            }
            let df = df.ok_or_else(|| Error::InvalidInput("student_t innovations need --df".into()))?;
            InnovationFamily::student_t(df)
        }
        Family::Gaussian => {
            if df.is_some() {
                return Err(Error::InvalidInput("--df applies to student_t innovations only".into()));
            }
            match sigma {
                Some(s) => InnovationFamily::gaussian(s),
                None => InnovationFamily::gaussian(gaussian_scale_estimate(series, order)?),
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_fit(
    input: &Path,
    order: usize,
    family: Family,
    df: Option<f64>,
    sigma: Option<f64>,
    penalty: PenaltyArg,
    lambda_grid: &str,
    a: Vec<f64>,
    split: f64,
) -> Result<FitResult> {
    let series = io::read_series(input)?;
    let x = series.values();
    let innovation = innovation_for(family, df, sigma, x, order)?;
    let opts = FitOptions::default();
    let kind = match penalty {
        PenaltyArg::None => return fit_mle(x, order, innovation, &opts),
        PenaltyArg::Scad => PenaltyKind::Scad,
        PenaltyArg::Lasso => PenaltyKind::Lasso,
    };
    let grid = TuningGrid::new(TuningGrid::parse_lambda_spec(lambda_grid)?, a, split)?;
    let candidates = grid.candidates(kind)?;
    if candidates.len() == 1 {
        fit_pcmle(x, order, innovation, &candidates[0], &opts)
    } else {
        tune(x, order, innovation, kind, &grid, &opts)
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidInput(format!("cannot start thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { model, n, burn_in, seed, out } => {
            let spec = io::read_model(&model)?;
            let ar = spec.model_at(n)?;
            let series = simulate(&ar, n, burn_in, seed_or_entropy(seed))?;
            io::write_series(&out, series.values())
        }
        Command::Fit { input, order, innovation, df, sigma, penalty, lambda_grid, a, split, out } => {
            let fit = run_fit(&input, order as usize, innovation, df, sigma, penalty, &lambda_grid, a, split)?;
            emit(out.as_deref(), &fit)
        }
        Command::Select { input, pmax, out } => {
            let series = io::read_series(&input)?;
            emit(out.as_deref(), &fpe_select(series.values(), pmax as usize)?)
        }
        Command::Forecast { input, fit, difference, holdout, steps, out } => {
            let series = io::read_series(&input)?;
            let x = series.values();
            if holdout == 0 || holdout >= x.len() {
                return Err(Error::InvalidInput(format!("holdout {holdout} must be in 1..{}", x.len())));
            }
            let n = x.len() - holdout;
            let reports = fit
                .iter()
                .map(|path| {
                    let f = io::read_fit(path)?;
                    evaluate(x, &f.estimates, n, &steps, holdout, difference == 1, f.method.short_name())
                })
                .collect::<Result<Vec<_>>>()?;
            emit(out.as_deref(), &reports)
        }
        Command::Mc { design, out_dir, seed } => {
            let mut d = io::read_design(&design)?;
            if let Some(s) = seed {
                d.master_seed = s;
            }
            let res = run_experiment(&d)?;
            if !res.summary.assumptions_2 {
                eprintln!(
                    "warning: {} innovations have df <= 4; the asymptotic theory does not cover this design",
                    d.model.innovation.label()
                );
            }
            io::write_text(&out_dir.join("raw.csv"), &raw_csv(&res.records, d.fit_order()))?;
            io::write_text(&out_dir.join("summary.csv"), &summary_csv(&res.summary))?;
            io::write_text(&out_dir.join("curve.csv"), &curve_csv(&probability_curve(&res.summary)))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
