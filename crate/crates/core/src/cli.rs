//! Command-line front end used by the `htkm` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical or selection failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{load_csv, standardize, write_csv, DataMatrix};
use crate::error::{Error, Result};
use crate::metrics::{adjusted_rand_index, center_column_norms, Partition};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::selection::{
    select_gap, select_information, select_stability, GapOptions, GapVariant, InformationCriterion,
    SelectionMethod, StabilityOptions, StabilityScheme,
};
use crate::simulate::{simulate_dataset, SimConfig};
use crate::solver::{fit, lambda_path, log_grid, FitOptions};

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Parser)]
#[command(name = "htkm", version, about = "Regularized K-means with penalized cluster centers")]
pub struct Cli {
    /// Worker threads (falls back to HTKM_THREADS, then to all cores).
    #[arg(long, global = true, env = "HTKM_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model at a fixed lambda.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Penalty weight.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Directory for the output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Fit a regularization path over a lambda grid.
    Path {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Directory for the output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Choose lambda on a grid.
    Select {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// aic, bic, gap1, gap2, stab1, stab2 or stab3.
        #[arg(long, default_value = "bic")]
        method: SelectionMethod,
        /// Bootstrap replications for the stability methods.
        #[arg(long, default_value_t = 20)]
        b: usize,
        /// Permutations per step for the gap methods.
        #[arg(long, default_value_t = 50)]
        s: usize,
        /// Tolerance of the gap2 rule.
        #[arg(long, default_value_t = 1.0)]
        c: f64,
        /// Directory for the output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Draw a synthetic dataset with known clusters.
    Simulate {
        /// Observations.
        #[arg(long, default_value_t = 80)]
        n: usize,
        /// Variables; the first 50 carry the cluster signal.
        #[arg(long, default_value_t = 1000)]
        p: usize,
        /// Clusters.
        #[arg(long, default_value_t = 4)]
        k: usize,
        /// Separation of the cluster means.
        #[arg(long, default_value_t = 0.8)]
        mu: f64,
        /// Seed of the draw.
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Directory for the output files.
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Adjusted Rand index between two label files.
    Score {
        truth: PathBuf,
        predicted: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Numeric CSV, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    /// The first CSV row holds column names.
    #[arg(long)]
    pub header: bool,
    /// Use the data as given instead of centering and scaling each column.
    #[arg(long)]
    pub no_standardize: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    /// ht, lasso, ridge or group-lasso.
    #[arg(long, default_value = "ht")]
    pub penalty: PenaltyFamily,
    /// Scale the penalty of each variable by the inverse norm of its unpenalized centers.
    #[arg(long)]
    pub adaptive: bool,
    /// Random k-means++ starts added to the sparse starts.
    #[arg(long, default_value_t = 10)]
    pub nstart: usize,
    /// Seed for starts, bootstraps and permutations.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// log10 of the smallest positive lambda.
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub grid_min: f64,
    /// log10 of the largest lambda.
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub grid_max: f64,
    /// Number of positive grid points; lambda = 0 is appended.
    #[arg(long, default_value_t = 40)]
    pub grid_len: usize,
}

impl GridArgs {
    fn grid(&self) -> Result<Vec<f64>> {
        if self.grid_len == 0 {
            return Err(Error::Config("grid length must be at least 1".into()));
        }
        if !(self.grid_min.is_finite() && self.grid_max.is_finite() && self.grid_min <= self.grid_max) {
            return Err(Error::Config(format!(
                "invalid grid exponents {}..{}",
                self.grid_min, self.grid_max
            )));
        }
        Ok(log_grid(self.grid_min, self.grid_max, self.grid_len, true))
    }
}

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::EmptyInput(_)
            | Error::Parse { .. }
            | Error::Shape(_)
            | Error::DimensionMismatch { .. }
            | Error::Degenerate(_)
            | Error::Io(_)
            | Error::Csv(_)
            | Error::Json(_) => 2,
            Error::EmptyCluster(_) | Error::Numerical(_) | Error::Selection(_) => 3,
        }
    }
}

fn read_input(args: &InputArgs) -> Result<DataMatrix> {
    let raw = load_csv(&args.input, args.header)?;
    if args.no_standardize {
        return Ok(raw);
    }
    let st = standardize(&raw)?;
    if !st.dropped.is_empty() {
        log::warn!("dropped constant columns: {}", st.dropped.join(", "));
    }
    Ok(st.data)
}

fn fit_options(model: &ModelArgs) -> FitOptions {
    FitOptions {
        nstart: model.nstart,
        ..FitOptions::default()
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_labels(dir: &Path, name: &str, labels: &[usize]) -> Result<()> {
    let mut w = create(dir, name)?;
    for l in labels {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    Ok(())
}

/// Integer labels, one per line; a non-numeric first line is taken as a header.
pub fn read_labels(path: &Path) -> Result<Vec<i64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<i64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    row: i + 1,
                    col: 1,
                    cell: cell.to_string(),
                })
            }
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput(format!("no labels in {}", path.display())));
    }
    Ok(out)
}

/// Run a parsed command. Text meant for the user (the `score` result) goes to `out`.
pub fn execute<W: Write>(cli: &Cli, out: &mut W) -> Result<()> {
    match &cli.command {
        Command::Fit {
            input,
            model,
            lambda,
            out_dir,
        } => {
            let data = read_input(input)?;
            let spec = PenaltySpec::new(model.penalty, *lambda)?.adaptive(model.adaptive);
            let result = fit(&data, model.k, &spec, &fit_options(model), model.seed)?;
            if !result.converged {
                log::warn!("Lloyd iterations hit the limit before the partition settled");
            }
            write_json(out_dir, "fit.json", &result.to_record())?;
            write_labels(out_dir, "assignment.csv", &result.partition.to_one_based())
        }
        Command::Path {
            input,
            model,
            grid,
            out_dir,
        } => {
            let data = read_input(input)?;
            let path = lambda_path(
                &data,
                model.k,
                model.penalty,
                model.adaptive,
                &grid.grid()?,
                &fit_options(model),
                model.seed,
            )?;
            write_json(out_dir, "path.json", &path.to_record())?;
            let mut w = create(out_dir, "path.tsv")?;
            write!(w, "lambda")?;
            for name in data.column_names() {
                write!(w, "\t{name}")?;
            }
            writeln!(w)?;
            for f in &path.fits {
                write!(w, "{}", f.lambda)?;
                for v in center_column_norms(&f.centers) {
                    write!(w, "\t{v}")?;
                }
                writeln!(w)?;
            }
            w.flush()?;
            Ok(())
        }
        Command::Select {
            input,
            model,
            grid,
            method,
            b,
            s,
            c,
            out_dir,
        } => {
            let data = read_input(input)?;
            let grid = grid.grid()?;
            let opts = fit_options(model);
            let path = || lambda_path(&data, model.k, model.penalty, model.adaptive, &grid, &opts, model.seed);
            let gap = GapOptions {
                permutations: *s,
                c: *c,
                ..GapOptions::default()
            };
            let stab = StabilityOptions {
                replications: *b,
                fit: opts.clone(),
            };
            let stability = |scheme| {
                select_stability(&data, model.k, model.penalty, model.adaptive, &grid, scheme, &stab, model.seed)
            };
            let report = match method {
                SelectionMethod::Aic => select_information(&path()?, &data, InformationCriterion::Aic)?,
                SelectionMethod::Bic => select_information(&path()?, &data, InformationCriterion::Bic)?,
                SelectionMethod::Gap1 => select_gap(&path()?, &data, GapVariant::Gap1, &gap, model.seed)?,
                SelectionMethod::Gap2 => select_gap(&path()?, &data, GapVariant::Gap2, &gap, model.seed)?,
                SelectionMethod::Stab1 => stability(StabilityScheme::Stab1)?,
                SelectionMethod::Stab2 => stability(StabilityScheme::Stab2)?,
                SelectionMethod::Stab3 => stability(StabilityScheme::Stab3)?,
            };
            write_json(out_dir, "selection.json", &report.to_record())?;
            write_labels(out_dir, "assignment.csv", &report.chosen_fit.partition.to_one_based())
        }
        Command::Simulate {
            n,
            p,
            k,
            mu,
            seed,
            out_dir,
        } => {
            let ds = simulate_dataset(&SimConfig {
                n: *n,
                p: *p,
                k: *k,
                mu: *mu,
                seed: *seed,
            })?;
            let mut w = create(out_dir, "data.csv")?;
            write_csv(&ds.data, &mut w)?;
            w.flush()?;
            write_labels(out_dir, "labels.csv", &ds.labels)
        }
        Command::Score { truth, predicted } => {
            let a = Partition::from_labels(&read_labels(truth)?)?;
            let b = Partition::from_labels(&read_labels(predicted)?)?;
            writeln!(out, "{:?}", adjusted_rand_index(&a, &b)?)?;
            Ok(())
        }
    }
}

/// Parse arguments, run, and report errors on stderr. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            log::warn!("could not configure {t} threads: {e}");
        }
    }
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
