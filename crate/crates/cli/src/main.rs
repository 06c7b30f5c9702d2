//! `mvens`: train margin-variance ensembles and regenerate experiment tables.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvens::data_io::{load_csv, save_report, split_train_test, synthetic_tensor, write_report};
use mvens::experiment::{
    bench, fit_tensors, learning_curve, sweep_lambda, train, write_curve_csv, write_sweep_csv,
    Method, PipelineConfig,
};
use mvens::{Error, ErrorKind, LossConfig, OptimizerConfig};

#[derive(Parser)]
#[command(name = "mvens", version, about = "Margin-variance ensemble weighting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit bagged trees, learn ensemble weights and write a JSON report.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time both optimizers on the same objective and budget.
    Bench {
        #[arg(
            long,
            required_unless_present = "synthetic",
            conflicts_with = "synthetic"
        )]
        data: Option<PathBuf>,
        /// Use a random probability tensor with this many learners instead of data.
        #[arg(long, value_name = "LEARNERS")]
        synthetic: Option<usize>,
        /// Instances in the synthetic tensor.
        #[arg(long, default_value_t = 4, requires = "synthetic")]
        instances: usize,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and score once per lambda on a fixed split.
    SweepLambda {
        #[arg(long)]
        data: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0,0.01,0.1,1,10,50,100,500"
        )]
        lambdas: Vec<f64>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Retrain on nested fractions of the training split.
    LearningCurve {
        #[arg(long)]
        data: PathBuf,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0"
        )]
        fractions: Vec<f64>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 10)]
    learners: usize,
    #[arg(long, default_value_t = 7)]
    depth: usize,
    #[arg(long, default_value_t = 10.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value = "sphere")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

impl ModelArgs {
    fn pipeline(&self) -> mvens::Result<PipelineConfig> {
        let defaults = OptimizerConfig::default();
        let cfg = PipelineConfig {
            learners: self.learners,
            max_depth: self.depth,
            test_fraction: self.test_fraction,
            method: self.method,
            loss: LossConfig::new(self.alpha, self.lambda)?,
            optimizer: OptimizerConfig {
                max_iters: self.iters.unwrap_or(defaults.max_iters),
                step_size: self.step.unwrap_or(defaults.step_size),
                step_decay: self.decay.unwrap_or(defaults.step_decay),
                grad_tol: defaults.grad_tol,
                seed: self.seed,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> mvens::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_error(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_with(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> mvens::Result<()> {
    let mut w = output(path)?;
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| io_error(path.unwrap_or(Path::new("<stdout>")), e))
}

fn run(cli: Cli) -> mvens::Result<()> {
    match cli.command {
        Command::Train { data, model, out } => {
            let cfg = model.pipeline()?;
            let ds = load_csv(&data)?;
            let report = train(&ds, &cfg)?;
            match out {
                Some(p) => save_report(&report, p),
                None => write_report(&report, io::stdout().lock()),
            }
        }
        Command::Bench {
            data,
            synthetic,
            instances,
            repeats,
            model,
            out,
        } => {
            let cfg = model.pipeline()?;
            let (g, y) = match (data, synthetic) {
                (_, Some(m)) => synthetic_tensor(instances, 2, m, cfg.optimizer.seed)?,
                (Some(path), None) => {
                    let ds = load_csv(&path)?;
                    let (train_set, test_set) =
                        split_train_test(&ds, cfg.test_fraction, cfg.optimizer.seed)?;
                    let t = fit_tensors(&train_set, &test_set, &cfg)?;
                    (t.train, t.train_labels)
                }
                (None, None) => {
                    return Err(Error::Config(
                        "either --data or --synthetic is required".into(),
                    ))
                }
            };
            let result = bench(&g, &y, cfg.loss, &cfg.optimizer, repeats)?;
            write_with(out.as_deref(), |w| w.write_all(result.to_text().as_bytes()))
        }
        Command::SweepLambda {
            data,
            lambdas,
            model,
            out,
        } => {
            let cfg = model.pipeline()?;
            let ds = load_csv(&data)?;
            let (train_set, test_set) =
                split_train_test(&ds, cfg.test_fraction, cfg.optimizer.seed)?;
            let tensors = fit_tensors(&train_set, &test_set, &cfg)?;
            let rows = sweep_lambda(&tensors, &cfg, &lambdas)?;
            write_with(out.as_deref(), |w| write_sweep_csv(&rows, w))
        }
        Command::LearningCurve {
            data,
            fractions,
            model,
            out,
        } => {
            let cfg = model.pipeline()?;
            let ds = load_csv(&data)?;
            let rows = learning_curve(&ds, &cfg, &fractions)?;
            write_with(out.as_deref(), |w| write_curve_csv(&rows, w))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            })
        }
    }
}
