use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlqaoa::error::{Error, Result};
use mlqaoa::model::ModelKind;
use mlqaoa::pipeline::{self, error_exit_code, BackendChoice, Outcome, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mlqaoa", version, about = "Collect, learn and extrapolate QAOA angles for spin chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize angles at every collection and validation size.
    Collect(Flags),
    /// Fit the alpha and beta networks to a collected dataset.
    Train(Flags),
    /// Predict angles at the target size.
    Predict(Flags),
    /// Energy, overlap and entropy metrics of the predicted state.
    Evaluate(Flags),
    /// Two-site reduced density matrix entry against N, with a decay fit.
    RdmScan(Flags),
    /// Merge a run directory into CSV tables and a summary.
    Report(Flags),
}

#[derive(Debug, Args)]
struct Flags {
    /// JSON file with any `RunConfig` field; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// tfim, xy or xxz.
    #[arg(long)]
    model: Option<String>,
    /// Field (TFIM) or anisotropy (XXZ) strength.
    #[arg(long, allow_negative_numbers = true)]
    g: Option<f64>,
    /// Comma-separated collection sizes (scan sizes for `rdm-scan`).
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    sizes: Option<Vec<usize>>,
    /// Held-out sizes used to pick the network snapshot.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    validation_sizes: Option<Vec<usize>>,
    /// Size to predict and evaluate.
    #[arg(long)]
    target: Option<usize>,
    /// Offsets the optimizer and network seeds.
    #[arg(long)]
    seed: Option<u64>,
    /// auto, statevector or fermion.
    #[arg(long)]
    backend: Option<String>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Polish predicted angles with BFGS before evaluating.
    #[arg(long)]
    refine: bool,
    /// Keep the cuts n = 1 and N−1 in the entropy fit.
    #[arg(long)]
    include_edge_cuts: bool,
    /// 1-based density-matrix entry as `i,j`.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    entry: Option<Vec<usize>>,
    /// Training epochs per network.
    #[arg(long)]
    epochs: Option<usize>,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(m) = &self.model {
            cfg.model = ModelKind::parse(m)?;
        }
        if self.g.is_some() {
            cfg.g = self.g;
        }
        if self.sizes.is_some() {
            cfg.sizes = self.sizes.clone();
        }
        if self.validation_sizes.is_some() {
            cfg.validation_sizes = self.validation_sizes.clone();
        }
        if self.target.is_some() {
            cfg.target = self.target;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = &self.backend {
            cfg.backend = BackendChoice::parse(b)?;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        cfg.refine |= self.refine;
        cfg.include_edge_cuts |= self.include_edge_cuts;
        if let Some(e) = &self.entry {
            cfg.entry = (e[0], e[1]);
        }
        if let Some(e) = self.epochs {
            cfg.train.epochs = e;
        }
        Ok(cfg)
    }
}

fn configure_threads() -> Result<()> {
    let Ok(text) = std::env::var("MLQAOA_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("MLQAOA_THREADS must be a positive integer, got {text:?}")))?;
    if n == 0 {
        return Err(Error::Config("MLQAOA_THREADS must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn run(cli: &Cli) -> Result<Outcome> {
    configure_threads()?;
    match &cli.command {
        Command::Collect(f) => pipeline::cmd_collect(&f.resolve()?),
        Command::Train(f) => pipeline::cmd_train(&f.resolve()?),
        Command::Predict(f) => pipeline::cmd_predict(&f.resolve()?),
        Command::Evaluate(f) => pipeline::cmd_evaluate(&f.resolve()?),
        Command::RdmScan(f) => pipeline::cmd_rdmscan(&f.resolve()?),
        Command::Report(f) => pipeline::cmd_report(&f.resolve()?.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            for note in &outcome.notes {
                eprintln!("warning: {note}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
