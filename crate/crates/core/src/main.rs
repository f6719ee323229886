use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridmem::config::{Experiment, Overrides, RunConfig};
use gridmem::run::{run, RunOptions, OUTPUT_ENV};

#[derive(Parser)]
#[command(name = "gridmem", version, about = "Z_N quantum memory with a defect grid: thermal KMC, decoding and scaling fits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check degeneracy and the stabilizer/cocycle algebra; writes a manifest.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Dump incidence, stabilizer and cocycle matrices.
        #[arg(long)]
        dump: bool,
        /// Lattice sizes to check.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
    },
    /// Coherence-time sweep over beta and L.
    Coherence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        max_time: Option<f64>,
    },
    /// Mass and spread of one pair in the restricted environment.
    SinglePair {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        /// CSV log of every event of the first sample.
        #[arg(long)]
        event_log: Option<PathBuf>,
    },
    /// Fit scaling models to a coherence-time CSV.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Coherence-time CSV (beta, L, tau, ...).
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = OUTPUT_ENV)]
    output_dir: Option<PathBuf>,
    /// Charge energies J_1..J_{N-1}.
    #[arg(long, value_delimiter = ',')]
    masses: Option<Vec<f64>>,
}

fn load(common: &Common, experiment: Experiment) -> gridmem::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::with_defaults(experiment),
    };
    cfg.experiment = experiment;
    Ok(cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut o = Overrides::default();
    let mut opts = RunOptions::default();
    let mut validate_sizes = None;
    let (common, experiment) = match cli.command {
        Command::Validate { common, dump, sizes } => {
            opts.dump = dump;
            validate_sizes = sizes;
            (common, Experiment::Validate)
        }
        Command::Coherence {
            common,
            betas,
            sizes,
            trials,
            threshold,
            max_time,
        } => {
            o.betas = betas;
            o.sizes = sizes;
            o.trials = trials;
            o.threshold = threshold;
            o.max_time = max_time;
            (common, Experiment::Coherence)
        }
        Command::SinglePair {
            common,
            beta,
            l,
            t_max,
            samples,
            event_log,
        } => {
            o.beta = beta;
            o.l = l;
            o.t_max = t_max;
            o.samples = samples;
            opts.event_log = event_log;
            (common, Experiment::SinglePair)
        }
        Command::Fit { common, input } => {
            o.input = input;
            (common, Experiment::Fit)
        }
    };
    o.seed = common.seed;
    o.workers = common.workers;
    o.output_dir = common.output_dir.clone();
    o.masses = common.masses.clone();

    let mut cfg = match load(&common, experiment) {
        Ok(c) => c,
        Err(e) => return fail(e, 1),
    };
    cfg.apply(&o);
    if let Some(s) = validate_sizes {
        cfg.validate.get_or_insert_with(Default::default).sizes = s;
    }
    if let Err(e) = cfg.validate() {
        return fail(e, 1);
    }
    match run(&cfg, &opts) {
        Ok(s) => {
            println!("{}", s.manifest.display());
            for f in &s.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e, 2),
    }
}

/// Exit 1 for configuration problems, 2 for failures during the run.
fn fail(e: gridmem::Error, code: u8) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}
