use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use physadv_core::harness::CaseName;
use physadv_core::Algorithm;

mod commands;
mod config;
mod decl;
mod error;

use commands::TuneKind;
use config::DEFAULT_CONFIG;
use error::{config_err, CliResult};

/// Physics-guided adversarial testing and physics-informed fine-tuning of
/// regression networks.
#[derive(Debug, Parser)]
#[command(name = "physadv", version)]
struct Cli {
    /// Maximum number of worker threads [default: all cores]
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// Configuration file
    #[arg(short, long, value_name = "FILE", default_value = DEFAULT_CONFIG)]
    config: PathBuf,

    /// Override a config value by dotted path, e.g. train.epochs=100 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Search engine to run: pso, ga or rs (repeatable) [default: search.engines]
    #[arg(long = "engine", value_name = "ENGINE")]
    engines: Vec<Algorithm>,

    /// Weight of the physics regularization term [default: finetune.beta]
    #[arg(long, value_name = "BETA")]
    beta: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> CliResult<config::Loaded> {
        let mut overrides = self.overrides.clone();
        if !self.engines.is_empty() {
            let names: Vec<String> = self.engines.iter().map(|e| format!("\"{e}\"")).collect();
            overrides.push(format!("search.engines=[{}]", names.join(",")));
        }
        if let Some(b) = self.beta {
            overrides.push(format!("finetune.beta={b:?}"));
        }
        config::load(&self.config, &overrides)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic case: data, rules, envelope and a ready-to-use config
    Synth {
        /// lift-balance or heat-balance
        #[arg(long, value_name = "NAME")]
        case: CaseName,
        /// Number of rows
        #[arg(long, default_value_t = 300)]
        n: usize,
        /// Standard deviation of the label noise
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        /// Generator seed, also the master seed of the written config
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory receiving the files
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
    /// Fit the base network and write its checkpoint
    Train(ConfigArgs),
    /// Run adversarial search campaigns; write example stores and stats
    Test(ConfigArgs),
    /// Fine-tune the base network on each engine's example store
    Finetune(ConfigArgs),
    /// Compare base and fine-tuned networks: #AdvIn and RMSE before and after
    Evaluate(ConfigArgs),
    /// Repeated k-fold run of the whole pipeline
    Kfold(ConfigArgs),
    /// Hyperparameter search
    Tune {
        #[command(flatten)]
        config: ConfigArgs,
        /// random: network space; grid: engine parameters (needs one --engine)
        #[arg(long, value_enum)]
        kind: TuneKind,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(config_err("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config_err(e.to_string()))?;
    }
    match cli.command {
        Command::Synth {
            case,
            n,
            sigma,
            seed,
            out,
        } => commands::synth(case, n, sigma, seed, &out).map(drop),
        Command::Train(c) => commands::train(&c.load()?).map(drop),
        Command::Test(c) => commands::test(&c.load()?).map(drop),
        Command::Finetune(c) => commands::finetune_cmd(&c.load()?),
        Command::Evaluate(c) => commands::evaluate(&c.load()?),
        Command::Kfold(c) => commands::kfold(&c.load()?).map(drop),
        Command::Tune { config, kind } => commands::tune(&config.load()?, kind).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes count as configuration errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
