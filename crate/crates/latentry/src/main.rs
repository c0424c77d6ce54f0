use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latentry::commands;
use latentry::config::{parse_conditions, Analysis, ConfigError, Format, RunConfig};
use latentry::ingest::IngestConfig;
use latentry_core::{SplitRule, DEFAULT_TIE_TOL};

/// Latent-trajectory analysis of two-session gait recordings.
#[derive(Debug, Parser)]
#[command(name = "latentry", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset with planted shifts plus its ground truth.
    Synth {
        /// SynthSpec JSON; missing fields take their defaults.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// PCA plane, displacements and within-session hierarchy.
    Analyze(RunArgs),
    /// Train the transition network and run the full, held-out and
    /// leave-condition-out evaluations.
    TrainEval(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    Random,
    LastK,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// CSV file(s); rows are concatenated in the given order.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "extended")]
    analysis: Analysis,
    /// Comma-separated subset, e.g. ONL,OC2.5,OC3.
    #[arg(long, value_delimiter = ',')]
    conditions: Vec<String>,
    #[arg(long, default_value_t = 800)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, env = "LATENTRY_SEED", default_value_t = 42)]
    seed: u64,
    /// Seed of the held-out draw; defaults to --seed.
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long, default_value_t = 0.2)]
    holdout_frac: f64,
    #[arg(long, value_enum, default_value = "random")]
    split_rule: RuleArg,
    #[arg(long, default_value_t = DEFAULT_TIE_TOL)]
    tie_tol: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["csv", "json"])]
    format: Vec<Format>,
    /// JSON {condition_col, session_col, exclude_cols}.
    #[arg(long)]
    ingest_config: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::new(self.input, self.out, self.analysis);
        if !self.conditions.is_empty() {
            cfg.conditions = parse_conditions(&self.conditions)?;
        }
        if let Some(path) = &self.ingest_config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
            cfg.ingest = serde_json::from_str::<IngestConfig>(&text)
                .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        }
        cfg.train.epochs = self.epochs;
        cfg.train.lr = self.lr;
        cfg.train.seed = self.seed;
        cfg.split.seed = self.split_seed.unwrap_or(self.seed);
        cfg.split.holdout_fraction = self.holdout_frac;
        cfg.split.rule = match self.split_rule {
            RuleArg::Random => SplitRule::Random,
            RuleArg::LastK => SplitRule::LastK,
        };
        cfg.tie_tol = self.tie_tol;
        cfg.formats = self.format.into_iter().collect();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(command: Command) -> anyhow::Result<Vec<PathBuf>> {
    match command {
        Command::Synth { spec, out, seed } => {
            let mut spec = commands::read_synth_spec(spec.as_deref())?;
            if let Some(seed) = seed {
                spec.seed = seed;
            }
            commands::synth(&spec, &out)
        }
        Command::Analyze(args) => commands::analyze(&args.into_config()?),
        Command::TrainEval(args) => commands::train_eval(&args.into_config()?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(latentry::exit_code(&err) as u8)
        }
    }
}
