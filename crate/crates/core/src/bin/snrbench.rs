use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snrbench::cli_report::{
    self, BuildKind, CliError, Overrides, RunConfig, ScoreArgs, ENV_NOISE_ROOT, ENV_SPEECH_ROOT,
};
use snrbench::condition_sampler::Condition;
use snrbench::corpus_manifest::Split;
use snrbench::metrics::{EvalOptions, Task};

#[derive(Parser)]
#[command(
    name = "snrbench",
    version,
    about = "SNR-controlled noisy benchmark builder and scorer"
)]
struct Cli {
    /// TOML run config; flags override its fields.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, env = ENV_SPEECH_ROOT)]
    speech_root: Option<PathBuf>,
    #[arg(long, global = true, env = ENV_NOISE_ROOT)]
    noise_root: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse protocols and the noise tree into manifest.jsonl.
    Scan {
        /// Protocol file as <split>=<path>; repeatable.
        #[arg(long = "protocol")]
        protocols: Vec<String>,
    },
    /// Plan and render corrupted splits.
    Build {
        #[command(subcommand)]
        kind: BuildCmd,
    },
    /// Train or load the LFCC baseline and score a rendered split.
    ScoreBaseline {
        #[arg(long)]
        split: String,
        /// Rendered split to train on.
        #[arg(long, conflicts_with = "model")]
        train: Option<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        name: Option<String>,
    },
    /// Per-condition metrics over one or more score files.
    Eval {
        #[arg(required = true)]
        scores: Vec<PathBuf>,
        #[arg(long, allow_negative_numbers = true)]
        threshold: Option<f64>,
        #[arg(long)]
        name: Option<String>,
    },
    /// Join p_noisy sweep evaluations into one CSV row per fraction.
    SweepReport {
        /// Train and evaluate the baseline on every sweep member first,
        /// testing on this rendered split.
        #[arg(long)]
        baseline_test: Option<String>,
        /// Report this condition's row instead of the pooled metrics.
        #[arg(long, value_parser = parse_condition, allow_negative_numbers = true)]
        condition: Option<Condition>,
    },
}

#[derive(Args)]
struct SplitsArg {
    /// Comma-separated manifest splits to draw trials from.
    #[arg(long, value_delimiter = ',', value_parser = parse_split)]
    splits: Vec<Split>,
}

#[derive(Subcommand)]
enum BuildCmd {
    Multicondition {
        #[arg(long)]
        p_noisy: Option<f64>,
        #[command(flatten)]
        splits: SplitsArg,
    },
    /// All trials clean (reference condition for per-SNR reports).
    Clean {
        #[command(flatten)]
        splits: SplitsArg,
    },
    FixedSnr {
        #[arg(allow_negative_numbers = true)]
        snr_db: Option<f64>,
        #[command(flatten)]
        splits: SplitsArg,
    },
    MixedTest,
    PnoisySweep {
        /// Comma-separated fractions, e.g. 0,0.25,0.5,0.75,1
        fractions: String,
        #[command(flatten)]
        splits: SplitsArg,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    Task::parse(s).ok_or_else(|| format!("unknown task {s:?}"))
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|_| format!("unknown split {s:?}"))
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    Condition::parse(s).ok_or_else(|| format!("bad condition {s:?}"))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut overrides = Overrides {
        seed: cli.seed,
        task: cli.task,
        speech_root: cli.speech_root,
        noise_root: cli.noise_root,
        output_dir: cli.out,
        ..Overrides::default()
    };
    if let Command::Scan { protocols } = &cli.command {
        overrides.protocols = protocols
            .iter()
            .map(|p| cli_report::parse_protocol_arg(p))
            .collect::<Result<_, _>>()?;
    }
    if let Command::Build {
        kind: BuildCmd::Multicondition { p_noisy, .. },
    } = &cli.command
    {
        overrides.p_noisy = *p_noisy;
    }
    overrides.apply(&mut cfg);

    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = cli.jobs {
            if j == 0 {
                return Err(CliError::Config("--jobs must be at least 1".into()));
            }
            b = b.num_threads(j);
        }
        b.build().map_err(|e| CliError::Internal(format!("thread pool: {e}")))?
    };

    pool.install(|| match cli.command {
        Command::Scan { .. } => {
            let p = cli_report::cmd_scan(&cfg)?;
            println!("{}", p.display());
            Ok(())
        }
        Command::Build { kind } => {
            let kind = match kind {
                BuildCmd::Multicondition { splits, .. } => BuildKind::Multicondition { splits: splits.splits },
                BuildCmd::Clean { splits } => BuildKind::Clean { splits: splits.splits },
                BuildCmd::FixedSnr { snr_db, splits } => BuildKind::FixedSnr {
                    snr_db,
                    splits: splits.splits,
                },
                BuildCmd::MixedTest => BuildKind::MixedTest,
                BuildCmd::PnoisySweep { fractions, splits } => BuildKind::PnoisySweep {
                    fractions: cli_report::parse_fractions(&fractions)?,
                    splits: splits.splits,
                },
            };
            for b in cli_report::cmd_build(&cfg, &kind)? {
                println!(
                    "{}\t{}\trendered={}\tskipped={}\tnoisy_fraction={:.4}",
                    b.name,
                    b.dir.display(),
                    b.summary.rendered,
                    b.summary.skipped.len(),
                    b.noisy_fraction
                );
            }
            Ok(())
        }
        Command::ScoreBaseline {
            split,
            train,
            model,
            name,
        } => {
            let p = cli_report::cmd_score_baseline(
                &cfg,
                &ScoreArgs {
                    split,
                    train_split: train,
                    model,
                    name,
                },
            )?;
            println!("{}", p.display());
            Ok(())
        }
        Command::Eval {
            scores,
            threshold,
            name,
        } => {
            let report = cli_report::cmd_eval(&cfg, &scores, name.as_deref(), EvalOptions { threshold })?;
            print!("{}", report.to_table());
            Ok(())
        }
        Command::SweepReport {
            baseline_test,
            condition,
        } => {
            if let Some(test) = baseline_test {
                cli_report::run_sweep_baseline(&cfg, &test)?;
            }
            for r in cli_report::cmd_sweep_report(&cfg, condition)? {
                let eer = r.eer.map(|e| format!("{e:.4}")).unwrap_or_else(|| "-".into());
                println!(
                    "{}\tp_noisy={}\teer={eer}\taccuracy={:.4}",
                    r.member, r.p_noisy, r.accuracy
                );
            }
            Ok(())
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => {
            eprintln!("{}", CliError::Internal("unexpected panic".into()).to_json());
            ExitCode::from(4)
        }
    }
}
