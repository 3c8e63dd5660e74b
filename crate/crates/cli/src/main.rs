//! `alffi`: simulate, build training triples, train CDF estimators, and
//! construct and validate confidence sets from the command line.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use alffi_cli::commands;
use alffi_cli::config::{self, ConfigError, ProblemKind};
use alffi_cli::problems::ObservedArgs;

#[derive(Parser)]
#[command(
    name = "alffi",
    version,
    about = "Amortized likelihood-free frequentist inference"
)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Problem to run when the config does not name one.
    #[arg(long, global = true, value_enum)]
    problem: Option<ProblemArg>,
    /// Override a config entry, e.g. `--set train.batch_size=500`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Cosmo,
    Onoff,
    Sir,
    Toy,
}

#[derive(Subcommand)]
enum Command {
    /// Print the default configuration of a problem.
    Defaults,
    /// Simulate datasets at parameters drawn from the prior.
    Simulate {
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build `(z, lambda_obs, theta)` training triples.
    MakeTrain {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the CDF network on a triples file.
    Train {
        #[arg(long)]
        triples: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the histogram estimate for one observed dataset.
    Histogram {
        #[command(flatten)]
        observed: ObservedArgs,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confidence sets and boundaries for an observed dataset.
    Sets {
        /// Estimator artifact, `constant:<p>` or `gaussian-exact`.
        #[arg(long)]
        estimator: Option<String>,
        #[command(flatten)]
        observed: ObservedArgs,
    },
    /// Monte Carlo coverage at a list of parameter points.
    Coverage {
        #[arg(long)]
        estimator: Option<String>,
        /// CSV of parameter points with a header of parameter names.
        #[arg(long)]
        thetas: Option<PathBuf>,
        /// Use the centers of a k×k partition of the prior box.
        #[arg(long)]
        points: Option<usize>,
        /// Simulated datasets per point.
        #[arg(long = "trials", short = 'T')]
        trials: Option<usize>,
    },
    /// Least-squares fit of the cosmological model.
    Fit {
        #[command(flatten)]
        observed: ObservedArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| config::config_err(format!("thread pool: {e}")))?;
    }
    let problem = cli.problem.map(|p| match p {
        ProblemArg::Cosmo => ProblemKind::Cosmo,
        ProblemArg::Onoff => ProblemKind::Onoff,
        ProblemArg::Sir => ProblemKind::Sir,
        ProblemArg::Toy => ProblemKind::Toy,
    });
    if let Command::Defaults = cli.command {
        let kind = problem.ok_or_else(|| config::config_err("defaults needs --problem"))?;
        print!("{}", config::defaults_text(kind));
        return Ok(());
    }
    let mut sets = cli.sets;
    if let Some(seed) = cli.seed {
        sets.push(format!("seed={seed}"));
    }
    if let Some(dir) = &cli.out_dir {
        sets.push(format!(
            "output_dir={}",
            toml::Value::String(dir.display().to_string())
        ));
    }
    let cfg = config::load(cli.config.as_deref(), &sets, problem)?;
    match cli.command {
        Command::Defaults => unreachable!("handled above"),
        Command::Simulate { count, out } => commands::simulate(&cfg, count, out),
        Command::MakeTrain { count, out } => commands::make_train(&cfg, count, out),
        Command::Train { triples, out } => commands::train_cmd(&cfg, triples, out),
        Command::Histogram {
            observed,
            count,
            out,
        } => commands::histogram(&cfg, &observed, count, out),
        Command::Sets {
            estimator,
            observed,
        } => commands::sets(&cfg, estimator, &observed),
        Command::Coverage {
            estimator,
            thetas,
            points,
            trials,
        } => commands::coverage(&cfg, estimator, thetas, points, trials),
        Command::Fit { observed } => commands::fit(&cfg, &observed),
    }
}

/// 2 for configuration and input errors, 3 for training failures, 4 for a
/// fit that did not converge.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<alffi::Error>() {
            return match e {
                alffi::Error::Training(_) => 3,
                alffi::Error::NonConvergence(_) => 4,
                alffi::Error::Invalid(_)
                | alffi::Error::Domain(_)
                | alffi::Error::Dimension { .. }
                | alffi::Error::Serde(_) => 2,
                alffi::Error::Integration(_) => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
