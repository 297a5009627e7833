use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gnl_bandit::config::{parse_config, parse_model_config, preset, preset_description, PRESETS};
use gnl_bandit::output::{emit_outputs, emit_verification};
use gnl_bandit::verify::{run_suite, SuiteSizes, VerificationReport};
use gnl_bandit::{par, run_experiment, Error, ExperimentConfig, GnlModel};

/// Generalized nested logit bandit experiments.
#[derive(Debug, Parser)]
#[command(name = "gnl-bandit", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Run the experiment file at PATH (same as `run --config PATH`).
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    config: Option<PathBuf>,

    /// Run a named paper experiment (same as `preset NAME`).
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,

    /// Also run the verification suite on the experiment's model.
    #[arg(long)]
    verify: bool,

    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Clone, clap::Args)]
struct Overrides {
    /// Master seed.
    #[arg(long, global = true, env = "GNL_SEED")]
    seed: Option<u64>,

    /// Number of repetitions B.
    #[arg(long, global = true)]
    reps: Option<usize>,

    /// Horizon T.
    #[arg(long, global = true)]
    horizon: Option<usize>,

    /// Output directory (default: the config's `output.dir`, else `out`).
    #[arg(long, global = true, env = "GNL_OUT_DIR")]
    out: Option<PathBuf>,

    /// Worker threads for repetitions and checks.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write a regret plot next to the CSV files.
    #[arg(long, global = true)]
    plot: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment file.
    Run {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
        #[arg(long)]
        verify: bool,
    },
    /// Run the verification suite on a model file.
    Verify {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
    /// Run a named paper experiment.
    Preset {
        name: String,
        #[arg(long)]
        verify: bool,
    },
    /// List the named paper experiments.
    ListPresets,
}

enum Failure {
    Usage(String),
    Lib(Error),
    ChecksFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Lib(Error::Config(_) | Error::Parse(_)) => 3,
            Failure::Lib(
                Error::InvalidModel { .. }
                | Error::InvalidPartition(_)
                | Error::InvalidParameter { .. },
            ) => 3,
            Failure::Lib(Error::Io(_)) => 4,
            Failure::ChecksFailed => 5,
            Failure::Lib(_) => 1,
        }
    }

    fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "usage",
            3 => "config",
            4 => "io",
            5 => "verification",
            _ => "runtime",
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Usage(msg) => eprintln!("error[usage]: {msg}"),
                Failure::Lib(e) => eprintln!("error[{}]: {e}", failure.category()),
                Failure::ChecksFailed => {
                    eprintln!("error[verification]: at least one check failed")
                }
            }
            ExitCode::from(failure.exit_code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let o = cli.overrides;
    if let Some(threads) = o.threads {
        par::configure_threads(threads)?;
    }
    let command = match (cli.command, cli.config, cli.preset) {
        (Some(c), None, None) => c,
        (None, Some(config), None) => Command::Run {
            config,
            verify: cli.verify,
        },
        (None, None, Some(name)) => Command::Preset {
            name,
            verify: cli.verify,
        },
        _ => {
            return Err(Failure::Usage(
                "give exactly one of: a subcommand, --config PATH, --preset NAME".into(),
            ))
        }
    };
    match command {
        Command::ListPresets => {
            for name in PRESETS {
                println!("{name:<18} {}", preset_description(name).unwrap_or(""));
            }
            Ok(())
        }
        Command::Run { config, verify } => {
            let file = parse_config(&read(&config)?)?;
            let dir = o
                .out
                .clone()
                .or(file.output.dir)
                .unwrap_or_else(|| "out".into());
            run_all(
                vec![file.experiment],
                &o,
                &dir,
                o.plot || file.output.plot,
                verify,
            )
        }
        Command::Preset { name, verify } => {
            let dir = o.out.clone().unwrap_or_else(|| "out".into());
            run_all(preset(&name)?, &o, &dir, o.plot, verify)
        }
        Command::Verify { config } => {
            let file = parse_model_config(&read(&config)?)?;
            let dir = o.out.clone().unwrap_or_else(|| "out".into());
            let report = verify_models(&[file.model], file.eta, o.seed.unwrap_or(file.seed));
            finish_verification(&report, &dir)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
        .into()
    })
}

fn run_all(
    mut configs: Vec<ExperimentConfig>,
    o: &Overrides,
    dir: &Path,
    plot: bool,
    verify: bool,
) -> Result<(), Failure> {
    for c in &mut configs {
        if let Some(seed) = o.seed {
            c.seed = seed;
        }
        if let Some(reps) = o.reps {
            c.repetitions = reps;
        }
        if let Some(horizon) = o.horizon {
            c.horizon = horizon;
        }
        c.validate()?;
    }
    let mut results = Vec::with_capacity(configs.len());
    for c in &configs {
        log::info!(
            "running {} ({} x {} rounds)",
            c.name,
            c.repetitions,
            c.horizon
        );
        let r = run_experiment(c)?;
        println!(
            "{:<22} {:<44} total reward {:>10.2} ± {:<7.2} final avg regret {:.5}",
            r.name,
            r.model,
            r.mean_total_reward,
            r.stderr_total_reward,
            r.final_avg_regret()
        );
        results.push(r);
    }
    for path in emit_outputs(&results, dir, plot)? {
        println!("wrote {}", path.display());
    }
    if verify {
        let models: Vec<GnlModel> = configs.iter().map(|c| c.model.clone()).collect();
        let report = verify_models(&models, configs[0].eta, configs[0].seed);
        finish_verification(&report, dir)?;
    }
    Ok(())
}

fn verify_models(models: &[GnlModel], eta: f64, seed: u64) -> VerificationReport {
    let mut report = VerificationReport::default();
    for m in models {
        for e in run_suite(
            m,
            eta,
            seed,
            SuiteSizes::default(),
            gnl_bandit::Execution::Parallel,
        )
        .entries
        {
            report.push(e);
        }
    }
    report
}

fn finish_verification(report: &VerificationReport, dir: &Path) -> Result<(), Failure> {
    print!("{}", report.summary());
    println!("wrote {}", emit_verification(report, dir)?.display());
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}
