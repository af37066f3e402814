use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qkd_lab::harness::{
    emit_report, run_scenario, ConfigDraft, ConfigError, OutputFormat, ParamValue, RunError,
    ScenarioKind, SweepSpec,
};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

/// Seeded Monte Carlo experiments on QKD attack models.
#[derive(Parser, Debug)]
#[command(name = "qkd-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Continuous-variable channel: passive loss, heterodyne-resend, excess-noise test.
    Cv(RunArgs),
    /// BB84 with Breidbart measurement and probabilistic resend.
    Bb84(RunArgs),
    /// Decoy-state source: naive PNS yield check, coherent-split discrimination.
    Decoy(RunArgs),
    /// Key-rate formulas and counting bounds.
    Keyrate(RunArgs),
    /// Deletion-advantage grid search.
    Optimize(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML scenario config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name, when no config is given or to override it.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Report destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    /// Grid sweep, `key=lo:hi:step`.
    #[arg(long)]
    sweep: Option<String>,
    /// Parameter override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    /// Print the validated config as TOML and exit.
    #[arg(long)]
    echo_config: bool,
}

impl Command {
    fn parts(&self) -> (&RunArgs, &'static [ScenarioKind]) {
        use ScenarioKind::*;
        match self {
            Command::Cv(a) => (a, &[CvHeterodyneResend, CvPassive, CvExcessNoiseTest]),
            Command::Bb84(a) => (a, &[Bb84Prs]),
            Command::Decoy(a) => (a, &[DecoyPns, DecoyCbs]),
            Command::Keyrate(a) => (a, &[KeyRateSweep]),
            Command::Optimize(a) => (a, &[DeletionOptimizer]),
        }
    }
}

fn build_config(
    args: &RunArgs,
    allowed: &[ScenarioKind],
) -> Result<qkd_lab::harness::ScenarioConfig, ConfigError> {
    let mut draft = match &args.config {
        Some(p) => ConfigDraft::from_path(p)?,
        None => ConfigDraft::default(),
    };
    if let Some(s) = &args.scenario {
        draft.scenario = Some(s.clone());
    }
    if draft.scenario.is_none() {
        draft.scenario = Some(allowed[0].name().to_string());
    }
    if args.seed.is_some() {
        draft.master_seed = args.seed;
    }
    if args.trials.is_some() {
        draft.n_trials = args.trials;
    }
    if args.format.is_some() {
        draft.format = args.format.clone();
    }
    if let Some(s) = &args.sweep {
        draft.sweep = Some(SweepSpec::parse(s)?);
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| ConfigError {
            key: Some("set".into()),
            message: format!("{kv:?} is not key=value"),
        })?;
        draft
            .parameters
            .insert(k.trim().to_string(), ParamValue::parse_cli(v.trim()));
    }
    let config = draft.validate()?;
    if !allowed.contains(&config.scenario) {
        let names: Vec<_> = allowed.iter().map(|k| k.name()).collect();
        return Err(ConfigError {
            key: Some("scenario".into()),
            message: format!(
                "{} does not belong to this subcommand; expected {}",
                config.scenario,
                names.join("|")
            ),
        });
    }
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (args, allowed) = cli.command.parts();
    let config = match build_config(args, allowed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if args.echo_config {
        print!("{}", config.to_toml_string());
        return ExitCode::SUCCESS;
    }
    let started = Instant::now();
    let report = match run_scenario(&config, args.threads) {
        Ok(r) => r,
        Err(RunError::Config(e)) => {
            eprintln!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    log::info!(
        "{} finished in {:.3} s",
        config.scenario,
        started.elapsed().as_secs_f64()
    );
    let destination = args.out.clone().or_else(|| config.output.path.clone());
    let format: OutputFormat = config.output.format;
    if let Err(e) = emit_report(&report, format, destination.as_deref()) {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    for v in &report.invariant_violations {
        eprintln!("invariant violated: {v}");
    }
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    if !report.invariant_violations.is_empty() {
        ExitCode::from(EXIT_INVARIANT)
    } else if !report.errors.is_empty() {
        ExitCode::from(EXIT_RUNTIME)
    } else {
        ExitCode::SUCCESS
    }
}
