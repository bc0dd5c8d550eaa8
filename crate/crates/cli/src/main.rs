mod args;
mod commands;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{extract_overrides, Cli, Command};
use commands::{Missing, TargetMissed, Usage};

const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_MISSING: u8 = 4;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return EXIT_USAGE;
    }
    if err.downcast_ref::<Missing>().is_some() {
        return EXIT_MISSING;
    }
    if err.downcast_ref::<TargetMissed>().is_some() {
        return EXIT_NUMERIC;
    }
    use salsa_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::InvalidConfig(_) | E::DimensionMismatch { .. }) => EXIT_USAGE,
        Some(E::Format(_) | E::Json(_)) => EXIT_MISSING,
        Some(E::Io(e)) if e.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
        Some(E::Io(_)) | None => 1,
        Some(_) => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let (argv, overrides) = match extract_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let cli = Cli::parse_from(argv);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let overrides_allowed = matches!(cli.command, Command::TrainAe { .. } | Command::Train { .. });
    if !overrides.is_empty() && !overrides_allowed {
        eprintln!("error: --env./--ae./--train. settings only apply to train-ae and train");
        return ExitCode::from(EXIT_USAGE);
    }

    let result = match &cli.command {
        Command::TrainAe {
            common,
            samples,
            epochs,
            source,
            agent_bundle,
            target_mse,
        } => commands::train_ae(
            &cli.out,
            common,
            &overrides,
            *samples,
            *epochs,
            *source,
            agent_bundle.as_deref(),
            *target_mse,
        ),
        Command::Train {
            common,
            ae,
            steps,
            eval_episodes,
        } => commands::train(&cli.out, common, &overrides, ae.as_deref(), *steps, *eval_episodes),
        Command::Rollout {
            bundle,
            steps,
            seed,
            mask,
            start,
            export,
        } => commands::rollout_cmd(
            &cli.out,
            bundle,
            *steps,
            *seed,
            mask.as_deref(),
            start.as_deref(),
            export,
        ),
        Command::Eval {
            bundle,
            episodes,
            seed,
        } => commands::eval_cmd(&cli.out, bundle, *episodes, *seed),
        Command::Analyze { what } => commands::analyze(&cli.out, what),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
