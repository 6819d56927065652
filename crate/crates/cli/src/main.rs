use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;
mod render;

use args::{Cli, Command};
use commands::Outcome;

/// Exit status for a rejected configuration or argument.
const EXIT_VALIDATION: u8 = 2;
/// Exit status for absent input data.
const EXIT_MISSING: u8 = 3;
/// Exit status when outputs were written but some fits did not converge.
const EXIT_UNCONVERGED: u8 = 4;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Tomo(a) => commands::tomo(&a),
        Command::Locus(a) => commands::locus(&a),
        Command::Dip(a) => commands::dip(&a),
        Command::Config(a) => commands::config(&a),
    };
    match result {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Unconverged(n)) => {
            eprintln!("warning: {n} bin(s) did not converge; outputs were written");
            ExitCode::from(EXIT_UNCONVERGED)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// `HOM_WORKERS` caps the rayon pool. Results do not depend on it.
fn configure_workers() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("HOM_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("HOM_WORKERS must be a positive integer (got {raw:?})"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use hom_core::Error;
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::InvalidInput(_)
                | Error::Precondition(_)
                | Error::EqualCharges { .. }
                | Error::DegeneratePixel
                | Error::Format(_)
                | Error::Json(_) => EXIT_VALIDATION,
                Error::MissingProjection(_) => EXIT_MISSING,
                Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING,
                Error::Io(_) => 1,
            };
        }
        if cause.downcast_ref::<toml::de::Error>().is_some() || cause.downcast_ref::<commands::Invalid>().is_some() {
            return EXIT_VALIDATION;
        }
        if cause.downcast_ref::<commands::Missing>().is_some() {
            return EXIT_MISSING;
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return EXIT_MISSING;
            }
        }
    }
    1
}
