mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::error::{ContextKind, ContextValue, ErrorKind};
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use commands::Context;
use output::{Failure, Report};

fn parse() -> Result<Cli, ExitCode> {
    Cli::try_parse().map_err(|e| {
        if matches!(
            e.kind(),
            ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
        ) {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        let field = match (e.get(ContextKind::InvalidArg), e.kind()) {
            (Some(ContextValue::String(a)), _) => a.clone(),
            (Some(ContextValue::Strings(a)), _) => a.join(","),
            (_, ErrorKind::InvalidSubcommand | ErrorKind::MissingSubcommand) => "command".into(),
            _ => "arguments".into(),
        };
        let diag = Failure::Config {
            field: Some(field),
            message: e.render().to_string().trim().to_string(),
        };
        eprintln!("{}", diag.diagnostic());
        ExitCode::from(1)
    })
}

fn threads(cli: &Cli) -> Result<Option<usize>, Failure> {
    match std::env::var("FRACPERIM_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                Failure::config(
                    "FRACPERIM_THREADS",
                    format!("not a positive integer: `{v}`"),
                )
            }),
        Err(_) => Ok(cli.threads),
    }
}

fn run(cli: &Cli) -> Result<Report, Failure> {
    if let Some(n) = threads(cli)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config("threads", e))?;
    }
    let ctx = Context {
        config: serde_json::to_value(&cli.command).expect("arguments serialize"),
        table_cache: cli.table_cache.clone(),
    };
    match &cli.command {
        Command::Compute(a) => commands::compute(&ctx, a),
        Command::Approx(a) => commands::approx(&ctx, a),
        Command::Minimize(a) => commands::minimize(&ctx, a),
        Command::CoareaCheck(a) => commands::coarea(&ctx, a),
        Command::DecompositionCheck(a) => commands::decomposition(&ctx, a),
        Command::StripScan(a) => commands::strip(&ctx, a),
        Command::CylinderScan(a) => commands::cylinder_scan(&ctx, a),
        Command::SectorScan(a) => commands::sector_scan(&ctx, a),
        Command::Confinement(a) => commands::confinement(&ctx, a),
        Command::DavilaScan(a) => commands::davila(&ctx, a),
        Command::Diverge1d(a) => commands::diverge(&ctx, a),
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.output {
        Some(path) => std::fs::write(path, text).map_err(|e| Failure::config("output", e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::config("output", e)),
    }
}

fn main() -> ExitCode {
    let cli = match parse() {
        Ok(c) => c,
        Err(code) => return code,
    };
    let result = run(&cli).and_then(|r| emit(&cli, &r.text).map(|_| r));
    match result {
        Ok(r) if r.violations.is_empty() => ExitCode::SUCCESS,
        Ok(r) => {
            eprintln!(
                "{}",
                json!({"status": "check_failed", "violations": r.violations})
            );
            ExitCode::from(2)
        }
        Err(f) => {
            eprintln!("{}", f.diagnostic());
            ExitCode::from(f.exit_code())
        }
    }
}
