use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use linkage::{run, CliError, Command, Format, RunSpec, Sweep, SweepVar};

/// Equilibrium laboratory for segments linked by quality or circumstance.
#[derive(Debug, Parser)]
#[command(name = "linkage", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Variable swept by `sweep`.
    #[arg(long = "var", value_enum)]
    var: Option<SweepVar>,
    /// `a:b`, `a:b:step` or a comma-separated list.
    #[arg(long)]
    values: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Monte Carlo draws for `oracle`.
    #[arg(long)]
    draws: Option<u64>,
}

fn spec_from(args: Args) -> Result<RunSpec, CliError> {
    let sweep = match (args.var, args.values) {
        (Some(var), Some(values)) => Some(Sweep::parse(var, &values)?),
        (None, None) => None,
        _ => {
            return Err(CliError::Request(
                "--var and --values must be given together".into(),
            ))
        }
    };
    Ok(RunSpec {
        command: args.command,
        scenario_path: args.scenario,
        sweep,
        seed: args.seed,
        out_path: args.out,
        format: args.format,
        draws: args.draws,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = spec_from(args).and_then(|spec| {
        let output = run(&spec)?;
        match &spec.out_path {
            Some(path) => std::fs::write(path, &output.text).map_err(|source| CliError::Write {
                path: path.clone(),
                source,
            })?,
            None => print!("{}", output.text),
        }
        Ok(output.failures)
    });
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            let diag = serde_json::json!({
                "error": "verify",
                "exit_code": 4,
                "message": format!("{failures} verification checks failed"),
            });
            eprintln!("{diag}");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("{}", e.diagnostic());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
