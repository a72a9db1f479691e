//! Run requests and their execution.

use std::path::PathBuf;

use linkage_core::equilibrium::{first_best, Game, Regime};
use linkage_core::gaussian::mv_multilink;
use linkage_core::oracle::{estimate_mv, OracleConfig};
use linkage_core::welfare::{solve_uncertain, welfare, SizeDistribution};
use linkage_core::{LinkageKind, Scenario};
use serde::Serialize;

use crate::records::{to_csv, to_json, Format, Record};
use crate::scenario_file::ScenarioFile;
use crate::verify;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Sweep,
    Verify,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepVar {
    #[value(name = "N")]
    N,
    #[value(name = "R")]
    R,
    #[value(name = "gamma_scale")]
    GammaScale,
    #[value(name = "observed_m")]
    ObservedM,
}

impl SweepVar {
    fn integral(self) -> bool {
        matches!(self, Self::N | Self::ObservedM)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub variable: SweepVar,
    pub values: Vec<f64>,
}

impl Sweep {
    /// Values given as `a:b` (unit steps), `a:b:step`, or a comma list.
    pub fn parse(variable: SweepVar, text: &str) -> Result<Self, CliError> {
        let bad = || CliError::Request(format!("cannot parse sweep values {text:?}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let values = if text.contains(':') {
            let parts: Vec<&str> = text.split(':').collect();
            let (lo, hi, step) = match parts.as_slice() {
                [a, b] => (num(a)?, num(b)?, 1.0),
                [a, b, c] => (num(a)?, num(b)?, num(c)?),
                _ => return Err(bad()),
            };
            let valid = step > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite();
            if !valid {
                return Err(bad());
            }
            let count = ((hi - lo) / step + 1e-9).floor() as usize;
            if count > 1_000_000 {
                return Err(CliError::Request("sweep has too many points".into()));
            }
            (0..=count).map(|i| lo + i as f64 * step).collect()
        } else {
            text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
        };
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(bad());
        }
        if variable.integral() && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(CliError::Request(format!(
                "{variable:?} sweeps take nonnegative integers"
            )));
        }
        Ok(Self { variable, values })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub scenario_path: PathBuf,
    pub sweep: Option<Sweep>,
    pub seed: u64,
    pub out_path: Option<PathBuf>,
    pub format: Format,
    /// Oracle sample size; defaults to 10^6.
    pub draws: Option<u64>,
}

impl RunSpec {
    pub fn check(&self) -> Result<(), CliError> {
        match (self.command, &self.sweep) {
            (Command::Sweep, None) => Err(CliError::Request(
                "sweep needs --var and --values".into(),
            )),
            (Command::Sweep, Some(_)) | (_, None) => Ok(()),
            (_, Some(_)) => Err(CliError::Request(
                "--var/--values only apply to sweep".into(),
            )),
        }
    }
}

/// Rendered output of a successful run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub text: String,
    /// Failed verification checks; nonzero maps to exit code 4.
    pub failures: usize,
}

impl RunOutput {
    fn ok(text: String) -> Self {
        Self { text, failures: 0 }
    }
}

pub fn run(spec: &RunSpec) -> Result<RunOutput, CliError> {
    spec.check()?;
    let file = ScenarioFile::load(&spec.scenario_path)?;
    execute(spec, &file)
}

/// Runs `spec` against an already loaded scenario file.
pub fn execute(spec: &RunSpec, file: &ScenarioFile) -> Result<RunOutput, CliError> {
    spec.check()?;
    match spec.command {
        Command::Solve => {
            let record = solve_record(&file.scenario)?;
            let text = match spec.format {
                Format::Csv => to_csv(std::slice::from_ref(&record))?,
                Format::Json => to_json(&record)?,
            };
            Ok(RunOutput::ok(text))
        }
        Command::Sweep => {
            let sweep = spec.sweep.as_ref().expect("checked above");
            let records = sweep_records(file, sweep)?;
            let text = match spec.format {
                Format::Csv => to_csv(&records)?,
                Format::Json => to_json(&records)?,
            };
            Ok(RunOutput::ok(text))
        }
        Command::Verify => {
            let checks = verify::run_suite(file, spec.seed)?;
            let failures = checks.iter().filter(|c| c.failed()).count();
            let text = match spec.format {
                Format::Csv => verify::render(&checks),
                Format::Json => to_json(&checks)?,
            };
            Ok(RunOutput { text, failures })
        }
        Command::Oracle => {
            let s = &file.scenario;
            let cfg = OracleConfig {
                draws: spec.draws.unwrap_or(1_000_000),
                seed: spec.seed,
                ..OracleConfig::default()
            };
            let est = estimate_mv(s, s.population, &cfg)?;
            let out = OracleRecord {
                population: s.population,
                seed: spec.seed,
                value: est.value,
                std_error: est.std_error,
                draws_used: est.draws_used,
            };
            let text = match spec.format {
                Format::Csv => format!(
                    "population,seed,value,std_error,draws_used\n{},{},{},{},{}\n",
                    out.population, out.seed, out.value, out.std_error, out.draws_used
                ),
                Format::Json => to_json(&out)?,
            };
            Ok(RunOutput::ok(text))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleRecord {
    pub population: u64,
    pub seed: u64,
    pub value: f64,
    pub std_error: f64,
    pub draws_used: u64,
}

fn solve_record(s: &Scenario) -> Result<Record, CliError> {
    let game = Game::new(s, s.population)?;
    equilibrium_record(&game, s.population, s.population as f64)
}

/// Equilibrium at population `n`, or a `no_entry` row when even a lone
/// agent would stay out at this transfer.
fn equilibrium_record(game: &Game, n: u64, value: f64) -> Result<Record, CliError> {
    let s = game.scenario();
    if !game.individual_entry_holds()? {
        let m = if s.kind == LinkageKind::NoLinkage { 1 } else { n };
        return Ok(Record {
            value,
            regime: "no_entry".into(),
            entry_prob: 0.0,
            effort: 0.0,
            mv: game.mv(m)?,
            welfare: 0.0,
            consumer_surplus: 0.0,
            profit: 0.0,
        });
    }
    let eq = game.solve(n)?;
    let w = welfare(s, &eq);
    Ok(Record {
        value,
        regime: eq.regime.as_str().into(),
        entry_prob: eq.entry_prob,
        effort: eq.effort,
        mv: eq.marginal_value,
        welfare: w.total,
        consumer_surplus: w.consumer,
        profit: w.profit,
    })
}

fn sweep_records(file: &ScenarioFile, sweep: &Sweep) -> Result<Vec<Record>, CliError> {
    let s = &file.scenario;
    let max = sweep.values.iter().copied().fold(0.0, f64::max);
    match sweep.variable {
        SweepVar::N => {
            if sweep.values.iter().any(|v| *v < 1.0) {
                return Err(CliError::Request("population must be at least 1".into()));
            }
            let game = Game::new(s, max as u64)?;
            sweep
                .values
                .iter()
                .map(|v| equilibrium_record(&game, *v as u64, *v))
                .collect()
        }
        SweepVar::R => {
            let base = Game::new(s, s.population)?;
            sweep
                .values
                .iter()
                .map(|r| {
                    let game = Game::with_curve(&s.with_reward(*r), base.curve().clone());
                    equilibrium_record(&game, s.population, *r)
                })
                .collect()
        }
        SweepVar::GammaScale => {
            let top = size_cap(max, s.population);
            let game = Game::new(s, top)?;
            sweep
                .values
                .iter()
                .map(|g| {
                    let sizes = SizeDistribution::uniform_up_to(size_cap(*g, s.population));
                    let out = solve_uncertain(&game, &sizes)?;
                    Ok(Record {
                        value: *g,
                        regime: out.regime.as_str().into(),
                        entry_prob: out.entry_prob,
                        effort: out.effort,
                        mv: out.marginal_value,
                        welfare: out.welfare,
                        consumer_surplus: out.consumer_surplus,
                        profit: out.profit,
                    })
                })
                .collect()
        }
        SweepVar::ObservedM => {
            let spec = file.multilink.as_ref().ok_or_else(|| {
                CliError::Request("observed_m sweeps need a multilink block".into())
            })?;
            if s.kind == LinkageKind::NoLinkage {
                return Err(CliError::Request(
                    "observed_m sweeps need a quality or circumstance scenario".into(),
                ));
            }
            let fb = first_best(s).effort;
            sweep
                .values
                .iter()
                .map(|m| {
                    let m = *m as usize;
                    if m > spec.segments.len() {
                        return Err(CliError::Request(format!(
                            "observed_m = {m} exceeds the {} segments",
                            spec.segments.len()
                        )));
                    }
                    let mv = mv_multilink(&spec.with_observed(m), s.kind)?;
                    let a = s.cost.deriv_inverse(mv)?;
                    debug_assert!(a < fb);
                    let (mu, c) = (s.mu(), s.cost.eval(a)?);
                    Ok(Record {
                        value: m as f64,
                        regime: Regime::FullEntry.as_str().into(),
                        entry_prob: 1.0,
                        effort: a,
                        mv,
                        welfare: a + 2.0 * mu - c,
                        consumer_surplus: s.reward + mu - c,
                        profit: a + mu - s.reward,
                    })
                })
                .collect()
        }
    }
}

/// Largest segment size `round(γ·N)`, at least 1.
fn size_cap(gamma: f64, population: u64) -> u64 {
    ((gamma * population as f64).round() as u64).max(1)
}
