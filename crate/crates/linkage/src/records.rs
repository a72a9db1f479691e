//! Tabular results and their CSV / JSON encodings.

use serde::Serialize;

use crate::CliError;

pub const CSV_HEADER: [&str; 8] = [
    "value",
    "regime",
    "entry_prob",
    "effort",
    "mv",
    "welfare",
    "consumer_surplus",
    "profit",
];

/// One solved point of a run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    /// The swept value (or the population for a single solve).
    pub value: f64,
    pub regime: String,
    pub entry_prob: f64,
    pub effort: f64,
    pub mv: f64,
    pub welfare: f64,
    pub consumer_surplus: f64,
    pub profit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Floats use Rust's shortest round-trip formatting so reruns are
/// byte-identical.
pub fn to_csv(records: &[Record]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.value.to_string(),
            r.regime.clone(),
            r.entry_prob.to_string(),
            r.effort.to_string(),
            r.mv.to_string(),
            r.welfare.to_string(),
            r.consumer_surplus.to_string(),
            r.profit.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}
