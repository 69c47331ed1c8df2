//! The long-format results table: one line per (replication, loss order).

use std::io::{Read, Write};

use rank_phase::simulation::{QLoss, ResultRow};
use rank_phase::{ModelKind, RankError};

use crate::error::{CliError, CliResult};

pub const HEADER: [&str; 13] = [
    "model",
    "n",
    "snr",
    "beta",
    "sigma",
    "estimator",
    "q",
    "rep",
    "seed",
    "loss",
    "exact_recovery",
    "iters",
    "wall_time_ms",
];

/// Seventeen significant digits, enough for a bit-exact round trip.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_results<W: Write>(out: W, rows: &[ResultRow]) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let fail = |e: csv::Error| CliError::failure(format!("writing results: {e}"));
    w.write_record(HEADER).map_err(fail)?;
    for row in rows {
        for ql in &row.losses {
            w.write_record([
                row.model.label().to_string(),
                row.n.to_string(),
                num(row.snr),
                num(row.beta),
                num(row.sigma),
                row.estimator.label().to_string(),
                num(ql.q),
                row.rep.to_string(),
                row.seed.to_string(),
                num(ql.loss),
                row.exact_recovery.to_string(),
                row.iters.to_string(),
                row.wall_time_ms.map(num).unwrap_or_default(),
            ])
            .map_err(fail)?;
        }
    }
    w.flush()
        .map_err(|e| CliError::failure(format!("writing results: {e}")))
}

fn field<'a>(record: &'a csv::StringRecord, i: usize, line: u64) -> CliResult<&'a str> {
    record
        .get(i)
        .ok_or_else(|| CliError::usage(format!("line {line}: missing column `{}`", HEADER[i])))
}

fn parse<T: std::str::FromStr>(record: &csv::StringRecord, i: usize, line: u64) -> CliResult<T> {
    let raw = field(record, i, line)?;
    raw.trim().parse().map_err(|_| {
        CliError::usage(format!(
            "line {line}: column `{}` has unparseable value `{raw}`",
            HEADER[i]
        ))
    })
}

/// Reads a table written by [`write_results`], regrouping the loss lines of
/// each replication. Line endings may be `\n` or `\r\n`.
pub fn read_results<R: Read>(input: R) -> CliResult<Vec<ResultRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CliError::usage(format!("reading results header: {e}")))?
        .clone();
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != HEADER {
        return Err(CliError::usage(format!(
            "results header must be `{}`, got `{}`",
            HEADER.join(","),
            got.join(",")
        )));
    }
    let mut rows: Vec<ResultRow> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| CliError::usage(format!("line {line}: {e}")))?;
        let model: ModelKind = field(&record, 0, line)?
            .parse()
            .map_err(|e: RankError| CliError::usage(format!("line {line}: {e}")))?;
        let estimator = field(&record, 5, line)?
            .parse()
            .map_err(|e: RankError| CliError::usage(format!("line {line}: {e}")))?;
        let wall = field(&record, 12, line)?.trim();
        let row = ResultRow {
            model,
            n: parse(&record, 1, line)?,
            snr: parse(&record, 2, line)?,
            beta: parse(&record, 3, line)?,
            sigma: parse(&record, 4, line)?,
            estimator,
            rep: parse(&record, 7, line)?,
            seed: parse(&record, 8, line)?,
            losses: vec![QLoss {
                q: parse(&record, 6, line)?,
                loss: parse(&record, 9, line)?,
            }],
            exact_recovery: parse(&record, 10, line)?,
            iters: parse(&record, 11, line)?,
            wall_time_ms: if wall.is_empty() {
                None
            } else {
                Some(parse(&record, 12, line)?)
            },
        };
        match rows.last_mut() {
            Some(prev) if same_replication(prev, &row) => prev.losses.extend(row.losses),
            _ => rows.push(row),
        }
    }
    Ok(rows)
}

fn same_replication(a: &ResultRow, b: &ResultRow) -> bool {
    a.model == b.model
        && a.n == b.n
        && a.snr.to_bits() == b.snr.to_bits()
        && a.beta.to_bits() == b.beta.to_bits()
        && a.estimator == b.estimator
        && a.rep == b.rep
        && a.seed == b.seed
}
