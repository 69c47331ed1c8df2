//! Square interaction matrices in CSV form.
//!
//! One line per row, no header. Diagonal cells are blank or `NA`; every
//! other cell is a finite number. Positions in messages are one-based.

use std::io::Read;

use rank_phase::InteractionMatrix;

use crate::error::{CliError, CliResult};

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

pub fn read_matrix<R: Read>(input: R) -> CliResult<InteractionMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::usage(format!("reading matrix: {e}")))?;
        // a trailing blank line shows up as a single empty field
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        rows.push(record.iter().map(str::to_string).collect());
    }
    let n = rows.len();
    if n < 3 {
        return Err(CliError::usage(format!(
            "matrix needs at least 3 rows, got {n}"
        )));
    }
    let mut dense = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(CliError::usage(format!(
                "matrix is not square: row {} has {} columns, expected {n}",
                i + 1,
                row.len()
            )));
        }
        for (j, cell) in row.iter().enumerate() {
            let at = || format!("row {}, column {}", i + 1, j + 1);
            if i == j {
                if !is_missing(cell) {
                    return Err(CliError::usage(format!(
                        "diagonal cell at {} must be blank or NA, got `{cell}`",
                        at()
                    )));
                }
                continue;
            }
            if is_missing(cell) {
                return Err(CliError::usage(format!("missing value at {}", at())));
            }
            let value: f64 = cell
                .parse()
                .map_err(|_| CliError::usage(format!("unparseable value `{cell}` at {}", at())))?;
            if !value.is_finite() {
                return Err(CliError::usage(format!(
                    "non-finite value `{cell}` at {}",
                    at()
                )));
            }
            dense[i * n + j] = value;
        }
    }
    Ok(InteractionMatrix::from_dense(n, &dense)?)
}
