//! Headered CSV files: observations (coordinates then response) and targets
//! (coordinates only). Lines starting with `#` are comments.

use crate::error::{CliError, Result};
use refkrig_core::kernels::DesignSet;

/// Observed design points and responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub columns: Vec<String>,
    pub design: DesignSet,
    pub y: Vec<f64>,
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn parse_rows(origin: &str, text: &str, expect: Option<usize>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = reader(text);
    let header = rdr.headers().map_err(|e| CliError::Data(format!("{origin}: {e}")))?.clone();
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{origin}: missing header line")));
    }
    if let Some(k) = expect {
        if columns.len() != k {
            return Err(CliError::Data(format!(
                "{origin}: header has {} columns, expected {k}",
                columns.len()
            )));
        }
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("{origin}:{line}: {e}"))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                let v: f64 = field.parse().map_err(|_| {
                    CliError::Data(format!("{origin}:{line}: column '{}' holds '{field}', not a number", columns[c]))
                })?;
                if !v.is_finite() {
                    return Err(CliError::Data(format!("{origin}:{line}: column '{}' is not finite", columns[c])));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{origin}: no data rows")));
    }
    Ok((columns, rows))
}

/// Reads observations: every column but the last is a coordinate.
pub fn read_observations(origin: &str, text: &str) -> Result<Observations> {
    let (columns, rows) = parse_rows(origin, text, None)?;
    if columns.len() < 2 {
        return Err(CliError::Data(format!("{origin}: need at least one coordinate column and a response")));
    }
    let r = columns.len() - 1;
    let mut coords = Vec::with_capacity(rows.len() * r);
    let mut y = Vec::with_capacity(rows.len());
    for row in rows {
        coords.extend_from_slice(&row[..r]);
        y.push(row[r]);
    }
    let design = DesignSet::new(r, coords).map_err(|e| CliError::Data(format!("{origin}: {e}")))?;
    Ok(Observations { columns, design, y })
}

/// Reads prediction targets with exactly `dim` coordinate columns.
pub fn read_targets(origin: &str, text: &str, dim: usize) -> Result<(Vec<String>, DesignSet)> {
    let (columns, rows) = parse_rows(origin, text, Some(dim))?;
    let coords = rows.into_iter().flatten().collect();
    let design = DesignSet::new(dim, coords).map_err(|e| CliError::Data(format!("{origin}: {e}")))?;
    Ok((columns, design))
}

/// The comment line every output file starts with.
pub fn header_comment(seed: u64) -> String {
    format!("refkrig {}, master seed {seed}", crate::VERSION)
}

/// Writes rows of plain fields as CSV after a `#` comment header.
pub fn write_csv(seed: u64, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = format!("# {}\n", header_comment(seed));
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("writing to memory");
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    out.push_str(&String::from_utf8(w.into_inner().expect("writing to memory")).expect("fields are UTF-8"));
    out
}
