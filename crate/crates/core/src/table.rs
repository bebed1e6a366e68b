//! Numeric CSV tables with 17-significant-digit cells.

use crate::error::{Error, Result};

/// Formats a value with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// `["{prefix}_0", …, "{prefix}_{n-1}"]`
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn to_csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.iter().map(|&v| fmt_num(v))).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
}

/// Header plus numeric rows; every row must have the header's width.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("not a number: '{s}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

/// Column lookup by name.
pub struct Columns<'a> {
    names: &'a [String],
}

impl<'a> Columns<'a> {
    pub fn new(names: &'a [String]) -> Self {
        Self { names }
    }

    pub fn single(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidArgument(format!("missing column '{name}'")))
    }

    /// Positions of `{prefix}_0, {prefix}_1, …` in index order.
    pub fn group(&self, prefix: &str) -> Result<Vec<usize>> {
        let mut found: Vec<(usize, usize)> = self
            .names
            .iter()
            .enumerate()
            .filter_map(|(pos, n)| {
                let rest = n.strip_prefix(prefix)?.strip_prefix('_')?;
                rest.parse::<usize>().ok().map(|i| (i, pos))
            })
            .collect();
        found.sort_unstable();
        if found.iter().enumerate().any(|(k, &(i, _))| k != i) {
            return Err(Error::InvalidArgument(format!("columns '{prefix}_*' are not contiguous")));
        }
        Ok(found.into_iter().map(|(_, pos)| pos).collect())
    }
}
