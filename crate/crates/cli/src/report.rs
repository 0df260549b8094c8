//! Comma-separated tables (UTF-8, LF, RFC-4180 quoting) and number formatting.

use std::io::Write;
use std::path::Path;

use misclass_core::analysis::{SummaryRow, SummaryTable};

use crate::error::CliResult;

pub fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(out)
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: W) -> CliResult<()> {
        let mut w = writer(out);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }
}

pub const SUMMARY_HEADER: [&str; 8] = ["parameter", "mean", "sd", "q2.5", "q25", "q50", "q75", "q97.5"];

pub fn summary_row(label: Vec<String>, r: &SummaryRow) -> Vec<String> {
    let mut row = label;
    row.push(num(r.mean));
    row.push(num(r.sd));
    row.extend(r.quantiles.iter().map(|&q| num(q)));
    row
}

pub fn summary_table(t: &SummaryTable) -> Table {
    let mut table = Table::new(SUMMARY_HEADER);
    for r in &t.rows {
        table.push(summary_row(vec![r.name.clone()], r));
    }
    table
}
