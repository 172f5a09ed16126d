use std::io::{self, Write};

use anyhow::Result;
use btnn::cost::Table;
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

/// Prints a finished table in the selected format.
pub fn print_table(format: Format, table: &Table) -> Result<()> {
    let s = match format {
        Format::Text => table.to_text(),
        Format::Csv => table.to_csv()?,
    };
    let mut out = io::stdout().lock();
    out.write_all(s.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Emits rows one at a time for long-running commands. Text rows are padded
/// to the header widths; CSV rows are quoted per RFC 4180.
pub struct RowStream {
    format: Format,
    widths: Vec<usize>,
}

impl RowStream {
    pub fn start(format: Format, headers: &[&str]) -> Result<Self> {
        let widths = headers.iter().map(|h| h.len().max(10)).collect();
        let s = Self { format, widths };
        s.emit(headers.iter().map(|h| h.to_string()).collect())?;
        Ok(s)
    }

    pub fn emit(&self, cells: Vec<String>) -> Result<()> {
        let line = match self.format {
            Format::Text => {
                let parts: Vec<String> = cells.iter().zip(&self.widths).map(|(c, w)| format!("{c:<w$}")).collect();
                parts.join("  ").trim_end().to_string() + "\n"
            }
            // a header-only table renders as exactly one record
            Format::Csv => Table::new(cells).to_csv()?,
        };
        let mut out = io::stdout().lock();
        out.write_all(line.as_bytes())?;
        out.flush()?;
        Ok(())
    }
}

/// Wall-clock lines carry this tag so reproducibility checks can drop them.
pub const TIME_TAG: &str = "[time]";

pub fn timing(format: Format, label: &str, value: f64, unit: &str) {
    match format {
        Format::Text => println!("{TIME_TAG} {label} {value:.6} {unit}"),
        Format::Csv => println!("{TIME_TAG},{label},{value:.6},{unit}"),
    }
}
