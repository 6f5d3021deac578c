//! Shared output helpers: NDJSON to stdout or files, sweep CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use liqd_core::pipeline::SweepRow;
use serde::Serialize;

/// Serializes each row as one JSON line.
pub fn ndjson_lines<T: Serialize>(rows: &[T]) -> Result<Vec<String>> {
    rows.iter()
        .map(|row| serde_json::to_string(row).context("serializing record"))
        .collect()
}

/// Prints pre-rendered lines to stdout.
pub fn print_lines(lines: &[String]) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = std::io::BufWriter::new(stdout.lock());
    for line in lines {
        writeln!(out, "{line}").context("writing to stdout")?;
    }
    out.flush().context("flushing stdout")
}

/// Prints a pre-rendered block of text to stdout.
pub fn print_text(text: &str) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    out.write_all(text.as_bytes()).context("writing to stdout")?;
    out.flush().context("flushing stdout")
}

/// Writes pre-rendered lines to a file, one per line.
pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Renders sweep rows as `threshold,accuracy,white_pixel_rate` CSV.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut csv = String::from("threshold,accuracy,white_pixel_rate\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            row.threshold, row.accuracy, row.white_pixel_rate
        ));
    }
    csv
}

/// Writes a string to a file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
