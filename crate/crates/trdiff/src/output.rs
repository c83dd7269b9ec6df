//! Bit-exact CSV writers. Every file starts with a comment line embedding
//! the resolved-config hash, followed by a column-name header; numbers are
//! written with 17 significant digits so round-trips are exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::CliError;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Numerical(format!("cannot write {}: {e}", path.display()))
}

pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a purely numeric table.
pub fn write_table(
    path: &Path,
    config_hash: &str,
    columns: &[&str],
    rows: &[Vec<f64>],
) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(&format!("# config_sha256={config_hash}\n"));
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let mut first = true;
        for &v in row {
            if !first {
                text.push(',');
            }
            text.push_str(&format_value(v));
            first = false;
        }
        text.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// Writes a table with a leading label column.
pub fn write_labeled_table(
    path: &Path,
    config_hash: &str,
    columns: &[&str],
    rows: &[(String, Vec<f64>)],
) -> Result<(), CliError> {
    let mut text = String::new();
    text.push_str(&format!("# config_sha256={config_hash}\n"));
    text.push_str(&columns.join(","));
    text.push('\n');
    for (label, values) in rows {
        debug_assert_eq!(values.len() + 1, columns.len());
        text.push_str(label);
        for &v in values {
            text.push(',');
            text.push_str(&format_value(v));
        }
        text.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| io_err(path, e))
}

/// File label for a Bragg spot, e.g. `1_-1`.
pub fn spot_label(spot: [i32; 2]) -> String {
    format!("{}_{}", spot[0], spot[1])
}
