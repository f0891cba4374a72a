//! File emission. Every file is read back and checked before the command
//! reports success.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes pretty JSON and checks that it parses back to the same value.
pub fn write_json<T>(path: &Path, value: &T) -> Result<(), CliError>
where
    T: Serialize + DeserializeOwned + PartialEq,
{
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, &text).map_err(|e| io_err(path, e))?;
    let back = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parsed: T = serde_json::from_str(&back)
        .map_err(|e| io_err(path, format!("schema check failed: {e}")))?;
    if parsed != *value {
        return Err(io_err(path, "schema check failed: content does not round-trip"));
    }
    Ok(())
}

/// Writes a numeric CSV and checks its shape: a header, then rows of
/// finite numbers with one field per column.
pub fn write_csv(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))?;
    let back = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    validate_csv(&back).map_err(|e| io_err(path, format!("schema check failed: {e}")))
}

pub fn validate_csv(text: &str) -> Result<(), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let columns = header.split(',').count();
    if header.split(',').any(|h| h.trim().is_empty()) {
        return Err("blank column name".into());
    }
    let mut rows = 0;
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(format!("row {} has {} fields, expected {columns}", i + 1, fields.len()));
        }
        for f in fields {
            match f.parse::<f64>() {
                Ok(v) if v.is_finite() => {}
                _ => return Err(format!("row {}: '{f}' is not a finite number", i + 1)),
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err("no data rows".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        assert!(validate_csv("a,b\n1,2\n3.5e-1,-4\n").is_ok());
        assert!(validate_csv("a,b\n").is_err());
        assert!(validate_csv("a,b\n1\n").is_err());
        assert!(validate_csv("a,b\n1,NaN\n").is_err());
        assert!(validate_csv("a,b\n1,inf\n").is_err());
    }

    #[test]
    fn json_round_trip_and_nan_rejection() {
        let dir = std::env::temp_dir().join(format!("lightcone-out-test-{}", std::process::id()));
        ensure_dir(&dir).unwrap();
        let path = dir.join("v.json");
        write_json(&path, &vec![0.1_f64, 1.0 / 3.0]).unwrap();
        assert!(write_json(&path, &vec![f64::NAN]).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
