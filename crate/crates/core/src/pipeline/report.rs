use serde::Serialize;
use serde_json::Value;

use crate::canonical;
use crate::error::Error;

/// Canonical JSON value of any report.
pub fn report_value<T: Serialize>(report: &T) -> Value {
    serde_json::to_value(report).expect("reports serialize")
}

/// SHA-256 of the canonical report text.
pub fn report_hash<T: Serialize>(report: &T) -> String {
    canonical::sha256(&report_value(report))
}

/// Writes the report with sorted keys and 17 significant digits.
pub fn emit_report<T: Serialize>(report: &T, path: &str) -> Result<(), Error> {
    let mut text = canonical::to_string(&report_value(report));
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &str) -> Result<Value, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::io(path, std::io::Error::new(std::io::ErrorKind::InvalidData, e.to_string())))
}
