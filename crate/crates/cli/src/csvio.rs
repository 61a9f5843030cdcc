//! Minimal CSV writing and parsing for sweep results.
//!
//! UTF-8, comma-separated, one header row, `.` decimal point, values
//! formatted with Rust's shortest round-trip float notation so parsing a
//! written file reproduces the numbers bit for bit.

use crate::CliError;
use std::io::Write;

/// Tabular sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write_csv(&self, w: &mut dyn Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    write!(w, ",")?;
                }
                first = false;
                write!(w, "{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    #[cfg_attr(not(test), allow(dead_code))]
    pub fn parse_csv(text: &str) -> Result<Table, CliError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Config("empty CSV".into()))?;
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
            let row =
                row.map_err(|e| CliError::Config(format!("CSV row {}: {e}", i + 2)))?;
            if row.len() != columns.len() {
                return Err(CliError::Config(format!(
                    "CSV row {} has {} fields, expected {}",
                    i + 2,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let t = Table {
            columns: vec!["a".into(), "b".into()],
            rows: vec![
                vec![0.1 + 0.2, 1.0 / 3.0],
                vec![f64::MIN_POSITIVE, 1e300],
            ],
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let parsed = Table::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(t, parsed);
    }
}
