//! CSV output helpers. Numbers are written in plain decimal notation,
//! rounded to 9 significant digits.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// Round to 9 significant digits and print without an exponent.
pub fn num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    let rounded: f64 = format!("{x:.8e}").parse().unwrap_or(x);
    // Display on f64 never uses scientific notation and prints the
    // shortest representation that round-trips.
    let s = rounded.to_string();
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

pub struct CsvReport {
    path: PathBuf,
    writer: csv::Writer<fs::File>,
}

impl CsvReport {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut report = Self {
            path,
            writer: csv::Writer::from_writer(file),
        };
        report.row(header.iter().map(|h| h.to_string()))?;
        Ok(report)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let path = &self.path;
        self.writer
            .write_record(fields)
            .map_err(|e| CliError::io(path, std::io::Error::other(e)))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn formats_nine_significant_digits() {
        assert_eq!(num(41.42135623730951), "41.4213562");
        assert_eq!(num(121.68), "121.68");
        assert_eq!(num(1e-12), "0.000000000001");
        assert_eq!(num(123456789012.0), "123456789000");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(0.1 + 0.2), "0.3");
    }
}
