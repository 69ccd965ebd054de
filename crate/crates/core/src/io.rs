//! File formats: TOML model and design files, single-column CSV series,
//! JSON fit results.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ar::TimeSeries;
use crate::error::{Error, Result};
use crate::estimator::FitResult;
use crate::montecarlo::{ExperimentDesign, ModelSpec};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.display().to_string(), source })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn from_toml<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::invalid(format!("invalid {what}: {e}")))
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let spec: ModelSpec = from_toml(text, "model file")?;
    spec.validate()?;
    Ok(spec)
}

pub fn read_model(path: &Path) -> Result<ModelSpec> {
    parse_model(&read_text(path)?)
}

pub fn parse_design(text: &str) -> Result<ExperimentDesign> {
    let design: ExperimentDesign = from_toml(text, "design file")?;
    design.validate()?;
    Ok(design)
}

pub fn read_design(path: &Path) -> Result<ExperimentDesign> {
    parse_design(&read_text(path)?)
}

/// Parses a CSV with a single column headed `x`.
pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Format(format!("series header: {e}")))?;
    if headers.len() != 1 || &headers[0] != "x" {
        return Err(Error::Format(format!(
            "series file must have the single column header `x`, found {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }
    let mut values = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Format(format!("series row {}: {e}", i + 2)))?;
        let field = row.get(0).unwrap_or("");
        let v: f64 = field
            .parse()
            .map_err(|_| Error::Format(format!("series row {}: cannot parse {field:?} as a number", i + 2)))?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::degenerate("series file has no observations"));
    }
    TimeSeries::new(values)
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    parse_series(&read_text(path)?)
}

pub fn format_series(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 20 + 2);
    s.push_str("x\n");
    for v in values {
        s.push_str(&v.to_string());
        s.push('\n');
    }
    s
}

pub fn write_series(path: &Path, values: &[f64]) -> Result<()> {
    write_text(path, &format_series(values))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_fit(path: &Path) -> Result<FitResult> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::Format(format!("invalid fit file: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::innovations::InnovationFamily;

    #[test]
    fn model_file() {
        let m = parse_model(
            "order = 2\ncoefficients = [0.5, -0.2]\n[innovation]\nfamily = \"student_t\"\ndf = 5.0\n",
        )
        .unwrap();
        assert_eq!(m.coefficients, vec![0.5, -0.2]);
        assert_eq!(m.innovation, InnovationFamily::StudentT { df: 5.0 });
        assert!(parse_model("order = 3\ncoefficients = [0.5]\n[innovation]\nfamily = \"gaussian\"\nsigma = 1.0\n").is_err());
        assert!(parse_model("coefficients = [0.5]\ncolour = 1\n[innovation]\nfamily = \"gaussian\"\nsigma = 1.0\n").is_err());
    }

    #[test]
    fn series_round_trip() {
        let v = vec![0.1, -2.5, 1e-300, 123456.789, 0.30000000000000004];
        let back = parse_series(&format_series(&v)).unwrap();
        assert_eq!(back.values(), &v[..]);
    }

    #[test]
    fn series_format_errors() {
        assert!(matches!(parse_series("y\n1\n"), Err(Error::Format(_))));
        assert!(matches!(parse_series("x\n1\n1,000\n"), Err(Error::Format(_))));
        assert!(matches!(parse_series("x\n1\nabc\n"), Err(Error::Format(_))));
        assert!(parse_series("x\n").is_err());
        assert!(parse_series("x\nNaN\n").is_err());
    }

    #[test]
    fn files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/s.csv");
        write_series(&p, &[1.0, 2.0]).unwrap();
        assert_eq!(read_series(&p).unwrap().values(), &[1.0, 2.0]);
        assert!(matches!(read_series(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
    }
}
