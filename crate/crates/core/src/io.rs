//! CSV and JSON files. Every writer goes through a temporary file in the
//! target directory followed by a rename, so readers never see partial output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gp::{GPModel, PosteriorSummary, TimeSeries};
use crate::spectral::PsdEstimate;
use crate::train::TraceRow;

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Reads a `time,value` CSV. Rows may come in any order; the result is
/// sorted. Repeated times are rejected.
pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeries> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header = reader.headers()?.clone();
    if header.len() != 2 || &header[0] != "time" || &header[1] != "value" {
        return Err(parse_error(
            path,
            1,
            format!(
                "expected header 'time,value', got '{}'",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(parse_error(
                path,
                line,
                format!("expected 2 fields, got {}", record.len()),
            ));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = record[i]
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad {name} '{}'", &record[i])))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("non-finite {name}")));
            }
            Ok(v)
        };
        rows.push((field(0, "time")?, field(1, "value")?));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateTime(w[0].0));
    }
    let (times, values) = rows.into_iter().unzip();
    TimeSeries::new(times, values)
}

/// Writes `bytes` to `path` via a sibling temporary file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidParameter(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Numeric table with a header row. Values use the shortest representation
/// that round-trips, so identical inputs give identical files.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} fields, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn write_series(path: impl AsRef<Path>, ts: &TimeSeries) -> Result<()> {
    let rows: Vec<Vec<f64>> = ts
        .times()
        .iter()
        .zip(ts.values())
        .map(|(t, v)| vec![*t, *v])
        .collect();
    write_table(path, &["time", "value"], &rows)
}

/// `t,mean,variance`.
pub fn write_posterior(path: impl AsRef<Path>, post: &PosteriorSummary) -> Result<()> {
    let rows: Vec<Vec<f64>> = (0..post.query_times.len())
        .map(|i| vec![post.query_times[i], post.mean[i], post.variance[i]])
        .collect();
    write_table(path, &["t", "mean", "variance"], &rows)
}

pub fn write_psd(path: impl AsRef<Path>, psd: &PsdEstimate) -> Result<()> {
    let rows: Vec<Vec<f64>> = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .map(|(f, p)| vec![*f, *p])
        .collect();
    write_table(path, &["frequency", "power"], &rows)
}

pub fn write_trace(path: impl AsRef<Path>, trace: &[TraceRow]) -> Result<()> {
    let rows: Vec<Vec<f64>> = trace
        .iter()
        .map(|r| {
            vec![
                r.iter as f64,
                r.objective,
                r.sigma2,
                r.xi0,
                r.delta,
                r.noise_var,
            ]
        })
        .collect();
    write_table(
        path,
        &["iter", "objective", "sigma2", "xi0", "delta", "noise_var"],
        &rows,
    )
}

/// One `t` column of inducing locations.
pub fn write_inducing(path: impl AsRef<Path>, locations: &[f64]) -> Result<()> {
    let rows: Vec<Vec<f64>> = locations.iter().map(|t| vec![*t]).collect();
    write_table(path, &["t"], &rows)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e.line(), e.to_string()))
}

/// Reads a model and checks its parameters.
pub fn load_model(path: impl AsRef<Path>) -> Result<GPModel> {
    let model: GPModel = read_json(path)?;
    model.kernel().validate()?;
    GPModel::new(model.kernel().clone(), model.noise_var())
}
