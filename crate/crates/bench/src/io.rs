use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use exbench_core::dataset::Dataset;
use exbench_core::Matrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::BenchError;

/// Writes `data` as CSV with the feature names and a final `y` column.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::csv(path, e))?;
    let mut header = data.space.names.clone();
    header.push("y".into());
    w.write_record(&header).map_err(|e| BenchError::csv(path, e))?;
    for (row, y) in data.x.rows().zip(&data.y) {
        let fields = row.iter().chain(std::iter::once(y)).map(|v| format!("{v:?}"));
        w.write_record(fields).map_err(|e| BenchError::csv(path, e))?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// Reads a CSV written by [`write_dataset`] into features and targets.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Matrix, Vec<f64>), BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::csv(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| BenchError::csv(path, e))?.iter().map(String::from).collect();
    if header.last().map(String::as_str) != Some("y") {
        return Err(BenchError::Format(format!("{}: last column must be `y`", path.display())));
    }
    let d = header.len() - 1;
    let mut x = Matrix::empty(d);
    let mut y = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| BenchError::csv(path, e))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| BenchError::Format(format!("{} row {}: {e}", path.display(), line + 2)))?;
        if vals.len() != d + 1 {
            return Err(BenchError::Format(format!("{} row {}: expected {} fields", path.display(), line + 2, d + 1)));
        }
        x.push_row(&vals[..d]);
        y.push(vals[d]);
    }
    Ok((header[..d].to_vec(), x, y))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| BenchError::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| BenchError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, BenchError> {
    let text = fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| BenchError::Format(format!("{}: {e}", path.display())))
}

/// Appends JSON values one per line, flushing after each.
pub struct JsonLines {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl JsonLines {
    /// Opens `path` for appending, creating it when missing.
    pub fn append(path: &Path) -> Result<Self, BenchError> {
        let f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| BenchError::io(path, e))?;
        Ok(Self { out: BufWriter::new(f), path: path.to_path_buf() })
    }

    /// Truncates `path` first.
    pub fn create(path: &Path) -> Result<Self, BenchError> {
        let f = File::create(path).map_err(|e| BenchError::io(path, e))?;
        Ok(Self { out: BufWriter::new(f), path: path.to_path_buf() })
    }

    pub fn write<T: Serialize>(&mut self, value: &T) -> Result<(), BenchError> {
        let line = serde_json::to_string(value).map_err(|e| BenchError::Format(e.to_string()))?;
        writeln!(self.out, "{line}").and_then(|_| self.out.flush()).map_err(|e| BenchError::io(&self.path, e))
    }
}

pub fn read_json_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, BenchError> {
    let f = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| BenchError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| BenchError::Format(format!("{} line {}: {e}", path.display(), i + 1)))?;
        out.push(v);
    }
    Ok(out)
}
