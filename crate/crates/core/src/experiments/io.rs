//! Output writers. Floats are written with Rust's shortest round-trip
//! formatting so reruns produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{ExperimentError, Result};
use crate::optim::TracePoint;

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> ExperimentError {
    ExperimentError::Io { path: path.to_path_buf(), source }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Numerical(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

/// Write `header` and rows of numbers.
pub fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let put = || -> std::io::Result<()> {
        writeln!(w, "{}", header.join(","))?;
        for r in rows {
            let line: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        w.flush()
    };
    put().map_err(|e| io_err(path, e))
}

pub fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<()> {
    write_rows(path, &["iter", "objective", "wallclock_ms"], trace.iter().map(|t| vec![t.iter as f64, t.objective, t.wallclock_ms]))
}
