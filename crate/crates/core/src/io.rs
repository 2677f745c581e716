//! File formats: initial-state files, per-run CSV time series, sweep and
//! exactness tables. All floating-point output uses 17 significant digits so
//! doubles round-trip exactly.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::control::RunRecord;
use crate::model::{FlockState, ModelError};

#[derive(Debug)]
pub enum IoError {
    Io(std::path::PathBuf, std::io::Error),
    Parse(String),
    State(ModelError),
}

impl std::fmt::Display for IoError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IoError::Io(path, e) => write!(f, "{}: {e}", path.display()),
            IoError::Parse(msg) => write!(f, "parse error: {msg}"),
            IoError::State(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for IoError {}

/// 17 significant digits: enough to reproduce any f64 exactly.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write an initial state: header line `N dim`, then N lines of x and N
/// lines of v, whitespace-separated.
pub fn save_state(state: &FlockState, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&format!("{} {}\n", state.n(), state.dim));
    for w in state.x.iter().chain(state.v.iter()) {
        let row: Vec<String> = w.iter().map(|&c| format_float(c)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| IoError::Io(path.to_path_buf(), e))
}

pub fn load_state(path: &Path) -> Result<FlockState, IoError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| IoError::Io(path.to_path_buf(), e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| IoError::Parse("empty state file".into()))?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IoError::Parse("bad agent count".into()))?;
    let dim: usize = it
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| IoError::Parse("bad dimension".into()))?;
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..2 * n {
        let line = lines
            .next()
            .ok_or_else(|| IoError::Parse(format!("missing row {i} of {}", 2 * n)))?;
        let vals: Result<Vec<f64>, _> =
            line.split_whitespace().map(|s| s.parse::<f64>()).collect();
        let vals = vals.map_err(|e| IoError::Parse(format!("row {i}: {e}")))?;
        if vals.len() != dim {
            return Err(IoError::Parse(format!(
                "row {i} has {} entries, expected {dim}",
                vals.len()
            )));
        }
        rows.push(DVector::from_vec(vals));
    }
    let v = rows.split_off(n);
    FlockState::new(rows, v).map_err(IoError::State)
}

/// Per-run CSV: a timestamp comment line (excluded from any content hash),
/// a header, then one row per sample with columns
/// t,X,V,gamma_sq,margin,W,Y,control_index,active. W and Y are filled for
/// coupled runs only; control_index is the 1-based agent index.
pub fn write_run_csv(record: &RunRecord, path: &Path) -> Result<(), IoError> {
    let file = std::fs::File::create(path).map_err(|e| IoError::Io(path.to_path_buf(), e))?;
    let mut w = std::io::BufWriter::new(file);
    let body = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "# generated_at_unix {}", timestamp())?;
        writeln!(w, "t,X,V,gamma_sq,margin,W,Y,control_index,active")?;
        for (i, s) in record.high.samples.iter().enumerate() {
            let (w_col, y_col) = match &record.low {
                Some(low) => {
                    let ls = &low.samples[i];
                    (format_float(ls.moments.v), format_float(ls.moments.x))
                }
                None => (String::new(), String::new()),
            };
            let idx = s.control_index.map(|i| (i + 1).to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                format_float(s.t),
                format_float(s.moments.x),
                format_float(s.moments.v),
                format_float(s.gamma_sq),
                format_float(s.margin),
                w_col,
                y_col,
                idx,
                u8::from(s.control_active)
            )?;
        }
        Ok(())
    };
    body(&mut w).map_err(|e| IoError::Io(path.to_path_buf(), e))
}

fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Write a small table with a timestamp comment, a header line and rows.
pub fn write_table(path: &Path, header: &str, rows: &[String]) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(&format!("# generated_at_unix {}\n", timestamp()));
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| IoError::Io(path.to_path_buf(), e))
}

/// The CSV body with the timestamp comment line stripped; the unit of
/// byte-identical reproducibility.
pub fn hashable_body(path: &Path) -> Result<String, IoError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| IoError::Io(path.to_path_buf(), e))?;
    Ok(text.splitn(2, '\n').nth(1).unwrap_or("").to_string())
}
