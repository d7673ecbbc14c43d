use std::path::Path;

use dpdr_core::DpdrError;
use serde::Serialize;

/// A command failure and its exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
    Core(DpdrError),
}

impl Failure {
    /// Treats a core error as a usage error (bad flags rather than bad data).
    pub fn usage(e: DpdrError) -> Self {
        Failure::Usage(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Core(e) if e.is_numerical() => 3,
            Failure::Core(DpdrError::InvalidArgument(_) | DpdrError::OffSupport { .. }) => 1,
            Failure::Core(_) => 2,
        }
    }
}

impl From<DpdrError> for Failure {
    fn from(e: DpdrError) -> Self {
        Failure::Core(e)
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Numerical(m) => f.write_str(m),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Failure {
    Failure::Core(DpdrError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Data(e.to_string()))?;
    text.push('\n');
    write_file(path, &text)
}

/// Shortest round-trip form; empty for non-finite values.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_num)
}

pub fn fmt_w(w: &[f64]) -> String {
    w.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(";")
}

/// Quotes a free-text CSV cell when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
