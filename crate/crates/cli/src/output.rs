use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fpep_core::Error;
use serde::Serialize;

/// Why a command did not succeed; decides the exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad parameters (exit 2).
    Usage(String),
    /// An invariant check failed (exit 1).
    Check(String),
    /// Anything else, e.g. an unwritable path (exit 1).
    Runtime(String),
    /// The reader of stdout went away (exit 0, silently).
    Closed,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Runtime(m) => f.write_str(m),
            Failure::Closed => f.write_str("output closed"),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Infeasible { .. } | Error::OutOfRange { .. } | Error::InvalidGrid(_) => {
                Failure::Usage(err.to_string())
            }
            Error::BoundViolation { .. } | Error::GeometryViolation { .. } => {
                Failure::Check(err.to_string())
            }
            Error::Csv(m) if m.contains("Broken pipe") => Failure::Closed,
            other => Failure::Runtime(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        if err.kind() == io::ErrorKind::BrokenPipe {
            return Failure::Closed;
        }
        Failure::Runtime(err.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

/// Opens `path` for writing, or stdout.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

/// Provenance line shared by every text artifact.
pub fn provenance(command: &str, seed: u64, grid: Option<&str>) -> String {
    let mut line = format!("fpep {} {command} seed={seed}", fpep_core::VERSION);
    if let Some(g) = grid {
        line.push_str(&format!(" grid={g}"));
    }
    line
}

pub fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> CmdResult {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| match e.io_error_kind() {
        Some(kind) => Failure::from(io::Error::from(kind)),
        None => Failure::Runtime(e.to_string()),
    })?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}
