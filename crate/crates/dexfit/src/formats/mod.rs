//! Readers and writers for every artifact the pipeline puts on disk.
//!
//! Formats are deliberately small: ASCII meshes, JSON for structured
//! records, raw little-endian binary for depth maps, CSV for reports.
//! Writers emit canonical bytes (fixed key order, shortest round-trip
//! floats, trailing newline), so equal data always produces equal files.
//! Loaders validate through the core constructors and reject anything
//! the engine could not have written.

use std::fmt;
use std::io;

pub mod annotations;
pub mod camera;
pub mod config;
pub mod curve;
pub mod depth;
pub mod grasps;
pub mod hand;
pub mod mesh;
pub mod poses;
pub mod report;
pub mod scene;

#[derive(Debug)]
pub enum FormatError {
    Io(io::Error),
    Json(serde_json::Error),
    /// A text format broke at this 1-based line.
    Parse { line: usize, message: String },
    /// Structurally well-formed but semantically wrong for the engine.
    Invalid(String),
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Io(e) => write!(f, "{e}"),
            FormatError::Json(e) => write!(f, "{e}"),
            FormatError::Parse { line, message } => write!(f, "line {line}: {message}"),
            FormatError::Invalid(message) => write!(f, "{message}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<io::Error> for FormatError {
    fn from(e: io::Error) -> Self {
        FormatError::Io(e)
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json(e)
    }
}

fn invalid(message: impl Into<String>) -> FormatError {
    FormatError::Invalid(message.into())
}

/// Pretty JSON with a trailing newline, the canonical shape of every
/// JSON artifact this crate writes.
fn to_json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}
