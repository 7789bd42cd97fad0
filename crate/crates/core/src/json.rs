//! JSON artifact I/O.
//!
//! Every float is written with 17 significant digits (`{:.16e}`), which is
//! enough to round-trip any finite `f64` bit-exactly and keeps the output a
//! pure function of the value (no shortest-repr heuristics).

use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;

use crate::error::{FernError, Result};

/// Schema version stamped into every artifact written by this crate family.
pub const SCHEMA_VERSION: u32 = 1;

/// Where an artifact came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SeventeenDigits;

impl Formatter for SeventeenDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if !value.is_finite() {
            return Err(io::Error::new(
                io::ErrorKind::InvalidData,
                "non-finite float cannot be written as JSON",
            ));
        }
        write!(writer, "{value:.16e}")
    }

    /// serde_json routes NaN and ±∞ here, so nulls are refused outright;
    /// artifacts omit absent values instead.
    fn write_null<W: ?Sized + Write>(&mut self, _writer: &mut W) -> io::Result<()> {
        Err(io::Error::new(
            io::ErrorKind::InvalidData,
            "null (or a non-finite float) cannot be written to an artifact",
        ))
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SeventeenDigits);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_file<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let text = to_string(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn from_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| FernError::Schema(e.to_string()))
}

/// Reads a JSON artifact, rejecting files whose `schema_version` differs.
pub fn read_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| FernError::Schema(format!("{}: {e}", path.display())))?;
    match raw.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(FernError::Schema(format!(
                "{}: field `schema_version` is {v}, expected {SCHEMA_VERSION}",
                path.display()
            )))
        }
        None => {
            return Err(FernError::Schema(format!(
                "{}: missing field `schema_version`",
                path.display()
            )))
        }
    }
    serde_json::from_value(raw).map_err(|e| FernError::Schema(format!("{}: {e}", path.display())))
}
