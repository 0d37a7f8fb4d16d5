//! Stable serialization of results: fixed-precision floats, run manifests.

use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::ser::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

/// Significant digits for floats in machine-readable outputs.
pub const DATA_DIGITS: usize = 17;
/// Significant digits for floats in human-facing tables.
pub const TABLE_DIGITS: usize = 6;

/// Formats `value` with exactly `digits` significant digits. Plain decimal
/// notation is used for decimal exponents in `-5..digits`, scientific
/// notation otherwise. Non-finite values yield `None`.
pub fn format_significant(value: f64, digits: usize) -> Option<String> {
    if !value.is_finite() {
        return None;
    }
    let digits = digits.max(1);
    let value = if value == 0.0 { 0.0 } else { value };
    let sci = format!("{:.*e}", digits - 1, value);
    let (mantissa, exp) = sci.split_once('e')?;
    let exp: i32 = exp.parse().ok()?;
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let raw: String = mantissa.chars().filter(char::is_ascii_digit).collect();

    if exp < -5 || exp >= digits as i32 {
        return Some(format!("{sign}{mantissa}e{exp}"));
    }
    let out = if exp < 0 {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{raw}")
    } else {
        let split = exp as usize + 1;
        let (int_part, frac_part) = raw.split_at(split);
        if frac_part.is_empty() {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{frac_part}")
        }
    };
    Some(out)
}

/// Float cell for CSV outputs; empty for non-finite values.
pub fn csv_float(value: f64) -> String {
    format_significant(value, DATA_DIGITS).unwrap_or_default()
}

pub fn table_float(value: f64) -> String {
    format_significant(value, TABLE_DIGITS).unwrap_or_else(|| "n/a".into())
}

/// Pretty JSON formatter that writes every float with 17 significant digits.
struct StableFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl StableFormatter<'_> {
    fn write_float<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        match format_significant(value, DATA_DIGITS) {
            Some(s) => writer.write_all(s.as_bytes()),
            None => writer.write_all(b"null"),
        }
    }
}

impl Formatter for StableFormatter<'_> {
    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_float(writer, f64::from(value))
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        self.write_float(writer, value)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Pretty-printed JSON with stable float formatting and a trailing newline.
pub fn to_stable_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let mut buf = Vec::new();
    let formatter = StableFormatter {
        inner: PrettyFormatter::with_indent(b"  "),
    };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(role: &str, path: &Path, contents: &[u8]) -> Self {
        Self {
            role: role.to_owned(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(contents)),
        }
    }
}

/// Everything needed to reproduce one CLI run.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
    /// Seconds since the Unix epoch. Only the sidecar manifest carries it;
    /// the copy embedded in data outputs omits it so reruns are identical.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            inputs: Vec::new(),
            seed: None,
            sample_count: None,
            timestamp_unix: None,
        }
    }

    pub fn stamped(&self) -> Self {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or_default();
        Self {
            timestamp_unix: Some(now),
            ..self.clone()
        }
    }
}
