//! Self-describing output files. Every float is written with 17
//! significant digits so that reruns diff exactly.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// `%.17g`: shortest of fixed and scientific, trailing zeros removed.
pub fn g17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Pretty printer that writes floats through [`g17`]. Non-finite values are
/// already `null` by the time they reach the formatter.
struct G17Formatter<'a>(PrettyFormatter<'a>);

macro_rules! delegate {
    ($($name:ident $(($arg:ident: $ty:ty))?),* $(,)?) => {
        $(
            fn $name<W: ?Sized + Write>(&mut self, w: &mut W $(, $arg: $ty)?) -> io::Result<()> {
                self.0.$name(w $(, $arg)?)
            }
        )*
    };
}

impl Formatter for G17Formatter<'_> {
    delegate!(
        begin_array,
        end_array,
        begin_array_value(first: bool),
        end_array_value,
        begin_object,
        end_object,
        begin_object_key(first: bool),
        end_object_key,
        begin_object_value,
        end_object_value,
    );

    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        let mut s = g17(value);
        if !s.contains(['.', 'e']) {
            // keep floats recognisable as floats
            s.push_str(".0");
        }
        w.write_all(s.as_bytes())
    }
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, G17Formatter(PrettyFormatter::new()));
    value.serialize(&mut ser).map_err(|e| CliError::Io(format!("serialising output: {e}")))?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// Git-style blob hash: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn blob_sha256(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Where artifacts go, plus the echoed configuration they all carry.
pub struct Sink {
    dir: PathBuf,
    config: Value,
    config_hash: String,
    quiet: bool,
}

impl Sink {
    pub fn new(dir: &Path, config: Value, quiet: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
        let canonical = to_json_string(&config)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config_hash: blob_sha256(canonical.as_bytes()),
            config,
            quiet,
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    pub fn write_json(&self, name: &str, command: &str, result: Value) -> Result<PathBuf, CliError> {
        let doc = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "config_sha256": self.config_hash,
            "config": self.config,
            "result": result,
        });
        let path = self.dir.join(name);
        write_file(&path, to_json_string(&doc)?.as_bytes())?;
        self.note(format!("wrote {}", path.display()));
        Ok(path)
    }

    /// CSV with a header row; floats use [`g17`].
    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        let io_err = |e: csv::Error| CliError::Io(format!("writing {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(io_err)?;
        w.write_record(header).map_err(io_err)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io_err)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
        self.note(format!("wrote {}", path.display()));
        Ok(path)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}

pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => g17(*v),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(g17(0.8), "0.80000000000000004");
        assert_eq!(g17(3.0), "3");
        assert_eq!(g17(0.1 + 0.2), "0.30000000000000004");
        assert_eq!(g17(1e-7), "9.9999999999999995e-08");
        assert_eq!(g17(1.5e300), "1.5000000000000001e+300");
        assert_eq!(g17(-2.5), "-2.5");
        assert_eq!(g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(g17(1e-4), "0.0001");
        for x in [0.8, 1.0 / 3.0, 123456.789, 1e-12, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_floats_round_trip() {
        let v = serde_json::json!({"a": [0.8, 2.0], "n": 3});
        let s = to_json_string(&v).unwrap();
        assert!(s.contains("0.80000000000000004"));
        assert!(s.contains("2.0"));
        assert!(s.contains("\"n\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin` with SHA-256 objects
        assert_eq!(
            blob_sha256(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }
}
