//! Report serialization: canonical JSON, CSV summaries and trace files.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentReport, ScatterRow, SweepRow, TraceRow, TraceSink};

/// Pretty JSON whose floats always carry 17 significant digits.
struct FixedDigits {
    inner: serde_json::ser::PrettyFormatter<'static>,
}

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes with keys sorted at every level and 17-digit floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // Value objects are BTreeMaps, which sorts keys
    let tree = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(
        &mut buf,
        FixedDigits {
            inner: serde_json::ser::PrettyFormatter::with_indent(b"  "),
        },
    );
    tree.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Single-line variant used for the FFI surface.
pub fn to_compact_json<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, CompactFixed(CompactFormatter));
    tree.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

struct CompactFixed(CompactFormatter);

impl Formatter for CompactFixed {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }
}

pub fn report_from_json(text: &str) -> Result<ExperimentReport> {
    Ok(serde_json::from_str(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (expected json or csv)")),
        }
    }
}

fn flatten(prefix: &str, v: &serde_json::Value, out: &mut Vec<(String, String)>) {
    use serde_json::Value;
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Array(items) => {
            for (i, child) in items.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), child, out);
            }
        }
        Value::Number(n) => {
            let s = match n.as_f64() {
                Some(f) if n.is_f64() => format!("{f:.16e}"),
                _ => n.to_string(),
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Null => out.push((prefix.to_string(), String::new())),
    }
}

/// `key,value` rows, one per leaf of the report, keys sorted.
pub fn to_summary_csv<T: Serialize>(value: &T) -> Result<String> {
    let tree = serde_json::to_value(value)?;
    let mut rows = Vec::new();
    flatten("", &tree, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"]).map_err(csv_err)?;
    for (k, v) in rows {
        w.write_record([k, v]).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.json` or `report.csv` into `dir` and returns the path.
pub fn emit_report(report: &ExperimentReport, dir: &Path, format: Format) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let (name, body) = match format {
        Format::Json => ("report.json", to_canonical_json(report)?),
        Format::Csv => ("report.csv", to_summary_csv(report)?),
    };
    let path = dir.join(name);
    write_file(&path, &body)?;
    Ok(path)
}

pub fn sweep_to_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "parameter",
            "value",
            "seed",
            "q_factor",
            "ber_analytic",
            "ber_empirical",
            "symbol_error_rate",
            "t_hat",
            "xi_hat",
            "key_rate_per_pulse",
            "key_rate_bps",
            "data_rate_bps",
        ])
        .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

pub fn emit_sweep(rows: &[SweepRow], dir: &Path, format: Format) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let (name, body) = match format {
        Format::Json => ("sweep.json", to_canonical_json(&rows)?),
        Format::Csv => ("sweep.csv", sweep_to_csv(rows)?),
    };
    let path = dir.join(name);
    write_file(&path, &body)?;
    Ok(path)
}

/// Writes `trace.csv` (one row per pulse) and `scatter.csv` (phase-corrected
/// data points) as rows arrive.
pub struct CsvTraceSink {
    trace_path: PathBuf,
    scatter_path: PathBuf,
    trace: csv::Writer<BufWriter<File>>,
    scatter: csv::Writer<BufWriter<File>>,
}

impl CsvTraceSink {
    pub fn create(dir: &Path) -> Result<Self> {
        ensure_dir(dir)?;
        let trace_path = dir.join("trace.csv");
        let scatter_path = dir.join("scatter.csv");
        let open = |p: &Path| -> Result<csv::Writer<BufWriter<File>>> {
            let f = File::create(p).map_err(|e| Error::io(p, e))?;
            Ok(csv::Writer::from_writer(BufWriter::new(f)))
        };
        Ok(Self {
            trace: open(&trace_path)?,
            scatter: open(&scatter_path)?,
            trace_path,
            scatter_path,
        })
    }

    pub fn paths(&self) -> (&Path, &Path) {
        (&self.trace_path, &self.scatter_path)
    }
}

fn with_path(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    }
}

impl TraceSink for CsvTraceSink {
    fn pulse(&mut self, row: &TraceRow) -> Result<()> {
        self.trace.serialize(row).map_err(|e| with_path(&self.trace_path, e))
    }

    fn scatter(&mut self, row: &ScatterRow) -> Result<()> {
        self.scatter.serialize(row).map_err(|e| with_path(&self.scatter_path, e))
    }

    fn finish(&mut self) -> Result<()> {
        self.trace.flush().map_err(|e| Error::io(&self.trace_path, e))?;
        self.scatter.flush().map_err(|e| Error::io(&self.scatter_path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Sample {
        zeta: f64,
        alpha: u64,
        nested: Vec<f64>,
        missing: f64,
    }

    #[test]
    fn floats_have_seventeen_digits_and_keys_are_sorted() {
        let s = Sample {
            zeta: 0.1,
            alpha: 7,
            nested: vec![1.0, 2.5e-300],
            missing: f64::NAN,
        };
        let text = to_canonical_json(&s).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("\"alpha\": 7"));
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
        assert!(text.contains("\"missing\": null"));
    }

    #[test]
    fn digits_survive_a_round_trip() {
        let values = [0.1, 1.0 / 3.0, 28_068.518_123, 2.112_454_702_502_853_4e-6, f64::MAX, 5e-324];
        for v in values {
            let text = to_canonical_json(&vec![v]).unwrap();
            let back: Vec<f64> = serde_json::from_str(&text).unwrap();
            assert_eq!(back[0].to_bits(), v.to_bits(), "{v}");
        }
    }

    #[test]
    fn summary_csv_flattens() {
        let s = Sample {
            zeta: 1.5,
            alpha: 3,
            nested: vec![2.0],
            missing: 0.0,
        };
        let csv = to_summary_csv(&s).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "key,value");
        assert!(lines.contains(&"alpha,3"));
        assert!(lines.contains(&"nested.0,2.0000000000000000e0"));
    }

    #[test]
    fn empty_sweep_has_header_only() {
        let csv = sweep_to_csv(&[]).unwrap();
        assert_eq!(csv.lines().count(), 1);
        assert!(csv.starts_with("parameter,value,seed,q_factor"));
    }
}
