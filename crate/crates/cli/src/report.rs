//! The report shared by every command and its serialization.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::input::InputError;

/// Schema version carried by every report.
pub const SCHEMA_VERSION: &str = "1";

/// Outcome classes and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// A violation or a refusal, with its certificate in `witnesses`.
    Violation,
    InputError,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Pass => 0,
            Status::Violation => 1,
            Status::InputError => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Violation => "violation",
            Status::InputError => "input_error",
        }
    }
}

/// `{command, version, inputs_digest, results, witnesses, timing}`. Labels
/// in `results` and `witnesses` are 1-based. `timing` holds deterministic
/// work counters only, so reruns produce identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub inputs_digest: String,
    pub results: Value,
    pub witnesses: Vec<Value>,
    pub timing: Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: Status,
    pub report: Report,
}

impl Outcome {
    pub fn new(command: &str, digest: String, status: Status, mut results: Value, witnesses: Vec<Value>, timing: Value) -> Self {
        if let Value::Object(map) = &mut results {
            map.insert("status".into(), json!(status.label()));
        }
        let report = Report {
            command: command.into(),
            version: SCHEMA_VERSION.into(),
            inputs_digest: digest,
            results,
            witnesses,
            timing,
        };
        Self { status, report }
    }

    pub fn input_error(command: &str, digest: String, error: &InputError) -> Self {
        let results = json!({ "error": error.to_string(), "kind": error.kind() });
        Self::new(command, digest, Status::InputError, results, Vec::new(), json!({}))
    }

    pub fn code(&self) -> u8 {
        self.status.code()
    }

    pub fn to_json(&self) -> String {
        to_json(&self.report)
    }
}

/// Pretty JSON with every float written to 17 significant digits, which
/// round-trips `f64` exactly. Non-finite floats become `null`.
pub fn to_json<S: Serialize>(value: &S) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17(PrettyFormatter::with_indent(b"  ")));
    value.serialize(&mut ser).expect("in-memory serialization");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json writes UTF-8")
}

/// Scientific notation with 16 digits after the point.
pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(sig17(v).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// SHA-256 over the command name, each named input and the canonical
/// options, NUL-separated.
pub fn digest(command: &str, inputs: &[(&str, &[u8])], options: &Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    for (name, bytes) in inputs {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(bytes);
        h.update([0]);
    }
    h.update(options.to_string().as_bytes());
    hex::encode(h.finalize())
}
