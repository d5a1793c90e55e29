use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Map, Value};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Seed shown in headers; `None` for commands that draw no random numbers.
pub fn header(seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# blindbounds {VERSION} seed={s}\n"),
        None => format!("# blindbounds {VERSION} seed=none\n"),
    }
}

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(seed: Option<u64>, columns: &[&str]) -> Self {
        let mut text = header(seed);
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let line: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Wraps a JSON payload with the generator version and seed.
pub fn json_document(seed: Option<u64>, body: Value) -> String {
    let mut doc = Map::new();
    doc.insert("generator".into(), json!(format!("blindbounds {VERSION}")));
    doc.insert("seed".into(), seed.map_or(Value::Null, Value::from));
    match body {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values always serialize");
    text.push('\n');
    text
}

pub fn emit(path: Option<&Path>, text: &str) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, text),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
