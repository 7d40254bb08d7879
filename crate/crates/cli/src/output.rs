use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use coupling_geometry::io::{unix_now, write_atomic, SCHEMA_VERSION};
use coupling_geometry::Result;

use crate::{GlobalOpts, OutputFormat};

/// Wraps `payload` (an object) with the schema version, the command name
/// and, unless suppressed, the creation time.
pub fn envelope(global: &GlobalOpts, command: &str, payload: Value) -> Value {
    let mut obj = Map::new();
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    if !global.no_timestamp {
        obj.insert("created_unix".into(), json!(unix_now()));
    }
    obj.insert("seed".into(), json!(global.seed));
    match payload {
        Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("result".into(), other);
        }
    }
    Value::Object(obj)
}

pub fn json_text(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values serialize");
    s.push('\n');
    s
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.iter().map(|f| csv_field(f)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// Prints either the JSON document or the CSV table.
pub fn emit(global: &GlobalOpts, json_doc: &Value, header: &[&str], rows: &[Vec<String>]) {
    match global.format {
        OutputFormat::Json => print!("{}", json_text(json_doc)),
        OutputFormat::Csv => print!("{}", csv_table(header, rows)),
    }
}

pub fn out_dir(global: &GlobalOpts) -> PathBuf {
    global.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
