//! Result files: CSV and JSON encoding with explicit infinities.

use std::fs;
use std::io::Write;

use serde_json::{json, Value};

use crate::config::Output;
use crate::error::{CliError, CliResult};

/// JSON number, with infinities as `{"value": null, "infinite": true}`.
pub fn json_f64(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_infinite() {
        if x > 0.0 {
            json!({ "value": null, "infinite": true })
        } else {
            json!({ "value": null, "infinite": true, "negative": true })
        }
    } else {
        Value::Null
    }
}

/// CSV field for a float; infinities are the literal `inf` / `-inf`.
pub fn csv_f64(x: f64) -> String {
    if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        x.to_string()
    }
}

/// Builds a CSV document in memory.
pub fn csv_document(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn json_document(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Writes every named file into the output directory, or only `primary` to
/// stdout when the output is `-`.
pub fn emit(out: &Output, files: &[(&str, String)], primary: &str) -> CliResult<()> {
    match out {
        Output::Stdout => {
            let (_, body) = files
                .iter()
                .find(|(name, _)| *name == primary)
                .expect("primary file is among the outputs");
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(body.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
        Output::Dir(dir) => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            for (name, body) in files {
                let path = dir.join(name);
                fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
            }
            eprintln!("wrote {} file(s) to {}", files.len(), dir.display());
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinities() {
        assert_eq!(json_f64(f64::INFINITY), json!({"value": null, "infinite": true}));
        assert_eq!(json_f64(1.5), json!(1.5));
        assert_eq!(csv_f64(f64::INFINITY), "inf");
        assert_eq!(csv_f64(0.1), "0.1");
    }

    #[test]
    fn csv_rows() {
        let doc = csv_document(&["a", "b"], [vec!["1".into(), "inf".into()]]).unwrap();
        assert_eq!(doc, "a,b\n1,inf\n");
    }
}
