//! Writing JSON values as json, jsonl or csv.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Jsonl,
    Csv,
}

/// Stdout, or a file when a path is given.
pub fn sink(out: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `dir/stem.suffix` for an output path `dir/stem.ext`.
pub fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.{suffix}"))
}

/// Arrays become one record per element; anything else is one record.
pub fn write_value(w: &mut dyn Write, value: &Value, format: Format) -> anyhow::Result<()> {
    let rows: Vec<&Value> = match value {
        Value::Array(items) => items.iter().collect(),
        v => vec![v],
    };
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
        }
        Format::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut *w, r)?;
                writeln!(w)?;
            }
        }
        Format::Csv => write_csv(w, &rows)?,
    }
    w.flush()?;
    Ok(())
}

/// Columns are the union of top-level keys in first-seen order; nested
/// values are written as compact JSON.
fn write_csv(w: &mut dyn Write, rows: &[&Value]) -> anyhow::Result<()> {
    let mut columns: Vec<&str> = Vec::new();
    for r in rows {
        if let Value::Object(map) = r {
            for k in map.keys() {
                if !columns.contains(&k.as_str()) {
                    columns.push(k);
                }
            }
        }
    }
    let mut out = csv::Writer::from_writer(w);
    if columns.is_empty() {
        out.write_record(["value"])?;
        for r in rows {
            out.write_record([cell(r)])?;
        }
    } else {
        out.write_record(&columns)?;
        for r in rows {
            out.write_record(
                columns
                    .iter()
                    .map(|c| r.get(c).map(cell).unwrap_or_default()),
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Bool(_) | Value::Number(_) => v.to_string(),
        _ => serde_json::to_string(v).unwrap_or_default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn render(v: &Value, f: Format) -> String {
        let mut buf = Vec::new();
        write_value(&mut buf, v, f).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_takes_the_union_of_keys() {
        let v = json!([{"a": 1, "b": "x,y"}, {"a": 2, "c": [1, 2]}]);
        assert_eq!(render(&v, Format::Csv), "a,b,c\n1,\"x,y\",\n2,,\"[1,2]\"\n");
    }

    #[test]
    fn jsonl_writes_one_line_per_element() {
        let v = json!([{"a": 1}, {"a": 2}]);
        assert_eq!(render(&v, Format::Jsonl), "{\"a\":1}\n{\"a\":2}\n");
        assert_eq!(render(&json!({"a": 1}), Format::Jsonl), "{\"a\":1}\n");
    }

    #[test]
    fn sibling_replaces_the_extension() {
        let p = sibling(Path::new("/tmp/out/report.json"), "long.csv");
        assert_eq!(p, PathBuf::from("/tmp/out/report.long.csv"));
    }
}
