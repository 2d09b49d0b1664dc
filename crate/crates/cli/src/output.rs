use std::io::Write;

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

/// A command result: one record or a table of rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Record(Vec<(String, Value)>),
    Rows {
        headers: Vec<String>,
        rows: Vec<Vec<Value>>,
    },
}

impl Output {
    pub fn record<K: Into<String>>(fields: impl IntoIterator<Item = (K, Value)>) -> Self {
        Output::Record(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    /// Builds rows from serializable structs, keeping their field order.
    pub fn rows_from<T: serde::Serialize>(items: &[T], headers: &[&str]) -> Self {
        let rows = items
            .iter()
            .map(|item| {
                let v = serde_json::to_value(item).expect("row serializes");
                headers.iter().map(|h| v[*h].clone()).collect()
            })
            .collect();
        Output::Rows {
            headers: headers.iter().map(|h| h.to_string()).collect(),
            rows,
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => self.table(),
            Format::Csv => self.csv(),
            Format::Json => self.json(),
        }
    }

    fn json(&self) -> String {
        let value = match self {
            Output::Record(fields) => Value::Object(fields.iter().cloned().collect::<Map<_, _>>()),
            Output::Rows { headers, rows } => Value::Array(
                rows.iter()
                    .map(|r| {
                        Value::Object(headers.iter().cloned().zip(r.iter().cloned()).collect())
                    })
                    .collect(),
            ),
        };
        let mut s = serde_json::to_string_pretty(&value).expect("json renders");
        s.push('\n');
        s
    }

    fn csv(&self) -> String {
        let (headers, rows): (Vec<String>, Vec<Vec<Value>>) = match self {
            Output::Record(fields) => (
                fields.iter().map(|(k, _)| k.clone()).collect(),
                vec![fields.iter().map(|(_, v)| v.clone()).collect()],
            ),
            Output::Rows { headers, rows } => (headers.clone(), rows.clone()),
        };
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&headers).expect("in-memory write");
        for row in rows {
            w.write_record(row.iter().map(cell))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    fn table(&self) -> String {
        let (headers, rows): (Vec<String>, Vec<Vec<String>>) = match self {
            Output::Record(fields) => (
                vec!["field".into(), "value".into()],
                fields
                    .iter()
                    .map(|(k, v)| vec![k.clone(), cell(v)])
                    .collect(),
            ),
            Output::Rows { headers, rows } => (
                headers.clone(),
                rows.iter().map(|r| r.iter().map(cell).collect()).collect(),
            ),
        };
        let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = Vec::new();
        for line in std::iter::once(&headers).chain(&rows) {
            let cells: Vec<String> = line
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:<w$}"))
                .collect();
            writeln!(out, "{}", cells.join("  ").trim_end()).expect("in-memory write");
        }
        String::from_utf8(out).expect("utf-8")
    }
}

/// Plain text of a value: shortest round-trip numbers, empty for null.
pub fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn record_formats() {
        let o = Output::record([("a", json!(1.5)), ("b", Value::Null), ("c", json!("x"))]);
        assert_eq!(o.render(Format::Csv), "a,b,c\n1.5,,x\n");
        assert_eq!(
            o.render(Format::Table),
            "field  value\na      1.5\nb\nc      x\n"
        );
        assert_eq!(
            o.render(Format::Json),
            "{\n  \"a\": 1.5,\n  \"b\": null,\n  \"c\": \"x\"\n}\n"
        );
    }

    #[test]
    fn rows_keep_header_order() {
        #[derive(serde::Serialize)]
        struct R {
            x: f64,
            y: Option<u64>,
        }
        let o = Output::rows_from(
            &[R { x: 0.1, y: Some(3) }, R { x: 2.0, y: None }],
            &["y", "x"],
        );
        assert_eq!(o.render(Format::Csv), "y,x\n3,0.1\n,2.0\n");
    }
}
