//! Result tables and their CSV/JSON encodings.
//!
//! Numbers are written as `{:.16e}` (17 significant digits), which parses
//! back to the identical `f64`. Missing values are empty CSV cells or JSON
//! `null`.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Read, Write};
use std::path::Path;

use serde_json::Value;

use super::config::Format;

/// Column description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub unit: String,
    /// Where the numbers come from: `input`, `formula`, `state-evolution`,
    /// `oracle` or `mc(seed=N)`.
    pub provenance: String,
}

impl Column {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, provenance: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            provenance: provenance.into(),
        }
    }

    pub fn header(&self) -> String {
        format!("{}[{}]", self.name, self.unit)
    }
}

/// One output row; `status` is `ok` or a description of what went wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub values: Vec<Option<f64>>,
    pub status: String,
}

/// Tabular sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    /// Ordered `key: value` metadata.
    pub metadata: Vec<(String, String)>,
    /// Resolved configuration that reproduces the table.
    pub config: String,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

/// Malformed table input.
#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed table: {0}")]
    Format(String),
}

impl ResultTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of the named column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r.values[i]).collect())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn number(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_number(cell: &str) -> Result<Option<f64>, TableError> {
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse()
        .map(Some)
        .map_err(|_| TableError::Format(format!("`{cell}` is not a number")))
}

/// Writes `# key: value` metadata, `# provenance|` and `# config|` comment
/// lines, a `name[unit]` header ending in `status`, then the rows.
pub fn write_csv<W: Write>(table: &ResultTable, mut out: W) -> io::Result<()> {
    for (k, v) in &table.metadata {
        writeln!(out, "# {k}: {v}")?;
    }
    for c in &table.columns {
        writeln!(out, "# provenance| {}={}", c.name, c.provenance)?;
    }
    for line in table.config.lines() {
        writeln!(out, "# config| {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = table.columns.iter().map(Column::header).collect();
    header.push("status".into());
    w.write_record(&header)?;
    for row in &table.rows {
        let mut cells: Vec<String> = row.values.iter().map(|v| v.map(number).unwrap_or_default()).collect();
        cells.push(row.status.clone());
        w.write_record(&cells)?;
    }
    w.flush()
}

/// Reads a table written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<ResultTable, TableError> {
    let mut metadata = Vec::new();
    let mut provenance = Vec::new();
    let mut config = String::new();
    let mut body = String::new();
    for line in io::BufReader::new(input).lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("# config| ") {
            config.push_str(rest);
            config.push('\n');
        } else if line == "# config|" {
            config.push('\n');
        } else if let Some(rest) = line.strip_prefix("# provenance| ") {
            let (name, p) = rest
                .split_once('=')
                .ok_or_else(|| TableError::Format(format!("bad provenance line `{line}`")))?;
            provenance.push((name.to_string(), p.to_string()));
        } else if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest
                .split_once(": ")
                .ok_or_else(|| TableError::Format(format!("bad metadata line `{line}`")))?;
            metadata.push((k.to_string(), v.to_string()));
        } else {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let header = reader.headers()?.clone();
    let n = header.len();
    if n == 0 || &header[n - 1] != "status" {
        return Err(TableError::Format("last column must be `status`".into()));
    }
    let columns = header
        .iter()
        .take(n - 1)
        .map(|h| {
            let (name, unit) = h
                .strip_suffix(']')
                .and_then(|h| h.split_once('['))
                .ok_or_else(|| TableError::Format(format!("header `{h}` is not name[unit]")))?;
            let prov = provenance
                .iter()
                .find(|(c, _)| c == name)
                .map(|(_, p)| p.clone())
                .unwrap_or_default();
            Ok(Column::new(name, unit, prov))
        })
        .collect::<Result<Vec<_>, TableError>>()?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let values = rec
            .iter()
            .take(n - 1)
            .map(parse_number)
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Row {
            values,
            status: rec[n - 1].to_string(),
        });
    }
    Ok(ResultTable {
        metadata,
        config,
        columns,
        rows,
    })
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

/// Writes `{metadata, config, columns, rows, status}`.
pub fn write_json<W: Write>(table: &ResultTable, mut out: W) -> io::Result<()> {
    let mut s = String::from("{\n  \"metadata\": {");
    for (i, (k, v)) in table.metadata.iter().enumerate() {
        let sep = if i == 0 { "" } else { "," };
        let _ = write!(s, "{sep}\n    {}: {}", json_string(k), json_string(v));
    }
    s.push_str("\n  },\n");
    let _ = writeln!(s, "  \"config\": {},", json_string(&table.config));
    s.push_str("  \"columns\": [");
    for (i, c) in table.columns.iter().enumerate() {
        let sep = if i == 0 { "" } else { "," };
        let _ = write!(
            s,
            "{sep}\n    {{\"name\": {}, \"unit\": {}, \"provenance\": {}}}",
            json_string(&c.name),
            json_string(&c.unit),
            json_string(&c.provenance)
        );
    }
    s.push_str("\n  ],\n  \"rows\": [");
    for (i, r) in table.rows.iter().enumerate() {
        let sep = if i == 0 { "" } else { "," };
        let cells: Vec<String> = r
            .values
            .iter()
            .map(|v| match v {
                Some(x) if x.is_finite() => number(*x),
                _ => "null".into(),
            })
            .collect();
        let _ = write!(s, "{sep}\n    [{}]", cells.join(", "));
    }
    s.push_str("\n  ],\n  \"status\": [");
    for (i, r) in table.rows.iter().enumerate() {
        let sep = if i == 0 { "" } else { ", " };
        let _ = write!(s, "{sep}{}", json_string(&r.status));
    }
    s.push_str("]\n}\n");
    out.write_all(s.as_bytes())
}

fn field<'a>(v: &'a Value, key: &str) -> Result<&'a Value, TableError> {
    v.get(key).ok_or_else(|| TableError::Format(format!("missing `{key}`")))
}

fn text(v: &Value) -> Result<String, TableError> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| TableError::Format(format!("expected a string, got {v}")))
}

/// Reads a table written by [`write_json`].
pub fn read_json<R: Read>(input: R) -> Result<ResultTable, TableError> {
    let v: Value = serde_json::from_reader(input)?;
    let metadata = field(&v, "metadata")?
        .as_object()
        .ok_or_else(|| TableError::Format("`metadata` must be an object".into()))?
        .iter()
        .map(|(k, v)| Ok((k.clone(), text(v)?)))
        .collect::<Result<Vec<_>, TableError>>()?;
    let columns = field(&v, "columns")?
        .as_array()
        .ok_or_else(|| TableError::Format("`columns` must be an array".into()))?
        .iter()
        .map(|c| {
            Ok(Column::new(
                text(field(c, "name")?)?,
                text(field(c, "unit")?)?,
                text(field(c, "provenance")?)?,
            ))
        })
        .collect::<Result<Vec<_>, TableError>>()?;
    let status = field(&v, "status")?
        .as_array()
        .ok_or_else(|| TableError::Format("`status` must be an array".into()))?;
    let rows = field(&v, "rows")?
        .as_array()
        .ok_or_else(|| TableError::Format("`rows` must be an array".into()))?
        .iter()
        .zip(status)
        .map(|(r, s)| {
            let values = r
                .as_array()
                .ok_or_else(|| TableError::Format("row must be an array".into()))?
                .iter()
                .map(|x| match x {
                    Value::Null => Ok(None),
                    x => x
                        .as_f64()
                        .map(Some)
                        .ok_or_else(|| TableError::Format(format!("`{x}` is not a number"))),
                })
                .collect::<Result<Vec<_>, TableError>>()?;
            if values.len() != columns.len() {
                return Err(TableError::Format("row length differs from column count".into()));
            }
            Ok(Row { values, status: text(s)? })
        })
        .collect::<Result<Vec<_>, TableError>>()?;
    Ok(ResultTable {
        metadata,
        config: text(field(&v, "config")?)?,
        columns,
        rows,
    })
}

/// Encodes `table` in `format` into `out`.
pub fn write_to<W: Write>(table: &ResultTable, format: Format, out: W) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(table, out),
        Format::Json => write_json(table, out),
    }
}

/// Writes `table` to `path`, or to standard output when `path` is `None`.
pub fn write_table(table: &ResultTable, format: Format, path: Option<&Path>) -> io::Result<()> {
    match path {
        Some(p) => {
            let mut buf = Vec::new();
            write_to(table, format, &mut buf)?;
            fs::write(p, buf)
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_to(table, format, &mut lock)?;
            lock.flush()
        }
    }
}

/// Reads a table from `path`, choosing the decoder from `format`.
pub fn read_table(path: &Path, format: Format) -> Result<ResultTable, TableError> {
    let f = fs::File::open(path)?;
    match format {
        Format::Csv => read_csv(f),
        Format::Json => read_json(f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResultTable {
        ResultTable {
            metadata: vec![("tool".into(), "whichpath".into()), ("seed".into(), "3".into())],
            config: "quantity = \"absorption\"\n\n[params]\ngamma_dt = 0.1\n".into(),
            columns: vec![
                Column::new("gamma_dt", "1", "input"),
                Column::new("delta_p", "hbar_omega0", "formula"),
            ],
            rows: vec![Row {
                values: vec![Some(0.1), Some(std::f64::consts::PI / 7.0)],
                status: "ok".into(),
            }],
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("gamma_dt[1],delta_p[hbar_omega0],status"));
        assert!(text.contains("1.0000000000000001e-1,"));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let mut t = sample();
        t.rows.push(Row {
            values: vec![Some(-1.0e-300), None],
            status: "degenerate: p = 0".into(),
        });
        let mut buf = Vec::new();
        write_json(&t, &mut buf).unwrap();
        let back = read_json(buf.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn empty_table_has_header_and_metadata() {
        let mut t = sample();
        t.rows.clear();
        let mut buf = Vec::new();
        write_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# tool: whichpath\n"));
        assert!(text.ends_with("gamma_dt[1],delta_p[hbar_omega0],status\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn malformed_input() {
        assert!(read_csv("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_csv("x[1],status\nfoo,ok\n".as_bytes()).is_err());
        assert!(read_json("{}".as_bytes()).is_err());
    }
}
