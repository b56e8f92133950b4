//! Result tables and their CSV, JSON and plot-data renderings.
//!
//! Every table has a fixed column set per name. Rendered rows are prefixed
//! with the scenario name, the operation and the scenario hash, so a row read
//! in isolation still names its provenance.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::CliError;

/// Columns shared by every rendered row.
pub const PREFIX: [&str; 3] = ["scenario", "operation", "config_hash"];

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    /// Not applicable to this row.
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    /// 17 significant digits so that the value round-trips.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => "NaN".into(),
            Cell::Num(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => quote(s),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map(Value::Number).unwrap_or_else(|| Value::String(self.render())),
            Cell::Int(n) => Value::from(*n),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Empty => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(n) => Some(*n as f64),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map(Into::into).unwrap_or(Cell::Empty)
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Rows of one fixed column set.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&'static str]) -> Self {
        Table { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| *c == name)
    }

    /// Values of a numeric column, `None` where the cell is not a number.
    pub fn numbers(&self, name: &str) -> Vec<Option<f64>> {
        match self.column(name) {
            Some(j) => self.rows.iter().map(|r| r[j].as_f64()).collect(),
            None => Vec::new(),
        }
    }
}

/// A check whose outcome decides the exit status.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), pass, detail: detail.into() }
    }
}

/// Plot-ready numeric text: whitespace-separated columns, `#` header.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub file: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotData {
    pub fn new(file: impl Into<String>, columns: &[&'static str]) -> Self {
        PlotData { file: file.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn render(&self) -> String {
        let mut s = format!("# {}\n", self.columns.join(" "));
        for r in &self.rows {
            let line: Vec<String> = r.iter().map(|x| format!("{x:.16e}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Provenance attached to every rendered row.
#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub scenario: String,
    pub config_hash: String,
}

pub fn render_csv(table: &Table, operation: &str, prov: &Provenance) -> String {
    let mut s = String::new();
    let header: Vec<&str> = PREFIX.iter().copied().chain(table.columns.iter().copied()).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in &table.rows {
        let _ = write!(s, "{},{},{}", quote(&prov.scenario), quote(operation), prov.config_hash);
        for c in row {
            s.push(',');
            s.push_str(&c.render());
        }
        s.push('\n');
    }
    s
}

pub fn render_json(table: &Table, operation: &str, prov: &Provenance) -> Value {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut m = Map::new();
            m.insert("scenario".into(), Value::String(prov.scenario.clone()));
            m.insert("operation".into(), Value::String(operation.into()));
            m.insert("config_hash".into(), Value::String(prov.config_hash.clone()));
            for (c, v) in table.columns.iter().zip(row) {
                m.insert((*c).into(), v.json());
            }
            Value::Object(m)
        })
        .collect();
    serde_json::json!({ "table": table.name, "columns": table.columns, "rows": rows })
}

pub fn write_table(dir: &Path, table: &Table, operation: &str, prov: &Provenance) -> Result<(), CliError> {
    std::fs::write(dir.join(format!("{}.csv", table.name)), render_csv(table, operation, prov))?;
    let json = serde_json::to_string_pretty(&render_json(table, operation, prov)).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(dir.join(format!("{}.json", table.name)), json + "\n")?;
    Ok(())
}

pub fn write_plot(dir: &Path, plot: &PlotData) -> Result<(), CliError> {
    std::fs::write(dir.join(&plot.file), plot.render())?;
    Ok(())
}

/// A gnuplot script drawing every plot file against its first column.
pub fn gnuplot_script(plots: &[PlotData]) -> String {
    let mut s = String::from("set terminal pngcairo size 900,600\nset grid\n");
    for p in plots {
        let stem = p.file.trim_end_matches(".dat");
        let _ = writeln!(s, "set output '{stem}.png'");
        let _ = writeln!(s, "set xlabel '{}'", p.columns[0]);
        let curves: Vec<String> = (2..=p.columns.len())
            .map(|j| format!("'{}' using 1:{j} with linespoints title '{}'", p.file, p.columns[j - 1]))
            .collect();
        let _ = writeln!(s, "plot {}", curves.join(", "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_fixed_width_scientific_and_quotes_text() {
        assert_eq!(Cell::Num(0.1).render(), "1.0000000000000001e-1");
        assert_eq!(Cell::Num(-2.0).render(), "-2.0000000000000000e0");
        assert_eq!(Cell::text("a, b").render(), "\"a, b\"");
        let x: f64 = Cell::Num(std::f64::consts::PI).render().parse().unwrap();
        assert_eq!(x, std::f64::consts::PI);
    }

    #[test]
    fn csv_has_prefix_and_header() {
        let mut t = Table::new("demo", &["x", "ok"]);
        t.push(vec![1.5.into(), true.into()]);
        let p = Provenance { scenario: "s".into(), config_hash: "h".into() };
        let csv = render_csv(&t, "op", &p);
        assert_eq!(csv, "scenario,operation,config_hash,x,ok\ns,op,h,1.5000000000000000e0,true\n");
        let j = render_json(&t, "op", &p);
        assert_eq!(j["rows"][0]["x"], 1.5);
        let empty = Table::new("e", &["x"]);
        assert_eq!(render_csv(&empty, "op", &p).lines().count(), 1);
    }
}
