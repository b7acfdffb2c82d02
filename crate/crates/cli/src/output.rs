//! Deterministic CSV tables.

use std::path::Path;

use crate::CliError;

/// One cell: numbers are printed with 12 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    /// Mechanical amplitude; `None` is the classical controller, printed `inf`.
    Beta(Option<f64>),
}

impl Cell {
    pub fn render(&self) -> String {
        match *self {
            Cell::Num(x) => fmt_num(x),
            Cell::Int(n) => n.to_string(),
            Cell::Beta(Some(b)) => fmt_num(b),
            Cell::Beta(None) => "inf".into(),
        }
    }
}

pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // no negative zero in the output
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row does not match the schema");
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(path, self.to_bytes()).map_err(io)
    }
}
