//! In-memory tabular data: row-major cells plus per-column category
//! vocabularies built in first-appearance order.

use std::path::Path;

use crate::data::schema::{ColumnKind, TableSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<u32> {
        match self {
            Cell::Cat(v) => Some(*v),
            Cell::Num(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableData {
    pub schema: TableSchema,
    rows: Vec<Vec<Cell>>,
    /// Per column: category strings in first-appearance order. Empty for
    /// numeric columns.
    vocab: Vec<Vec<String>>,
}

impl TableData {
    pub fn from_rows(schema: TableSchema, rows: Vec<Vec<Cell>>, vocab: Vec<Vec<String>>) -> Result<Self> {
        schema.validate()?;
        if vocab.len() != schema.columns.len() {
            return Err(Error::shape("vocab list length does not match column count".to_string()));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.columns.len() {
                return Err(Error::shape(format!("row {r} has {} cells", row.len())));
            }
            for (c, cell) in row.iter().enumerate() {
                match (schema.columns[c].kind, cell) {
                    (ColumnKind::Numeric, Cell::Num(_)) => {}
                    (ColumnKind::Categorical, Cell::Cat(id)) => {
                        if *id as usize >= vocab[c].len() {
                            return Err(Error::shape(format!(
                                "category id {id} out of range for column {}",
                                schema.columns[c].name
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::shape(format!(
                            "cell kind mismatch at row {r}, column {}",
                            schema.columns[c].name
                        )))
                    }
                }
            }
        }
        Ok(TableData { schema, rows, vocab })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, idx: usize) -> &[Cell] {
        &self.rows[idx]
    }

    pub fn vocab(&self, col: usize) -> &[String] {
        &self.vocab[col]
    }

    pub fn vocabs(&self) -> &[Vec<String>] {
        &self.vocab
    }

    pub fn category_name(&self, col: usize, id: u32) -> &str {
        &self.vocab[col][id as usize]
    }

    pub fn numeric_column(&self, col: usize) -> Result<Vec<f64>> {
        if self.schema.columns[col].kind != ColumnKind::Numeric {
            return Err(Error::config(format!("{} is not numeric", self.schema.columns[col].name)));
        }
        Ok(self.rows.iter().map(|r| r[col].as_num().unwrap()).collect())
    }

    pub fn cat_column(&self, col: usize) -> Result<Vec<u32>> {
        if self.schema.columns[col].kind != ColumnKind::Categorical {
            return Err(Error::config(format!(
                "{} is not categorical",
                self.schema.columns[col].name
            )));
        }
        Ok(self.rows.iter().map(|r| r[col].as_cat().unwrap()).collect())
    }

    /// New table holding only the given row indices; vocab is shared as-is.
    pub fn subset(&self, indices: &[usize]) -> TableData {
        TableData {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            vocab: self.vocab.clone(),
        }
    }
}

/// Loads an RFC-4180 CSV with header row under the given schema. Header
/// matching is order-insensitive; category vocabularies are built in
/// first-appearance order; numeric parse failures cite the data row number.
pub fn load_csv(path: impl AsRef<Path>, schema: &TableSchema) -> Result<TableData> {
    schema.validate()?;
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::load(format!("cannot open {}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::load(format!("{}: cannot read header: {e}", path.display())))?
        .clone();
    let mut col_pos = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        let pos = headers
            .iter()
            .position(|h| h == col.name)
            .ok_or_else(|| Error::load(format!("{}: missing column {}", path.display(), col.name)))?;
        col_pos.push(pos);
    }

    let mut vocab: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 1;
        let record =
            record.map_err(|e| Error::load(format!("{}: row {row_no}: {e}", path.display())))?;
        let mut row = Vec::with_capacity(schema.columns.len());
        for (c, col) in schema.columns.iter().enumerate() {
            let raw = record.get(col_pos[c]).ok_or_else(|| {
                Error::load(format!("{}: row {row_no}: missing cell in column {}", path.display(), col.name))
            })?;
            match col.kind {
                ColumnKind::Numeric => {
                    let v: f64 = raw.trim().parse().map_err(|_| {
                        Error::load(format!(
                            "{}: row {row_no}: cannot parse {raw:?} as numeric in column {}",
                            path.display(),
                            col.name
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::load(format!(
                            "{}: row {row_no}: non-finite numeric value in column {}",
                            path.display(),
                            col.name
                        )));
                    }
                    row.push(Cell::Num(v));
                }
                ColumnKind::Categorical => {
                    if raw.is_empty() {
                        return Err(Error::load(format!(
                            "{}: row {row_no}: missing categorical cell in column {}",
                            path.display(),
                            col.name
                        )));
                    }
                    let id = match vocab[c].iter().position(|s| s == raw) {
                        Some(i) => i as u32,
                        None => {
                            vocab[c].push(raw.to_string());
                            (vocab[c].len() - 1) as u32
                        }
                    };
                    row.push(Cell::Cat(id));
                }
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::load(format!("{}: no data rows", path.display())));
    }
    Ok(TableData { schema: schema.clone(), rows, vocab })
}
