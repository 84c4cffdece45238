//! Table schema: ordered column declarations plus optional label and split
//! column names. Schemas are stored on disk as a TOML document.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub columns: Vec<Column>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_column: Option<String>,
}

impl TableSchema {
    pub fn new(columns: Vec<Column>) -> Self {
        TableSchema { columns, label_column: None, split_column: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::config("schema declares no columns"));
        }
        for (i, col) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|c| c.name == col.name) {
                return Err(Error::config(format!("duplicate column name {}", col.name)));
            }
        }
        for (role, name) in [("label_column", &self.label_column), ("split_column", &self.split_column)]
        {
            if let Some(name) = name {
                match self.column_index(name) {
                    None => {
                        return Err(Error::config(format!("{role} {name} is not a schema column")))
                    }
                    Some(i) if self.columns[i].kind != ColumnKind::Categorical => {
                        return Err(Error::config(format!("{role} {name} must be categorical")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn n_numeric(&self) -> usize {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Numeric).count()
    }

    pub fn n_categorical(&self) -> usize {
        self.columns.iter().filter(|c| c.kind == ColumnKind::Categorical).count()
    }

    pub fn numeric_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Numeric)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn categorical_indices(&self) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind == ColumnKind::Categorical)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: TableSchema =
            toml::from_str(text).map_err(|e| Error::load(format!("schema parse: {e}")))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| {
            Error::load(format!("cannot read schema {}: {e}", path.as_ref().display()))
        })?;
        Self::from_toml(&text)
    }
}
