use std::io::Write;

use crate::dataset::ClassLabel;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major feature matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<T> {
    values: Vec<T>,
    rows: usize,
    cols: usize,
    labels: Vec<ClassLabel>,
    column_names: Vec<String>,
}

impl<T: Scalar> DesignMatrix<T> {
    pub fn new(
        values: Vec<T>,
        cols: usize,
        labels: Vec<ClassLabel>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidParam("matrix needs at least one column".into()));
        }
        if !values.len().is_multiple_of(cols) {
            return Err(Error::Dimension {
                expected: cols,
                found: values.len() % cols,
            });
        }
        let rows = values.len() / cols;
        if labels.len() != rows {
            return Err(Error::Length {
                left: rows,
                right: labels.len(),
            });
        }
        if column_names.len() != cols {
            return Err(Error::Length {
                left: cols,
                right: column_names.len(),
            });
        }
        Ok(DesignMatrix {
            values,
            rows,
            cols,
            labels,
            column_names,
        })
    }

    /// Builds a matrix from nested rows with generated column names `x0..`.
    pub fn from_rows(rows: &[Vec<T>], labels: Vec<ClassLabel>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Dimension {
                expected: cols,
                found: bad.len(),
            });
        }
        let values = rows.iter().flatten().copied().collect();
        let names = (0..cols).map(|j| format!("x{j}")).collect();
        Self::new(values, cols, labels, names)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks_exact(self.cols)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn labels(&self) -> &[ClassLabel] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = T> + '_ {
        self.rows().map(move |r| r[j])
    }

    pub fn subset_rows(&self, indices: &[usize]) -> DesignMatrix<T> {
        let mut values = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        DesignMatrix {
            values,
            rows: indices.len(),
            cols: self.cols,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            column_names: self.column_names.clone(),
        }
    }

    pub fn ensure_cols(&self, expected: usize) -> Result<()> {
        if self.cols != expected {
            return Err(Error::Dimension {
                expected,
                found: self.cols,
            });
        }
        Ok(())
    }

    /// Headered CSV: one column per feature plus a trailing `label` column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{},label", self.column_names.join(","))?;
        for (row, label) in self.rows().zip(&self.labels) {
            let mut line = String::with_capacity(row.len() * 4);
            for v in row {
                line.push_str(&v.to_string());
                line.push(',');
            }
            line.push_str(label.name());
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
