//! Dense row-major feature matrices with named columns.

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    names: Vec<String>,
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, MlError> {
        let width = names.len();
        let n = rows.len();
        let mut data = Vec::with_capacity(n * width);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != width {
                return Err(MlError::Shape(format!(
                    "row {i} has {} values, expected {width}",
                    r.len()
                )));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(MlError::Shape(format!("row {i}, column {:?} is not finite", names[j])));
            }
            data.extend(r);
        }
        Ok(FeatureMatrix { names, rows: n, data })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.n_cols();
        &self.data[i * w..(i + 1) * w]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// New matrix holding the named columns in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix, MlError> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| MlError::UnknownFeature(n.clone())))
            .collect::<Result<_, _>>()?;
        let mut data = Vec::with_capacity(self.rows * idx.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(idx.iter().map(|&j| r[j]));
        }
        Ok(FeatureMatrix {
            names: names.to_vec(),
            rows: self.rows,
            data,
        })
    }
}
