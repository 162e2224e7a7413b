//! In-memory data sets: raw rows with contiguous ids and optional ground truth.

use crate::error::{CokeError, Result};
use crate::vector::{normalize, UnitVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    rows: Vec<Vec<f64>>,
    truth: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map(Vec::len).ok_or_else(|| CokeError::Config("data set must contain at least one row".into()))?;
        if dim == 0 {
            return Err(CokeError::Config("rows must have at least one component".into()));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(CokeError::Shape { expected: dim, got: bad.len() });
        }
        Ok(Self { dim, rows, truth: None })
    }

    pub fn with_truth(mut self, truth: Vec<usize>) -> Result<Self> {
        if truth.len() != self.rows.len() {
            return Err(CokeError::Shape { expected: self.rows.len(), got: truth.len() });
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.rows[id]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn truth(&self) -> Option<&[usize]> {
        self.truth.as_deref()
    }

    /// Rows scaled to unit norm, for clustering raw features directly.
    pub fn normalized(&self) -> Result<Vec<UnitVector>> {
        self.rows.iter().map(|r| normalize(r)).collect()
    }
}
