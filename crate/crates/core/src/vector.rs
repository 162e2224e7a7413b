//! Unit vectors on the sphere and the dense similarity computations built on them.

use std::ops::Deref;

use crate::error::{CokeError, Result};

/// Norm below which a vector cannot be given a direction.
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Tolerance on unit-norm checks.
pub const UNIT_TOL: f64 = 1e-6;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// A feature vector with unit Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps values that are already unit-norm. Renormalizes when drift exceeds [`UNIT_TOL`].
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        let n = norm(&values);
        if (n - 1.0).abs() <= UNIT_TOL {
            Ok(UnitVector(values))
        } else {
            normalize(&values)
        }
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for UnitVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Scale `v` to unit length, preserving its direction.
pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    if v.is_empty() {
        return Err(CokeError::Shape { expected: 1, got: 0 });
    }
    let n = norm(v);
    if !(n >= DEGENERATE_NORM) || !n.is_finite() {
        return Err(CokeError::DegenerateVector { norm: n });
    }
    Ok(UnitVector(v.iter().map(|x| x / n).collect()))
}

/// Similarities of one instance against every center.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityRow(pub Vec<f64>);

impl Deref for SimilarityRow {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// `k`-th entry is `dot(x, centers[k])`.
pub fn similarity_row(x: &[f64], centers: &[UnitVector]) -> Result<SimilarityRow> {
    let mut out = Vec::with_capacity(centers.len());
    for c in centers {
        if c.dim() != x.len() {
            return Err(CokeError::Shape { expected: c.dim(), got: x.len() });
        }
        out.push(dot(x, c));
    }
    Ok(SimilarityRow(out))
}

/// Dense row-major `n x k` similarity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        let n = rows.len();
        let mut data = Vec::with_capacity(n * k);
        for r in rows {
            if r.len() != k {
                return Err(CokeError::Shape { expected: k, got: r.len() });
            }
            data.extend(r);
        }
        Ok(Self { n, k, data })
    }

    pub fn compute(points: &[UnitVector], centers: &[UnitVector]) -> Result<Self> {
        let mut data = Vec::with_capacity(points.len() * centers.len());
        for p in points {
            data.extend(similarity_row(p, centers)?.0);
        }
        Ok(Self { n: points.len(), k: centers.len(), data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[i * self.k + k]
    }

    /// `Σ_i S[i, labels[i]]`.
    pub fn total(&self, labels: &[usize]) -> f64 {
        labels.iter().enumerate().map(|(i, &l)| self.get(i, l)).sum()
    }
}
