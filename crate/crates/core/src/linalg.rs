//! Dense real vectors and row-major matrices.
//!
//! Every public constructor rejects empty or non-finite data, and every
//! arithmetic routine re-checks finiteness of what it produces, so a NaN can
//! never travel silently from one module into another.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_finite(data: &[f64], what: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// A non-empty vector of finite `f64` values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Empty("vector"));
        }
        check_finite(&data, "vector construction")?;
        Ok(Self(data))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn filled(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for clippy's `len_without_is_empty`.
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Mutable access for in-place kernels. Callers must restore finiteness;
    /// use [`RealVector::check`] afterwards when in doubt.
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub(crate) fn check(&self, what: &'static str) -> Result<()> {
        check_finite(&self.0, what)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(value: Vec<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for RealVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Returns `alpha * x + y`.
pub fn axpy(alpha: f64, x: &RealVector, y: &RealVector) -> Result<RealVector> {
    if x.len() != y.len() {
        return Err(Error::dim(format!("axpy: {} vs {}", x.len(), y.len())));
    }
    let out: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| alpha * a + b).collect();
    check_finite(&out, "axpy")?;
    Ok(RealVector(out))
}

pub fn squared_norm(x: &RealVector) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn dot(x: &RealVector, y: &RealVector) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::dim(format!("dot: {} vs {}", x.len(), y.len())));
    }
    Ok(dot_slices(x.as_slice(), y.as_slice()))
}

#[inline]
pub(crate) fn dot_slices(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// `y += alpha * x` on raw slices of equal length.
#[inline]
pub(crate) fn axpy_in_place(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty("matrix"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        check_finite(&data, "matrix construction")?;
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::dim("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub(crate) fn check(&self, what: &'static str) -> Result<()> {
        check_finite(&self.data, what)
    }
}

pub fn matvec(a: &RealMatrix, x: &RealVector) -> Result<RealVector> {
    if a.cols() != x.len() {
        return Err(Error::dim(format!(
            "matvec: matrix has {} columns, vector has {} entries",
            a.cols(),
            x.len()
        )));
    }
    let out: Vec<f64> = (0..a.rows()).map(|r| dot_slices(a.row(r), x.as_slice())).collect();
    check_finite(&out, "matvec")?;
    Ok(RealVector(out))
}
