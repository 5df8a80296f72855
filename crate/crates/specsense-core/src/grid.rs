//! Dense row-major matrix and physical axis metadata shared by the
//! spectrogram and occupancy types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A uniformly spaced physical axis: `value(i) = start + i * step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    /// Physical value of index 0 (bin center).
    pub start: f64,
    /// Spacing between consecutive indices.
    pub step: f64,
}

impl Axis {
    pub fn new(start: f64, step: f64) -> Self {
        Self { start, step }
    }

    /// Physical value at index `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    /// Index of the bin whose center is nearest to `v`.
    pub fn nearest(&self, v: f64) -> i64 {
        ((v - self.start) / self.step).round() as i64
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Clone + Default> Matrix<T> {
    /// Matrix filled with `T::default()`.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::default(); rows * cols] }
    }
}

impl<T> Matrix<T> {
    /// Build from a flat row-major vector. Errors when the length does not
    /// factor as `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidArgument(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Flat row-major view of the data.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Consume into the flat row-major vector.
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Elementwise map preserving the shape.
    pub fn map<U, F: FnMut(&T) -> U>(&self, mut f: F) -> Matrix<U> {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(&mut f).collect() }
    }
}
