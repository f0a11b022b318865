//! Dense column-major matrix used for factor loadings, activations, and
//! latent count tables. Column-major because nearly every access pattern in
//! the sampler is per-factor (a column of loadings) or per-document (a
//! column of activations), and those should be contiguous.

use alloc::vec;
use alloc::vec::Vec;

/// Dense `rows x cols` matrix in column-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Copy> Mat<T> {
    /// Matrix with every entry set to `value`.
    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Mat { rows, cols, data: vec![value; rows * cols] }
    }

    /// Matrix taking ownership of column-major `data`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[j * self.rows + i]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }

    pub fn fill(&mut self, value: T) {
        self.data.fill(value);
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterator over column slices.
    pub fn cols_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.rows)
    }

    /// Iterator over mutable column slices.
    pub fn cols_iter_mut(&mut self) -> impl Iterator<Item = &mut [T]> {
        self.data.chunks_exact_mut(self.rows)
    }

    /// Keep only the columns whose flag is set, preserving order.
    pub fn retain_cols(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.cols);
        let rows = self.rows;
        let mut kept = Vec::with_capacity(self.data.len());
        for (j, &flag) in keep.iter().enumerate() {
            if flag {
                kept.extend_from_slice(&self.data[j * rows..(j + 1) * rows]);
            }
        }
        self.cols = kept.len() / rows.max(1);
        self.data = kept;
    }

    /// Keep only the rows whose flag is set, preserving order.
    pub fn retain_rows(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.rows);
        let new_rows = keep.iter().filter(|&&f| f).count();
        let mut kept = Vec::with_capacity(new_rows * self.cols);
        for col in self.data.chunks_exact(self.rows) {
            for (i, &flag) in keep.iter().enumerate() {
                if flag {
                    kept.push(col[i]);
                }
            }
        }
        self.rows = new_rows;
        self.data = kept;
    }
}

impl Mat<f64> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat::filled(rows, cols, 0.0)
    }
}

impl Mat<u32> {
    pub fn zeros_u32(rows: usize, cols: usize) -> Self {
        Mat::filled(rows, cols, 0u32)
    }

    /// Sum of one row across all columns.
    pub fn row_total(&self, i: usize) -> u64 {
        self.cols_iter().map(|c| u64::from(c[i])).sum()
    }

    /// Sum of one column.
    pub fn col_total(&self, j: usize) -> u64 {
        self.col(j).iter().map(|&v| u64::from(v)).sum()
    }

    /// Sum of all entries.
    pub fn total(&self) -> u64 {
        self.data.iter().map(|&v| u64::from(v)).sum()
    }
}
