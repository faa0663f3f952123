//! Dense row-major matrix type used throughout the crate.

use crate::error::{AmpError, Result};

/// Dense row-major real matrix. The universal numeric carrier for batches,
/// weights, logits, and gram matrices.
///
/// Invariants: `data.len() == rows * cols` and every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    /// Build from a flat row-major buffer, validating length and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(AmpError::ShapeMismatch {
                context: "Tensor2D::new",
                expected: format!("{} values ({}x{})", rows * cols, rows, cols),
                actual: format!("{} values", data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(AmpError::NonFinite("Tensor2D::new"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for values already known finite.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(AmpError::ShapeMismatch {
                    context: "Tensor2D::from_rows",
                    expected: format!("{c} columns"),
                    actual: format!("{} columns", row.len()),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Gather the listed rows into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::from_raw(indices.len(), self.cols, data)
    }

    /// `self * other`, shapes (r x k) * (k x c).
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(shape_err("matmul", self, other));
        }
        let (r, k, c) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let a_row = &self.data[i * k..(i + 1) * k];
            let out_row = &mut out[i * c..(i + 1) * c];
            for (t, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[t * c..(t + 1) * c];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_raw(r, c, out))
    }

    /// `self^T * other`, shapes (k x r)^T * (k x c).
    pub fn tr_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(shape_err("tr_matmul", self, other));
        }
        let (k, r, c) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; r * c];
        for t in 0..k {
            let a_row = &self.data[t * r..(t + 1) * r];
            let b_row = &other.data[t * c..(t + 1) * c];
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out[i * c..(i + 1) * c];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(Self::from_raw(r, c, out))
    }

    /// `self * other^T`, shapes (r x k) * (c x k)^T.
    pub fn matmul_tr(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(shape_err("matmul_tr", self, other));
        }
        let (r, k, c) = (self.rows, self.cols, other.rows);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let a_row = &self.data[i * k..(i + 1) * k];
            for j in 0..c {
                let b_row = &other.data[j * k..(j + 1) * k];
                out[i * c + j] = dot(a_row, b_row);
            }
        }
        Ok(Self::from_raw(r, c, out))
    }

    /// Add a length-`cols` vector to every row.
    pub fn add_row_vector(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.cols {
            return Err(AmpError::ShapeMismatch {
                context: "add_row_vector",
                expected: format!("{} entries", self.cols),
                actual: format!("{} entries", v.len()),
            });
        }
        let mut data = self.data.clone();
        for row in data.chunks_mut(self.cols) {
            for (o, &b) in row.iter_mut().zip(v) {
                *o += b;
            }
        }
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    /// Elementwise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Elementwise map with a stateful closure (sequential, row-major order).
    pub(crate) fn map_with(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self::from_raw(
            self.rows,
            self.cols,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Elementwise subtraction.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape_err("sub", self, other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    /// Column sums as a length-`cols` vector.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks(self.cols) {
            for (o, &v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// Column-wise concatenation `[self | other]`; row counts must agree.
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(shape_err("hcat", self, other));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self::from_raw(self.rows, cols, data))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn shape_err(context: &'static str, a: &Tensor2D, b: &Tensor2D) -> AmpError {
    AmpError::ShapeMismatch {
        context,
        expected: format!("compatible with {}x{}", a.rows, a.cols),
        actual: format!("{}x{}", b.rows, b.cols),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_length_and_nonfinite() {
        assert!(Tensor2D::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Tensor2D::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Tensor2D::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn matmul_matches_hand_computation() {
        let a = Tensor2D::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor2D::new(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn transposed_products_agree_with_matmul() {
        let a = Tensor2D::new(3, 2, vec![1.0, -2.0, 0.5, 3.0, 2.0, 1.0]).unwrap();
        let b = Tensor2D::new(3, 4, (0..12).map(|v| v as f64 * 0.25).collect()).unwrap();
        // a^T b via explicit transpose
        let at = Tensor2D::new(2, 3, vec![1.0, 0.5, 2.0, -2.0, 3.0, 1.0]).unwrap();
        assert_eq!(a.tr_matmul(&b).unwrap(), at.matmul(&b).unwrap());
        // at * c^T with c 4x3, against matmul with the explicit transpose.
        let c = Tensor2D::new(4, 3, (0..12).map(|v| v as f64).collect()).unwrap();
        let ct = Tensor2D::new(
            3,
            4,
            vec![0.0, 3.0, 6.0, 9.0, 1.0, 4.0, 7.0, 10.0, 2.0, 5.0, 8.0, 11.0],
        )
        .unwrap();
        assert_eq!(at.matmul_tr(&c).unwrap(), at.matmul(&ct).unwrap());
    }

    #[test]
    fn hcat_and_select_rows() {
        let a = Tensor2D::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor2D::new(2, 1, vec![9.0, 8.0]).unwrap();
        let c = a.hcat(&b).unwrap();
        assert_eq!(c.row(0), &[1.0, 2.0, 9.0]);
        assert_eq!(c.row(1), &[3.0, 4.0, 8.0]);
        let s = c.select_rows(&[1, 1, 0]);
        assert_eq!(s.rows(), 3);
        assert_eq!(s.row(0), c.row(1));
        assert_eq!(s.row(2), c.row(0));
    }
}
