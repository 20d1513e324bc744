//! Dense row-major matrices (rank <= 2; scalars are 1x1).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Tensor::from_vec",
                format!("{} entries", rows * cols),
                format!("{}", data.len()),
            ));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::shape(
                    "Tensor::from_rows",
                    format!("{c} cols"),
                    format!("{}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Tensor::from_vec(r, c, data)
    }

    pub fn scalar(value: S) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn same_shape(&self, other: &Tensor<S>) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [S] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }

    pub fn item(&self) -> S {
        debug_assert!(self.is_scalar());
        self.data[0]
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Tensor<S> {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn fill(&mut self, v: S) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `self (n x k) * other (k x m)`, cache-friendly ikj loop.
    pub fn matmul(&self, other: &Tensor<S>) -> Result<Tensor<S>> {
        if self.cols != other.rows {
            return Err(Error::shape(
                "matmul",
                format!("lhs cols == rhs rows ({})", other.rows),
                format!("{}", self.cols),
            ));
        }
        let mut out = Tensor::zeros(self.rows, other.cols);
        matmul_into(&mut out, self, other, false);
        Ok(out)
    }
}

/// `out (+)= a * b`; `accumulate` selects add-assign vs overwrite-of-zeros.
pub(crate) fn matmul_into<S: Scalar>(out: &mut Tensor<S>, a: &Tensor<S>, b: &Tensor<S>, accumulate: bool) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!(out.rows, a.rows);
    debug_assert_eq!(out.cols, b.cols);
    if !accumulate {
        out.data.iter_mut().for_each(|x| *x = S::zero());
    }
    let n = b.cols;
    for i in 0..a.rows {
        let out_row = &mut out.data[i * n..(i + 1) * n];
        let a_row = &a.data[i * a.cols..(i + 1) * a.cols];
        for (k, &aik) in a_row.iter().enumerate() {
            let b_row = &b.data[k * n..(k + 1) * n];
            for (o, &bkj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += aik * bkj;
            }
        }
    }
}

/// `out (+)= a^T * b` without materializing the transpose.
pub(crate) fn matmul_at_b_into<S: Scalar>(out: &mut Tensor<S>, a: &Tensor<S>, b: &Tensor<S>, accumulate: bool) {
    debug_assert_eq!(a.rows, b.rows);
    debug_assert_eq!(out.rows, a.cols);
    debug_assert_eq!(out.cols, b.cols);
    if !accumulate {
        out.data.iter_mut().for_each(|x| *x = S::zero());
    }
    let n = b.cols;
    for i in 0..a.rows {
        let a_row = &a.data[i * a.cols..(i + 1) * a.cols];
        let b_row = &b.data[i * n..(i + 1) * n];
        for (k, &aik) in a_row.iter().enumerate() {
            let out_row = &mut out.data[k * n..(k + 1) * n];
            for (o, &bij) in out_row.iter_mut().zip(b_row.iter()) {
                *o += aik * bij;
            }
        }
    }
}

/// `out (+)= a * b^T` without materializing the transpose.
pub(crate) fn matmul_a_bt_into<S: Scalar>(out: &mut Tensor<S>, a: &Tensor<S>, b: &Tensor<S>, accumulate: bool) {
    debug_assert_eq!(a.cols, b.cols);
    debug_assert_eq!(out.rows, a.rows);
    debug_assert_eq!(out.cols, b.rows);
    if !accumulate {
        out.data.iter_mut().for_each(|x| *x = S::zero());
    }
    for i in 0..a.rows {
        let a_row = &a.data[i * a.cols..(i + 1) * a.cols];
        for j in 0..b.rows {
            let b_row = &b.data[j * b.cols..(j + 1) * b.cols];
            let mut acc = S::zero();
            for (&x, &y) in a_row.iter().zip(b_row.iter()) {
                acc += x * y;
            }
            out.data[i * b.rows + j] += acc;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_by_hand() {
        let a = Tensor::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = Tensor::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn matmul_shape_mismatch_rejected() {
        let a = Tensor::<f64>::zeros(2, 3);
        let b = Tensor::<f64>::zeros(2, 3);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn transposed_kernels_agree_with_naive() {
        let a = Tensor::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 5.0, -6.0]).unwrap();
        let b = Tensor::from_vec(2, 4, vec![1.0, 2.0, 3.0, 4.0, -1.0, 0.0, 2.0, 1.5]).unwrap();
        let mut out = Tensor::zeros(3, 4);
        matmul_at_b_into(&mut out, &a, &b, false);
        for i in 0..3 {
            for j in 0..4 {
                let want: f64 = (0..2).map(|k| a.get(k, i) * b.get(k, j)).sum();
                assert!((out.get(i, j) - want).abs() < 1e-12);
            }
        }
        let c = Tensor::from_vec(5, 3, vec![0.1; 15]).unwrap();
        let mut out2 = Tensor::zeros(2, 5);
        matmul_a_bt_into(&mut out2, &a, &c, false);
        for i in 0..2 {
            for j in 0..5 {
                let want: f64 = (0..3).map(|k| a.get(i, k) * c.get(j, k)).sum();
                assert!((out2.get(i, j) - want).abs() < 1e-12);
            }
        }
    }
}
