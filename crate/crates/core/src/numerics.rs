//! Small dense kernels over row-major matrices and vectors.
//!
//! The separation datapath runs in `f32`; metrics and test oracles instantiate the
//! same types with `f64`. Shapes are tiny (a handful of rows and columns), so the
//! kernels are plain loops with no blocking or sparsity handling.
//!
//! Values entering through the constructors are checked for finiteness. The kernels
//! themselves do not re-check their outputs; overflow during training is caught by the
//! separator's divergence guard.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_traits::{Float, FromPrimitive, ToPrimitive};

use crate::error::{Error, Result};

/// Floating-point element type of the kernels.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static {
    /// Converts an `f64` constant (hyperparameter, literal) into this type.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 converts to every Scalar")
    }

    fn to_f64_lossless(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dense column vector.
#[derive(Clone, PartialEq)]
pub struct Vector<T = f32> {
    data: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    pub fn from_vec(data: Vec<T>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidDimensions("vector length must be at least 1".into()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self { data })
    }

    /// Builds a vector without validation; callers guarantee non-empty data.
    pub(crate) fn from_vec_unchecked(data: Vec<T>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len >= 1, "vector length must be at least 1");
        Self { data: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false: vectors have at least one element.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.data.iter()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Vector<U> {
        Vector { data: self.data.iter().map(|v| U::lit(v.to_f64_lossless())).collect() }
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.data[i]
    }
}

impl<T: fmt::Debug> fmt::Debug for Vector<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

/// Dense row-major matrix.
#[derive(Clone, PartialEq)]
pub struct Mat<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimensions(format!("matrix must be at least 1x1, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::len("Mat::from_vec", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::InvalidDimensions("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix must be at least 1x1");
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
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

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, alpha: T) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> Mat<U> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| U::lit(v.to_f64_lossless())).collect() }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = self.data.chunks(self.cols).collect();
        f.debug_struct("Mat").field("shape", &(self.rows, self.cols)).field("rows", &rows).finish()
    }
}

/// `M · v`.
pub fn matvec<T: Scalar>(m: &Mat<T>, v: &Vector<T>) -> Result<Vector<T>> {
    if m.cols != v.len() {
        return Err(Error::len("matvec", m.cols, v.len()));
    }
    let data =
        (0..m.rows).map(|i| m.row(i).iter().zip(v.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b)).collect();
    Ok(Vector::from_vec_unchecked(data))
}

/// `u · vᵀ`, shape `u.len() × v.len()`.
pub fn outer<T: Scalar>(u: &Vector<T>, v: &Vector<T>) -> Mat<T> {
    let data = u.iter().flat_map(|&a| v.iter().map(move |&b| a * b)).collect();
    Mat { rows: u.len(), cols: v.len(), data }
}

/// `α·M1 + β·M2`, element-wise.
pub fn mat_combine<T: Scalar>(alpha: T, m1: &Mat<T>, beta: T, m2: &Mat<T>) -> Result<Mat<T>> {
    if m1.shape() != m2.shape() {
        return Err(Error::shape("mat_combine", m1.shape(), m2.shape()));
    }
    let data = m1.data.iter().zip(&m2.data).map(|(&a, &b)| alpha * a + beta * b).collect();
    Ok(Mat { rows: m1.rows, cols: m1.cols, data })
}

/// `M1 · M2`.
pub fn matmul<T: Scalar>(m1: &Mat<T>, m2: &Mat<T>) -> Result<Mat<T>> {
    if m1.cols != m2.rows {
        return Err(Error::DimensionMismatch {
            op: "matmul",
            expected: format!("{} rows on the right", m1.cols),
            actual: format!("{} rows", m2.rows),
        });
    }
    let mut out = Mat::zeros(m1.rows, m2.cols);
    for i in 0..m1.rows {
        for j in 0..m2.cols {
            let mut acc = T::zero();
            for k in 0..m1.cols {
                acc = acc + m1[(i, k)] * m2[(k, j)];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}
