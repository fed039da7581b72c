use std::fmt;
use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Wraps a row-major buffer. The buffer length must equal `rows * cols`
    /// and every entry must be finite.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("Matrix::from_vec", rows * cols, data.len()));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Matrix::from_vec"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::dim("Matrix::from_rows", cols, r.len()));
            }
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.cols + c] = value;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |r| self.row(r))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self · rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::dim("matmul", self.cols, rhs.rows));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::dim("t_matmul", self.rows, rhs.rows));
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for r in 0..self.rows {
            let rhs_row = rhs.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::dim("matmul_t", self.cols, rhs.cols));
        }
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot_unchecked(a, rhs.row(j));
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vector> {
        if self.cols != v.len() {
            return Err(Error::dim("matvec", self.cols, v.len()));
        }
        Ok(Vector::from(
            self.row_iter()
                .map(|r| dot_unchecked(r, v))
                .collect::<Vec<_>>(),
        ))
    }

    /// Gathers the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Stacks `times` copies of this matrix vertically.
    pub fn repeat_rows(&self, times: usize) -> Matrix {
        Matrix {
            rows: self.rows * times,
            cols: self.cols,
            data: self.data.repeat(times),
        }
    }

    /// Per-column arithmetic mean.
    pub fn column_means(&self) -> Result<Vector> {
        if self.rows == 0 {
            return Err(Error::EmptyInput("column_means"));
        }
        let mut sums = vec![0.0; self.cols];
        for r in self.row_iter() {
            for (s, &v) in sums.iter_mut().zip(r) {
                *s += v;
            }
        }
        let n = self.rows as f64;
        sums.iter_mut().for_each(|s| *s /= n);
        Ok(Vector::from(sums))
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn add_assign(&mut self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(
                "Matrix::add_assign",
                self.data.len(),
                other.data.len(),
            ));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        max_abs_diff(&self.data, &other.data)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for r in self.row_iter() {
            writeln!(f, "  {r:?}")?;
        }
        write!(f, "]")
    }
}

/// Dense `f64` vector.
#[derive(Clone, PartialEq, Default)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Self {
            data: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        dot(&self.data, &other.data)
    }
}

impl From<Vec<f64>> for Vector {
    fn from(data: Vec<f64>) -> Self {
        Self { data }
    }
}

impl From<&[f64]> for Vector {
    fn from(data: &[f64]) -> Self {
        Self {
            data: data.to_vec(),
        }
    }
}

impl Deref for Vector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.data
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vector{:?}", self.data)
    }
}

/// Inner product of two equally sized slices.
pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("dot", a.len(), b.len()));
    }
    Ok(dot_unchecked(a, b))
}

#[inline]
pub(crate) fn dot_unchecked(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Softmax over the first axis: every column of the result is a probability
/// distribution over the rows. Each column is shifted by its maximum first so
/// large inputs cannot overflow.
pub fn softmax_columns(w: &Matrix) -> Matrix {
    let (rows, cols) = w.shape();
    let mut out = Matrix::zeros(rows, cols);
    if rows == 0 {
        return out;
    }
    let mut col_max = vec![f64::NEG_INFINITY; cols];
    for r in w.row_iter() {
        for (m, &v) in col_max.iter_mut().zip(r) {
            *m = m.max(v);
        }
    }
    let mut col_sum = vec![0.0; cols];
    for r in 0..rows {
        let src = w.row(r);
        let dst = out.row_mut(r);
        for c in 0..cols {
            let e = (src[c] - col_max[c]).exp();
            dst[c] = e;
            col_sum[c] += e;
        }
    }
    for r in 0..rows {
        for (v, s) in out.row_mut(r).iter_mut().zip(&col_sum) {
            *v /= s;
        }
    }
    out
}

/// Column-wise Kronecker product: for `a` of shape N×K and `b` of shape d×K
/// the result is (N·d)×K with `out[i·d + j, k] = a[i, k] · b[j, k]`.
pub fn khatri_rao(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(Error::dim("khatri_rao", a.cols(), b.cols()));
    }
    let k = a.cols();
    let d = b.rows();
    let mut out = Matrix::zeros(a.rows() * d, k);
    for i in 0..a.rows() {
        let a_row = a.row(i);
        for j in 0..d {
            let b_row = b.row(j);
            let dst = out.row_mut(i * d + j);
            for c in 0..k {
                dst[c] = a_row[c] * b_row[c];
            }
        }
    }
    Ok(out)
}

/// `v · (a ⊛ b)` evaluated without materializing the (N·d)×K Khatri-Rao
/// product. `v` has length N·d, laid out as in [`concat_rows`].
///
/// Uses `Σ_i a[i,k] Σ_j v[i·d+j] b[j,k]`, so the cost is O(N·d·K) with O(K)
/// extra memory.
pub fn khatri_rao_left_contract(v: &[f64], a: &Matrix, b: &Matrix) -> Result<Vector> {
    if a.cols() != b.cols() {
        return Err(Error::dim("khatri_rao_left_contract", a.cols(), b.cols()));
    }
    let d = b.rows();
    if v.len() != a.rows() * d {
        return Err(Error::dim("khatri_rao_left_contract", a.rows() * d, v.len()));
    }
    let k = a.cols();
    let mut out = vec![0.0; k];
    let mut inner = vec![0.0; k];
    for i in 0..a.rows() {
        inner.iter_mut().for_each(|x| *x = 0.0);
        for (j, &vj) in v[i * d..(i + 1) * d].iter().enumerate() {
            for (acc, &bjk) in inner.iter_mut().zip(b.row(j)) {
                *acc += vj * bjk;
            }
        }
        for ((o, &aik), &s) in out.iter_mut().zip(a.row(i)).zip(&inner) {
            *o += aik * s;
        }
    }
    Ok(Vector::from(out))
}

/// Flattens an N×d matrix into a single vector of length N·d, row after row.
pub fn concat_rows(x: &Matrix) -> Result<Vector> {
    if x.is_empty() {
        return Err(Error::EmptyInput("concat_rows"));
    }
    Ok(Vector::from(x.as_slice()))
}

/// A validated bijection on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    /// `map[i]` is the source row placed at position `i`.
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() {
                return Err(Error::InvalidPermutation(format!(
                    "index {m} out of range for length {}",
                    map.len()
                )));
            }
            if std::mem::replace(&mut seen[m], true) {
                return Err(Error::InvalidPermutation(format!("index {m} repeated")));
            }
        }
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Permutation { map: inv }
    }
}

/// Row `i` of the result is row `pi(i)` of `x`.
pub fn apply_permutation(pi: &Permutation, x: &Matrix) -> Result<Matrix> {
    if pi.len() != x.rows() {
        return Err(Error::InvalidPermutation(format!(
            "permutation of length {} applied to {} rows",
            pi.len(),
            x.rows()
        )));
    }
    Ok(x.select_rows(pi.as_slice()))
}
