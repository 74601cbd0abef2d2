//! Dense column-major matrix storage, zero-copy views, and the small set of
//! multiply / norm / structure kernels everything else in the crate is built
//! on.
//!
//! All floating point work that matters for the flop accounting goes through
//! the kernels in this module (or through the reflector/WY kernels, which
//! count themselves), so a [`FlopCounter`] threaded through a reduction sees
//! the same totals an interposed BLAS would.

use crate::error::{Error, Result};

/// Counts floating point operations at kernel granularity.
///
/// One add, mul, div or sqrt each count as a single flop. The counter never
/// decreases except through an explicit [`FlopCounter::reset`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopCounter {
    total: u64,
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, flops: u64) {
        self.total += flops;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn reset(&mut self) {
        self.total = 0;
    }
}

/// Column-major `f64` matrix with an explicit leading dimension.
///
/// Element `(i, j)` lives at `data[i + j * stride]`. Owned matrices are
/// always packed (`stride == rows`); windows into them keep the parent
/// stride, which is what makes panel and strip views zero-copy.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<f64>,
}

impl std::fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(12) {
                write!(f, "{:>12.5e} ", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            stride: rows.max(1),
            data: vec![0.0; rows.max(1) * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "column-major data length");
        Self {
            rows,
            cols,
            stride: rows.max(1),
            data: data.to_vec(),
        }
    }

    /// Builds a matrix from a row-major slice of slices (test convenience).
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Contiguous storage of column `j`.
    pub fn col(&self, j: usize) -> &[f64] {
        debug_assert!(j < self.cols);
        &self.data[j * self.stride..j * self.stride + self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        debug_assert!(j < self.cols);
        let s = self.stride;
        &mut self.data[j * s..j * s + self.rows]
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef {
            rows: self.rows,
            cols: self.cols,
            stride: self.stride,
            data: &self.data,
        }
    }

    pub fn as_mut(&mut self) -> MatMut<'_> {
        MatMut {
            rows: self.rows,
            cols: self.cols,
            stride: self.stride,
            data: &mut self.data,
        }
    }

    /// Zero-copy read view of the window `rows × cols` starting at `(r0, c0)`.
    pub fn view(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatRef<'_> {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "view window");
        MatRef {
            rows,
            cols,
            stride: self.stride,
            data: &self.data[r0 + c0 * self.stride..],
        }
    }

    /// Zero-copy mutable view; never aliases outside the declared window.
    pub fn view_mut(&mut self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatMut<'_> {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "view window");
        let s = self.stride;
        MatMut {
            rows,
            cols,
            stride: s,
            data: &mut self.data[r0 + c0 * s..],
        }
    }

    /// Owned copy of a window.
    pub fn sub(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    /// Writes `m` into the window whose top-left corner is `(r0, c0)`.
    pub fn set_sub(&mut self, r0: usize, c0: usize, m: &DenseMatrix) {
        assert!(r0 + m.rows <= self.rows && c0 + m.cols <= self.cols);
        for j in 0..m.cols {
            for i in 0..m.rows {
                self[(r0 + i, c0 + j)] = m[(i, j)];
            }
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn fill(&mut self, v: f64) {
        for j in 0..self.cols {
            self.col_mut(j).fill(v);
        }
    }

    /// Entrywise difference `self - other`.
    pub fn diff(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            for i in 0..self.rows {
                d[(i, j)] = self[(i, j)] - other[(i, j)];
            }
        }
        d
    }

    /// Max absolute entry difference against another matrix of equal shape.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut d = 0.0f64;
        for j in 0..self.cols {
            for i in 0..self.rows {
                d = d.max((self[(i, j)] - other[(i, j)]).abs());
            }
        }
        d
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.stride]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.stride]
    }
}

/// Read-only window into a [`DenseMatrix`].
#[derive(Clone, Copy)]
pub struct MatRef<'a> {
    rows: usize,
    cols: usize,
    stride: usize,
    data: &'a [f64],
}

impl<'a> MatRef<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.stride]
    }

    pub fn col(&self, j: usize) -> &[f64] {
        debug_assert!(j < self.cols);
        &self.data[j * self.stride..j * self.stride + self.rows]
    }

    pub fn to_owned(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            out.col_mut(j).copy_from_slice(self.col(j));
        }
        out
    }
}

/// Mutable window into a [`DenseMatrix`].
pub struct MatMut<'a> {
    rows: usize,
    cols: usize,
    stride: usize,
    data: &'a mut [f64],
}

impl<'a> MatMut<'a> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.stride]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i + j * self.stride] = v;
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        debug_assert!(j < self.cols);
        let s = self.stride;
        &mut self.data[j * s..j * s + self.rows]
    }

    pub fn rb(&mut self) -> MatMut<'_> {
        MatMut {
            rows: self.rows,
            cols: self.cols,
            stride: self.stride,
            data: self.data,
        }
    }

    /// Consumes the view and narrows it to a window.
    pub fn into_window(self, r0: usize, c0: usize, rows: usize, cols: usize) -> MatMut<'a> {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols, "window");
        MatMut {
            rows,
            cols,
            stride: self.stride,
            data: &mut self.data[r0 + c0 * self.stride..],
        }
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef {
            rows: self.rows,
            cols: self.cols,
            stride: self.stride,
            data: self.data,
        }
    }

    pub fn fill(&mut self, v: f64) {
        for j in 0..self.cols {
            self.col_mut(j).fill(v);
        }
    }

    pub fn copy_from(&mut self, src: MatRef<'_>) {
        assert_eq!((self.rows, self.cols), (src.rows(), src.cols()));
        for j in 0..self.cols {
            self.col_mut(j).copy_from_slice(src.col(j));
        }
    }
}

/// Structural zero patterns checked by [`structure_defect`].
#[derive(Clone, Copy, Debug)]
pub enum Structure<'a> {
    /// Zeros below the first sub-diagonal.
    Hessenberg,
    /// Zeros below the diagonal.
    UpperTriangular,
    /// Zeros below the diagonal blocks delimited by the offsets
    /// `0 = o_0 < o_1 < ... < o_q = n`.
    BlockUpperTriangular(&'a [usize]),
}

/// Largest absolute value found in the forbidden region of `m`.
///
/// Returns exactly `0.0` iff the structural zero pattern holds bit-exactly.
pub fn structure_defect(m: MatRef<'_>, kind: Structure<'_>) -> Result<f64> {
    if m.rows() != m.cols() {
        return Err(Error::contract("structure_defect: matrix must be square"));
    }
    let n = m.rows();
    let mut defect = 0.0f64;
    match kind {
        Structure::Hessenberg => {
            for j in 0..n {
                for i in (j + 2)..n {
                    defect = defect.max(m.get(i, j).abs());
                }
            }
        }
        Structure::UpperTriangular => {
            for j in 0..n {
                for i in (j + 1)..n {
                    defect = defect.max(m.get(i, j).abs());
                }
            }
        }
        Structure::BlockUpperTriangular(offsets) => {
            validate_offsets(offsets, n)?;
            for w in offsets.windows(2) {
                let (b0, b1) = (w[0], w[1]);
                for j in b0..b1 {
                    for i in b1..n {
                        defect = defect.max(m.get(i, j).abs());
                    }
                }
            }
        }
    }
    Ok(defect)
}

pub(crate) fn validate_offsets(offsets: &[usize], n: usize) -> Result<()> {
    let ok = offsets.first() == Some(&0)
        && offsets.last() == Some(&n)
        && offsets.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "offsets {:?} do not partition [0, {}]",
            offsets, n
        )))
    }
}

/// Frobenius norm, computed with overflow/underflow-safe scaling.
pub fn frob_norm(m: MatRef<'_>) -> f64 {
    let mut maxabs = 0.0f64;
    for j in 0..m.cols() {
        for &v in m.col(j) {
            maxabs = maxabs.max(v.abs());
        }
    }
    if maxabs == 0.0 || !maxabs.is_finite() {
        return maxabs;
    }
    let mut sum = 0.0f64;
    for j in 0..m.cols() {
        for &v in m.col(j) {
            let s = v / maxabs;
            sum += s * s;
        }
    }
    maxabs * sum.sqrt()
}

/// Euclidean norm of a vector with the same safe scaling as [`frob_norm`].
pub fn norm2(x: &[f64]) -> f64 {
    let mut maxabs = 0.0f64;
    for &v in x {
        maxabs = maxabs.max(v.abs());
    }
    if maxabs == 0.0 || !maxabs.is_finite() {
        return maxabs;
    }
    let mut sum = 0.0f64;
    for &v in x {
        let s = v / maxabs;
        sum += s * s;
    }
    maxabs * sum.sqrt()
}

/// `C <- alpha * op(A) * op(B) + beta * C` where `op` is an optional
/// transpose. Serial and bitwise deterministic: every element of `C`
/// accumulates its inner products in ascending `k` order.
///
/// Flops: `2 m n k`, plus `m n` when `beta` is neither 0 nor 1.
#[allow(clippy::too_many_arguments)]
pub fn gemm_acc(
    mut c: MatMut<'_>,
    a: MatRef<'_>,
    b: MatRef<'_>,
    alpha: f64,
    beta: f64,
    trans_a: bool,
    trans_b: bool,
    fc: &mut FlopCounter,
) -> Result<()> {
    let (am, ak) = if trans_a {
        (a.cols(), a.rows())
    } else {
        (a.rows(), a.cols())
    };
    let (bk, bn) = if trans_b {
        (b.cols(), b.rows())
    } else {
        (b.rows(), b.cols())
    };
    if am != c.rows() || bn != c.cols() || ak != bk {
        return Err(Error::contract(format!(
            "gemm_acc: op(A) is {}x{}, op(B) is {}x{}, C is {}x{}",
            am,
            ak,
            bk,
            bn,
            c.rows(),
            c.cols()
        )));
    }
    let (m, n, k) = (am, bn, ak);

    if beta == 0.0 {
        c.fill(0.0);
    } else if beta != 1.0 {
        for j in 0..n {
            for v in c.col_mut(j) {
                *v *= beta;
            }
        }
        fc.add((m * n) as u64);
    }
    fc.add(2 * (m * n * k) as u64);

    match (trans_a, trans_b) {
        (false, false) => {
            for j in 0..n {
                for l in 0..k {
                    let w = alpha * b.get(l, j);
                    let acol = a.col(l);
                    let ccol = c.col_mut(j);
                    for i in 0..m {
                        ccol[i] += w * acol[i];
                    }
                }
            }
        }
        (false, true) => {
            for j in 0..n {
                for l in 0..k {
                    let w = alpha * b.get(j, l);
                    let acol = a.col(l);
                    let ccol = c.col_mut(j);
                    for i in 0..m {
                        ccol[i] += w * acol[i];
                    }
                }
            }
        }
        (true, false) => {
            // op(A)[i, l] = A[l, i]; columns of op(A) are rows of A.
            for j in 0..n {
                let bcol = b.col(j);
                for i in 0..m {
                    let acol = a.col(i);
                    let mut s = 0.0;
                    for l in 0..k {
                        s += acol[l] * bcol[l];
                    }
                    let e = c.get(i, j) + alpha * s;
                    c.set(i, j, e);
                }
            }
        }
        (true, true) => {
            for j in 0..n {
                for i in 0..m {
                    let acol = a.col(i);
                    let mut s = 0.0;
                    for l in 0..k {
                        s += acol[l] * b.get(j, l);
                    }
                    let e = c.get(i, j) + alpha * s;
                    c.set(i, j, e);
                }
            }
        }
    }
    Ok(())
}

/// `y <- alpha * op(A) x + beta * y`. Flops: `2 m n`.
pub fn gemv(
    y: &mut [f64],
    a: MatRef<'_>,
    x: &[f64],
    alpha: f64,
    beta: f64,
    trans: bool,
    fc: &mut FlopCounter,
) -> Result<()> {
    let (m, n) = if trans {
        (a.cols(), a.rows())
    } else {
        (a.rows(), a.cols())
    };
    if y.len() != m || x.len() != n {
        return Err(Error::contract(format!(
            "gemv: op(A) is {}x{}, y has {}, x has {}",
            m,
            n,
            y.len(),
            x.len()
        )));
    }
    if beta == 0.0 {
        y.fill(0.0);
    } else if beta != 1.0 {
        for v in y.iter_mut() {
            *v *= beta;
        }
    }
    fc.add(2 * (a.rows() * a.cols()) as u64);
    if trans {
        for j in 0..a.cols() {
            let col = a.col(j);
            let mut s = 0.0;
            for i in 0..a.rows() {
                s += col[i] * x[i];
            }
            y[j] += alpha * s;
        }
    } else {
        for j in 0..a.cols() {
            let w = alpha * x[j];
            let col = a.col(j);
            for i in 0..a.rows() {
                y[i] += w * col[i];
            }
        }
    }
    Ok(())
}

/// `X <- op(T) X` for a small upper triangular `T` (k x k) and `X` (k x n).
/// Flops: `k (k + 1) n`.
pub fn trmm_upper_left(
    t: MatRef<'_>,
    mut x: MatMut<'_>,
    trans: bool,
    fc: &mut FlopCounter,
) -> Result<()> {
    let k = t.rows();
    if t.cols() != k || x.rows() != k {
        return Err(Error::contract("trmm_upper_left: dimension mismatch"));
    }
    let n = x.cols();
    fc.add((k * (k + 1) * n) as u64);
    for j in 0..n {
        let col = x.col_mut(j);
        if trans {
            // op(T) is lower triangular: walk rows bottom-up.
            for i in (0..k).rev() {
                let mut s = t.get(i, i) * col[i];
                for l in 0..i {
                    s += t.get(l, i) * col[l];
                }
                col[i] = s;
            }
        } else {
            for i in 0..k {
                let mut s = t.get(i, i) * col[i];
                for l in (i + 1)..k {
                    s += t.get(i, l) * col[l];
                }
                col[i] = s;
            }
        }
    }
    Ok(())
}
