//! Small blocked orthogonal factorizations (QR, QL, RQ, LQ) returning WY
//! aggregates, LU with partial pivoting, and the reduced one-sided
//! transforms used to restore block triangular structure.
//!
//! Conventions: every factorization returns a [`CompactWy`] `q` representing
//! the reflector product in processing order, so that
//!
//! - `qr_wy`:  `q^T M = R`   (apply `q` left, transposed)
//! - `ql_wy`:  `q^T M = [0; L1]`
//! - `rq_wy`:  `M q = [0 | R1]`  (apply `q` right, untransposed)
//! - `lq_wy`:  `M q = [L1 | 0]`
//!
//! All four orientations run directly over `house`/`house_last` with the
//! appropriate column/row orderings; matrices are never flipped. Sign
//! freedom in the triangular factors is unconstrained; consumers assert
//! residuals rather than factor entries.

use crate::error::{Error, Result};
use crate::matrix::{frob_norm, DenseMatrix, FlopCounter};
use crate::reflector::{apply_reflector, house, house_last, Side};
use crate::wy::CompactWy;
use crate::UNIT_ROUNDOFF;

fn row_vec(m: &DenseMatrix, i: usize, c0: usize, c1: usize) -> Vec<f64> {
    (c0..c1).map(|j| m[(i, j)]).collect()
}

/// QR factorization `M = Q R` of an `m x n` matrix with `m >= n`.
pub fn qr_wy(m: &DenseMatrix, fc: &mut FlopCounter) -> Result<(CompactWy, DenseMatrix)> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows < cols {
        return Err(Error::contract("qr_wy: requires rows >= cols"));
    }
    let mut r = m.clone();
    let mut wy = CompactWy::new(rows, cols);
    for i in 0..cols {
        let (h, head) = house(&r.col(i)[i..rows], fc)?;
        if i + 1 < cols {
            apply_reflector(r.view_mut(i, i + 1, rows - i, cols - i - 1), &h, Side::Left, fc)?;
        }
        r[(i, i)] = head;
        for ii in (i + 1)..rows {
            r[(ii, i)] = 0.0;
        }
        wy.append(&h, i, fc)?;
    }
    Ok((wy, r))
}

/// QL factorization: `q^T M = [0; L1]` with `L1` lower triangular occupying
/// the bottom `n x n` block. Requires `rows >= cols`.
pub fn ql_wy(m: &DenseMatrix, fc: &mut FlopCounter) -> Result<(CompactWy, DenseMatrix)> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows < cols {
        return Err(Error::contract("ql_wy: requires rows >= cols"));
    }
    let mut l = m.clone();
    let mut wy = CompactWy::new(rows, cols);
    for t in 0..cols {
        let c = cols - 1 - t;
        let end = rows - t;
        let (h, head) = house_last(&l.col(c)[0..end], fc)?;
        if c > 0 {
            apply_reflector(l.view_mut(0, 0, end, c), &h, Side::Left, fc)?;
        }
        l[(end - 1, c)] = head;
        for ii in 0..(end - 1) {
            l[(ii, c)] = 0.0;
        }
        wy.append_top(&h, end, fc)?;
    }
    Ok((wy, l))
}

/// RQ factorization: `M q = [0 | R1]` with `R1` upper triangular occupying
/// the rightmost `rows x rows` block. Requires `cols >= rows`.
pub fn rq_wy(m: &DenseMatrix, fc: &mut FlopCounter) -> Result<(DenseMatrix, CompactWy)> {
    let (rows, cols) = (m.rows(), m.cols());
    if cols < rows {
        return Err(Error::contract("rq_wy: requires cols >= rows"));
    }
    let mut r = m.clone();
    let mut wy = CompactWy::new(cols, rows);
    for t in 0..rows {
        let i = rows - 1 - t;
        let end = cols - t;
        let x = row_vec(&r, i, 0, end);
        let (h, head) = house_last(&x, fc)?;
        if i > 0 {
            apply_reflector(r.view_mut(0, 0, i, end), &h, Side::Right, fc)?;
        }
        r[(i, end - 1)] = head;
        for jj in 0..(end - 1) {
            r[(i, jj)] = 0.0;
        }
        wy.append_top(&h, end, fc)?;
    }
    Ok((r, wy))
}

/// LQ factorization: `M q = [L1 | 0]` with `L1` lower triangular occupying
/// the leading `rows x rows` block. Requires `cols >= rows`.
pub fn lq_wy(m: &DenseMatrix, fc: &mut FlopCounter) -> Result<(DenseMatrix, CompactWy)> {
    let (rows, cols) = (m.rows(), m.cols());
    if cols < rows {
        return Err(Error::contract("lq_wy: requires cols >= rows"));
    }
    let mut l = m.clone();
    let mut wy = CompactWy::new(cols, rows);
    for i in 0..rows {
        let x = row_vec(&l, i, i, cols);
        let (h, head) = house(&x, fc)?;
        if i + 1 < rows {
            apply_reflector(l.view_mut(i + 1, i, rows - i - 1, cols - i), &h, Side::Right, fc)?;
        }
        l[(i, i)] = head;
        for jj in (i + 1)..cols {
            l[(i, jj)] = 0.0;
        }
        wy.append(&h, i, fc)?;
    }
    Ok((l, wy))
}

/// LU factors of a square matrix with partial pivoting, packed `L\U`.
#[derive(Clone, Debug)]
pub struct LuFactors {
    lu: DenseMatrix,
    pivots: Vec<usize>,
    singular: bool,
}

impl LuFactors {
    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn n(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A x = b` in place. Errors if a pivot was exactly zero.
    pub fn solve(&self, b: &mut [f64], fc: &mut FlopCounter) -> Result<()> {
        let n = self.n();
        if b.len() != n {
            return Err(Error::contract("lu solve: rhs length mismatch"));
        }
        if self.singular {
            return Err(Error::SingularSystem("exact zero pivot in LU factors".into()));
        }
        for (k, &p) in self.pivots.iter().enumerate() {
            b.swap(k, p);
        }
        for k in 0..n {
            let bk = b[k];
            if bk != 0.0 {
                for i in (k + 1)..n {
                    b[i] -= self.lu[(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.lu[(k, k)];
            let bk = b[k];
            if bk != 0.0 {
                for i in 0..k {
                    b[i] -= self.lu[(i, k)] * bk;
                }
            }
        }
        fc.add(2 * (n * n) as u64);
        Ok(())
    }

    /// `ln |det A|`, overflow-free; the flag marks an exactly zero pivot.
    pub fn log_abs_det(&self) -> (f64, bool) {
        let mut s = 0.0;
        let mut zero = self.singular;
        for i in 0..self.n() {
            let d = self.lu[(i, i)].abs();
            if d == 0.0 {
                zero = true;
            } else {
                s += d.ln();
            }
        }
        (if zero { f64::NEG_INFINITY } else { s }, zero)
    }
}

/// LU factorization with partial pivoting. Exactly singular input is allowed
/// and flagged; solving against it errors.
pub fn lu_pp(m: &DenseMatrix, fc: &mut FlopCounter) -> Result<LuFactors> {
    if !m.is_square() {
        return Err(Error::contract("lu_pp: matrix must be square"));
    }
    let n = m.rows();
    let mut lu = m.clone();
    let mut pivots = vec![0usize; n];
    let mut singular = false;
    for k in 0..n {
        let mut p = k;
        let mut best = lu[(k, k)].abs();
        for i in (k + 1)..n {
            let v = lu[(i, k)].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        pivots[k] = p;
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
        }
        let piv = lu[(k, k)];
        if piv == 0.0 {
            singular = true;
            continue;
        }
        for i in (k + 1)..n {
            lu[(i, k)] /= piv;
        }
        let m_left = n - k - 1;
        fc.add((m_left + 2 * m_left * m_left) as u64);
        for j in (k + 1)..n {
            let u = lu[(k, j)];
            if u != 0.0 {
                for i in (k + 1)..n {
                    let l = lu[(i, k)];
                    lu[(i, j)] -= l * u;
                }
            }
        }
    }
    Ok(LuFactors { lu, pivots, singular })
}

/// Builds the width-`k` right transform annihilating the first
/// `k = cols - rows` columns of the strip `c` when applied from the right
/// (untransposed): `C q` has its first `k` columns zero.
///
/// RQ-factors the strip, materializes only the first `k` rows of the
/// orthogonal factor, and LQ-factors that block row; the result consists of
/// exactly `k` reflectors.
pub fn reduced_right_transform(c: &DenseMatrix, fc: &mut FlopCounter) -> Result<CompactWy> {
    let (p, q) = (c.rows(), c.cols());
    if q <= p {
        return Err(Error::contract("reduced_right_transform: requires cols > rows"));
    }
    let kk = q - p;
    let (_, q_rq) = rq_wy(c, fc)?;
    // First kk rows of the RQ orthogonal factor (with C = R Q): Q = q_rq^T,
    // so the block row is (q_rq [I_kk; 0])^T.
    let mut e1 = DenseMatrix::zeros(q, kk);
    for i in 0..kk {
        e1[(i, i)] = 1.0;
    }
    q_rq.apply(e1.as_mut(), Side::Left, false, fc)?;
    let block_row = e1.transpose();
    let (_, q_lq) = lq_wy(&block_row, fc)?;
    debug_assert_eq!(q_lq.len(), kk);

    // Guard: the annihilated block must actually vanish.
    let mut check = c.clone();
    q_lq.apply(check.as_mut(), Side::Right, false, fc)?;
    let mut defect = 0.0f64;
    for j in 0..kk {
        for i in 0..p {
            defect = defect.max(check[(i, j)].abs());
        }
    }
    let tol = 100.0 * (q as f64) * UNIT_ROUNDOFF * frob_norm(c.as_ref());
    if defect > tol {
        return Err(Error::NumericalFailure(format!(
            "reduced_right_transform: annihilated block residual {:.3e} exceeds {:.3e}",
            defect, tol
        )));
    }
    Ok(q_lq)
}

/// Builds the width-`k` left transform annihilating the last
/// `k = rows - cols` rows of the strip `c` when applied from the left,
/// transposed: `q^T C` has its last `k` rows zero.
pub fn reduced_left_transform(c: &DenseMatrix, fc: &mut FlopCounter) -> Result<CompactWy> {
    let (p, q) = (c.rows(), c.cols());
    if p <= q {
        return Err(Error::contract("reduced_left_transform: requires rows > cols"));
    }
    let kk = p - q;
    let (q_qr, _) = qr_wy(c, fc)?;
    // Last kk columns of the QR orthogonal factor (with C = Q R).
    let mut e3 = DenseMatrix::zeros(p, kk);
    for i in 0..kk {
        e3[(p - kk + i, i)] = 1.0;
    }
    q_qr.apply(e3.as_mut(), Side::Left, false, fc)?;
    let (q_ql, _) = ql_wy(&e3, fc)?;
    debug_assert_eq!(q_ql.len(), kk);

    let mut check = c.clone();
    q_ql.apply(check.as_mut(), Side::Left, true, fc)?;
    let mut defect = 0.0f64;
    for j in 0..q {
        for i in (p - kk)..p {
            defect = defect.max(check[(i, j)].abs());
        }
    }
    let tol = 100.0 * (p as f64) * UNIT_ROUNDOFF * frob_norm(c.as_ref());
    if defect > tol {
        return Err(Error::NumericalFailure(format!(
            "reduced_left_transform: annihilated block residual {:.3e} exceeds {:.3e}",
            defect, tol
        )));
    }
    Ok(q_ql)
}
