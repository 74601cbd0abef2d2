//! Construction and application of single Householder reflectors.

use crate::error::{Error, Result};
use crate::matrix::{norm2, FlopCounter, MatMut};

/// Which side a reflector (or WY aggregate) is applied from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A Householder reflector `H = I - beta v v^T`.
///
/// `house` produces vectors with `v[0] = 1`; `house_last` mirrors the
/// convention and produces `v[last] = 1`. `beta == 0` encodes the identity
/// reflector used for columns that are already reduced.
#[derive(Clone, Debug)]
pub struct Reflector {
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    pub fn identity(len: usize, pivot: usize) -> Self {
        let mut v = vec![0.0; len];
        v[pivot] = 1.0;
        Reflector { v, beta: 0.0 }
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.beta == 0.0
    }
}

/// Builds the reflector that maps `x` onto `sigma * ||x||_2 * e_1` with
/// `sigma = -sign(x[0])` (and `sign(0) = +1`).
///
/// Returns the reflector together with the image head `sigma * ||x||_2`.
/// A zero tail (including all-zero `x`) yields the identity reflector with
/// the head equal to `x[0]`.
pub fn house(x: &[f64], fc: &mut FlopCounter) -> Result<(Reflector, f64)> {
    let m = x.len();
    if m == 0 {
        return Err(Error::contract("house: empty vector"));
    }
    let tail_norm = norm2(&x[1..]);
    if tail_norm == 0.0 {
        return Ok((Reflector::identity(m, 0), x[0]));
    }
    fc.add(3 * m as u64);
    let alpha = x[0];
    let nrm = norm2(x);
    let head = if alpha < 0.0 { nrm } else { -nrm };
    let v1 = alpha - head;
    let mut v = Vec::with_capacity(m);
    v.push(1.0);
    for &xi in &x[1..] {
        v.push(xi / v1);
    }
    let beta = -v1 / head;
    debug_assert!(beta > 0.0 && beta <= 2.0 + 1e-12);
    Ok((Reflector { v, beta }, head))
}

/// Like [`house`] but reduces `x` onto a multiple of the *last* unit vector;
/// used by the QL and RQ orientations. `v[last] = 1`.
pub fn house_last(x: &[f64], fc: &mut FlopCounter) -> Result<(Reflector, f64)> {
    let m = x.len();
    if m == 0 {
        return Err(Error::contract("house_last: empty vector"));
    }
    let head_norm = norm2(&x[..m - 1]);
    if head_norm == 0.0 {
        return Ok((Reflector::identity(m, m - 1), x[m - 1]));
    }
    let rev: Vec<f64> = x.iter().rev().cloned().collect();
    let (h, head) = house(&rev, fc)?;
    let v: Vec<f64> = h.v.iter().rev().cloned().collect();
    Ok((Reflector { v, beta: h.beta }, head))
}

/// Applies `H = I - beta v v^T` to `m` as a rank-1 update:
/// `M <- H M` (left, `v.len() == m.rows()`) or `M <- M H` (right,
/// `v.len() == m.cols()`). Flops: `4 rows cols`.
pub fn apply_reflector(mut m: MatMut<'_>, h: &Reflector, side: Side, fc: &mut FlopCounter) -> Result<()> {
    let dim = match side {
        Side::Left => m.rows(),
        Side::Right => m.cols(),
    };
    if h.len() != dim {
        return Err(Error::contract(format!(
            "apply_reflector: reflector length {} does not match {:?} dimension {}",
            h.len(),
            side,
            dim
        )));
    }
    if h.is_identity() || m.rows() == 0 || m.cols() == 0 {
        return Ok(());
    }
    fc.add(4 * (m.rows() * m.cols()) as u64);
    match side {
        Side::Left => {
            // w = v^T M, then M -= beta v w^T.
            let n = m.cols();
            let r = m.rows();
            for j in 0..n {
                let col = m.col_mut(j);
                let mut w = 0.0;
                for i in 0..r {
                    w += h.v[i] * col[i];
                }
                let bw = h.beta * w;
                for i in 0..r {
                    col[i] -= bw * h.v[i];
                }
            }
        }
        Side::Right => {
            // w = M v, then M -= beta w v^T.
            let r = m.rows();
            let n = m.cols();
            let mut w = vec![0.0; r];
            for j in 0..n {
                let vj = h.v[j];
                if vj != 0.0 {
                    let col = m.col_mut(j);
                    for i in 0..r {
                        w[i] += vj * col[i];
                    }
                }
            }
            for j in 0..n {
                let bv = h.beta * h.v[j];
                if bv != 0.0 {
                    let col = m.col_mut(j);
                    for i in 0..r {
                        col[i] -= bv * w[i];
                    }
                }
            }
        }
    }
    Ok(())
}

/// Applies a reflector to a single vector in place.
pub fn apply_reflector_vec(x: &mut [f64], h: &Reflector, fc: &mut FlopCounter) -> Result<()> {
    if h.len() != x.len() {
        return Err(Error::contract("apply_reflector_vec: length mismatch"));
    }
    if h.is_identity() {
        return Ok(());
    }
    fc.add(4 * x.len() as u64);
    let mut w = 0.0;
    for i in 0..x.len() {
        w += h.v[i] * x[i];
    }
    let bw = h.beta * w;
    for i in 0..x.len() {
        x[i] -= bw * h.v[i];
    }
    Ok(())
}
