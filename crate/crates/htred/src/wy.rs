//! Compact and regular WY representations of reflector products.
//!
//! A `CompactWy` holds factors `(V, T)` with
//! `H_1 H_2 ... H_k = I - V T V^T` where the product runs in append order
//! and `T` is upper triangular. Appending a reflector updates only the new
//! last column of `T` and the new column of `V`.

use crate::error::{Error, Result};
use crate::matrix::{gemm_acc, trmm_upper_left, DenseMatrix, FlopCounter, MatMut, MatRef};
use crate::reflector::{Reflector, Side};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Trapezoid {
    /// Supports `[start, m)` with strictly increasing starts (QR/LQ chains
    /// and the panel aggregates).
    Lower,
    /// Supports `[0, end)` with strictly decreasing ends (QL/RQ chains).
    Upper,
}

/// Compact WY representation `I - V T V^T` of up to `capacity` reflectors.
#[derive(Clone)]
pub struct CompactWy {
    v: DenseMatrix,
    t: DenseMatrix,
    /// Per-column support `[start, end)` within the `m` rows.
    supports: Vec<(usize, usize)>,
    shape: Option<Trapezoid>,
    m: usize,
    k: usize,
}

impl CompactWy {
    pub fn new(m: usize, capacity: usize) -> Self {
        CompactWy {
            v: DenseMatrix::zeros(m, capacity),
            t: DenseMatrix::zeros(capacity, capacity),
            supports: Vec::with_capacity(capacity),
            shape: None,
            m,
            k: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.k
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// The `m x k` reflector-vector factor.
    pub fn v_factor(&self) -> MatRef<'_> {
        self.v.view(0, 0, self.m, self.k)
    }

    /// The `k x k` upper triangular factor.
    pub fn t_factor(&self) -> MatRef<'_> {
        self.t.view(0, 0, self.k, self.k)
    }

    pub fn support(&self, i: usize) -> (usize, usize) {
        self.supports[i]
    }

    pub fn clear(&mut self) {
        // Appends only ever read the retained k columns, so wiping the
        // bookkeeping is enough.
        self.k = 0;
        self.supports.clear();
        self.shape = None;
        self.v.fill(0.0);
        self.t.fill(0.0);
    }

    /// Removes the most recently appended reflector (the last column of `V`
    /// and the last row and column of `T`).
    pub fn pop(&mut self) {
        assert!(self.k > 0, "pop on empty CompactWy");
        self.k -= 1;
        self.supports.pop();
        let k = self.k;
        self.v.col_mut(k).fill(0.0);
        for i in 0..=k {
            self.t[(i, k)] = 0.0;
        }
        if self.k == 0 {
            self.shape = None;
        }
    }

    fn active_rows(&self) -> (usize, usize) {
        if self.k == 0 {
            return (0, 0);
        }
        let r0 = self.supports.iter().map(|s| s.0).min().unwrap();
        let r1 = self.supports.iter().map(|s| s.1).max().unwrap();
        (r0, r1)
    }

    /// Appends a reflector supported on rows `[start, m)`; the chain must be
    /// unit lower trapezoidal (each start strictly below the previous).
    pub fn append(&mut self, h: &Reflector, start: usize, fc: &mut FlopCounter) -> Result<()> {
        if start + h.len() != self.m {
            return Err(Error::contract(format!(
                "wy_append: reflector of length {} at start {} does not reach dimension {}",
                h.len(),
                start,
                self.m
            )));
        }
        match self.shape {
            None => self.shape = Some(Trapezoid::Lower),
            Some(Trapezoid::Lower) => {
                let prev = self.supports[self.k - 1].0;
                if start <= prev {
                    return Err(Error::contract(format!(
                        "wy_append: support start {} does not descend below previous start {}",
                        start, prev
                    )));
                }
            }
            Some(Trapezoid::Upper) => {
                return Err(Error::contract("wy_append: mixing trapezoid orientations"));
            }
        }
        self.push(h, start, start + h.len(), fc)
    }

    /// Appends a reflector supported on rows `[0, end)`; the chain must be
    /// unit upper trapezoidal (each end strictly above the previous).
    pub fn append_top(&mut self, h: &Reflector, end: usize, fc: &mut FlopCounter) -> Result<()> {
        if h.len() != end || end > self.m {
            return Err(Error::contract("wy_append_top: bad support"));
        }
        match self.shape {
            None => self.shape = Some(Trapezoid::Upper),
            Some(Trapezoid::Upper) => {
                let prev = self.supports[self.k - 1].1;
                if end >= prev {
                    return Err(Error::contract(format!(
                        "wy_append_top: support end {} does not rise above previous end {}",
                        end, prev
                    )));
                }
            }
            Some(Trapezoid::Lower) => {
                return Err(Error::contract("wy_append_top: mixing trapezoid orientations"));
            }
        }
        self.push(h, 0, end, fc)
    }

    fn push(&mut self, h: &Reflector, start: usize, end: usize, fc: &mut FlopCounter) -> Result<()> {
        let k = self.k;
        assert!(k < self.v.cols(), "CompactWy capacity exceeded");
        {
            let col = self.v.col_mut(k);
            col.fill(0.0);
            col[start..end].copy_from_slice(h.v());
        }
        // T <- [[T, -beta T (V^T v)], [0, beta]]
        if k > 0 {
            let (r0, r1) = {
                let (a, b) = self.active_rows();
                (a.min(start), b.max(end))
            };
            let mut w = vec![0.0; k];
            let vperp = self.v.view(r0, 0, r1 - r0, k);
            let vcol = self.v.col(k);
            fc.add(2 * ((r1 - r0) * k) as u64);
            for (jj, wj) in w.iter_mut().enumerate() {
                let cj = vperp.col(jj);
                let mut s = 0.0;
                for i in 0..(r1 - r0) {
                    s += cj[i] * vcol[r0 + i];
                }
                *wj = s;
            }
            // w <- -beta * T * w
            let mut tw = vec![0.0; k];
            fc.add((k * k) as u64);
            for i in 0..k {
                let mut s = 0.0;
                for l in i..k {
                    s += self.t[(i, l)] * w[l];
                }
                tw[i] = -h.beta() * s;
            }
            for (i, twi) in tw.iter().enumerate() {
                self.t[(i, k)] = *twi;
            }
        }
        self.t[(k, k)] = h.beta();
        self.supports.push((start, end));
        self.k += 1;
        Ok(())
    }

    /// `M <- op(I - V T V^T) M` (left) or `M <- M op(I - V T V^T)` (right),
    /// realized as two matrix products and one triangular multiply.
    pub fn apply(&self, m: MatMut<'_>, side: Side, trans: bool, fc: &mut FlopCounter) -> Result<()> {
        if self.k == 0 {
            return Ok(());
        }
        let dim = match side {
            Side::Left => m.rows(),
            Side::Right => m.cols(),
        };
        if dim != self.m {
            return Err(Error::contract(format!(
                "wy_apply: aggregate dimension {} does not match matrix {:?} dimension {}",
                self.m, side, dim
            )));
        }
        let (r0, r1) = self.active_rows();
        let act = r1 - r0;
        let v = self.v.view(r0, 0, act, self.k);
        match side {
            Side::Left => {
                if m.cols() == 0 {
                    return Ok(());
                }
                let cols = m.cols();
                let mut window = m.into_window(r0, 0, act, cols);
                // X = V^T M ; X <- op(T) X ; M -= V X
                let mut x = DenseMatrix::zeros(self.k, cols);
                gemm_acc(x.as_mut(), v, window.as_ref(), 1.0, 0.0, true, false, fc)?;
                trmm_upper_left(self.t_factor(), x.as_mut(), trans, fc)?;
                gemm_acc(window.rb(), v, x.as_ref(), -1.0, 1.0, false, false, fc)?;
            }
            Side::Right => {
                if m.rows() == 0 {
                    return Ok(());
                }
                // M op(I - V T V^T) = M - (M V) op(T) V^T; the middle factor
                // is applied through the transposed triangular multiply
                // (Z op(T))^T = op(T)^T Z^T.
                let rows = m.rows();
                let mut window = m.into_window(0, r0, rows, act);
                let mut z = DenseMatrix::zeros(rows, self.k);
                gemm_acc(z.as_mut(), window.as_ref(), v, 1.0, 0.0, false, false, fc)?;
                let mut zt = z.transpose();
                trmm_upper_left(self.t_factor(), zt.as_mut(), !trans, fc)?;
                let z2 = zt.transpose();
                gemm_acc(window.rb(), z2.as_ref(), v, -1.0, 1.0, false, true, fc)?;
            }
        }
        Ok(())
    }

    /// Applies `op(I - V T V^T)` to a vector in place.
    pub fn apply_vec(&self, x: &mut [f64], trans: bool, fc: &mut FlopCounter) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::contract("wy apply_vec: length mismatch"));
        }
        if self.k == 0 {
            return Ok(());
        }
        let (r0, r1) = self.active_rows();
        let act = r1 - r0;
        let v = self.v.view(r0, 0, act, self.k);
        let mut w = vec![0.0; self.k];
        fc.add(2 * (act * self.k) as u64);
        for (jj, wj) in w.iter_mut().enumerate() {
            let cj = v.col(jj);
            let mut s = 0.0;
            for i in 0..act {
                s += cj[i] * x[r0 + i];
            }
            *wj = s;
        }
        let k = self.k;
        let mut tw = vec![0.0; k];
        fc.add((k * (k + 1)) as u64);
        for i in 0..k {
            let mut s = 0.0;
            if trans {
                for l in 0..=i {
                    s += self.t[(l, i)] * w[l];
                }
            } else {
                for l in i..k {
                    s += self.t[(i, l)] * w[l];
                }
            }
            tw[i] = s;
        }
        fc.add(2 * (act * k) as u64);
        for (jj, twj) in tw.iter().enumerate() {
            let cj = v.col(jj);
            for i in 0..act {
                x[r0 + i] -= cj[i] * twj;
            }
        }
        Ok(())
    }

    /// Converts to the regular representation `I - V W^T` with `W = V T^T`.
    pub fn to_regular(&self, fc: &mut FlopCounter) -> RegularWy {
        let v = self.v_factor().to_owned();
        let mut w = DenseMatrix::zeros(self.m, self.k);
        if self.k > 0 {
            gemm_acc(w.as_mut(), v.as_ref(), self.t_factor(), 1.0, 0.0, false, true, fc).unwrap();
        }
        RegularWy { v, w }
    }

    /// Dense `I - V T V^T`, for oracles and accumulation of small factors.
    pub fn materialize(&self) -> DenseMatrix {
        let mut q = DenseMatrix::identity(self.m);
        let mut fc = FlopCounter::new();
        self.apply(q.as_mut(), Side::Left, false, &mut fc).unwrap();
        q
    }
}

/// Regular WY representation `I - V W^T` (with `W = V T^T`); cheaper to
/// apply than the compact form when the same aggregate hits many matrices.
#[derive(Clone)]
pub struct RegularWy {
    v: DenseMatrix,
    w: DenseMatrix,
}

impl RegularWy {
    pub fn len(&self) -> usize {
        self.v.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.v.rows()
    }

    pub fn v_factor(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn w_factor(&self) -> &DenseMatrix {
        &self.w
    }

    /// `M <- op(I - V W^T) M` (left) or `M <- M op(I - V W^T)` (right).
    pub fn apply(&self, mut m: MatMut<'_>, side: Side, trans: bool, fc: &mut FlopCounter) -> Result<()> {
        if self.is_empty() || m.rows() == 0 || m.cols() == 0 {
            return Ok(());
        }
        let dim = match side {
            Side::Left => m.rows(),
            Side::Right => m.cols(),
        };
        if dim != self.dim() {
            return Err(Error::contract("regular wy apply: dimension mismatch"));
        }
        // op(I - V W^T) = I - V W^T (no trans) or I - W V^T (trans).
        let (a, b) = if trans { (&self.w, &self.v) } else { (&self.v, &self.w) };
        match side {
            Side::Left => {
                let mut x = DenseMatrix::zeros(self.len(), m.cols());
                gemm_acc(x.as_mut(), b.as_ref(), m.as_ref(), 1.0, 0.0, true, false, fc)?;
                gemm_acc(m.rb(), a.as_ref(), x.as_ref(), -1.0, 1.0, false, false, fc)?;
            }
            Side::Right => {
                let mut x = DenseMatrix::zeros(m.rows(), self.len());
                gemm_acc(x.as_mut(), m.as_ref(), a.as_ref(), 1.0, 0.0, false, false, fc)?;
                gemm_acc(m.rb(), x.as_ref(), b.as_ref(), -1.0, 1.0, false, true, fc)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::frob_norm;
    use crate::reflector::house;

    fn fc() -> FlopCounter {
        FlopCounter::new()
    }

    fn dense_product(reflectors: &[(Reflector, usize)], m: usize) -> DenseMatrix {
        // Explicit H_1 H_2 ... H_k oracle, each embedded at its support.
        let mut acc = DenseMatrix::identity(m);
        for (h, start) in reflectors {
            let mut d = DenseMatrix::identity(m);
            for j in 0..h.len() {
                for i in 0..h.len() {
                    d[(start + i, start + j)] -= h.beta() * h.v()[i] * h.v()[j];
                }
            }
            let mut out = DenseMatrix::zeros(m, m);
            gemm_acc(out.as_mut(), acc.as_ref(), d.as_ref(), 1.0, 0.0, false, false, &mut fc())
                .unwrap();
            acc = out;
        }
        acc
    }

    #[test]
    fn append_single_reflector() {
        let (h, _) = house(&[3.0, 4.0, 1.0], &mut fc()).unwrap();
        let mut wy = CompactWy::new(3, 2);
        wy.append(&h, 0, &mut fc()).unwrap();
        assert_eq!(wy.len(), 1);
        assert_eq!(wy.t_factor().get(0, 0), h.beta());
        for i in 0..3 {
            assert_eq!(wy.v_factor().get(i, 0), h.v()[i]);
        }
    }

    #[test]
    fn two_reflector_product_matches_oracle() {
        let (h1, _) = house(&[3.0, 4.0, 0.0], &mut fc()).unwrap();
        let (h2, _) = house(&[1.0, 2.0], &mut fc()).unwrap();
        let mut wy = CompactWy::new(3, 2);
        wy.append(&h1, 0, &mut fc()).unwrap();
        wy.append(&h2, 1, &mut fc()).unwrap();
        let got = wy.materialize();
        let want = dense_product(&[(h1, 0), (h2, 1)], 3);
        assert!(got.max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn append_identity_reflector() {
        let (h1, _) = house(&[3.0, 4.0, 0.0], &mut fc()).unwrap();
        let id = Reflector::identity(2, 0);
        let mut wy = CompactWy::new(3, 2);
        wy.append(&h1, 0, &mut fc()).unwrap();
        let before = wy.materialize();
        wy.append(&id, 1, &mut fc()).unwrap();
        assert_eq!(wy.t_factor().get(1, 1), 0.0);
        assert_eq!(wy.t_factor().get(0, 1), 0.0);
        let after = wy.materialize();
        assert!(before.max_abs_diff(&after) == 0.0);
    }

    #[test]
    fn append_rejects_support_overlap() {
        let (h1, _) = house(&[3.0, 4.0], &mut fc()).unwrap();
        let mut wy = CompactWy::new(3, 3);
        wy.append(&h1, 1, &mut fc()).unwrap();
        let (h2, _) = house(&[1.0, 1.0], &mut fc()).unwrap();
        assert!(wy.append(&h2, 1, &mut fc()).is_err());
    }

    #[test]
    fn empty_apply_is_noop() {
        let wy = CompactWy::new(4, 2);
        let mut m = DenseMatrix::identity(4);
        wy.apply(m.as_mut(), Side::Left, false, &mut fc()).unwrap();
        assert_eq!(m, DenseMatrix::identity(4));
    }

    #[test]
    fn k1_apply_matches_single_reflector() {
        use crate::reflector::apply_reflector;
        let (h, _) = house(&[2.0, -1.0, 0.5, 3.0], &mut fc()).unwrap();
        let mut wy = CompactWy::new(4, 1);
        wy.append(&h, 0, &mut fc()).unwrap();
        let m = DenseMatrix::from_rows(&[
            &[1.0, 2.0, 3.0, 4.0],
            &[5.0, 6.0, 7.0, 8.0],
            &[9.0, 1.0, 2.0, 3.0],
            &[4.0, 5.0, 6.0, 7.0],
        ]);
        for &(side, trans) in &[
            (Side::Left, false),
            (Side::Left, true),
            (Side::Right, false),
            (Side::Right, true),
        ] {
            let mut a = m.clone();
            let mut b = m.clone();
            wy.apply(a.as_mut(), side, trans, &mut fc()).unwrap();
            apply_reflector(b.as_mut(), &h, side, &mut fc()).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-14, "side {:?} trans {}", side, trans);
        }
    }

    #[test]
    fn aggregate_is_orthogonal() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let m = 32;
        let k = 8;
        let mut wy = CompactWy::new(m, k);
        for i in 0..k {
            let x: Vec<f64> = (0..m - i).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (h, _) = house(&x, &mut fc()).unwrap();
            wy.append(&h, i, &mut fc()).unwrap();
        }
        let g = wy.materialize();
        let mut gtg = DenseMatrix::zeros(m, m);
        gemm_acc(gtg.as_mut(), g.as_ref(), g.as_ref(), 1.0, 0.0, true, false, &mut fc()).unwrap();
        let mut defect = gtg.clone();
        for i in 0..m {
            defect[(i, i)] -= 1.0;
        }
        assert!(frob_norm(defect.as_ref()) <= 1e-13);
    }

    #[test]
    fn append_associativity_against_explicit_products() {
        use rand::Rng;
        use rand::SeedableRng;
        for seed in 0..12u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = rng.random_range(4..=16usize);
            let k = rng.random_range(1..=m.min(8));
            let mut wy = CompactWy::new(m, k);
            let mut hs = Vec::new();
            for i in 0..k {
                let x: Vec<f64> = (0..m - i).map(|_| rng.random_range(-1.0..1.0)).collect();
                let (h, _) = house(&x, &mut fc()).unwrap();
                wy.append(&h, i, &mut fc()).unwrap();
                hs.push((h, i));
            }
            let got = wy.materialize();
            let want = dense_product(&hs, m);
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn upper_trapezoid_chain() {
        use crate::reflector::house_last;
        // QL-style chain: supports [0, 3) then [0, 2).
        let (h1, _) = house_last(&[1.0, 2.0, 3.0], &mut fc()).unwrap();
        let (h2, _) = house_last(&[0.5, -1.0], &mut fc()).unwrap();
        let mut wy = CompactWy::new(3, 2);
        wy.append_top(&h1, 3, &mut fc()).unwrap();
        wy.append_top(&h2, 2, &mut fc()).unwrap();
        let q = wy.materialize();
        let mut qtq = DenseMatrix::zeros(3, 3);
        gemm_acc(qtq.as_mut(), q.as_ref(), q.as_ref(), 1.0, 0.0, true, false, &mut fc()).unwrap();
        let mut d = qtq;
        for i in 0..3 {
            d[(i, i)] -= 1.0;
        }
        assert!(frob_norm(d.as_ref()) < 1e-14);
        // Mixing orientations is rejected.
        let (h3, _) = house(&[1.0, 1.0], &mut fc()).unwrap();
        assert!(wy.append(&h3, 1, &mut fc()).is_err());
    }

    #[test]
    fn regular_wy_matches_compact() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let m = 9;
        let mut wy = CompactWy::new(m, 3);
        for i in 0..3 {
            let x: Vec<f64> = (0..m - i).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (h, _) = house(&x, &mut fc()).unwrap();
            wy.append(&h, i, &mut fc()).unwrap();
        }
        let reg = wy.to_regular(&mut fc());
        // k = 1 case: W = beta v.
        let (h1, _) = house(&[3.0, 4.0], &mut fc()).unwrap();
        let mut w1 = CompactWy::new(2, 1);
        w1.append(&h1, 0, &mut fc()).unwrap();
        let r1 = w1.to_regular(&mut fc());
        for i in 0..2 {
            assert!((r1.w_factor()[(i, 0)] - h1.beta() * h1.v()[i]).abs() < 1e-15);
        }
        // Random k = 3: dense I - V W^T equals the compact materialization.
        let mut dense = DenseMatrix::identity(m);
        gemm_acc(
            dense.as_mut(),
            reg.v_factor().as_ref(),
            reg.w_factor().as_ref(),
            -1.0,
            1.0,
            false,
            true,
            &mut fc(),
        )
        .unwrap();
        assert!(dense.max_abs_diff(&wy.materialize()) < 1e-13);
        // And the four application variants agree.
        let m0 = DenseMatrix::from_rows(&[
            &[1.0, 0.5, 2.0, 1.0, 0.0, 3.0, 1.0, 2.0, 0.5],
            &[2.0, 1.5, 0.0, 2.0, 1.0, 0.0, 2.0, 1.0, 1.5],
            &[3.0, 2.5, 1.0, 0.0, 2.0, 1.0, 3.0, 0.0, 2.5],
            &[4.0, 3.5, 2.0, 1.0, 3.0, 2.0, 0.0, 1.0, 3.5],
            &[5.0, 4.5, 3.0, 2.0, 0.0, 3.0, 1.0, 2.0, 4.5],
            &[6.0, 5.5, 4.0, 3.0, 1.0, 0.0, 2.0, 3.0, 5.5],
            &[7.0, 6.5, 5.0, 4.0, 2.0, 1.0, 0.0, 4.0, 6.5],
            &[8.0, 7.5, 6.0, 5.0, 3.0, 2.0, 1.0, 0.0, 7.5],
            &[9.0, 8.5, 7.0, 6.0, 4.0, 3.0, 2.0, 1.0, 8.5],
        ]);
        for &(side, trans) in &[
            (Side::Left, false),
            (Side::Left, true),
            (Side::Right, false),
            (Side::Right, true),
        ] {
            let mut a = m0.clone();
            let mut b = m0.clone();
            wy.apply(a.as_mut(), side, trans, &mut fc()).unwrap();
            reg.apply(b.as_mut(), side, trans, &mut fc()).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-13, "side {:?} trans {}", side, trans);
        }
    }

    #[test]
    fn apply_vec_matches_matrix_apply() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = 7;
        let mut wy = CompactWy::new(m, 3);
        for i in 0..3 {
            let x: Vec<f64> = (0..m - i).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (h, _) = house(&x, &mut fc()).unwrap();
            wy.append(&h, i, &mut fc()).unwrap();
        }
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        for &trans in &[false, true] {
            let mut as_vec = x.clone();
            wy.apply_vec(&mut as_vec, trans, &mut fc()).unwrap();
            let mut as_mat = DenseMatrix::zeros(m, 1);
            for i in 0..m {
                as_mat[(i, 0)] = x[i];
            }
            wy.apply(as_mat.as_mut(), Side::Left, trans, &mut fc()).unwrap();
            for i in 0..m {
                assert!((as_vec[i] - as_mat[(i, 0)]).abs() < 1e-13);
            }
        }
    }
}
