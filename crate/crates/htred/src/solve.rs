//! Linear-system machinery for constructing opposite reflectors: block
//! triangular storage of `B` with cached LU factors, the factored-form solve
//! against `(I - U S U^T)^T B (I - V T V^T)`, residual evaluation, iterative
//! refinement, and the random diagonal perturbation for singular `B`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::factor::{lu_pp, LuFactors};
use crate::matrix::{frob_norm, structure_defect, DenseMatrix, FlopCounter, Structure};
use crate::reflector::{house, Reflector};
use crate::wy::CompactWy;
use crate::UNIT_ROUNDOFF;

/// Upper block triangular `B` with cached per-block LU factors.
///
/// The offsets `0 = o_0 < o_1 < ... < o_q = n` delimit the diagonal blocks;
/// unit offsets describe a plain triangular matrix. Everything strictly
/// below a diagonal block is exactly zero.
pub struct BlockTriangularB {
    b: DenseMatrix,
    offsets: Vec<usize>,
    lu: Vec<Option<LuFactors>>,
    bnorm: f64,
}

impl BlockTriangularB {
    /// Wraps a plain upper triangular matrix (unit blocks).
    pub fn plain(b: DenseMatrix) -> Result<Self> {
        let n = b.rows();
        let offsets: Vec<usize> = (0..=n).collect();
        Self::with_offsets(b, offsets)
    }

    /// Wraps a block upper triangular matrix. The structural zero pattern
    /// must hold bit-exactly.
    pub fn with_offsets(b: DenseMatrix, offsets: Vec<usize>) -> Result<Self> {
        if !b.is_square() {
            return Err(Error::contract("BlockTriangularB: matrix must be square"));
        }
        let defect = structure_defect(b.as_ref(), Structure::BlockUpperTriangular(&offsets))?;
        if defect != 0.0 {
            return Err(Error::contract(format!(
                "BlockTriangularB: structure defect {:.3e} below the diagonal blocks",
                defect
            )));
        }
        let bnorm = frob_norm(b.as_ref());
        let nblocks = offsets.len() - 1;
        Ok(BlockTriangularB {
            b,
            offsets,
            lu: vec![None; nblocks],
            bnorm,
        })
    }

    pub fn n(&self) -> usize {
        self.b.rows()
    }

    pub fn bnorm(&self) -> f64 {
        self.bnorm
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.b
    }

    /// Mutable access for the absorption sweeps. The caller must restore a
    /// valid block structure and then call [`BlockTriangularB::set_offsets`].
    pub fn matrix_mut_raw(&mut self) -> &mut DenseMatrix {
        &mut self.b
    }

    /// Declares the block structure after an absorption rewrote the matrix;
    /// drops all cached factors and re-checks the zero pattern bit-exactly.
    pub fn set_offsets(&mut self, offsets: Vec<usize>) -> Result<()> {
        let defect = structure_defect(self.b.as_ref(), Structure::BlockUpperTriangular(&offsets))?;
        if defect != 0.0 {
            return Err(Error::NumericalFailure(format!(
                "block structure defect {:.3e} after absorption",
                defect
            )));
        }
        self.lu = vec![None; offsets.len() - 1];
        self.offsets = offsets;
        self.bnorm = frob_norm(self.b.as_ref());
        Ok(())
    }

    fn block_of(&self, col: usize) -> usize {
        match self.offsets.binary_search(&col) {
            Ok(i) if i == self.offsets.len() - 1 => i - 1,
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    fn boundary_index(&self, pos: usize) -> Result<usize> {
        self.offsets
            .binary_search(&pos)
            .map_err(|_| Error::contract(format!("position {} is not a block boundary", pos)))
    }

    /// One past the last structurally nonzero row of column `col`.
    pub fn col_bottom(&self, col: usize) -> usize {
        self.offsets[self.block_of(col) + 1]
    }

    /// Replaces every diagonal entry `i >= from` with `|b_ii| < u ||B||_F`
    /// by `2 u rho ||B||_F` with `rho` standard normal (redrawn while the
    /// replacement would fall below `0.5 u ||B||_F`). Returns the number of
    /// replacements.
    pub fn desingularize(&mut self, from: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        if self.bnorm == 0.0 {
            return Err(Error::contract("desingularize: ||B||_F must be positive"));
        }
        let u = UNIT_ROUNDOFF;
        let mut count = 0;
        for i in from..self.n() {
            if self.b[(i, i)].abs() < u * self.bnorm {
                let mut rho: f64 = rng.sample(StandardNormal);
                while rho.abs() < 0.25 {
                    rho = rng.sample(StandardNormal);
                }
                self.b[(i, i)] = 2.0 * u * rho * self.bnorm;
                let block = self.block_of(i);
                self.lu[block] = None;
                count += 1;
            }
        }
        Ok(count)
    }

    fn ensure_lu(&mut self, block: usize, fc: &mut FlopCounter) -> Result<()> {
        if self.lu[block].is_none() {
            let (b0, b1) = (self.offsets[block], self.offsets[block + 1]);
            let f = lu_pp(&self.b.sub(b0, b0, b1 - b0, b1 - b0), fc)?;
            self.lu[block] = Some(f);
        }
        Ok(())
    }

    /// Solves `B[from.., from..] y = rhs` in place by block backward
    /// substitution; `from` must be a block boundary. Cached LU factors are
    /// refreshed lazily and reused across solves.
    pub fn back_substitute(&mut self, from: usize, rhs: &mut [f64], fc: &mut FlopCounter) -> Result<()> {
        let n = self.n();
        if rhs.len() != n - from {
            return Err(Error::contract("back_substitute: rhs length mismatch"));
        }
        let bi0 = self.boundary_index(from)?;
        let nblocks = self.offsets.len() - 1;
        for bi in (bi0..nblocks).rev() {
            let (b0, b1) = (self.offsets[bi], self.offsets[bi + 1]);
            let bs = b1 - b0;
            if bs == 1 {
                let d = self.b[(b0, b0)];
                if d == 0.0 {
                    return Err(Error::SingularSystem(format!(
                        "exact zero diagonal at {} during back substitution",
                        b0
                    )));
                }
                rhs[b0 - from] /= d;
                fc.add(1);
            } else {
                self.ensure_lu(bi, fc)?;
                let f = self.lu[bi].as_ref().unwrap();
                f.solve(&mut rhs[b0 - from..b1 - from], fc)?;
            }
            if b0 > from {
                for c in b0..b1 {
                    let yc = rhs[c - from];
                    if yc != 0.0 {
                        for r in from..b0 {
                            rhs[r - from] -= self.b[(r, c)] * yc;
                        }
                    }
                }
                fc.add(2 * ((b0 - from) * bs) as u64);
            }
        }
        Ok(())
    }

    /// `y = B[from.., from..] x` exploiting the block structure.
    pub fn matvec(&self, from: usize, x: &[f64], fc: &mut FlopCounter) -> Vec<f64> {
        let n = self.n();
        debug_assert_eq!(x.len(), n - from);
        let mut y = vec![0.0; n - from];
        let mut work = 0u64;
        for c in from..n {
            let bot = self.col_bottom(c);
            let xc = x[c - from];
            work += (bot - from) as u64;
            if xc != 0.0 {
                for r in from..bot {
                    y[r - from] += self.b[(r, c)] * xc;
                }
            }
        }
        fc.add(2 * work);
        y
    }
}

/// Outcome of [`solve_with_refinement`].
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub x: Vec<f64>,
    /// Number of correction solves performed (0 when the first residual
    /// already passes the tolerance test).
    pub ir_steps: usize,
    pub converged: bool,
    /// Final absolute residual norm `||c - ~B22 x||_2`.
    pub final_residual: f64,
}

fn check_window(
    b: &BlockTriangularB,
    uwy: &CompactWy,
    vwy: &CompactWy,
    s: usize,
    j: usize,
) -> Result<usize> {
    let n = b.n();
    if j < s || j + 1 >= n {
        return Err(Error::contract(format!("column {} outside window [{}, {})", j, s, n - 1)));
    }
    let wlen = n - s - 1;
    if (!uwy.is_empty() && uwy.dim() != wlen) || (!vwy.is_empty() && vwy.dim() != wlen) {
        return Err(Error::contract("WY aggregates do not match the solve window"));
    }
    Ok(wlen)
}

/// Factored-form solve of `~B22 x = rhs` where
/// `~B = (I - U S U^T)^T B (I - V T V^T)` restricted to the panel window
/// `[s+1, n)` and `~B22` is its trailing part starting at row/column `j+1`.
///
/// The aggregates are window-local: row 0 of `U`, `V` is global row `s+1`.
/// Fast (`O(n^2)`) but in general not backward stable for `j > s`; callers
/// run it under [`solve_with_refinement`].
pub fn solve_factored(
    b: &mut BlockTriangularB,
    uwy: &CompactWy,
    vwy: &CompactWy,
    s: usize,
    j: usize,
    rhs: &[f64],
    fc: &mut FlopCounter,
) -> Result<Vec<f64>> {
    let wlen = check_window(b, uwy, vwy, s, j)?;
    let off = j - s;
    if rhs.len() != wlen - off {
        return Err(Error::contract("solve_factored: rhs length mismatch"));
    }
    let mut z = vec![0.0; wlen];
    z[off..].copy_from_slice(rhs);
    uwy.apply_vec(&mut z, false, fc)?;
    b.back_substitute(s + 1, &mut z, fc)?;
    vwy.apply_vec(&mut z, true, fc)?;
    Ok(z[off..].to_vec())
}

/// [`solve_factored`] with `rhs = e_1`, the opposite-reflector right-hand
/// side.
pub fn solve_factored_e1(
    b: &mut BlockTriangularB,
    uwy: &CompactWy,
    vwy: &CompactWy,
    s: usize,
    j: usize,
    fc: &mut FlopCounter,
) -> Result<Vec<f64>> {
    let n = b.n();
    let mut e1 = vec![0.0; n - j - 1];
    e1[0] = 1.0;
    solve_factored(b, uwy, vwy, s, j, &e1, fc)
}

/// Residual `r = e_1 - ~B22 x_hat` evaluated through the factored form
/// (embed, V-apply, B-multiply, transposed U-apply, extract).
pub fn residual_e1(
    b: &BlockTriangularB,
    uwy: &CompactWy,
    vwy: &CompactWy,
    s: usize,
    j: usize,
    xhat: &[f64],
    fc: &mut FlopCounter,
) -> Result<Vec<f64>> {
    let wlen = check_window(b, uwy, vwy, s, j)?;
    let off = j - s;
    if xhat.len() != wlen - off {
        return Err(Error::contract("residual_e1: xhat length mismatch"));
    }
    let mut w = vec![0.0; wlen];
    w[off..].copy_from_slice(xhat);
    vwy.apply_vec(&mut w, false, fc)?;
    let mut w = b.matvec(s + 1, &w, fc);
    uwy.apply_vec(&mut w, true, fc)?;
    let mut r = vec![0.0; wlen - off];
    r[0] = 1.0;
    for (ri, wi) in r.iter_mut().zip(&w[off..]) {
        *ri -= wi;
    }
    fc.add((wlen - off) as u64);
    Ok(r)
}

/// Iteratively refined factored solve of `~B22 x = e_1`.
///
/// Runs the residual-correction loop while `||r||_2 / ||x||_2 > tol`, with
/// at most `max_iters` correction solves. Non-convergence is a normal
/// outcome (`converged = false`) that triggers the caller's fall-back.
#[allow(clippy::too_many_arguments)]
pub fn solve_with_refinement(
    b: &mut BlockTriangularB,
    uwy: &CompactWy,
    vwy: &CompactWy,
    s: usize,
    j: usize,
    max_iters: usize,
    tol: f64,
    fc: &mut FlopCounter,
) -> Result<SolveOutcome> {
    let mut x = solve_factored_e1(b, uwy, vwy, s, j, fc)?;
    let mut ir_steps = 0;
    loop {
        let r = residual_e1(b, uwy, vwy, s, j, &x, fc)?;
        let rn = crate::matrix::norm2(&r);
        let xn = crate::matrix::norm2(&x);
        if xn == 0.0 {
            // Possible only for a zero right-hand side; the residual is the
            // right-hand side itself.
            return Ok(SolveOutcome { x, ir_steps, converged: true, final_residual: rn });
        }
        if rn <= tol * xn {
            return Ok(SolveOutcome { x, ir_steps, converged: true, final_residual: rn });
        }
        if ir_steps >= max_iters {
            return Ok(SolveOutcome { x, ir_steps, converged: false, final_residual: rn });
        }
        let c = solve_factored(b, uwy, vwy, s, j, &r, fc)?;
        for (xi, ci) in x.iter_mut().zip(&c) {
            *xi += ci;
        }
        fc.add(x.len() as u64);
        ir_steps += 1;
    }
}

/// Opposite reflector for the first column of a panel: with the left
/// reflector `u` (supported on rows `[j+1, n)`) already accounted for, the
/// solve reduces to the rank-1-modified triangular system
/// `x = B[j+1.., j+1..]^{-1} (e_1 - beta u u_1)`, which is stable by
/// construction. `B` must be desingularized first.
pub fn opposite_reflector_first(
    b: &mut BlockTriangularB,
    u: &Reflector,
    j: usize,
    fc: &mut FlopCounter,
) -> Result<Reflector> {
    let n = b.n();
    let m2 = n - j - 1;
    if u.len() != m2 {
        return Err(Error::contract("opposite_reflector_first: reflector length mismatch"));
    }
    let mut y = vec![0.0; m2];
    y[0] = 1.0;
    if !u.is_identity() {
        let w = u.beta() * u.v()[0];
        for (yi, vi) in y.iter_mut().zip(u.v()) {
            *yi -= w * vi;
        }
        fc.add(2 * m2 as u64);
    }
    b.back_substitute(j + 1, &mut y, fc)?;
    let (h, _) = house(&y, fc)?;
    Ok(h)
}
