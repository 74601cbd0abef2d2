//! Panel reduction: a group of consecutive columns of `A` is reduced while
//! all two-sided updates are delayed in compact WY form and `B` stays
//! untouched in its factored representation.

use crate::error::Result;
use crate::matrix::{gemv, DenseMatrix, FlopCounter};
use crate::reflector::house;
use crate::solve::{solve_with_refinement, BlockTriangularB};
use crate::wy::CompactWy;

/// State of one panel starting at column `s`.
///
/// The aggregates are window-local: row 0 of `U`/`V` corresponds to global
/// row `s + 1`, which is where every reflector of the panel is supported.
/// `Y = A V T` is kept at full height (all rows computed eagerly).
pub struct PanelState {
    pub s: usize,
    pub k: usize,
    pub uwy: CompactWy,
    pub vwy: CompactWy,
    pub y: DenseMatrix,
    nb: usize,
    saved_col: Vec<f64>,
}

/// Outcome of one column step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnOutcome {
    /// The column is reduced; `ir_steps` correction solves were needed.
    Ok { ir_steps: usize },
    /// Iterative refinement failed; the left reflector was undone and the
    /// panel must be absorbed prematurely.
    IrFailure,
}

impl PanelState {
    pub fn new(n: usize, s: usize, nb: usize) -> Self {
        let wlen = n - s - 1;
        PanelState {
            s,
            k: 0,
            uwy: CompactWy::new(wlen, nb),
            vwy: CompactWy::new(wlen, nb),
            y: DenseMatrix::zeros(n, nb),
            nb,
            saved_col: vec![0.0; n],
        }
    }

    /// The column the next step will reduce.
    pub fn current_column(&self) -> usize {
        self.s + self.k
    }

    pub fn is_full(&self) -> bool {
        self.k == self.nb
    }
}

/// Applies the `k` delayed two-sided updates to column `j = s + k` of `A`
/// and snapshots the column for a possible undo.
pub fn panel_update_column(state: &mut PanelState, a: &mut DenseMatrix, fc: &mut FlopCounter) -> Result<()> {
    let n = a.rows();
    let (s, k) = (state.s, state.k);
    let j = s + k;
    state.saved_col.copy_from_slice(a.col(j));
    if k == 0 {
        return Ok(());
    }
    // Right part: A[:, j] -= Y V(j, :)^T, with V's row j at window-local
    // index k - 1.
    let vrow: Vec<f64> = (0..k).map(|i| state.vwy.v_factor().get(k - 1, i)).collect();
    gemv(a.col_mut(j), state.y.view(0, 0, n, k), &vrow, -1.0, 1.0, false, fc)?;
    // Left part: rows s+1.. of the column get (I - U S U^T)^T applied.
    state.uwy.apply_vec(&mut a.col_mut(j)[s + 1..], true, fc)?;
    Ok(())
}

/// Reduces column `j = s + k` of `A` from the left, then attempts the
/// factored solve that yields the opposite reflector implicitly reducing
/// column `j + 1` of the transformed `B`.
///
/// On success the aggregates and `Y` grow by one and the column's tail is
/// zeroed exactly. On refinement failure the column is restored from its
/// snapshot and the state is left unchanged. The `k = 0` solve is stable by
/// construction and therefore always accepted.
pub fn panel_reduce_column(
    state: &mut PanelState,
    a: &mut DenseMatrix,
    b: &mut BlockTriangularB,
    tol: f64,
    max_ir: usize,
    fc: &mut FlopCounter,
) -> Result<ColumnOutcome> {
    let n = a.rows();
    let (s, k) = (state.s, state.k);
    let j = s + k;
    debug_assert!(j + 3 <= n, "column {} has no tail to reduce", j);

    // b) Reduce column j of A from the left.
    let (hu, head) = house(&a.col(j)[j + 1..], fc)?;
    a[(j + 1, j)] = head;
    for i in (j + 2)..n {
        a[(i, j)] = 0.0;
    }
    state.uwy.append(&hu, k, fc)?;

    // c) Attempt to solve for the opposite reflector of column j + 1 of the
    // factored B.
    let out = solve_with_refinement(b, &state.uwy, &state.vwy, s, j, max_ir, tol, fc)?;
    if !out.converged && k > 0 {
        a.col_mut(j).copy_from_slice(&state.saved_col);
        state.uwy.pop();
        return Ok(ColumnOutcome::IrFailure);
    }

    // d) Implicitly reduce column j + 1 of the factored B from the right
    // and append the new Y column y = gamma (A v - Y V^T v).
    let (hv, _) = house(&out.x, fc)?;
    let mut ynew = vec![0.0; n];
    gemv(&mut ynew, a.view(0, j + 1, n, n - j - 1), hv.v(), 1.0, 0.0, false, fc)?;
    if k > 0 {
        // t = V^T v over the overlap of supports (V column i starts at
        // window row i; v starts at window row k).
        let wlen = n - s - 1;
        let mut t = vec![0.0; k];
        let vf = state.vwy.v_factor();
        for (i, ti) in t.iter_mut().enumerate() {
            let mut acc = 0.0;
            for r in k..wlen {
                acc += vf.get(r, i) * hv.v()[r - k];
            }
            *ti = acc;
        }
        fc.add(2 * (k * (wlen - k)) as u64);
        gemv(&mut ynew, state.y.view(0, 0, n, k), &t, -1.0, 1.0, false, fc)?;
    }
    let gamma = hv.beta();
    for v in ynew.iter_mut() {
        *v *= gamma;
    }
    fc.add(n as u64);
    state.y.col_mut(k).copy_from_slice(&ynew);
    state.vwy.append(&hv, k, fc)?;
    state.k += 1;
    Ok(ColumnOutcome::Ok { ir_steps: out.ir_steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{frob_norm, structure_defect, Structure};
    use crate::reflector::Side;
    use crate::UNIT_ROUNDOFF;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fc() -> FlopCounter {
        FlopCounter::new()
    }

    fn random_pencil(rng: &mut ChaCha8Rng, n: usize) -> (DenseMatrix, DenseMatrix) {
        let mut a = DenseMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        let mut b = DenseMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                b[(i, j)] = rng.random_range(-1.0..1.0);
            }
            b[(j, j)] += 2.0;
        }
        (a, b)
    }

    /// Reference: explicit two-sided update of A restricted to one column.
    fn explicit_updated_column(
        a0: &DenseMatrix,
        state: &PanelState,
        j: usize,
    ) -> Vec<f64> {
        let n = a0.rows();
        let s = state.s;
        let mut full = a0.clone();
        if !state.vwy.is_empty() {
            state
                .vwy
                .apply(full.view_mut(0, s + 1, n, n - s - 1), Side::Right, false, &mut fc())
                .unwrap();
        }
        if !state.uwy.is_empty() {
            state
                .uwy
                .apply(full.view_mut(s + 1, 0, n - s - 1, n), Side::Left, true, &mut fc())
                .unwrap();
        }
        full.col(j).to_vec()
    }

    fn run_panel(n: usize, k: usize, seed: u64) -> (DenseMatrix, DenseMatrix, PanelState, DenseMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut a, b) = random_pencil(&mut rng, n);
        let a0 = a.clone();
        let mut btb = BlockTriangularB::plain(b).unwrap();
        let tol = 2.0 * UNIT_ROUNDOFF * btb.bnorm();
        let mut state = PanelState::new(n, 0, k + 1);
        for _ in 0..k {
            panel_update_column(&mut state, &mut a, &mut fc()).unwrap();
            let out = panel_reduce_column(&mut state, &mut a, &mut btb, tol, 10, &mut fc()).unwrap();
            assert!(matches!(out, ColumnOutcome::Ok { .. }));
        }
        let bt = btb.matrix().clone();
        (a0, a, state, bt)
    }

    #[test]
    fn update_column_k0_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut a, _) = random_pencil(&mut rng, 6);
        let before = a.clone();
        let mut state = PanelState::new(6, 0, 4);
        panel_update_column(&mut state, &mut a, &mut fc()).unwrap();
        assert_eq!(a, before);
    }

    #[test]
    fn update_column_matches_explicit_two_sided_update() {
        for (n, k, tol) in [(5usize, 1usize, 1e-12), (10, 3, 1e-11)] {
            let (a0, mut a, mut state, _) = run_panel(n, k, 42 + n as u64);
            let j = state.current_column();
            panel_update_column(&mut state, &mut a, &mut fc()).unwrap();
            let want = explicit_updated_column(&a0, &state, j);
            let got = a.col(j);
            let scale = frob_norm(a0.as_ref());
            for i in 0..n {
                assert!(
                    (got[i] - want[i]).abs() <= tol * scale,
                    "n={} k={} row {}: {} vs {}",
                    n,
                    k,
                    i,
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn reduce_column_reduces_b_tilde_column() {
        // After k successful steps the factored ~B has its columns
        // s+1..s+k+1 reduced below the diagonal (checked explicitly).
        let n = 10;
        let k = 3;
        let (_, _, state, bt) = run_panel(n, k, 7);
        let s = state.s;
        let wlen = n - s - 1;
        let mut btilde = bt.sub(s + 1, s + 1, wlen, wlen);
        state.uwy.apply(btilde.as_mut(), Side::Left, true, &mut fc()).unwrap();
        state.vwy.apply(btilde.as_mut(), Side::Right, false, &mut fc()).unwrap();
        let bnorm = frob_norm(bt.as_ref());
        for c in 0..k {
            for r in (c + 1)..wlen {
                assert!(
                    btilde[(r, c)].abs() <= 1e-12 * bnorm,
                    "entry ({}, {}) = {:.3e}",
                    r,
                    c,
                    btilde[(r, c)]
                );
            }
        }
    }

    #[test]
    fn panel_state_invariants() {
        // Y = A0 V T to working accuracy, and k tracks the appends.
        let n = 10;
        let k = 3;
        let (a0, a, state, _) = run_panel(n, k, 11);
        assert_eq!(state.k, k);
        assert_eq!(state.uwy.len(), k);
        assert_eq!(state.vwy.len(), k);
        // A's reduced columns have exact zeros below the sub-diagonal.
        for c in 0..k {
            for r in (c + 2)..n {
                assert_eq!(a[(r, c)], 0.0);
            }
        }
        // Explicit Y oracle: A0 (window columns) * V * T.
        let s = state.s;
        let wlen = n - s - 1;
        let awin = a0.sub(0, s + 1, n, wlen);
        let v = state.vwy.v_factor().to_owned();
        let t = state.vwy.t_factor().to_owned();
        let mut av = DenseMatrix::zeros(n, k);
        crate::matrix::gemm_acc(av.as_mut(), awin.as_ref(), v.as_ref(), 1.0, 0.0, false, false, &mut fc()).unwrap();
        let mut want = DenseMatrix::zeros(n, k);
        crate::matrix::gemm_acc(want.as_mut(), av.as_ref(), t.as_ref(), 1.0, 0.0, false, false, &mut fc()).unwrap();
        let got = state.y.sub(0, 0, n, k);
        let scale = 50.0 * (n as f64) * UNIT_ROUNDOFF * frob_norm(a0.as_ref());
        assert!(got.max_abs_diff(&want) <= scale.max(1e-12));
    }

    #[test]
    fn failure_restores_column_exactly() {
        // Drive the solve into failure with a zero tolerance and a huge
        // iteration price of zero; the column must come back bit-identical.
        let n = 8;
        let (_, mut a, mut state, btm) = run_panel(n, 2, 13);
        let mut btb = BlockTriangularB::plain(btm).unwrap();
        let before = a.clone();
        panel_update_column(&mut state, &mut a, &mut fc()).unwrap();
        let out = panel_reduce_column(&mut state, &mut a, &mut btb, -1.0, 0, &mut fc()).unwrap();
        assert_eq!(out, ColumnOutcome::IrFailure);
        assert_eq!(state.k, 2);
        assert_eq!(state.uwy.len(), 2);
        let j = state.current_column();
        for i in 0..n {
            assert_eq!(a[(i, j)].to_bits(), before[(i, j)].to_bits());
        }
        // B is untouched throughout the panel.
        assert_eq!(structure_defect(btb.matrix().as_ref(), Structure::UpperTriangular).unwrap(), 0.0);
    }

    #[test]
    fn k0_solve_is_always_accepted() {
        // Even with an unattainable tolerance the first column of a panel
        // must complete (the direct solve is stable by construction).
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (mut a, b) = random_pencil(&mut rng, 6);
        let mut btb = BlockTriangularB::plain(b).unwrap();
        let mut state = PanelState::new(6, 0, 2);
        panel_update_column(&mut state, &mut a, &mut fc()).unwrap();
        let out = panel_reduce_column(&mut state, &mut a, &mut btb, -1.0, 0, &mut fc()).unwrap();
        assert!(matches!(out, ColumnOutcome::Ok { .. }));
        assert_eq!(state.k, 1);
    }
}
