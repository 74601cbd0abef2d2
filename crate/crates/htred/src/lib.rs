//! Hessenberg-triangular reduction of real matrix pencils `(A, B)` built on
//! Householder reflectors.
//!
//! Given square `A` and upper triangular `B`, the reduction finds orthogonal
//! `Q`, `Z` with `H = Q^T A Z` upper Hessenberg and `T = Q^T B Z` upper
//! triangular, the form required by the QZ iteration. The crate provides:
//!
//! - [`house_ht`]: the blocked algorithm. Panels of columns are reduced with
//!   delayed compact-WY updates while `B` is kept in factored form; the
//!   accumulated reflectors are then absorbed into `A`, `B`, `Q`, `Z` by
//!   staircase QL/QR/RQ sweeps that keep `B` (block) triangular. Opposite
//!   reflectors (applied from the right to reduce columns of `B`) are built
//!   from linear solves guarded by iterative refinement, with a fall-back
//!   absorption when refinement fails.
//! - [`reduce_basic`]: the unblocked reference variant, one left and one
//!   opposite right reflector per column, optimized for auditability.
//! - [`reduce_givens`]: a classical Givens-rotation reduction serving as an
//!   independent correctness witness and flop baseline.
//! - [`deflate_zero_columns`]: preprocessing that deflates infinite
//!   eigenvalues induced by structurally zero columns of `B`.
//! - Pencil generators, Matrix Market I/O, a verification harness, and a
//!   benchmark suite runner used by the `htred` binary.
//!
//! See the crate examples for end-to-end usage of each capability.

pub mod absorb;
pub mod basic;
pub mod blocked;
pub mod error;
pub mod factor;
pub mod gen;
pub mod givens;
pub mod matrix;
pub mod mm;
pub mod panel;
pub mod preprocess;
pub mod reflector;
pub mod report;
pub mod solve;
pub mod verify;
pub mod wy;

// TEMP pub use basic::reduce_basic;
// TEMP pub use blocked::{house_ht, HtConfig, ReductionReport};
pub use error::{Error, Result};
pub use factor::{lq_wy, lu_pp, ql_wy, qr_wy, reduced_left_transform, reduced_right_transform, rq_wy, LuFactors};
// TEMP pub use gen::{gen_random_pencil, gen_saddlepoint};
// TEMP pub use givens::{givens, reduce_givens, GivensRotation};
pub use matrix::{frob_norm, gemm_acc, structure_defect, DenseMatrix, FlopCounter, Structure};
// TEMP pub use mm::{mm_read, mm_write};
// TEMP pub use preprocess::deflate_zero_columns;
pub use reflector::{apply_reflector, house, house_last, Reflector, Side};
pub use solve::{BlockTriangularB, SolveOutcome};
// TEMP pub use verify::{verify, VerificationResult};
pub use wy::{CompactWy, RegularWy};

/// Unit roundoff of IEEE-754 binary64: half the machine epsilon.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;
