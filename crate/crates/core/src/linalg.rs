//! Matrix-product helpers with optional, deterministic parallelism.
//!
//! All products go through this module so that the `TUNESEL_THREADS`
//! environment variable caps the parallelism of every inner math loop in
//! one place. Parallel paths partition work by output rows; each output
//! row is computed by exactly one task with a fixed inner summation
//! order, so results are reproducible for a fixed thread configuration.

use std::sync::OnceLock;

use ndarray::linalg::general_mat_mul;
use ndarray::parallel::prelude::*;
use ndarray::{Array2, ArrayView2, Axis};

/// `a · b` into a fresh standard-layout array (plain `dot` may hand back
/// reversed axes when an operand is a transposed view).
fn dot_c(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    general_mat_mul(1.0, &a, &b, 0.0, &mut out);
    out
}

/// Environment variable capping internal math parallelism.
pub const THREADS_ENV: &str = "TUNESEL_THREADS";

/// Rows below this threshold are not worth splitting across threads.
const PAR_MIN_ROWS: usize = 64;

static MATH_THREADS: OnceLock<usize> = OnceLock::new();

/// Number of threads matrix products may use.
///
/// Read once from `TUNESEL_THREADS`; defaults to 1 (serial). Values are
/// clamped to at least 1. Reports and benchmark results record this so
/// runs can state the thread configuration they were produced under.
pub fn math_threads() -> usize {
    *MATH_THREADS.get_or_init(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .map(|v| v.max(1))
            .unwrap_or(1)
    })
}

/// `a · b`, row-partitioned across up to [`math_threads`] tasks.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let threads = math_threads();
    let (m, _) = a.dim();
    if threads <= 1 || m < PAR_MIN_ROWS {
        return dot_c(a, b);
    }
    let mut out = Array2::zeros((m, b.ncols()));
    let chunk = m.div_ceil(threads);
    out.axis_chunks_iter_mut(Axis(0), chunk)
        .into_par_iter()
        .zip(a.axis_chunks_iter(Axis(0), chunk).into_par_iter())
        .for_each(|(mut slab, rows)| general_mat_mul(1.0, &rows, &b, 0.0, &mut slab));
    out
}

/// `a · bᵀ`, row-partitioned like [`matmul`].
pub fn matmul_nt(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let threads = math_threads();
    let (m, _) = a.dim();
    if threads <= 1 || m < PAR_MIN_ROWS {
        return dot_c(a, b.t());
    }
    let mut out = Array2::zeros((m, b.nrows()));
    let chunk = m.div_ceil(threads);
    out.axis_chunks_iter_mut(Axis(0), chunk)
        .into_par_iter()
        .zip(a.axis_chunks_iter(Axis(0), chunk).into_par_iter())
        .for_each(|(mut slab, rows)| general_mat_mul(1.0, &rows, &b.t(), 0.0, &mut slab));
    out
}

/// `aᵀ · b`, partitioned over columns of `a` (rows of the output).
pub fn matmul_tn(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let threads = math_threads();
    let k = a.ncols();
    if threads <= 1 || k < PAR_MIN_ROWS {
        return dot_c(a.t(), b);
    }
    let mut out = Array2::zeros((k, b.ncols()));
    let chunk = k.div_ceil(threads);
    out.axis_chunks_iter_mut(Axis(0), chunk)
        .into_par_iter()
        .zip(a.axis_chunks_iter(Axis(1), chunk).into_par_iter())
        .for_each(|(mut slab, cols)| general_mat_mul(1.0, &cols.t(), &b, 0.0, &mut slab));
    out
}
