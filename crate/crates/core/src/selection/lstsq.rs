//! Ordinary least squares with pairwise interaction columns.
//!
//! The design for base columns `c1..ck` is `[1, c1..ck, ci·cj for i ≤ j]`
//! (squares included — a quadratic response in one variable is otherwise
//! unrepresentable). Normal equations are solved by Cholesky with a
//! symmetric-eigendecomposition pseudo-inverse fallback, which yields the
//! minimum-norm solution for singular systems.

use ndarray::{Array1, Array2, ArrayView2};

/// Width of the interaction design over `k` base columns.
pub(crate) fn design_width(k: usize) -> usize {
    1 + k + k * (k + 1) / 2
}

/// Design-matrix column of the product `c_i·c_j` (`i ≤ j`, base indices
/// into a `d`-column layout produced by [`full_design`]).
pub(crate) fn product_column(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < d);
    // Products before row i of the upper triangle: Σ_{t<i}(d−t).
    1 + d + i * (2 * d - i + 1) / 2 + (j - i)
}

/// Interaction design over all `d` columns of `x`.
pub(crate) fn full_design(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut design = Array2::zeros((n, design_width(d)));
    for r in 0..n {
        design[[r, 0]] = 1.0;
        for i in 0..d {
            design[[r, 1 + i]] = x[[r, i]];
        }
        let mut col = 1 + d;
        for i in 0..d {
            for j in i..d {
                design[[r, col]] = x[[r, i]] * x[[r, j]];
                col += 1;
            }
        }
    }
    design
}

/// Interaction design restricted to `cols` of `x` (row subset `rows`).
pub(crate) fn subset_design(
    x: ArrayView2<'_, f64>,
    rows: &[usize],
    cols: &[usize],
) -> Array2<f64> {
    let k = cols.len();
    let mut design = Array2::zeros((rows.len(), design_width(k)));
    for (r, &row) in rows.iter().enumerate() {
        design[[r, 0]] = 1.0;
        for (i, &ci) in cols.iter().enumerate() {
            design[[r, 1 + i]] = x[[row, ci]];
        }
        let mut col = 1 + k;
        for i in 0..k {
            let vi = x[[row, cols[i]]];
            for &cj in &cols[i..] {
                design[[r, col]] = vi * x[[row, cj]];
                col += 1;
            }
        }
    }
    design
}

/// Columns of the full-`d` design that make up the design of `cols`.
/// Order matches [`subset_design`]: intercept, bases, then products.
pub(crate) fn subset_design_columns(d: usize, cols: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(design_width(cols.len()));
    out.push(0);
    out.extend(cols.iter().map(|&c| 1 + c));
    for (i, &ci) in cols.iter().enumerate() {
        for &cj in &cols[i..] {
            out.push(product_column(d, ci, cj));
        }
    }
    out
}

/// Lower-triangular Cholesky factor, or `None` when the matrix is not
/// (numerically) positive definite.
fn cholesky(g: &Array2<f64>) -> Option<Array2<f64>> {
    let p = g.nrows();
    let scale = (0..p).fold(0.0_f64, |acc, i| acc.max(g[[i, i]].abs()));
    let floor = scale.max(1e-300) * 1e-11;
    let mut l: Array2<f64> = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut sum = g[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum <= floor {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solve `L·Lᵀ·x = b` for each column of `b`.
fn cholesky_solve(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let p = l.nrows();
    let q = b.ncols();
    let mut x = b.clone();
    for c in 0..q {
        for i in 0..p {
            let mut v = x[[i, c]];
            for k in 0..i {
                v -= l[[i, k]] * x[[k, c]];
            }
            x[[i, c]] = v / l[[i, i]];
        }
        for i in (0..p).rev() {
            let mut v = x[[i, c]];
            for k in i + 1..p {
                v -= l[[k, i]] * x[[k, c]];
            }
            x[[i, c]] = v / l[[i, i]];
        }
    }
    x
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns).
fn jacobi_eigen(g: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let p = g.nrows();
    let mut a = g.clone();
    let mut v = Array2::eye(p);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..p {
            for j in i + 1..p {
                off += a[[i, j]] * a[[i, j]];
            }
        }
        let scale = (0..p).fold(0.0_f64, |acc, i| acc.max(a[[i, i]].abs()));
        if off.sqrt() <= scale.max(1e-300) * 1e-13 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                let apq = a[[i, j]];
                if apq == 0.0 {
                    continue;
                }
                let app = a[[i, i]];
                let aqq = a[[j, j]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = a[[k, i]];
                    let akj = a[[k, j]];
                    a[[k, i]] = c * aki - s * akj;
                    a[[k, j]] = s * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[[i, k]];
                    let ajk = a[[j, k]];
                    a[[i, k]] = c * aik - s * ajk;
                    a[[j, k]] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let vki = v[[k, i]];
                    let vkj = v[[k, j]];
                    v[[k, i]] = c * vki - s * vkj;
                    v[[k, j]] = s * vki + c * vkj;
                }
            }
        }
    }
    let vals = Array1::from_shape_fn(p, |i| a[[i, i]]);
    (vals, v)
}

/// Minimum-norm solve of `g·x = b` via the eigen pseudo-inverse.
fn pinv_solve(g: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (vals, vecs) = jacobi_eigen(g);
    let p = g.nrows();
    let vmax = vals.iter().fold(0.0_f64, |acc, &l| acc.max(l.abs()));
    let cutoff = vmax * p as f64 * 1e-12;
    // x = V · Λ⁺ · Vᵀ · b
    let vtb = vecs.t().dot(b);
    let mut scaled = vtb;
    for (i, mut row) in scaled.outer_iter_mut().enumerate() {
        let inv = if vals[i].abs() > cutoff {
            1.0 / vals[i]
        } else {
            0.0
        };
        row.mapv_inplace(|v| v * inv);
    }
    vecs.dot(&scaled)
}

/// Solve the normal equations `g·β = b`, falling back to the minimum-norm
/// pseudo-inverse when `g` is singular.
pub(crate) fn solve_normal_equations(g: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    match cholesky(g) {
        Some(l) => cholesky_solve(&l, b),
        None => pinv_solve(g, b),
    }
}
