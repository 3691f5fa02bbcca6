//! Dense subspace tools: rank, kernels, least squares, image membership.
//!
//! Everything here is desk-scale dense arithmetic. Rank and kernels come
//! from Gauss–Jordan elimination with partial pivoting and a threshold
//! relative to the largest entry; least squares goes through the SVD so
//! rank-deficient systems get the minimum-norm solution.

use nalgebra::{DMatrix, DVector};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn inf_norm(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Maximum absolute row sum.
pub fn inf_norm_mat(m: &Matrix) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn to_f64(m: &DMatrix<i64>) -> Matrix {
    m.map(|x| x as f64)
}

pub fn ln(v: &Vector) -> Vector {
    v.map(f64::ln)
}

pub fn exp(v: &Vector) -> Vector {
    v.map(f64::exp)
}

/// Reduced row echelon form together with its pivot columns.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub reduced: Matrix,
    pub pivots: Vec<usize>,
}

pub fn echelon(m: &Matrix, tol: f64) -> Echelon {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let thresh = tol * max_abs(m);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let (best, val) =
            (row..rows)
                .map(|r| (r, a[(r, col)].abs()))
                .fold((row, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= thresh || val == 0.0 {
            for r in row..rows {
                a[(r, col)] = 0.0;
            }
            continue;
        }
        a.swap_rows(row, best);
        let p = a[(row, col)];
        for c in col..cols {
            a[(row, c)] /= p;
        }
        for r in 0..rows {
            if r != row {
                let f = a[(r, col)];
                if f != 0.0 {
                    for c in col..cols {
                        let v = a[(row, c)];
                        a[(r, c)] -= f * v;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    Echelon { reduced: a, pivots }
}

pub fn rank(m: &Matrix, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    echelon(m, tol).pivots.len()
}

/// Basis of `ker m` as the columns of an `ncols × k` matrix.
pub fn kernel_basis(m: &Matrix, tol: f64) -> Matrix {
    let n = m.ncols();
    if m.nrows() == 0 {
        return Matrix::identity(n, n);
    }
    let e = echelon(m, tol);
    let free: Vec<usize> = (0..n).filter(|c| !e.pivots.contains(c)).collect();
    let mut basis = Matrix::zeros(n, free.len());
    for (k, &f) in free.iter().enumerate() {
        basis[(f, k)] = 1.0;
        for (r, &p) in e.pivots.iter().enumerate() {
            basis[(p, k)] = -e.reduced[(r, f)];
        }
    }
    basis
}

/// Linearly independent subset of the columns of `m` spanning `im m`.
pub fn column_basis(m: &Matrix, tol: f64) -> Matrix {
    if m.is_empty() {
        return Matrix::zeros(m.nrows(), 0);
    }
    let e = echelon(m, tol);
    if e.pivots.is_empty() {
        return Matrix::zeros(m.nrows(), 0);
    }
    Matrix::from_columns(&e.pivots.iter().map(|&p| m.column(p).into_owned()).collect::<Vec<_>>())
}

/// SVD with `U Σ Vᵀ` checked against `m`.
///
/// The default convergence threshold can stop on a wrong factorisation
/// when a singular value is numerically zero; looser thresholds are tried
/// until the reconstruction holds.
pub fn svd_checked(m: &Matrix) -> nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let mut last = None;
    for eps in [f64::EPSILON, 1e-15, 1e-14, 1e-13, 1e-12] {
        let Some(svd) = m.clone().try_svd(true, true, eps, 0) else {
            continue;
        };
        let (u, vt) = (
            svd.u.as_ref().expect("requested U"),
            svd.v_t.as_ref().expect("requested V"),
        );
        let err = max_abs(&(u * Matrix::from_diagonal(&svd.singular_values) * vt - m));
        if err <= 1e-12 * scale * (1 + m.nrows().max(m.ncols())) as f64 {
            return svd;
        }
        last = Some(svd);
    }
    last.expect("SVD iteration is unbounded")
}

/// Orthonormal basis of `im m` from the left singular vectors.
pub fn orthonormal_column_basis(m: &Matrix, tol: f64) -> Matrix {
    let rows = m.nrows();
    if m.is_empty() {
        return Matrix::zeros(rows, 0);
    }
    let svd = svd_checked(m);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &s| a.max(s));
    let keep: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > tol * smax && s > 0.0)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if keep.is_empty() {
        Matrix::zeros(rows, 0)
    } else {
        Matrix::from_columns(&keep)
    }
}

/// Minimum-norm least-squares solution of `a x ≈ b` and its residual
/// `b − a x`.
pub fn least_squares(a: &Matrix, b: &Vector, tol: f64) -> (Vector, Vector) {
    let (rows, cols) = a.shape();
    if cols == 0 || rows == 0 || max_abs(a) == 0.0 {
        return (Vector::zeros(cols), b.clone());
    }
    let svd = svd_checked(a);
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let x = svd.solve(b, tol * smax).expect("U and V were computed");
    let r = b - a * &x;
    (x, r)
}

/// `v ∈ im a`, judged by the least-squares residual:
/// ‖r‖∞ ≤ tol·(1 + ‖v‖∞).
pub fn image_membership(v: &Vector, a: &Matrix, tol: f64) -> bool {
    membership_residual(v, a, tol) <= tol * (1.0 + inf_norm(v))
}

pub fn membership_residual(v: &Vector, a: &Matrix, tol: f64) -> f64 {
    let (_, r) = least_squares(a, v, tol);
    inf_norm(&r)
}

/// Basis of `ker Z ∩ im D`.
///
/// A vector `D y` lies in `ker Z` exactly when `y ∈ ker ZD`, so the
/// intersection is the image of `ker S` under `D`.
pub fn intersection_ker_z_im_d(z: &Matrix, d: &Matrix, tol: f64) -> Matrix {
    let s = z * d;
    let ks = kernel_basis(&s, tol);
    let image = d * ks;
    column_basis(&image, tol)
}

/// Solves `a x = b` for square `a` by LU with partial pivoting; `None` when
/// a pivot falls below `thresh`.
pub fn lu_solve(a: &Matrix, b: &Vector, thresh: f64) -> Option<Vector> {
    let n = a.nrows();
    if n == 0 {
        return Some(Vector::zeros(0));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    if (0..n).any(|i| u[(i, i)].abs() <= thresh) {
        return None;
    }
    lu.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_kernel_of_cycle_incidence() {
        // 3-cycle C1→C2→C3→C1
        let d = Matrix::from_row_slice(3, 3, &[-1., 0., 1., 1., -1., 0., 0., 1., -1.]);
        assert_eq!(rank(&d, 1e-9), 2);
        let k = kernel_basis(&d, 1e-9);
        assert_eq!(k.ncols(), 1);
        assert!(inf_norm(&(&d * k.column(0))) < 1e-12);
        // the cycle vector has equal entries
        assert!((k[(0, 0)] - k[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn kernel_of_wide_and_empty() {
        let m = Matrix::zeros(0, 3);
        assert_eq!(kernel_basis(&m, 1e-9).ncols(), 3);
        let z = Matrix::zeros(2, 2);
        assert_eq!(rank(&z, 1e-9), 0);
        assert_eq!(kernel_basis(&z, 1e-9).ncols(), 2);
    }

    #[test]
    fn membership_identity_spans_everything() {
        let a = Matrix::identity(3, 3);
        let v = Vector::from_vec(vec![33f64.ln(), 2.0, -4.0]);
        assert!(image_membership(&v, &a, 1e-9));
    }

    #[test]
    fn membership_rejects_outside() {
        let a = Matrix::from_row_slice(3, 1, &[1., 1., 1.]);
        assert!(image_membership(&Vector::from_element(3, 2.5), &a, 1e-9));
        assert!(!image_membership(&Vector::from_vec(vec![1., 0., 0.]), &a, 1e-9));
    }

    #[test]
    fn least_squares_min_norm() {
        let a = Matrix::from_row_slice(1, 2, &[1., 1.]);
        let (x, r) = least_squares(&a, &Vector::from_vec(vec![2.0]), 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(inf_norm(&r) < 1e-12);
    }

    #[test]
    fn column_basis_drops_dependent() {
        let m = Matrix::from_row_slice(2, 3, &[1., 2., 0., 1., 2., 1.]);
        let b = column_basis(&m, 1e-9);
        assert_eq!(b.ncols(), 2);
        let o = orthonormal_column_basis(&m, 1e-9);
        assert_eq!(o.ncols(), 2);
        assert!((o.transpose() * &o - Matrix::identity(2, 2)).abs().max() < 1e-12);
    }

    #[test]
    fn lu_solve_detects_singular() {
        let a = Matrix::from_row_slice(2, 2, &[1., 1., 1., 1.]);
        assert!(lu_solve(&a, &Vector::from_vec(vec![1., 1.]), 1e-12).is_none());
        let a = Matrix::from_row_slice(2, 2, &[2., -1., -2., 3.]);
        let w = lu_solve(&a, &Vector::from_vec(vec![4., 0.]), 1e-12).unwrap();
        assert!((w[0] - 3.0).abs() < 1e-14 && (w[1] - 2.0).abs() < 1e-14);
    }
}
