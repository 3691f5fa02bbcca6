//! Kron reduction: Schur complement of a Laplacian over a deleted vertex
//! set, giving a reduced network of the same structural class.
//!
//! Reduction commutes with the right scaling by `Ξ`, so reducing `L` and
//! reducing `L Ξ(x*)` describe the same reduced dynamics.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{CrnError, Result};
use crate::graph::ComponentDecomposition;
use crate::linalg::{self, Matrix, Vector};
use crate::network::complex_monomials;

/// Relative LU pivot threshold on the deleted block.
pub const SINGULAR_PIVOT: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionResult {
    pub kept: Vec<usize>,
    pub deleted: Vec<usize>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub l_hat: Matrix,
    /// Kept columns of the composition matrix.
    pub z_hat: Vec<Vec<i64>>,
    /// Reference state when `l_hat` was reduced from a balanced Laplacian.
    pub x_star: Option<Vec<f64>>,
    /// Largest entry of the unreduced Laplacian; residuals are relative to it.
    #[serde(skip)]
    pub source_scale: f64,
}

/// `L̂ = L₁₁ − L₁₂ L₂₂⁻¹ L₂₁` over the kept vertices.
///
/// `protected` vertices (the zero complex of an open network) may not be
/// deleted. A singular `L₂₂` is reported with the deleted vertices that
/// have no directed path to a kept vertex.
pub fn kron_reduce(
    l: &Matrix,
    z: &DMatrix<i64>,
    delete: &[usize],
    protected: &[usize],
    x_star: Option<&Vector>,
) -> Result<ReductionResult> {
    let n = l.nrows();
    if z.ncols() != n {
        return Err(CrnError::Invalid(format!(
            "composition matrix has {} columns for {n} vertices",
            z.ncols()
        )));
    }
    let mut deleted: Vec<usize> = delete.to_vec();
    deleted.sort_unstable();
    if deleted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CrnError::Invalid("delete set lists a vertex twice".into()));
    }
    if let Some(&v) = deleted.iter().find(|&&v| v >= n) {
        return Err(CrnError::Invalid(format!("vertex {v} does not exist")));
    }
    if let Some(&v) = deleted.iter().find(|v| protected.contains(v)) {
        return Err(CrnError::Invalid(format!(
            "vertex {v} is the zero complex and cannot be deleted"
        )));
    }
    let kept: Vec<usize> = (0..n).filter(|v| !deleted.contains(v)).collect();
    if kept.is_empty() {
        return Err(CrnError::Invalid("cannot delete every vertex".into()));
    }
    let l11 = l.select_rows(&kept).select_columns(&kept);
    let l_hat = if deleted.is_empty() {
        l11
    } else {
        let l12 = l.select_rows(&kept).select_columns(&deleted);
        let l21 = l.select_rows(&deleted).select_columns(&kept);
        let l22 = l.select_rows(&deleted).select_columns(&deleted);
        let thresh = SINGULAR_PIVOT * linalg::inf_norm_mat(&l22);
        let lu = l22.clone().lu();
        let u = lu.u();
        if (0..deleted.len()).any(|i| u[(i, i)].abs() <= thresh) {
            return Err(singular_error(l, &kept, &deleted));
        }
        let x = lu.solve(&l21).expect("nonsingular by pivot check");
        l11 - l12 * x
    };
    let z_hat = (0..z.nrows())
        .map(|i| kept.iter().map(|&j| z[(i, j)]).collect())
        .collect();
    Ok(ReductionResult {
        kept,
        deleted,
        l_hat,
        z_hat,
        x_star: x_star.map(|x| x.iter().copied().collect()),
        source_scale: linalg::max_abs(l),
    })
}

fn singular_error(l: &Matrix, kept: &[usize], deleted: &[usize]) -> CrnError {
    // backward search from kept vertices along edges tail → head
    let n = l.nrows();
    let mut reaches = vec![false; n];
    for &k in kept {
        reaches[k] = true;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for &tail in deleted {
            if reaches[tail] {
                continue;
            }
            if (0..n).any(|head| head != tail && reaches[head] && l[(head, tail)] < 0.0) {
                reaches[tail] = true;
                changed = true;
            }
        }
    }
    let stuck: Vec<usize> = deleted.iter().copied().filter(|&v| !reaches[v]).collect();
    let sub = l.select_rows(&stuck).select_columns(&stuck);
    let groups = ComponentDecomposition::from_laplacian(&sub);
    let names: Vec<String> = groups
        .members()
        .iter()
        .map(|g| {
            let v: Vec<String> = g.iter().map(|&i| format!("C{}", stuck[i] + 1)).collect();
            format!("{{{}}}", v.join(", "))
        })
        .collect();
    CrnError::Invalid(format!(
        "deleted block is singular: {} cannot reach any kept complex",
        if names.is_empty() {
            "a deleted group".to_string()
        } else {
            names.join(", ")
        }
    ))
}

impl ReductionResult {
    pub fn z_hat_matrix(&self) -> Matrix {
        let m = self.z_hat.len();
        Matrix::from_fn(m, self.kept.len(), |i, j| self.z_hat[i][j] as f64)
    }

    fn z_hat_i64(&self) -> DMatrix<i64> {
        let m = self.z_hat.len();
        DMatrix::from_fn(m, self.kept.len(), |i, j| self.z_hat[i][j])
    }

    /// `Exp(Ẑᵀ Ln x)`, or `Exp(Ẑᵀ Ln(x / x*))` for balanced reductions.
    pub fn evaluation(&self, x: &Vector) -> Vector {
        let z = self.z_hat_i64();
        match &self.x_star {
            Some(r) => {
                let ratio = x.zip_map(&Vector::from_vec(r.clone()), |a, b| a / b);
                complex_monomials(&z, &ratio)
            }
            None => complex_monomials(&z, x),
        }
    }

    /// Reduced dynamics `ẋ = −Ẑ L̂ Exp(...)`.
    pub fn rhs(&self, x: &Vector) -> Vector {
        -(self.z_hat_matrix() * (&self.l_hat * self.evaluation(x)))
    }

    /// Incidence matrix of the reduced graph, one column per negative
    /// off-diagonal entry of `L̂`.
    pub fn incidence(&self) -> DMatrix<i64> {
        let edges = crate::balance::laplacian_edges(&self.l_hat);
        let mut d = DMatrix::<i64>::zeros(self.kept.len(), edges.len());
        for (j, &(tail, head, _)) in edges.iter().enumerate() {
            d[(tail, j)] = -1;
            d[(head, j)] = 1;
        }
        d
    }

    /// Reduced stoichiometric matrix `Ẑ D̂`.
    pub fn stoichiometric(&self) -> Matrix {
        self.z_hat_matrix() * linalg::to_f64(&self.incidence())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionCheck {
    /// `‖1ᵀL̂‖∞`.
    pub column_sum: f64,
    /// `‖L̂ 1‖∞`; required to vanish only for balanced reductions.
    pub row_sum: f64,
    pub diagonal_positive: bool,
    pub off_diagonal_nonpositive: bool,
    /// Largest `‖L̂ ŵ‖∞` over the supplied steady states.
    pub inclusion_residual: f64,
    /// Largest gap between the raw and balanced reduced right-hand sides.
    pub raw_balanced_gap: Option<f64>,
    pub violations: Vec<String>,
}

/// Checks sign and balance properties of `L̂` and that each steady state of
/// the original network still satisfies the reduced equation.
///
/// `states` are original concentrations; `raw` is the reduction of the
/// unscaled Laplacian, compared against `reduced` when that one is
/// balanced.
pub fn verify_reduction(
    reduced: &ReductionResult,
    states: &[Vector],
    raw: Option<&ReductionResult>,
    tol: f64,
) -> ReductionCheck {
    let l = &reduced.l_hat;
    let k = l.nrows();
    let ones = Vector::from_element(k, 1.0);
    let scale = reduced.source_scale.max(f64::MIN_POSITIVE);
    let column_sum = linalg::inf_norm(&(l.transpose() * &ones));
    let row_sum = linalg::inf_norm(&(l * &ones));
    let diagonal_positive = k == 1 || (0..k).all(|i| l[(i, i)] > 0.0);
    let off_diagonal_nonpositive = (0..k).all(|i| (0..k).all(|j| i == j || l[(i, j)] <= tol * scale));
    let mut violations = Vec::new();
    if column_sum > tol * scale {
        violations.push(format!("column sums of the reduced Laplacian reach {column_sum:e}"));
    }
    if reduced.x_star.is_some() && row_sum > tol * scale {
        violations.push(format!("row sums of the balanced reduced Laplacian reach {row_sum:e}"));
    }
    if !diagonal_positive {
        violations.push("reduced Laplacian has a nonpositive diagonal entry".into());
    }
    if !off_diagonal_nonpositive {
        violations.push("reduced Laplacian has a positive off-diagonal entry".into());
    }
    let mut inclusion_residual: f64 = 0.0;
    for x in states {
        let w = reduced.evaluation(x);
        let r = linalg::inf_norm(&(l * &w)) / (scale * linalg::inf_norm(&w)).max(f64::MIN_POSITIVE);
        inclusion_residual = inclusion_residual.max(r);
    }
    if inclusion_residual > tol {
        violations.push(format!(
            "an original steady state misses the reduced equation by {inclusion_residual:e}"
        ));
    }
    let raw_balanced_gap = raw.map(|raw| {
        states
            .iter()
            .map(|x| {
                let a = reduced.rhs(x);
                let b = raw.rhs(x);
                linalg::inf_norm(&(&a - &b)) / (1.0 + linalg::inf_norm(&b))
            })
            .fold(0.0, f64::max)
    });
    if let Some(g) = raw_balanced_gap {
        if g > tol {
            violations.push(format!("raw and balanced reductions disagree by {g:e}"));
        }
    }
    ReductionCheck {
        column_sum,
        row_sum,
        diagonal_positive,
        off_diagonal_nonpositive,
        inclusion_residual,
        raw_balanced_gap,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_bal() -> (Matrix, DMatrix<i64>) {
        let l = Matrix::from_row_slice(3, 3, &[6., -2., -4., -6., 6., 0., 0., -4., 4.]);
        let z = DMatrix::from_row_slice(3, 3, &[1, 0, 0, 0, 1, 0, 0, 2, 0]);
        (l, z)
    }

    #[test]
    fn example_schur_complement() {
        let (l, z) = example_bal();
        let r = kron_reduce(&l, &z, &[1], &[2], None).unwrap();
        assert_eq!(r.kept, vec![0, 2]);
        let want = Matrix::from_row_slice(2, 2, &[4., -4., -4., 4.]);
        assert!((&r.l_hat - want).amax() < 1e-14);
        assert!(kron_reduce(&l, &z, &[2], &[2], None).is_err());
    }

    #[test]
    fn empty_delete_is_identity() {
        let (l, z) = example_bal();
        let r = kron_reduce(&l, &z, &[], &[2], None).unwrap();
        assert_eq!(r.l_hat, l);
    }

    #[test]
    fn series_conductance() {
        let l = Matrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.]);
        let z = DMatrix::<i64>::identity(3, 3);
        let r = kron_reduce(&l, &z, &[1], &[], None).unwrap();
        assert!((r.l_hat[(0, 1)] + 0.5).abs() < 1e-15);
        assert!((r.l_hat[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn singular_block_names_group() {
        // C1 ⇌ C2, C3 → C4 with C4 a sink; deleting C4 leaves L₂₂ = [0]
        let l = Matrix::from_row_slice(
            4,
            4,
            &[1., -1., 0., 0., -1., 1., 0., 0., 0., 0., 1., 0., 0., 0., -1., 0.],
        );
        let z = DMatrix::<i64>::identity(4, 4);
        let err = kron_reduce(&l, &z, &[3], &[], None).unwrap_err().to_string();
        assert!(err.contains("{C4}"), "{err}");
    }
}
