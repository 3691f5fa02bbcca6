//! Graph structure of a Laplacian: connected components, strong
//! connectivity, and the Matrix-Tree kernel vector ρ.
//!
//! Laplacians here use the column convention of `L = −DK`: an edge
//! `i → j` with weight `w` shows up as `L[(j, i)] = −w`, and every column
//! sums to zero. The cofactor `ρ_k = det L[V∖k, V∖k]` on a component `V`
//! equals the total weight of spanning trees directed towards `k`.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use num_traits::{Signed, Zero};

use crate::error::{CrnError, Result};
use crate::exact::{QMatrix, Rational};
use crate::linalg::Matrix;

/// Largest component the brute-force spanning-tree enumeration accepts.
pub const ORACLE_MAX_VERTICES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentDecomposition {
    assignment: Vec<usize>,
    members: Vec<Vec<usize>>,
}

impl ComponentDecomposition {
    /// Components of the undirected graph on `n` vertices with the given
    /// edges. Component ids follow the smallest member vertex.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (a, b) in edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut assignment = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut root_id = vec![usize::MAX; n];
        for v in 0..n {
            let r = find(&mut parent, v);
            if root_id[r] == usize::MAX {
                root_id[r] = members.len();
                members.push(Vec::new());
            }
            assignment[v] = root_id[r];
            members[root_id[r]].push(v);
        }
        ComponentDecomposition { assignment, members }
    }

    /// Components of the undirected support of an incidence matrix.
    pub fn from_incidence(d: &DMatrix<i64>) -> Self {
        let edges = (0..d.ncols()).filter_map(|j| {
            let col = d.column(j);
            let tail = col.iter().position(|&x| x < 0)?;
            let head = col.iter().position(|&x| x > 0)?;
            Some((tail, head))
        });
        Self::from_edges(d.nrows(), edges)
    }

    /// Components of the off-diagonal support of a square matrix.
    pub fn from_laplacian(l: &Matrix) -> Self {
        let n = l.nrows();
        let edges = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && l[(j, i)] != 0.0);
        Self::from_edges(n, edges)
    }

    pub fn count(&self) -> usize {
        self.members.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn component_of(&self, v: usize) -> usize {
        self.assignment[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.assignment.len()
    }

    /// Indicator matrix `E` (n×ℓ), `E[(v, j)] = 1` iff `v` lies in component `j`.
    pub fn indicator(&self) -> Matrix {
        Matrix::from_fn(self.num_vertices(), self.count(), |v, j| {
            if self.assignment[v] == j {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// Components of the graph with incidence matrix `d`; `ℓ = c − rank D` is
/// asserted in debug builds.
pub fn components(d: &DMatrix<i64>) -> ComponentDecomposition {
    let comps = ComponentDecomposition::from_incidence(d);
    debug_assert_eq!(
        comps.count(),
        d.nrows() - crate::linalg::rank(&crate::linalg::to_f64(d), 1e-9)
    );
    comps
}

fn reach(l: &Matrix, members: &[usize], start: usize, forward: bool) -> usize {
    let n = l.nrows();
    let mut in_comp = vec![false; n];
    for &v in members {
        in_comp[v] = true;
    }
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &u in members {
            if u == v || seen[u] {
                continue;
            }
            // forward: edge v → u, i.e. L[(u, v)] < 0
            let w = if forward { l[(u, v)] } else { l[(v, u)] };
            if w < 0.0 && in_comp[u] {
                seen[u] = true;
                count += 1;
                queue.push_back(u);
            }
        }
    }
    count
}

/// Strong connectivity of the subgraph on `members`, by graph search.
pub fn is_strongly_connected(l: &Matrix, members: &[usize]) -> bool {
    match members.first() {
        None => true,
        Some(&s) => reach(l, members, s, true) == members.len() && reach(l, members, s, false) == members.len(),
    }
}

/// Kernel vector of `L` from Matrix-Tree cofactors, stacked per component.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoVector {
    pub values: Vec<f64>,
    /// One flag per connected component.
    pub strongly_connected: Vec<bool>,
}

impl RhoVector {
    pub fn all_positive(&self) -> bool {
        self.strongly_connected.iter().all(|&s| s)
    }

    pub fn as_vector(&self) -> crate::linalg::Vector {
        crate::linalg::Vector::from_vec(self.values.clone())
    }
}

fn minor_indices(members: &[usize], skip: usize) -> Vec<usize> {
    members
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .collect()
}

/// `ρ_k = det` of the component Laplacian with row and column `k` removed.
///
/// `ρ_k` is zero exactly when some vertex of the component cannot reach
/// `k`; that pattern comes from graph search, and the determinants must
/// agree with it: a rooted vertex needs `ρ_k > positivity·max`, an
/// unrooted one `|ρ_k| ≤ positivity·h` with `h` the Hadamard bound of its
/// minor. Disagreement is reported as [`CrnError::Internal`].
pub fn matrix_tree_rho(l: &Matrix, comps: &ComponentDecomposition, positivity: f64) -> Result<RhoVector> {
    let mut values = vec![0.0; l.nrows()];
    let mut strongly_connected = Vec::with_capacity(comps.count());
    for members in comps.members() {
        let mut local: Vec<f64> = Vec::with_capacity(members.len());
        let mut rooted: Vec<bool> = Vec::with_capacity(members.len());
        for k in 0..members.len() {
            let idx = minor_indices(members, k);
            let minor = l.select_rows(&idx).select_columns(&idx);
            let det = if idx.is_empty() { 1.0 } else { minor.determinant() };
            if !det.is_finite() {
                let scale = crate::linalg::max_abs(&minor);
                return Err(CrnError::Numeric(format!(
                    "Matrix-Tree determinant of a {}×{} minor overflowed \
                     (largest entry {scale:e}); retry in exact rational mode",
                    idx.len(),
                    idx.len()
                )));
            }
            let root = reach(l, members, members[k], false) == members.len();
            if !root {
                let hadamard: f64 = minor.column_iter().map(|c| c.norm()).product();
                if det.abs() > positivity * hadamard {
                    return Err(CrnError::Internal(format!(
                        "vertex {} has no spanning in-tree but its Matrix-Tree minor is {det:e}",
                        members[k]
                    )));
                }
            }
            local.push(if root { det } else { 0.0 });
            rooted.push(root);
        }
        let max = local.iter().cloned().fold(0.0, f64::max);
        if let Some(k) = (0..local.len()).find(|&k| rooted[k] && local[k] <= positivity * max) {
            return Err(CrnError::Internal(format!(
                "vertex {} has a spanning in-tree but its Matrix-Tree minor is {:e}",
                members[k], local[k]
            )));
        }
        let positive = rooted.iter().all(|&r| r);
        if positive != is_strongly_connected(l, members) {
            return Err(CrnError::Internal(format!(
                "in-tree roots and strong connectivity disagree on component {members:?}"
            )));
        }
        for (&v, x) in members.iter().zip(local) {
            values[v] = x;
        }
        strongly_connected.push(positive);
    }
    Ok(RhoVector {
        values,
        strongly_connected,
    })
}

/// Exact counterpart of [`matrix_tree_rho`] over ℚ.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRho {
    pub values: Vec<Rational>,
    pub strongly_connected: Vec<bool>,
}

pub fn matrix_tree_rho_exact(l: &QMatrix, comps: &ComponentDecomposition) -> Result<ExactRho> {
    let mut values = vec![Rational::zero(); l.nrows()];
    let mut strongly_connected = Vec::with_capacity(comps.count());
    for members in comps.members() {
        let mut positive = true;
        for k in 0..members.len() {
            let idx = minor_indices(members, k);
            let det = if idx.is_empty() {
                Rational::from_integer(1.into())
            } else {
                l.principal(&idx).determinant()
            };
            if det.is_negative() {
                return Err(CrnError::Internal(format!(
                    "negative exact Matrix-Tree cofactor at vertex {}",
                    members[k]
                )));
            }
            positive &= !det.is_zero();
            values[members[k]] = det;
        }
        strongly_connected.push(positive);
    }
    Ok(ExactRho {
        values,
        strongly_connected,
    })
}

/// Sum over spanning trees directed towards `target` of the product of edge
/// weights, by exhaustive enumeration over the component of `target`.
///
/// Test oracle only: refuses components above [`ORACLE_MAX_VERTICES`].
pub fn spanning_tree_oracle(l: &Matrix, target: usize) -> Result<f64> {
    let comps = ComponentDecomposition::from_laplacian(l);
    let members = &comps.members()[comps.component_of(target)];
    if members.len() > ORACLE_MAX_VERTICES {
        return Err(CrnError::Invalid(format!(
            "spanning-tree enumeration limited to {ORACLE_MAX_VERTICES} vertices, component has {}",
            members.len()
        )));
    }
    let others: Vec<usize> = members.iter().copied().filter(|&v| v != target).collect();
    // outgoing edges (head, weight) of every non-target vertex
    let out: Vec<Vec<(usize, f64)>> = others
        .iter()
        .map(|&v| {
            members
                .iter()
                .filter(|&&u| u != v && l[(u, v)] < 0.0)
                .map(|&u| (u, -l[(u, v)]))
                .collect()
        })
        .collect();
    let mut parent = vec![usize::MAX; l.nrows()];
    let mut total = 0.0;
    enumerate(0, &others, &out, &mut parent, target, 1.0, &mut total);
    Ok(total)
}

fn enumerate(
    depth: usize,
    others: &[usize],
    out: &[Vec<(usize, f64)>],
    parent: &mut [usize],
    target: usize,
    weight: f64,
    total: &mut f64,
) {
    if depth == others.len() {
        *total += weight;
        return;
    }
    let v = others[depth];
    for &(u, w) in &out[depth] {
        // following parents from u must not return to v
        let mut x = u;
        let mut cycle = false;
        while x != target && parent[x] != usize::MAX {
            x = parent[x];
            if x == v {
                cycle = true;
                break;
            }
        }
        if cycle || u == v {
            continue;
        }
        parent[v] = u;
        enumerate(depth + 1, others, out, parent, target, weight * w, total);
        parent[v] = usize::MAX;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle_l(k: [f64; 6]) -> Matrix {
        Matrix::from_row_slice(
            3,
            3,
            &[
                k[0] + k[5],
                -k[1],
                -k[4],
                -k[0],
                k[1] + k[2],
                -k[3],
                -k[5],
                -k[2],
                k[3] + k[4],
            ],
        )
    }

    #[test]
    fn cycle_rho_is_33() {
        let l = cycle_l([1., 2., 3., 4., 5., 6.]);
        let comps = ComponentDecomposition::from_laplacian(&l);
        assert_eq!(comps.count(), 1);
        let rho = matrix_tree_rho(&l, &comps, 1e-12).unwrap();
        for v in &rho.values {
            assert!((v - 33.0).abs() < 1e-12);
        }
        assert!(rho.all_positive());
        for t in 0..3 {
            assert!((spanning_tree_oracle(&l, t).unwrap() - 33.0).abs() < 1e-12);
        }
    }

    #[test]
    fn irreversible_pair() {
        let l = Matrix::from_row_slice(2, 2, &[1., 0., -1., 0.]);
        let comps = ComponentDecomposition::from_laplacian(&l);
        let rho = matrix_tree_rho(&l, &comps, 1e-12).unwrap();
        assert_eq!(rho.values, vec![0.0, 1.0]);
        assert_eq!(rho.strongly_connected, vec![false]);
    }

    #[test]
    fn symmetric_pair() {
        let l = Matrix::from_row_slice(2, 2, &[1., -1., -1., 1.]);
        let comps = ComponentDecomposition::from_laplacian(&l);
        let rho = matrix_tree_rho(&l, &comps, 1e-12).unwrap();
        assert_eq!(rho.values, vec![1.0, 1.0]);
        assert_eq!(rho.strongly_connected, vec![true]);
    }

    #[test]
    fn oracle_small_cases() {
        // A ⇌ B with A→B = 2, B→A = 3: one tree towards A, the edge B→A
        let l = Matrix::from_row_slice(2, 2, &[2., -3., -2., 3.]);
        assert_eq!(spanning_tree_oracle(&l, 0).unwrap(), 3.0);
        // star: center 0 with edges 0→1, 0→2 only; leaves have no out-edges
        let l = Matrix::from_row_slice(3, 3, &[2., 0., 0., -1., 0., 0., -1., 0., 0.]);
        assert_eq!(spanning_tree_oracle(&l, 1).unwrap(), 0.0);
        assert_eq!(spanning_tree_oracle(&l, 2).unwrap(), 0.0);
    }

    #[test]
    fn oracle_refuses_large() {
        let n = ORACLE_MAX_VERTICES + 1;
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            let j = (i + 1) % n;
            l[(j, i)] = -1.0;
            l[(i, i)] = 1.0;
        }
        assert!(spanning_tree_oracle(&l, 0).is_err());
    }

    #[test]
    fn disjoint_components() {
        // A→B, C→D
        let d = DMatrix::from_row_slice(4, 2, &[-1i64, 0, 1, 0, 0, -1, 0, 1]);
        let comps = components(&d);
        assert_eq!(comps.count(), 2);
        assert_eq!(comps.members(), &[vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn exact_matches_float() {
        let l = cycle_l([1., 2., 3., 4., 5., 6.]);
        let q = QMatrix::from_fn(3, 3, |r, c| Rational::from_float(l[(r, c)]).unwrap());
        let comps = ComponentDecomposition::from_laplacian(&l);
        let e = matrix_tree_rho_exact(&q, &comps).unwrap();
        assert!(e.values.iter().all(|v| v == &Rational::from_integer(33.into())));
    }
}
