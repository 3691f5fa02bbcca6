//! Reversible networks: Wegscheider conditions, formal balancing,
//! conductances and the symmetric balanced Laplacian `D_H 𝓚ʳ D_Hᵀ`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use serde::Serialize;

use crate::balance;
use crate::config::Tolerances;
use crate::error::{CrnError, Result};
use crate::exact::{self, QMatrix, Rational};
use crate::graph;
use crate::linalg::{self, Matrix, Vector};
use crate::network::ReactionNetwork;

/// One reversible edge `S_j ⇌ P_j` of the undirected graph `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReversibleEdge {
    pub substrate: usize,
    pub product: usize,
    /// Reaction index of `S_j → P_j`.
    pub forward: usize,
    /// Reaction index of `P_j → S_j`.
    pub backward: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReversibleNetwork {
    network: ReactionNetwork,
    edges: Vec<ReversibleEdge>,
    d_h: DMatrix<i64>,
    s_h: DMatrix<i64>,
    k_plus: Vector,
    k_minus: Vector,
}

impl ReversibleNetwork {
    /// Pairs every reaction with its reverse; fails when one is unpaired.
    ///
    /// Explicit `reverse` links are used first, then remaining reactions are
    /// matched by swapped endpoints in order of appearance.
    pub fn from_network(network: &ReactionNetwork) -> Result<Self> {
        let rx = network.reactions();
        let mut partner: Vec<Option<usize>> = rx.iter().map(|r| r.reverse).collect();
        for j in 0..rx.len() {
            if partner[j].is_some() {
                continue;
            }
            let found = (0..rx.len()).find(|&i| {
                i != j && partner[i].is_none() && rx[i].substrate == rx[j].product && rx[i].product == rx[j].substrate
            });
            match found {
                Some(i) => {
                    partner[j] = Some(i);
                    partner[i] = Some(j);
                }
                None => {
                    return Err(CrnError::Invalid(format!(
                        "reaction {} → {} has no reverse",
                        network.complex_label(rx[j].substrate),
                        network.complex_label(rx[j].product)
                    )))
                }
            }
        }
        let edges: Vec<ReversibleEdge> = (0..rx.len())
            .filter_map(|j| {
                let b = partner[j].expect("all paired");
                (j < b).then_some(ReversibleEdge {
                    substrate: rx[j].substrate,
                    product: rx[j].product,
                    forward: j,
                    backward: b,
                })
            })
            .collect();
        let c = network.num_complexes();
        let mut d_h = DMatrix::<i64>::zeros(c, edges.len());
        for (j, e) in edges.iter().enumerate() {
            d_h[(e.substrate, j)] = -1;
            d_h[(e.product, j)] = 1;
        }
        let s_h = &network.matrices().z * &d_h;
        let k_plus = Vector::from_iterator(edges.len(), edges.iter().map(|e| rx[e.forward].rate));
        let k_minus = Vector::from_iterator(edges.len(), edges.iter().map(|e| rx[e.backward].rate));
        Ok(ReversibleNetwork {
            network: network.clone(),
            edges,
            d_h,
            s_h,
            k_plus,
            k_minus,
        })
    }

    pub fn network(&self) -> &ReactionNetwork {
        &self.network
    }

    pub fn edges(&self) -> &[ReversibleEdge] {
        &self.edges
    }

    pub fn d_h(&self) -> &DMatrix<i64> {
        &self.d_h
    }

    pub fn s_h(&self) -> &DMatrix<i64> {
        &self.s_h
    }

    pub fn k_plus(&self) -> &Vector {
        &self.k_plus
    }

    pub fn k_minus(&self) -> &Vector {
        &self.k_minus
    }

    /// `K_eq_j = k⁺_j / k⁻_j`.
    pub fn k_eq(&self) -> Vector {
        self.k_plus.component_div(&self.k_minus)
    }

    fn exact_k_eq(&self) -> Result<Vec<Rational>> {
        let rx = self.network.reactions();
        self.edges
            .iter()
            .map(|e| {
                let kp = rx[e.forward].exact();
                let km = rx[e.backward].exact();
                match (kp, km) {
                    (Some(a), Some(b)) => Ok(a / b),
                    _ => Err(CrnError::Invalid("rate has no exact value".into())),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MembershipCheck {
    pub holds: bool,
    /// Least-squares residual `‖r‖∞`; `None` in exact mode.
    pub residual: Option<f64>,
}

fn log_membership(
    rev: &ReversibleNetwork,
    a: &DMatrix<i64>,
    tol: &Tolerances,
    exact_mode: bool,
) -> Result<MembershipCheck> {
    if exact_mode {
        // Ln K_eq ∈ im Aᵀ ⇔ Π K_eq^y = 1 for every integer y ∈ ker A
        let k_eq = rev.exact_k_eq()?;
        let holds = QMatrix::from_i64(a)
            .integer_kernel_basis()
            .iter()
            .all(|y| exact::product_of_powers_is_one(&k_eq, y));
        return Ok(MembershipCheck { holds, residual: None });
    }
    let v = linalg::ln(&rev.k_eq());
    let at = linalg::to_f64(a).transpose();
    let residual = if at.ncols() == 0 || at.nrows() == 0 {
        linalg::inf_norm(&v)
    } else {
        linalg::membership_residual(&v, &at, tol.rank)
    };
    Ok(MembershipCheck {
        holds: residual <= tol.membership * (1.0 + linalg::inf_norm(&v)),
        residual: Some(residual),
    })
}

/// `Ln K_eq ∈ im S_Hᵀ`: a detailed-balanced equilibrium exists.
pub fn wegscheider_check(rev: &ReversibleNetwork, tol: &Tolerances, exact_mode: bool) -> Result<MembershipCheck> {
    log_membership(rev, &rev.s_h, tol, exact_mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FormalBalance {
    pub holds: bool,
    pub residual: Option<f64>,
    /// `‖𝓛 − 𝓛ᵀ‖∞ / ‖𝓛‖∞` for `𝓛 = L·diag(ρ)`.
    pub asymmetry: f64,
}

/// `L·diag(ρ)` with ρ normalised to maximum one per component.
pub fn rho_balanced_laplacian(network: &ReactionNetwork, tol: &Tolerances) -> Result<Matrix> {
    let comps = graph::components(&network.matrices().d);
    let rho = graph::matrix_tree_rho(network.laplacian(), &comps, tol.positivity)?;
    let mut r = rho.values.clone();
    for members in comps.members() {
        let max = members.iter().map(|&v| r[v]).fold(0.0, f64::max);
        if max > 0.0 {
            for &v in members {
                r[v] /= max;
            }
        }
    }
    Ok(network.laplacian() * Matrix::from_diagonal(&Vector::from_vec(r)))
}

/// `Ln K_eq ∈ im D_Hᵀ` (weakened Wegscheider conditions, formal balancing).
///
/// Cross-checked against symmetry of `L·diag(ρ)`; disagreement is an
/// internal error.
pub fn weakened_wegscheider_check(
    rev: &ReversibleNetwork,
    tol: &Tolerances,
    exact_mode: bool,
) -> Result<FormalBalance> {
    let m = log_membership(rev, &rev.d_h, tol, exact_mode)?;
    let lr = rho_balanced_laplacian(&rev.network, tol)?;
    let asymmetry = linalg::max_abs(&(&lr - lr.transpose())) / linalg::max_abs(&lr).max(f64::MIN_POSITIVE);
    let symmetric = asymmetry <= tol.symmetry;
    if symmetric != m.holds {
        return Err(CrnError::Internal(format!(
            "formal balancing test says {} but L·diag(ρ) has relative asymmetry {asymmetry:e}",
            m.holds
        )));
    }
    Ok(FormalBalance {
        holds: m.holds,
        residual: m.residual,
        asymmetry,
    })
}

/// Solves `S_Hᵀ μ = Ln K_eq` by least squares and returns `x* = Exp(μ)`.
pub fn detailed_balanced_equilibrium(rev: &ReversibleNetwork, tol: &Tolerances) -> Result<Vector> {
    let v = linalg::ln(&rev.k_eq());
    let a = linalg::to_f64(&rev.s_h).transpose();
    let (mu, r) = linalg::least_squares(&a, &v, tol.rank);
    let res = linalg::inf_norm(&r);
    let bound = tol.membership * (1.0 + linalg::inf_norm(&v));
    if res > bound {
        return Err(CrnError::Rejected {
            what: "Wegscheider system".into(),
            residual: res,
            tolerance: bound,
        });
    }
    Ok(linalg::exp(&mu))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Conductances {
    /// `κ_j = k⁺_j exp(Z_{S_j}ᵀ Ln x*)`.
    pub kappa: Vec<f64>,
    /// Largest relative gap between the forward and backward evaluations.
    pub mismatch: f64,
}

impl Conductances {
    /// `D_H 𝓚ʳ D_Hᵀ`.
    pub fn laplacian(&self, d_h: &DMatrix<i64>) -> Matrix {
        let d = linalg::to_f64(d_h);
        &d * Matrix::from_diagonal(&Vector::from_vec(self.kappa.clone())) * d.transpose()
    }
}

/// Conductances at a detailed-balanced `x*`, verified against the balanced
/// Laplacian `L Ξ(x*)`.
pub fn conductances(rev: &ReversibleNetwork, x_star: &Vector, tol: &Tolerances) -> Result<Conductances> {
    let w = rev.network.complex_monomials(x_star);
    let mut kappa = Vec::with_capacity(rev.edges.len());
    let mut mismatch: f64 = 0.0;
    for (j, e) in rev.edges.iter().enumerate() {
        let fwd = rev.k_plus[j] * w[e.substrate];
        let bwd = rev.k_minus[j] * w[e.product];
        mismatch = mismatch.max((fwd - bwd).abs() / fwd.abs().max(bwd.abs()));
        kappa.push(0.5 * (fwd + bwd));
    }
    if mismatch > tol.equilibrium {
        return Err(CrnError::Rejected {
            what: "detailed-balanced state".into(),
            residual: mismatch,
            tolerance: tol.equilibrium,
        });
    }
    let out = Conductances { kappa, mismatch };
    let bal = balance::BalancedLaplacian::from_parts(
        x_star.iter().copied().collect(),
        rev.network.laplacian(),
        &w,
        tol.equilibrium,
    )?;
    let sym = out.laplacian(&rev.d_h);
    let gap = linalg::max_abs(&(&sym - &bal.l_bal));
    if gap > tol.equilibrium * linalg::max_abs(&bal.l_bal).max(1.0) {
        return Err(CrnError::Internal(format!(
            "D_H 𝓚ʳ D_Hᵀ differs from L Ξ(x*) by {gap:e}"
        )));
    }
    Ok(out)
}

/// `Π K_eq^y` exponent vectors: an integer basis of `ker S_H`.
pub fn wegscheider_exponents(rev: &ReversibleNetwork) -> Vec<Vec<BigInt>> {
    QMatrix::from_i64(&rev.s_h).integer_kernel_basis()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(k: [f64; 6]) -> ReversibleNetwork {
        let n = ReactionNetwork::single_species(
            3,
            &[
                (0, 1, k[0]),
                (1, 0, k[1]),
                (1, 2, k[2]),
                (2, 1, k[3]),
                (2, 0, k[4]),
                (0, 2, k[5]),
            ],
        )
        .unwrap();
        ReversibleNetwork::from_network(&n).unwrap()
    }

    #[test]
    fn pairs_edges() {
        let r = cycle([1.0; 6]);
        assert_eq!(r.edges().len(), 3);
        // edge C3 ⇌ C1 uses k5 forward, k6 backward
        assert_eq!(r.edges()[2].substrate, 2);
        assert_eq!(r.edges()[2].product, 0);
    }

    #[test]
    fn unpaired_is_rejected() {
        let n = ReactionNetwork::single_species(2, &[(0, 1, 1.0)]).unwrap();
        assert!(ReversibleNetwork::from_network(&n).is_err());
    }

    #[test]
    fn wegscheider_cycle() {
        let t = Tolerances::default();
        for exact in [false, true] {
            assert!(wegscheider_check(&cycle([1.0; 6]), &t, exact).unwrap().holds);
            let k = [2.0, 1.0, 1.0, 1.0, 1.0, 1.0];
            assert!(!wegscheider_check(&cycle(k), &t, exact).unwrap().holds);
            let f = weakened_wegscheider_check(&cycle([1., 2., 3., 4., 5., 6.]), &t, exact).unwrap();
            assert!(!f.holds && f.asymmetry > 1e-3);
        }
    }

    #[test]
    fn conductance_pair() {
        let t = Tolerances::default();
        let n = ReactionNetwork::single_species(2, &[(0, 1, 2.0), (1, 0, 1.0)]).unwrap();
        let r = ReversibleNetwork::from_network(&n).unwrap();
        let c = conductances(&r, &Vector::from_vec(vec![1.0, 2.0]), &t).unwrap();
        assert_eq!(c.kappa, vec![2.0]);
        assert!(conductances(&r, &Vector::from_vec(vec![1.0, 1.0]), &t).is_err());
        let x = detailed_balanced_equilibrium(&r, &t).unwrap();
        assert!((x[1] / x[0] - 2.0).abs() < 1e-12);
    }
}
