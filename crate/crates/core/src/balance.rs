//! Complex balance: the decision procedure, complex-balanced equilibria,
//! the balanced Laplacian `𝓛(x*) = L Ξ(x*)`, the equilibrium set, and
//! mass conservation.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{CrnError, Result};
use crate::exact::{self, QMatrix, Rational};
use crate::graph::{self, ComponentDecomposition};
use crate::linalg::{self, Matrix, Vector};
use crate::lp::{self, LpOutcome};
use crate::network::ReactionNetwork;

/// A basis vector `σ` of `ker Z ∩ im D` whose product `Π ρ_i^{σ_i}`
/// differs from one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentViolation {
    pub sigma: Vec<i64>,
    pub value: f64,
    pub log_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceVerdict {
    /// Every connected component is strongly connected.
    pub weakly_reversible: bool,
    /// `Dᵀ Ln ρ ∈ im Sᵀ`; `None` when ρ has a zero entry and the logarithm
    /// is undefined.
    pub condition_final1: Option<bool>,
    pub complex_balanced: bool,
    /// `None` exactly when `condition_final1` is `None`.
    pub exponent_violations: Option<Vec<ExponentViolation>>,
    /// ρ normalised to maximum one on each component.
    pub rho: Vec<f64>,
    pub components: usize,
    pub deficiency: usize,
    /// `‖r‖∞` of the least-squares membership test (float mode only).
    pub membership_residual: Option<f64>,
    pub exact: bool,
}

/// `rank D − rank ZD`.
pub fn deficiency(network: &ReactionNetwork) -> usize {
    let m = network.matrices();
    QMatrix::from_i64(&m.d).rank() - QMatrix::from_i64(&m.s).rank()
}

/// Integer basis `y` of `ker S`, paired with the images `σ = D y` that
/// form a basis of `ker Z ∩ im D`.
fn exponent_basis(network: &ReactionNetwork) -> Vec<(Vec<BigInt>, Vec<i64>)> {
    let m = network.matrices();
    let d = &m.d;
    let mut out: Vec<(Vec<BigInt>, Vec<i64>)> = Vec::new();
    let mut rank = 0;
    for y in QMatrix::from_i64(&m.s).integer_kernel_basis() {
        let sigma: Vec<i64> = (0..d.nrows())
            .map(|i| {
                let s = (0..d.ncols()).fold(BigInt::zero(), |acc, j| acc + &y[j] * d[(i, j)]);
                s.to_i64().expect("exponent fits in i64")
            })
            .collect();
        if sigma.iter().all(|&s| s == 0) {
            continue;
        }
        let cols = out.len() + 1;
        let stacked = QMatrix::from_fn(d.nrows(), cols, |r, c| {
            let v = if c < out.len() { out[c].1[r] } else { sigma[r] };
            Rational::from_integer(v.into())
        });
        let new_rank = stacked.rank();
        if new_rank > rank {
            rank = new_rank;
            out.push((y, sigma));
        }
    }
    out
}

fn normalised(values: &[f64], comps: &ComponentDecomposition) -> Vec<f64> {
    let mut out = values.to_vec();
    for members in comps.members() {
        let max = members.iter().map(|&v| values[v]).fold(0.0, f64::max);
        if max > 0.0 {
            for &v in members {
                out[v] /= max;
            }
        }
    }
    out
}

/// Decides complex-balancedness of a closed network from its rate
/// constants alone.
///
/// The verdict combines two routes: least-squares membership
/// `Dᵀ Ln ρ ∈ im Sᵀ` and the product condition `Π ρ_i^{σ_i} = 1` over an
/// integer basis of `ker Z ∩ im D`. In exact mode both run over ℚ. A
/// disagreement between the routes is an internal error.
pub fn check_complex_balanced(network: &ReactionNetwork, tol: &Tolerances, exact_mode: bool) -> Result<BalanceVerdict> {
    let comps = graph::components(&network.matrices().d);
    let basis = exponent_basis(network);
    let def = deficiency(network);
    if exact_mode {
        let lq = network.exact_laplacian()?;
        let rho = graph::matrix_tree_rho_exact(&lq, &comps)?;
        let float_rho: Vec<f64> = rho.values.iter().map(exact::to_f64).collect();
        let weakly_reversible = rho.strongly_connected.iter().all(|&s| s);
        let mut verdict = BalanceVerdict {
            weakly_reversible,
            condition_final1: None,
            complex_balanced: false,
            exponent_violations: None,
            rho: normalised(&float_rho, &comps),
            components: comps.count(),
            deficiency: def,
            membership_residual: None,
            exact: true,
        };
        if !weakly_reversible {
            return Ok(verdict);
        }
        let violations: Vec<ExponentViolation> = basis
            .iter()
            .filter(|(_, sigma)| {
                let e: Vec<BigInt> = sigma.iter().map(|&s| BigInt::from(s)).collect();
                !exact::product_of_powers_is_one(&rho.values, &e)
            })
            .map(|(_, sigma)| {
                let log_value: f64 = sigma
                    .iter()
                    .zip(&rho.values)
                    .map(|(&s, r)| s as f64 * exact::ln_abs(r))
                    .sum();
                ExponentViolation {
                    sigma: sigma.clone(),
                    value: log_value.exp(),
                    log_value,
                }
            })
            .collect();
        let ok = violations.is_empty();
        verdict.condition_final1 = Some(ok);
        verdict.complex_balanced = ok;
        verdict.exponent_violations = Some(violations);
        return Ok(verdict);
    }

    let rho = graph::matrix_tree_rho(network.laplacian(), &comps, tol.positivity)?;
    let rho_n = normalised(&rho.values, &comps);
    let mut verdict = BalanceVerdict {
        weakly_reversible: rho.all_positive(),
        condition_final1: None,
        complex_balanced: false,
        exponent_violations: None,
        rho: rho_n.clone(),
        components: comps.count(),
        deficiency: def,
        membership_residual: None,
        exact: false,
    };
    if !verdict.weakly_reversible {
        return Ok(verdict);
    }
    let ln_rho = linalg::ln(&Vector::from_vec(rho_n));
    let d = network.d();
    let v = d.transpose() * &ln_rho;
    let st = network.s().transpose();
    let residual = linalg::membership_residual(&v, &st, tol.rank);
    let final1 = residual <= tol.membership * (1.0 + linalg::inf_norm(&v));
    let scale = 1.0 + linalg::inf_norm(&v);
    let violations: Vec<ExponentViolation> = basis
        .iter()
        .filter_map(|(y, sigma)| {
            let log_value: f64 = sigma.iter().zip(ln_rho.iter()).map(|(&s, l)| s as f64 * l).sum();
            let y1: f64 = y.iter().map(|e| e.abs().to_f64().unwrap_or(f64::MAX)).sum();
            (log_value.abs() > tol.membership * y1 * scale).then(|| ExponentViolation {
                sigma: sigma.clone(),
                value: log_value.exp(),
                log_value,
            })
        })
        .collect();
    if violations.is_empty() != final1 {
        return Err(CrnError::Internal(format!(
            "membership route says {final1} (residual {residual:e}) but the exponent route found {} violation(s)",
            violations.len()
        )));
    }
    verdict.condition_final1 = Some(final1);
    verdict.complex_balanced = final1;
    verdict.exponent_violations = Some(violations);
    verdict.membership_residual = Some(residual);
    Ok(verdict)
}

/// `‖L w‖∞` and its acceptance bound `tol·‖L‖∞·‖w‖∞` for `w = Exp(Zᵀ Ln x)`.
pub fn equilibrium_residual(l: &Matrix, w: &Vector, tol: f64) -> (f64, f64) {
    let res = linalg::inf_norm(&(l * w));
    (res, tol * linalg::inf_norm_mat(l) * linalg::inf_norm(w))
}

/// Accepts `x` as a complex-balanced equilibrium or reports its residual.
pub fn verify_complex_balanced(network: &ReactionNetwork, x: &Vector, tol: &Tolerances) -> Result<f64> {
    if x.len() != network.num_species() {
        return Err(CrnError::Invalid(format!(
            "state has {} entries, expected {}",
            x.len(),
            network.num_species()
        )));
    }
    if x.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(CrnError::Invalid("state must be strictly positive".into()));
    }
    let w = network.complex_monomials(x);
    let (res, bound) = equilibrium_residual(network.laplacian(), &w, tol.equilibrium);
    if res > bound {
        return Err(CrnError::Rejected {
            what: "complex-balanced equilibrium".into(),
            residual: res,
            tolerance: bound,
        });
    }
    Ok(res)
}

/// Solves `Zᵀ μ = Ln ρ + E β′` jointly for `μ` and one free constant per
/// component, and returns `x* = Exp(μ)`.
pub fn find_complex_balanced_equilibrium(
    network: &ReactionNetwork,
    verdict: &BalanceVerdict,
    tol: &Tolerances,
) -> Result<Vector> {
    if !verdict.complex_balanced {
        return Err(CrnError::Invalid("network is not complex-balanced".into()));
    }
    let comps = graph::components(&network.matrices().d);
    let m = network.num_species();
    let c = network.num_complexes();
    let e = comps.indicator();
    let zt = network.z().transpose();
    let a = Matrix::from_fn(
        c,
        m + comps.count(),
        |i, j| {
            if j < m {
                zt[(i, j)]
            } else {
                -e[(i, j - m)]
            }
        },
    );
    let b = linalg::ln(&Vector::from_vec(verdict.rho.clone()));
    let (sol, r) = linalg::least_squares(&a, &b, tol.rank);
    let res = linalg::inf_norm(&r);
    let bound = tol.membership * (1.0 + linalg::inf_norm(&b));
    if res > bound {
        return Err(CrnError::Rejected {
            what: "log-linear solve for x*".into(),
            residual: res,
            tolerance: bound,
        });
    }
    let x = linalg::exp(&sol.rows(0, m).into_owned());
    if x.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(CrnError::Numeric("x* left the representable range".into()));
    }
    verify_complex_balanced(network, &x, tol)?;
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedLaplacian {
    pub x_star: Vec<f64>,
    /// Diagonal of `Ξ(x*)`, i.e. `Exp(Zᵀ Ln x*)`.
    pub xi: Vec<f64>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub l_bal: Matrix,
}

impl BalancedLaplacian {
    /// `L Ξ` from a Laplacian and the complex evaluation `w`; rejected when
    /// `L w` is not zero within `tol`.
    pub fn from_parts(x_star: Vec<f64>, l: &Matrix, w: &Vector, tol: f64) -> Result<Self> {
        let (res, bound) = equilibrium_residual(l, w, tol);
        if res > bound {
            return Err(CrnError::Rejected {
                what: "balanced Laplacian".into(),
                residual: res,
                tolerance: bound,
            });
        }
        let l_bal = l * Matrix::from_diagonal(w);
        Ok(BalancedLaplacian {
            x_star,
            xi: w.iter().copied().collect(),
            l_bal,
        })
    }

    pub fn size(&self) -> usize {
        self.l_bal.nrows()
    }

    /// Largest absolute row or column sum.
    pub fn imbalance(&self) -> f64 {
        let n = self.size();
        let ones = Vector::from_element(n, 1.0);
        linalg::inf_norm(&(&self.l_bal * &ones)).max(linalg::inf_norm(&(self.l_bal.transpose() * &ones)))
    }

    /// Edges `(tail, head, weight)` read off the negative off-diagonal
    /// entries.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        laplacian_edges(&self.l_bal)
    }
}

/// `(tail, head, weight)` for every negative off-diagonal entry
/// `L[(head, tail)]`.
pub fn laplacian_edges(l: &Matrix) -> Vec<(usize, usize, f64)> {
    let n = l.nrows();
    let mut out = Vec::new();
    for tail in 0..n {
        for head in 0..n {
            if head != tail && l[(head, tail)] < 0.0 {
                out.push((tail, head, -l[(head, tail)]));
            }
        }
    }
    out
}

pub fn balanced_laplacian(network: &ReactionNetwork, x_star: &Vector, tol: &Tolerances) -> Result<BalancedLaplacian> {
    verify_complex_balanced(network, x_star, tol)?;
    let w = network.complex_monomials(x_star);
    BalancedLaplacian::from_parts(
        x_star.iter().copied().collect(),
        network.laplacian(),
        &w,
        tol.equilibrium,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityValue {
    /// `γᵀ 𝓛 Exp(γ)`.
    pub value: f64,
    pub equality: bool,
    /// `‖Dᵀγ‖∞` over the edges of `𝓛`.
    pub dt_gamma: f64,
}

/// `γᵀ 𝓛 Exp(γ) ≥ 0` with equality iff `Dᵀγ = 0`.
///
/// The value is also evaluated as the edge sum
/// `Σ a_e e^{γ_head} φ(γ_tail − γ_head)`, `φ(t) = t eᵗ − eᵗ + 1 ≥ 0`, which
/// is term-wise nonnegative; the two evaluations must agree.
pub fn fundamental_inequality(bal: &BalancedLaplacian, gamma: &Vector, tol: &Tolerances) -> Result<InequalityValue> {
    if gamma.len() != bal.size() {
        return Err(CrnError::Invalid(format!(
            "γ has {} entries, expected {}",
            gamma.len(),
            bal.size()
        )));
    }
    let e = linalg::exp(gamma);
    let value = gamma.dot(&(&bal.l_bal * &e));
    let edges = bal.edges();
    let mut edge_sum = 0.0;
    let mut dt_gamma: f64 = 0.0;
    for &(tail, head, a) in &edges {
        let t = gamma[tail] - gamma[head];
        // φ(t) = t (eᵗ − 1) − (eᵗ − 1) + t
        let em1 = t.exp_m1();
        edge_sum += a * gamma[head].exp() * (t * em1 - em1 + t);
        dt_gamma = dt_gamma.max(t.abs());
    }
    let scale = 1.0_f64.max(linalg::inf_norm_mat(&bal.l_bal) * linalg::inf_norm(&e) * linalg::inf_norm(gamma));
    let bound = tol.inequality * scale;
    if (value - edge_sum).abs() > bound.max(1e-12 * edge_sum.abs()) {
        return Err(CrnError::Internal(format!(
            "dissipation value {value:e} disagrees with its edge-sum form {edge_sum:e}"
        )));
    }
    Ok(InequalityValue {
        value,
        equality: value.abs() <= bound,
        dt_gamma,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSet {
    pub x_star: Vec<f64>,
    pub dimension: usize,
    /// Columns span `ker Sᵀ`: log-space directions along the set.
    #[serde(serialize_with = "crate::report::serialize_matrix_columns")]
    pub kernel_basis: Matrix,
}

impl EquilibriumSet {
    /// `Exp(Ln x* + B c)` for coefficients `c`.
    pub fn point(&self, coeffs: &[f64]) -> Vector {
        let mut log = linalg::ln(&Vector::from_vec(self.x_star.clone()));
        for (k, &ck) in coeffs.iter().enumerate() {
            log += self.kernel_basis.column(k) * ck;
        }
        linalg::exp(&log)
    }
}

/// Positive equilibria `{x : Sᵀ Ln x = Sᵀ Ln x*}`.
pub fn equilibrium_set(network: &ReactionNetwork, x_star: &Vector, tol: &Tolerances) -> Result<EquilibriumSet> {
    verify_complex_balanced(network, x_star, tol)?;
    let st = network.s().transpose();
    let kernel_basis = if st.nrows() == 0 {
        Matrix::identity(network.num_species(), network.num_species())
    } else {
        linalg::kernel_basis(&st, tol.rank)
    };
    Ok(EquilibriumSet {
        x_star: x_star.iter().copied().collect(),
        dimension: kernel_basis.ncols(),
        kernel_basis,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassConservation {
    pub conserved: bool,
    /// Strictly positive `μ` with `Sᵀμ = 0`, `1ᵀμ = 1`.
    pub mu: Option<Vec<f64>>,
    /// Optimal smallest entry of `μ`; `None` when no nonnegative `μ` exists.
    pub min_entry: Option<f64>,
    /// The origin lies on the boundary of the equilibrium set; equivalent
    /// to `conserved`.
    pub origin_on_boundary: bool,
}

/// Maximises `t` subject to `Sᵀμ = 0`, `1ᵀμ = 1`, `μ ≥ t·1`, `μ, t ≥ 0`.
pub fn check_mass_conservation(network: &ReactionNetwork, tol: &Tolerances, exact_mode: bool) -> MassConservation {
    mass_conservation_lp(&network.matrices().s, tol, exact_mode)
}

/// [`check_mass_conservation`] for an arbitrary integer stoichiometric
/// matrix (species × reactions).
pub fn mass_conservation_lp(s: &DMatrix<i64>, tol: &Tolerances, exact_mode: bool) -> MassConservation {
    let (m, r) = (s.nrows(), s.ncols());
    // variables: μ (m), t, slack (m)
    let n = 2 * m + 1;
    let mut rows: Vec<Vec<i64>> = Vec::new();
    let mut rhs: Vec<i64> = Vec::new();
    for j in 0..r {
        let mut row = vec![0; n];
        for i in 0..m {
            row[i] = s[(i, j)];
        }
        rows.push(row);
        rhs.push(0);
    }
    let mut sum = vec![0; n];
    sum[..m].iter_mut().for_each(|v| *v = 1);
    rows.push(sum);
    rhs.push(1);
    for i in 0..m {
        let mut row = vec![0; n];
        row[i] = 1;
        row[m] = -1;
        row[m + 1 + i] = -1;
        rows.push(row);
        rhs.push(0);
    }
    let mut obj = vec![0; n];
    obj[m] = 1;

    let (mu, t) = if exact_mode {
        let q = |v: i64| Rational::from_integer(v.into());
        let a: Vec<Vec<Rational>> = rows.iter().map(|r| r.iter().map(|&v| q(v)).collect()).collect();
        let b: Vec<Rational> = rhs.iter().map(|&v| q(v)).collect();
        let c: Vec<Rational> = obj.iter().map(|&v| q(v)).collect();
        match lp::maximize(&c, &a, &b, &Rational::zero()) {
            LpOutcome::Optimal { x, value } => (
                Some(x[..m].iter().map(exact::to_f64).collect::<Vec<_>>()),
                Some(exact::to_f64(&value)),
            ),
            _ => (None, None),
        }
    } else {
        let a: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let b: Vec<f64> = rhs.iter().map(|&v| v as f64).collect();
        let c: Vec<f64> = obj.iter().map(|&v| v as f64).collect();
        match lp::maximize(&c, &a, &b, &1e-12) {
            LpOutcome::Optimal { x, value } => (Some(x[..m].to_vec()), Some(value)),
            _ => (None, None),
        }
    };
    let conserved = t.is_some_and(|t| t > tol.positivity);
    MassConservation {
        conserved,
        mu: if conserved { mu } else { None },
        min_entry: t,
        origin_on_boundary: conserved,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(kf: f64, kr: f64) -> ReactionNetwork {
        ReactionNetwork::single_species(2, &[(0, 1, kf), (1, 0, kr)]).unwrap()
    }

    fn cycle(k: [f64; 6]) -> ReactionNetwork {
        ReactionNetwork::single_species(
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
        .unwrap()
    }

    #[test]
    fn symmetric_pair_is_balanced() {
        let t = Tolerances::default();
        for exact in [false, true] {
            let v = check_complex_balanced(&pair(1.0, 1.0), &t, exact).unwrap();
            assert!(v.complex_balanced && v.weakly_reversible);
            assert_eq!(v.exponent_violations.as_deref(), Some(&[][..]));
        }
    }

    #[test]
    fn irreversible_is_not_balanced() {
        let n = ReactionNetwork::single_species(2, &[(0, 1, 1.0)]).unwrap();
        let v = check_complex_balanced(&n, &Tolerances::default(), false).unwrap();
        assert!(!v.weakly_reversible && !v.complex_balanced);
        assert_eq!(v.condition_final1, None);
    }

    #[test]
    fn pair_equilibrium_and_balanced_laplacian() {
        let t = Tolerances::default();
        let n = pair(2.0, 1.0);
        let v = check_complex_balanced(&n, &t, false).unwrap();
        let x = find_complex_balanced_equilibrium(&n, &v, &t).unwrap();
        assert!((x[1] / x[0] - 2.0).abs() < 1e-12);
        let x = Vector::from_vec(vec![1.0, 2.0]);
        let b = balanced_laplacian(&n, &x, &t).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[2., -2., -2., 2.]);
        assert!((&b.l_bal - want).abs().max() < 1e-14);
        assert!(balanced_laplacian(&n, &Vector::from_vec(vec![1.0, 1.0]), &t).is_err());
    }

    #[test]
    fn cycle_equilibrium_is_uniform() {
        let t = Tolerances::default();
        let n = cycle([1., 2., 3., 4., 5., 6.]);
        let v = check_complex_balanced(&n, &t, false).unwrap();
        assert!(v.complex_balanced);
        let x = find_complex_balanced_equilibrium(&n, &v, &t).unwrap();
        assert!((x[0] - x[1]).abs() < 1e-12 * x[0] && (x[0] - x[2]).abs() < 1e-12 * x[0]);
    }

    #[test]
    fn inequality_trivial_cases() {
        let t = Tolerances::default();
        let n = pair(2.0, 1.0);
        let b = balanced_laplacian(&n, &Vector::from_vec(vec![1.0, 2.0]), &t).unwrap();
        let zero = fundamental_inequality(&b, &Vector::zeros(2), &t).unwrap();
        assert!(zero.equality && zero.value == 0.0);
        let c = fundamental_inequality(&b, &Vector::from_element(2, 3.0), &t).unwrap();
        assert!(c.equality);
        let g = fundamental_inequality(&b, &Vector::from_vec(vec![1.0, 0.0]), &t).unwrap();
        // 𝓛 Exp(γ) = (2e − 2, 2 − 2e), so γᵀ𝓛Exp(γ) = 2e − 2
        let e = std::f64::consts::E;
        assert!((g.value - (2.0 * e - 2.0)).abs() < 1e-12 && !g.equality);
    }

    #[test]
    fn equilibrium_set_dimension() {
        let t = Tolerances::default();
        let n = pair(1.0, 1.0);
        let set = equilibrium_set(&n, &Vector::from_vec(vec![1.0, 1.0]), &t).unwrap();
        assert_eq!(set.dimension, 1);
        let p = set.point(&[0.7]);
        assert!(verify_complex_balanced(&n, &p, &t).is_ok());
    }

    #[test]
    fn mass_conservation_cases() {
        let t = Tolerances::default();
        for exact in [false, true] {
            let mc = check_mass_conservation(&pair(1.0, 1.0), &t, exact);
            assert!(mc.conserved);
            let mu = mc.mu.unwrap();
            assert!((mu[0] - 0.5).abs() < 1e-12 && (mu[1] - 0.5).abs() < 1e-12);
        }
        // A → 2A
        let net = crate::parse_network("A -> 2 A ; k=1").unwrap().network;
        assert!(!check_mass_conservation(&net, &t, false).conserved);
        assert!(!check_mass_conservation(&net, &t, true).conserved);
    }

    #[test]
    fn deficiency_of_simple_networks() {
        assert_eq!(deficiency(&pair(1.0, 1.0)), 0);
        let net = crate::parse_network("A + B <-> C ; kf=1, kr=1\nC <-> 2 A ; kf=1, kr=1")
            .unwrap()
            .network;
        // c = 3, ℓ = 1, rank S = 2
        assert_eq!(deficiency(&net), 0);
    }
}
