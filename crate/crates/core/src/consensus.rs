//! Consensus dynamics `ẋ = −L_c x` with `L_c 1 = 0`, the dual of the
//! single-species reaction dynamics `ẋ = −L x` with `1ᵀL = 0`.
//!
//! An edge `i → j` carries information about `i` to `j`:
//! `ẋ_j = Σ w_{ij} (x_i − x_j)`.

use serde::Serialize;

use crate::balance::{self, BalanceVerdict};
use crate::config::Tolerances;
use crate::dynamics::{self, LinearField, SimOptions, Trajectory};
use crate::error::{CrnError, Result};
use crate::graph::{self, ComponentDecomposition};
use crate::linalg::{Matrix, Vector};
use crate::network::ReactionNetwork;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusSystem {
    pub labels: Vec<String>,
    /// `(from, to, weight)`.
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub l_c: Matrix,
    /// Spanning-tree weights directed from each vertex, scaled so `σᵀ1 = n`.
    pub sigma: Vec<f64>,
    /// `Σ L_c`.
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub l_c_bal: Matrix,
}

/// Reads `u v w` lines; `#` starts a comment.
///
/// Vertices are ordered numerically when every label is an integer and by
/// first appearance otherwise.
pub fn parse_edge_list(text: &str) -> Result<(Vec<String>, Vec<(usize, usize, f64)>)> {
    let mut raw: Vec<(String, String, f64)> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(CrnError::Invalid(format!(
                "line {}: expected `from to weight`, found {} field(s)",
                n + 1,
                parts.len()
            )));
        }
        let w: f64 = parts[2]
            .parse()
            .map_err(|_| CrnError::Invalid(format!("line {}: weight `{}` is not a number", n + 1, parts[2])))?;
        raw.push((parts[0].to_string(), parts[1].to_string(), w));
    }
    let mut labels: Vec<String> = Vec::new();
    for (a, b, _) in &raw {
        for l in [a, b] {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    if labels.iter().all(|l| l.parse::<i64>().is_ok()) {
        labels.sort_by_key(|l| l.parse::<i64>().expect("checked"));
    }
    let index = |l: &str| labels.iter().position(|x| x == l).expect("collected");
    let edges = raw.iter().map(|(a, b, w)| (index(a), index(b), *w)).collect();
    Ok((labels, edges))
}

/// Builds `L_c`, `σ` and `Σ L_c`; every component must be strongly
/// connected.
pub fn build_consensus(
    labels: Vec<String>,
    edges: &[(usize, usize, f64)],
    tol: &Tolerances,
) -> Result<ConsensusSystem> {
    let n = labels.len();
    if n == 0 {
        return Err(CrnError::Invalid("consensus graph has no vertices".into()));
    }
    let mut l_c = Matrix::zeros(n, n);
    for (e, &(i, j, w)) in edges.iter().enumerate() {
        if i >= n || j >= n {
            return Err(CrnError::Invalid(format!("edge {e} references a missing vertex")));
        }
        if i == j {
            return Err(CrnError::Invalid(format!("edge {e} is a self-loop at {}", labels[i])));
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(CrnError::Invalid(format!("edge {e} has non-positive weight {w}")));
        }
        l_c[(j, j)] += w;
        l_c[(j, i)] -= w;
    }
    // σ is the kernel vector of L_cᵀ, whose columns sum to zero
    let lt = l_c.transpose();
    let comps = ComponentDecomposition::from_laplacian(&lt);
    let rho = graph::matrix_tree_rho(&lt, &comps, tol.positivity)?;
    if !rho.all_positive() {
        let bad: Vec<String> = comps
            .members()
            .iter()
            .zip(&rho.strongly_connected)
            .filter(|(_, &s)| !s)
            .map(|(m, _)| {
                let names: Vec<&str> = m.iter().map(|&v| labels[v].as_str()).collect();
                format!("{{{}}}", names.join(", "))
            })
            .collect();
        return Err(CrnError::Invalid(format!(
            "consensus graph component(s) {} not strongly connected",
            bad.join(", ")
        )));
    }
    let total: f64 = rho.values.iter().sum();
    let sigma: Vec<f64> = rho.values.iter().map(|v| v * n as f64 / total).collect();
    let l_c_bal = Matrix::from_diagonal(&Vector::from_vec(sigma.clone())) * &l_c;
    Ok(ConsensusSystem {
        labels,
        edges: edges.to_vec(),
        l_c,
        sigma,
        l_c_bal,
    })
}

impl ConsensusSystem {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sigma_vector(&self) -> Vector {
        Vector::from_vec(self.sigma.clone())
    }

    /// `σᵀ x`.
    pub fn conserved_quantity(&self, x: &Vector) -> f64 {
        self.sigma_vector().dot(x)
    }

    pub fn field(&self) -> LinearField {
        LinearField(self.l_c.clone())
    }
}

/// `d* = σᵀx₀ / σᵀ1`.
pub fn consensus_value(system: &ConsensusSystem, x0: &Vector) -> Result<f64> {
    if x0.len() != system.len() {
        return Err(CrnError::Invalid(format!(
            "x0 has {} entries, expected {}",
            x0.len(),
            system.len()
        )));
    }
    Ok(system.conserved_quantity(x0) / system.sigma.iter().sum::<f64>())
}

/// `d/dt xᵀΣx = −xᵀ(𝓛_cᵀ + 𝓛_c)x`.
pub fn lyapunov_check(system: &ConsensusSystem, x: &Vector) -> f64 {
    let sym = system.l_c_bal.transpose() + &system.l_c_bal;
    -x.dot(&(sym * x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusRun {
    pub d_star: f64,
    pub trajectory: Trajectory,
    /// Largest relative change of `σᵀx(t)` along the samples.
    pub conserved_drift: f64,
    /// `‖x(T) − d* 1‖∞`.
    pub final_gap: f64,
}

/// Simulates `ẋ = −L_c x`; states may have any sign.
pub fn simulate_consensus(system: &ConsensusSystem, x0: &Vector, t_end: f64, samples: usize) -> Result<ConsensusRun> {
    let d_star = consensus_value(system, x0)?;
    let opts = SimOptions {
        samples: dynamics::uniform_samples(t_end, samples),
        positivity_guard: false,
        ..Default::default()
    };
    let trajectory = dynamics::simulate(&system.field(), x0, t_end, &opts)?;
    let q0 = system.conserved_quantity(x0);
    let scale = system
        .sigma
        .iter()
        .zip(x0.iter())
        .map(|(s, x)| (s * x).abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    let conserved_drift = trajectory
        .states
        .iter()
        .map(|s| (system.conserved_quantity(&Vector::from_vec(s.clone())) - q0).abs() / scale)
        .fold(0.0, f64::max);
    let final_gap = trajectory
        .final_state()
        .iter()
        .map(|v| (v - d_star).abs())
        .fold(0.0, f64::max);
    Ok(ConsensusRun {
        d_star,
        trajectory,
        conserved_drift,
        final_gap,
    })
}

/// Single-species network read as linear dynamics `ẋ = −L x = D K x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SsNetworkForm {
    #[serde(serialize_with = "crate::report::serialize_matrix")]
    pub laplacian: Matrix,
    /// Complex balance, equivalently strong connectivity of every component.
    pub complex_balanced: bool,
    /// One ray per component: ρ on that component, zero elsewhere.
    pub equilibrium_rays: Vec<Vec<f64>>,
    /// `L diag(ρ)`, present when complex-balanced.
    #[serde(serialize_with = "serialize_opt_matrix")]
    pub balanced: Option<Matrix>,
}

fn serialize_opt_matrix<S: serde::Serializer>(m: &Option<Matrix>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match m {
        Some(m) => crate::report::serialize_matrix(m, s),
        None => s.serialize_none(),
    }
}

pub fn ss_network_form(network: &ReactionNetwork, tol: &Tolerances) -> Result<SsNetworkForm> {
    if !network.is_single_species() {
        return Err(CrnError::Invalid(
            "linear form requires every complex to be a single species (Z = I)".into(),
        ));
    }
    let l = network.laplacian().clone();
    let comps = graph::components(&network.matrices().d);
    let rho = graph::matrix_tree_rho(&l, &comps, tol.positivity)?;
    let verdict: BalanceVerdict = balance::check_complex_balanced(network, tol, false)?;
    if verdict.complex_balanced != rho.all_positive() {
        return Err(CrnError::Internal(
            "single-species network: complex balance differs from strong connectivity".into(),
        ));
    }
    let equilibrium_rays = comps
        .members()
        .iter()
        .map(|members| {
            let mut ray = vec![0.0; l.nrows()];
            for &v in members {
                ray[v] = rho.values[v];
            }
            ray
        })
        .collect();
    let balanced = rho.all_positive().then(|| &l * Matrix::from_diagonal(&rho.as_vector()));
    Ok(SsNetworkForm {
        laplacian: l,
        complex_balanced: rho.all_positive(),
        equilibrium_rays,
        balanced,
    })
}

/// `−L x`, the linear right-hand side of a single-species network.
pub fn ss_rhs(form: &SsNetworkForm, x: &Vector) -> Vector {
    -(&form.laplacian * x)
}

/// Symmetric part `𝓛_cᵀ + 𝓛_c`, positive semidefinite for valid systems.
pub fn symmetric_part(system: &ConsensusSystem) -> Matrix {
    system.l_c_bal.transpose() + &system.l_c_bal
}

/// Smallest eigenvalue of [`symmetric_part`].
pub fn symmetric_part_min_eigenvalue(system: &ConsensusSystem) -> f64 {
    symmetric_part(system)
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: usize, edges: &[(usize, usize, f64)]) -> ConsensusSystem {
        let labels = (1..=n).map(|i| i.to_string()).collect();
        build_consensus(labels, edges, &Tolerances::default()).unwrap()
    }

    #[test]
    fn two_vertex_sigma() {
        let s = sys(2, &[(0, 1, 1.0), (1, 0, 1.0)]);
        assert_eq!(s.sigma, vec![1.0, 1.0]);
        assert_eq!(s.l_c_bal, Matrix::from_row_slice(2, 2, &[1., -1., -1., 1.]));
        let s = sys(2, &[(0, 1, 2.0), (1, 0, 1.0)]);
        assert!((s.sigma[0] / s.sigma[1] - 2.0).abs() < 1e-14);
        let d = consensus_value(&s, &Vector::from_vec(vec![3.0, 0.0])).unwrap();
        assert!((d - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ring_average() {
        let s = sys(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        assert!(s.sigma.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let x0 = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!((consensus_value(&s, &x0).unwrap() - 2.0).abs() < 1e-14);
        let run = simulate_consensus(&s, &x0, 40.0, 4).unwrap();
        assert!(run.final_gap < 1e-6 && run.conserved_drift < 1e-8);
    }

    #[test]
    fn lyapunov_values() {
        let s = sys(3, &[(0, 1, 1.0), (1, 2, 2.0), (2, 0, 3.0), (1, 0, 0.5)]);
        assert!(lyapunov_check(&s, &Vector::from_element(3, 1.0)).abs() < 1e-12);
        assert_eq!(lyapunov_check(&s, &Vector::zeros(3)), 0.0);
        assert!(lyapunov_check(&s, &Vector::from_vec(vec![1.0, -1.0, 0.3])) < 0.0);
        assert!(symmetric_part_min_eigenvalue(&s) > -1e-12);
    }

    #[test]
    fn rejects_not_strongly_connected() {
        let labels = vec!["a".into(), "b".into()];
        assert!(build_consensus(labels, &[(0, 1, 1.0)], &Tolerances::default()).is_err());
    }

    #[test]
    fn edge_list_ordering() {
        let (labels, edges) = parse_edge_list("10 2 1\n2 10 1 # back\n").unwrap();
        assert_eq!(labels, vec!["2", "10"]);
        assert_eq!(edges, vec![(1, 0, 1.0), (0, 1, 1.0)]);
        let (labels, _) = parse_edge_list("b a 1\na b 1").unwrap();
        assert_eq!(labels, vec!["b", "a"]);
        assert!(parse_edge_list("a b").is_err());
    }

    #[test]
    fn linear_form() {
        let t = Tolerances::default();
        let n = ReactionNetwork::single_species(2, &[(0, 1, 2.0), (1, 0, 1.0)]).unwrap();
        let f = ss_network_form(&n, &t).unwrap();
        assert!(f.complex_balanced);
        let ray = &f.equilibrium_rays[0];
        assert!((ray[1] / ray[0] - 2.0).abs() < 1e-14);
        let x = Vector::from_vec(vec![0.3, 1.7]);
        assert_eq!(ss_rhs(&f, &x), dynamics::rhs(&n, &x).unwrap());
        let irr = ReactionNetwork::single_species(2, &[(0, 1, 1.0)]).unwrap();
        assert!(!ss_network_form(&irr, &t).unwrap().complex_balanced);
    }
}
