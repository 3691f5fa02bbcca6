//! Open networks: constant inflows and mass-action outflows absorbed into a
//! zero complex, and the steady-state analysis of the extended graph.
//!
//! The zero complex is vertex `c` of the extended graph (the last one).

use nalgebra::DMatrix;
use serde::Serialize;

use crate::balance::{self, BalancedLaplacian, InequalityValue, MassConservation};
use crate::config::Tolerances;
use crate::error::{CrnError, Result};
use crate::graph::{self, ComponentDecomposition};
use crate::linalg::{self, Matrix, Vector};
use crate::network::{complex_monomials, OpenSpec, ReactionNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedNetwork {
    base: ReactionNetwork,
    open: OpenSpec,
    z_e: DMatrix<i64>,
    b: DMatrix<i64>,
    d_e: DMatrix<i64>,
    l_in: Vector,
    l_out: Vector,
    delta_in: f64,
    delta_out: Vector,
    l_e: Matrix,
}

/// Attaches the zero complex to `network`.
pub fn extend(network: &ReactionNetwork, open: &OpenSpec) -> Result<ExtendedNetwork> {
    if open.is_empty() {
        return Err(CrnError::Invalid(
            "the network has neither inflows nor outflows".into(),
        ));
    }
    open.validate(network.num_complexes())?;
    let (m, c, r) = (network.num_species(), network.num_complexes(), network.num_reactions());
    let (k, l) = (open.inflows.len(), open.outflows.len());
    let z = &network.matrices().z;
    let z_e = DMatrix::from_fn(m, c + 1, |i, j| if j < c { z[(i, j)] } else { 0 });

    let d = &network.matrices().d;
    let mut b = DMatrix::<i64>::zeros(c, r + k + l);
    b.columns_mut(0, r).copy_from(d);
    for (j, f) in open.inflows.iter().enumerate() {
        b[(f.complex, r + j)] = 1;
    }
    for (j, f) in open.outflows.iter().enumerate() {
        b[(f.complex, r + k + j)] = -1;
    }
    let mut d_e = DMatrix::<i64>::zeros(c + 1, r + k + l);
    d_e.rows_mut(0, c).copy_from(&b);
    for j in 0..b.ncols() {
        d_e[(c, j)] = -b.column(j).sum();
    }

    let mut l_in = Vector::zeros(c);
    for f in &open.inflows {
        l_in[f.complex] -= f.rate;
    }
    let mut delta_out = Vector::zeros(c);
    for f in &open.outflows {
        delta_out[f.complex] += f.rate;
    }
    let l_out = -&delta_out;
    let delta_in = -l_in.sum();

    let l = network.laplacian();
    let mut l_e = Matrix::zeros(c + 1, c + 1);
    l_e.view_mut((0, 0), (c, c)).copy_from(l);
    for i in 0..c {
        l_e[(i, i)] += delta_out[i];
        l_e[(i, c)] = l_in[i];
        l_e[(c, i)] = l_out[i];
    }
    l_e[(c, c)] = delta_in;

    Ok(ExtendedNetwork {
        base: network.clone(),
        open: open.clone(),
        z_e,
        b,
        d_e,
        l_in,
        l_out,
        delta_in,
        delta_out,
        l_e,
    })
}

impl ExtendedNetwork {
    pub fn base(&self) -> &ReactionNetwork {
        &self.base
    }

    pub fn open(&self) -> &OpenSpec {
        &self.open
    }

    /// `[Z 0]`.
    pub fn z_e(&self) -> &DMatrix<i64> {
        &self.z_e
    }

    /// `[D D_in D_out]` without the zero-complex row.
    pub fn b(&self) -> &DMatrix<i64> {
        &self.b
    }

    /// `B` with the zero-complex row `−1ᵀB` appended.
    pub fn d_e(&self) -> &DMatrix<i64> {
        &self.d_e
    }

    pub fn l_in(&self) -> &Vector {
        &self.l_in
    }

    pub fn l_out(&self) -> &Vector {
        &self.l_out
    }

    pub fn delta_in(&self) -> f64 {
        self.delta_in
    }

    /// Diagonal of `Δ_out`.
    pub fn delta_out(&self) -> &Vector {
        &self.delta_out
    }

    pub fn laplacian(&self) -> &Matrix {
        &self.l_e
    }

    /// Index of the zero complex in the extended graph.
    pub fn zero_index(&self) -> usize {
        self.base.num_complexes()
    }

    pub fn num_vertices(&self) -> usize {
        self.base.num_complexes() + 1
    }

    /// `S_e = Z_e D_e = Z B`.
    pub fn s_e(&self) -> Matrix {
        linalg::to_f64(&self.base.matrices().z) * linalg::to_f64(&self.b)
    }

    /// Integer form of [`Self::s_e`].
    pub fn s_e_int(&self) -> DMatrix<i64> {
        &self.base.matrices().z * &self.b
    }

    /// `[Exp(Zᵀ Ln x); 1]`.
    pub fn complex_monomials(&self, x: &Vector) -> Vector {
        complex_monomials(&self.z_e, x)
    }

    /// Reaction, inflow and outflow rates `v_e(x) = [v(x); v_in; v_out(x)]`.
    pub fn flux(&self, x: &Vector) -> Vector {
        let w = self.base.complex_monomials(x);
        let v = self.base.rates(x);
        let mut out: Vec<f64> = v.iter().copied().collect();
        out.extend(self.open.inflows.iter().map(|f| f.rate));
        out.extend(self.open.outflows.iter().map(|f| f.rate * w[f.complex]));
        Vector::from_vec(out)
    }

    /// `Z [D v(x) + D_in v_in + D_out v_out(x)]`.
    pub fn rhs_flow(&self, x: &Vector) -> Vector {
        linalg::to_f64(&self.base.matrices().z) * (linalg::to_f64(&self.b) * self.flux(x))
    }

    /// `−Z_e L_e Exp(Z_eᵀ Ln x)`.
    pub fn rhs_laplacian(&self, x: &Vector) -> Vector {
        -(linalg::to_f64(&self.z_e) * (&self.l_e * self.complex_monomials(x)))
    }

    /// Components of the extended graph.
    pub fn components(&self) -> ComponentDecomposition {
        graph::components(&self.d_e)
    }

    /// `‖L_e [w; 1]‖∞` and its acceptance bound.
    pub fn steady_state_residual(&self, x: &Vector, tol: &Tolerances) -> (f64, f64) {
        balance::equilibrium_residual(&self.l_e, &self.complex_monomials(x), tol.equilibrium)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyStateStatus {
    ComplexBalanced,
    /// `(L + Δ_out) w = D_in v_in` has no unique solution on the part of
    /// the graph linked to the zero complex.
    NoUniqueComplexEvaluation,
    /// The complex evaluation has a nonpositive entry.
    NotComplexBalanced,
    /// `Ln w ∉ im Zᵀ`: no concentrations produce the complex evaluation.
    Unrealizable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelEquivalence {
    pub b_residual: f64,
    pub d_e_residual: f64,
    pub b_zero: bool,
    pub d_e_zero: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryPreclusion {
    pub connected: bool,
    /// Complexes of components that do not contain the zero complex.
    pub isolated_components: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyStateReport {
    pub status: SteadyStateStatus,
    /// `Exp(Zᵀ Ln x*)`, or the least-squares candidate when not balanced.
    pub w_star: Option<Vec<f64>>,
    pub x_star: Option<Vec<f64>>,
    pub set_dimension: usize,
    /// Log-space directions of the steady-state set (columns of a `ker S_eᵀ`
    /// basis).
    #[serde(serialize_with = "crate::report::serialize_matrix_columns")]
    pub set_basis: Matrix,
    pub unique: bool,
    pub boundary_free: bool,
    pub isolated_components: Vec<Vec<usize>>,
    pub mass_balance_residual: Option<f64>,
    /// `‖(L + Δ_out) w − D_in v_in‖∞`.
    pub linear_residual: Option<f64>,
    /// Basis of `ker (L + Δ_out)` restricted to the part linked to the
    /// zero complex; empty when that block is invertible.
    pub kernel: Vec<Vec<f64>>,
    pub kernel_equivalence: Option<KernelEquivalence>,
    /// Convergence of trajectories is checked per simulation, not proven.
    pub global_convergence: &'static str,
}

pub fn boundary_preclusion(ext: &ExtendedNetwork) -> BoundaryPreclusion {
    let comps = ext.components();
    let zero = comps.component_of(ext.zero_index());
    let isolated: Vec<Vec<usize>> = comps
        .members()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != zero)
        .map(|(_, m)| m.clone())
        .collect();
    BoundaryPreclusion {
        connected: isolated.is_empty(),
        isolated_components: isolated,
    }
}

/// `|L_out·w − 1ᵀL_in|`: total outflow against total inflow.
pub fn mass_balance_check(ext: &ExtendedNetwork, x: &Vector) -> f64 {
    let w = ext.base.complex_monomials(x);
    (ext.l_out.dot(&w) - ext.l_in.sum()).abs()
}

/// `B v_e(x)` and `D_e v_e(x)` vanish together.
pub fn kernel_equivalence(ext: &ExtendedNetwork, x: &Vector, tol: &Tolerances) -> Result<KernelEquivalence> {
    let v = ext.flux(x);
    let scale = linalg::inf_norm(&v).max(f64::MIN_POSITIVE);
    let b_residual = linalg::inf_norm(&(linalg::to_f64(&ext.b) * &v)) / scale;
    let d_e_residual = linalg::inf_norm(&(linalg::to_f64(&ext.d_e) * &v)) / scale;
    let out = KernelEquivalence {
        b_residual,
        d_e_residual,
        b_zero: b_residual <= tol.equilibrium,
        d_e_zero: d_e_residual <= tol.equilibrium,
    };
    if out.b_zero != out.d_e_zero {
        return Err(CrnError::Internal(format!(
            "B v_e and D_e v_e disagree on vanishing ({b_residual:e} vs {d_e_residual:e})"
        )));
    }
    Ok(out)
}

/// Complex-balanced steady states of an open network.
///
/// The linear system `(L + Δ_out) w = D_in v_in` is solved on the
/// components linked to the zero complex. Components without flows are
/// closed blocks: their evaluation is `ρ` of the block up to a free scale,
/// which enters the log-linear solve `Zᵀ μ = Ln w` as one extra unknown per
/// block.
pub fn solve_steady_state(ext: &ExtendedNetwork, tol: &Tolerances) -> Result<SteadyStateReport> {
    let c = ext.base.num_complexes();
    let m = ext.base.num_species();
    let comps = ext.components();
    let zero = comps.component_of(ext.zero_index());
    let linked: Vec<usize> = comps.members()[zero].iter().copied().filter(|&v| v < c).collect();
    let closed: Vec<Vec<usize>> = comps
        .members()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != zero)
        .map(|(_, mem)| mem.clone())
        .collect();

    let s_e = ext.s_e();
    let set_basis = if s_e.ncols() == 0 {
        Matrix::identity(m, m)
    } else {
        linalg::kernel_basis(&s_e.transpose(), tol.rank)
    };
    let rank_z = linalg::rank(&ext.base.z(), tol.rank);
    let boundary = boundary_preclusion(ext);
    let mut report = SteadyStateReport {
        status: SteadyStateStatus::NotComplexBalanced,
        w_star: None,
        x_star: None,
        set_dimension: set_basis.ncols(),
        set_basis,
        unique: false,
        boundary_free: boundary.connected,
        isolated_components: boundary.isolated_components.clone(),
        mass_balance_residual: None,
        linear_residual: None,
        kernel: Vec::new(),
        kernel_equivalence: None,
        global_convergence: "empirical",
    };

    let mut mat = ext.base.laplacian().clone();
    for i in 0..c {
        mat[(i, i)] += ext.delta_out[i];
    }
    let rhs = -&ext.l_in;
    let block = mat.select_rows(&linked).select_columns(&linked);
    let block_rhs = rhs.select_rows(&linked);
    let thresh = tol.positivity * linalg::inf_norm_mat(&block).max(f64::MIN_POSITIVE);
    let mut w = Vector::zeros(c);
    match linalg::lu_solve(&block, &block_rhs, thresh) {
        Some(wl) => {
            for (k, &v) in linked.iter().enumerate() {
                w[v] = wl[k];
            }
        }
        None => {
            let (wl, _) = linalg::least_squares(&block, &block_rhs, tol.rank);
            for (k, &v) in linked.iter().enumerate() {
                w[v] = wl[k];
            }
            let ker = linalg::kernel_basis(&block, tol.rank);
            report.kernel = ker
                .column_iter()
                .map(|col| {
                    let mut full = vec![0.0; c];
                    for (k, &v) in linked.iter().enumerate() {
                        full[v] = col[k];
                    }
                    full
                })
                .collect();
            report.status = SteadyStateStatus::NoUniqueComplexEvaluation;
            report.w_star = Some(w.iter().copied().collect());
            return Ok(report);
        }
    }
    let wmax = linked.iter().map(|&v| w[v].abs()).fold(0.0, f64::max);
    if linked.iter().any(|&v| !(w[v] > tol.positivity * wmax) || w[v] <= 0.0) {
        report.w_star = Some(w.iter().copied().collect());
        return Ok(report);
    }

    // closed blocks contribute ρ and one free log-scale each
    let l = ext.base.laplacian();
    let mut target = Vector::zeros(c);
    for &v in &linked {
        target[v] = w[v].ln();
    }
    for members in &closed {
        let sub = l.select_rows(members).select_columns(members);
        let local = ComponentDecomposition::from_laplacian(&sub);
        let rho = graph::matrix_tree_rho(&sub, &local, tol.positivity)?;
        if local.count() != 1 || !rho.all_positive() {
            return Ok(report);
        }
        let max = rho.values.iter().cloned().fold(0.0, f64::max);
        for (k, &v) in members.iter().enumerate() {
            target[v] = (rho.values[k] / max).ln();
        }
    }
    let zt = ext.base.z().transpose();
    let a = Matrix::from_fn(c, m + closed.len(), |i, j| {
        if j < m {
            zt[(i, j)]
        } else if closed[j - m].contains(&i) {
            -1.0
        } else {
            0.0
        }
    });
    let (sol, r) = linalg::least_squares(&a, &target, tol.rank);
    let res = linalg::inf_norm(&r);
    if res > tol.membership * (1.0 + linalg::inf_norm(&target)) {
        report.status = SteadyStateStatus::Unrealizable;
        report.w_star = Some(w.iter().copied().collect());
        return Ok(report);
    }
    let x = linalg::exp(&sol.rows(0, m).into_owned());
    if x.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(CrnError::Numeric("x* left the representable range".into()));
    }
    let w_star = ext.base.complex_monomials(&x);
    let (sres, bound) = ext.steady_state_residual(&x, tol);
    if sres > bound {
        return Err(CrnError::Rejected {
            what: "open steady state".into(),
            residual: sres,
            tolerance: bound,
        });
    }
    let lin = linalg::inf_norm(&(&mat * &w_star - &rhs));
    report.status = SteadyStateStatus::ComplexBalanced;
    report.unique = boundary.connected && rank_z == m;
    report.mass_balance_residual = Some(mass_balance_check(ext, &x));
    report.linear_residual = Some(lin);
    report.kernel_equivalence = Some(kernel_equivalence(ext, &x, tol)?);
    report.w_star = Some(w_star.iter().copied().collect());
    report.x_star = Some(x.iter().copied().collect());
    Ok(report)
}

/// Mass conservation of the open network, decided on `S_e`.
pub fn extended_mass_conservation(ext: &ExtendedNetwork, tol: &Tolerances, exact_mode: bool) -> MassConservation {
    balance::mass_conservation_lp(&ext.s_e_int(), tol, exact_mode)
}

/// `𝓛_e(x*) = L_e Ξ_e(x*)`, with the zero complex evaluated at one.
pub fn extended_balanced_laplacian(
    ext: &ExtendedNetwork,
    x_star: &Vector,
    tol: &Tolerances,
) -> Result<BalancedLaplacian> {
    if x_star.len() != ext.base.num_species() || x_star.iter().any(|&v| !(v > 0.0)) {
        return Err(CrnError::Invalid("x* must be a positive state".into()));
    }
    let w_e = ext.complex_monomials(x_star);
    BalancedLaplacian::from_parts(x_star.iter().copied().collect(), &ext.l_e, &w_e, tol.equilibrium)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtendedInequality {
    #[serde(flatten)]
    pub inequality: InequalityValue,
    /// `‖Bᵀγ‖∞` when the zero-complex entry of `γ_e` is zero.
    pub bt_gamma: Option<f64>,
}

/// `γ_eᵀ 𝓛_e Exp(γ_e) ≥ 0`; with `γ_e[c] = 0` the edge differences read
/// off `𝓛_e` must equal `Bᵀγ`.
pub fn extended_inequality(
    ext: &ExtendedNetwork,
    bal: &BalancedLaplacian,
    gamma_e: &Vector,
    tol: &Tolerances,
) -> Result<ExtendedInequality> {
    let inequality = balance::fundamental_inequality(bal, gamma_e, tol)?;
    let c = ext.zero_index();
    let bt_gamma = if gamma_e[c] == 0.0 {
        let g = gamma_e.rows(0, c).into_owned();
        let bt = linalg::inf_norm(&(linalg::to_f64(&ext.b).transpose() * g));
        if (bt - inequality.dt_gamma).abs() > 1e-12 * (1.0 + bt) {
            return Err(CrnError::Internal(format!(
                "‖Bᵀγ‖∞ = {bt:e} but the edges of 𝓛_e give {:e}",
                inequality.dt_gamma
            )));
        }
        Some(bt)
    } else {
        None
    };
    Ok(ExtendedInequality { inequality, bt_gamma })
}
