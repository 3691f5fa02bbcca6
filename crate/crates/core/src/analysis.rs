//! One-shot analysis of a parsed model, aggregated into a serialisable
//! report.

use serde::Serialize;

use crate::balance::{self, BalanceVerdict, MassConservation};
use crate::config::Tolerances;
use crate::detailed::{self, ReversibleNetwork};
use crate::dynamics::{self, SimOptions, Trajectory};
use crate::error::{CrnError, Result};
use crate::graph;
use crate::kron::{self, ReductionCheck, ReductionResult};
use crate::linalg::{self, Matrix, Vector};
use crate::network::Model;
use crate::open::{self, ExtendedNetwork, SteadyStateReport, SteadyStateStatus};

pub const TOOL_NAME: &str = "crn";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSummary {
    pub species: Vec<String>,
    pub complexes: Vec<String>,
    pub m: usize,
    pub c: usize,
    pub r: usize,
    /// Linkage classes ℓ.
    pub linkage_classes: usize,
    /// `rank D − rank ZD`.
    pub deficiency: usize,
    pub open: bool,
}

/// For open models `complex_balanced` and `mass_conserving` describe the
/// extended network; the other verdicts describe its reactions alone.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdicts {
    pub weakly_reversible: bool,
    pub complex_balanced: bool,
    /// `None` when some reaction has no reverse.
    pub detailed_balanced: Option<bool>,
    pub formally_balanced: Option<bool>,
    pub mass_conserving: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSection {
    pub x_star: Vec<f64>,
    pub dimension: usize,
    #[serde(serialize_with = "crate::report::serialize_matrix_columns")]
    pub kernel_basis: Matrix,
    /// Relative `‖L Exp(Zᵀ Ln x*)‖∞`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReductionMode {
    Balanced,
    Raw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionRequest {
    /// Vertex indices, zero-based; the zero complex of an open model is `c`.
    pub delete: Vec<usize>,
    pub mode: ReductionMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionSection {
    pub mode: ReductionMode,
    pub kept: Vec<String>,
    pub deleted: Vec<String>,
    pub result: ReductionResult,
    pub check: ReductionCheck,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub tool: ToolInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub tolerances: Tolerances,
    pub exact: bool,
    pub network: NetworkSummary,
    /// Matrix-Tree ρ, unnormalised.
    pub rho: Vec<f64>,
    pub verdicts: Verdicts,
    pub balance: BalanceVerdict,
    pub mass_conservation: MassConservation,
    pub equilibrium: Option<EquilibriumSection>,
    pub steady_state: Option<SteadyStateReport>,
    pub reduction: Option<ReductionSection>,
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub exact: bool,
    pub timestamp: Option<String>,
    pub reduction: Option<ReductionRequest>,
}

/// Labels `C1 … Cc` accepted by [`parse_vertex_list`], with the zero complex
/// of an open model as `C(c+1)`.
pub fn vertex_labels(model: &Model) -> Vec<String> {
    let net = &model.network;
    let mut v: Vec<String> = (0..net.num_complexes()).map(|i| net.complex_label(i)).collect();
    if model.is_open() {
        v.push("0".into());
    }
    v
}

/// Parses `C2,C5` (one-based) into zero-based indices below `n`.
pub fn parse_vertex_list(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let digits = item
            .strip_prefix('C')
            .or_else(|| item.strip_prefix('c'))
            .unwrap_or(item);
        let k: usize = digits
            .parse()
            .map_err(|_| CrnError::Invalid(format!("`{item}` is not a complex index like C2")))?;
        if k == 0 || k > n {
            return Err(CrnError::Invalid(format!("complex {item} is out of range 1..={n}")));
        }
        out.push(k - 1);
    }
    Ok(out)
}

pub fn analyze(model: &Model, tol: &Tolerances, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    tol.validate()?;
    let net = &model.network;
    let comps = graph::components(&net.matrices().d);
    let rho = graph::matrix_tree_rho(net.laplacian(), &comps, tol.positivity)?;
    let verdict = balance::check_complex_balanced(net, tol, opts.exact)?;
    let network = NetworkSummary {
        species: net.species().names().to_vec(),
        complexes: (0..net.num_complexes()).map(|i| net.complex_label(i)).collect(),
        m: net.num_species(),
        c: net.num_complexes(),
        r: net.num_reactions(),
        linkage_classes: comps.count(),
        deficiency: verdict.deficiency,
        open: model.is_open(),
    };

    let (detailed_balanced, formally_balanced) = match ReversibleNetwork::from_network(net) {
        Ok(rev) => (
            Some(detailed::wegscheider_check(&rev, tol, opts.exact)?.holds),
            Some(detailed::weakened_wegscheider_check(&rev, tol, opts.exact)?.holds),
        ),
        Err(_) => (None, None),
    };

    let ext = model.open.as_ref().map(|o| open::extend(net, o)).transpose()?;
    let (mass_conservation, equilibrium, steady_state) = match &ext {
        None => {
            let mc = balance::check_mass_conservation(net, tol, opts.exact);
            let eq = if verdict.complex_balanced {
                let x = balance::find_complex_balanced_equilibrium(net, &verdict, tol)?;
                let residual = balance::verify_complex_balanced(net, &x, tol)?;
                let set = balance::equilibrium_set(net, &x, tol)?;
                Some(EquilibriumSection {
                    x_star: set.x_star,
                    dimension: set.dimension,
                    kernel_basis: set.kernel_basis,
                    residual,
                })
            } else {
                None
            };
            (mc, eq, None)
        }
        Some(e) => (
            open::extended_mass_conservation(e, tol, opts.exact),
            None,
            Some(open::solve_steady_state(e, tol)?),
        ),
    };
    let complex_balanced = match &steady_state {
        Some(ss) => ss.status == SteadyStateStatus::ComplexBalanced,
        None => verdict.complex_balanced,
    };

    let reduction = opts
        .reduction
        .as_ref()
        .map(|req| {
            reduce_model(
                model,
                ext.as_ref(),
                equilibrium.as_ref(),
                steady_state.as_ref(),
                req,
                tol,
            )
        })
        .transpose()?;

    Ok(AnalysisReport {
        tool: ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        },
        timestamp: opts.timestamp.clone(),
        tolerances: *tol,
        exact: opts.exact,
        network,
        rho: rho.values,
        verdicts: Verdicts {
            weakly_reversible: verdict.weakly_reversible,
            complex_balanced,
            detailed_balanced,
            formally_balanced,
            mass_conserving: mass_conservation.conserved,
        },
        balance: verdict,
        mass_conservation,
        equilibrium,
        steady_state,
        reduction,
    })
}

/// Steady states used to check that reduction keeps them: `x*` and two
/// points along each direction of the set.
fn sample_states(x_star: &[f64], basis: &Matrix) -> Vec<Vector> {
    let log = linalg::ln(&Vector::from_vec(x_star.to_vec()));
    let mut out = vec![linalg::exp(&log)];
    for k in 0..basis.ncols() {
        for s in [-0.5, 0.5] {
            out.push(linalg::exp(&(&log + basis.column(k) * s)));
        }
    }
    out
}

/// Equilibrium `x₁` in the stoichiometric class of `x0`, the reference of
/// `G` along trajectories; `None` when the model is not complex-balanced.
pub fn class_equilibrium(model: &Model, x0: &Vector, tol: &Tolerances) -> Result<Option<Vector>> {
    let net = &model.network;
    let (s, x_star) = match &model.open {
        Some(o) => {
            let ext = open::extend(net, o)?;
            let ss = open::solve_steady_state(&ext, tol)?;
            match (ss.status, ss.x_star) {
                (SteadyStateStatus::ComplexBalanced, Some(x)) => (ext.s_e(), Vector::from_vec(x)),
                _ => return Ok(None),
            }
        }
        None => {
            let verdict = balance::check_complex_balanced(net, tol, false)?;
            if !verdict.complex_balanced {
                return Ok(None);
            }
            (net.s(), balance::find_complex_balanced_equilibrium(net, &verdict, tol)?)
        }
    };
    let class = dynamics::project_to_class(&s, x0, &x_star, tol)?;
    Ok(Some(Vector::from_vec(class.projected)))
}

/// Integrates the closed dynamics, or the open ones when the model has
/// inflows or outflows.
pub fn simulate_model(model: &Model, x0: &Vector, t_end: f64, opts: &SimOptions) -> Result<Trajectory> {
    match &model.open {
        Some(o) => dynamics::simulate(&open::extend(&model.network, o)?, x0, t_end, opts),
        None => dynamics::simulate(&model.network, x0, t_end, opts),
    }
}

fn reduce_model(
    model: &Model,
    ext: Option<&ExtendedNetwork>,
    eq: Option<&EquilibriumSection>,
    ss: Option<&SteadyStateReport>,
    req: &ReductionRequest,
    tol: &Tolerances,
) -> Result<ReductionSection> {
    let net = &model.network;
    let (l, z, protected) = match ext {
        Some(e) => (e.laplacian().clone(), e.z_e().clone(), vec![e.zero_index()]),
        None => (net.laplacian().clone(), net.matrices().z.clone(), vec![]),
    };
    let reference: Option<(Vec<f64>, Matrix)> = match (eq, ss) {
        (Some(eq), _) => Some((eq.x_star.clone(), eq.kernel_basis.clone())),
        (_, Some(ss)) if ss.status == SteadyStateStatus::ComplexBalanced => {
            ss.x_star.clone().map(|x| (x, ss.set_basis.clone()))
        }
        _ => None,
    };
    let states = reference.as_ref().map(|(x, b)| sample_states(x, b)).unwrap_or_default();
    let raw = kron::kron_reduce(&l, &z, &req.delete, &protected, None)?;
    let (result, raw_ref) = match req.mode {
        ReductionMode::Raw => (raw, None),
        ReductionMode::Balanced => {
            let (x, _) = reference
                .as_ref()
                .ok_or_else(|| CrnError::Invalid("balanced reduction needs a complex-balanced steady state".into()))?;
            let xv = Vector::from_vec(x.clone());
            let bal = match ext {
                Some(e) => open::extended_balanced_laplacian(e, &xv, tol)?,
                None => balance::balanced_laplacian(net, &xv, tol)?,
            };
            let r = kron::kron_reduce(&bal.l_bal, &z, &req.delete, &protected, Some(&xv))?;
            (r, Some(raw))
        }
    };
    let check = kron::verify_reduction(&result, &states, raw_ref.as_ref(), tol.membership.max(1e-9));
    if !check.violations.is_empty() {
        return Err(CrnError::Internal(format!(
            "reduction check failed: {}",
            check.violations.join("; ")
        )));
    }
    let labels = vertex_labels(model);
    Ok(ReductionSection {
        mode: req.mode.clone(),
        kept: result.kept.iter().map(|&i| labels[i].clone()).collect(),
        deleted: result.deleted.iter().map(|&i| labels[i].clone()).collect(),
        result,
        check,
    })
}
