//! Time integration of mass-action dynamics, the Gibbs-type Lyapunov
//! function, projection onto stoichiometric classes, and the dissipation
//! check `eᵀ f ≤ 0` for `f = −𝓛 Exp(e)`.

use serde::Serialize;

use crate::balance::BalancedLaplacian;
use crate::config::Tolerances;
use crate::error::{CrnError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::network::ReactionNetwork;
use crate::open::ExtendedNetwork;

/// Smallest component a guarded step may produce.
pub const POSITIVITY_FLOOR: f64 = 1e-300;
/// Newton iteration cap in [`project_to_class`].
pub const PROJECTION_MAX_ITER: usize = 200;

/// Autonomous right-hand side `ẋ = f(x)`.
pub trait VectorField {
    fn dim(&self) -> usize;
    fn eval(&self, x: &Vector) -> Vector;
}

/// `−Z L Exp(Zᵀ Ln x)`.
impl VectorField for ReactionNetwork {
    fn dim(&self) -> usize {
        self.num_species()
    }

    fn eval(&self, x: &Vector) -> Vector {
        -(self.z() * (self.laplacian() * self.complex_monomials(x)))
    }
}

/// `−Z_e L_e Exp(Z_eᵀ Ln x)`.
impl VectorField for ExtendedNetwork {
    fn dim(&self) -> usize {
        self.base().num_species()
    }

    fn eval(&self, x: &Vector) -> Vector {
        self.rhs_laplacian(x)
    }
}

/// `ẋ = −A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField(pub Matrix);

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn eval(&self, x: &Vector) -> Vector {
        -(&self.0 * x)
    }
}

/// `μ̇ = f(e^μ) / e^μ` for `μ = Ln x`.
struct LogField<'a, F: VectorField + ?Sized>(&'a F);

impl<F: VectorField + ?Sized> VectorField for LogField<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, mu: &Vector) -> Vector {
        let x = linalg::exp(mu);
        self.0.eval(&x).component_div(&x)
    }
}

fn check_positive(x: &Vector, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(CrnError::Invalid(format!(
            "state has {} entries, expected {dim}",
            x.len()
        )));
    }
    if x.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
        return Err(CrnError::Invalid("state must be strictly positive".into()));
    }
    Ok(())
}

/// Closed right-hand side, rejecting nonpositive states.
pub fn rhs(network: &ReactionNetwork, x: &Vector) -> Result<Vector> {
    check_positive(x, network.num_species())?;
    Ok(network.eval(x))
}

/// Open right-hand side in Laplacian form, cross-checked against the flow
/// form.
pub fn rhs_open(ext: &ExtendedNetwork, x: &Vector) -> Result<Vector> {
    check_positive(x, ext.dim())?;
    let a = ext.rhs_laplacian(x);
    let b = ext.rhs_flow(x);
    let scale = linalg::inf_norm(&ext.flux(x)).max(f64::MIN_POSITIVE);
    if linalg::inf_norm(&(&a - &b)) > 1e-10 * scale * (1.0 + linalg::max_abs(&ext.base().z())) {
        return Err(CrnError::Internal(
            "flow-form and Laplacian-form right-hand sides disagree".into(),
        ));
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Sample times; must start at 0 and increase. Empty means `[0, t_end]`.
    pub samples: Vec<f64>,
    pub positivity_guard: bool,
    pub log_coords: bool,
    pub stop_on_convergence: bool,
    pub max_steps: usize,
    /// Reference state for `G(x(t); x_ref)`.
    pub gibbs_ref: Option<Vec<f64>>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            rtol: 1e-8,
            atol: 1e-10,
            samples: Vec::new(),
            positivity_guard: true,
            log_coords: false,
            stop_on_convergence: false,
            max_steps: 1_000_000,
            gibbs_ref: None,
        }
    }
}

/// `n + 1` equally spaced sample times on `[0, t_end]`.
pub fn uniform_samples(t_end: f64, n: usize) -> Vec<f64> {
    if t_end == 0.0 {
        return vec![0.0];
    }
    let n = n.max(1);
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimStatus {
    Completed,
    Converged,
    StepUnderflow,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuardEvent {
    pub time: f64,
    pub rejected_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub gibbs: Option<Vec<f64>>,
    pub gibbs_ref: Option<Vec<f64>>,
    pub events: Vec<GuardEvent>,
    pub status: SimStatus,
    /// First time `‖f(x)‖∞ ≤ 1e-9 (1 + ‖x‖∞)` held for five accepted steps.
    pub converged_at: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub diagnostic: Option<String>,
}

impl Trajectory {
    pub fn final_state(&self) -> Vector {
        Vector::from_vec(self.states.last().cloned().unwrap_or_default())
    }

    /// CSV with header `t,<species...>,G`; `G` is empty when no reference
    /// state was given.
    pub fn to_csv(&self, species: &[String]) -> String {
        let mut out = String::from("t");
        for s in species {
            out.push(',');
            out.push_str(s);
        }
        out.push_str(",G\n");
        for (i, (t, x)) in self.times.iter().zip(&self.states).enumerate() {
            out.push_str(&crate::report::format_f64(*t));
            for v in x {
                out.push(',');
                out.push_str(&crate::report::format_f64(*v));
            }
            out.push(',');
            if let Some(g) = &self.gibbs {
                out.push_str(&crate::report::format_f64(g[i]));
            }
            out.push('\n');
        }
        out
    }
}

// Dormand–Prince 5(4) tableau
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One DP45 step from `y` with `k1 = f(y)`; returns `(y_new, k7, err)`.
fn dp_step(f: &dyn VectorField, y: &Vector, k1: &Vector, h: f64) -> (Vector, Vector, Vector) {
    debug_assert_eq!(C[0], 0.0);
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    k.push(k1.clone());
    for s in 1..7 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if A[s][j] != 0.0 {
                ys.axpy(h * A[s][j], kj, 1.0);
            }
        }
        k.push(f.eval(&ys));
    }
    let mut y_new = y.clone();
    let mut err = Vector::zeros(y.len());
    for s in 0..7 {
        if B5[s] != 0.0 {
            y_new.axpy(h * B5[s], &k[s], 1.0);
        }
        err.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
    }
    let k7 = k.pop().expect("seven stages");
    (y_new, k7, err)
}

/// Integrates `ẋ = f(x)` from `x0` to the last sample time.
pub fn simulate<F: VectorField>(field: &F, x0: &Vector, t_end: f64, opts: &SimOptions) -> Result<Trajectory> {
    let dim = field.dim();
    if x0.len() != dim {
        return Err(CrnError::Invalid(format!(
            "initial state has {} entries, expected {dim}",
            x0.len()
        )));
    }
    if opts.positivity_guard || opts.log_coords {
        check_positive(x0, dim)?;
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(CrnError::Invalid(format!("t_end must be finite and ≥ 0, got {t_end}")));
    }
    let samples = if opts.samples.is_empty() {
        uniform_samples(t_end, 1)
    } else {
        opts.samples.clone()
    };
    if samples[0] != 0.0 || samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(CrnError::Invalid(
            "sample times must start at 0 and increase strictly".into(),
        ));
    }
    let gibbs_ref = match &opts.gibbs_ref {
        Some(r) => {
            let r = Vector::from_vec(r.clone());
            check_positive(&r, dim)?;
            Some(r)
        }
        None => None,
    };
    let log_field = LogField(field);
    let f: &dyn VectorField = if opts.log_coords { &log_field } else { field };
    let to_state = |y: &Vector| if opts.log_coords { linalg::exp(y) } else { y.clone() };

    let mut traj = Trajectory {
        times: vec![0.0],
        states: vec![x0.iter().copied().collect()],
        gibbs: None,
        gibbs_ref: gibbs_ref.as_ref().map(|r| r.iter().copied().collect()),
        events: Vec::new(),
        status: SimStatus::Completed,
        converged_at: None,
        accepted_steps: 0,
        rejected_steps: 0,
        diagnostic: None,
    };
    let mut y = if opts.log_coords { linalg::ln(x0) } else { x0.clone() };
    let mut k1 = f.eval(&y);
    let mut t = 0.0;
    let span = *samples.last().expect("nonempty");
    let mut h = (1e-6 * span.max(1.0)).min(span.max(f64::MIN_POSITIVE));
    let mut steady_count = 0;
    let mut next = 1;
    'outer: while next < samples.len() {
        let target = samples[next];
        while t < target {
            if traj.accepted_steps + traj.rejected_steps >= opts.max_steps {
                traj.status = SimStatus::StepLimit;
                traj.diagnostic = Some(format!("step limit {} reached at t = {t:e}", opts.max_steps));
                break 'outer;
            }
            let remaining = target - t;
            let clamped = h >= remaining;
            let step = if clamped { remaining } else { h };
            if step < 1e-14 * t.abs().max(1.0) && !clamped {
                traj.status = SimStatus::StepUnderflow;
                traj.diagnostic = Some(format!("step size {step:e} underflowed at t = {t:e}"));
                break 'outer;
            }
            let (y_new, k7, err) = dp_step(f, &y, &k1, step);
            let err_norm = (err
                .iter()
                .zip(y.iter().zip(y_new.iter()))
                .map(|(e, (a, b))| {
                    let sc = opts.atol + opts.rtol * a.abs().max(b.abs());
                    (e / sc).powi(2)
                })
                .sum::<f64>()
                / dim.max(1) as f64)
                .sqrt();
            if !err_norm.is_finite() || err_norm > 1.0 {
                traj.rejected_steps += 1;
                let factor = if err_norm.is_finite() {
                    (0.9 * err_norm.powf(-0.2)).max(0.2)
                } else {
                    0.2
                };
                h = step * factor;
                continue;
            }
            if opts.positivity_guard && !opts.log_coords && y_new.iter().any(|&v| v <= POSITIVITY_FLOOR) {
                traj.rejected_steps += 1;
                traj.events.push(GuardEvent {
                    time: t,
                    rejected_step: step,
                });
                h = 0.5 * step;
                continue;
            }
            t = if clamped { target } else { t + step };
            y = y_new;
            k1 = k7;
            traj.accepted_steps += 1;
            let grow = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = if clamped { h.max(step * grow) } else { step * grow };

            let x = to_state(&y);
            let fx = field.eval(&x);
            if linalg::inf_norm(&fx) <= 1e-9 * (1.0 + linalg::inf_norm(&x)) {
                steady_count += 1;
                if steady_count == 5 && traj.converged_at.is_none() {
                    traj.converged_at = Some(t);
                    if opts.stop_on_convergence {
                        traj.times.push(t);
                        traj.states.push(x.iter().copied().collect());
                        traj.status = SimStatus::Converged;
                        break 'outer;
                    }
                }
            } else {
                steady_count = 0;
            }
        }
        traj.times.push(t);
        traj.states.push(to_state(&y).iter().copied().collect());
        next += 1;
    }
    if let Some(r) = &gibbs_ref {
        let g: Result<Vec<f64>> = traj
            .states
            .iter()
            .map(|s| gibbs(&Vector::from_vec(s.clone()), r))
            .collect();
        traj.gibbs = Some(g?);
    }
    Ok(traj)
}

/// `G(x) = xᵀ Ln(x / x_ref) + (x_ref − x)ᵀ 1`.
pub fn gibbs(x: &Vector, x_ref: &Vector) -> Result<f64> {
    check_positive(x, x_ref.len())?;
    check_positive(x_ref, x.len())?;
    Ok(x.iter()
        .zip(x_ref.iter())
        .map(|(&a, &b)| a * (a / b).ln() + b - a)
        .sum())
}

/// `∂G/∂x = Ln(x / x_ref)`.
pub fn gibbs_gradient(x: &Vector, x_ref: &Vector) -> Result<Vector> {
    check_positive(x, x_ref.len())?;
    check_positive(x_ref, x.len())?;
    Ok(x.zip_map(x_ref, |a, b| (a / b).ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoichClass {
    pub x0: Vec<f64>,
    /// Orthonormal columns spanning `im S`.
    #[serde(serialize_with = "crate::report::serialize_matrix_columns")]
    pub s_basis: Matrix,
    pub projected: Vec<f64>,
    /// `‖(I − P)(x₁ − x₀)‖∞` with `P` the projector onto `im S`.
    pub class_residual: f64,
    /// `‖Sᵀ (Ln x₁ − Ln x*)‖∞`.
    pub equilibrium_residual: f64,
    pub iterations: usize,
}

/// The unique `x₁` with `x₁ − x₀ ∈ im S` and `Sᵀ Ln x₁ = Sᵀ Ln x*`, as the
/// minimiser of `G(·; x*)` over `x₀ + im S`.
///
/// `s` is `S` for closed networks and `S_e` for open ones.
pub fn project_to_class(s: &Matrix, x0: &Vector, x_star: &Vector, tol: &Tolerances) -> Result<StoichClass> {
    let m = x0.len();
    check_positive(x0, m)?;
    check_positive(x_star, m)?;
    if s.nrows() != m {
        return Err(CrnError::Invalid(
            "stoichiometric matrix has the wrong row count".into(),
        ));
    }
    let b = linalg::orthonormal_column_basis(s, tol.rank);
    let k = b.ncols();
    let objective = |x: &Vector| -> f64 {
        x.iter()
            .zip(x_star.iter())
            .map(|(&a, &r)| a * (a / r).ln() + r - a)
            .sum()
    };
    let mut x = x0.clone();
    let mut iterations = 0;
    let mut done = k == 0;
    let mut last_gnorm = f64::INFINITY;
    while !done {
        if iterations == PROJECTION_MAX_ITER {
            let g = b.transpose() * x.zip_map(x_star, |a, r| (a / r).ln());
            return Err(CrnError::Numeric(format!(
                "class projection did not converge in {PROJECTION_MAX_ITER} iterations; gradient {:e}",
                linalg::inf_norm(&g)
            )));
        }
        iterations += 1;
        let g = b.transpose() * x.zip_map(x_star, |a, r| (a / r).ln());
        let hess = b.transpose() * Matrix::from_diagonal(&x.map(|v| 1.0 / v)) * &b;
        let Some(chol) = hess.clone().cholesky() else {
            return Err(CrnError::Numeric("class Hessian lost positive definiteness".into()));
        };
        let dxi = -chol.solve(&g);
        let decrement = -g.dot(&dxi);
        let gnorm = linalg::inf_norm(&g);
        let log_scale = 1.0 + linalg::inf_norm(&x.zip_map(x_star, |a, r| (a / r).ln()));
        if decrement <= 1e-30 || gnorm <= 1e-14 * log_scale {
            break;
        }
        let dx = &b * &dxi;
        let full = &x + &dx;
        if decrement <= 1e-12 && full.iter().all(|&v| v > 0.0) {
            // quadratic region: objective differences are below roundoff,
            // so progress is judged on the gradient
            if gnorm >= 0.5 * last_gnorm {
                break;
            }
            last_gnorm = gnorm;
            x = full;
            continue;
        }
        last_gnorm = gnorm;
        let f0 = objective(&x);
        let mut alpha = 1.0;
        loop {
            let cand = &x + &dx * alpha;
            if cand.iter().all(|&v| v > 0.0) && objective(&cand) <= f0 - 0.25 * alpha * decrement {
                x = cand;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-20 {
                done = true;
                break;
            }
        }
    }
    let diff = &x - x0;
    let class_residual = linalg::inf_norm(&(&diff - &b * (b.transpose() * &diff)));
    let equilibrium_residual = linalg::inf_norm(&(s.transpose() * x.zip_map(x_star, |a, r| (a / r).ln())));
    let scale = 1.0 + linalg::inf_norm(x0);
    if class_residual > tol.membership * scale * 1e3 {
        return Err(CrnError::Rejected {
            what: "class projection (affine constraint)".into(),
            residual: class_residual,
            tolerance: tol.membership * scale * 1e3,
        });
    }
    if equilibrium_residual > tol.membership * (1.0 + linalg::max_abs(s)) {
        return Err(CrnError::Rejected {
            what: "class projection (equilibrium condition)".into(),
            residual: equilibrium_residual,
            tolerance: tol.membership * (1.0 + linalg::max_abs(s)),
        });
    }
    Ok(StoichClass {
        x0: x0.iter().copied().collect(),
        s_basis: b,
        projected: x.iter().copied().collect(),
        class_residual,
        equilibrium_residual,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dissipation {
    /// `f = −𝓛 Exp(e)`.
    pub f: Vec<f64>,
    /// `eᵀ f`.
    pub power: f64,
    /// `power ≤ tol`.
    pub dissipative: bool,
}

/// Resistive relation of the port-Hamiltonian form: the power `eᵀ f` of
/// `f = −𝓛 Exp(e)` is never positive.
pub fn dissipation_check(bal: &BalancedLaplacian, e: &Vector, tol: &Tolerances) -> Result<Dissipation> {
    if e.len() != bal.size() {
        return Err(CrnError::Invalid(format!(
            "effort vector has {} entries, expected {}",
            e.len(),
            bal.size()
        )));
    }
    let ex = linalg::exp(e);
    let f = -(&bal.l_bal * &ex);
    let power = e.dot(&f);
    let scale = 1.0_f64.max(linalg::inf_norm_mat(&bal.l_bal) * linalg::inf_norm(&ex) * linalg::inf_norm(e));
    Ok(Dissipation {
        f: f.iter().copied().collect(),
        power,
        dissipative: power <= tol.inequality * scale,
    })
}
