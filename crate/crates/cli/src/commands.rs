use std::fmt;
use std::fs;
use std::path::Path;

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use crn_core::analysis::{self, AnalysisReport, AnalyzeOptions, ReductionMode, ReductionRequest, ToolInfo};
use crn_core::config::{self, Tolerances};
use crn_core::consensus;
use crn_core::dynamics::{self, SimOptions, SimStatus, Trajectory};
use crn_core::graph;
use crn_core::linalg::{Matrix, Vector};
use crn_core::report;
use crn_core::{parse_network, CrnError, Model, ReactionNetwork};

use crate::args::{AnalyzeArgs, Cli, Command, ConsensusArgs, ReduceArgs, ReportArgs, SimulateArgs};

/// Largest component the hidden oracle flag enumerates.
const ORACLE_LIMIT: usize = 6;

/// Rows kept in `--plot-data` output.
const PLOT_POINTS: usize = 200;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
    /// Output produced before the failure, still worth printing.
    pub partial: Option<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
            partial: None,
        }
    }

    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
            partial: None,
        }
    }
}

impl From<CrnError> for Failure {
    fn from(e: CrnError) -> Self {
        let code = match e {
            CrnError::Parse(_) | CrnError::Invalid(_) => 2,
            CrnError::Numeric(_) | CrnError::Rejected { .. } => 3,
            CrnError::Internal(_) => 4,
        };
        Failure {
            code,
            message: e.to_string(),
            partial: None,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

type Outcome = Result<String, Failure>;

pub fn run(cli: &Cli) -> Outcome {
    let tol = tolerances(cli)?;
    let stamp = (!cli.no_timestamp).then(|| Utc::now().to_rfc3339_opts(SecondsFormat::Secs, true));
    match &cli.command {
        Command::Analyze(a) => analyze(a, &tol, stamp),
        Command::Simulate(a) => simulate(a, &tol),
        Command::SteadyState(a) => steady_state(a, &tol, stamp),
        Command::Reduce(a) => reduce(a, &tol, stamp),
        Command::Consensus(a) => consensus_cmd(a, &tol, stamp),
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn tolerances(cli: &Cli) -> Result<Tolerances, Failure> {
    let text = cli.config.as_deref().map(read).transpose()?;
    let env = Tolerances::global_from_env()?;
    let tol = config::resolve_tolerances(text.as_deref(), env, cli.tol)?;
    tol.validate()?;
    Ok(tol)
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    let text = read(path)?;
    parse_network(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Outcome {
    let mut s = report::to_json_string(value).map_err(|e| Failure::internal(format!("serialising output: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn report_for(
    args: &ReportArgs,
    tol: &Tolerances,
    stamp: Option<String>,
    reduction: Option<&str>,
    mode: ReductionMode,
) -> Result<(Model, AnalysisReport), Failure> {
    let model = load_model(&args.file)?;
    let reduction = match reduction {
        Some(list) => {
            let n = analysis::vertex_labels(&model).len();
            Some(ReductionRequest {
                delete: analysis::parse_vertex_list(list, n)?,
                mode,
            })
        }
        None => None,
    };
    let opts = AnalyzeOptions {
        exact: args.exact,
        timestamp: stamp,
        reduction,
    };
    let report = analysis::analyze(&model, tol, &opts)?;
    Ok((model, report))
}

fn analyze(args: &AnalyzeArgs, tol: &Tolerances, stamp: Option<String>) -> Outcome {
    let (model, report) = report_for(&args.report, tol, stamp, None, ReductionMode::Balanced)?;
    if args.oracle {
        check_oracle(&model.network, &report.rho)?;
    }
    to_json(&report)
}

fn check_oracle(net: &ReactionNetwork, rho: &[f64]) -> Result<(), Failure> {
    let comps = graph::components(&net.matrices().d);
    for members in comps.members() {
        if members.len() > ORACLE_LIMIT {
            eprintln!("crn: oracle skipped a component of {} complexes", members.len());
            continue;
        }
        let scale = members.iter().map(|&v| rho[v].abs()).fold(0.0, f64::max);
        for &v in members {
            let tree = graph::spanning_tree_oracle(net.laplacian(), v)?;
            if (tree - rho[v]).abs() > 1e-9 * scale.max(tree.abs()) {
                return Err(Failure::internal(format!(
                    "complex C{}: cofactor {} but spanning trees give {tree}",
                    v + 1,
                    rho[v]
                )));
            }
        }
    }
    Ok(())
}

fn steady_state(args: &ReportArgs, tol: &Tolerances, stamp: Option<String>) -> Outcome {
    let (_, report) = report_for(args, tol, stamp, None, ReductionMode::Balanced)?;
    if report.steady_state.is_none() {
        return Err(Failure::input(format!(
            "{}: no inflow or outflow reactions; use `crn analyze` for closed networks",
            args.file.display()
        )));
    }
    to_json(&report)
}

fn reduce(args: &ReduceArgs, tol: &Tolerances, stamp: Option<String>) -> Outcome {
    let mode = if args.raw {
        ReductionMode::Raw
    } else {
        ReductionMode::Balanced
    };
    let (_, report) = report_for(&args.report, tol, stamp, Some(&args.delete), mode)?;
    to_json(&report)
}

fn simulate(args: &SimulateArgs, tol: &Tolerances) -> Outcome {
    if !(args.t_end.is_finite() && args.t_end >= 0.0) {
        return Err(Failure::input(format!(
            "--t-end must be a finite nonnegative time, got {}",
            args.t_end
        )));
    }
    if args.samples == 0 {
        return Err(Failure::input("--samples must be at least 1"));
    }
    let model = load_model(&args.file)?;
    let net = &model.network;
    if args.x0.len() != net.num_species() {
        return Err(Failure::input(format!(
            "--x0 has {} values for {} species ({})",
            args.x0.len(),
            net.num_species(),
            net.species().names().join(", ")
        )));
    }
    let x0 = Vector::from_vec(args.x0.clone());
    let reference = analysis::class_equilibrium(&model, &x0, tol)?;
    let opts = SimOptions {
        rtol: args.rtol,
        atol: args.atol,
        samples: dynamics::uniform_samples(args.t_end, args.samples),
        log_coords: args.log_coords,
        gibbs_ref: reference.map(|r| r.iter().copied().collect()),
        ..SimOptions::default()
    };
    let traj = analysis::simulate_model(&model, &x0, args.t_end, &opts)?;
    let names = net.species().names();
    if let Some(path) = &args.plot_data {
        let text = to_json(&PlotData::from_trajectory(&traj, names))?;
        fs::write(path, text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    }
    let csv = traj.to_csv(names);
    match traj.status {
        SimStatus::Completed | SimStatus::Converged => Ok(csv),
        SimStatus::StepUnderflow | SimStatus::StepLimit => Err(Failure {
            code: 3,
            message: traj
                .diagnostic
                .clone()
                .unwrap_or_else(|| format!("integration stopped early ({:?})", traj.status)),
            partial: Some(csv),
        }),
    }
}

#[derive(Serialize)]
struct Series<'a> {
    name: &'a str,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct PlotData<'a> {
    t: Vec<f64>,
    series: Vec<Series<'a>>,
    gibbs: Option<Vec<f64>>,
}

impl<'a> PlotData<'a> {
    /// Every k-th sample, plus the last one.
    fn from_trajectory(traj: &Trajectory, names: &'a [String]) -> Self {
        let n = traj.times.len();
        let stride = n.div_ceil(PLOT_POINTS).max(1);
        let mut rows: Vec<usize> = (0..n).step_by(stride).collect();
        if n > 0 && rows.last() != Some(&(n - 1)) {
            rows.push(n - 1);
        }
        PlotData {
            t: rows.iter().map(|&i| traj.times[i]).collect(),
            series: names
                .iter()
                .enumerate()
                .map(|(j, name)| Series {
                    name,
                    values: rows.iter().map(|&i| traj.states[i][j]).collect(),
                })
                .collect(),
            gibbs: traj.gibbs.as_ref().map(|g| rows.iter().map(|&i| g[i]).collect()),
        }
    }
}

#[derive(Serialize)]
struct ConsensusRunSummary {
    t_end: f64,
    status: SimStatus,
    final_state: Vec<f64>,
    final_gap: f64,
    conserved_drift: f64,
}

#[derive(Serialize)]
struct ConsensusReport {
    tool: ToolInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    timestamp: Option<String>,
    labels: Vec<String>,
    sigma: Vec<f64>,
    #[serde(serialize_with = "report::serialize_matrix")]
    l_c: Matrix,
    #[serde(serialize_with = "report::serialize_matrix")]
    l_c_bal: Matrix,
    symmetric_min_eigenvalue: f64,
    x0: Option<Vec<f64>>,
    d_star: Option<f64>,
    lyapunov: Option<f64>,
    run: Option<ConsensusRunSummary>,
}

fn consensus_cmd(args: &ConsensusArgs, tol: &Tolerances, stamp: Option<String>) -> Outcome {
    let text = read(&args.file)?;
    let (labels, edges) =
        consensus::parse_edge_list(&text).map_err(|e| Failure::input(format!("{}: {e}", args.file.display())))?;
    let sys = consensus::build_consensus(labels, &edges, tol)?;
    let x0 = args.x0.as_ref().map(|v| Vector::from_vec(v.clone()));
    let (d_star, lyapunov) = match &x0 {
        Some(x) => (
            Some(consensus::consensus_value(&sys, x)?),
            Some(consensus::lyapunov_check(&sys, x)),
        ),
        None => (None, None),
    };
    let run = match (&x0, args.t_end) {
        (Some(x), Some(t_end)) => {
            if !(t_end.is_finite() && t_end >= 0.0) {
                return Err(Failure::input(format!(
                    "--t-end must be a finite nonnegative time, got {t_end}"
                )));
            }
            let r = consensus::simulate_consensus(&sys, x, t_end, args.samples.max(1))?;
            Some(ConsensusRunSummary {
                t_end,
                status: r.trajectory.status,
                final_state: r.trajectory.final_state().iter().copied().collect(),
                final_gap: r.final_gap,
                conserved_drift: r.conserved_drift,
            })
        }
        _ => None,
    };
    let report = ConsensusReport {
        tool: ToolInfo {
            name: analysis::TOOL_NAME,
            version: analysis::TOOL_VERSION,
        },
        timestamp: stamp,
        symmetric_min_eigenvalue: consensus::symmetric_part_min_eigenvalue(&sys),
        labels: sys.labels,
        sigma: sys.sigma,
        l_c: sys.l_c,
        l_c_bal: sys.l_c_bal,
        x0: args.x0.clone(),
        d_star,
        lyapunov,
        run,
    };
    to_json(&report)
}
