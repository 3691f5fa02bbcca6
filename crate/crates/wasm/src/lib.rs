//! Browser bindings: analyze, simulate and reduce a network given as DSL
//! text. Every export returns JSON text or throws the error message.
//!
//! The `*_text` functions hold the logic and run natively as well; the
//! `#[wasm_bindgen]` wrappers only convert the error type.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use crn_core::analysis::{self, AnalyzeOptions, ReductionMode, ReductionRequest};
use crn_core::dynamics::{self, SimOptions, SimStatus};
use crn_core::linalg::Vector;
use crn_core::{parse_network, report, Model, Tolerances};

/// Sample intervals are capped so a typo cannot freeze the page.
pub const MAX_SAMPLES: u32 = 5000;

fn model(dsl: &str) -> Result<Model, String> {
    parse_network(dsl).map_err(|e| e.to_string())
}

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    report::to_json_string(value).map_err(|e| e.to_string())
}

pub fn analyze_text(dsl: &str) -> Result<String, String> {
    let m = model(dsl)?;
    let report =
        analysis::analyze(&m, &Tolerances::default(), &AnalyzeOptions::default()).map_err(|e| e.to_string())?;
    json(&report)
}

#[derive(Serialize)]
struct Series<'a> {
    name: &'a str,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct Plot<'a> {
    t: Vec<f64>,
    series: Vec<Series<'a>>,
    /// `G(x(t); x₁)` when the network is complex-balanced.
    gibbs: Option<Vec<f64>>,
    status: SimStatus,
}

/// `x0` is a comma-separated list with one entry per species.
pub fn simulate_text(dsl: &str, x0: &str, t_end: f64, samples: u32) -> Result<String, String> {
    let m = model(dsl)?;
    let tol = Tolerances::default();
    let x0: Vec<f64> = x0
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", s.trim()))
        })
        .collect::<Result<_, _>>()?;
    let names = m.network.species().names();
    if x0.len() != names.len() {
        return Err(format!(
            "initial state has {} values for {} species ({})",
            x0.len(),
            names.len(),
            names.join(", ")
        ));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(format!("end time must be finite and nonnegative, got {t_end}"));
    }
    if samples == 0 || samples > MAX_SAMPLES {
        return Err(format!("samples must lie in 1..={MAX_SAMPLES}"));
    }
    let x0 = Vector::from_vec(x0);
    let reference = analysis::class_equilibrium(&m, &x0, &tol).map_err(|e| e.to_string())?;
    let opts = SimOptions {
        samples: dynamics::uniform_samples(t_end, samples as usize),
        gibbs_ref: reference.map(|r| r.iter().copied().collect()),
        ..SimOptions::default()
    };
    let traj = analysis::simulate_model(&m, &x0, t_end, &opts).map_err(|e| e.to_string())?;
    let plot = Plot {
        series: names
            .iter()
            .enumerate()
            .map(|(j, name)| Series {
                name,
                values: traj.states.iter().map(|x| x[j]).collect(),
            })
            .collect(),
        t: traj.times,
        gibbs: traj.gibbs,
        status: traj.status,
    };
    json(&plot)
}

/// `delete` lists one-based complexes as in `C2,C5`.
pub fn reduce_text(dsl: &str, delete: &str, balanced: bool) -> Result<String, String> {
    let m = model(dsl)?;
    let n = analysis::vertex_labels(&m).len();
    let opts = AnalyzeOptions {
        reduction: Some(ReductionRequest {
            delete: analysis::parse_vertex_list(delete, n).map_err(|e| e.to_string())?,
            mode: if balanced {
                ReductionMode::Balanced
            } else {
                ReductionMode::Raw
            },
        }),
        ..AnalyzeOptions::default()
    };
    let report = analysis::analyze(&m, &Tolerances::default(), &opts).map_err(|e| e.to_string())?;
    json(&report.reduction)
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn analyze(dsl: &str) -> Result<String, JsValue> {
    js(analyze_text(dsl))
}

#[wasm_bindgen]
pub fn simulate(dsl: &str, x0: &str, t_end: f64, samples: u32) -> Result<String, JsValue> {
    js(simulate_text(dsl, x0, t_end, samples))
}

#[wasm_bindgen]
pub fn reduce(dsl: &str, delete: &str, balanced: bool) -> Result<String, JsValue> {
    js(reduce_text(dsl, delete, balanced))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "0 -> X1 ; k=4\nX1 <-> X2 + 2 X3 ; kf=2, kr=1\nX2 + 2 X3 -> 0 ; k=2\n";

    fn parse(s: &str) -> serde_json::Value {
        serde_json::from_str(s).unwrap()
    }

    #[test]
    fn analyze_reports_steady_state() {
        let r = parse(&analyze_text(EXAMPLE).unwrap());
        let w = r["steady_state"]["w_star"].as_array().unwrap();
        assert!((w[0].as_f64().unwrap() - 3.0).abs() < 1e-10);
        assert!((w[1].as_f64().unwrap() - 2.0).abs() < 1e-10);
        assert!(r.get("timestamp").is_none());
    }

    #[test]
    fn simulate_returns_plot_series() {
        let p = parse(&simulate_text("A <-> B ; kf=1, kr=1", "2, 0.5", 20.0, 40).unwrap());
        assert_eq!(p["t"].as_array().unwrap().len(), 41);
        let a = p["series"][0]["values"].as_array().unwrap();
        assert!((a.last().unwrap().as_f64().unwrap() - 1.25).abs() < 1e-6);
        let g = p["gibbs"].as_array().unwrap();
        assert!(g
            .windows(2)
            .all(|w| w[1].as_f64().unwrap() <= w[0].as_f64().unwrap() + 1e-8));
    }

    #[test]
    fn reduce_deletes_one_complex() {
        let r = parse(&reduce_text(EXAMPLE, "C2", true).unwrap());
        assert_eq!(r["kept"], serde_json::json!(["X1", "0"]));
        let l = r["result"]["l_hat"].as_array().unwrap();
        assert!((l[0][0].as_f64().unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn errors_are_messages() {
        assert!(analyze_text("A -> ; k=1").unwrap_err().contains("line 1"));
        assert!(simulate_text("A -> B ; k=1", "1", 1.0, 10)
            .unwrap_err()
            .contains("2 species"));
        assert!(simulate_text("A -> B ; k=1", "1,x", 1.0, 10).is_err());
        assert!(reduce_text(EXAMPLE, "C3", true).is_err());
    }
}
