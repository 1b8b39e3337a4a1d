//! Python module `ifind`: kinematics queries, scenario runs and session reports.
//!
//! Poses cross the boundary as `[x, y, z, qw, qx, qy, qz]` lists; logs and
//! reports as NDJSON / JSON strings so Python can use its own `json` module.

use std::path::Path;

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ifind_sim::dual::rig_preset_names;
use ifind_sim::kinematics::{
    jacobian as chain_jacobian, load_chain, preset_names, solve_ik, ChainSource, IkOptions, KinematicChain,
    KinematicsError, Pose,
};
use ifind_sim::session::{compare_proportions as chi_square_test, SessionLog, SessionReport};
use ifind_sim::sim::{run_scenario as run_scenario_file, Robot, Scenario, SimError};

create_exception!(ifind, ConvergenceError, PyRuntimeError, "IK did not reach the target.");

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn kinematics_error(e: KinematicsError) -> PyErr {
    match e {
        KinematicsError::NotConverged { .. } => ConvergenceError::new_err(e.to_string()),
        _ => value_error(e),
    }
}

fn robot(name: &str) -> PyResult<Robot> {
    match Robot::preset(name) {
        Ok(r) => Ok(r),
        Err(KinematicsError::UnknownPreset(_)) => load_chain(&ChainSource::parse(name)).map(Robot::Single).map_err(value_error),
        Err(e) => Err(value_error(e)),
    }
}

fn single_arm(name: &str) -> PyResult<KinematicChain> {
    match robot(name)? {
        Robot::Single(c) => Ok(c),
        Robot::Dual(_) => Err(value_error(format!("{name} is a two-arm rig"))),
    }
}

/// Bundled chain and rig preset names.
#[pyfunction]
pub fn presets() -> Vec<String> {
    preset_names().chain(rig_preset_names()).map(String::from).collect()
}

/// Home joint vector of a preset.
#[pyfunction]
pub fn home(preset: &str) -> PyResult<Vec<f64>> {
    Ok(robot(preset)?.home().0)
}

/// Probe poses, one `[x, y, z, qw, qx, qy, qz]` per arm.
#[pyfunction]
#[pyo3(signature = (preset, q=None))]
pub fn fk(preset: &str, q: Option<Vec<f64>>) -> PyResult<Vec<[f64; 7]>> {
    let robot = robot(preset)?;
    let q = q.unwrap_or_else(|| robot.home().0);
    robot.check(&q).map_err(value_error)?;
    Ok(robot.tips(&q).iter().map(|t| Pose::from_isometry(t).to_array()).collect())
}

/// Joint vector placing a single arm's probe at `pose`; raises ConvergenceError on failure.
#[pyfunction]
#[pyo3(signature = (preset, pose, seed=None))]
pub fn ik(preset: &str, pose: Vec<f64>, seed: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let chain = single_arm(preset)?;
    let target = Pose::from_slice(&pose).ok_or_else(|| value_error("pose must be [x, y, z, qw, qx, qy, qz]"))?;
    let seed = seed.unwrap_or_else(|| chain.home().0);
    solve_ik(&chain, &target, &seed, &IkOptions::default())
        .map(|q| q.0)
        .map_err(kinematics_error)
}

/// 6 x n geometric Jacobian (linear rows first), as a list of rows.
#[pyfunction]
pub fn jacobian(preset: &str, q: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let chain = single_arm(preset)?;
    let j = chain_jacobian(&chain, &q).map_err(value_error)?;
    Ok(j.row_iter().map(|r| r.iter().copied().collect()).collect())
}

/// Run a bundled scenario (by name) or a scenario file; returns the session log as NDJSON.
#[pyfunction]
#[pyo3(signature = (scenario, seed=None))]
pub fn run_scenario(py: Python<'_>, scenario: &str, seed: Option<u64>) -> PyResult<String> {
    let run = || -> Result<SessionLog, SimError> {
        let path = Path::new(scenario);
        if path.is_file() {
            return run_scenario_file(path, seed);
        }
        let mut s = Scenario::bundled(scenario)?;
        if let Some(seed) = seed {
            s.setup.seed = seed;
        }
        s.run(None)
    };
    let log = py.detach(run).map_err(value_error)?;
    Ok(log.to_ndjson())
}

/// Session report for an NDJSON log, as a JSON string.
#[pyfunction]
pub fn report(log: &str) -> PyResult<String> {
    let log = SessionLog::from_ndjson(log).map_err(value_error)?;
    let report = SessionReport::from_log(&log).map_err(value_error)?;
    serde_json::to_string(&report).map_err(value_error)
}

/// Plain-text rendering of the same report.
#[pyfunction]
pub fn render_report(log: &str) -> PyResult<String> {
    let log = SessionLog::from_ndjson(log).map_err(value_error)?;
    Ok(SessionReport::from_log(&log).map_err(value_error)?.render())
}

/// Pearson chi-square (no continuity correction) on two proportions: `(chi_square, p_value)`.
#[pyfunction]
pub fn compare_proportions(successes_a: u64, total_a: u64, successes_b: u64, total_b: u64) -> PyResult<(f64, f64)> {
    let t = chi_square_test(successes_a, total_a, successes_b, total_b).map_err(value_error)?;
    Ok((t.chi_square, t.p_value))
}

#[pymodule]
pub fn ifind(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add_function(wrap_pyfunction!(home, m)?)?;
    m.add_function(wrap_pyfunction!(fk, m)?)?;
    m.add_function(wrap_pyfunction!(ik, m)?)?;
    m.add_function(wrap_pyfunction!(jacobian, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(render_report, m)?)?;
    m.add_function(wrap_pyfunction!(compare_proportions, m)?)?;
    Ok(())
}
