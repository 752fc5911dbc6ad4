//! Python bindings: build or load problems, synthesize, validate and
//! simulate policies. Probabilities cross the boundary as exact `"n/d"`
//! strings.

use bps_core::belief::{belief_update, observation_probability};
use bps_core::domains::Cell;
use bps_core::io::{
    model_to_json, objective_to_json, parse_model, parse_objective, parse_policy, policy_to_dot, policy_to_json,
};
use bps_core::rational::{format_prob, parse_prob};
use bps_core::{
    build_kitchen, build_pickup_example, simulate, synthesis_run, validate_policy, Backend, Belief, KitchenConfig,
    PolicyTree, Prob, SmtConfig, SynthesisConfig,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use std::time::Duration;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn prob_arg(text: &str) -> PyResult<Prob> {
    parse_prob(text).map_err(value_err)
}

fn json_loads(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "Problem", module = "bps", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyProblem {
    inner: bps_core::Problem,
}

impl PyProblem {
    fn state(&self, name: &str) -> PyResult<usize> {
        self.inner
            .model
            .state_index(name)
            .ok_or_else(|| value_err(format!("unknown state `{name}`")))
    }

    fn belief(&self, probs: Vec<String>) -> PyResult<Belief> {
        let probs = probs.iter().map(|p| prob_arg(p)).collect::<PyResult<Vec<_>>>()?;
        if probs.len() != self.inner.model.num_states() {
            return Err(value_err(format!(
                "belief needs {} entries",
                self.inner.model.num_states()
            )));
        }
        Belief::new(probs).map_err(value_err)
    }

    fn indices(&self, action: &str, observation: &str) -> PyResult<(usize, usize)> {
        let m = &self.inner.model;
        let a = m
            .action_index(action)
            .ok_or_else(|| value_err(format!("unknown action `{action}`")))?;
        let o = m
            .observation_index(observation)
            .ok_or_else(|| value_err(format!("unknown observation `{observation}`")))?;
        Ok((a, o))
    }
}

#[pymethods]
impl PyProblem {
    /// The three-state pick-up example.
    #[staticmethod]
    fn pickup() -> Self {
        Self {
            inner: build_pickup_example(),
        }
    }

    /// Grid kitchen; cells are `(x, y)` tuples, probabilities are strings.
    #[staticmethod]
    #[pyo3(signature = (
        width = 3, height = 2, shadow = vec![(1, 0), (1, 1)], storage = (2, 0), start = (0, 0), obstacles = 1,
        walls = Vec::new(), p_fail = "1/20", p_fp = "1/50", p_fn = "1/20", delta_goal = "1/5", delta_safe = "1/5",
        restrict_pickup = false
    ))]
    #[allow(clippy::too_many_arguments)]
    fn kitchen(
        width: usize,
        height: usize,
        shadow: Vec<(usize, usize)>,
        storage: (usize, usize),
        start: (usize, usize),
        obstacles: usize,
        walls: Vec<(usize, usize)>,
        p_fail: &str,
        p_fp: &str,
        p_fn: &str,
        delta_goal: &str,
        delta_safe: &str,
        restrict_pickup: bool,
    ) -> PyResult<Self> {
        let cell = |(x, y): (usize, usize)| Cell::new(x, y);
        let config = KitchenConfig {
            width,
            height,
            walls: walls.into_iter().map(cell).collect(),
            shadow_cells: shadow.into_iter().map(cell).collect(),
            storage_cell: cell(storage),
            start_cell: cell(start),
            obstacles,
            p_fail: prob_arg(p_fail)?,
            p_fp: prob_arg(p_fp)?,
            p_fn: prob_arg(p_fn)?,
            delta_goal: prob_arg(delta_goal)?,
            delta_safe: prob_arg(delta_safe)?,
            restrict_pickup,
        };
        Ok(Self {
            inner: build_kitchen(&config).map_err(value_err)?,
        })
    }

    /// Loads a problem from model and objective JSON text.
    #[staticmethod]
    fn from_json(model: &str, objective: &str) -> PyResult<Self> {
        let (m, initial) = parse_model(model, "<model>").map_err(value_err)?;
        let objective = parse_objective(objective, "<objective>", &m).map_err(value_err)?;
        let initial = initial.unwrap_or_else(|| Belief::point(m.num_states(), 0));
        Ok(Self {
            inner: bps_core::Problem {
                name: "model".into(),
                model: m,
                initial,
                objective,
            },
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.model.states().to_vec()
    }

    #[getter]
    fn actions(&self) -> Vec<String> {
        self.inner.model.actions().to_vec()
    }

    #[getter]
    fn observations(&self) -> Vec<String> {
        self.inner.model.observations().to_vec()
    }

    #[getter]
    fn initial_belief(&self) -> Vec<String> {
        self.inner.initial.probs().iter().map(format_prob).collect()
    }

    fn model_json(&self) -> String {
        model_to_json(&self.inner.model, Some(&self.inner.initial)).to_string()
    }

    fn objective_json(&self) -> String {
        objective_to_json(&self.inner.objective, &self.inner.model).to_string()
    }

    /// Posterior after `action`/`observation`, or `None` if the observation
    /// is impossible.
    fn belief_update(&self, belief: Vec<String>, action: &str, observation: &str) -> PyResult<Option<Vec<String>>> {
        let b = self.belief(belief)?;
        let (a, o) = self.indices(action, observation)?;
        Ok(belief_update(&b, a, o, &self.inner.model).map(|n| n.probs().iter().map(format_prob).collect()))
    }

    fn observation_probability(&self, belief: Vec<String>, action: &str, observation: &str) -> PyResult<String> {
        let b = self.belief(belief)?;
        let (a, o) = self.indices(action, observation)?;
        Ok(format_prob(&observation_probability(&b, a, o, &self.inner.model)))
    }

    fn is_goal(&self, belief: Vec<String>) -> PyResult<bool> {
        Ok(self.inner.objective.is_goal(&self.belief(belief)?))
    }

    fn is_safe(&self, belief: Vec<String>) -> PyResult<bool> {
        Ok(self.inner.objective.is_safe(&self.belief(belief)?))
    }

    /// Point belief on `state`.
    fn point_belief(&self, state: &str) -> PyResult<Vec<String>> {
        let s = self.state(state)?;
        Ok(Belief::point(self.inner.model.num_states(), s)
            .probs()
            .iter()
            .map(format_prob)
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem({:?}, {} states, {} actions, {} observations)",
            self.inner.name,
            self.inner.model.num_states(),
            self.inner.model.num_actions(),
            self.inner.model.num_observations()
        )
    }
}

#[pyclass(name = "Policy", module = "bps", frozen)]
struct PyPolicy {
    tree: PolicyTree,
    problem: PyProblem,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    fn from_json(problem: &PyProblem, text: &str) -> PyResult<Self> {
        let tree = parse_policy(text, "<policy>", &problem.inner.model).map_err(value_err)?;
        Ok(Self {
            tree,
            problem: problem.clone(),
        })
    }

    #[getter]
    fn root_action(&self) -> Option<String> {
        self.tree
            .action
            .map(|a| self.problem.inner.model.action_name(a).to_string())
    }

    #[getter]
    fn depth(&self) -> usize {
        self.tree.depth()
    }

    #[getter]
    fn path_count(&self) -> usize {
        self.tree.path_count()
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.tree.node_count()
    }

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&policy_to_json(&self.tree, &self.problem.inner.model)).expect("json")
    }

    fn to_dot(&self) -> String {
        policy_to_dot(&self.tree, &self.problem.inner.model)
    }

    /// Exhaustive check; returns `(valid, counterexample description)`.
    fn validate(&self, horizon: usize) -> (bool, Option<String>) {
        let p = &self.problem.inner;
        let report = validate_policy(&self.tree, &p.model, &p.objective, horizon);
        (report.valid, report.counterexample.map(|c| c.to_string()))
    }

    /// Monte Carlo run; returns the report as a dict.
    #[pyo3(signature = (episodes = 100_000, seed = 0, traces = 0))]
    fn simulate(&self, py: Python<'_>, episodes: usize, seed: u64, traces: usize) -> PyResult<Py<PyAny>> {
        if episodes == 0 {
            return Err(value_err("episodes must be at least 1"));
        }
        let p = &self.problem.inner;
        let report = py.detach(|| simulate(&self.tree, &p.model, &p.objective, episodes, seed, traces));
        json_loads(py, &serde_json::to_string(&report).expect("json"))
    }
}

#[pyclass(name = "SynthesisResult", module = "bps", frozen)]
struct PySynthesisResult {
    #[pyo3(get)]
    verdict: String,
    #[pyo3(get)]
    error: Option<String>,
    #[pyo3(get)]
    policy: Option<Py<PyPolicy>>,
    stats_json: String,
}

#[pymethods]
impl PySynthesisResult {
    #[getter]
    fn stats(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_loads(py, &self.stats_json)
    }

    fn __repr__(&self) -> String {
        format!("SynthesisResult(verdict={:?})", self.verdict)
    }
}

/// Runs bounded policy synthesis on `problem`.
#[pyfunction]
#[pyo3(signature = (
    problem, horizon = 10, backend = "smtlib", solver_cmd = "z3 -in", incremental = true, canonical = true,
    check_timeout = 60.0, memoize = false, validate = true
))]
#[allow(clippy::too_many_arguments)]
fn synthesize(
    py: Python<'_>,
    problem: &PyProblem,
    horizon: usize,
    backend: &str,
    solver_cmd: &str,
    incremental: bool,
    canonical: bool,
    check_timeout: f64,
    memoize: bool,
    validate: bool,
) -> PyResult<PySynthesisResult> {
    let smt = || -> PyResult<SmtConfig> {
        let timeout = Duration::try_from_secs_f64(check_timeout).map_err(value_err)?;
        SmtConfig {
            timeout,
            incremental,
            canonical,
            ..SmtConfig::default()
        }
        .with_command_line(solver_cmd)
        .map_err(value_err)
    };
    let factory = match backend {
        "enum" => Backend::Enumerative,
        "smtlib" => Backend::SmtLib(smt()?),
        "diff" => Backend::Differential(smt()?),
        other => return Err(value_err(format!("unknown backend `{other}`"))),
    };
    let config = SynthesisConfig {
        horizon,
        memoize,
        validate,
        record_trace: false,
    };
    let p = &problem.inner;
    let out = py.detach(|| synthesis_run(&p.model, &p.initial, &p.objective, &factory, &config));
    let policy = match out.policy {
        Some(tree) => Some(Py::new(
            py,
            PyPolicy {
                tree,
                problem: problem.clone(),
            },
        )?),
        None => None,
    };
    let mut stats = serde_json::to_value(&out.stats).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    stats["wall_time_s"] = out.stats.wall_time_s().into();
    Ok(PySynthesisResult {
        verdict: out.verdict.as_str().to_string(),
        error: out.error,
        policy,
        stats_json: stats.to_string(),
    })
}

#[pymodule]
fn bps(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyPolicy>()?;
    m.add_class::<PySynthesisResult>()?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    Ok(())
}
