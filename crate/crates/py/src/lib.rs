//! Python bindings: a `Case` class wrapping a loaded market description and
//! module functions for clearing, best responses and equilibrium search.
//! Structured results cross the boundary as plain dicts/lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyAny, PyDict, PyList};

type PyObj = Py<PyAny>;

use tsodso::clearing::{clear_all, clear_dam, system_cost};
use tsodso::equilibrium::{find_equilibrium, is_nash, EngineConfig, Responder};
use tsodso::model::{MarketCase, Scheme, StrategyProfile};
use tsodso::mpec::build_mpec;

fn scheme_from(s: &str) -> PyResult<Scheme> {
    s.parse().map_err(PyValueError::new_err)
}

fn to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<PyObj> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().unbind().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.unbind().into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.unbind().into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.unbind().into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.unbind().into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, to_py(py, v)?)?;
            }
            dict.unbind().into_any()
        }
    })
}

fn serialize_py<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObj> {
    let json = serde_json::to_value(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    to_py(py, &json)
}

/// A loaded, validated market case.
#[pyclass]
struct Case {
    inner: MarketCase,
}

#[pymethods]
impl Case {
    /// Load a JSON case document from disk.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let case = tsodso::io::load_case(path).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Case { inner: case })
    }

    /// Parse a JSON case document from a string.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let case =
            tsodso::io::parse_case(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Case { inner: case })
    }

    /// The bundled benchmark dataset.
    #[staticmethod]
    fn bundled() -> Self {
        Case {
            inner: tsodso::data::cigre_case(),
        }
    }

    fn net_load(&self) -> f64 {
        self.inner.net_load()
    }

    /// Imbalance of one scenario: (total, transmission, [per distribution]).
    fn imbalances(&self, scenario: &str) -> PyResult<(f64, f64, Vec<f64>)> {
        let imb = self
            .inner
            .compute_imbalances(scenario)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok((imb.total, imb.transmission, imb.distribution))
    }

    fn validate(&self, py: Python<'_>) -> PyResult<PyObj> {
        let report = tsodso::model::validate_case(&self.inner);
        let dict = PyDict::new(py);
        dict.set_item("fatals", report.fatals.clone())?;
        dict.set_item("warnings", report.warnings.clone())?;
        dict.set_item("valid", report.is_valid())?;
        Ok(dict.unbind().into_any())
    }

    fn unit_ids(&self) -> Vec<String> {
        self.inner.units.iter().map(|u| u.id.clone()).collect()
    }

    fn scenario_ids(&self) -> Vec<String> {
        self.inner.scenarios.ids.clone()
    }

    fn aggregator_ids(&self) -> Vec<String> {
        self.inner.aggregators.iter().map(|a| a.id.clone()).collect()
    }
}

/// Clear the day-ahead market at the given `{unit id: price}` bids; returns
/// a dict with quantities, the clearing price and capacity duals.
#[pyfunction]
fn py_clear_dam(py: Python<'_>, case: &Case, bids: Bound<'_, PyDict>) -> PyResult<PyObj> {
    let mut bid_vec = Vec::with_capacity(case.inner.units.len());
    for unit in &case.inner.units {
        let b: f64 = bids
            .get_item(&unit.id)?
            .ok_or_else(|| PyValueError::new_err(format!("missing bid for {}", unit.id)))?
            .extract()?;
        bid_vec.push(b);
    }
    let dam = clear_dam(&case.inner, &bid_vec).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let out = PyDict::new(py);
    let q = PyDict::new(py);
    for (u, unit) in case.inner.units.iter().enumerate() {
        q.set_item(&unit.id, dam.quantities[u])?;
    }
    out.set_item("quantities", q)?;
    out.set_item("price", dam.price)?;
    out.set_item("objective", dam.objective)?;
    Ok(out.unbind().into_any())
}

/// The initialization bid profile of a scheme (maximum candidates, minimum
/// for down-regulation), as `{resource: {slot: price}}`.
#[pyfunction]
fn init_profile(py: Python<'_>, case: &Case, scheme: &str) -> PyResult<PyObj> {
    let scheme = scheme_from(scheme)?;
    let profile = StrategyProfile::init(&case.inner, scheme);
    serialize_py(py, &profile)
}

/// Expected system costs of a scheme at a given profile (JSON-shaped, as
/// produced by `init_profile` / the equilibrium report).
#[pyfunction]
fn evaluate_costs(
    py: Python<'_>,
    case: &Case,
    scheme: &str,
    profile: Bound<'_, PyAny>,
) -> PyResult<PyObj> {
    let scheme = scheme_from(scheme)?;
    let profile = profile_from_py(&profile)?;
    let (_, per_scenario) =
        clear_all(&case.inner, scheme, &profile).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let costs = system_cost(&per_scenario, &case.inner.scenarios.probabilities);
    serialize_py(py, &costs)
}

fn profile_from_py(obj: &Bound<'_, PyAny>) -> PyResult<StrategyProfile> {
    let json: String = if let Ok(s) = obj.extract::<String>() {
        s
    } else {
        // Round-trip through Python's json module for dict inputs.
        let pyjson = obj.py().import("json")?;
        pyjson.call_method1("dumps", (obj,))?.extract()?
    };
    serde_json::from_str(&json).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Run the best-response iteration; returns the equilibrium report as a
/// dict (profile, trace, costs, termination).
#[pyfunction]
#[pyo3(signature = (case, scheme, max_iterations=50, oracle=false))]
fn py_find_equilibrium(
    py: Python<'_>,
    case: &Case,
    scheme: &str,
    max_iterations: usize,
    oracle: bool,
) -> PyResult<PyObj> {
    let scheme = scheme_from(scheme)?;
    let cfg = EngineConfig {
        max_iterations,
        responder: if oracle { Responder::Oracle } else { Responder::Mpec },
        ..Default::default()
    };
    let report = find_equilibrium(&case.inner, scheme, &cfg)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serialize_py(py, &report)
}

/// Check a profile for unilateral-deviation immunity; returns
/// (is_nash, {aggregator: improvement}).
#[pyfunction]
#[pyo3(signature = (case, scheme, profile, oracle=true))]
fn py_is_nash(
    py: Python<'_>,
    case: &Case,
    scheme: &str,
    profile: Bound<'_, PyAny>,
    oracle: bool,
) -> PyResult<(bool, PyObj)> {
    let scheme = scheme_from(scheme)?;
    let profile = profile_from_py(&profile)?;
    let cfg = EngineConfig {
        responder: if oracle { Responder::Oracle } else { Responder::Mpec },
        ..Default::default()
    };
    let (ok, improvements) = is_nash(&case.inner, scheme, &profile, &cfg)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let dict = PyDict::new(py);
    for (id, imp) in improvements {
        dict.set_item(id, imp)?;
    }
    Ok((ok, dict.unbind().into_any()))
}

/// Serialize one aggregator's single-level MILP in MPS format.
#[pyfunction]
fn export_mpec_mps(
    case: &Case,
    scheme: &str,
    aggregator: &str,
    profile: Bound<'_, PyAny>,
) -> PyResult<String> {
    let scheme = scheme_from(scheme)?;
    let profile = profile_from_py(&profile)?;
    let agg = case
        .inner
        .aggregator_index(aggregator)
        .ok_or_else(|| PyValueError::new_err(format!("unknown aggregator '{aggregator}'")))?;
    let instance = build_mpec(&case.inner, scheme, agg, &profile)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(tsodso::milp::export_mps(&instance.model))
}

#[pymodule]
fn tsodso_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Case>()?;
    m.add_function(wrap_pyfunction!(py_clear_dam, m)?)?;
    m.add_function(wrap_pyfunction!(init_profile, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_costs, m)?)?;
    m.add_function(wrap_pyfunction!(py_find_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(py_is_nash, m)?)?;
    m.add_function(wrap_pyfunction!(export_mpec_mps, m)?)?;
    Ok(())
}
