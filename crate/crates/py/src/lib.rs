//! Python bindings for fbl-core. Results come back as plain dicts.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fbl_core::error::Error;
use fbl_core::experiments;
use fbl_core::extension::SubspaceSpec;
use fbl_core::lattice::GeneratorBinding;
use fbl_core::linear_map::LinearMap;
use fbl_core::optimize::OptimizerConfig;
use fbl_core::space::{Exponent, SpaceSpec};
use fbl_core::summing;

fn py_err(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// Accepts a float, an int, or the string "inf".
fn exponent(obj: &Bound<'_, PyAny>) -> PyResult<Exponent> {
    if let Ok(v) = obj.extract::<f64>() {
        return Exponent::new(v).map_err(py_err);
    }
    let s: String = obj.extract()?;
    s.parse().map_err(py_err)
}

fn space(r: &Bound<'_, PyAny>, dim: usize, weights: Option<Vec<f64>>) -> PyResult<SpaceSpec> {
    let r = exponent(r)?;
    match weights {
        Some(w) => SpaceSpec::weighted(r, dim, w),
        None => SpaceSpec::new(r, dim),
    }
    .map_err(py_err)
}

fn dim_of(rows: &[Vec<f64>], what: &str) -> PyResult<usize> {
    rows.first().map(Vec::len).ok_or_else(|| PyValueError::new_err(format!("{what}: must be nonempty")))
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Norm of a lattice expression in generators d0, d1, … bound to `vectors`
/// in ℓ_r (optionally weighted).
#[pyfunction]
#[pyo3(signature = (expr, vectors, r, p = None, weights = None, seed = 0))]
fn norm<'py>(
    py: Python<'py>,
    expr: &str,
    vectors: Vec<Vec<f64>>,
    r: &Bound<'py, PyAny>,
    p: Option<&Bound<'py, PyAny>>,
    weights: Option<Vec<f64>>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let sp = space(r, dim_of(&vectors, "vectors")?, weights)?;
    let p = p.map(exponent).transpose()?.unwrap_or(Exponent::ONE);
    let e = fbl_core::dsl::parse(expr).map_err(py_err)?;
    let b = GeneratorBinding::new(sp, vectors).map_err(py_err)?;
    let cfg = OptimizerConfig::default().with_seed(seed);
    let est = py.detach(|| fbl_core::engine::fbl_norm(&e, &b, p, &cfg)).map_err(py_err)?;
    to_py(py, &est)
}

/// ∥(Σ_k |a_k δ_{x_k}|^p)^{1/p}∥ for nonnegative coefficients.
#[pyfunction]
#[pyo3(signature = (vectors, coeffs, r, p = None, weights = None, seed = 0))]
fn moduli_norm<'py>(
    py: Python<'py>,
    vectors: Vec<Vec<f64>>,
    coeffs: Vec<f64>,
    r: &Bound<'py, PyAny>,
    p: Option<&Bound<'py, PyAny>>,
    weights: Option<Vec<f64>>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let sp = space(r, dim_of(&vectors, "vectors")?, weights)?;
    let p = p.map(exponent).transpose()?.unwrap_or(Exponent::ONE);
    let cfg = OptimizerConfig::default().with_seed(seed);
    let est = py
        .detach(|| fbl_core::engine::moduli_norm(&sp, &vectors, &coeffs, p, &cfg))
        .map_err(py_err)?;
    to_py(py, &est)
}

/// π_p of the matrix from ℓ_{domain_r} to ℓ_{codomain_r}; with `q1`, π_{p,1}.
#[pyfunction]
#[pyo3(signature = (matrix, domain_r, codomain_r, p, q1 = false, seed = 0))]
fn summing_norm<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<f64>>,
    domain_r: &Bound<'py, PyAny>,
    codomain_r: &Bound<'py, PyAny>,
    p: &Bound<'py, PyAny>,
    q1: bool,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let rows = matrix.len();
    let t = LinearMap::new(
        matrix.clone(),
        space(domain_r, dim_of(&matrix, "matrix")?, None)?,
        space(codomain_r, rows, None)?,
    )
    .map_err(py_err)?;
    let p = exponent(p)?;
    let cfg = OptimizerConfig::default().with_seed(seed);
    let est = py.detach(|| {
        if q1 {
            Ok(summing::pi_q1_lower(&t, p, &cfg))
        } else if p.is_one() && t.domain.r.is_inf() && t.codomain.r.is_one() {
            summing::pi_1_exact_linfty_domain(&t)
        } else {
            Ok(summing::pi_p_lower(&t, p, &cfg))
        }
    });
    to_py(py, &est.map_err(py_err)?)
}

/// Extension constant of T: F → ℓ_p^n where F = span(basis) ⊂ ℓ_r^d and
/// column l of `images` is T(basis[l]).
#[pyfunction]
#[pyo3(signature = (ambient_r, basis, images, p, seed = 0))]
fn extension_constant<'py>(
    py: Python<'py>,
    ambient_r: &Bound<'py, PyAny>,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    p: &Bound<'py, PyAny>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let ambient = space(ambient_r, dim_of(&basis, "basis")?, None)?;
    let k = basis.len();
    let p = exponent(p)?;
    let sub = SubspaceSpec::completed(ambient, basis).map_err(py_err)?;
    let n = images.len();
    let t = LinearMap::new(images, SpaceSpec::new(Exponent::TWO, k).map_err(py_err)?, SpaceSpec::new(p, n).map_err(py_err)?)
        .map_err(py_err)?;
    let cfg = OptimizerConfig::default().with_seed(seed);
    let est = py
        .detach(|| fbl_core::extension::extension_constant(&sub, &t, p, &cfg))
        .map_err(py_err)?;
    to_py(py, &est)
}

/// Runs a catalog experiment; parameter values are strings as on the command line.
#[pyfunction]
#[pyo3(signature = (name, params = None, seed = 0))]
fn run_experiment<'py>(
    py: Python<'py>,
    name: &str,
    params: Option<BTreeMap<String, String>>,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let params = params.unwrap_or_default();
    let rep = py.detach(|| experiments::run_experiment(name, &params, seed)).map_err(py_err)?;
    let out = to_py(py, &rep)?;
    out.set_item("passed", rep.passed())?;
    Ok(out)
}

/// Names of the catalog experiments.
#[pyfunction]
fn catalog() -> Vec<&'static str> {
    experiments::catalog().iter().map(|e| e.name).collect()
}

#[pymodule]
fn fbl_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(norm, m)?)?;
    m.add_function(wrap_pyfunction!(moduli_norm, m)?)?;
    m.add_function(wrap_pyfunction!(summing_norm, m)?)?;
    m.add_function(wrap_pyfunction!(extension_constant, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(catalog, m)?)?;
    Ok(())
}
