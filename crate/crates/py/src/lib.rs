//! Python bindings for the core library.

use ellstat_core::curves;
use ellstat_core::densities::{self, FInftyNorm};
use ellstat_core::divisor_ap;
use ellstat_core::groups::{self, CountVariant, Formula, Stat};
use ellstat_core::sweep;
use ellstat_core::theorem::{self, KFactor, MainTermOptions};
use ellstat_core::Error;
use num_rational::BigRational;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Invariant(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

fn fraction<'py>(py: Python<'py>, x: &BigRational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?
        .getattr("Fraction")?
        .call1((x.to_string(),))
}

/// Z/d1 x Z/(d1 d2).
#[pyclass(name = "GroupShape", frozen, eq, hash)]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct PyGroupShape(groups::GroupShape);

#[pymethods]
impl PyGroupShape {
    #[new]
    fn new(d1: u64, d2: u64) -> PyResult<Self> {
        groups::GroupShape::new(d1, d2).map(Self).map_err(py_err)
    }

    #[getter]
    fn d1(&self) -> u64 {
        self.0.d1
    }

    #[getter]
    fn d2(&self) -> u64 {
        self.0.d2
    }

    fn order(&self) -> u64 {
        self.0.order()
    }

    fn exponent(&self) -> u64 {
        self.0.exponent()
    }

    fn is_cyclic(&self) -> bool {
        self.0.is_cyclic()
    }

    #[pyo3(signature = (stat, formula = "corrected"))]
    fn stat(&self, stat: &str, formula: &str) -> PyResult<u64> {
        Ok(groups::stat_on_shape(self.0, parse(stat)?, parse(formula)?))
    }

    fn __repr__(&self) -> String {
        format!("GroupShape({}, {})", self.0.d1, self.0.d2)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

#[pyfunction]
fn subgroup_count(m: u64, n: u64) -> u64 {
    groups::subgroup_count(m, n, CountVariant::GcdSum)
}

#[pyfunction]
fn cyclic_subgroup_count(m: u64, n: u64) -> u64 {
    groups::cyclic_subgroup_count(m, n, CountVariant::GcdSum)
}

/// Shape counts over all nonsingular models mod p, keyed by (d1, d2).
#[pyfunction]
#[pyo3(signature = (p, seed = 0))]
fn tally_structures<'py>(py: Python<'py>, p: u64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let tally = py
        .allow_threads(|| {
            curves::tally_structures_with(
                p,
                curves::TallyOptions {
                    seed,
                    ..Default::default()
                },
            )
        })
        .map_err(py_err)?;
    let out = PyDict::new(py);
    for (shape, count) in tally.counts {
        out.set_item((shape.d1, shape.d2), count)?;
    }
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (p, stat = "s", formula = "corrected"))]
fn weighted_average(py: Python<'_>, p: u64, stat: &str, formula: &str) -> PyResult<f64> {
    let (stat, formula): (Stat, Formula) = (parse(stat)?, parse(formula)?);
    py.allow_threads(|| curves::weighted_average(p, stat, formula))
        .map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (t, p, norm = "half"))]
fn f_infty(t: i64, p: u64, norm: &str) -> PyResult<f64> {
    Ok(densities::f_infty(t, p, parse(norm)?))
}

/// Returns (value as Fraction, level R at which it stabilized).
#[pyfunction]
fn f_ell<'py>(
    py: Python<'py>,
    ell: u64,
    d1: u64,
    d2: u64,
    p: u64,
) -> PyResult<(Bound<'py, PyAny>, u32)> {
    let f = densities::f_ell(ell, d1, d2, p).map_err(py_err)?;
    Ok((fraction(py, &f.value)?, f.stabilized_at_r))
}

#[pyfunction]
fn g_density<'py>(
    py: Python<'py>,
    p: u64,
    w: u32,
    v: u32,
    ell: u64,
    r: u32,
) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &densities::g_density(p, w, v, ell, r).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (p, d1, d2, ell_max = 1000, norm = "half"))]
fn probability_product(
    py: Python<'_>,
    p: u64,
    d1: u64,
    d2: u64,
    ell_max: u64,
    norm: &str,
) -> PyResult<f64> {
    let shape = groups::GroupShape::new(d1, d2).map_err(py_err)?;
    let norm: FInftyNorm = parse(norm)?;
    py.allow_threads(|| densities::probability_product(p, shape, ell_max, norm))
        .map(|e| e.value)
        .map_err(py_err)
}

#[pyfunction]
fn local_factor<'py>(py: Python<'py>, p: u64, d1: u64, ell: u64) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &theorem::local_factor(p, d1, ell).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (p, stat = "s", k_factor = "A", norm = "half"))]
fn main_term(py: Python<'_>, p: u64, stat: &str, k_factor: &str, norm: &str) -> PyResult<f64> {
    let stat: Stat = parse(stat)?;
    let opts = MainTermOptions {
        k_factor: parse::<KFactor>(k_factor)?,
        norm: parse(norm)?,
        include_p_factor: false,
    };
    py.allow_threads(|| theorem::main_term(p, stat, opts))
        .map_err(py_err)
}

#[pyfunction]
fn cyclicity_probability<'py>(py: Python<'py>, p: u64) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, &theorem::cyclicity_probability(p).map_err(py_err)?)
}

#[pyfunction]
#[pyo3(signature = (x, a = 0, q = 1))]
fn delta(x: f64, a: i64, q: u64) -> PyResult<f64> {
    divisor_ap::delta(x, a, q).map_err(py_err)
}

/// Returns (lhs, envelope, ratio).
#[pyfunction]
fn mean_square_experiment(
    py: Python<'_>,
    a_lo: f64,
    b_hi: f64,
    q: u64,
) -> PyResult<(f64, f64, f64)> {
    py.allow_threads(|| divisor_ap::mean_square_experiment(a_lo, b_hi, q))
        .map(|m| (m.lhs, m.envelope, m.ratio))
        .map_err(py_err)
}

/// One dict per prime with the sweep CSV columns as keys.
#[pyfunction]
#[pyo3(signature = (x_max, threads = 0, seed = 0))]
fn run_sweep<'py>(
    py: Python<'py>,
    x_max: u64,
    threads: usize,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let rows = py
        .allow_threads(|| {
            sweep::run_sweep(sweep::SweepOptions {
                x_max,
                threads,
                seed,
            })
        })
        .map_err(py_err)?;
    rows.into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("x", r.x)?;
            d.set_item("p", r.p)?;
            d.set_item("avg_s_corrected", r.avg_s_corrected)?;
            d.set_item("avg_s_printed", r.avg_s_printed)?;
            d.set_item("avg_c_corrected", r.avg_c_corrected)?;
            d.set_item("avg_tauN", r.avg_tau_n)?;
            d.set_item("running_mean_s", r.running_mean_s)?;
            Ok(d)
        })
        .collect()
}

/// Returns (slope, residual RMS) of y = C log x.
#[pyfunction]
fn fit_through_origin(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(PyValueError::new_err("xs and ys differ in length"));
    }
    let points: Vec<(f64, f64)> = xs.into_iter().zip(ys).collect();
    sweep::fit_through_origin(&points)
        .map(|f| (f.slope, f.residual_rms))
        .map_err(py_err)
}

#[pymodule]
fn ellstat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGroupShape>()?;
    m.add_function(wrap_pyfunction!(subgroup_count, m)?)?;
    m.add_function(wrap_pyfunction!(cyclic_subgroup_count, m)?)?;
    m.add_function(wrap_pyfunction!(tally_structures, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_average, m)?)?;
    m.add_function(wrap_pyfunction!(f_infty, m)?)?;
    m.add_function(wrap_pyfunction!(f_ell, m)?)?;
    m.add_function(wrap_pyfunction!(g_density, m)?)?;
    m.add_function(wrap_pyfunction!(probability_product, m)?)?;
    m.add_function(wrap_pyfunction!(local_factor, m)?)?;
    m.add_function(wrap_pyfunction!(main_term, m)?)?;
    m.add_function(wrap_pyfunction!(cyclicity_probability, m)?)?;
    m.add_function(wrap_pyfunction!(delta, m)?)?;
    m.add_function(wrap_pyfunction!(mean_square_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(fit_through_origin, m)?)?;
    Ok(())
}
