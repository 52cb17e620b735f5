//! Python bindings: the metric families and the main operations
//! (tensors, curvature, flag curvature, nullity diagnostics, geodesics).

use finsler_core::curvature::{curvature_bundle, flag_curvature_from_bundle, FlagPipeline};
use finsler_core::geodesic::{geodesic_confinement_check, integrate_geodesic};
use finsler_core::nullity::{nullity_report, p_symmetry_check, RANK_TOL_DEFAULT};
use finsler_core::{
    connection, make_metric, parse_metric_spec, FinslerError, FinslerMetric, SupportElement,
};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: FinslerError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn support(metric: &FinslerMetric, x: Vec<f64>, v: Vec<f64>) -> PyResult<SupportElement> {
    let z = SupportElement::new(x, v).map_err(err)?;
    metric.check_support(&z).map_err(err)?;
    Ok(z)
}

/// An evaluable Finsler metric.
#[pyclass(name = "Metric")]
struct PyMetric {
    inner: FinslerMetric,
}

#[pymethods]
impl PyMetric {
    /// Build from a metric specification document (JSON text).
    #[staticmethod]
    fn from_spec(text: &str) -> PyResult<Self> {
        let spec = parse_metric_spec(text).map_err(err)?;
        Ok(PyMetric {
            inner: make_metric(spec).map_err(err)?,
        })
    }

    /// Build from a metric specification file.
    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PyValueError::new_err(format!("{path}: {e}")))?;
        Self::from_spec(&text)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.spec().family_name()
    }

    #[getter]
    fn is_complete(&self) -> bool {
        self.inner.is_complete()
    }

    fn in_domain(&self, x: Vec<f64>) -> bool {
        self.inner.in_domain(&x)
    }

    /// F(x, v).
    fn f(&self, x: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
        let z = support(&self.inner, x, v)?;
        self.inner.f(&z).map_err(err)
    }

    /// Fundamental tensor g_ij as a nested list.
    fn metric_tensor(&self, x: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let z = support(&self.inner, x, v)?;
        let g = connection::metric_tensor(&self.inner, &z).map_err(err)?;
        let n = self.inner.dim();
        Ok((0..n)
            .map(|i| (0..n).map(|j| g.get(&[i, j])).collect())
            .collect())
    }

    /// Spray coefficients Gⁱ.
    fn spray(&self, x: Vec<f64>, v: Vec<f64>) -> PyResult<Vec<f64>> {
        let z = support(&self.inner, x, v)?;
        connection::geodesic_spray(&self.inner, &z).map_err(err)
    }

    /// Sup-norms of the curvature blocks and connection tensors.
    fn curvature_norms<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        v: Vec<f64>,
    ) -> PyResult<Bound<'py, PyDict>> {
        let z = support(&self.inner, x, v)?;
        let b = curvature_bundle(&self.inner, &z).map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("hh", b.r.inf_norm())?;
        d.set_item("hv", b.p.inf_norm())?;
        d.set_item("vv", b.q.inf_norm())?;
        d.set_item("berwald_hh", b.h.inf_norm())?;
        d.set_item("cartan_tensor", b.conn.t.inf_norm())?;
        d.set_item("nonlinear_curvature", b.nonlinear_curv.inf_norm())?;
        Ok(d)
    }

    /// Flag curvature of span(v, edge); pipeline "cartan" or "berwald".
    #[pyo3(signature = (x, v, edge, pipeline = "cartan"))]
    fn flag_curvature(
        &self,
        x: Vec<f64>,
        v: Vec<f64>,
        edge: Vec<f64>,
        pipeline: &str,
    ) -> PyResult<f64> {
        let z = support(&self.inner, x, v)?;
        let pipe = match pipeline {
            "cartan" => FlagPipeline::Cartan,
            "berwald" => FlagPipeline::Berwald,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown pipeline `{other}` (expected cartan|berwald)"
                )))
            }
        };
        let b = curvature_bundle(&self.inner, &z).map_err(err)?;
        flag_curvature_from_bundle(&b, &edge, pipe).map_err(err)
    }

    /// k-nullity diagnostics at (x, v): index, bases, spectrum, coincidence.
    #[pyo3(signature = (x, v, k, rank_tol = RANK_TOL_DEFAULT))]
    fn nullity<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        v: Vec<f64>,
        k: f64,
        rank_tol: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let z = support(&self.inner, x, v)?;
        let rep = nullity_report(&self.inner, &z, k, rank_tol).map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("k", rep.k)?;
        d.set_item("mu", rep.mu)?;
        d.set_item("basis_arg", rep.basis_arg)?;
        d.set_item("basis_ker", rep.basis_ker)?;
        d.set_item("singular_values", rep.singular_values)?;
        d.set_item("gap_ratio", rep.gap_ratio)?;
        d.set_item("ambiguous", rep.ambiguous)?;
        d.set_item("coincidence_angle", rep.coincidence_angle)?;
        Ok(d)
    }

    /// hv-symmetry criterion: (P symmetric?, nabla0 Q zero?, consistent?).
    #[pyo3(signature = (x, v, tol = 1e-7))]
    fn hv_symmetry(&self, x: Vec<f64>, v: Vec<f64>, tol: f64) -> PyResult<(bool, bool, bool)> {
        let z = support(&self.inner, x, v)?;
        let rep = p_symmetry_check(&self.inner, &z, tol).map_err(err)?;
        Ok((rep.p_symmetric, rep.nabla0_q_zero, rep.consistent))
    }

    /// Integrate the geodesic; returns (times, xs, vs, f_values, domain_exit).
    #[pyo3(signature = (x, v, t_end, rtol = 1e-9))]
    #[allow(clippy::type_complexity)]
    fn integrate(
        &self,
        x: Vec<f64>,
        v: Vec<f64>,
        t_end: f64,
        rtol: f64,
    ) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Option<f64>)> {
        let z = support(&self.inner, x, v)?;
        let traj = integrate_geodesic(&self.inner, &z, t_end, rtol).map_err(err)?;
        let xs = traj.states.iter().map(|(x, _)| x.clone()).collect();
        let vs = traj.states.iter().map(|(_, v)| v.clone()).collect();
        Ok((traj.times, xs, vs, traj.f_values, traj.domain_exit))
    }

    /// Leaf-confinement run: max deviation of the velocity from the
    /// k-nullity distribution along the geodesic.
    #[pyo3(signature = (x, v, k, t_end, diagnostic = false))]
    fn confinement<'py>(
        &self,
        py: Python<'py>,
        x: Vec<f64>,
        v: Vec<f64>,
        k: f64,
        t_end: f64,
        diagnostic: bool,
    ) -> PyResult<Bound<'py, PyDict>> {
        let z = support(&self.inner, x, v)?;
        let rep =
            geodesic_confinement_check(&self.inner, &z, k, t_end, diagnostic).map_err(err)?;
        let d = PyDict::new_bound(py);
        d.set_item("max_deviation", rep.max_deviation)?;
        d.set_item("mu", rep.mu)?;
        d.set_item("mu_change", rep.mu_change)?;
        d.set_item("samples", rep.samples)?;
        d.set_item("domain_exit", rep.domain_exit)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Metric(family={}, dimension={})",
            self.inner.spec().family_name(),
            self.inner.dim()
        )
    }
}

#[pymodule]
fn pyfinsler(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyMetric>()?;
    Ok(())
}
