//! Python bindings. Matrices cross the boundary as lists of row lists,
//! blocks as `N × N` lists, and curves as lists of `(rate, psnr)` pairs.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use gglt::analysis;
use gglt::coding::{self, Candidate, QuantSpec, RdCurve};
use gglt::dataset::{read_dataset, write_dataset};
use gglt::eagbt::{self, EagbtParams};
use gglt::gmrf;
use gglt::graph::{self, Connectivity};
use gglt::learn::{self, GglProblem, SolverOptions};
use gglt::matrix::{Mat, SymMatrix};
use gglt::transforms::{self, TransformKind};

fn err(e: gglt::Error) -> PyErr {
    match e {
        gglt::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn to_mat(rows: Vec<Vec<f64>>) -> PyResult<Mat> {
    Mat::from_rows(&rows).map_err(err)
}

fn to_sym(rows: Vec<Vec<f64>>) -> PyResult<SymMatrix> {
    SymMatrix::new(to_mat(rows)?).map_err(err)
}

fn connectivity(n: usize, structure: &str) -> PyResult<Connectivity> {
    match structure {
        "line" => Ok(Connectivity::line(n)),
        "full" => Ok(Connectivity::full(n)),
        "grid" => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n {
                return Err(PyValueError::new_err(format!("{n} vertices do not form a square grid")));
            }
            Ok(Connectivity::grid(side))
        }
        other => Err(PyValueError::new_err(format!("unknown connectivity `{other}`; use line, grid or full"))),
    }
}

/// Generalized graph Laplacian.
#[pyclass(name = "Ggl", module = "gglt", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGgl(graph::Ggl);

#[pymethods]
impl PyGgl {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyGgl(graph::Ggl::new(to_sym(rows)?).map_err(err)?))
    }

    /// Line graph with end self-loops `first`, `last` in {"0", "c", "2c"}.
    #[staticmethod]
    fn line_with_end_loops(first: &str, last: &str, n: usize, c: f64) -> PyResult<Self> {
        let parse = |s: &str| {
            graph::EndLoop::ALL
                .into_iter()
                .find(|e| e.label() == s)
                .ok_or_else(|| PyValueError::new_err(format!("end loop `{s}` is not 0, c or 2c")))
        };
        Ok(PyGgl(graph::dctdst_line_graph(parse(first)?, parse(last)?, n, c).map_err(err)?))
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        self.0.matrix().as_mat().to_rows()
    }

    fn self_loops(&self) -> Vec<f64> {
        self.0.self_loops()
    }

    fn edge_weight(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.0.n() || j >= self.0.n() {
            return Err(PyValueError::new_err("vertex index out of range"));
        }
        Ok(self.0.edge_weight(i, j))
    }

    fn quadratic_form(&self, r: Vec<f64>) -> PyResult<f64> {
        graph::laplacian_quadratic(&self.0, &r).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Ggl(n={})", self.0.n())
    }
}

/// Orthonormal transform with basis vectors as columns.
#[pyclass(name = "Transform", module = "gglt", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTransform(transforms::Transform);

#[pymethods]
impl PyTransform {
    #[getter]
    fn kind(&self) -> String {
        self.0.kind().to_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    fn basis(&self) -> Vec<Vec<f64>> {
        self.0.basis().to_rows()
    }

    fn ordering_key(&self) -> Vec<f64> {
        self.0.ordering_key().to_vec()
    }

    fn forward(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.forward(&x).map_err(err)
    }

    fn inverse(&self, c: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.inverse(&c).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Transform(kind={}, n={})", self.0.kind(), self.0.n())
    }
}

#[pyfunction]
fn gbt(l: &PyGgl) -> PyResult<PyTransform> {
    Ok(PyTransform(transforms::gbt_from_ggl(&l.0).map_err(err)?))
}

#[pyfunction]
fn klt(covariance: Vec<Vec<f64>>) -> PyResult<PyTransform> {
    Ok(PyTransform(transforms::klt_from_covariance(&to_sym(covariance)?).map_err(err)?))
}

#[pyfunction]
fn closed_form(kind: &str, n: usize) -> PyResult<PyTransform> {
    let k: TransformKind = kind.parse().map_err(err)?;
    Ok(PyTransform(transforms::closed_form_dct_dst(k, n).map_err(err)?))
}

/// `(first, last, kind, n, c, deviation)` for every catalog case.
#[pyfunction]
#[pyo3(signature = (sizes = vec![4, 8, 16, 32], weights = vec![1.0, 7.5]))]
fn verify_dctdst(sizes: Vec<usize>, weights: Vec<f64>) -> PyResult<Vec<(String, String, String, usize, f64, f64)>> {
    let rows = transforms::verify_line_graph_catalog(&sizes, &weights).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.first.label().into(), r.last.label().into(), r.kind.to_string(), r.n, r.c, r.deviation))
        .collect())
}

/// Constrained maximum-likelihood GGL; returns `(laplacian, objective, iterations, kkt_residual)`.
#[pyfunction]
#[pyo3(signature = (s, structure = "full", tol_kkt = 1e-6, tol_obj = 1e-9, max_iters = 1000))]
fn estimate_ggl(
    py: Python<'_>,
    s: Vec<Vec<f64>>,
    structure: &str,
    tol_kkt: f64,
    tol_obj: f64,
    max_iters: usize,
) -> PyResult<(PyGgl, f64, usize, f64)> {
    let s = to_sym(s)?;
    let a = connectivity(s.n(), structure)?;
    let problem = GglProblem::new(s, a, SolverOptions { tol_obj, tol_kkt, max_iters }).map_err(err)?;
    let sol = py.detach(|| learn::estimate_ggl(&problem)).map_err(err)?;
    Ok((PyGgl(sol.laplacian), sol.objective, sol.iterations, sol.kkt_residual))
}

#[pyfunction]
fn sample_covariance(samples: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let dim = samples.first().map_or(0, Vec::len);
    let s = learn::covariance_from_samples(dim, samples.iter().map(Vec::as_slice)).map_err(err)?;
    Ok(s.as_mat().to_rows())
}

#[pyfunction]
fn sample_gmrf(precision: &PyGgl, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    gmrf::sample_gmrf(&precision.0, count, seed).map_err(err)
}

/// Residual precision of the intra or inter model.
#[pyfunction]
#[pyo3(signature = (model, n, w = 1.0, w_ref = None, eps = 0.01))]
fn residual_precision(model: &str, n: usize, w: f64, w_ref: Option<f64>, eps: f64) -> PyResult<PyGgl> {
    Ok(PyGgl(build_model(model, n, w, w_ref, eps)?.residual_precision()))
}

fn build_model(model: &str, n: usize, w: f64, w_ref: Option<f64>, eps: f64) -> PyResult<gmrf::JointGmrf> {
    match model {
        "intra" => gmrf::build_intra_model(n, w, w_ref.unwrap_or(1.0), eps).map_err(err),
        "inter" => gmrf::build_inter_model(n, w, w_ref.unwrap_or(4.0), eps).map_err(err),
        other => Err(PyValueError::new_err(format!("unknown model `{other}`; use intra or inter"))),
    }
}

/// Writes a synthetic residual dataset to `path` and returns the block count.
#[pyfunction]
#[pyo3(signature = (path, model, n, count, seed, class_id = 0, scale = 64.0))]
fn generate_dataset(path: &str, model: &str, n: usize, count: usize, seed: u64, class_id: u16, scale: f64) -> PyResult<usize> {
    let m = build_model(model, n, 1.0, None, 0.01)?;
    let d = gmrf::generate_residual_dataset(&m, count, scale, seed, class_id).map_err(err)?;
    write_dataset(&d, path).map_err(err)?;
    Ok(d.len())
}

/// `(n, [(class_id, values)])`.
#[pyfunction]
fn load_dataset(path: &str) -> PyResult<(usize, Vec<(u16, Vec<i16>)>)> {
    let d = read_dataset(path).map_err(err)?;
    Ok((d.n(), d.blocks().iter().map(|b| (b.class_id, b.values.clone())).collect()))
}

/// Horizontal and vertical cut flags of a block, each in row-major edge order.
#[pyfunction]
#[pyo3(signature = (block, t_edge = 10.0, s_edge = 10.0, w_c = 1.0))]
fn detect_edges(block: Vec<Vec<f64>>, t_edge: f64, s_edge: f64, w_c: f64) -> PyResult<(Vec<bool>, Vec<bool>, f64)> {
    let map = eagbt::detect_edge_map(&to_mat(block)?, &EagbtParams { t_edge, s_edge, w_c }).map_err(err)?;
    Ok((map.h_cut().to_vec(), map.v_cut().to_vec(), eagbt::edge_map_rate(&map)))
}

#[pyfunction]
#[pyo3(signature = (block, t_edge = 10.0, s_edge = 10.0, w_c = 1.0))]
fn eagbt_transform(block: Vec<Vec<f64>>, t_edge: f64, s_edge: f64, w_c: f64) -> PyResult<PyTransform> {
    let (_, t) = eagbt::eagbt_transform(&to_mat(block)?, &EagbtParams { t_edge, s_edge, w_c }).map_err(err)?;
    Ok(PyTransform(t))
}

/// Codes one block with a nonseparable transform (or DCT when `transform` is
/// None); returns `(distortion_sse, rate_bits, reconstruction)`.
#[pyfunction]
#[pyo3(signature = (block, qp, transform = None))]
fn encode_block(block: Vec<Vec<f64>>, qp: i32, transform: Option<&PyTransform>) -> PyResult<(f64, f64, Vec<Vec<f64>>)> {
    let x = to_mat(block)?;
    let c = match transform {
        Some(t) => Candidate::Nonseparable(t.0.clone()),
        None => Candidate::dct(x.rows()).map_err(err)?,
    };
    let r = coding::encode_block(&x, &c, &QuantSpec::new(qp)).map_err(err)?;
    Ok((r.distortion_sse, r.rate_bits, r.reconstruction.to_rows()))
}

#[pyfunction]
fn bd_rate(reference: Vec<(f64, f64)>, test: Vec<(f64, f64)>) -> PyResult<f64> {
    analysis::bd_rate(&RdCurve::from_pairs(&reference), &RdCurve::from_pairs(&test)).map_err(err)
}

#[pyfunction]
fn waterfill(eigenvalues: Vec<f64>, theta: f64) -> (f64, f64) {
    analysis::waterfill(&eigenvalues, theta)
}

/// High-rate coding gain (dB) of EA-GBTs over the mixture KLT at `rate` bits per sample.
#[pyfunction]
#[pyo3(signature = (n, s_edge, rate = 1.5, w_c = 1.0, eps = gmrf::EDGE_MIXTURE_EPS))]
fn edge_coding_gain(n: usize, s_edge: f64, rate: f64, w_c: f64, eps: f64) -> PyResult<f64> {
    let mix = gmrf::edge_mixture_1d(n, w_c, s_edge, eps).map_err(err)?;
    analysis::high_rate_cg(&mix, rate * n as f64).map_err(err)
}

#[pymodule]
#[pyo3(name = "gglt")]
fn gglt_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGgl>()?;
    m.add_class::<PyTransform>()?;
    m.add_function(wrap_pyfunction!(gbt, m)?)?;
    m.add_function(wrap_pyfunction!(klt, m)?)?;
    m.add_function(wrap_pyfunction!(closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(verify_dctdst, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_ggl, m)?)?;
    m.add_function(wrap_pyfunction!(sample_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(sample_gmrf, m)?)?;
    m.add_function(wrap_pyfunction!(residual_precision, m)?)?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(load_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(detect_edges, m)?)?;
    m.add_function(wrap_pyfunction!(eagbt_transform, m)?)?;
    m.add_function(wrap_pyfunction!(encode_block, m)?)?;
    m.add_function(wrap_pyfunction!(bd_rate, m)?)?;
    m.add_function(wrap_pyfunction!(waterfill, m)?)?;
    m.add_function(wrap_pyfunction!(edge_coding_gain, m)?)?;
    Ok(())
}
