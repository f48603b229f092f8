//! Python bindings. Matrices cross the boundary as lists of rows.

use idim_core::datasets::{self, Dataset};
use idim_core::twonn::{FitExtras, TwoNNOptions};
use idim_core::{
    DistanceMatrix, HidalgoChains, HidalgoConfig, Input, Linkage, Method, Metric, MusOptions,
    PointCloud, PosteriorSummary, PriorType,
};
use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: idim_core::Error) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn parse<T: std::str::FromStr<Err = idim_core::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn rows<T: Copy>(m: &Array2<T>) -> Vec<Vec<T>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

fn matrix(data: &[Vec<f64>]) -> PyResult<Array2<f64>> {
    let ncols = data.first().map_or(0, Vec::len);
    if data.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Array2::from_shape_vec((data.len(), ncols), data.concat())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

enum Owned {
    Points(PointCloud, Metric),
    Distances(DistanceMatrix),
}

impl Owned {
    fn new(x: Option<Vec<Vec<f64>>>, dist: Option<Vec<Vec<f64>>>, metric: &str) -> PyResult<Self> {
        match (x, dist) {
            (Some(x), None) => {
                let metric: Metric = parse(metric)?;
                Ok(Owned::Points(PointCloud::new(matrix(&x)?, None).map_err(to_py)?, metric))
            }
            (None, Some(d)) => Ok(Owned::Distances(DistanceMatrix::new(matrix(&d)?).map_err(to_py)?)),
            _ => Err(PyValueError::new_err("pass exactly one of x or dist")),
        }
    }

    fn input(&self) -> Input<'_> {
        match self {
            Owned::Points(x, m) => Input::Points(x, *m),
            Owned::Distances(d) => Input::Distances(d),
        }
    }
}

/// Ratios of the `n2`-th to `n1`-th nearest-neighbor distances.
///
/// Returns a dict with `mus`, `kept_rows` (zero-based), `removed_duplicates`
/// and, when `q` is given, `neighbors` (the `q` nearest neighbors of each row).
#[pyfunction]
#[pyo3(signature = (x=None, dist=None, metric="euclidean", n1=1, n2=2, q=None))]
fn compute_mus<'py>(
    py: Python<'py>,
    x: Option<Vec<Vec<f64>>>,
    dist: Option<Vec<Vec<f64>>>,
    metric: &str,
    n1: usize,
    n2: usize,
    q: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let data = Owned::new(x, dist, metric)?;
    let opts = MusOptions {
        n1,
        n2,
        with_adjacency: q.is_some(),
        q: q.unwrap_or(3),
    };
    let r = idim_core::compute_mus(data.input(), &opts).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("mus", &r.mus)?;
    out.set_item("kept_rows", &r.kept_rows)?;
    out.set_item("removed_duplicates", r.removed_duplicates)?;
    if let Some(adj) = &r.adjacency {
        out.set_item("neighbors", rows(adj.neighbors()))?;
    }
    Ok(out)
}

/// Result of a homogeneous fit.
#[pyclass(frozen, get_all, module = "idim")]
struct TwoNNFit {
    method: String,
    estimate: f64,
    lower: f64,
    upper: f64,
    alpha: f64,
    c_trimmed: f64,
    n_original: usize,
    n_used: usize,
    /// Posterior shape, rate, mean, median and mode for the Bayes method.
    posterior: Option<(f64, f64, f64, f64, f64)>,
}

#[pymethods]
impl TwoNNFit {
    fn __repr__(&self) -> String {
        format!(
            "TwoNNFit(method='{}', estimate={}, lower={}, upper={}, n_used={})",
            self.method, self.estimate, self.lower, self.upper, self.n_used
        )
    }
}

impl From<idim_core::TwoNNFit> for TwoNNFit {
    fn from(f: idim_core::TwoNNFit) -> Self {
        let posterior = match &f.extras {
            FitExtras::Bayes(p) => Some((p.shape, p.rate, p.mean, p.median, p.mode)),
            _ => None,
        };
        Self {
            method: f.method.to_string(),
            estimate: f.estimate,
            lower: f.lower,
            upper: f.upper,
            alpha: f.alpha,
            c_trimmed: f.c_trimmed,
            n_original: f.n_original,
            n_used: f.n_used,
            posterior,
        }
    }
}

/// Global intrinsic dimension from precomputed ratios `mus`, or from points
/// `x` / distances `dist`.
#[pyfunction]
#[pyo3(signature = (
    mus=None, x=None, dist=None, metric="euclidean", method="mle", alpha=0.95,
    c_trimmed=0.01, unbiased=true, a_d=0.001, b_d=0.001
))]
#[allow(clippy::too_many_arguments)]
fn twonn(
    mus: Option<Vec<f64>>,
    x: Option<Vec<Vec<f64>>>,
    dist: Option<Vec<Vec<f64>>>,
    metric: &str,
    method: &str,
    alpha: f64,
    c_trimmed: f64,
    unbiased: bool,
    a_d: f64,
    b_d: f64,
) -> PyResult<TwoNNFit> {
    let method: Method = parse(method)?;
    let opts = TwoNNOptions {
        alpha,
        c_trimmed,
        unbiased,
        a_d,
        b_d,
    };
    let mus = match mus {
        Some(m) if x.is_none() && dist.is_none() => m,
        Some(_) => return Err(PyValueError::new_err("pass mus or data, not both")),
        None => {
            let data = Owned::new(x, dist, metric)?;
            idim_core::compute_mus(data.input(), &MusOptions::default())
                .map_err(to_py)?
                .mus
        }
    };
    idim_core::twonn(&mus, method, &opts).map(Into::into).map_err(to_py)
}

/// Draws from a Hidalgo fit.
#[pyclass(frozen, module = "idim")]
struct Hidalgo {
    chains: HidalgoChains,
}

#[pymethods]
impl Hidalgo {
    #[getter]
    fn cluster_prob(&self) -> Vec<Vec<f64>> {
        rows(&self.chains.cluster_prob)
    }

    /// One-based component labels, one row per retained draw.
    #[getter]
    fn membership_labels(&self) -> Vec<Vec<u32>> {
        rows(&self.chains.membership_labels)
    }

    #[getter]
    fn id_raw(&self) -> Vec<Vec<f64>> {
        rows(&self.chains.id_raw)
    }

    #[getter]
    fn mus(&self) -> Vec<f64> {
        self.chains.mus.clone()
    }

    #[getter]
    fn kept_rows(&self) -> Vec<usize> {
        self.chains.kept_rows.clone()
    }

    #[getter]
    fn elapsed_secs(&self) -> f64 {
        self.chains.elapsed_secs
    }

    /// Observation-level summaries, similarity matrix and, when `k_clusters`
    /// is given, dendrogram clusters (one-based).
    #[pyo3(signature = (k_clusters=None, linkage="average"))]
    fn summarize<'py>(
        &self,
        py: Python<'py>,
        k_clusters: Option<usize>,
        linkage: &str,
    ) -> PyResult<Bound<'py, PyDict>> {
        let linkage: Linkage = parse(linkage)?;
        let s = PosteriorSummary::from_chains(&self.chains, k_clusters, linkage).map_err(to_py)?;
        let out = PyDict::new(py);
        out.set_item("id_postpr", rows(&s.id_postpr))?;
        out.set_item("id_summary", rows(&s.id_summary))?;
        out.set_item("psm", rows(&s.psm))?;
        out.set_item("clusters", s.clusters)?;
        Ok(out)
    }

    /// Mean, median and sd of the id within each class, as a list of dicts.
    fn id_by_class<'py>(&self, py: Python<'py>, classes: Vec<String>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let post = idim_core::fix_label_switching(&self.chains.membership_labels, &self.chains.id_raw)
            .map_err(to_py)?;
        idim_core::id_by_class(&post, &classes)
            .map_err(to_py)?
            .into_iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("class", r.class)?;
                d.set_item("n", r.n)?;
                d.set_item("mean", r.mean)?;
                d.set_item("median", r.median)?;
                d.set_item("sd", r.sd)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Hidalgo(n={}, draws={}, k={})",
            self.chains.n(),
            self.chains.draws(),
            self.chains.config.k
        )
    }
}

/// Fits the heterogeneous-dimension mixture by Gibbs sampling.
#[pyfunction]
#[pyo3(signature = (
    x=None, dist=None, metric="euclidean", k=10, q=3, xi=0.75, alpha_dirichlet=0.05,
    a0_d=1.0, b0_d=1.0, prior="conjugate", nominal_dim=None, pi_mass=0.5,
    nsim=2000, burn_in=2000, thinning=5, seed=1
))]
#[allow(clippy::too_many_arguments)]
fn hidalgo(
    py: Python<'_>,
    x: Option<Vec<Vec<f64>>>,
    dist: Option<Vec<Vec<f64>>>,
    metric: &str,
    k: usize,
    q: usize,
    xi: f64,
    alpha_dirichlet: f64,
    a0_d: f64,
    b0_d: f64,
    prior: &str,
    nominal_dim: Option<usize>,
    pi_mass: f64,
    nsim: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> PyResult<Hidalgo> {
    let prior_type: PriorType = parse(prior)?;
    let cfg = HidalgoConfig {
        k,
        q,
        xi,
        alpha_dirichlet,
        a0_d,
        b0_d,
        prior_type,
        nominal_dim,
        pi_mass,
        nsim,
        burn_in,
        thinning,
        seed,
        verbose: false,
    };
    cfg.validate().map_err(to_py)?;
    let data = Owned::new(x, dist, metric)?;
    let chains = py
        .detach(|| idim_core::run_hidalgo(data.input(), &cfg))
        .map_err(to_py)?;
    Ok(Hidalgo { chains })
}

fn dataset<'py>(py: Python<'py>, ds: Dataset) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("x", rows(ds.cloud.data()))?;
    out.set_item("columns", ds.cloud.col_names().map(<[String]>::to_vec))?;
    out.set_item("class", ds.class)?;
    out.set_item("true_id", ds.true_id)?;
    Ok(out)
}

/// Synthetic benchmark: `kind` is swissroll, hypercube or gaussmix (where
/// `n` counts points per component).
#[pyfunction]
#[pyo3(signature = (kind, n, seed=1))]
fn generate<'py>(py: Python<'py>, kind: &str, n: usize, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let ds = match kind.to_ascii_lowercase().as_str() {
        "swissroll" => datasets::swissroll(n, seed),
        "hypercube" => datasets::hypercube(n, seed),
        "gaussmix" => datasets::gaussmix(n, seed),
        other => return Err(PyValueError::new_err(format!("unknown dataset kind '{other}'"))),
    }
    .map_err(to_py)?;
    dataset(py, ds)
}

/// `n` Pareto(1, d) ratios.
#[pyfunction]
#[pyo3(signature = (n, d, seed=1))]
fn pareto_ratios(n: usize, d: f64, seed: u64) -> PyResult<Vec<f64>> {
    datasets::pareto_ratios(n, d, seed).map_err(to_py)
}

#[pymodule]
fn idim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<TwoNNFit>()?;
    m.add_class::<Hidalgo>()?;
    m.add_function(wrap_pyfunction!(compute_mus, m)?)?;
    m.add_function(wrap_pyfunction!(twonn, m)?)?;
    m.add_function(wrap_pyfunction!(hidalgo, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(pareto_ratios, m)?)?;
    Ok(())
}
