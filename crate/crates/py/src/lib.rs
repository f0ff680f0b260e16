//! Python bindings. Points are plain coordinate lists; spaces are named
//! `"r1"`, `"r2"`, `"r3"`, `"s2"`, `"h2"` or `"box"` (with `box_dim`).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use sf::{geometry, karlin, mdk, parity, sampling};
use sf::{Budget, CellMeasureTable, FieldKind, FractionalParams, MassMode, ParityVector, SetFamily, SpaceKind, SpacePoint};

fn py_err(e: sf::Error) -> PyErr {
    match e {
        sf::Error::Truncation { .. } | sf::Error::Calibration { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn family(space: &str, box_dim: usize) -> PyResult<SetFamily> {
    let kind = match space.to_ascii_lowercase().as_str() {
        "r1" => SpaceKind::Euclidean { dim: 1 },
        "r2" => SpaceKind::Euclidean { dim: 2 },
        "r3" => SpaceKind::Euclidean { dim: 3 },
        "s2" => SpaceKind::Sphere2,
        "h2" => SpaceKind::HyperbolicDisc,
        "box" => return Ok(SetFamily::Box { dim: box_dim }),
        other => return Err(PyValueError::new_err(format!("unknown space {other:?}"))),
    };
    Ok(SetFamily::separating(kind))
}

fn points(fam: &SetFamily, coords: &[Vec<f64>]) -> PyResult<Vec<SpacePoint>> {
    let kind = fam.point_kind();
    coords.iter().map(|c| SpacePoint::from_coords(kind, c).map_err(py_err)).collect()
}

fn budget(tol: Option<f64>) -> Budget {
    let mut b = Budget::default();
    if let Some(t) = tol {
        b.tol = t;
    }
    b
}

fn delta(d: usize, bits: &[u8]) -> PyResult<ParityVector> {
    if bits.len() != d {
        return Err(PyValueError::new_err(format!("δ needs {d} entries, got {}", bits.len())));
    }
    ParityVector::from_slice(bits).map_err(py_err)
}

/// Geodesic distance between two points.
#[pyfunction]
#[pyo3(signature = (space, x, y, box_dim = 2))]
fn distance(space: &str, x: Vec<f64>, y: Vec<f64>, box_dim: usize) -> PyResult<f64> {
    let f = family(space, box_dim)?;
    let p = points(&f, &[x, y])?;
    match f {
        SetFamily::Box { .. } => Ok(p[0].coords().iter().zip(p[1].coords()).map(|(a, b)| (a - b).abs()).sum()),
        _ => geometry::distance(&p[0], &p[1]).map_err(py_err),
    }
}

/// `μ(A_x Δ A_y)` for the separating family of `space`.
#[pyfunction]
#[pyo3(signature = (space, x, y, box_dim = 2, tol = None))]
fn symmdiff_measure(space: &str, x: Vec<f64>, y: Vec<f64>, box_dim: usize, tol: Option<f64>) -> PyResult<f64> {
    let f = family(space, box_dim)?;
    let p = points(&f, &[x, y])?;
    mdk::symmdiff_measure(&p[0], &p[1], &f, &budget(tol)).map_err(py_err)
}

/// `μ_β(A_x* Δ A_y*)`, which equals `d(x, y)^β`.
#[pyfunction]
#[pyo3(signature = (space, x, y, beta, box_dim = 2, tol = None))]
fn fractional_distance(space: &str, x: Vec<f64>, y: Vec<f64>, beta: f64, box_dim: usize, tol: Option<f64>) -> PyResult<f64> {
    let f = family(space, box_dim)?;
    let p = points(&f, &[x, y])?;
    parity::fractional_distance(&p[0], &p[1], &f, beta, &budget(tol)).map_err(py_err)
}

/// Partition-cell masses of `A_{x_1}, …, A_{x_d}`, indexed by bitmask.
#[pyclass(name = "CellTable", module = "stablefield", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCellTable {
    inner: CellMeasureTable,
}

#[pymethods]
impl PyCellTable {
    /// Table from explicit `(bitmask, mass)` pairs.
    #[staticmethod]
    fn from_cells(d: usize, cells: Vec<(usize, f64)>) -> PyResult<Self> {
        Ok(Self { inner: CellMeasureTable::from_cells(d, &cells).map_err(py_err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn masses(&self) -> Vec<f64> {
        self.inner.masses().to_vec()
    }

    #[getter]
    fn err(&self) -> f64 {
        self.inner.err
    }

    fn mass(&self, eta: usize) -> f64 {
        self.inner.mass(eta)
    }

    fn marginal(&self, j: usize) -> PyResult<f64> {
        if j >= self.inner.dim() {
            return Err(PyValueError::new_err(format!("set index {j} out of range")));
        }
        Ok(self.inner.marginal(j))
    }

    fn union(&self) -> f64 {
        self.inner.union()
    }

    fn __repr__(&self) -> String {
        format!("CellTable(dim={}, union={:.6e})", self.inner.dim(), self.inner.union())
    }
}

#[pyfunction]
#[pyo3(signature = (space, points_, box_dim = 2, tol = None))]
fn cell_measures(space: &str, points_: Vec<Vec<f64>>, box_dim: usize, tol: Option<f64>) -> PyResult<PyCellTable> {
    let f = family(space, box_dim)?;
    let p = points(&f, &points_)?;
    Ok(PyCellTable { inner: mdk::cell_measures(&p, &f, &budget(tol)).map_err(py_err)? })
}

/// Probability that the Poisson(`r μ`) counts of the sets have parities `δ`.
#[pyfunction]
fn poisson_parity_prob(cells: &PyCellTable, r: f64, delta_: Vec<u8>) -> PyResult<f64> {
    let d = delta(cells.inner.dim(), &delta_)?;
    parity::poisson_parity_prob(&cells.inner, r, &d).map_err(py_err)
}

/// The `μ_β` mass `𝔪^δ` of parity pattern `δ`.
#[pyfunction]
#[pyo3(signature = (cells, beta, delta_, quadrature = false))]
fn mubeta_mass(cells: &PyCellTable, beta: f64, delta_: Vec<u8>, quadrature: bool) -> PyResult<f64> {
    let d = delta(cells.inner.dim(), &delta_)?;
    // α does not enter 𝔪^δ; any admissible value will do
    let params = FractionalParams::new(1.0, beta).map_err(py_err)?;
    let mode = if quadrature { MassMode::Quadrature } else { MassMode::ClosedForm };
    parity::mubeta_mass(&cells.inner, &params, &d, mode).map_err(py_err)
}

/// Exact f.d.d. samples, one row per sample. `beta = None` gives the
/// Lévy–Chentsov field.
#[pyfunction]
#[pyo3(signature = (space, points_, alpha, n, seed, beta = None, box_dim = 2, tol = None))]
#[allow(clippy::too_many_arguments)]
fn sample_fdd(
    py: Python<'_>,
    space: &str,
    points_: Vec<Vec<f64>>,
    alpha: f64,
    n: usize,
    seed: u64,
    beta: Option<f64>,
    box_dim: usize,
    tol: Option<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    let f = family(space, box_dim)?;
    let p = points(&f, &points_)?;
    let field = beta.map_or(FieldKind::LevyChentsov, |beta| FieldKind::Fractional { beta });
    let b = budget(tol);
    let batch = py.detach(|| sampling::sample_fdd(&p, &f, alpha, field, n, seed, &b)).map_err(py_err)?;
    Ok(batch.samples.into_iter().map(|s| s.values).collect())
}

/// Sub-stable field samples `ξ^{1/α′} X`.
#[pyfunction]
#[pyo3(signature = (space, points_, alpha, alpha_prime, n, seed, box_dim = 2, tol = None))]
#[allow(clippy::too_many_arguments)]
fn sample_substable(
    py: Python<'_>,
    space: &str,
    points_: Vec<Vec<f64>>,
    alpha: f64,
    alpha_prime: f64,
    n: usize,
    seed: u64,
    box_dim: usize,
    tol: Option<f64>,
) -> PyResult<Vec<Vec<f64>>> {
    let f = family(space, box_dim)?;
    let p = points(&f, &points_)?;
    let b = budget(tol);
    let cells = mdk::cell_measures(&p, &f, &b).map_err(py_err)?;
    let out = py.detach(|| sampling::sample_substable_cells(&cells, alpha, alpha_prime, n, seed)).map_err(py_err)?;
    Ok(out.into_iter().map(|s| s.values).collect())
}

/// Poissonised Karlin urn scheme. `tail_constant = None` selects Rademacher
/// signs (requires `alpha = 2`); otherwise symmetric Pareto signs.
#[pyclass(name = "KarlinConfig", module = "stablefield", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKarlinConfig {
    inner: karlin::KarlinConfig,
}

#[pymethods]
impl PyKarlinConfig {
    #[new]
    #[pyo3(signature = (beta, alpha, rho, tail_constant = None, c_f = 1.0))]
    fn new(beta: f64, alpha: f64, rho: f64, tail_constant: Option<f64>, c_f: f64) -> PyResult<Self> {
        let sign = tail_constant.map_or(karlin::SignLaw::Rademacher, |c| karlin::SignLaw::Pareto { tail_constant: c });
        let mut inner = karlin::KarlinConfig::new(beta, alpha, rho, sign).map_err(py_err)?;
        inner.c_f = c_f;
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.inner.rho
    }

    fn with_rho(&self, rho: f64) -> Self {
        Self { inner: self.inner.with_rho(rho) }
    }

    /// Normalizing constant `b_ρ`.
    fn b_rho(&self) -> PyResult<f64> {
        karlin::b_rho(&self.inner).map_err(py_err)
    }

    /// `lim M_ρ^δ / b_ρ^α`.
    fn m_limit(&self, cells: &PyCellTable, delta_: Vec<u8>) -> PyResult<f64> {
        let d = delta(cells.inner.dim(), &delta_)?;
        Ok(karlin::m_statistic_limit(&cells.inner, &self.inner, &d).map_err(py_err)?.limit)
    }

    /// Real part of the limit CF of `U_ρ / b_ρ` at `θ`.
    fn limit_cf(&self, cells: &PyCellTable, theta: Vec<f64>) -> PyResult<f64> {
        Ok(karlin::limit_cf(&theta, &cells.inner, &self.inner).map_err(py_err)?.re)
    }

    /// `n` realizations of `U_ρ`, each a list with one value per set.
    fn simulate(&self, py: Python<'_>, cells: &PyCellTable, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let runs = py.detach(|| karlin::simulate_many(&self.inner, &cells.inner, n, seed)).map_err(py_err)?;
        Ok(runs.into_iter().map(|r| r.u).collect())
    }

    /// Rows `(ρ, b_ρ, limit, mean ratio, mean relative error)` over `rhos`.
    fn convergence_sweep(
        &self,
        py: Python<'_>,
        cells: &PyCellTable,
        delta_: Vec<u8>,
        rhos: Vec<f64>,
        realizations: usize,
        seed: u64,
    ) -> PyResult<Vec<(f64, f64, f64, f64, f64)>> {
        let d = delta(cells.inner.dim(), &delta_)?;
        let (rows, _) = py
            .detach(|| karlin::convergence_sweep(&self.inner, &cells.inner, &d, &rhos, realizations, seed))
            .map_err(py_err)?;
        Ok(rows.into_iter().map(|r| (r.rho, r.b_rho, r.limit, r.mean_ratio, r.rel_error)).collect())
    }

    fn __repr__(&self) -> String {
        format!("KarlinConfig(beta={}, alpha={}, rho={})", self.inner.beta, self.inner.alpha, self.inner.rho)
    }
}

#[pymodule]
fn stablefield(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCellTable>()?;
    m.add_class::<PyKarlinConfig>()?;
    m.add_function(wrap_pyfunction!(distance, m)?)?;
    m.add_function(wrap_pyfunction!(symmdiff_measure, m)?)?;
    m.add_function(wrap_pyfunction!(fractional_distance, m)?)?;
    m.add_function(wrap_pyfunction!(cell_measures, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_parity_prob, m)?)?;
    m.add_function(wrap_pyfunction!(mubeta_mass, m)?)?;
    m.add_function(wrap_pyfunction!(sample_fdd, m)?)?;
    m.add_function(wrap_pyfunction!(sample_substable, m)?)?;
    Ok(())
}
