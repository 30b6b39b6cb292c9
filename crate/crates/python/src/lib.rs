//! Python module `dce`: geometry, cluster discovery, multiple-scale evolution,
//! thresholds, thermal enhancement and direct integration.

use std::str::FromStr;

use dce_cli::config::{resolve_geometry, GeometryConfig, RunConfig};
use dce_core::cavity::{enumerate_modes, mode_frequency, CavityGeometry, ModeIndex, DEFAULT_MODE_LIMIT};
use dce_core::evolve::{assemble_family, integrate_family, photon_spectrum, WallTrajectory};
use dce_core::msa::{build_msa_matrix, detuning_threshold, MsaSystem, ThresholdOptions};
use dce_core::ode::SolverOptions;
use dce_core::resonance::{build_coupling_cluster, resonant_clusters, CouplingCluster, DriveFrequency, SearchBounds};
use dce_core::thermal::{enhancement_factor, ThermalContext};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn core_err(e: dce_core::Error) -> PyErr {
    match e {
        dce_core::Error::Domain(_) | dce_core::Error::Unsupported(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn cli_err(e: dce_cli::error::CliError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mode_of(t: &[u32]) -> PyResult<ModeIndex> {
    match *t {
        [x] => Ok(ModeIndex::axial(x)),
        [x, y] => Ok(ModeIndex::planar(x, y)),
        [x, y, z] => Ok(ModeIndex::new(x, y, z)),
        _ => Err(PyValueError::new_err("a mode has one to three indices")),
    }
}

fn mode_tuple(m: ModeIndex, g: &CavityGeometry) -> Vec<u32> {
    m.components(g.dims())
}

/// Rectangular cavity; `lx` is the moving-wall direction.
#[pyclass(name = "Geometry", module = "dce", skip_from_py_object)]
#[derive(Clone)]
pub struct PyGeometry {
    inner: CavityGeometry,
}

#[pymethods]
impl PyGeometry {
    /// Lengths, or exact squared ratios `ry2 = (lx/ly)²`, `rz2 = (lx/lz)²` as "p/q" strings.
    #[new]
    #[pyo3(signature = (lx=1.0, ly=None, lz=None, dims=3, ry2=None, rz2=None))]
    fn new(lx: f64, ly: Option<f64>, lz: Option<f64>, dims: u8, ry2: Option<String>, rz2: Option<String>) -> PyResult<Self> {
        let cfg = GeometryConfig { lx, ly, lz, dims, ry2, rz2, infer_exact: true };
        Ok(PyGeometry { inner: resolve_geometry(&cfg).map_err(cli_err)? })
    }

    #[staticmethod]
    fn cube() -> Self {
        PyGeometry { inner: CavityGeometry::cube() }
    }

    #[staticmethod]
    fn square() -> Self {
        PyGeometry { inner: CavityGeometry::square() }
    }

    #[getter]
    fn lengths(&self) -> (f64, f64, f64) {
        (self.inner.lx(), self.inner.ly(), self.inner.lz())
    }

    #[getter]
    fn exact(&self) -> bool {
        self.inner.exact().is_some()
    }

    fn frequency(&self, mode: Vec<u32>) -> PyResult<f64> {
        mode_frequency(&self.inner, mode_of(&mode)?).map_err(core_err)
    }

    /// Modes with frequency at most `cutoff`, as `(mode, omega)` pairs.
    fn spectrum(&self, cutoff: f64) -> PyResult<Vec<(Vec<u32>, f64)>> {
        let modes = enumerate_modes(&self.inner, cutoff, DEFAULT_MODE_LIMIT).map_err(core_err)?;
        Ok(modes.into_iter().map(|(m, w)| (mode_tuple(m, &self.inner), w)).collect())
    }

    fn __repr__(&self) -> String {
        let (x, y, z) = self.lengths();
        format!("Geometry(lx={x}, ly={y}, lz={z}, dims={}, exact={})", self.inner.dims().count(), self.exact())
    }
}

fn parse_drive(g: &CavityGeometry, omega: &str) -> PyResult<DriveFrequency> {
    dce_cli::config::parse_drive(omega, g).map_err(cli_err)
}

/// Modes joined by resonance conditions under one drive.
#[pyclass(name = "Cluster", module = "dce", skip_from_py_object)]
#[derive(Clone)]
pub struct PyCluster {
    inner: CouplingCluster,
}

#[pymethods]
impl PyCluster {
    #[getter]
    fn modes(&self) -> Vec<Vec<u32>> {
        self.inner.modes().into_iter().map(|m| mode_tuple(m, &self.inner.geometry)).collect()
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.drive.value()
    }

    /// `(first, second, kind, g)` for each coupled pair.
    #[getter]
    fn couplings(&self) -> Vec<(Vec<u32>, Vec<u32>, String, f64)> {
        let g = &self.inner.geometry;
        self.inner
            .couplings
            .iter()
            .map(|c| {
                let (a, b) = (self.inner.members[c.first].mode, self.inner.members[c.second].mode);
                (mode_tuple(a, g), mode_tuple(b, g), c.kind.as_str().to_string(), c.g)
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        let m: Vec<String> = self.inner.modes().iter().map(|m| m.to_string()).collect();
        format!("Cluster([{}])", m.join(", "))
    }
}

/// Resonant clusters for the drive `omega`: a number, "2*omega(kx,ky,kz)" or
/// "omega(s)+omega(p)". With `seeds`, one cluster per seed mode.
#[pyfunction]
#[pyo3(signature = (geometry, omega, seeds=None, max_x_index=1000))]
fn couple(geometry: &PyGeometry, omega: &str, seeds: Option<Vec<Vec<u32>>>, max_x_index: u32) -> PyResult<Vec<PyCluster>> {
    let g = &geometry.inner;
    let d = parse_drive(g, omega)?;
    let bounds = SearchBounds { max_x_index, ..SearchBounds::default() };
    let found = match seeds {
        Some(s) => s
            .iter()
            .map(|m| build_coupling_cluster(g, &d, &[mode_of(m)?], bounds).map_err(core_err))
            .collect::<PyResult<Vec<_>>>()?,
        None => resonant_clusters(g, &d, bounds).map_err(core_err)?,
    };
    Ok(found.into_iter().map(|inner| PyCluster { inner }).collect())
}

/// Slow-time amplitude system of a cluster at slow detuning `alpha`.
#[pyclass(name = "Msa", module = "dce")]
pub struct PyMsa {
    inner: MsaSystem,
}

#[pymethods]
impl PyMsa {
    #[new]
    #[pyo3(signature = (cluster, alpha=0.0))]
    fn new(cluster: &PyCluster, alpha: f64) -> PyResult<Self> {
        Ok(PyMsa { inner: build_msa_matrix(&cluster.inner, alpha).map_err(core_err)? })
    }

    #[getter]
    fn growth_rate(&self) -> f64 {
        self.inner.growth_rate()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma_ref
    }

    /// Eigenvalues as `(re, im)` pairs.
    fn eigenvalues(&self) -> Vec<(f64, f64)> {
        self.inner.eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    }

    /// Photon number of every member at slow time `tau`.
    fn photons(&self, tau: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.evolve(tau).map_err(core_err)?.photon_numbers())
    }

    fn unitarity_defect(&self, tau: f64) -> PyResult<f64> {
        Ok(self.inner.evolve(tau).map_err(core_err)?.unitarity_defect())
    }

    /// Largest `|alpha|` with exponential growth.
    fn threshold(&self) -> PyResult<f64> {
        Ok(detuning_threshold(&self.inner.cluster, &ThresholdOptions::default()).map_err(core_err)?.alpha_max)
    }
}

/// Thermal enhancement factor of a cluster for a cavity of `length_cm` at `temperature_k`.
#[pyfunction]
#[pyo3(signature = (cluster, temperature_k, length_cm=1.0, tau=1.0))]
fn enhancement(cluster: &PyCluster, temperature_k: f64, length_cm: f64, tau: f64) -> PyResult<f64> {
    let ctx = ThermalContext::physical(temperature_k, length_cm).map_err(core_err)?;
    Ok(enhancement_factor(&cluster.inner, &ctx, tau).map_err(core_err)?.factor)
}

/// Direct integration of one transverse family up to `t_final`; returns the
/// photon number per x-index and the unitarity defect.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (geometry, omega, epsilon, t_final, transverse, k_max, rtol=1e-10))]
fn integrate(
    py: Python<'_>,
    geometry: &PyGeometry,
    omega: &str,
    epsilon: f64,
    t_final: f64,
    transverse: (u32, u32),
    k_max: u32,
    rtol: f64,
) -> PyResult<(Vec<f64>, f64)> {
    let g = geometry.inner.clone();
    let d = parse_drive(&g, omega)?;
    py.detach(move || {
        let traj = WallTrajectory::new(g.lx(), epsilon, d.value(), t_final).map_err(core_err)?;
        let family = assemble_family(&g, transverse, k_max).map_err(core_err)?;
        let solver = SolverOptions { rtol, atol: rtol * 1e-2, ..SolverOptions::default() };
        let runs = integrate_family(&family, &traj, &solver, &[]).map_err(core_err)?;
        let s = photon_spectrum(&runs, &family, &traj).map_err(core_err)?;
        Ok((s.photons, s.unitarity_defect))
    })
}

/// Runs a command-line subcommand on a TOML configuration and returns the JSON envelope.
#[pyfunction]
fn run(command: &str, config_toml: &str) -> PyResult<String> {
    use dce_cli::Command;
    let cmd = match command {
        "spectrum" => Command::Spectrum,
        "couple" => Command::Couple,
        "msa" => Command::Msa,
        "integrate" => Command::Integrate,
        "threshold" => Command::Threshold,
        "thermal" => Command::Thermal,
        "sweep" => Command::Sweep,
        other => return Err(PyValueError::new_err(format!("unknown command {other:?}"))),
    };
    let cfg = RunConfig::from_toml(config_toml).map_err(cli_err)?;
    let out = dce_cli::execute(cmd, &cfg).map_err(cli_err)?;
    Ok(out.render(dce_cli::config::Format::Json, &cfg))
}

/// Parses "(1,1,1)"-style text into an index tuple.
#[pyfunction]
fn parse_mode(text: &str) -> PyResult<Vec<u32>> {
    let m = ModeIndex::from_str(text).map_err(core_err)?;
    Ok([m.nx, m.ny, m.nz].into_iter().filter(|&v| v > 0).collect())
}

#[pymodule]
fn dce(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyCluster>()?;
    m.add_class::<PyMsa>()?;
    m.add_function(wrap_pyfunction!(couple, m)?)?;
    m.add_function(wrap_pyfunction!(enhancement, m)?)?;
    m.add_function(wrap_pyfunction!(integrate, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(parse_mode, m)?)?;
    Ok(())
}
