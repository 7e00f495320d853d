//! Python bindings for the trajectory-prediction core.

use std::path::PathBuf;

use adaptp_core::atmosphere;
use adaptp_core::dataio::{self, Blip, CorpusJitter};
use adaptp_core::eval::{self, EvalContext, Method};
use adaptp_core::kalman::{KalmanTracker as CoreKalman, KfConfig};
use adaptp_core::lssm::{self, ScalingMatrix, StateVec, Theta};
use adaptp_core::lwpf::{FilterConfig, LiuWestFilter as CoreFilter};
use adaptp_core::optimizer::{self, PriorSet as CorePrior, SimplexConfig};
use adaptp_core::perfmodel::{self, AircraftConfig as CoreConfig};
use adaptp_core::{Error, Phase, BLIP_DT};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::Domain(_)
        | Error::Input(_)
        | Error::Config(_)
        | Error::Format(_)
        | Error::NotFound(_)
        | Error::Split(_)
        | Error::Csv(_)
        | Error::Json(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn phase(s: &str) -> PyResult<Phase> {
    s.parse().map_err(to_py)
}

/// ISA temperature (K), pressure (Pa), density (kg/m^3) and speed of sound
/// (kt) at a geopotential altitude in feet.
#[pyfunction]
fn isa(py: Python<'_>, h_ft: f64) -> PyResult<Bound<'_, PyDict>> {
    let a = atmosphere::isa_at(h_ft).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("temperature_k", a.t)?;
    d.set_item("pressure_pa", a.p)?;
    d.set_item("density_kg_m3", a.rho)?;
    d.set_item("speed_of_sound_kt", a.a_sound)?;
    Ok(d)
}

#[pyfunction]
fn tas_from_cas(cas_kt: f64, h_ft: f64) -> PyResult<f64> {
    atmosphere::tas_from_cas(cas_kt, h_ft).map_err(to_py)
}

#[pyfunction]
fn cas_from_tas(tas_kt: f64, h_ft: f64) -> PyResult<f64> {
    atmosphere::cas_from_tas(tas_kt, h_ft).map_err(to_py)
}

#[pyfunction]
fn mach_from_tas(tas_kt: f64, h_ft: f64) -> PyResult<f64> {
    atmosphere::mach_from_tas(tas_kt, h_ft).map_err(to_py)
}

#[pyfunction]
fn tas_from_mach(mach: f64, h_ft: f64) -> PyResult<f64> {
    atmosphere::tas_from_mach(mach, h_ft).map_err(to_py)
}

#[pyfunction]
fn crossover_altitude(cas_kt: f64, mach: f64) -> PyResult<f64> {
    atmosphere::crossover_altitude(cas_kt, mach).map_err(to_py)
}

/// Performance-model parameters of one aircraft type.
#[pyclass(module = "adaptp", from_py_object)]
#[derive(Clone)]
struct AircraftConfig {
    inner: CoreConfig,
}

#[pymethods]
impl AircraftConfig {
    #[getter]
    fn type_code(&self) -> String {
        self.inner.type_code.clone()
    }

    /// Crossover altitude of the climb or descent schedule, ft.
    fn crossover_ft(&self, phase_name: &str) -> PyResult<f64> {
        self.inner.schedule(phase(phase_name)?).crossover_ft().map_err(to_py)
    }

    /// Rate of climb or descent on the speed schedule at `h_ft`, ft/min.
    fn rocd(&self, h_ft: f64, phase_name: &str) -> PyResult<f64> {
        let ph = phase(phase_name)?;
        let (tas, branch) = self.inner.scheduled_speed(h_ft, ph).map_err(to_py)?;
        perfmodel::rocd(&self.inner, h_ft, tas, ph, branch).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("AircraftConfig('{}')", self.inner.type_code)
    }
}

/// The built-in heterogeneous fleet.
#[pyfunction]
fn synth_fleet() -> Vec<AircraftConfig> {
    perfmodel::synth_fleet().into_iter().map(|inner| AircraftConfig { inner }).collect()
}

fn core_fleet(fleet: &[AircraftConfig]) -> Vec<CoreConfig> {
    fleet.iter().map(|c| c.inner.clone()).collect()
}

/// A climb or descent sampled at the blip cadence.
#[pyclass(module = "adaptp", from_py_object)]
#[derive(Clone)]
struct Trajectory {
    inner: dataio::Trajectory,
}

#[pymethods]
impl Trajectory {
    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn aircraft_type(&self) -> String {
        self.inner.aircraft_type.clone()
    }

    #[getter]
    fn phase(&self) -> &'static str {
        self.inner.phase.as_str()
    }

    #[getter]
    fn day(&self) -> String {
        self.inner.day.clone()
    }

    #[getter]
    fn h_target(&self) -> f64 {
        self.inner.h_target
    }

    /// Blips as `(t_s, h_ft, tas_kt, rocd_ftmin)` tuples.
    #[getter]
    fn blips(&self) -> Vec<(f64, f64, f64, f64)> {
        self.inner.blips.iter().map(|b| (b.t, b.h, b.tas, b.rocd)).collect()
    }

    /// Remaining time (s) and distance (nmi) to the target from each blip
    /// before it is reached.
    fn truth(&self) -> PyResult<Vec<(f64, f64)>> {
        let tr = eval::truth(&self.inner).map_err(to_py)?;
        Ok((0..tr.reached_index).map(|k| tr.remaining(&self.inner, k)).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.blips.len()
    }

    fn __repr__(&self) -> String {
        format!("Trajectory('{}', {} blips)", self.inner.id, self.inner.blips.len())
    }
}

fn wrap_all(trajs: Vec<dataio::Trajectory>) -> Vec<Trajectory> {
    trajs.into_iter().map(|inner| Trajectory { inner }).collect()
}

fn core_trajs(trajs: &[Trajectory]) -> Vec<dataio::Trajectory> {
    trajs.iter().map(|t| t.inner.clone()).collect()
}

/// Integrates the performance model from `h0` to `h_target`.
#[pyfunction]
#[pyo3(signature = (cfg, h0, h_target, phase_name, dt = BLIP_DT))]
fn integrate_trajectory(cfg: &AircraftConfig, h0: f64, h_target: f64, phase_name: &str, dt: f64) -> PyResult<Trajectory> {
    let inner = perfmodel::integrate_trajectory(&cfg.inner, h0, h_target, phase(phase_name)?, dt).map_err(to_py)?;
    Ok(Trajectory { inner })
}

/// Synthetic corpus over `days` day tags with the stock per-type counts.
#[pyfunction]
#[pyo3(signature = (days = 29, seed = 42, jitter_profile = "default", fleet = None))]
fn generate_corpus(days: usize, seed: u64, jitter_profile: &str, fleet: Option<Vec<AircraftConfig>>) -> PyResult<Vec<Trajectory>> {
    let fleet = fleet.map_or_else(perfmodel::synth_fleet, |f| core_fleet(&f));
    let jitter = CorpusJitter::profile(jitter_profile).map_err(to_py)?;
    let counts = dataio::default_type_counts();
    dataio::generate_corpus(&fleet, days, &counts, &jitter, seed).map(wrap_all).map_err(to_py)
}

#[pyfunction]
fn read_corpus(path: PathBuf) -> PyResult<Vec<Trajectory>> {
    dataio::read_trajectories(path).map(wrap_all).map_err(to_py)
}

#[pyfunction]
fn write_corpus(trajs: Vec<Trajectory>, path: PathBuf) -> PyResult<()> {
    dataio::write_trajectories(&core_trajs(&trajs), path).map_err(to_py)
}

/// Splits by day tag and returns `(train, val, test)` trajectory lists.
#[pyfunction]
#[pyo3(signature = (trajs, ratio = (0.7, 0.1, 0.2), seed = 42))]
fn split_by_day(
    trajs: Vec<Trajectory>,
    ratio: (f64, f64, f64),
    seed: u64,
) -> PyResult<(Vec<Trajectory>, Vec<Trajectory>, Vec<Trajectory>)> {
    let all = core_trajs(&trajs);
    let split = dataio::split_by_day(&all, ratio, seed).map_err(to_py)?;
    let pick = |which: &str| -> PyResult<Vec<Trajectory>> {
        Ok(split.select(&all, which).map_err(to_py)?.into_iter().map(|t| Trajectory { inner: t.clone() }).collect())
    };
    Ok((pick("train")?, pick("val")?, pick("test")?))
}

/// Discrete two-state linear surrogate with parameters
/// `[a11, a12, a21, a22, b1, b2]`.
#[pyclass(module = "adaptp", from_py_object)]
#[derive(Clone)]
struct Lssm {
    inner: lssm::Lssm,
}

#[pymethods]
impl Lssm {
    #[new]
    #[pyo3(signature = (theta, dt = BLIP_DT))]
    fn new(theta: [f64; 6], dt: f64) -> Self {
        Lssm { inner: lssm::Lssm::from_theta(&theta, dt) }
    }

    #[staticmethod]
    #[pyo3(signature = (dh, dtas, dt = BLIP_DT))]
    fn constant_rate(dh: f64, dtas: f64, dt: f64) -> Self {
        Lssm { inner: lssm::Lssm::constant_rate(dh, dtas, dt) }
    }

    #[getter]
    fn theta(&self) -> Theta {
        self.inner.theta()
    }

    fn spectral_radius(&self) -> f64 {
        self.inner.spectral_radius()
    }

    fn step(&self, h_ft: f64, tas_kt: f64) -> (f64, f64) {
        let x = self.inner.step(StateVec::new(h_ft, tas_kt));
        (x.h, x.tas)
    }

    /// States from `x0` over `n` steps, `x0` included.
    fn rollout(&self, h_ft: f64, tas_kt: f64, n: usize) -> PyResult<Vec<(f64, f64)>> {
        let xs = lssm::rollout(&self.inner, StateVec::new(h_ft, tas_kt), n).map_err(to_py)?;
        Ok(xs.into_iter().map(|x| (x.h, x.tas)).collect())
    }

    /// Scaled rollout cost against a trajectory.
    fn cost(&self, traj: &Trajectory) -> PyResult<f64> {
        lssm::fit_cost(&self.inner, &traj.inner, &ScalingMatrix::default()).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Lssm({:?})", self.inner.theta())
    }
}

/// Identifies a surrogate for one trajectory. Returns the model and its cost.
#[pyfunction]
#[pyo3(signature = (traj, seed = 42))]
fn fit_trajectory(traj: &Trajectory, seed: u64) -> PyResult<(Lssm, f64)> {
    let init = lssm::Lssm::constant_rate(0.0, 0.0, BLIP_DT);
    let cfg = SimplexConfig { seed, ..Default::default() };
    let out = optimizer::fit_trajectory(&traj.inner, &init, &ScalingMatrix::default(), &cfg).map_err(to_py)?;
    Ok((Lssm { inner: out.model }, out.final_cost))
}

/// Fitted surrogates grouped by aircraft type and phase.
#[pyclass(module = "adaptp", from_py_object)]
#[derive(Clone)]
struct PriorSet {
    inner: CorePrior,
}

#[pymethods]
impl PriorSet {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        CorePrior::load(&path).map(|inner| PriorSet { inner }).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    fn thetas(&self, aircraft_type: &str, phase_name: &str) -> PyResult<Vec<Theta>> {
        Ok(self.inner.thetas(aircraft_type, phase(phase_name)?))
    }

    /// Model count per `type/phase` group.
    fn counts(&self) -> std::collections::BTreeMap<String, usize> {
        self.inner.counts()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("PriorSet({} models)", self.inner.len())
    }
}

/// Fits every trajectory, split at the type's crossover when `fleet` knows it.
#[pyfunction]
#[pyo3(signature = (trajs, fleet = None, seed = 42))]
fn build_prior(py: Python<'_>, trajs: Vec<Trajectory>, fleet: Option<Vec<AircraftConfig>>, seed: u64) -> PyResult<PriorSet> {
    let fleet = fleet.map_or_else(perfmodel::synth_fleet, |f| core_fleet(&f));
    let data = core_trajs(&trajs);
    let cfg = SimplexConfig { seed, ..Default::default() };
    let (inner, _) = py.detach(|| optimizer::build_prior(&data, &fleet, &ScalingMatrix::default(), &cfg)).map_err(to_py)?;
    Ok(PriorSet { inner })
}

/// Particle filter over one prior group.
#[pyclass(module = "adaptp")]
struct LiuWestFilter {
    inner: CoreFilter,
}

#[pymethods]
impl LiuWestFilter {
    #[new]
    #[pyo3(signature = (prior, aircraft_type, phase_name, n_particles = 400, seed = 0))]
    fn new(prior: &PriorSet, aircraft_type: &str, phase_name: &str, n_particles: usize, seed: u64) -> PyResult<Self> {
        let cfg = FilterConfig { n_p: n_particles, seed, ..Default::default() };
        let inner = CoreFilter::from_prior(&prior.inner, aircraft_type, phase(phase_name)?, cfg).map_err(to_py)?;
        Ok(LiuWestFilter { inner })
    }

    /// Assimilates one observation and reports the step.
    fn assimilate<'py>(&mut self, py: Python<'py>, h_ft: f64, tas_kt: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.assimilate(StateVec::new(h_ft, tas_kt)).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("index", r.index)?;
        d.set_item("h_ft", r.estimate.h)?;
        d.set_item("tas_kt", r.estimate.tas)?;
        d.set_item("n_eff", r.n_eff)?;
        d.set_item("resampled", r.resampled)?;
        d.set_item("reinit", r.reinit)?;
        d.set_item("degenerate", r.degenerate)?;
        Ok(d)
    }

    /// Weighted parameter mean.
    #[getter]
    fn theta_mean(&self) -> Option<Theta> {
        self.inner.state().map(|s| s.theta_mean)
    }

    /// Ensemble time (s) and distance (nmi) to `h_target`, with spreads.
    fn predict_to<'py>(&mut self, py: Python<'py>, h_target: f64, phase_name: &str) -> PyResult<Bound<'py, PyDict>> {
        let e = self.inner.predict_to(h_target, phase(phase_name)?, false).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("time_s", e.mean_time_s)?;
        d.set_item("sd_time_s", e.sd_time_s)?;
        d.set_item("distance_nmi", e.mean_distance_nmi)?;
        d.set_item("sd_distance_nmi", e.sd_distance_nmi)?;
        d.set_item("nonterminal_frac", e.nonterminal_frac)?;
        Ok(d)
    }
}

/// Constant-rate Kalman tracker used as the benchmark predictor.
#[pyclass(module = "adaptp")]
struct KalmanTracker {
    inner: CoreKalman,
}

#[pymethods]
impl KalmanTracker {
    #[new]
    fn new(phase_name: &str) -> PyResult<Self> {
        CoreKalman::new(KfConfig::default(), phase(phase_name)?).map(|inner| KalmanTracker { inner }).map_err(to_py)
    }

    /// Assimilates one blip; returns the filtered `(h_ft, tas_kt, rocd_ftmin)`.
    fn assimilate(&mut self, t_s: f64, h_ft: f64, tas_kt: f64, rocd_ftmin: f64) -> PyResult<(f64, f64, f64)> {
        let s = self.inner.assimilate(&Blip { t: t_s, h: h_ft, tas: tas_kt, rocd: rocd_ftmin }).map_err(to_py)?;
        Ok((s.h(), s.tas(), s.rocd()))
    }

    /// Time (s) and distance (nmi) to `h_target`.
    fn predict_to(&self, h_target: f64) -> PyResult<(f64, f64)> {
        match self.inner.predict_to(h_target) {
            None => Err(PyRuntimeError::new_err("no blip assimilated yet")),
            Some(Ok(v)) => Ok(v),
            Some(Err(f)) => Err(PyRuntimeError::new_err(f.to_string())),
        }
    }
}

/// Replays a method over a trajectory set. Returns one dict per aggregate.
#[pyfunction]
#[pyo3(signature = (method, trajs, prior = None, fleet = None, seed = 42))]
fn evaluate<'py>(
    py: Python<'py>,
    method: &str,
    trajs: Vec<Trajectory>,
    prior: Option<PriorSet>,
    fleet: Option<Vec<AircraftConfig>>,
    seed: u64,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let m: Method = method.parse().map_err(to_py)?;
    let fleet = fleet.map_or_else(perfmodel::synth_fleet, |f| core_fleet(&f));
    let data = core_trajs(&trajs);
    let prior = prior.map(|p| p.inner);
    let result = py.detach(|| eval::evaluate_method(m, &data, &EvalContext::new(&fleet, prior.as_ref()), seed)).map_err(to_py)?;
    result
        .aggregates
        .iter()
        .map(|a| {
            let d = PyDict::new(py);
            d.set_item("method", a.method.as_str())?;
            d.set_item("aircraft_type", &a.aircraft_type)?;
            d.set_item("phase", a.phase.as_str())?;
            d.set_item("mae_time_s", a.mae_time_s)?;
            d.set_item("mae_distance_nmi", a.mae_distance_nmi)?;
            d.set_item("failure_rate", a.failure_rate)?;
            d.set_item("n_points", a.n_points)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn adaptp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BLIP_DT", BLIP_DT)?;
    m.add("MIN_ROCD_FPM", adaptp_core::MIN_ROCD_FPM)?;
    m.add_function(wrap_pyfunction!(isa, m)?)?;
    m.add_function(wrap_pyfunction!(tas_from_cas, m)?)?;
    m.add_function(wrap_pyfunction!(cas_from_tas, m)?)?;
    m.add_function(wrap_pyfunction!(mach_from_tas, m)?)?;
    m.add_function(wrap_pyfunction!(tas_from_mach, m)?)?;
    m.add_function(wrap_pyfunction!(crossover_altitude, m)?)?;
    m.add_function(wrap_pyfunction!(synth_fleet, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(read_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(split_by_day, m)?)?;
    m.add_function(wrap_pyfunction!(fit_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(build_prior, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_class::<AircraftConfig>()?;
    m.add_class::<Trajectory>()?;
    m.add_class::<Lssm>()?;
    m.add_class::<PriorSet>()?;
    m.add_class::<LiuWestFilter>()?;
    m.add_class::<KalmanTracker>()?;
    Ok(())
}
