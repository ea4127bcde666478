//! Python bindings: kernels, the likelihood, predictive mixtures and metrics,
//! plus the harness commands. Configurations are passed as TOML text and
//! structured results come back as plain dicts.

use std::path::PathBuf;

use chrono::NaiveDate;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyAny;

use dpmf::harness::{self, ExperimentConfig};
use dpmf::kernels::{KernelHyperparams, SeasonCalendar, SideInfoPoint};
use dpmf::likelihood::{GameObservation, LikelihoodParams};
use dpmf::prediction::{self, ExpertLine, MixtureComponent, PredictiveMixture};

create_exception!(dpmf_py, DpmfError, PyException);

fn err(e: dpmf::DpmfError) -> PyErr {
    DpmfError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(value).map_err(|e| DpmfError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn point(c: Vec<f64>) -> PyResult<SideInfoPoint> {
    SideInfoPoint::new(c).map_err(err)
}

/// Squared-exponential correlation with one length scale per coordinate.
#[pyfunction]
fn ard_corr(x: Vec<f64>, x2: Vec<f64>, length_scales: Vec<f64>) -> PyResult<f64> {
    dpmf::kernels::ard_corr(&point(x)?, &point(x2)?, &KernelHyperparams::ard(length_scales)).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (x, x2, length_scale, period = 52.0))]
fn periodic_corr(x: f64, x2: f64, length_scale: f64, period: f64) -> PyResult<f64> {
    dpmf::kernels::periodic_corr(x, x2, &KernelHyperparams::periodic(length_scale, period)).map_err(err)
}

/// Maps a calendar week to effective weeks, each off-season shrunk to `g`.
#[pyfunction]
fn warp_time(t: f64, calendar: Vec<(f64, f64)>, g: f64) -> PyResult<f64> {
    let cal = SeasonCalendar::new(calendar).map_err(err)?;
    dpmf::kernels::warp_time(t, &cal, g).map_err(err)
}

#[pyfunction]
fn softplus(r: f64) -> f64 {
    dpmf::latent::softplus(r)
}

/// Bivariate normal log density of the observed pair around the latent pair.
#[pyfunction]
fn loglik_pair(y_mn: f64, y_nm: f64, z_mn: f64, z_nm: f64, sigma: f64, rho: f64) -> PyResult<f64> {
    let p = LikelihoodParams::new(sigma, rho).map_err(err)?;
    let obs = GameObservation {
        row_member: 0,
        col_member: 1,
        side_info: point(vec![0.0])?,
        score_mn: z_mn,
        score_nm: z_nm,
    };
    dpmf::likelihood::loglik_pair(y_mn, y_nm, &obs, &p).map_err(err)
}

/// `(away, home)` scores implied by an over/under total and a home spread.
#[pyfunction]
fn expert_scores(over_under: f64, home_spread: f64) -> PyResult<(f64, f64)> {
    Ok(prediction::expert_scores(&ExpertLine::new(over_under, home_spread).map_err(err)?))
}

/// Equal-weight mixture of bivariate normals; components are `(y_mn, y_nm, sigma, rho)`.
#[pyclass(module = "dpmf_py", name = "Mixture", frozen)]
struct Mixture {
    inner: PredictiveMixture,
}

#[pymethods]
impl Mixture {
    #[new]
    fn new(components: Vec<(f64, f64, f64, f64)>) -> PyResult<Self> {
        let cs = components
            .into_iter()
            .map(|(a, b, s, r)| {
                Ok(MixtureComponent {
                    y_mn: a,
                    y_nm: b,
                    lik: LikelihoodParams::new(s, r).map_err(err)?,
                })
            })
            .collect::<PyResult<Vec<_>>>()?;
        Ok(Self {
            inner: PredictiveMixture::new(cs).map_err(err)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn mean(&self) -> (f64, f64) {
        self.inner.mean()
    }

    fn log_density(&self, z_mn: f64, z_nm: f64) -> f64 {
        self.inner.log_density(z_mn, z_nm)
    }

    /// Probability that the row member outscores the column member.
    fn winner_prob(&self) -> f64 {
        prediction::winner_prob(&self.inner)
    }

    /// The same mixture with rows and columns exchanged.
    fn swapped(&self) -> Self {
        Self {
            inner: self.inner.swapped(),
        }
    }
}

/// Mean log probability, winner error (%) and RMSE against observed `(z_mn, z_nm)` pairs.
#[pyfunction]
fn metrics<'py>(py: Python<'py>, mixtures: Vec<PyRef<'py, Mixture>>, truths: Vec<(f64, f64)>) -> PyResult<Bound<'py, PyAny>> {
    let preds: Vec<PredictiveMixture> = mixtures.iter().map(|m| m.inner.clone()).collect();
    let obs = truths
        .iter()
        .map(|&(a, b)| {
            Ok(GameObservation {
                row_member: 0,
                col_member: 1,
                side_info: point(vec![0.0])?,
                score_mn: a,
                score_nm: b,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    to_py(py, &prediction::metrics(&preds, &obs).map_err(err)?)
}

fn config(toml: Option<&str>, seed: Option<u64>, data: Option<PathBuf>) -> PyResult<ExperimentConfig> {
    let mut cfg = match toml {
        Some(s) => ExperimentConfig::from_toml_str(s).map_err(err)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_seed_overrides(seed).map_err(err)?;
    if data.is_some() {
        cfg.data = data;
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// The default experiment configuration as TOML.
#[pyfunction]
fn default_config() -> PyResult<String> {
    ExperimentConfig::default().to_toml_string().map_err(err)
}

/// Simulates games from the `[simulation]` table; writes `games.csv` and
/// `truth.json` into `out` and returns the game records.
#[pyfunction]
#[pyo3(signature = (out, config = None, seed = None))]
fn simulate<'py>(py: Python<'py>, out: PathBuf, config: Option<&str>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = self::config(config, seed, None)?;
    let sim = py.detach(|| harness::cmd_simulate(&cfg, &out)).map_err(err)?;
    to_py(py, &sim.records)
}

/// Reads a game file and returns its records.
#[pyfunction]
fn ingest<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let ds = harness::ingest(&path).map_err(err)?;
    to_py(py, &ds.records)
}

/// Fits all games in `data`; writes `fit_summary.json` and `trace.csv` into `out`.
#[pyfunction]
#[pyo3(signature = (data, out, config = None, seed = None))]
fn fit<'py>(py: Python<'py>, data: PathBuf, out: PathBuf, config: Option<&str>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = self::config(config, seed, Some(data))?;
    let s = py.detach(|| harness::cmd_fit(&cfg, &out, None, None)).map_err(err)?;
    to_py(py, &s)
}

/// Rolling evaluation; writes the result files into `out` and returns the overall
/// and per-season metrics.
#[pyfunction]
#[pyo3(signature = (data, out, config = None, seed = None))]
fn rolling_eval<'py>(py: Python<'py>, data: PathBuf, out: PathBuf, config: Option<&str>, seed: Option<u64>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = self::config(config, seed, Some(data))?;
    let r = py.detach(|| harness::cmd_rolling_eval(&cfg, &out)).map_err(err)?;
    let v = serde_json::json!({
        "variant": r.variant,
        "features": r.features,
        "overall": r.overall,
        "seasons": r.seasons,
        "expert_overall": r.expert_overall,
        "skipped_blocks": r.skipped_blocks,
    });
    to_py(py, &v)
}

/// Predicts `home` against `away` on `date` (`YYYY-MM-DD`) from earlier games.
#[pyfunction]
#[pyo3(signature = (data, out, home, away, date, config = None, seed = None))]
#[allow(clippy::too_many_arguments)]
fn predict<'py>(
    py: Python<'py>,
    data: PathBuf,
    out: PathBuf,
    home: &str,
    away: &str,
    date: &str,
    config: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = self::config(config, seed, Some(data))?;
    let date = NaiveDate::parse_from_str(date, "%Y-%m-%d").map_err(|e| DpmfError::new_err(format!("date {date:?}: {e}")))?;
    let p = py.detach(|| harness::cmd_predict(&cfg, &out, home, away, date)).map_err(err)?;
    to_py(py, &p)
}

#[pymodule]
pub fn dpmf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DpmfError", m.py().get_type::<DpmfError>())?;
    m.add_class::<Mixture>()?;
    m.add_function(wrap_pyfunction!(ard_corr, m)?)?;
    m.add_function(wrap_pyfunction!(periodic_corr, m)?)?;
    m.add_function(wrap_pyfunction!(warp_time, m)?)?;
    m.add_function(wrap_pyfunction!(softplus, m)?)?;
    m.add_function(wrap_pyfunction!(loglik_pair, m)?)?;
    m.add_function(wrap_pyfunction!(expert_scores, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(rolling_eval, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    Ok(())
}
