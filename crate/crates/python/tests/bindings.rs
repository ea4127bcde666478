use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn with_module<F: for<'py> FnOnce(Python<'py>, &Bound<'py, PyDict>)>(f: F) {
    Python::initialize();
    Python::attach(|py| {
        let m = wrap_pymodule!(dpmf_py::dpmf_py)(py);
        let globals = PyDict::new(py);
        globals.set_item("dpmf_py", m).unwrap();
        f(py, &globals);
    });
}

fn run(py: Python<'_>, globals: &Bound<'_, PyDict>, code: &str) {
    let code = std::ffi::CString::new(code).unwrap();
    if let Err(e) = py.run(&code, Some(globals), None) {
        e.print(py);
        panic!("python snippet failed");
    }
}

#[test]
fn scalar_functions() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
import math
d = dpmf_py
assert abs(d.ard_corr([0.0, 0.0], [1.0, 2.0], [1.0, 2.0]) - math.exp(-1)) < 1e-12
assert abs(d.periodic_corr(0.0, math.pi, 1.0, 2 * math.pi) - math.exp(-2)) < 1e-12
assert d.warp_time(32.0, [(0.0, 4.0), (32.0, 36.0)], 4.0) == 8.0
assert d.expert_scores(210.5, -4.5) == (103.0, 107.5)
assert abs(d.softplus(0.0) - math.log(2)) < 1e-15
try:
    d.ard_corr([0.0], [1.0, 2.0], [1.0])
    raise AssertionError("expected an error")
except d.DpmfError:
    pass
"#,
        );
    });
}

#[test]
fn mixture_and_metrics() {
    with_module(|py, g| {
        run(
            py,
            g,
            r#"
d = dpmf_py
m = d.Mixture([(100.0, 95.0, 10.0, 0.4), (104.0, 97.0, 11.0, 0.3)])
assert len(m) == 2
assert m.mean() == (102.0, 96.0)
assert m.winner_prob() > 0.5
assert abs(m.swapped().winner_prob() - (1 - m.winner_prob())) < 1e-12
r = d.metrics([m], [(110.0, 90.0)])
assert r["games"] == 1 and r["winner_error_pct"] == 0.0
assert abs(r["mean_logprob"] - m.log_density(110.0, 90.0)) < 1e-12
"#,
        );
    });
}

#[test]
fn harness_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_str().unwrap().to_string();
    with_module(|py, g| {
        g.set_item("tmp", &path).unwrap();
        run(
            py,
            g,
            r#"
import os
d = dpmf_py
cfg = """
variant = "DPMF_t"
features = 1
chains = 1
fit_sweeps = 20
fit_burnin = 10
thin = 1
[simulation]
teams = 4
seasons = 1
weeks_per_season = 4
"""
recs = d.simulate(os.path.join(tmp, "sim"), cfg, seed=3)
games = os.path.join(tmp, "sim", "games.csv")
assert d.ingest(games) == recs
s = d.fit(games, os.path.join(tmp, "fit"), cfg, seed=3)
assert s["stored"] == 10 and s["games"] == len(recs)
p = d.predict(games, os.path.join(tmp, "pred"), recs[0]["home_team"], recs[0]["away_team"], recs[-1]["date"], cfg)
assert 0.0 <= p["p_home_win"] <= 1.0
assert os.path.exists(os.path.join(tmp, "pred", "prediction.json"))
"#,
        );
    });
}
