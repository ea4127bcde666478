"""Smoke test for the dpmf_py extension.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml --features extension-module`
(see the README for a cargo-only route), then run `python crates/python/python/smoke_test.py`.
"""

import math
import os
import tempfile

import dpmf_py as d

CONFIG = """
variant = "DPMF_th"
features = 2
chains = 2
cold_burnin = 30
warm_burnin = 10
thin = 1
samples_per_chain = 10
block_weeks = 4
history_seasons = 1
fit_sweeps = 60
fit_burnin = 30

[simulation]
teams = 6
seasons = 2
weeks_per_season = 8
expert_lines = true
"""


def main():
    assert abs(d.ard_corr([0.0, 0.0], [1.0, 2.0], [1.0, 2.0]) - math.exp(-1)) < 1e-12
    assert abs(d.periodic_corr(0.0, math.pi, 1.0, 2 * math.pi) - math.exp(-2)) < 1e-12
    assert d.expert_scores(210.5, -4.5) == (103.0, 107.5)

    mix = d.Mixture([(100.0, 95.0, 10.0, 0.4), (104.0, 97.0, 11.0, 0.3)])
    print("mixture mean", mix.mean(), "P(row wins)", round(mix.winner_prob(), 4))
    print("metrics", d.metrics([mix], [(110.0, 90.0)]))

    with tempfile.TemporaryDirectory() as tmp:
        recs = d.simulate(os.path.join(tmp, "sim"), CONFIG, seed=7)
        games = os.path.join(tmp, "sim", "games.csv")
        assert d.ingest(games) == recs
        print(len(recs), "simulated games")

        summary = d.fit(games, os.path.join(tmp, "fit"), CONFIG, seed=7)
        print("fit: sigma %.2f rho %.2f" % (summary["sigma_mean"], summary["rho_mean"]))

        report = d.rolling_eval(games, os.path.join(tmp, "eval"), CONFIG, seed=7)
        print("rolling eval overall", report["overall"])
        for name in ("metrics.csv", "blocks.csv", "predictions.csv"):
            assert os.path.exists(os.path.join(tmp, "eval", name)), name

        last = recs[-1]
        p = d.predict(games, os.path.join(tmp, "pred"), last["home_team"], last["away_team"], last["date"], CONFIG)
        print("prediction", p)
        assert 0.0 <= p["p_home_win"] <= 1.0

    print("smoke test passed")


if __name__ == "__main__":
    main()
