//! Acceptance suite. Runs every criterion in order and prints one line each:
//!
//!     cargo test --release --test acceptance
//!     cargo test --release --test acceptance -- 2 8     # only criteria 2 and 8
//!
//! Exits nonzero if any selected criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use dpmf::design::Design;
use dpmf::diagnostics::{ks_critical, ks_statistic, normal_cdf};
use dpmf::harness::{fit_games, rolling_eval, simulate, Dataset, ExperimentConfig, SimulationConfig, Variant};
use dpmf::kernels::{
    ard_corr, build_cov_matrix, factor_with_jitter, periodic_corr, InputSpace, KernelHyperparams, SeasonCalendar,
    SideInfoPoint,
};
use dpmf::latent::{unwhiten, whiten, ModelShape};
use dpmf::likelihood::{GameObservation, LikelihoodParams};
use dpmf::prediction::{expert_scores, metrics, ExpertLine, MixtureComponent, PredictiveMixture};
use dpmf::samplers::geweke::{compare, marginal_conditional, statistic_names, successive_conditional, GewekeSetup};
use dpmf::samplers::{ess_step, Priors, SamplerConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn pt(c: &[f64]) -> SideInfoPoint {
    SideInfoPoint::new(c.to_vec()).unwrap()
}

// ---------------------------------------------------------------- 1

fn kernels() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut check = |got: f64, want: f64| worst = worst.max((got - want).abs());

    let ard = |ls: &[f64]| KernelHyperparams::ard(ls.to_vec());
    check(ard_corr(&pt(&[0.3, -1.0]), &pt(&[0.3, -1.0]), &ard(&[1.0, 2.0])).unwrap(), 1.0);
    check(ard_corr(&pt(&[0.0, 0.0]), &pt(&[1.0, 2.0]), &ard(&[1.0, 2.0])).unwrap(), (-1.0f64).exp());
    check(ard_corr(&pt(&[2.0]), &pt(&[3.0]), &ard(&[1.0])).unwrap(), (-0.5f64).exp());

    let per = |ls: f64, p: f64| KernelHyperparams::periodic(ls, p);
    check(periodic_corr(1.7, 1.7, &per(1.0, 52.0)).unwrap(), 1.0);
    check(periodic_corr(3.0, 3.0 + 52.0, &per(0.7, 52.0)).unwrap(), 1.0);
    check(periodic_corr(0.0, PI, &per(1.0, 2.0 * PI)).unwrap(), (-2.0f64).exp());

    let space = InputSpace::new(true, false, SeasonCalendar::default());
    let pts: Vec<_> = (0..3).map(|i| pt(&[i as f64])).collect();
    let c = build_cov_matrix(&pts, &ard(&[1.0]), &space).unwrap().values;
    check(c[(0, 1)], (-0.5f64).exp());
    check(c[(1, 2)], (-0.5f64).exp());
    check(c[(0, 2)], (-2.0f64).exp());
    check(c[(2, 0)], (-2.0f64).exp());
    let hand_ok = worst <= 1e-12;

    // random point sets over every kernel form, duplicates included
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cal = SeasonCalendar::new(vec![(0.0, 20.0), (48.0, 68.0), (96.0, 116.0)]).unwrap();
    let mut min_eig = f64::INFINITY;
    for set in 0..50 {
        let n = rng.random_range(2..=60);
        let (space, h) = match set % 4 {
            0 => (InputSpace::new(true, true, cal.clone()), KernelHyperparams::ard(vec![rng.random_range(0.5..30.0), rng.random_range(0.1..3.0)])),
            1 => (
                InputSpace::new(true, true, cal.clone()),
                KernelHyperparams::ard_with_season_warp(vec![rng.random_range(0.5..30.0), rng.random_range(0.1..3.0)], rng.random_range(0.1..40.0)),
            ),
            2 => (InputSpace::new(true, false, cal.clone()), KernelHyperparams::periodic(rng.random_range(0.2..5.0), 52.0)),
            _ => (InputSpace::new(true, false, cal.clone()), KernelHyperparams::ard(vec![rng.random_range(0.5..100.0)])),
        };
        let points: Vec<_> = (0..n)
            .map(|_| {
                let s = rng.random_range(0..3) as f64 * 48.0;
                space.point(s + rng.random_range(0..=20) as f64, rng.random::<bool>())
            })
            .collect();
        let m = build_cov_matrix(&points, &h, &space).unwrap().values;
        min_eig = min_eig.min(SymmetricEigen::new(m).eigenvalues.min());
    }
    outcome(
        hand_ok && min_eig >= -1e-10,
        format!("max hand-value error {worst:.1e}, min eigenvalue over 50 sets {min_eig:.2e}"),
    )
}

// ---------------------------------------------------------------- 2

fn geweke() -> Outcome {
    let cal = SeasonCalendar::new(vec![(0.0, 3.0), (10.0, 12.0)]).unwrap();
    let space = InputSpace::new(true, true, cal);
    let games = [(0, 1, 0.0), (1, 2, 2.0), (2, 0, 3.0), (0, 2, 10.0), (1, 0, 12.0)]
        .iter()
        .map(|&(m, n, w)| GameObservation {
            row_member: m,
            col_member: n,
            side_info: space.point(w, true),
            score_mn: 0.0,
            score_nm: 0.0,
        })
        .collect();
    let design = Design::new(ModelShape::new(3, 3, 2, 2).unwrap(), space, games).unwrap();
    let setup = GewekeSetup {
        design,
        priors: Priors::default(),
        config: SamplerConfig::default(),
        template: KernelHyperparams::ard_with_season_warp(vec![5.0, 1.0], 4.0),
    };
    let n = 20_000;
    let mc = marginal_conditional(&setup, n, 1).unwrap();
    let sc = successive_conditional(&setup, n, 1, 4).unwrap();
    let z = compare(&mc, &sc, 50);
    let names = statistic_names(&setup);
    let gated = |name: &str| {
        name.starts_with("y[") || name == "sigma" || name == "rho" || name.contains("LogLengthScale") || name.contains("SeasonGap")
    };
    let mut worst = (String::new(), 0.0f64);
    let mut worst_other: f64 = 0.0;
    for (name, &z) in names.iter().zip(&z) {
        if gated(name) {
            if !(z.abs() <= worst.1) {
                worst = (name.clone(), z.abs());
            }
        } else {
            worst_other = worst_other.max(z.abs());
        }
    }
    let gated_count = names.iter().filter(|n| gated(n)).count();
    outcome(
        worst.1 <= 4.0,
        format!(
            "{gated_count} gated statistics, max |z| {:.2} ({}); other statistics max |z| {worst_other:.2}",
            worst.1, worst.0
        ),
    )
}

// ---------------------------------------------------------------- 3

fn ess_prior() -> Outcome {
    let space = InputSpace::new(true, false, SeasonCalendar::default());
    let points: Vec<_> = (0..20).map(|i| pt(&[i as f64 * 0.7])).collect();
    let (chol, _) = factor_with_jitter(&build_cov_matrix(&points, &KernelHyperparams::ard(vec![2.0]), &space).unwrap().values).unwrap();
    let mean = DVector::from_fn(20, |i, _| (i as f64 * 0.3).sin());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut f = mean.clone();
    let (draws, thin) = (100_000, 10);
    let mut cols: Vec<Vec<f64>> = vec![Vec::with_capacity(draws); 20];
    for _ in 0..200 {
        f = ess_step(&f, &mean, &chol, |_| 0.0, &mut rng).unwrap().state;
    }
    for _ in 0..draws {
        for _ in 0..thin {
            f = ess_step(&f, &mean, &chol, |_| 0.0, &mut rng).unwrap().state;
        }
        for (c, v) in cols.iter_mut().zip(f.iter()) {
            c.push(*v);
        }
    }
    let crit = ks_critical(draws, 0.01);
    let worst = cols
        .iter()
        .enumerate()
        .map(|(i, c)| ks_statistic(c, |x| normal_cdf(x - mean[i])))
        .fold(0.0, f64::max);
    outcome(
        worst < crit,
        format!("max KS statistic over 20 marginals {worst:.5}, 0.01 critical value {crit:.5}"),
    )
}

// ---------------------------------------------------------------- 4

fn whitening() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=200);
        let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
        let spd = &a * a.transpose() + DMatrix::identity(n, n) * 0.05;
        let (chol, jitter) = factor_with_jitter(&spd).unwrap();
        assert_eq!(jitter, 0.0);
        let mean = DVector::from_fn(n, |_, _| rng.random_range(-50.0..50.0));
        let f = DVector::from_fn(n, |_, _| rng.random_range(-50.0..50.0));
        let nu = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f_back = unwhiten(&whiten(&f, &mean, &chol).unwrap(), &mean, &chol).unwrap();
        let nu_back = whiten(&unwhiten(&nu, &mean, &chol).unwrap(), &mean, &chol).unwrap();
        worst = worst.max((f_back - &f).amax()).max((nu_back - &nu).amax());
    }
    outcome(worst < 1e-8, format!("max round-trip error over 1000 systems {worst:.2e}"))
}

// ---------------------------------------------------------------- 5

fn recovery() -> Outcome {
    let sim = SimulationConfig {
        variant: Variant::DpmfTh,
        teams: 8,
        features: 2,
        seasons: 3,
        weeks_per_season: 6,
        rounds_per_week: 4,
        sigma: 10.0,
        rho: 0.4,
        ..Default::default()
    };
    let mut good = 0;
    let mut lines = Vec::new();
    for seed in 1..=10u64 {
        let ds = Dataset::from_records(simulate(&sim, seed).unwrap().records).unwrap();
        let cfg = ExperimentConfig {
            variant: Variant::DpmfTh,
            features: 2,
            chains: 1,
            thin: 1,
            seed,
            ..Default::default()
        };
        let ids: Vec<usize> = (0..ds.len()).collect();
        let s = fit_games(&cfg, &ds, &ids, 3000, 1000, &[]).unwrap().summary(&cfg, 3000, 1000);
        let ok = (s.rho_mean - 0.4).abs() <= 0.1 && (s.sigma_mean - 10.0).abs() <= 1.0;
        good += ok as usize;
        lines.push(format!("{seed}:{:.2}/{:.2}{}", s.sigma_mean, s.rho_mean, if ok { "" } else { "*" }));
    }
    outcome(good >= 8, format!("{good}/10 seeds recovered (seed:sigma/rho) {}", lines.join(" ")))
}

// ---------------------------------------------------------------- 6

fn side_information() -> Outcome {
    let sim = SimulationConfig {
        variant: Variant::DpmfTh,
        teams: 8,
        features: 2,
        seasons: 2,
        weeks_per_season: 16,
        rounds_per_week: 2,
        u_scale: 3.0,
        v_scale: 0.15,
        mean_v: 3.5,
        time_length_scale: 6.0,
        home_length_scale: 0.3,
        ..Default::default()
    };
    let mut good = 0;
    let mut lines = Vec::new();
    for seed in 1..=10u64 {
        let ds = Dataset::from_records(simulate(&sim, seed).unwrap().records).unwrap();
        let lp: Vec<f64> = [Variant::Pmf, Variant::DpmfT, Variant::DpmfTh]
            .into_iter()
            .map(|variant| {
                let cfg = ExperimentConfig {
                    variant,
                    features: 2,
                    chains: 2,
                    cold_burnin: 150,
                    warm_burnin: 30,
                    thin: 2,
                    samples_per_chain: 20,
                    block_weeks: 4,
                    history_seasons: 1,
                    seed,
                    ..Default::default()
                };
                rolling_eval(&cfg, &ds).unwrap().overall.mean_logprob
            })
            .collect();
        let ok = lp[2] > lp[1] && lp[1] > lp[0];
        good += ok as usize;
        lines.push(format!("{seed}:{:.3}/{:.3}/{:.3}{}", lp[0], lp[1], lp[2], if ok { "" } else { "*" }));
    }
    outcome(
        good >= 8,
        format!("{good}/10 seeds ordered (seed:PMF/DPMF_t/DPMF_th) {}", lines.join(" ")),
    )
}

// ---------------------------------------------------------------- 7

fn season_gap() -> Outcome {
    let sim = SimulationConfig {
        variant: Variant::DpmfT,
        teams: 8,
        features: 1,
        seasons: 4,
        weeks_per_season: 10,
        gap_weeks: 28,
        rounds_per_week: 2,
        sigma: 3.0,
        u_scale: 20.0,
        time_length_scale: 6.0,
        season_gap: 4.0,
        ..Default::default()
    };
    let mut all_ok = true;
    let mut lines = Vec::new();
    for seed in 1..=3u64 {
        let ds = Dataset::from_records(simulate(&sim, seed).unwrap().records).unwrap();
        assert_eq!(ds.calendar.gaps(), vec![28.0; 3]);
        let mut cfg = ExperimentConfig {
            variant: Variant::DpmfT,
            features: 1,
            chains: 1,
            thin: 1,
            seed,
            ..Default::default()
        };
        cfg.kernel.time_length_scale = 6.0;
        let ids: Vec<usize> = (0..ds.len()).collect();
        let fit = fit_games(&cfg, &ds, &ids, 1500, 500, &[]).unwrap();
        let col = fit.names.iter().position(|n| n == "gap").expect("gap column");
        let mut g: Vec<f64> = fit.trace.iter().map(|r| r.hypers[col]).collect();
        g.sort_by(f64::total_cmp);
        let median = g[g.len() / 2];
        let below = g.iter().filter(|&&x| x < 28.0).count() as f64 / g.len() as f64;
        let ok = (1.0..=12.0).contains(&median) && below >= 0.95;
        all_ok &= ok;
        lines.push(format!("seed {seed}: median g {median:.2}, P(g<28) {below:.3}"));
    }
    outcome(all_ok, lines.join("; "))
}

// ---------------------------------------------------------------- 8

/// Standard normal CDF by composite Simpson integration of the density.
fn phi_oracle(x: f64) -> f64 {
    let (a, n) = (-40.0, 200_000);
    if x <= a {
        return 0.0;
    }
    let h = (x - a) / n as f64;
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    let mut s = pdf(a) + pdf(x);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * pdf(a + h * i as f64);
    }
    s * h / 3.0
}

fn metric_plumbing() -> Outcome {
    let expert = expert_scores(&ExpertLine::new(210.5, -4.5).unwrap());
    let expert_ok = expert == (103.0, 107.5);

    let comp = |a: f64, b: f64, s: f64, r: f64| MixtureComponent {
        y_mn: a,
        y_nm: b,
        lik: LikelihoodParams::new(s, r).unwrap(),
    };
    let preds = vec![
        vec![comp(100.0, 95.0, 10.0, 0.4), comp(104.0, 97.0, 11.0, 0.3)],
        vec![comp(90.0, 99.0, 9.0, 0.5)],
        vec![comp(101.0, 100.0, 10.0, 0.0), comp(96.0, 102.0, 12.0, -0.2), comp(99.0, 98.0, 8.0, 0.6)],
    ];
    let truths = [(110.0, 90.0), (95.0, 92.0), (99.0, 99.0)];
    let obs: Vec<GameObservation> = truths
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| GameObservation {
            row_member: i,
            col_member: i + 1,
            side_info: pt(&[0.0]),
            score_mn: a,
            score_nm: b,
        })
        .collect();
    let mixes: Vec<_> = preds.iter().map(|c| PredictiveMixture::new(c.clone()).unwrap()).collect();
    let got = metrics(&mixes, &obs).unwrap();

    // brute force
    let (mut lp, mut wrong, mut sq) = (0.0, 0.0, 0.0);
    for (cs, &(za, zb)) in preds.iter().zip(&truths) {
        let k = cs.len() as f64;
        let dens: f64 = cs
            .iter()
            .map(|c| {
                let (s, r) = (c.lik.sigma, c.lik.rho);
                let (da, db) = ((za - c.y_mn) / s, (zb - c.y_nm) / s);
                let q = (da * da - 2.0 * r * da * db + db * db) / (1.0 - r * r);
                (-0.5 * q).exp() / (2.0 * PI * s * s * (1.0 - r * r).sqrt())
            })
            .sum::<f64>()
            / k;
        lp += dens.ln();
        // difference of the pair is normal with variance 2 s^2 (1 - r)
        let p_row: f64 = cs
            .iter()
            .map(|c| phi_oracle((c.y_mn - c.y_nm) / (c.lik.sigma * (2.0 * (1.0 - c.lik.rho)).sqrt())))
            .sum::<f64>()
            / k;
        let called_right = (p_row > 0.5 && za > zb) || (p_row < 0.5 && zb > za);
        wrong += if called_right { 0.0 } else { 1.0 };
        let ma = cs.iter().map(|c| c.y_mn).sum::<f64>() / k;
        let mb = cs.iter().map(|c| c.y_nm).sum::<f64>() / k;
        sq += (ma - za).powi(2) + (mb - zb).powi(2);
    }
    let want = (lp / 3.0, 100.0 * wrong / 3.0, (sq / 6.0).sqrt());
    let err = (got.mean_logprob - want.0)
        .abs()
        .max((got.winner_error_pct - want.1).abs())
        .max((got.rmse - want.2).abs());
    outcome(
        expert_ok && err <= 1e-10,
        format!(
            "expert_scores(210.5, -4.5) = {expert:?}; metrics ({:.6}, {:.2}%, {:.6}) vs oracle, max error {err:.1e}",
            got.mean_logprob, got.winner_error_pct, got.rmse
        ),
    )
}

// ---------------------------------------------------------------- 9

fn real_data() -> Option<Outcome> {
    None
}

// ----------------------------------------------------------------

type Criterion = (u32, &'static str, Duration, fn() -> Option<Outcome>);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "kernel correctness", Duration::from_secs(5), || Some(kernels())),
        (2, "Geweke sampler validity", Duration::from_secs(600), || Some(geweke())),
        (3, "ESS prior recovery", Duration::from_secs(120), || Some(ess_prior())),
        (4, "whitening invertibility", Duration::from_secs(60), || Some(whitening())),
        (5, "parameter recovery", Duration::from_secs(1800), || Some(recovery())),
        (6, "side-information ordering", Duration::from_secs(3600), || Some(side_information())),
        (7, "season-gap inference", Duration::from_secs(1200), || Some(season_gap())),
        (8, "metric plumbing", Duration::from_secs(1), || Some(metric_plumbing())),
        (9, "real-data spot check", Duration::ZERO, real_data),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let result = run();
        let took = t.elapsed();
        match result {
            None => println!("criterion {id} SKIP {name}: original game data not available (non-gating)"),
            Some(o) => {
                let in_time = took <= budget;
                let pass = o.pass && in_time;
                failed += (!pass) as usize;
                println!(
                    "criterion {id} {} {name}: {} [{:.1}s, budget {}s{}]",
                    if pass { "PASS" } else { "FAIL" },
                    o.detail,
                    took.as_secs_f64(),
                    budget.as_secs(),
                    if in_time { "" } else { ", over budget" }
                );
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
