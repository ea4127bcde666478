//! Synthetic seasons drawn from the full generative model.

use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpmfError, Result};
use crate::harness::config::{SimulationConfig, Variant};
use crate::harness::data::{write_records, GameRecord};
use crate::kernels::{KernelHyperparams, SeasonCalendar};
use crate::latent::{generate_synthetic, softplus, CrossCov, MeanVec, ModelParams, ModelShape};
use crate::likelihood::LikelihoodParams;

/// Latent truth written next to simulated games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTruth {
    pub variant: Variant,
    pub teams: Vec<String>,
    pub sigma: f64,
    pub rho: f64,
    pub season_gap: f64,
    pub calendar: Vec<(f64, f64)>,
    pub hypers_u: Vec<KernelHyperparams>,
    pub hypers_v: Vec<KernelHyperparams>,
    pub chol_u: Vec<Vec<f64>>,
    pub chol_v: Vec<Vec<f64>>,
    pub mean_u: Vec<f64>,
    pub mean_v: Vec<f64>,
    /// Latent mean scores per game as (home, away).
    pub y: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub records: Vec<GameRecord>,
    pub truth: SimulationTruth,
}

/// `E[softplus(v)]` for `v ~ N(mean, sd^2)` by Simpson's rule over +-10 sd.
pub fn expected_softplus(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return softplus(mean);
    }
    let n = 4000;
    let (a, b) = (-10.0, 10.0);
    let h = (b - a) / n as f64;
    let f = |z: f64| softplus(mean + sd * z) * (-0.5 * z * z).exp();
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0 / (2.0 * std::f64::consts::PI).sqrt()
}

fn team_names(n: usize) -> Vec<String> {
    let width = n.to_string().len().max(2);
    (1..=n).map(|i| format!("T{i:0width$}")).collect()
}

/// First week of each season and the calendar it implies.
pub fn season_starts(sim: &SimulationConfig) -> Vec<usize> {
    let stride = sim.weeks_per_season - 1 + sim.gap_weeks.max(1);
    (0..sim.seasons).map(|s| s * stride).collect()
}

/// Random weekly pairings: `(week, day, season, home, away)`.
fn schedule<R: Rng + ?Sized>(sim: &SimulationConfig, rng: &mut R) -> Vec<(usize, usize, usize, usize, usize)> {
    let mut out = Vec::new();
    let mut order: Vec<usize> = (0..sim.teams).collect();
    for (s, start) in season_starts(sim).into_iter().enumerate() {
        for w in 0..sim.weeks_per_season {
            for r in 0..sim.rounds_per_week {
                order.shuffle(rng);
                for pair in order.chunks_exact(2) {
                    let (a, b) = if rng.random::<bool>() { (pair[0], pair[1]) } else { (pair[1], pair[0]) };
                    out.push((start + w, r.min(6), s, a, b));
                }
            }
        }
    }
    out
}

fn params_for(sim: &SimulationConfig) -> Result<ModelParams> {
    let k = sim.features;
    let h = match sim.variant {
        Variant::Pmf => KernelHyperparams::ard(vec![1.0]),
        Variant::DpmfH => KernelHyperparams::ard(vec![sim.home_length_scale]),
        Variant::DpmfT => KernelHyperparams::ard_with_season_warp(vec![sim.time_length_scale], sim.season_gap),
        Variant::DpmfTh => KernelHyperparams::ard_with_season_warp(
            vec![sim.time_length_scale, sim.home_length_scale],
            sim.season_gap,
        ),
    };
    h.validate()?;
    let ev = expected_softplus(sim.mean_v, sim.v_scale);
    Ok(ModelParams {
        hypers_u: vec![h.clone(); k],
        hypers_v: vec![h; k],
        cc_u: CrossCov::scaled_identity(k, sim.u_scale)?,
        cc_v: CrossCov::scaled_identity(k, sim.v_scale)?,
        mean_u: MeanVec::constant(k, sim.target_mean / (k as f64 * ev)),
        mean_v: MeanVec::constant(k, sim.mean_v),
        lik: LikelihoodParams::new(sim.sigma, sim.rho)?,
    })
}

fn round_half(x: f64) -> f64 {
    (x * 2.0).round() / 2.0
}

pub fn simulate(sim: &SimulationConfig, seed: u64) -> Result<Simulation> {
    if sim.teams < 2 || sim.features == 0 || sim.seasons == 0 || sim.weeks_per_season == 0 || sim.rounds_per_week == 0 {
        return Err(DpmfError::Config("simulation needs teams ≥ 2 and positive counts".to_string()));
    }
    let start = NaiveDate::parse_from_str(&sim.start_date, "%Y-%m-%d")
        .map_err(|e| DpmfError::Config(format!("start_date {:?}: {e}", sim.start_date)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let games = schedule(sim, &mut rng);
    let calendar = SeasonCalendar::new(
        season_starts(sim)
            .into_iter()
            .map(|s| (s as f64, (s + sim.weeks_per_season - 1) as f64))
            .collect(),
    )?;
    let space = sim.variant.input_space(calendar.clone());
    let params = params_for(sim)?;
    let shape = ModelShape::new(sim.teams, sim.teams, sim.features, space.dim)?;
    let slots: Vec<_> = games
        .iter()
        .map(|&(w, _, _, h, a)| (h, a, space.point(w as f64, true)))
        .collect();
    let truth = generate_synthetic(shape, space, params, &slots, rng.random())?;
    let teams = team_names(sim.teams);
    let records = games
        .iter()
        .zip(&truth.design.games)
        .zip(&truth.y)
        .map(|((&(w, d, s, h, a), obs), &(yh, ya))| {
            let date = start
                .checked_add_days(Days::new((7 * w + d) as u64))
                .expect("simulated date in range");
            let (over_under, home_spread) = if sim.expert_lines {
                (Some(round_half(yh + ya).max(0.5)), Some(round_half(ya - yh)))
            } else {
                (None, None)
            };
            GameRecord {
                date,
                season: format!("S{}", s + 1),
                home_team: teams[h].clone(),
                away_team: teams[a].clone(),
                home_score: obs.score_mn.max(0.0),
                away_score: obs.score_nm.max(0.0),
                over_under,
                home_spread,
            }
        })
        .collect();
    let rows = |m: &nalgebra::DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    let p = &truth.params;
    Ok(Simulation {
        records,
        truth: SimulationTruth {
            variant: sim.variant,
            teams,
            sigma: sim.sigma,
            rho: sim.rho,
            season_gap: sim.season_gap,
            calendar: calendar.seasons().to_vec(),
            hypers_u: p.hypers_u.clone(),
            hypers_v: p.hypers_v.clone(),
            chol_u: rows(p.cc_u.chol()),
            chol_v: rows(p.cc_v.chol()),
            mean_u: p.mean_u.mu.clone(),
            mean_v: p.mean_v.mu.clone(),
            y: truth.y.clone(),
        },
    })
}

/// Writes `games.csv` and `truth.json` into `dir`.
pub fn write_simulation(dir: &Path, sim: &Simulation) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_records(std::fs::File::create(dir.join("games.csv"))?, &sim.records)?;
    let f = std::fs::File::create(dir.join("truth.json"))?;
    serde_json::to_writer_pretty(f, &sim.truth)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::data::{read_records, Dataset};

    #[test]
    fn expected_softplus_limits() {
        assert!((expected_softplus(1.0, 0.0) - softplus(1.0)).abs() < 1e-15);
        // large mean: softplus is the identity
        assert!((expected_softplus(40.0, 1.0) - 40.0).abs() < 1e-9);
    }

    #[test]
    fn schedule_and_calendar() {
        let sim = SimulationConfig {
            teams: 6,
            seasons: 2,
            weeks_per_season: 5,
            gap_weeks: 28,
            rounds_per_week: 2,
            ..Default::default()
        };
        let out = simulate(&sim, 3).unwrap();
        assert_eq!(out.records.len(), 2 * 5 * 2 * 3);
        let ds = Dataset::from_records(out.records.clone()).unwrap();
        assert_eq!(ds.calendar.seasons(), &[(0.0, 4.0), (32.0, 36.0)]);
        assert_eq!(ds.calendar.gaps(), vec![28.0]);
        assert_eq!(ds.teams.len(), 6);
    }

    #[test]
    fn deterministic_and_round_trips() {
        let sim = SimulationConfig {
            expert_lines: true,
            ..Default::default()
        };
        let a = simulate(&sim, 11).unwrap();
        let b = simulate(&sim, 11).unwrap();
        assert_eq!(a.records, b.records);
        assert_ne!(a.records, simulate(&sim, 12).unwrap().records);
        let mut buf = Vec::new();
        write_records(&mut buf, &a.records).unwrap();
        assert_eq!(read_records(buf.as_slice()).unwrap(), a.records);
    }
}
