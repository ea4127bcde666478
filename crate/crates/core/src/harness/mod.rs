//! Experiment protocol and the commands behind the CLI.

pub mod config;
pub mod data;
pub mod fit;
pub mod output;
pub mod rolling;
pub mod simulate;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{DpmfError, Result};
pub use config::{ExperimentConfig, HyperMode, KernelDefaults, SimulationConfig, TimeKernel, Variant, SEED_ENV};
pub use data::{ingest, read_records, write_records, Dataset, GameRecord};
pub use fit::{build_design, fit_games, mix_seed, preburn_hypers, FitResult, FitSummary, FrozenHypers};
pub use rolling::{plan_blocks, rolling_eval, Block, RollingReport};
pub use simulate::{simulate, write_simulation, Simulation, SimulationTruth};

use crate::prediction::{density_grid, winner_prob, TestGame};

fn data_path(cfg: &ExperimentConfig) -> Result<&PathBuf> {
    cfg.data
        .as_ref()
        .ok_or_else(|| DpmfError::Config("no data file configured (set `data`)".to_string()))
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    ingest(data_path(cfg)?)
}

/// Writes `games.csv` and `truth.json`.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<Simulation> {
    let sim = simulate(&cfg.simulation, cfg.seed)?;
    write_simulation(out, &sim)?;
    info!("simulated {} games into {}", sim.records.len(), out.display());
    Ok(sim)
}

/// Writes `frozen_hypers.json` unless hyperparameters are always sampled.
pub fn cmd_preburn(cfg: &ExperimentConfig, out: &Path) -> Result<Option<FrozenHypers>> {
    let ds = load_data(cfg)?;
    std::fs::create_dir_all(out)?;
    let frozen = preburn_hypers(cfg, &ds)?;
    match &frozen {
        Some(f) => f.save(&out.join("frozen_hypers.json"))?,
        None => info!("hyper_mode is always_sample; nothing to freeze"),
    }
    Ok(frozen)
}

/// Fits every game dated in `[from, to]` and writes `fit_summary.json` and `trace.csv`.
pub fn cmd_fit(cfg: &ExperimentConfig, out: &Path, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Result<FitSummary> {
    let ds = load_data(cfg)?;
    let ids: Vec<usize> = (0..ds.len())
        .filter(|&i| {
            let d = ds.records[i].date;
            from.is_none_or(|f| d >= f) && to.is_none_or(|t| d <= t)
        })
        .collect();
    let res = fit_games(cfg, &ds, &ids, cfg.fit_sweeps, cfg.fit_burnin, &[])?;
    std::fs::create_dir_all(out)?;
    let summary = res.summary(cfg, cfg.fit_sweeps, cfg.fit_burnin);
    serde_json::to_writer_pretty(std::fs::File::create(out.join("fit_summary.json"))?, &summary)?;
    output::write_trace(&out.join("trace.csv"), &res.names, &res.trace)?;
    Ok(summary)
}

/// Writes `metrics.csv`, `blocks.csv`, `predictions.csv` and, when games were requested, `grids.csv`.
pub fn cmd_rolling_eval(cfg: &ExperimentConfig, out: &Path) -> Result<RollingReport> {
    let ds = load_data(cfg)?;
    let report = rolling_eval(cfg, &ds)?;
    std::fs::create_dir_all(out)?;
    let seasons: Vec<String> = report.seasons.iter().map(|(s, _)| s.clone()).collect();
    output::write_metrics(&out.join("metrics.csv"), &seasons, std::slice::from_ref(&report))?;
    output::write_blocks(&out.join("blocks.csv"), &report)?;
    output::write_predictions(&out.join("predictions.csv"), &report.predictions)?;
    if !report.grids.is_empty() {
        output::write_grids(&out.join("grids.csv"), &report.grids)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchupPrediction {
    pub date: NaiveDate,
    pub home_team: String,
    pub away_team: String,
    pub training_games: usize,
    pub components: usize,
    pub pred_home: f64,
    pub pred_away: f64,
    pub p_home_win: f64,
}

/// Predicts one matchup from the games before `date`; writes `prediction.json` and `grids.csv`.
pub fn cmd_predict(cfg: &ExperimentConfig, out: &Path, home: &str, away: &str, date: NaiveDate) -> Result<MatchupPrediction> {
    let ds = load_data(cfg)?;
    let (m, n) = (ds.team_id(home)?, ds.team_id(away)?);
    let week = ds.week_of(date)?;
    let season = ds
        .calendar
        .seasons()
        .iter()
        .rposition(|&(s, _)| s <= week)
        .ok_or(DpmfError::Empty("seasons before the prediction date"))?;
    let ids = fit::training_window(&ds, season, week as usize, cfg.history_seasons);
    let space = cfg.variant.input_space(ds.calendar.clone());
    let test = TestGame {
        row_member: m,
        col_member: n,
        side_info: space.point(week, true),
    };
    let res = fit_games(cfg, &ds, &ids, cfg.fit_sweeps, cfg.fit_burnin, &[test])?;
    let mix = &res.mixtures[0];
    let (ph, pa) = mix.mean();
    let pred = MatchupPrediction {
        date,
        home_team: home.to_string(),
        away_team: away.to_string(),
        training_games: ids.len(),
        components: mix.len(),
        pred_home: ph,
        pred_away: pa,
        p_home_win: winner_prob(mix),
    };
    std::fs::create_dir_all(out)?;
    serde_json::to_writer_pretty(std::fs::File::create(out.join("prediction.json"))?, &pred)?;
    let grid = rolling::GameGrid {
        game_id: 0,
        points: density_grid(mix, cfg.grid_half_width, cfg.grid_points),
    };
    output::write_grids(&out.join("grids.csv"), &[grid])?;
    Ok(pred)
}
