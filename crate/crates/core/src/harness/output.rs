//! Plain-text result files.

use std::path::Path;

use crate::error::Result;
use crate::harness::fit::TraceRow;
use crate::harness::rolling::{GameGrid, PredictionRow, RollingReport};
use crate::prediction::Metrics;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.6}")
    }
}

/// Wide metrics table: one row per (model, K, metric), one column per
/// evaluated season plus `All`. Expert rows carry an empty K and no log probability.
pub fn write_metrics(path: &Path, seasons: &[String], reports: &[RollingReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["model".to_string(), "K".to_string(), "metric".to_string()];
    header.extend(seasons.iter().cloned());
    header.push("All".to_string());
    w.write_record(&header)?;

    let row = |model: &str, k: &str, metric: &str, per: &[(String, Metrics)], all: &Metrics, get: fn(&Metrics) -> f64| {
        let mut r = vec![model.to_string(), k.to_string(), metric.to_string()];
        for s in seasons {
            r.push(per.iter().find(|(n, _)| n == s).map_or(String::new(), |(_, m)| fmt(get(m))));
        }
        r.push(fmt(get(all)));
        r
    };
    let getters: [(&str, fn(&Metrics) -> f64); 3] = [
        ("mean_logprob", |m| m.mean_logprob),
        ("winner_error_pct", |m| m.winner_error_pct),
        ("rmse", |m| m.rmse),
    ];
    for rep in reports {
        let k = rep.features.to_string();
        for (name, get) in getters {
            w.write_record(row(rep.variant.name(), &k, name, &rep.seasons, &rep.overall, get))?;
        }
    }
    if let Some(rep) = reports.iter().find(|r| r.expert_overall.is_some()) {
        let all = rep.expert_overall.expect("checked");
        for (name, get) in &getters[1..] {
            w.write_record(row("Expert", "", name, &rep.expert_seasons, &all, *get))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_blocks(path: &Path, report: &RollingReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "model", "K", "block", "season", "start_week", "end_week", "train_games", "test_games", "cold_start",
        "mean_logprob", "winner_error_pct", "rmse",
    ])?;
    for b in &report.blocks {
        w.write_record([
            report.variant.name().to_string(),
            report.features.to_string(),
            b.block.to_string(),
            b.season.clone(),
            b.start_week.to_string(),
            b.end_week.to_string(),
            b.train_games.to_string(),
            b.test_games.to_string(),
            b.cold_start.to_string(),
            fmt(b.metrics.mean_logprob),
            fmt(b.metrics.winner_error_pct),
            fmt(b.metrics.rmse),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_grids(path: &Path, grids: &[GameGrid]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["game_id", "home_score", "away_score", "density"])?;
    for g in grids {
        for &(h, a, d) in &g.points {
            w.write_record([g.game_id.to_string(), fmt(h), fmt(a), format!("{d:.6e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace(path: &Path, names: &[String], rows: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = ["chain", "iteration", "loglik", "sigma", "rho"].iter().map(|s| s.to_string()).collect();
    header.extend(names.iter().cloned());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.chain.to_string(), r.iteration.to_string(), fmt(r.loglik), fmt(r.sigma), fmt(r.rho)];
        rec.extend(r.hypers.iter().map(|v| fmt(*v)));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
