//! Rolling evaluation: each season is cut into consecutive blocks of weeks and
//! every block is predicted from earlier games only.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::{ExperimentConfig, Variant};
use crate::harness::data::Dataset;
use crate::harness::fit::{build_design, cold_state, frozen_for, mix_seed, run_chain, training_window, warm_state, ChainSchedule};
use crate::prediction::{density_grid, score_game, score_point, winner_prob, GameScore, Metrics, PredictiveMixture, TestGame};
use crate::samplers::{ChainState, Sampler};

/// One prediction block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub season: usize,
    /// Position inside its season.
    pub index: usize,
    pub start_week: usize,
    /// Exclusive.
    pub end_week: usize,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Cuts every season into `block_weeks`-week blocks from its first week;
/// the last block may be shorter. Blocks without games are dropped.
pub fn plan_blocks(ds: &Dataset, block_weeks: usize, history_seasons: usize) -> Vec<Block> {
    let mut out = Vec::new();
    for (s, &(start, end)) in ds.calendar.seasons().iter().enumerate() {
        let (start, end) = (start as usize, end as usize);
        let mut b = start;
        let mut index = 0;
        while b <= end {
            let e = b + block_weeks;
            let test: Vec<usize> = (0..ds.len())
                .filter(|&i| ds.season_of[i] == s && ds.weeks[i] >= b && ds.weeks[i] < e)
                .collect();
            if !test.is_empty() {
                let train = training_window(ds, s, b, history_seasons);
                assert!(
                    train.iter().all(|&i| ds.weeks[i] < b),
                    "training game dated at or after its block start"
                );
                assert!(
                    train.iter().all(|&i| ds.season_of[i] <= s && ds.season_of[i] + history_seasons >= s),
                    "training game outside the season window"
                );
                out.push(Block {
                    season: s,
                    index,
                    start_week: b,
                    end_week: e,
                    train,
                    test,
                });
                index += 1;
            }
            b = e;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub game_id: usize,
    pub date: String,
    pub season: String,
    pub block: usize,
    pub home_team: String,
    pub away_team: String,
    pub home_score: f64,
    pub away_score: f64,
    pub pred_home: f64,
    pub pred_away: f64,
    pub p_home_win: f64,
    pub logprob: f64,
    pub components: usize,
    pub expert_home: Option<f64>,
    pub expert_away: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: usize,
    pub season: String,
    pub start_week: usize,
    pub end_week: usize,
    pub train_games: usize,
    pub test_games: usize,
    pub cold_start: bool,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameGrid {
    pub game_id: usize,
    /// `(home score, away score, density)`.
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingReport {
    pub variant: Variant,
    pub features: usize,
    pub blocks: Vec<BlockRow>,
    pub predictions: Vec<PredictionRow>,
    /// Per evaluated season, in calendar order.
    pub seasons: Vec<(String, Metrics)>,
    pub overall: Metrics,
    pub expert_seasons: Vec<(String, Metrics)>,
    pub expert_overall: Option<Metrics>,
    pub grids: Vec<GameGrid>,
    pub skipped_blocks: usize,
}

fn group_metrics(ds: &Dataset, scored: &[(usize, GameScore)]) -> Result<Vec<(String, Metrics)>> {
    let mut out = Vec::new();
    for (s, name) in ds.seasons.iter().enumerate() {
        let sc: Vec<GameScore> = scored.iter().filter(|(i, _)| ds.season_of[*i] == s).map(|(_, g)| *g).collect();
        if !sc.is_empty() {
            out.push((name.clone(), Metrics::from_scores(&sc)?));
        }
    }
    Ok(out)
}

pub fn rolling_eval(cfg: &ExperimentConfig, ds: &Dataset) -> Result<RollingReport> {
    cfg.validate()?;
    let frozen = frozen_for(cfg)?;
    let mut scfg = cfg.sampler.clone();
    if frozen.is_some() {
        scfg.sample_hypers = false;
    }
    let blocks = plan_blocks(ds, cfg.block_weeks, cfg.history_seasons);
    let mut states: Vec<Option<ChainState>> = vec![None; cfg.chains];
    let mut current_season = usize::MAX;
    let mut block_rows = Vec::new();
    let mut predictions = Vec::new();
    let mut scored = Vec::new();
    let mut expert_scored = Vec::new();
    let mut grids = Vec::new();
    let mut skipped = 0;

    for (bi, block) in blocks.iter().enumerate() {
        if block.season != current_season {
            states.iter_mut().for_each(|s| *s = None);
            current_season = block.season;
        }
        if block.train.is_empty() {
            warn!("block {bi} (season {}, week {}) has no training history; skipped", ds.seasons[block.season], block.start_week);
            skipped += 1;
            continue;
        }
        let design = build_design(ds, &block.train, cfg.variant, cfg.features)?;
        let tests: Vec<TestGame> = block.test.iter().map(|&i| ds.test_game(i, &design.space)).collect();
        let cold = states.iter().any(|s| s.is_none());
        let sched = ChainSchedule {
            burnin: if cold { cfg.cold_burnin } else { cfg.warm_burnin },
            thin: cfg.thin,
            samples: cfg.samples_per_chain,
        };
        let prev = std::mem::replace(&mut states, vec![None; cfg.chains]);
        let outs: Vec<(ChainState, Vec<Vec<crate::prediction::MixtureComponent>>)> = prev
            .into_par_iter()
            .enumerate()
            .map(|(c, prev)| {
                let seed = mix_seed(&[cfg.seed, block.season as u64, block.start_week as u64, c as u64]);
                let mut st = match prev {
                    Some(p) if !cold => warm_state(&p, &design, seed)?,
                    _ => cold_state(&design, cfg, frozen.as_ref(), seed)?,
                };
                let sampler = Sampler::new(&design, &cfg.priors, scfg.clone());
                let out = run_chain(&sampler, &mut st, sched, &tests, c)?;
                Ok((st, out.components))
            })
            .collect::<Result<_>>()?;

        let mut comps = vec![Vec::with_capacity(cfg.chains * cfg.samples_per_chain); tests.len()];
        for (c, (st, out)) in outs.into_iter().enumerate() {
            for (acc, cs) in comps.iter_mut().zip(out) {
                acc.extend(cs);
            }
            states[c] = Some(st);
        }

        let mut block_scores = Vec::with_capacity(tests.len());
        for (&gid, cs) in block.test.iter().zip(comps) {
            let mix = PredictiveMixture::new(cs)?;
            let obs = ds.observation(gid, &design.space);
            let sc = score_game(&mix, &obs);
            let (ph, pa) = mix.mean();
            let expert = ds.expert_prediction(gid);
            if let Some(e) = expert {
                expert_scored.push((gid, score_point(e, &obs)));
            }
            if cfg.grid_games.contains(&gid) {
                grids.push(GameGrid {
                    game_id: gid,
                    points: density_grid(&mix, cfg.grid_half_width, cfg.grid_points),
                });
            }
            let r = &ds.records[gid];
            predictions.push(PredictionRow {
                game_id: gid,
                date: r.date.to_string(),
                season: r.season.clone(),
                block: bi,
                home_team: r.home_team.clone(),
                away_team: r.away_team.clone(),
                home_score: r.home_score,
                away_score: r.away_score,
                pred_home: ph,
                pred_away: pa,
                p_home_win: winner_prob(&mix),
                logprob: sc.logprob,
                components: mix.len(),
                expert_home: expert.map(|e| e.0),
                expert_away: expert.map(|e| e.1),
            });
            block_scores.push(sc);
            scored.push((gid, sc));
        }
        let m = Metrics::from_scores(&block_scores)?;
        info!(
            "{} K={} block {bi} season {} weeks {}..{}: logprob {:.4} winner err {:.1}% rmse {:.3}",
            cfg.variant,
            cfg.features,
            ds.seasons[block.season],
            block.start_week,
            block.end_week,
            m.mean_logprob,
            m.winner_error_pct,
            m.rmse
        );
        block_rows.push(BlockRow {
            block: bi,
            season: ds.seasons[block.season].clone(),
            start_week: block.start_week,
            end_week: block.end_week,
            train_games: block.train.len(),
            test_games: block.test.len(),
            cold_start: cold,
            metrics: m,
        });
    }

    let all: Vec<GameScore> = scored.iter().map(|(_, s)| *s).collect();
    let overall = Metrics::from_scores(&all)?;
    let expert_overall = if expert_scored.is_empty() {
        None
    } else {
        Some(Metrics::from_scores(&expert_scored.iter().map(|(_, s)| *s).collect::<Vec<_>>())?)
    };
    Ok(RollingReport {
        variant: cfg.variant,
        features: cfg.features,
        blocks: block_rows,
        predictions,
        seasons: group_metrics(ds, &scored)?,
        overall,
        expert_seasons: group_metrics(ds, &expert_scored)?,
        expert_overall,
        grids,
        skipped_blocks: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SimulationConfig;
    use crate::harness::data::Dataset;
    use crate::harness::simulate::simulate;

    fn dataset() -> Dataset {
        let sim = SimulationConfig {
            teams: 4,
            seasons: 4,
            weeks_per_season: 6,
            gap_weeks: 10,
            ..Default::default()
        };
        Dataset::from_records(simulate(&sim, 1).unwrap().records).unwrap()
    }

    #[test]
    fn blocks_partition_each_season() {
        let ds = dataset();
        let blocks = plan_blocks(&ds, 4, 2);
        // 6-week seasons: one full block and one 2-week remainder each
        assert_eq!(blocks.len(), 8);
        let mut tested: Vec<usize> = blocks.iter().flat_map(|b| b.test.clone()).collect();
        tested.sort_unstable();
        assert_eq!(tested, (0..ds.len()).collect::<Vec<_>>());
        assert!(blocks[0].train.is_empty());
        assert_eq!(blocks[1].start_week, 4);
        assert_eq!(blocks[1].end_week, 8);
    }

    #[test]
    fn training_window_drops_old_seasons() {
        let ds = dataset();
        let blocks = plan_blocks(&ds, 4, 2);
        let last = blocks.last().unwrap();
        assert_eq!(last.season, 3);
        assert!(last.train.iter().all(|&i| ds.season_of[i] >= 1));
        assert!(last.train.iter().any(|&i| ds.season_of[i] == 1));
        for b in &blocks {
            assert!(b.train.iter().all(|&i| ds.weeks[i] < b.start_week));
        }
    }
}
