//! Chain orchestration on a fixed training set: warm and cold starts, the
//! single-range fit, hyperparameter pre-burn and single-matchup prediction.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{DpmfError, Result};
use crate::harness::config::{ExperimentConfig, HyperMode, Variant};
use crate::harness::data::Dataset;
use crate::kernels::{factored_cov, InputSpace, KernelHyperparams, SideInfoPoint};
use crate::latent::{whiten, LatentState, ModelShape, Side, SideLatent};
use crate::prediction::{conditional_moments, draw_gaussian, predict_components, MixtureComponent, PredictiveMixture, TestGame};
use crate::samplers::{coord_layout, ChainState, HyperCoord, Sampler};

/// SplitMix64 over the parts, for reproducible per-chain seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut z: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        z ^= p;
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

/// Design over the games `ids` of `ds`, with every team of the dataset as a member.
pub fn build_design(ds: &Dataset, ids: &[usize], variant: Variant, features: usize) -> Result<Design> {
    let space = variant.input_space(ds.calendar.clone());
    let shape = ModelShape::new(ds.teams.len(), ds.teams.len(), features, space.dim)?;
    Design::new(shape, space.clone(), ds.observations(ids, &space))
}

/// Hyperparameters fixed by a pre-burn run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenHypers {
    pub variant: Variant,
    pub features: usize,
    pub sweeps: usize,
    pub seed: u64,
    pub hypers_u: Vec<KernelHyperparams>,
    pub hypers_v: Vec<KernelHyperparams>,
}

impl FrozenHypers {
    pub fn save(&self, path: &Path) -> Result<()> {
        serde_json::to_writer_pretty(std::fs::File::create(path)?, self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }

    fn check(&self, cfg: &ExperimentConfig) -> Result<()> {
        if self.variant != cfg.variant || self.features != cfg.features {
            return Err(DpmfError::Config(format!(
                "frozen hyperparameters are for {} K={}, run is {} K={}",
                self.variant, self.features, cfg.variant, cfg.features
            )));
        }
        Ok(())
    }
}

/// Frozen hyperparameters in force for `cfg`, if any.
pub fn frozen_for(cfg: &ExperimentConfig) -> Result<Option<FrozenHypers>> {
    match (cfg.hyper_mode, &cfg.frozen_hypers) {
        (HyperMode::FreezeAfterPreburn, Some(p)) => {
            let f = FrozenHypers::load(p)?;
            f.check(cfg)?;
            Ok(Some(f))
        }
        (HyperMode::FreezeAfterPreburn, None) => Err(DpmfError::Config(
            "freeze_after_preburn needs frozen_hypers (run `preburn` first)".to_string(),
        )),
        (HyperMode::AlwaysSample, _) => Ok(None),
    }
}

fn sampler_config(cfg: &ExperimentConfig, frozen: Option<&FrozenHypers>) -> crate::samplers::SamplerConfig {
    let mut s = cfg.sampler.clone();
    if frozen.is_some() {
        s.sample_hypers = false;
    }
    s
}

/// Fresh chain state for `design`, with frozen kernels when given.
pub fn cold_state(design: &Design, cfg: &ExperimentConfig, frozen: Option<&FrozenHypers>, seed: u64) -> Result<ChainState> {
    let template = cfg.kernel.template(cfg.variant)?;
    let mut st = ChainState::initialize(design, &template, seed)?;
    if let Some(f) = frozen {
        st.params.hypers_u = f.hypers_u.clone();
        st.params.hypers_v = f.hypers_v.clone();
        st.params.validate()?;
        for side in Side::BOTH {
            for k in 0..st.params.features() {
                let h = st.params.hypers(side)[k].clone();
                st.latent.side_mut(side).refactor_feature(k, &h, &design.space)?;
            }
        }
    }
    Ok(st)
}

/// Moves one side's functions onto new inputs: values at points seen before
/// are kept, new points get a draw from the GP conditional on the old values.
fn transfer_side<R: Rng + ?Sized>(
    old: &SideLatent,
    inputs: &Arc<Vec<Vec<SideInfoPoint>>>,
    hypers: &[KernelHyperparams],
    space: &InputSpace,
    rng: &mut R,
) -> Result<SideLatent> {
    let mut nus = Vec::with_capacity(inputs.len());
    for (m, pts) in inputs.iter().enumerate() {
        let old_pts = &old.inputs[m];
        let old_idx: HashMap<Vec<u64>, usize> = old_pts.iter().enumerate().map(|(i, p)| (p.key(), i)).collect();
        let missing: Vec<SideInfoPoint> = pts.iter().filter(|p| !old_idx.contains_key(&p.key())).cloned().collect();
        let mut row = Vec::with_capacity(hypers.len());
        for (k, h) in hypers.iter().enumerate() {
            if pts.is_empty() {
                row.push(nalgebra::DVector::zeros(0));
                continue;
            }
            let block = &old.blocks[m][k];
            let drawn = if missing.is_empty() {
                nalgebra::DVector::zeros(0)
            } else {
                let (mean, cov) = conditional_moments(old_pts, &block.chol, &block.nu, &missing, h, space)?;
                draw_gaussian(&mean, &cov, rng)
            };
            let mut next_new = 0;
            let f = nalgebra::DVector::from_iterator(
                pts.len(),
                pts.iter().map(|p| match old_idx.get(&p.key()) {
                    Some(&i) => block.f[i],
                    None => {
                        next_new += 1;
                        drawn[next_new - 1]
                    }
                }),
            );
            let (chol, _) = factored_cov(pts, h, space)?;
            row.push(whiten(&f, &nalgebra::DVector::zeros(pts.len()), &chol)?);
        }
        nus.push(row);
    }
    SideLatent::from_whitened(inputs.clone(), nus, hypers, space)
}

/// Continues `prev` on a new training set.
pub fn warm_state(prev: &ChainState, design: &Design, seed: u64) -> Result<ChainState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = prev.params.clone();
    let latent = LatentState {
        u: transfer_side(&prev.latent.u, &design.u_inputs, &params.hypers_u, &design.space, &mut rng)?,
        v: transfer_side(&prev.latent.v, &design.v_inputs, &params.hypers_v, &design.space, &mut rng)?,
    };
    Ok(ChainState {
        latent,
        params,
        rng,
        iteration: prev.iteration,
    })
}

/// Sweeps of one chain after its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSchedule {
    pub burnin: usize,
    pub thin: usize,
    pub samples: usize,
}

/// Scalar summary of one stored state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub chain: usize,
    pub iteration: u64,
    pub loglik: f64,
    pub sigma: f64,
    pub rho: f64,
    /// Sampled kernel coordinates in natural units, ordered as [`trace_names`].
    pub hypers: Vec<f64>,
}

/// Column names of [`TraceRow::hypers`]; a shared gap is the single column `gap`.
pub fn trace_names(template: &KernelHyperparams, space: &InputSpace, features: usize, shared_gap: bool) -> Vec<String> {
    coord_layout(template, space, features, shared_gap)
        .into_iter()
        .map(|(side, k, c)| {
            let s = match side {
                Side::U => "u",
                Side::V => "v",
            };
            match c {
                HyperCoord::LogLengthScale(d) => format!("{s}{k}_length{d}"),
                HyperCoord::SeasonGap if shared_gap => "gap".to_string(),
                HyperCoord::SeasonGap => format!("{s}{k}_gap"),
            }
        })
        .collect()
}

fn trace_row(chain: usize, design: &Design, st: &ChainState, shared_gap: bool) -> TraceRow {
    let hypers = match st.params.hypers_u.first() {
        Some(t) => coord_layout(t, &design.space, st.params.features(), shared_gap)
            .into_iter()
            .map(|(side, k, c)| {
                let v = c.get(&st.params.hypers(side)[k]);
                match c {
                    HyperCoord::LogLengthScale(_) => v.exp(),
                    HyperCoord::SeasonGap => v,
                }
            })
            .collect(),
        None => Vec::new(),
    };
    TraceRow {
        chain,
        iteration: st.iteration,
        loglik: design.total_loglik(&st.latent, &st.params),
        sigma: st.params.lik.sigma,
        rho: st.params.lik.rho,
        hypers,
    }
}

/// Output of [`run_chain`]: stored trace rows and one component list per test game.
pub struct ChainOutput {
    pub trace: Vec<TraceRow>,
    pub components: Vec<Vec<MixtureComponent>>,
}

/// Burn-in, then `samples` stored states `thin` sweeps apart. Each stored
/// state adds a trace row and one predictive component per test game.
pub fn run_chain(
    sampler: &Sampler<'_>,
    st: &mut ChainState,
    sched: ChainSchedule,
    tests: &[TestGame],
    chain: usize,
) -> Result<ChainOutput> {
    for _ in 0..sched.burnin {
        sampler.gibbs_sweep(st)?;
    }
    let mut trace = Vec::with_capacity(sched.samples);
    let mut components = vec![Vec::with_capacity(sched.samples); tests.len()];
    for _ in 0..sched.samples {
        for _ in 0..sched.thin.max(1) {
            sampler.gibbs_sweep(st)?;
        }
        trace.push(trace_row(chain, sampler.design, st, sampler.priors.shared_season_gap));
        if !tests.is_empty() {
            let comps = predict_components(&sampler.design.space, &st.latent, &st.params, tests, &mut st.rng)?;
            for (slot, c) in components.iter_mut().zip(comps) {
                slot.push(c);
            }
        }
    }
    Ok(ChainOutput { trace, components })
}

/// Result of a single-range fit.
pub struct FitResult {
    pub design: Design,
    pub names: Vec<String>,
    pub trace: Vec<TraceRow>,
    pub states: Vec<ChainState>,
    /// One mixture per requested test game, components in chain order.
    pub mixtures: Vec<PredictiveMixture>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub variant: Variant,
    pub features: usize,
    pub games: usize,
    pub chains: usize,
    pub sweeps: usize,
    pub burnin: usize,
    pub stored: usize,
    pub sigma_mean: f64,
    pub rho_mean: f64,
    /// Posterior means of the sampled kernel coordinates.
    pub hypers_mean: Vec<(String, f64)>,
}

impl FitResult {
    pub fn summary(&self, cfg: &ExperimentConfig, sweeps: usize, burnin: usize) -> FitSummary {
        let n = self.trace.len().max(1) as f64;
        let hypers_mean = self
            .names
            .iter()
            .enumerate()
            .map(|(i, name)| (name.clone(), self.trace.iter().map(|r| r.hypers[i]).sum::<f64>() / n))
            .collect();
        FitSummary {
            variant: cfg.variant,
            features: cfg.features,
            games: self.design.games.len(),
            chains: self.states.len(),
            sweeps,
            burnin,
            stored: self.trace.len(),
            sigma_mean: self.trace.iter().map(|r| r.sigma).sum::<f64>() / n,
            rho_mean: self.trace.iter().map(|r| r.rho).sum::<f64>() / n,
            hypers_mean,
        }
    }
}

/// Runs `cfg.chains` cold chains of `sweeps` sweeps on the games `ids`,
/// storing every `thin`-th state after `burnin`.
pub fn fit_games(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    ids: &[usize],
    sweeps: usize,
    burnin: usize,
    tests: &[TestGame],
) -> Result<FitResult> {
    if ids.is_empty() {
        return Err(DpmfError::Empty("training games"));
    }
    let frozen = frozen_for(cfg)?;
    let design = build_design(ds, ids, cfg.variant, cfg.features)?;
    let scfg = sampler_config(cfg, frozen.as_ref());
    let thin = cfg.thin.max(1);
    let sched = ChainSchedule {
        burnin: burnin.min(sweeps),
        thin,
        samples: sweeps.saturating_sub(burnin) / thin,
    };
    let outs: Vec<(ChainState, ChainOutput)> = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let sampler = Sampler::new(&design, &cfg.priors, scfg.clone());
            let mut st = cold_state(&design, cfg, frozen.as_ref(), mix_seed(&[cfg.seed, 0xF17, c as u64]))?;
            let out = run_chain(&sampler, &mut st, sched, tests, c)?;
            Ok((st, out))
        })
        .collect::<Result<_>>()?;
    let template = cfg.kernel.template(cfg.variant)?;
    let names = trace_names(&template, &design.space, cfg.features, cfg.priors.shared_season_gap);
    let mut trace = Vec::new();
    let mut states = Vec::new();
    let mut comps = vec![Vec::new(); tests.len()];
    for (st, out) in outs {
        trace.extend(out.trace);
        for (acc, c) in comps.iter_mut().zip(out.components) {
            acc.extend(c);
        }
        states.push(st);
    }
    let mixtures = comps.into_iter().map(PredictiveMixture::new).collect::<Result<_>>()?;
    Ok(FitResult {
        design,
        names,
        trace,
        states,
        mixtures,
    })
}

/// Long chain on the first `preburn_seasons` seasons; the final kernel
/// hyperparameters are frozen. `None` in `always_sample` mode.
pub fn preburn_hypers(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Option<FrozenHypers>> {
    if cfg.hyper_mode == HyperMode::AlwaysSample {
        return Ok(None);
    }
    let ids: Vec<usize> = (0..ds.len()).filter(|&i| ds.season_of[i] < cfg.preburn_seasons).collect();
    if ids.is_empty() {
        return Err(DpmfError::Empty("pre-burn games"));
    }
    let design = build_design(ds, &ids, cfg.variant, cfg.features)?;
    let mut scfg = cfg.sampler.clone();
    scfg.sample_hypers = true;
    let sampler = Sampler::new(&design, &cfg.priors, scfg);
    let mut st = cold_state(&design, cfg, None, mix_seed(&[cfg.seed, 0xB0B]))?;
    for i in 0..cfg.preburn_sweeps {
        sampler.gibbs_sweep(&mut st)?;
        if (i + 1) % 500 == 0 {
            info!("pre-burn sweep {}/{}", i + 1, cfg.preburn_sweeps);
        }
    }
    Ok(Some(FrozenHypers {
        variant: cfg.variant,
        features: cfg.features,
        sweeps: cfg.preburn_sweeps,
        seed: cfg.seed,
        hypers_u: st.params.hypers_u.clone(),
        hypers_v: st.params.hypers_v.clone(),
    }))
}

/// Training games for a prediction at `week` of `season`: earlier weeks of
/// the current season and the configured number of previous seasons.
pub fn training_window(ds: &Dataset, season: usize, week: usize, history: usize) -> Vec<usize> {
    let first = season.saturating_sub(history);
    (0..ds.len())
        .filter(|&i| ds.weeks[i] < week && ds.season_of[i] >= first && ds.season_of[i] <= season)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_differ_by_part() {
        let a = mix_seed(&[1, 2, 3]);
        assert_eq!(a, mix_seed(&[1, 2, 3]));
        assert_ne!(a, mix_seed(&[1, 2, 4]));
        assert_ne!(mix_seed(&[0, 1]), mix_seed(&[1, 0]));
    }
}
