//! Joint-distribution test: the marginal-conditional simulator draws
//! (parameters, data) straight from the prior, the successive-conditional
//! simulator alternates a Gibbs sweep with fresh data. Agreement of the two
//! sets of moments checks the transition operators leave the posterior invariant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::Design;
use crate::diagnostics::{batch_means_se, iid_se, mean, z_score};
use crate::error::Result;
use crate::kernels::KernelHyperparams;
use crate::latent::Side;
use crate::likelihood::sample_pair;
use crate::samplers::chain::{coord_layout, ChainState, Priors, Sampler, SamplerConfig};

#[derive(Debug, Clone)]
pub struct GewekeSetup {
    /// Fixed observation layout; scores are overwritten by the simulators.
    pub design: Design,
    pub priors: Priors,
    pub config: SamplerConfig,
    pub template: KernelHyperparams,
}

/// Names matching [`default_statistics`].
pub fn statistic_names(setup: &GewekeSetup) -> Vec<String> {
    let mut names = Vec::new();
    for g in 0..setup.design.games.len() {
        names.push(format!("y[{g}].mn"));
        names.push(format!("y[{g}].nm"));
    }
    names.push("sigma".to_string());
    names.push("rho".to_string());
    let k = setup.design.features();
    for side in Side::BOTH {
        for i in 0..k {
            names.push(format!("{side:?}.mean[{i}]"));
        }
        for i in 0..k {
            for j in 0..=i {
                names.push(format!("{side:?}.chol[{i},{j}]"));
            }
        }
        names.push(format!("{side:?}.f_sq"));
    }
    let shared = setup.priors.shared_season_gap;
    for (side, k, c) in coord_layout(&setup.template, &setup.design.space, setup.design.features(), shared) {
        names.push(format!("{side:?}.{k}.{c:?}"));
    }
    names
}

/// Latent means of every observation, sigma, rho, feature means,
/// cross-covariance factors, squared norm of the function values per side,
/// then every sampled hyperparameter coordinate (log length scales, gaps).
pub fn default_statistics(design: &Design, st: &ChainState, shared_gap: bool) -> Vec<f64> {
    let mut out = Vec::new();
    for (a, b) in design.y_pairs(&st.latent, &st.params) {
        out.push(a);
        out.push(b);
    }
    out.push(st.params.lik.sigma);
    out.push(st.params.lik.rho);
    let k = st.params.features();
    for side in Side::BOTH {
        out.extend(st.params.mean(side).mu.iter().copied());
        let l = st.params.cross_cov(side).chol();
        for i in 0..k {
            for j in 0..=i {
                out.push(l[(i, j)]);
            }
        }
        let f_sq: f64 = st.latent.side(side).blocks.iter().flatten().map(|b| b.f.norm_squared()).sum();
        out.push(f_sq);
    }
    let k = st.params.features();
    if let Some(template) = st.params.hypers_u.first() {
        for (side, j, c) in coord_layout(template, &design.space, k, shared_gap) {
            out.push(c.get(&st.params.hypers(side)[j]));
        }
    }
    out
}

/// Replaces every score in `design` with a draw from the likelihood at the current state.
pub fn resample_scores(design: &mut Design, st: &mut ChainState) -> Result<()> {
    let ys = design.y_pairs(&st.latent, &st.params);
    for (obs, (a, b)) in design.games.iter_mut().zip(ys) {
        let (z1, z2) = sample_pair(a, b, &st.params.lik, &mut st.rng)?;
        obs.score_mn = z1;
        obs.score_nm = z2;
    }
    Ok(())
}

pub fn marginal_conditional(setup: &GewekeSetup, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    let mut design = setup.design.clone();
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut st = ChainState::from_prior(&design, &setup.priors, &setup.template, seeds.random())?;
        resample_scores(&mut design, &mut st)?;
        out.push(default_statistics(&design, &st, setup.priors.shared_season_gap));
    }
    Ok(out)
}

pub fn successive_conditional(setup: &GewekeSetup, draws: usize, thin: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut design = setup.design.clone();
    let mut st = ChainState::from_prior(&design, &setup.priors, &setup.template, seed)?;
    resample_scores(&mut design, &mut st)?;
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        for _ in 0..thin.max(1) {
            Sampler::new(&design, &setup.priors, setup.config.clone()).gibbs_sweep(&mut st)?;
            resample_scores(&mut design, &mut st)?;
        }
        out.push(default_statistics(&design, &st, setup.priors.shared_season_gap));
    }
    Ok(out)
}

/// z-scores of the first moments of each statistic between the two simulators.
pub fn compare(mc: &[Vec<f64>], sc: &[Vec<f64>], batches: usize) -> Vec<f64> {
    let n_stats = mc.first().map_or(0, |r| r.len());
    (0..n_stats)
        .map(|i| {
            let a: Vec<f64> = mc.iter().map(|r| r[i]).collect();
            let b: Vec<f64> = sc.iter().map(|r| r[i]).collect();
            z_score(mean(&a), iid_se(&a), mean(&b), batch_means_se(&b, batches))
        })
        .collect()
}

/// z-scores of the second moments.
pub fn compare_second(mc: &[Vec<f64>], sc: &[Vec<f64>], batches: usize) -> Vec<f64> {
    let sq = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> { rows.iter().map(|r| r.iter().map(|v| v * v).collect()).collect() };
    compare(&sq(mc), &sq(sc), batches)
}
