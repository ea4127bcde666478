//! The Markov chain over the full model state and its Gibbs-style sweep.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::{Design, Override};
use crate::error::{DpmfError, Result};
use crate::kernels::{InputSpace, KernelHyperparams, KernelVariant};
use crate::latent::{
    standard_normal_vec, CrossCov, LatentState, MeanVec, ModelParams, Side, SideLatent,
};
use crate::likelihood::{bivariate_logpdf, LikelihoodParams};
use crate::samplers::ess::ess_step_with_aux;
use crate::samplers::slice::{slice_sample_1d, SliceConfig};

/// Prior settings for everything that is not a latent function value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    /// Top-hat bounds on log length scales.
    pub log_length_scale: (f64, f64),
    /// Top-hat bounds on the effective season gap.
    pub season_gap: (f64, f64),
    /// Standard deviation of the zero-mean Gaussian on each feature mean.
    pub mean_sd: f64,
    /// Standard deviation of the Gaussian on each log-diagonal entry of the cross-covariance factor.
    pub chol_log_diag_sd: f64,
    /// Standard deviation of the Gaussian on each off-diagonal entry of the factor.
    pub chol_offdiag_sd: f64,
    pub log_sigma_mean: f64,
    pub log_sigma_sd: f64,
    /// One season gap for every kernel instead of one per kernel.
    pub shared_season_gap: bool,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            log_length_scale: (0.1f64.ln(), 500.0f64.ln()),
            season_gap: (0.1, 40.0),
            mean_sd: 10.0,
            chol_log_diag_sd: 1.0,
            chol_offdiag_sd: 1.0,
            log_sigma_mean: 10.0f64.ln(),
            log_sigma_sd: 1.0,
            shared_season_gap: true,
        }
    }
}

fn gaussian_log(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z
}

fn top_hat(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if (lo..=hi).contains(&x) {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// A scalar coordinate of a kernel's hyperparameters that the chain samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperCoord {
    LogLengthScale(usize),
    SeasonGap,
}

impl HyperCoord {
    pub fn get(self, h: &KernelHyperparams) -> f64 {
        match self {
            HyperCoord::LogLengthScale(d) => h.length_scales[d].ln(),
            HyperCoord::SeasonGap => h.season_gap,
        }
    }

    pub fn set(self, h: &mut KernelHyperparams, x: f64) {
        match self {
            HyperCoord::LogLengthScale(d) => h.length_scales[d] = x.exp(),
            HyperCoord::SeasonGap => h.season_gap = x,
        }
    }

    pub fn log_prior(self, x: f64, priors: &Priors) -> f64 {
        match self {
            HyperCoord::LogLengthScale(_) => top_hat(x, priors.log_length_scale),
            HyperCoord::SeasonGap => top_hat(x, priors.season_gap),
        }
    }
}

/// Hyperparameter coordinates that influence the correlation under `space`.
pub fn hyper_coords(h: &KernelHyperparams, space: &InputSpace) -> Vec<HyperCoord> {
    match h.variant {
        KernelVariant::Periodic => vec![HyperCoord::LogLengthScale(0)],
        KernelVariant::Ard | KernelVariant::ArdWithSeasonWarp => {
            let mut out: Vec<HyperCoord> = (0..space.dim)
                .filter(|&d| space.time_dim == Some(d) || space.home_dim == Some(d))
                .map(HyperCoord::LogLengthScale)
                .collect();
            if h.variant == KernelVariant::ArdWithSeasonWarp && space.time_dim.is_some() {
                out.push(HyperCoord::SeasonGap);
            }
            out
        }
    }
}

/// Every sampled coordinate as `(side, feature, coordinate)` when all kernels
/// share `template`'s variant. A shared gap is listed once, under `(U, 0)`.
pub fn coord_layout(
    template: &KernelHyperparams,
    space: &InputSpace,
    features: usize,
    shared_gap: bool,
) -> Vec<(Side, usize, HyperCoord)> {
    let mut out = Vec::new();
    for side in Side::BOTH {
        for k in 0..features {
            for c in hyper_coords(template, space) {
                if c == HyperCoord::SeasonGap && shared_gap && (side, k) != (Side::U, 0) {
                    continue;
                }
                out.push((side, k, c));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Log length scales, log-diagonal factor entries, off-diagonals, log sigma and rho.
    pub slice: SliceConfig,
    pub mean_slice: SliceConfig,
    pub gap_slice: SliceConfig,
    /// When false the GP hyperparameters stay fixed.
    pub sample_hypers: bool,
    /// ESS passes over all members per sweep; they are cheap next to the
    /// hyperparameter updates and the functions mix slowest.
    pub latent_passes: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            slice: SliceConfig::unit(),
            mean_slice: SliceConfig::means(),
            gap_slice: SliceConfig::means(),
            sample_hypers: true,
            latent_passes: 1,
        }
    }
}

/// Complete Markov chain state.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub latent: LatentState,
    pub params: ModelParams,
    pub rng: ChaCha8Rng,
    pub iteration: u64,
}

impl ChainState {
    /// Latent functions at zero (whitened values zero) under `params`.
    pub fn new(design: &Design, params: ModelParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let latent = LatentState {
            u: SideLatent::zeros(design.u_inputs.clone(), &params.hypers_u, &design.space)?,
            v: SideLatent::zeros(design.v_inputs.clone(), &params.hypers_v, &design.space)?,
        };
        Ok(Self {
            latent,
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
            iteration: 0,
        })
    }

    /// Draws latents under fixed `params` from the GP priors.
    pub fn from_prior_latents(design: &Design, params: ModelParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent = LatentState {
            u: SideLatent::sample_prior(design.u_inputs.clone(), &params.hypers_u, &design.space, &mut rng)?,
            v: SideLatent::sample_prior(design.v_inputs.clone(), &params.hypers_v, &design.space, &mut rng)?,
        };
        Ok(Self {
            latent,
            params,
            rng,
            iteration: 0,
        })
    }

    /// Draws the entire state from the prior. `template` fixes the kernel
    /// variant, period and any unsampled length scales.
    pub fn from_prior(design: &Design, priors: &Priors, template: &KernelHyperparams, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = sample_params_prior(design.features(), &design.space, priors, template, &mut rng)?;
        let latent = LatentState {
            u: SideLatent::sample_prior(design.u_inputs.clone(), &params.hypers_u, &design.space, &mut rng)?,
            v: SideLatent::sample_prior(design.v_inputs.clone(), &params.hypers_v, &design.space, &mut rng)?,
        };
        Ok(Self {
            latent,
            params,
            rng,
            iteration: 0,
        })
    }

    /// Data-informed starting point: kernels at `template`, identity
    /// cross-covariances, V functions at zero and U functions drawn from
    /// their priors, means matching the average score, sigma at the score
    /// standard deviation and rho at zero.
    pub fn initialize(design: &Design, template: &KernelHyperparams, seed: u64) -> Result<Self> {
        let k = design.features();
        let scores: Vec<f64> = design.games.iter().flat_map(|g| [g.score_mn, g.score_nm]).collect();
        let (mean, sd) = if scores.len() >= 2 {
            let m = scores.iter().sum::<f64>() / scores.len() as f64;
            let v = scores.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (scores.len() - 1) as f64;
            (m, v.sqrt())
        } else {
            (0.0, 10.0)
        };
        let params = ModelParams {
            hypers_u: vec![template.clone(); k],
            hypers_v: vec![template.clone(); k],
            cc_u: CrossCov::scaled_identity(k, 1.0)?,
            cc_v: CrossCov::scaled_identity(k, 1.0)?,
            mean_u: MeanVec::constant(k, mean / (k as f64 * std::f64::consts::LN_2)),
            mean_v: MeanVec::constant(k, 0.0),
            lik: LikelihoodParams::new(sd.max(1e-3), 0.0)?,
        };
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let latent = LatentState {
            u: SideLatent::sample_prior(design.u_inputs.clone(), &params.hypers_u, &design.space, &mut rng)?,
            v: SideLatent::zeros(design.v_inputs.clone(), &params.hypers_v, &design.space)?,
        };
        Ok(Self {
            latent,
            params,
            rng,
            iteration: 0,
        })
    }

    /// Checks shapes against `design` and the reparameterization identity.
    pub fn validate(&self, design: &Design, tol: f64) -> Result<()> {
        self.params.validate()?;
        for side in Side::BOTH {
            let s = self.latent.side(side);
            let inputs = design.inputs(side);
            if s.blocks.len() != inputs.len() {
                return Err(DpmfError::InvalidState("member count changed".to_string()));
            }
            for (row, pts) in s.blocks.iter().zip(inputs.iter()) {
                if row.len() != design.features() {
                    return Err(DpmfError::InvalidState("feature count changed".to_string()));
                }
                for b in row {
                    if b.len() != pts.len() || b.nu.len() != pts.len() {
                        return Err(DpmfError::InvalidState("latent length mismatch".to_string()));
                    }
                }
            }
        }
        let err = self.latent.max_reparam_error();
        if !(err <= tol) {
            return Err(DpmfError::InvalidState(format!(
                "f differs from m + L nu by {err:e}"
            )));
        }
        Ok(())
    }
}

/// Draws hyperparameters, cross-covariances, means and likelihood parameters from their priors.
pub fn sample_params_prior<R: Rng + ?Sized>(
    features: usize,
    space: &InputSpace,
    priors: &Priors,
    template: &KernelHyperparams,
    rng: &mut R,
) -> Result<ModelParams> {
    let mut draw_hypers = || -> Vec<KernelHyperparams> {
        (0..features)
            .map(|_| {
                let mut h = template.clone();
                for c in hyper_coords(&h, space) {
                    let (lo, hi) = match c {
                        HyperCoord::LogLengthScale(_) => priors.log_length_scale,
                        HyperCoord::SeasonGap => priors.season_gap,
                    };
                    c.set(&mut h, rng.random_range(lo..hi));
                }
                h
            })
            .collect()
    };
    let mut hypers_u = draw_hypers();
    let mut hypers_v = draw_hypers();
    if priors.shared_season_gap {
        let g = hypers_u.first().map(|h| h.season_gap);
        for h in hypers_u.iter_mut().chain(hypers_v.iter_mut()) {
            h.season_gap = g.expect("at least one feature");
        }
    }
    let mut draw_cc = || -> Result<CrossCov> {
        let mut l = DMatrix::zeros(features, features);
        for i in 0..features {
            for j in 0..=i {
                let z: f64 = rng.sample(StandardNormal);
                l[(i, j)] = if i == j {
                    (z * priors.chol_log_diag_sd).exp()
                } else {
                    z * priors.chol_offdiag_sd
                };
            }
        }
        CrossCov::from_chol(l)
    };
    let cc_u = draw_cc()?;
    let cc_v = draw_cc()?;
    let mut draw_mean = || MeanVec {
        mu: (0..features)
            .map(|_| priors.mean_sd * rng.sample::<f64, _>(StandardNormal))
            .collect(),
    };
    let mean_u = draw_mean();
    let mean_v = draw_mean();
    let log_sigma = priors.log_sigma_mean + priors.log_sigma_sd * rng.sample::<f64, _>(StandardNormal);
    let rho = rng.random_range(-1.0..1.0);
    Ok(ModelParams {
        hypers_u,
        hypers_v,
        cc_u,
        cc_v,
        mean_u,
        mean_v,
        lik: LikelihoodParams::new(log_sigma.exp(), rho)?,
    })
}

/// Transition operators bound to one dataset.
pub struct Sampler<'a> {
    pub design: &'a Design,
    pub priors: &'a Priors,
    pub config: SamplerConfig,
}

impl<'a> Sampler<'a> {
    pub fn new(design: &'a Design, priors: &'a Priors, config: SamplerConfig) -> Self {
        Self { design, priors, config }
    }

    pub fn log_likelihood(&self, st: &ChainState) -> f64 {
        self.design.total_loglik(&st.latent, &st.params)
    }

    /// ESS on every member's stacked feature functions, U side then V side.
    pub fn update_latents(&self, st: &mut ChainState) -> Result<()> {
        for side in Side::BOTH {
            for m in 0..st.latent.side(side).members() {
                self.update_member(st, side, m)?;
            }
        }
        Ok(())
    }

    /// ESS over the K functions of one member. Under the prior the stacked
    /// function values are block-diagonal Gaussian; the ellipse is traced in
    /// whitened coordinates, which yields the same proposals as tracing it
    /// through `f` with auxiliary draw `L z`.
    pub fn update_member(&self, st: &mut ChainState, side: Side, m: usize) -> Result<()> {
        let ChainState { latent, params, rng, .. } = st;
        let blocks = &latent.side(side).blocks[m];
        let n = blocks.first().map_or(0, |b| b.len());
        if n == 0 {
            return Ok(());
        }
        let k = blocks.len();
        let mut current = DVector::zeros(k * n);
        for (j, b) in blocks.iter().enumerate() {
            current.rows_mut(j * n, n).copy_from(&b.nu);
        }
        let aux = standard_normal_vec(k * n, rng);
        let zero = DVector::zeros(k * n);
        let current_ll = self.design.member_loglik(latent, params, m, None);
        let outcome = {
            let mut fs: Vec<DVector<f64>> = vec![DVector::zeros(n); k];
            let latent_ref: &LatentState = latent;
            let loglik = |nu: &DVector<f64>| {
                for (j, f) in fs.iter_mut().enumerate() {
                    f.gemv(1.0, &latent_ref.side(side).blocks[m][j].chol, &nu.rows(j * n, n), 0.0);
                }
                let ov = Override { side, member: m, f: &fs };
                self.design.member_loglik(latent_ref, params, m, Some(ov))
            };
            ess_step_with_aux(&current, &zero, &aux, current_ll, loglik, rng)?
        };
        for (j, b) in latent.side_mut(side).blocks[m].iter_mut().enumerate() {
            b.nu = outcome.state.rows(j * n, n).into_owned();
            b.f = &b.chol * &b.nu;
        }
        Ok(())
    }

    /// Slice samples the hyperparameters of feature `k` on `side` with the
    /// whitened values held fixed, so the function values move with them.
    pub fn update_hypers_whitened(&self, st: &mut ChainState, k: usize, side: Side) -> Result<()> {
        let shared = self.priors.shared_season_gap;
        let coords: Vec<HyperCoord> = hyper_coords(&st.params.hypers(side)[k], &self.design.space)
            .into_iter()
            .filter(|&c| !(shared && c == HyperCoord::SeasonGap))
            .collect();
        let ChainState { latent, params, rng, .. } = st;
        for c in coords {
            let x0 = c.get(&params.hypers(side)[k]);
            let cfg = match c {
                HyperCoord::SeasonGap => self.config.gap_slice,
                HyperCoord::LogLengthScale(_) => self.config.slice,
            };
            let result = {
                let density = |x: f64| -> f64 {
                    let lp = c.log_prior(x, self.priors);
                    if !lp.is_finite() {
                        return f64::NEG_INFINITY;
                    }
                    c.set(&mut params.hypers_mut(side)[k], x);
                    let h = params.hypers(side)[k].clone();
                    if latent.side_mut(side).refactor_feature(k, &h, &self.design.space).is_err() {
                        return f64::NEG_INFINITY;
                    }
                    lp + self.design.total_loglik(latent, params)
                };
                slice_sample_1d(x0, density, &cfg, rng)
            };
            let x = match result {
                Ok(x) => x,
                Err(e) => {
                    c.set(&mut params.hypers_mut(side)[k], x0);
                    let h = params.hypers(side)[k].clone();
                    latent.side_mut(side).refactor_feature(k, &h, &self.design.space)?;
                    return Err(e);
                }
            };
            c.set(&mut params.hypers_mut(side)[k], x);
            let h = params.hypers(side)[k].clone();
            latent.side_mut(side).refactor_feature(k, &h, &self.design.space)?;
        }
        Ok(())
    }

    /// Slice update of the season gap shared by every kernel; all features of
    /// both sides move with it at fixed whitened values.
    pub fn update_shared_gap(&self, st: &mut ChainState) -> Result<()> {
        let c = HyperCoord::SeasonGap;
        let has_gap = |h: &KernelHyperparams| hyper_coords(h, &self.design.space).contains(&c);
        if !self.priors.shared_season_gap || !st.params.hypers_u.iter().any(has_gap) {
            return Ok(());
        }
        let space = &self.design.space;
        let apply = |latent: &mut LatentState, params: &mut ModelParams, x: f64| -> Result<()> {
            for side in Side::BOTH {
                for k in 0..params.features() {
                    if has_gap(&params.hypers(side)[k]) {
                        c.set(&mut params.hypers_mut(side)[k], x);
                        let h = params.hypers(side)[k].clone();
                        latent.side_mut(side).refactor_feature(k, &h, space)?;
                    }
                }
            }
            Ok(())
        };
        let ChainState { latent, params, rng, .. } = st;
        let x0 = params.hypers_u.iter().find(|h| has_gap(h)).map(|h| h.season_gap).expect("checked");
        let result = {
            let density = |x: f64| -> f64 {
                let lp = c.log_prior(x, self.priors);
                if !lp.is_finite() || apply(latent, params, x).is_err() {
                    return f64::NEG_INFINITY;
                }
                lp + self.design.total_loglik(latent, params)
            };
            slice_sample_1d(x0, density, &self.config.gap_slice, rng)
        };
        match result {
            Ok(x) => apply(latent, params, x),
            Err(e) => {
                apply(latent, params, x0)?;
                Err(e)
            }
        }
    }

    /// Univariate slice updates of the cross-covariance factors, means, log sigma and rho.
    pub fn update_cross_cov_means_lik(&self, st: &mut ChainState) -> Result<()> {
        let kf = st.params.features();
        let priors = self.priors;
        for side in Side::BOTH {
            for i in 0..kf {
                for j in 0..=i {
                    let diag = i == j;
                    let set = move |p: &mut ModelParams, x: f64| {
                        let mut l = p.cross_cov(side).chol().clone();
                        l[(i, j)] = if diag { x.exp() } else { x };
                        let cc = CrossCov::from_chol(l).expect("positive diagonal by construction");
                        match side {
                            Side::U => p.cc_u = cc,
                            Side::V => p.cc_v = cc,
                        }
                    };
                    let l_ij = st.params.cross_cov(side).chol()[(i, j)];
                    let (x0, sd) = if diag {
                        (l_ij.ln(), priors.chol_log_diag_sd)
                    } else {
                        (l_ij, priors.chol_offdiag_sd)
                    };
                    self.slice_param(st, x0, self.config.slice, |x| gaussian_log(x, 0.0, sd), set)?;
                }
            }
            for i in 0..kf {
                let x0 = st.params.mean(side).mu[i];
                let set = move |p: &mut ModelParams, x: f64| match side {
                    Side::U => p.mean_u.mu[i] = x,
                    Side::V => p.mean_v.mu[i] = x,
                };
                self.slice_param(st, x0, self.config.mean_slice, |x| gaussian_log(x, 0.0, priors.mean_sd), set)?;
            }
        }
        self.update_likelihood_params(st)
    }

    fn update_likelihood_params(&self, st: &mut ChainState) -> Result<()> {
        let ys = self.design.y_pairs(&st.latent, &st.params);
        let games = &self.design.games;
        let lik_sum = |sigma: f64, rho: f64| -> f64 {
            ys.iter()
                .zip(games)
                .map(|(&(a, b), o)| bivariate_logpdf(a, b, o.score_mn, o.score_nm, sigma, rho))
                .sum()
        };
        let rho = st.params.lik.rho;
        let x0 = st.params.lik.sigma.ln();
        let priors = self.priors;
        let log_sigma = slice_sample_1d(
            x0,
            |x| gaussian_log(x, priors.log_sigma_mean, priors.log_sigma_sd) + lik_sum(x.exp(), rho),
            &self.config.slice,
            &mut st.rng,
        )?;
        let sigma = log_sigma.exp();
        let rho = slice_sample_1d(
            rho,
            |r| {
                if r.abs() < 1.0 {
                    lik_sum(sigma, r)
                } else {
                    f64::NEG_INFINITY
                }
            },
            &self.config.slice,
            &mut st.rng,
        )?;
        st.params.lik = LikelihoodParams::new(sigma, rho)?;
        Ok(())
    }

    fn slice_param<P, S>(&self, st: &mut ChainState, x0: f64, cfg: SliceConfig, log_prior: P, set: S) -> Result<()>
    where
        P: Fn(f64) -> f64,
        S: Fn(&mut ModelParams, f64),
    {
        let ChainState { latent, params, rng, .. } = st;
        let x = {
            let density = |x: f64| {
                let lp = log_prior(x);
                if !lp.is_finite() {
                    return f64::NEG_INFINITY;
                }
                set(params, x);
                lp + self.design.total_loglik(latent, params)
            };
            slice_sample_1d(x0, density, &cfg, rng)
        };
        match x {
            Ok(x) => {
                set(params, x);
                Ok(())
            }
            Err(e) => {
                set(params, x0);
                Err(e)
            }
        }
    }

    /// Latents, then (unless frozen) hyperparameters of all 2K kernels, then
    /// cross-covariances, means and likelihood parameters.
    pub fn gibbs_sweep(&self, st: &mut ChainState) -> Result<()> {
        for _ in 0..self.config.latent_passes.max(1) {
            self.update_latents(st)?;
        }
        if self.config.sample_hypers {
            for side in Side::BOTH {
                for k in 0..st.params.features() {
                    self.update_hypers_whitened(st, k, side)?;
                }
            }
            self.update_shared_gap(st)?;
        }
        self.update_cross_cov_means_lik(st)?;
        st.iteration += 1;
        Ok(())
    }
}
