//! Posterior predictive distributions for unseen games and the evaluation metrics.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{log_sum_exp, normal_cdf};
use crate::error::{DpmfError, Result};
use crate::kernels::{build_cov_matrix, factored_cov, InputSpace, KernelHyperparams, SideInfoPoint};
use crate::latent::{softplus, standard_normal_vec, whiten, LatentState, ModelParams, Side};
use crate::likelihood::{bivariate_logpdf, GameObservation, LikelihoodParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub y_mn: f64,
    pub y_nm: f64,
    pub lik: LikelihoodParams,
}

/// Equal-weight mixture of bivariate Gaussians over a game's score pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveMixture {
    components: Vec<MixtureComponent>,
}

impl PredictiveMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(DpmfError::Empty("mixture components"));
        }
        for c in &components {
            c.lik.validate()?;
            if !(c.y_mn.is_finite() && c.y_nm.is_finite()) {
                return Err(DpmfError::InvalidParameter("non-finite component mean".to_string()));
            }
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Mixture mean of the score pair.
    pub fn mean(&self) -> (f64, f64) {
        let j = self.components.len() as f64;
        let a = self.components.iter().map(|c| c.y_mn).sum::<f64>() / j;
        let b = self.components.iter().map(|c| c.y_nm).sum::<f64>() / j;
        (a, b)
    }

    pub fn log_density(&self, z_mn: f64, z_nm: f64) -> f64 {
        let lls: Vec<f64> = self
            .components
            .iter()
            .map(|c| bivariate_logpdf(c.y_mn, c.y_nm, z_mn, z_nm, c.lik.sigma, c.lik.rho))
            .collect();
        log_sum_exp(&lls) - (lls.len() as f64).ln()
    }

    /// Same mixture seen from the column member.
    pub fn swapped(&self) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| MixtureComponent {
                    y_mn: c.y_nm,
                    y_nm: c.y_mn,
                    lik: c.lik,
                })
                .collect(),
        }
    }
}

/// Bookmaker line for one game.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertLine {
    pub over_under: f64,
    /// Points added to the home score to level the game; negative when home is favoured.
    pub home_spread: f64,
}

impl ExpertLine {
    pub fn new(over_under: f64, home_spread: f64) -> Result<Self> {
        if !(over_under > 0.0 && over_under.is_finite() && home_spread.is_finite()) {
            return Err(DpmfError::InvalidParameter(format!(
                "expert line needs a positive total, got over/under {over_under}, spread {home_spread}"
            )));
        }
        Ok(Self {
            over_under,
            home_spread,
        })
    }
}

/// Scores implied by a line: `away + home = over_under`, `away - home = home_spread`.
pub fn expert_scores(line: &ExpertLine) -> (f64, f64) {
    let away = (line.over_under + line.home_spread) / 2.0;
    let home = (line.over_under - line.home_spread) / 2.0;
    (away, home)
}

/// Log predictive probability of the observed scores: log of the mean component density.
pub fn rao_blackwell_logprob(mix: &PredictiveMixture, obs: &GameObservation) -> f64 {
    mix.log_density(obs.score_mn, obs.score_nm)
}

/// Probability that the row member outscores the column member.
pub fn winner_prob(mix: &PredictiveMixture) -> f64 {
    let s: f64 = mix
        .components
        .iter()
        .map(|c| {
            let sd = (2.0 * c.lik.sigma * c.lik.sigma * (1.0 - c.lik.rho)).sqrt();
            normal_cdf((c.y_mn - c.y_nm) / sd)
        })
        .sum();
    (s / mix.len() as f64).clamp(0.0, 1.0)
}

/// Moments of the GP conditional at `test` given whitened training values.
/// `chol` factors the (jittered) training correlation matrix.
pub fn conditional_moments(
    train: &[SideInfoPoint],
    chol: &DMatrix<f64>,
    nu: &DVector<f64>,
    test: &[SideInfoPoint],
    h: &KernelHyperparams,
    space: &InputSpace,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if test.is_empty() {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    let kss = build_cov_matrix(test, h, space)?.values;
    if train.is_empty() {
        return Ok((DVector::zeros(test.len()), kss));
    }
    if chol.nrows() != train.len() || nu.len() != train.len() {
        return Err(DpmfError::DimensionMismatch {
            context: "training factor vs inputs",
            expected: train.len(),
            actual: chol.nrows(),
        });
    }
    let ks = space.cross_matrix(train, test, h)?;
    let a = chol
        .solve_lower_triangular(&ks)
        .ok_or(DpmfError::SingularFactor(train.len()))?;
    let mean = a.tr_mul(nu);
    let cov = kss - a.tr_mul(&a);
    Ok((mean, cov))
}

/// Draw from `N(mean, cov)` through a clipped eigendecomposition, so that
/// numerically singular conditionals (test point equal to a training point) stay exact.
pub fn draw_gaussian<R: Rng + ?Sized>(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let n = mean.len();
    if n == 0 {
        return DVector::zeros(0);
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let z = standard_normal_vec(n, rng);
    let scaled = DVector::from_fn(n, |i, _| eig.eigenvalues[i].max(0.0).sqrt() * z[i]);
    mean + eig.eigenvectors * scaled
}

/// Posterior draw of `f*` given `f` at `train` under a zero-mean GP.
/// With no training inputs this is a prior draw.
pub fn gp_conditional<R: Rng + ?Sized>(
    train: &[SideInfoPoint],
    train_f: &DVector<f64>,
    test: &[SideInfoPoint],
    h: &KernelHyperparams,
    space: &InputSpace,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if train.len() != train_f.len() {
        return Err(DpmfError::DimensionMismatch {
            context: "training inputs vs values",
            expected: train.len(),
            actual: train_f.len(),
        });
    }
    let (chol, nu) = if train.is_empty() {
        (DMatrix::zeros(0, 0), DVector::zeros(0))
    } else {
        let (l, _) = factored_cov(train, h, space)?;
        let nu = whiten(train_f, &DVector::zeros(train.len()), &l)?;
        (l, nu)
    };
    let (mean, cov) = conditional_moments(train, &chol, &nu, test, h, space)?;
    Ok(draw_gaussian(&mean, &cov, rng))
}

/// A game to predict, from the row member's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestGame {
    pub row_member: usize,
    pub col_member: usize,
    pub side_info: SideInfoPoint,
}

/// Draws function values at every test input for one posterior state and
/// returns one mixture component per test game. Test points of a member are
/// drawn jointly, so games sharing a point share its function value.
pub fn predict_components<R: Rng + ?Sized>(
    space: &InputSpace,
    latent: &LatentState,
    params: &ModelParams,
    tests: &[TestGame],
    rng: &mut R,
) -> Result<Vec<MixtureComponent>> {
    let members = latent.u.members();
    let k = params.features();
    // per side: member -> (points, key -> index)
    let mut points: [Vec<Vec<SideInfoPoint>>; 2] = [vec![Vec::new(); members], vec![Vec::new(); members]];
    let mut lookup: [Vec<HashMap<Vec<u64>, usize>>; 2] = [vec![HashMap::new(); members], vec![HashMap::new(); members]];
    let mut slot = |s: usize, m: usize, x: &SideInfoPoint| -> usize {
        let next = points[s][m].len();
        let idx = *lookup[s][m].entry(x.key()).or_insert(next);
        if idx == next {
            points[s][m].push(x.clone());
        }
        idx
    };
    let mut idx = Vec::with_capacity(tests.len());
    for t in tests {
        let (m, n) = (t.row_member, t.col_member);
        if m >= members || n >= members {
            return Err(DpmfError::UnknownMember(format!(
                "test game references member {} but M = {members}",
                m.max(n)
            )));
        }
        if t.side_info.dim() != space.dim {
            return Err(DpmfError::DimensionMismatch {
                context: "test side information",
                expected: space.dim,
                actual: t.side_info.dim(),
            });
        }
        let xr = space.mirror(&t.side_info);
        idx.push([slot(0, m, &t.side_info), slot(1, n, &t.side_info), slot(0, n, &xr), slot(1, m, &xr)]);
    }

    // draws[side][member][feature] at that member's test points
    let mut draws: [Vec<Vec<DVector<f64>>>; 2] = [Vec::new(), Vec::new()];
    for (s, side) in Side::BOTH.into_iter().enumerate() {
        let sl = latent.side(side);
        let hypers = params.hypers(side);
        for m in 0..members {
            let test_pts = &points[s][m];
            let mut row = Vec::with_capacity(k);
            for (j, h) in hypers.iter().enumerate() {
                if test_pts.is_empty() {
                    row.push(DVector::zeros(0));
                    continue;
                }
                let block = &sl.blocks[m][j];
                let (mean, cov) = conditional_moments(&sl.inputs[m], &block.chol, &block.nu, test_pts, h, space)?;
                row.push(draw_gaussian(&mean, &cov, rng));
            }
            draws[s].push(row);
        }
    }

    let feature = |s: usize, side: Side, m: usize, i: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|j| draws[s][m][j][i]).collect();
        let l = params.cross_cov(side).chol();
        let mu = &params.mean(side).mu;
        (0..k)
            .map(|a| mu[a] + (0..=a).map(|b| l[(a, b)] * raw[b]).sum::<f64>())
            .collect()
    };
    let y = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * softplus(*b)).sum() };

    Ok(tests
        .iter()
        .zip(idx)
        .map(|(t, [fu, fv, ru, rv])| {
            let (m, n) = (t.row_member, t.col_member);
            let y_mn = y(&feature(0, Side::U, m, fu), &feature(1, Side::V, n, fv));
            let y_nm = y(&feature(0, Side::U, n, ru), &feature(1, Side::V, m, rv));
            MixtureComponent {
                y_mn,
                y_nm,
                lik: params.lik,
            }
        })
        .collect())
}

/// A stored posterior state.
#[derive(Debug, Clone)]
pub struct StoredSample {
    pub latent: LatentState,
    pub params: ModelParams,
}

/// One mixture component per stored sample for the matchup `(m, n)` at `x`.
pub fn predict_game<R: Rng + ?Sized>(
    samples: &[StoredSample],
    space: &InputSpace,
    m: usize,
    n: usize,
    x: &SideInfoPoint,
    rng: &mut R,
) -> Result<PredictiveMixture> {
    if samples.is_empty() {
        return Err(DpmfError::Empty("stored samples"));
    }
    let test = [TestGame {
        row_member: m,
        col_member: n,
        side_info: x.clone(),
    }];
    let mut comps = Vec::with_capacity(samples.len());
    for s in samples {
        comps.extend(predict_components(space, &s.latent, &s.params, &test, rng)?);
    }
    PredictiveMixture::new(comps)
}

/// Per-game evaluation terms; metrics over any grouping are means of these.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameScore {
    pub logprob: f64,
    pub winner_error: bool,
    /// Sum of the two squared score errors.
    pub sq_err: f64,
}

/// Winner call from a probability; an exact 0.5 or a tied result is an error.
pub fn winner_error(p_row_wins: f64, obs: &GameObservation) -> bool {
    let row_won = obs.score_mn > obs.score_nm;
    let col_won = obs.score_nm > obs.score_mn;
    !((p_row_wins > 0.5 && row_won) || (p_row_wins < 0.5 && col_won))
}

pub fn score_game(mix: &PredictiveMixture, obs: &GameObservation) -> GameScore {
    let (a, b) = mix.mean();
    GameScore {
        logprob: rao_blackwell_logprob(mix, obs),
        winner_error: winner_error(winner_prob(mix), obs),
        sq_err: (a - obs.score_mn).powi(2) + (b - obs.score_nm).powi(2),
    }
}

/// Scores a point forecast; the log probability is undefined and reported as NaN.
pub fn score_point(pred: (f64, f64), obs: &GameObservation) -> GameScore {
    let p = if pred.0 > pred.1 {
        1.0
    } else if pred.0 < pred.1 {
        0.0
    } else {
        0.5
    };
    GameScore {
        logprob: f64::NAN,
        winner_error: winner_error(p, obs),
        sq_err: (pred.0 - obs.score_mn).powi(2) + (pred.1 - obs.score_nm).powi(2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mean_logprob: f64,
    pub winner_error_pct: f64,
    pub rmse: f64,
    pub games: usize,
}

impl Metrics {
    pub fn from_scores(scores: &[GameScore]) -> Result<Self> {
        if scores.is_empty() {
            return Err(DpmfError::Empty("scored games"));
        }
        let g = scores.len() as f64;
        Ok(Self {
            mean_logprob: scores.iter().map(|s| s.logprob).sum::<f64>() / g,
            winner_error_pct: 100.0 * scores.iter().filter(|s| s.winner_error).count() as f64 / g,
            rmse: (scores.iter().map(|s| s.sq_err).sum::<f64>() / (2.0 * g)).sqrt(),
            games: scores.len(),
        })
    }
}

/// Mean log probability, winner error in percent and per-component RMSE.
pub fn metrics(predictions: &[PredictiveMixture], truths: &[GameObservation]) -> Result<Metrics> {
    if predictions.len() != truths.len() {
        return Err(DpmfError::DimensionMismatch {
            context: "predictions vs truths",
            expected: truths.len(),
            actual: predictions.len(),
        });
    }
    let scores: Vec<GameScore> = predictions.iter().zip(truths).map(|(p, o)| score_game(p, o)).collect();
    Metrics::from_scores(&scores)
}

/// Density of `mix` on a regular `n x n` grid centred at its mean, `half_width` points each way.
pub fn density_grid(mix: &PredictiveMixture, half_width: f64, n: usize) -> Vec<(f64, f64, f64)> {
    let (cx, cy) = mix.mean();
    let step = if n > 1 { 2.0 * half_width / (n - 1) as f64 } else { 0.0 };
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let x = cx - half_width + step * i as f64;
        for j in 0..n {
            let y = cy - half_width + step * j as f64;
            out.push((x, y, mix.log_density(x, y).exp()));
        }
    }
    out
}
