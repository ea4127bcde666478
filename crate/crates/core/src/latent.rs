//! Latent feature functions: shapes, cross-covariance mixing, means, the
//! softplus positivity transform and the whitened representation of every
//! GP-distributed vector of function values.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::design::Design;
use crate::error::{DpmfError, Result};
use crate::kernels::{factored_cov, InputSpace, KernelHyperparams, SideInfoPoint};
use crate::likelihood::{sample_pair, GameObservation, LikelihoodParams};

/// Upper bound on the latent feature count; keeps per-entry work on the stack.
pub const MAX_FEATURES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    /// Row members (M).
    pub rows: usize,
    /// Column members (N).
    pub cols: usize,
    /// Latent features (K).
    pub features: usize,
    /// Side-information dimension (D).
    pub dim: usize,
}

impl ModelShape {
    pub fn new(rows: usize, cols: usize, features: usize, dim: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || features == 0 || dim == 0 {
            return Err(DpmfError::InvalidParameter(format!(
                "model shape must be positive, got M={rows} N={cols} K={features} D={dim}"
            )));
        }
        if features > MAX_FEATURES {
            return Err(DpmfError::InvalidParameter(format!(
                "at most {MAX_FEATURES} latent features are supported, got {features}"
            )));
        }
        Ok(Self {
            rows,
            cols,
            features,
            dim,
        })
    }
}

/// Which factor a latent function belongs to: row (U, "offense") or column (V, "defense").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    U,
    V,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::U, Side::V];
}

/// Inter-feature covariance and its lower Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCov {
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
}

impl CrossCov {
    /// From a lower-triangular factor with strictly positive diagonal.
    pub fn from_chol(chol: DMatrix<f64>) -> Result<Self> {
        let k = chol.nrows();
        if chol.ncols() != k || k == 0 {
            return Err(DpmfError::InvalidParameter(
                "cross-covariance factor must be square and nonempty".to_string(),
            ));
        }
        for i in 0..k {
            if !(chol[(i, i)] > 0.0 && chol[(i, i)].is_finite()) {
                return Err(DpmfError::InvalidParameter(format!(
                    "cross-covariance factor diagonal {i} must be positive, got {}",
                    chol[(i, i)]
                )));
            }
            for j in (i + 1)..k {
                if chol[(i, j)] != 0.0 {
                    return Err(DpmfError::InvalidParameter(
                        "cross-covariance factor must be lower triangular".to_string(),
                    ));
                }
            }
        }
        let sigma = &chol * chol.transpose();
        Ok(Self { sigma, chol })
    }

    pub fn from_sigma(sigma: DMatrix<f64>) -> Result<Self> {
        let chol = crate::kernels::try_cholesky(&sigma, 0.0).ok_or(DpmfError::NotPositiveDefinite {
            n: sigma.nrows(),
            max_jitter: 0.0,
        })?;
        Self::from_chol(chol)
    }

    pub fn scaled_identity(k: usize, scale: f64) -> Result<Self> {
        Self::from_chol(DMatrix::identity(k, k) * scale)
    }

    pub fn features(&self) -> usize {
        self.chol.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVec {
    pub mu: Vec<f64>,
}

impl MeanVec {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(DpmfError::InvalidParameter("non-finite mean".to_string()));
        }
        Ok(Self { mu })
    }

    pub fn constant(k: usize, value: f64) -> Self {
        Self { mu: vec![value; k] }
    }
}

/// `ln(1 + e^r)`, without overflow for large `r`.
#[inline]
pub fn softplus(r: f64) -> f64 {
    if r > 30.0 {
        r + (-r).exp().ln_1p()
    } else {
        r.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for positive arguments.
pub fn softplus_inv(s: f64) -> f64 {
    if s > 30.0 {
        s + (-(-s).exp()).ln_1p()
    } else {
        s.exp_m1().ln()
    }
}

/// `L_sigma * f + mu` for the K function values of one member at one input.
pub fn assemble_feature(f_stack: &[f64], cc: &CrossCov, mean: &MeanVec) -> Result<DVector<f64>> {
    let k = cc.features();
    if f_stack.len() != k || mean.mu.len() != k {
        return Err(DpmfError::DimensionMismatch {
            context: "feature stack",
            expected: k,
            actual: if f_stack.len() != k { f_stack.len() } else { mean.mu.len() },
        });
    }
    let f = DVector::from_column_slice(f_stack);
    Ok(cc.chol() * f + DVector::from_column_slice(&mean.mu))
}

/// `sum_k u_k * softplus(v_raw_k)`.
pub fn latent_y(u: &[f64], v_raw: &[f64]) -> Result<f64> {
    if u.len() != v_raw.len() {
        return Err(DpmfError::DimensionMismatch {
            context: "latent_y feature vectors",
            expected: u.len(),
            actual: v_raw.len(),
        });
    }
    Ok(u.iter().zip(v_raw).map(|(a, b)| a * softplus(*b)).sum())
}

/// Solves `L nu = f - mean` by forward substitution.
pub fn whiten(f: &DVector<f64>, mean: &DVector<f64>, chol: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = f.len();
    if mean.len() != n || chol.nrows() != n || chol.ncols() != n {
        return Err(DpmfError::DimensionMismatch {
            context: "whiten",
            expected: n,
            actual: chol.nrows(),
        });
    }
    let mut nu = f - mean;
    for i in 0..n {
        let mut s = nu[i];
        for j in 0..i {
            s -= chol[(i, j)] * nu[j];
        }
        let d = chol[(i, i)];
        if d == 0.0 || !d.is_finite() {
            return Err(DpmfError::SingularFactor(i));
        }
        nu[i] = s / d;
    }
    Ok(nu)
}

/// `mean + L nu`.
pub fn unwhiten(nu: &DVector<f64>, mean: &DVector<f64>, chol: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = nu.len();
    if mean.len() != n || chol.nrows() != n || chol.ncols() != n {
        return Err(DpmfError::DimensionMismatch {
            context: "unwhiten",
            expected: n,
            actual: chol.nrows(),
        });
    }
    Ok(mean + chol * nu)
}

/// Function values of one feature for one member, at that member's inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub f: DVector<f64>,
    pub nu: DVector<f64>,
    /// Factor of the (jittered) correlation matrix at the member's inputs.
    pub chol: DMatrix<f64>,
    pub jitter: f64,
}

impl FeatureBlock {
    pub fn empty() -> Self {
        Self {
            f: DVector::zeros(0),
            nu: DVector::zeros(0),
            chol: DMatrix::zeros(0, 0),
            jitter: 0.0,
        }
    }

    pub fn from_nu(nu: DVector<f64>, chol: DMatrix<f64>, jitter: f64) -> Self {
        let f = &chol * &nu;
        Self { f, nu, chol, jitter }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }
}

/// Latent functions of one side, evaluated only where members have observations.
#[derive(Debug, Clone)]
pub struct SideLatent {
    /// Unique side-information points per member.
    pub inputs: Arc<Vec<Vec<SideInfoPoint>>>,
    /// `blocks[member][feature]`.
    pub blocks: Vec<Vec<FeatureBlock>>,
}

impl SideLatent {
    /// Builds function values from whitened vectors under the given hyperparameters.
    pub fn from_whitened(
        inputs: Arc<Vec<Vec<SideInfoPoint>>>,
        nus: Vec<Vec<DVector<f64>>>,
        hypers: &[KernelHyperparams],
        space: &InputSpace,
    ) -> Result<Self> {
        let mut blocks = Vec::with_capacity(inputs.len());
        for (pts, member_nus) in inputs.iter().zip(nus) {
            if member_nus.len() != hypers.len() {
                return Err(DpmfError::DimensionMismatch {
                    context: "whitened feature count",
                    expected: hypers.len(),
                    actual: member_nus.len(),
                });
            }
            let mut row = Vec::with_capacity(hypers.len());
            for (h, nu) in hypers.iter().zip(member_nus) {
                if pts.is_empty() {
                    row.push(FeatureBlock::empty());
                    continue;
                }
                if nu.len() != pts.len() {
                    return Err(DpmfError::DimensionMismatch {
                        context: "whitened vector length",
                        expected: pts.len(),
                        actual: nu.len(),
                    });
                }
                let (chol, jitter) = factored_cov(pts, h, space)?;
                row.push(FeatureBlock::from_nu(nu, chol, jitter));
            }
            blocks.push(row);
        }
        Ok(Self { inputs, blocks })
    }

    pub fn sample_prior<R: Rng + ?Sized>(
        inputs: Arc<Vec<Vec<SideInfoPoint>>>,
        hypers: &[KernelHyperparams],
        space: &InputSpace,
        rng: &mut R,
    ) -> Result<Self> {
        let nus = inputs
            .iter()
            .map(|pts| {
                hypers
                    .iter()
                    .map(|_| standard_normal_vec(pts.len(), rng))
                    .collect()
            })
            .collect();
        Self::from_whitened(inputs, nus, hypers, space)
    }

    pub fn zeros(
        inputs: Arc<Vec<Vec<SideInfoPoint>>>,
        hypers: &[KernelHyperparams],
        space: &InputSpace,
    ) -> Result<Self> {
        let nus = inputs
            .iter()
            .map(|pts| hypers.iter().map(|_| DVector::zeros(pts.len())).collect())
            .collect();
        Self::from_whitened(inputs, nus, hypers, space)
    }

    pub fn members(&self) -> usize {
        self.blocks.len()
    }

    /// Recomputes factors and `f = L nu` for feature `k` of every member.
    pub fn refactor_feature(&mut self, k: usize, h: &KernelHyperparams, space: &InputSpace) -> Result<()> {
        for (pts, row) in self.inputs.iter().zip(self.blocks.iter_mut()) {
            if pts.is_empty() {
                continue;
            }
            let (chol, jitter) = factored_cov(pts, h, space)?;
            let nu = std::mem::replace(&mut row[k].nu, DVector::zeros(0));
            row[k] = FeatureBlock::from_nu(nu, chol, jitter);
        }
        Ok(())
    }

    /// Largest `|f - L nu|` over all blocks.
    pub fn max_reparam_error(&self) -> f64 {
        self.blocks
            .iter()
            .flatten()
            .filter(|b| !b.is_empty())
            .map(|b| (&b.f - &b.chol * &b.nu).abs().max())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct LatentState {
    pub u: SideLatent,
    pub v: SideLatent,
}

impl LatentState {
    pub fn side(&self, side: Side) -> &SideLatent {
        match side {
            Side::U => &self.u,
            Side::V => &self.v,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut SideLatent {
        match side {
            Side::U => &mut self.u,
            Side::V => &mut self.v,
        }
    }

    pub fn max_reparam_error(&self) -> f64 {
        self.u.max_reparam_error().max(self.v.max_reparam_error())
    }
}

/// Every non-latent quantity of the model: GP hyperparameters, cross-covariances,
/// means and likelihood parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hypers_u: Vec<KernelHyperparams>,
    pub hypers_v: Vec<KernelHyperparams>,
    pub cc_u: CrossCov,
    pub cc_v: CrossCov,
    pub mean_u: MeanVec,
    pub mean_v: MeanVec,
    pub lik: LikelihoodParams,
}

impl ModelParams {
    pub fn features(&self) -> usize {
        self.cc_u.features()
    }

    pub fn hypers(&self, side: Side) -> &[KernelHyperparams] {
        match side {
            Side::U => &self.hypers_u,
            Side::V => &self.hypers_v,
        }
    }

    pub fn hypers_mut(&mut self, side: Side) -> &mut Vec<KernelHyperparams> {
        match side {
            Side::U => &mut self.hypers_u,
            Side::V => &mut self.hypers_v,
        }
    }

    pub fn cross_cov(&self, side: Side) -> &CrossCov {
        match side {
            Side::U => &self.cc_u,
            Side::V => &self.cc_v,
        }
    }

    pub fn mean(&self, side: Side) -> &MeanVec {
        match side {
            Side::U => &self.mean_u,
            Side::V => &self.mean_v,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.features();
        if self.cc_v.features() != k
            || self.hypers_u.len() != k
            || self.hypers_v.len() != k
            || self.mean_u.mu.len() != k
            || self.mean_v.mu.len() != k
        {
            return Err(DpmfError::InvalidParameter(format!(
                "inconsistent feature counts (K = {k})"
            )));
        }
        for h in self.hypers_u.iter().chain(&self.hypers_v) {
            h.validate()?;
        }
        self.lik.validate()
    }
}

pub(crate) fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Ground truth produced by forward simulation.
#[derive(Debug, Clone)]
pub struct SyntheticTruth {
    pub design: Design,
    pub latent: LatentState,
    pub params: ModelParams,
    /// Latent means `(y_mn, y_nm)` per observation.
    pub y: Vec<(f64, f64)>,
}

/// Draws every latent function from its GP prior at the inputs implied by
/// `slots` (row member, column member, side information), assembles Y and
/// samples the scores. Deterministic in `seed`.
pub fn generate_synthetic(
    shape: ModelShape,
    space: InputSpace,
    params: ModelParams,
    slots: &[(usize, usize, SideInfoPoint)],
    seed: u64,
) -> Result<SyntheticTruth> {
    params.validate()?;
    if params.features() != shape.features {
        return Err(DpmfError::DimensionMismatch {
            context: "feature count",
            expected: shape.features,
            actual: params.features(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let games: Vec<GameObservation> = slots
        .iter()
        .map(|(m, n, x)| GameObservation {
            row_member: *m,
            col_member: *n,
            side_info: x.clone(),
            score_mn: 0.0,
            score_nm: 0.0,
        })
        .collect();
    let mut design = Design::new(shape, space, games)?;
    let latent = LatentState {
        u: SideLatent::sample_prior(design.u_inputs.clone(), &params.hypers_u, &design.space, &mut rng)?,
        v: SideLatent::sample_prior(design.v_inputs.clone(), &params.hypers_v, &design.space, &mut rng)?,
    };
    let y = design.y_pairs(&latent, &params);
    for (g, &(a, b)) in y.iter().enumerate() {
        let (z1, z2) = sample_pair(a, b, &params.lik, &mut rng)?;
        design.games[g].score_mn = z1;
        design.games[g].score_nm = z2;
    }
    Ok(SyntheticTruth {
        design,
        latent,
        params,
        y,
    })
}
