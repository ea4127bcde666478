//! Elliptical slice sampling for vectors with Gaussian priors.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{DpmfError, Result};
use crate::latent::standard_normal_vec;
use crate::samplers::slice::open_unit;

/// Shrink cap; the bracket is narrower than 2 pi * 2^-256 long before this.
pub const ESS_MAX_SHRINKS: usize = 256;

#[derive(Debug, Clone)]
pub struct EssOutcome {
    pub state: DVector<f64>,
    pub loglik: f64,
    pub shrinks: usize,
}

/// Point at angle `theta` on the ellipse through `current` and `aux`, centred on `mean`.
pub fn ellipse_point(current: &DVector<f64>, mean: &DVector<f64>, aux: &DVector<f64>, theta: f64) -> DVector<f64> {
    let (s, c) = theta.sin_cos();
    (current - mean) * c + aux * s + mean
}

/// One ESS transition given a zero-mean auxiliary prior draw `aux`.
pub fn ess_step_with_aux<R, F>(
    current: &DVector<f64>,
    mean: &DVector<f64>,
    aux: &DVector<f64>,
    current_loglik: f64,
    mut loglik: F,
    rng: &mut R,
) -> Result<EssOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&DVector<f64>) -> f64,
{
    if !current_loglik.is_finite() {
        return Err(DpmfError::InvalidState(format!(
            "log likelihood at current state is {current_loglik}"
        )));
    }
    if aux.len() != current.len() || mean.len() != current.len() {
        return Err(DpmfError::DimensionMismatch {
            context: "elliptical slice vectors",
            expected: current.len(),
            actual: aux.len(),
        });
    }
    let threshold = current_loglik + open_unit(rng).ln();
    let mut theta = rng.random::<f64>() * 2.0 * PI;
    let (mut lo, mut hi) = (theta - 2.0 * PI, theta);
    let mut shrinks = 0;
    loop {
        let proposal = ellipse_point(current, mean, aux, theta);
        let ll = loglik(&proposal);
        if ll > threshold {
            return Ok(EssOutcome {
                state: proposal,
                loglik: ll,
                shrinks,
            });
        }
        if theta < 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
        shrinks += 1;
        if shrinks >= ESS_MAX_SHRINKS || hi - lo < f64::EPSILON {
            return Ok(EssOutcome {
                state: current.clone(),
                loglik: current_loglik,
                shrinks,
            });
        }
        theta = lo + rng.random::<f64>() * (hi - lo);
    }
}

/// One ESS transition for `f ~ N(prior_mean, L L^T)` times `exp(loglik(f))`.
pub fn ess_step<R, F>(
    f: &DVector<f64>,
    prior_mean: &DVector<f64>,
    prior_chol: &DMatrix<f64>,
    mut loglik: F,
    rng: &mut R,
) -> Result<EssOutcome>
where
    R: Rng + ?Sized,
    F: FnMut(&DVector<f64>) -> f64,
{
    if prior_chol.nrows() != f.len() || prior_chol.ncols() != f.len() {
        return Err(DpmfError::DimensionMismatch {
            context: "elliptical slice prior factor",
            expected: f.len(),
            actual: prior_chol.nrows(),
        });
    }
    let current_ll = loglik(f);
    let aux = prior_chol * standard_normal_vec(f.len(), rng);
    ess_step_with_aux(f, prior_mean, &aux, current_ll, loglik, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ellipse_endpoints() {
        let cur = DVector::from_vec(vec![1.0, -2.0]);
        let mean = DVector::from_vec(vec![0.5, 0.5]);
        let aux = DVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(ellipse_point(&cur, &mean, &aux, 0.0), cur);
        let q = ellipse_point(&cur, &mean, &aux, PI / 2.0);
        assert!((q - (&mean + &aux)).abs().max() < 1e-15);
    }

    #[test]
    fn non_finite_current_is_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = DVector::zeros(2);
        let r = ess_step(&f, &f, &DMatrix::identity(2, 2), |_| f64::NAN, &mut rng);
        assert!(matches!(r, Err(DpmfError::InvalidState(_))));
    }

    #[test]
    fn gaussian_likelihood_posterior_moments() {
        // prior N(0, 1), likelihood N(2; f, 0.5^2) => posterior N(1.6, 0.2)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = DMatrix::identity(1, 1);
        let m = DVector::zeros(1);
        let mut f = DVector::zeros(1);
        let n = 60_000;
        let (mut s, mut ss) = (0.0, 0.0);
        let mut max_shrinks = 0;
        for _ in 0..n {
            let out = ess_step(&f, &m, &l, |x| -0.5 * ((x[0] - 2.0) / 0.5).powi(2), &mut rng).unwrap();
            max_shrinks = max_shrinks.max(out.shrinks);
            f = out.state;
            s += f[0];
            ss += f[0] * f[0];
        }
        let mean = s / n as f64;
        let var = ss / n as f64 - mean * mean;
        assert!((mean - 1.6).abs() < 0.02, "mean {mean}");
        assert!((var - 0.2).abs() < 0.01, "var {var}");
        assert!(max_shrinks < 64);
    }
}
