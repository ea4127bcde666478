//! Conditional score model: a correlated bivariate Gaussian over the two
//! scores of a game, sharing one variance across all games.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DpmfError, Result};
use crate::kernels::SideInfoPoint;

/// One dyadic observation: the scores of row member `m` against column member `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameObservation {
    pub row_member: usize,
    pub col_member: usize,
    /// Side information from the row member's point of view.
    pub side_info: SideInfoPoint,
    /// Points scored by the row member.
    pub score_mn: f64,
    /// Points scored by the column member.
    pub score_nm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodParams {
    pub sigma: f64,
    pub rho: f64,
}

impl LikelihoodParams {
    pub fn new(sigma: f64, rho: f64) -> Result<Self> {
        let p = Self { sigma, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(DpmfError::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(DpmfError::InvalidParameter(format!(
                "rho must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Log density of the score pair `(z_mn, z_nm)` given means `(y_mn, y_nm)`.
/// Parameters are assumed valid.
#[inline]
pub fn bivariate_logpdf(y_mn: f64, y_nm: f64, z_mn: f64, z_nm: f64, sigma: f64, rho: f64) -> f64 {
    let d1 = z_mn - y_mn;
    let d2 = z_nm - y_nm;
    let s2 = sigma * sigma;
    let one_m_r2 = 1.0 - rho * rho;
    let q = (d1 * d1 - 2.0 * rho * d1 * d2 + d2 * d2) / (s2 * one_m_r2);
    -(2.0 * PI).ln() - s2.ln() - 0.5 * one_m_r2.ln() - 0.5 * q
}

pub fn loglik_pair(y_mn: f64, y_nm: f64, obs: &GameObservation, p: &LikelihoodParams) -> Result<f64> {
    p.validate()?;
    Ok(bivariate_logpdf(y_mn, y_nm, obs.score_mn, obs.score_nm, p.sigma, p.rho))
}

/// Exact draw of a score pair.
pub fn sample_pair<R: Rng + ?Sized>(
    y_mn: f64,
    y_nm: f64,
    p: &LikelihoodParams,
    rng: &mut R,
) -> Result<(f64, f64)> {
    p.validate()?;
    let e1: f64 = rng.sample(StandardNormal);
    let e2: f64 = rng.sample(StandardNormal);
    let z1 = y_mn + p.sigma * e1;
    let z2 = y_nm + p.sigma * (p.rho * e1 + (1.0 - p.rho * p.rho).sqrt() * e2);
    Ok((z1, z2))
}

/// Sum of per-game terms; `ys[i]` holds the latent pair for `obs[i]`.
pub fn loglik_total(ys: &[(f64, f64)], obs: &[GameObservation], p: &LikelihoodParams) -> Result<f64> {
    if ys.len() != obs.len() {
        return Err(DpmfError::DimensionMismatch {
            context: "latent pairs vs observations",
            expected: obs.len(),
            actual: ys.len(),
        });
    }
    p.validate()?;
    Ok(ys
        .iter()
        .zip(obs)
        .map(|(&(a, b), o)| bivariate_logpdf(a, b, o.score_mn, o.score_nm, p.sigma, p.rho))
        .sum())
}

/// Independent scalar Gaussian term, for single-entry PMF observations.
pub fn loglik_scalar(y: f64, z: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(DpmfError::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let d = (z - y) / sigma;
    Ok(-0.5 * (2.0 * PI).ln() - sigma.ln() - 0.5 * d * d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn obs(a: f64, b: f64) -> GameObservation {
        GameObservation {
            row_member: 0,
            col_member: 1,
            side_info: SideInfoPoint { coords: vec![0.0] },
            score_mn: a,
            score_nm: b,
        }
    }

    #[test]
    fn loglik_at_mean() {
        let p = LikelihoodParams::new(10.0, 0.0).unwrap();
        let v = loglik_pair(100.0, 95.0, &obs(100.0, 95.0), &p).unwrap();
        assert_abs_diff_eq!(v, -(2.0 * PI * 100.0).ln(), epsilon = 1e-12);
        // rounded reference values carry a few 1e-5 of rounding
        assert_abs_diff_eq!(v, -6.44303, epsilon = 1e-4);
        let p = LikelihoodParams::new(10.0, 0.4).unwrap();
        let v = loglik_pair(100.0, 95.0, &obs(100.0, 95.0), &p).unwrap();
        assert_abs_diff_eq!(v, -(2.0 * PI * 100.0 * 0.84f64.sqrt()).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, -6.35580, epsilon = 1e-4);
    }

    #[test]
    fn loglik_swap_symmetry() {
        let p = LikelihoodParams::new(7.0, -0.3).unwrap();
        let a = loglik_pair(101.0, 93.0, &obs(110.0, 90.0), &p).unwrap();
        let b = loglik_pair(93.0, 101.0, &obs(90.0, 110.0), &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loglik_rho_zero_is_sum_of_univariates() {
        let p = LikelihoodParams::new(9.0, 0.0).unwrap();
        let a = loglik_pair(101.0, 93.0, &obs(110.0, 90.0), &p).unwrap();
        let b = loglik_scalar(101.0, 110.0, 9.0).unwrap() + loglik_scalar(93.0, 90.0, 9.0).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn invalid_params() {
        assert!(LikelihoodParams::new(0.0, 0.0).is_err());
        assert!(LikelihoodParams::new(1.0, 1.0).is_err());
        assert!(LikelihoodParams::new(1.0, -1.0).is_err());
        let bad = LikelihoodParams { sigma: 1.0, rho: 1.5 };
        assert!(loglik_pair(0.0, 0.0, &obs(0.0, 0.0), &bad).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_pair(0.0, 0.0, &bad, &mut rng).is_err());
    }

    #[test]
    fn integrates_to_one() {
        let p = LikelihoodParams::new(10.0, 0.4).unwrap();
        let (y1, y2) = (100.0, 104.0);
        let n = 200;
        let half = 6.0 * p.sigma;
        let h = 2.0 * half / (n - 1) as f64;
        let mut total = 0.0;
        for i in 0..n {
            let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            for j in 0..n {
                let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                let z1 = y1 - half + i as f64 * h;
                let z2 = y2 - half + j as f64 * h;
                total += wi * wj * bivariate_logpdf(y1, y2, z1, z2, p.sigma, p.rho).exp();
            }
        }
        total *= h * h;
        assert!((total - 1.0).abs() < 1e-3, "integral {total}");
    }

    #[test]
    fn maximized_at_mean() {
        let p = LikelihoodParams::new(10.0, 0.4).unwrap();
        let best = bivariate_logpdf(100.0, 90.0, 100.0, 90.0, p.sigma, p.rho);
        for dx in [-1.0, -0.1, 0.0, 0.1, 1.0] {
            for dy in [-1.0, -0.1, 0.0, 0.1, 1.0] {
                if dx == 0.0 && dy == 0.0 {
                    continue;
                }
                assert!(bivariate_logpdf(100.0, 90.0, 100.0 + dx, 90.0 + dy, p.sigma, p.rho) < best);
            }
        }
    }

    #[test]
    fn total_matches_brute_force() {
        let p = LikelihoodParams::new(8.0, 0.2).unwrap();
        assert_eq!(loglik_total(&[], &[], &p).unwrap(), 0.0);
        let o = vec![obs(100.0, 90.0), obs(87.0, 112.0)];
        let ys = vec![(98.0, 95.0), (90.0, 101.0)];
        let one = loglik_total(&ys[..1], &o[..1], &p).unwrap();
        assert_eq!(one, loglik_pair(98.0, 95.0, &o[0], &p).unwrap());
        let brute = loglik_pair(98.0, 95.0, &o[0], &p).unwrap() + loglik_pair(90.0, 101.0, &o[1], &p).unwrap();
        assert_abs_diff_eq!(loglik_total(&ys, &o, &p).unwrap(), brute, epsilon = 1e-12);
        assert!(loglik_total(&ys[..1], &o, &p).is_err());
    }

    #[test]
    fn sample_moments() {
        let p = LikelihoodParams::new(10.0, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let (mut s1, mut s2, mut s11, mut s22, mut s12) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let (a, b) = sample_pair(100.0, 90.0, &p, &mut rng).unwrap();
            let (a, b) = (a - 100.0, b - 90.0);
            s1 += a;
            s2 += b;
            s11 += a * a;
            s22 += b * b;
            s12 += a * b;
        }
        let nf = n as f64;
        let (m1, m2) = (s1 / nf, s2 / nf);
        let v1 = s11 / nf - m1 * m1;
        let v2 = s22 / nf - m2 * m2;
        let r = (s12 / nf - m1 * m2) / (v1 * v2).sqrt();
        let se_mean = 10.0 / nf.sqrt();
        assert!(m1.abs() < 4.0 * se_mean && m2.abs() < 4.0 * se_mean);
        // var of sample variance ~ 2 sigma^4 / n
        let se_var = (2.0f64).sqrt() * 100.0 / nf.sqrt();
        assert!((v1 - 100.0).abs() < 4.0 * se_var && (v2 - 100.0).abs() < 4.0 * se_var);
        assert!((r - 0.4).abs() < 0.015, "sample correlation {r}");
    }

    #[test]
    fn vanishing_noise_and_determinism() {
        let p = LikelihoodParams::new(1e-9, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = sample_pair(100.0, 90.0, &p, &mut rng).unwrap();
        assert!((a - 100.0).abs() < 1e-6 && (b - 90.0).abs() < 1e-6);
        let p = LikelihoodParams::new(10.0, 0.3).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(5);
        let mut r2 = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(
            sample_pair(1.0, 2.0, &p, &mut r1).unwrap(),
            sample_pair(1.0, 2.0, &p, &mut r2).unwrap()
        );
    }
}
