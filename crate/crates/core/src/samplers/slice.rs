use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DpmfError, Result};

/// Tuning constants for univariate slice sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceConfig {
    pub initial_width: f64,
    pub max_stepouts: usize,
    pub max_shrinks: usize,
}

impl SliceConfig {
    pub fn new(initial_width: f64, max_stepouts: usize, max_shrinks: usize) -> Result<Self> {
        if !(initial_width > 0.0 && initial_width.is_finite()) || max_stepouts == 0 || max_shrinks == 0 {
            return Err(DpmfError::Config(format!(
                "invalid slice config: width {initial_width}, stepouts {max_stepouts}, shrinks {max_shrinks}"
            )));
        }
        Ok(Self {
            initial_width,
            max_stepouts,
            max_shrinks,
        })
    }

    /// Defaults for log-scale and other O(1) parameters.
    pub fn unit() -> Self {
        Self {
            initial_width: 1.0,
            max_stepouts: 20,
            max_shrinks: 200,
        }
    }

    /// Defaults for the feature means.
    pub fn means() -> Self {
        Self {
            initial_width: 5.0,
            ..Self::unit()
        }
    }
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self::unit()
    }
}

/// One slice-sampling update with stepping out and shrinkage.
///
/// `log_density` may return `-inf` outside the support. Returns `x0` when the
/// bracket collapses onto it numerically.
pub fn slice_sample_1d<R, F>(x0: f64, mut log_density: F, cfg: &SliceConfig, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(f64) -> f64,
{
    let f0 = log_density(x0);
    if !f0.is_finite() {
        return Err(DpmfError::InvalidState(format!(
            "slice sampler started at {x0} with log density {f0}"
        )));
    }
    let threshold = f0 + open_unit(rng).ln();

    let w = cfg.initial_width;
    let mut left = x0 - w * rng.random::<f64>();
    let mut right = left + w;
    let mut j = (cfg.max_stepouts as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = (cfg.max_stepouts - 1).saturating_sub(j);
    while j > 0 && log_density(left) > threshold {
        left -= w;
        j -= 1;
    }
    while k > 0 && log_density(right) > threshold {
        right += w;
        k -= 1;
    }

    let collapse = f64::EPSILON * x0.abs().max(1.0);
    for _ in 0..cfg.max_shrinks {
        let x1 = left + rng.random::<f64>() * (right - left);
        if log_density(x1) > threshold {
            return Ok(x1);
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left <= collapse {
            return Ok(x0);
        }
    }
    Err(DpmfError::SliceExhausted(cfg.max_shrinks))
}

/// Uniform draw on (0, 1].
pub(crate) fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}
