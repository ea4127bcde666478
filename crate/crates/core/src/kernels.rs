//! Correlation functions over side information, the season-gap time warp,
//! covariance assembly and jittered Cholesky factorization.
//!
//! Every kernel here is a correlation function (unit marginal variance).
//! Amplitudes live in the inter-feature cross-covariances, not in the kernels.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{DpmfError, Result};

/// Jitter ladder used when a covariance matrix fails to factor.
pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-2;

/// A point in side-information space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideInfoPoint {
    pub coords: Vec<f64>,
}

impl SideInfoPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(DpmfError::Empty("side-information coordinates"));
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(DpmfError::InvalidParameter(format!(
                "non-finite side-information coordinate {bad}"
            )));
        }
        Ok(Self { coords })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Exact bitwise key, used to deduplicate inputs.
    pub fn key(&self) -> Vec<u64> {
        self.coords.iter().map(|c| c.to_bits()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    Ard,
    Periodic,
    ArdWithSeasonWarp,
}

/// Per-feature GP hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub variant: KernelVariant,
    /// One length scale per input dimension (the periodic kernel uses the first).
    pub length_scales: Vec<f64>,
    /// Period of the periodic kernel, in the units of the time coordinate.
    pub period: f64,
    /// Effective number of weeks between seasons (warp variant only).
    pub season_gap: f64,
}

impl KernelHyperparams {
    pub fn ard(length_scales: Vec<f64>) -> Self {
        Self {
            variant: KernelVariant::Ard,
            length_scales,
            period: 52.0,
            season_gap: 28.0,
        }
    }

    pub fn periodic(length_scale: f64, period: f64) -> Self {
        Self {
            variant: KernelVariant::Periodic,
            length_scales: vec![length_scale],
            period,
            season_gap: 28.0,
        }
    }

    pub fn ard_with_season_warp(length_scales: Vec<f64>, season_gap: f64) -> Self {
        Self {
            variant: KernelVariant::ArdWithSeasonWarp,
            length_scales,
            period: 52.0,
            season_gap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_scales.is_empty() {
            return Err(DpmfError::InvalidHyperparameter(
                "no length scales".to_string(),
            ));
        }
        for (d, &l) in self.length_scales.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(DpmfError::InvalidHyperparameter(format!(
                    "length scale {d} must be positive and finite, got {l}"
                )));
            }
        }
        match self.variant {
            KernelVariant::Periodic if !(self.period > 0.0 && self.period.is_finite()) => Err(
                DpmfError::InvalidHyperparameter(format!("period must be positive, got {}", self.period)),
            ),
            KernelVariant::ArdWithSeasonWarp
                if !(self.season_gap > 0.0 && self.season_gap.is_finite()) =>
            {
                Err(DpmfError::InvalidHyperparameter(format!(
                    "season gap must be positive and finite, got {}",
                    self.season_gap
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Squared-exponential correlation with one length scale per dimension.
pub fn ard_corr(x: &SideInfoPoint, x2: &SideInfoPoint, h: &KernelHyperparams) -> Result<f64> {
    check_dims(x, x2, h)?;
    for &l in &h.length_scales {
        if !(l > 0.0) {
            return Err(DpmfError::InvalidHyperparameter(format!(
                "length scale must be positive, got {l}"
            )));
        }
    }
    Ok(ard_unchecked(&x.coords, &x2.coords, &h.length_scales))
}

#[inline]
fn ard_unchecked(a: &[f64], b: &[f64], ls: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((ai, bi), l) in a.iter().zip(b).zip(ls) {
        let z = (ai - bi) / l;
        s += z * z;
    }
    (-0.5 * s).exp()
}

fn check_dims(x: &SideInfoPoint, x2: &SideInfoPoint, h: &KernelHyperparams) -> Result<()> {
    if x.dim() != x2.dim() {
        return Err(DpmfError::DimensionMismatch {
            context: "kernel inputs",
            expected: x.dim(),
            actual: x2.dim(),
        });
    }
    if h.length_scales.len() != x.dim() {
        return Err(DpmfError::DimensionMismatch {
            context: "length scales vs input dimension",
            expected: x.dim(),
            actual: h.length_scales.len(),
        });
    }
    Ok(())
}

/// Periodic correlation `exp(-2 sin^2(pi (x - x2) / period) / l^2)`.
///
/// With `period = 2 pi` this is the textbook form with `sin^2((x - x2) / 2)`.
pub fn periodic_corr(x: f64, x2: f64, h: &KernelHyperparams) -> Result<f64> {
    let l = *h
        .length_scales
        .first()
        .ok_or_else(|| DpmfError::InvalidHyperparameter("no length scale".to_string()))?;
    if !(l > 0.0) {
        return Err(DpmfError::InvalidHyperparameter(format!(
            "length scale must be positive, got {l}"
        )));
    }
    if !(h.period > 0.0) {
        return Err(DpmfError::InvalidHyperparameter(format!(
            "period must be positive, got {}",
            h.period
        )));
    }
    Ok(periodic_unchecked(x, x2, l, h.period))
}

#[inline]
fn periodic_unchecked(x: f64, x2: f64, l: f64, period: f64) -> f64 {
    let s = (PI * (x - x2) / period).sin();
    (-2.0 * s * s / (l * l)).exp()
}

/// Ordered, non-overlapping seasons in (true) week coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeasonCalendar {
    seasons: Vec<(f64, f64)>,
}

impl SeasonCalendar {
    pub fn new(seasons: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(s, e)) in seasons.iter().enumerate() {
            if !(s.is_finite() && e.is_finite()) || e < s {
                return Err(DpmfError::InvalidCalendar(format!(
                    "season {i} has invalid bounds ({s}, {e})"
                )));
            }
            if i > 0 && s <= seasons[i - 1].1 {
                return Err(DpmfError::InvalidCalendar(format!(
                    "season {i} starts at {s}, not after the previous end {}",
                    seasons[i - 1].1
                )));
            }
        }
        Ok(Self { seasons })
    }

    pub fn seasons(&self) -> &[(f64, f64)] {
        &self.seasons
    }

    pub fn is_empty(&self) -> bool {
        self.seasons.is_empty()
    }

    /// True lengths of the gaps between consecutive seasons.
    pub fn gaps(&self) -> Vec<f64> {
        self.seasons.windows(2).map(|w| w[1].0 - w[0].1).collect()
    }
}

/// Maps true weeks to effective weeks: identity inside the first season,
/// every inter-season gap compressed (or stretched) to `g` effective weeks.
pub fn warp_time(t: f64, calendar: &SeasonCalendar, g: f64) -> Result<f64> {
    if !(g > 0.0 && g.is_finite()) {
        return Err(DpmfError::InvalidHyperparameter(format!(
            "season gap must be positive and finite, got {g}"
        )));
    }
    let seasons = calendar.seasons();
    let Some(&(first_start, _)) = seasons.first() else {
        return Ok(t);
    };
    if t < first_start {
        return Err(DpmfError::BeforeFirstSeason { t, first_start });
    }
    let mut offset = 0.0;
    for (i, &(_, end)) in seasons.iter().enumerate() {
        if t <= end {
            return Ok(t - offset);
        }
        let Some(&(next_start, _)) = seasons.get(i + 1) else {
            break;
        };
        let gap = next_start - end;
        if t < next_start {
            return Ok(end - offset + (t - end) * g / gap);
        }
        offset += gap - g;
    }
    Ok(t - offset)
}

/// Layout of the side-information vector shared by every point of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSpace {
    pub dim: usize,
    /// Coordinate holding time in weeks, if any.
    pub time_dim: Option<usize>,
    /// Coordinate holding the {0,1} "row member plays at home" indicator, if any.
    pub home_dim: Option<usize>,
    pub calendar: SeasonCalendar,
}

impl InputSpace {
    /// A single constant coordinate: standard PMF.
    pub fn constant() -> Self {
        Self {
            dim: 1,
            time_dim: None,
            home_dim: None,
            calendar: SeasonCalendar::default(),
        }
    }

    pub fn new(
        time: bool,
        home: bool,
        calendar: SeasonCalendar,
    ) -> Self {
        match (time, home) {
            (false, false) => Self {
                calendar,
                ..Self::constant()
            },
            (true, false) => Self {
                dim: 1,
                time_dim: Some(0),
                home_dim: None,
                calendar,
            },
            (false, true) => Self {
                dim: 1,
                time_dim: None,
                home_dim: Some(0),
                calendar,
            },
            (true, true) => Self {
                dim: 2,
                time_dim: Some(0),
                home_dim: Some(1),
                calendar,
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        self.time_dim.is_none() && self.home_dim.is_none()
    }

    /// Builds the point for an observation at `week` where the row member is (or is not) at home.
    pub fn point(&self, week: f64, row_home: bool) -> SideInfoPoint {
        let mut coords = vec![0.0; self.dim];
        if let Some(t) = self.time_dim {
            coords[t] = week;
        }
        if let Some(h) = self.home_dim {
            coords[h] = if row_home { 1.0 } else { 0.0 };
        }
        SideInfoPoint { coords }
    }

    /// The same observation seen from the other member: home indicator flipped.
    pub fn mirror(&self, x: &SideInfoPoint) -> SideInfoPoint {
        let mut y = x.clone();
        if let Some(h) = self.home_dim {
            y.coords[h] = 1.0 - y.coords[h];
        }
        y
    }

    fn scalar_dim(&self) -> Result<usize> {
        match (self.time_dim, self.dim) {
            (Some(t), _) => Ok(t),
            (None, 1) => Ok(0),
            _ => Err(DpmfError::Config(
                "periodic kernel needs a time coordinate or one-dimensional inputs".to_string(),
            )),
        }
    }

    /// Applies the season warp to the time coordinate when the variant calls for it.
    pub fn prepare(&self, points: &[SideInfoPoint], h: &KernelHyperparams) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            if p.dim() != self.dim {
                return Err(DpmfError::DimensionMismatch {
                    context: "side-information point",
                    expected: self.dim,
                    actual: p.dim(),
                });
            }
            let mut c = p.coords.clone();
            if h.variant == KernelVariant::ArdWithSeasonWarp {
                let t = self.time_dim.ok_or_else(|| {
                    DpmfError::Config("season warp needs a time coordinate".to_string())
                })?;
                c[t] = warp_time(c[t], &self.calendar, h.season_gap)?;
            }
            out.push(c);
        }
        Ok(out)
    }

    /// Correlation between two points under this layout and hyperparameters.
    pub fn correlation(&self, a: &SideInfoPoint, b: &SideInfoPoint, h: &KernelHyperparams) -> Result<f64> {
        let m = self.cross_matrix(std::slice::from_ref(a), std::slice::from_ref(b), h)?;
        Ok(m[(0, 0)])
    }

    /// Rectangular correlation matrix between two point sets.
    pub fn cross_matrix(
        &self,
        a: &[SideInfoPoint],
        b: &[SideInfoPoint],
        h: &KernelHyperparams,
    ) -> Result<DMatrix<f64>> {
        h.validate()?;
        let pa = self.prepare(a, h)?;
        let pb = self.prepare(b, h)?;
        let mut m = DMatrix::zeros(a.len(), b.len());
        match h.variant {
            KernelVariant::Periodic => {
                let d = self.scalar_dim()?;
                let l = h.length_scales[0];
                for (i, x) in pa.iter().enumerate() {
                    for (j, y) in pb.iter().enumerate() {
                        m[(i, j)] = periodic_unchecked(x[d], y[d], l, h.period);
                    }
                }
            }
            KernelVariant::Ard | KernelVariant::ArdWithSeasonWarp => {
                if h.length_scales.len() != self.dim {
                    return Err(DpmfError::DimensionMismatch {
                        context: "length scales vs input dimension",
                        expected: self.dim,
                        actual: h.length_scales.len(),
                    });
                }
                for (i, x) in pa.iter().enumerate() {
                    for (j, y) in pb.iter().enumerate() {
                        m[(i, j)] = ard_unchecked(x, y, &h.length_scales);
                    }
                }
            }
        }
        Ok(m)
    }
}

/// Symmetric correlation matrix with an optional Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    pub values: DMatrix<f64>,
    pub chol: Option<DMatrix<f64>>,
    pub jitter_used: f64,
}

impl CovMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        Self {
            values,
            chol: None,
            jitter_used: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Assembles the correlation matrix of `points` (warped when the variant asks for it).
pub fn build_cov_matrix(
    points: &[SideInfoPoint],
    h: &KernelHyperparams,
    space: &InputSpace,
) -> Result<CovMatrix> {
    if points.is_empty() {
        return Err(DpmfError::Empty("covariance input points"));
    }
    h.validate()?;
    let p = space.prepare(points, h)?;
    let n = p.len();
    let mut m = DMatrix::zeros(n, n);
    let periodic_dim = match h.variant {
        KernelVariant::Periodic => Some(space.scalar_dim()?),
        _ => {
            if h.length_scales.len() != space.dim {
                return Err(DpmfError::DimensionMismatch {
                    context: "length scales vs input dimension",
                    expected: space.dim,
                    actual: h.length_scales.len(),
                });
            }
            None
        }
    };
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in 0..i {
            let c = match periodic_dim {
                Some(d) => periodic_unchecked(p[i][d], p[j][d], h.length_scales[0], h.period),
                None => ard_unchecked(&p[i], &p[j], &h.length_scales),
            };
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    Ok(CovMatrix::new(m))
}

/// Plain Cholesky of `a + jitter * I`; `None` when a pivot is not safely positive.
pub fn try_cholesky(a: &DMatrix<f64>, jitter: f64) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let scale = (0..n).map(|i| a[(i, i)].abs()).fold(0.0_f64, f64::max).max(1e-300);
    let tol = f64::EPSILON * scale * n as f64;
    // Row-major lower triangle so both dot-product operands are contiguous.
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let dot: f64 = l[i * n..i * n + j]
                .iter()
                .zip(&l[j * n..j * n + j])
                .map(|(x, y)| x * y)
                .sum();
            let s = a[(i, j)] - dot;
            if i == j {
                let d = s + jitter;
                if !(d > tol) || !d.is_finite() {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(DMatrix::from_row_slice(n, n, &l))
}

/// Factors `values`, escalating jitter 0, 1e-8, 1e-7, ..., 1e-2 until it succeeds.
pub fn factor_with_jitter(values: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(l) = try_cholesky(values, 0.0) {
        return Ok((l, 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        if let Some(l) = try_cholesky(values, jitter) {
            return Ok((l, jitter));
        }
        jitter *= 10.0;
    }
    Err(DpmfError::NotPositiveDefinite {
        n: values.nrows(),
        max_jitter: JITTER_MAX,
    })
}

pub fn cholesky_with_jitter(mut c: CovMatrix) -> Result<CovMatrix> {
    let (l, jitter) = factor_with_jitter(&c.values)?;
    c.chol = Some(l);
    c.jitter_used = jitter;
    Ok(c)
}

/// Builds and factors in one step; returns the factor and the jitter used.
pub fn factored_cov(
    points: &[SideInfoPoint],
    h: &KernelHyperparams,
    space: &InputSpace,
) -> Result<(DMatrix<f64>, f64)> {
    let c = build_cov_matrix(points, h, space)?;
    factor_with_jitter(&c.values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(c: &[f64]) -> SideInfoPoint {
        SideInfoPoint::new(c.to_vec()).unwrap()
    }

    #[test]
    fn ard_examples() {
        let h = KernelHyperparams::ard(vec![1.0, 2.0]);
        assert_eq!(ard_corr(&pt(&[3.0, -1.0]), &pt(&[3.0, -1.0]), &h).unwrap(), 1.0);
        let v = ard_corr(&pt(&[0.0, 0.0]), &pt(&[1.0, 2.0]), &h).unwrap();
        assert_abs_diff_eq!(v, (-1.0f64).exp(), epsilon = 1e-12);
        let h1 = KernelHyperparams::ard(vec![1.0]);
        let v = ard_corr(&pt(&[2.0]), &pt(&[3.0]), &h1).unwrap();
        assert_abs_diff_eq!(v, (-0.5f64).exp(), epsilon = 1e-12);
    }

    #[test]
    fn ard_dimension_mismatch_is_reported() {
        let h = KernelHyperparams::ard(vec![1.0]);
        let err = ard_corr(&pt(&[0.0, 0.0]), &pt(&[1.0, 2.0]), &h).unwrap_err();
        assert!(matches!(
            err,
            DpmfError::DimensionMismatch { expected: 2, actual: 1, .. }
        ));
        assert!(ard_corr(&pt(&[0.0]), &pt(&[1.0, 2.0]), &h).is_err());
    }

    #[test]
    fn periodic_examples() {
        let h = KernelHyperparams::periodic(1.0, 2.0 * PI);
        assert_eq!(periodic_corr(1.3, 1.3, &h).unwrap(), 1.0);
        assert_abs_diff_eq!(periodic_corr(0.0, PI, &h).unwrap(), (-2.0f64).exp(), epsilon = 1e-12);
        let h52 = KernelHyperparams::periodic(0.7, 52.0);
        assert_abs_diff_eq!(periodic_corr(3.0, 55.0, &h52).unwrap(), 1.0, epsilon = 1e-12);
        let bad = KernelHyperparams::periodic(1.0, 0.0);
        assert!(periodic_corr(0.0, 1.0, &bad).is_err());
        let bad = KernelHyperparams::periodic(-1.0, 5.0);
        assert!(periodic_corr(0.0, 1.0, &bad).is_err());
    }

    #[test]
    fn warp_examples() {
        let cal = SeasonCalendar::new(vec![(0.0, 20.0), (48.0, 68.0), (96.0, 116.0)]).unwrap();
        assert_eq!(warp_time(7.0, &cal, 4.0).unwrap(), 7.0);
        let end1 = warp_time(20.0, &cal, 4.0).unwrap();
        assert_abs_diff_eq!(warp_time(48.0, &cal, 4.0).unwrap(), end1 + 4.0, epsilon = 1e-12);
        // midway through the gap
        assert_abs_diff_eq!(warp_time(34.0, &cal, 4.0).unwrap(), 22.0, epsilon = 1e-12);
        assert_abs_diff_eq!(warp_time(100.0, &cal, 4.0).unwrap(), 100.0 - 48.0, epsilon = 1e-12);
        for t in [0.0, 10.0, 25.0, 48.0, 70.0, 100.0, 130.0] {
            assert_abs_diff_eq!(warp_time(t, &cal, 28.0).unwrap(), t, epsilon = 1e-12);
        }
        assert!(matches!(
            warp_time(-1.0, &cal, 4.0),
            Err(DpmfError::BeforeFirstSeason { .. })
        ));
    }

    #[test]
    fn calendar_rejects_overlap() {
        assert!(SeasonCalendar::new(vec![(0.0, 10.0), (5.0, 20.0)]).is_err());
        assert!(SeasonCalendar::new(vec![(10.0, 0.0)]).is_err());
    }

    #[test]
    fn cov_examples() {
        let space = InputSpace::new(true, false, SeasonCalendar::default());
        let h = KernelHyperparams::ard(vec![1.0]);
        let c = build_cov_matrix(&[pt(&[4.0])], &h, &space).unwrap();
        assert_eq!(c.values, DMatrix::from_element(1, 1, 1.0));
        let c = build_cov_matrix(&[pt(&[4.0]), pt(&[4.0])], &h, &space).unwrap();
        assert_eq!(c.values, DMatrix::from_element(2, 2, 1.0));
        let c = build_cov_matrix(&[pt(&[0.0]), pt(&[1.0]), pt(&[2.0])], &h, &space).unwrap();
        assert_abs_diff_eq!(c.values[(0, 1)], (-0.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.values[(0, 2)], (-2.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(c.values[(2, 1)], (-0.5f64).exp(), epsilon = 1e-12);
        assert!(matches!(
            build_cov_matrix(&[], &h, &space),
            Err(DpmfError::Empty(_))
        ));
    }

    #[test]
    fn cholesky_examples() {
        let c = cholesky_with_jitter(CovMatrix::new(DMatrix::identity(3, 3))).unwrap();
        assert_eq!(c.jitter_used, 0.0);
        assert_eq!(c.chol.unwrap(), DMatrix::identity(3, 3));

        let c = cholesky_with_jitter(CovMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 0.5, 0.5, 1.0],
        )))
        .unwrap();
        assert_eq!(c.jitter_used, 0.0);
        let l = c.chol.unwrap();
        assert_abs_diff_eq!(l[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 0)], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(l[(1, 1)], 0.75f64.sqrt(), epsilon = 1e-15);
        assert_eq!(l[(0, 1)], 0.0);

        let ones = DMatrix::from_element(2, 2, 1.0);
        let c = cholesky_with_jitter(CovMatrix::new(ones.clone())).unwrap();
        assert!(c.jitter_used > 0.0);
        let l = c.chol.clone().unwrap();
        let recon = &l * l.transpose();
        let target = ones + DMatrix::identity(2, 2) * c.jitter_used;
        assert!((recon - target).abs().max() < 1e-8);
    }

    #[test]
    fn cholesky_fails_for_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky_with_jitter(CovMatrix::new(m)),
            Err(DpmfError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn long_length_scales_give_constant_functions() {
        let space = InputSpace::new(true, true, SeasonCalendar::default());
        let h = KernelHyperparams::ard(vec![1e6, 1e6]);
        let pts: Vec<_> = (0..11).map(|i| pt(&[i as f64, (i % 2) as f64])).collect();
        let c = build_cov_matrix(&pts, &h, &space).unwrap();
        assert!(c.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn warped_cov_equals_cov_on_prewarped_points() {
        let cal = SeasonCalendar::new(vec![(0.0, 10.0), (38.0, 48.0)]).unwrap();
        let space = InputSpace::new(true, true, cal.clone());
        let h = KernelHyperparams::ard_with_season_warp(vec![3.0, 0.8], 5.0);
        let raw = [0.0, 4.0, 10.0, 20.0, 38.0, 45.0];
        let pts: Vec<_> = raw.iter().enumerate().map(|(i, &t)| pt(&[t, (i % 2) as f64])).collect();
        let warped: Vec<_> = pts
            .iter()
            .map(|p| pt(&[warp_time(p.coords[0], &cal, 5.0).unwrap(), p.coords[1]]))
            .collect();
        let a = build_cov_matrix(&pts, &h, &space).unwrap();
        let b = build_cov_matrix(&warped, &KernelHyperparams::ard(vec![3.0, 0.8]), &space).unwrap();
        assert!((a.values - b.values).abs().max() < 1e-15);
    }
}
