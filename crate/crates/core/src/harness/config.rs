use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{DpmfError, Result};
use crate::kernels::{InputSpace, KernelHyperparams, SeasonCalendar};
use crate::samplers::{Priors, SamplerConfig};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "DPMF_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "PMF")]
    Pmf,
    #[serde(rename = "DPMF_t")]
    DpmfT,
    #[serde(rename = "DPMF_h")]
    DpmfH,
    #[serde(rename = "DPMF_th")]
    DpmfTh,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Pmf, Variant::DpmfT, Variant::DpmfH, Variant::DpmfTh];

    pub fn uses_time(self) -> bool {
        matches!(self, Variant::DpmfT | Variant::DpmfTh)
    }

    pub fn uses_home(self) -> bool {
        matches!(self, Variant::DpmfH | Variant::DpmfTh)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Pmf => "PMF",
            Variant::DpmfT => "DPMF_t",
            Variant::DpmfH => "DPMF_h",
            Variant::DpmfTh => "DPMF_th",
        }
    }

    pub fn input_space(self, calendar: SeasonCalendar) -> InputSpace {
        InputSpace::new(self.uses_time(), self.uses_home(), calendar)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = DpmfError;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| DpmfError::Config(format!("unknown model variant {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HyperMode {
    FreezeAfterPreburn,
    AlwaysSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeKernel {
    /// Squared exponential in (warped) weeks.
    SquaredExp,
    /// Periodic in weeks; only for the time-only variant.
    Periodic,
}

/// Starting values and fixed settings of the GP kernels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelDefaults {
    pub time_kernel: TimeKernel,
    pub season_warp: bool,
    pub time_length_scale: f64,
    pub home_length_scale: f64,
    pub season_gap: f64,
    pub period: f64,
}

impl Default for KernelDefaults {
    fn default() -> Self {
        Self {
            time_kernel: TimeKernel::SquaredExp,
            season_warp: true,
            time_length_scale: 10.0,
            home_length_scale: 1.0,
            season_gap: 4.0,
            period: 52.0,
        }
    }
}

impl KernelDefaults {
    /// Kernel template for `variant`, one per latent feature.
    pub fn template(&self, variant: Variant) -> Result<KernelHyperparams> {
        let h = match variant {
            Variant::Pmf => KernelHyperparams::ard(vec![1.0]),
            Variant::DpmfH => KernelHyperparams::ard(vec![self.home_length_scale]),
            Variant::DpmfT if self.time_kernel == TimeKernel::Periodic => {
                KernelHyperparams::periodic(self.time_length_scale, self.period)
            }
            Variant::DpmfT | Variant::DpmfTh => {
                if self.time_kernel == TimeKernel::Periodic {
                    return Err(DpmfError::Config(
                        "the periodic time kernel is only available for DPMF_t".to_string(),
                    ));
                }
                let mut ls = vec![self.time_length_scale];
                if variant == Variant::DpmfTh {
                    ls.push(self.home_length_scale);
                }
                if self.season_warp {
                    KernelHyperparams::ard_with_season_warp(ls, self.season_gap)
                } else {
                    KernelHyperparams::ard(ls)
                }
            }
        };
        h.validate()?;
        Ok(h)
    }
}

/// Ground truth and schedule for synthetic data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Variant whose side information drives the generating GPs.
    pub variant: Variant,
    pub teams: usize,
    pub features: usize,
    pub seasons: usize,
    pub weeks_per_season: usize,
    /// Calendar weeks between the last week of one season and the first of the next.
    pub gap_weeks: usize,
    /// Times each team plays per week.
    pub rounds_per_week: usize,
    pub sigma: f64,
    pub rho: f64,
    /// Scale of the identity cross-covariance factor on U.
    pub u_scale: f64,
    pub v_scale: f64,
    pub mean_v: f64,
    /// Feature mean of U is set so the expected score equals this value.
    pub target_mean: f64,
    pub time_length_scale: f64,
    pub home_length_scale: f64,
    /// Effective gap of the generating warp.
    pub season_gap: f64,
    /// Write over/under and spread columns derived from the true means.
    pub expert_lines: bool,
    /// First day of the first season, `YYYY-MM-DD`.
    pub start_date: String,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            variant: Variant::DpmfTh,
            teams: 8,
            features: 2,
            seasons: 3,
            weeks_per_season: 12,
            gap_weeks: 28,
            rounds_per_week: 1,
            sigma: 10.0,
            rho: 0.4,
            u_scale: 10.0,
            v_scale: 0.5,
            mean_v: 1.0,
            target_mean: 100.0,
            time_length_scale: 6.0,
            home_length_scale: 1.0,
            season_gap: 4.0,
            expert_lines: false,
            start_date: "2002-10-29".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub variant: Variant,
    /// Latent features K.
    pub features: usize,
    pub chains: usize,
    pub cold_burnin: usize,
    pub warm_burnin: usize,
    pub thin: usize,
    pub samples_per_chain: usize,
    pub block_weeks: usize,
    /// Previous seasons kept in each training window, besides the current one.
    pub history_seasons: usize,
    pub hyper_mode: HyperMode,
    pub preburn_sweeps: usize,
    /// Number of leading seasons the pre-burn chain sees.
    pub preburn_seasons: usize,
    /// Frozen hyperparameters written by `preburn`.
    pub frozen_hypers: Option<PathBuf>,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub kernel: KernelDefaults,
    pub priors: Priors,
    pub sampler: SamplerConfig,
    pub simulation: SimulationConfig,
    /// Game ids for which density grids are written.
    pub grid_games: Vec<usize>,
    pub grid_points: usize,
    pub grid_half_width: f64,
    /// Sweeps for the single-range `fit` and `predict` commands.
    pub fit_sweeps: usize,
    /// Leading sweeps of those that are discarded.
    pub fit_burnin: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            variant: Variant::DpmfTh,
            features: 3,
            chains: 10,
            cold_burnin: 1000,
            warm_burnin: 100,
            thin: 4,
            samples_per_chain: 100,
            block_weeks: 4,
            history_seasons: 2,
            hyper_mode: HyperMode::AlwaysSample,
            preburn_sweeps: 5000,
            preburn_seasons: 3,
            frozen_hypers: None,
            seed: 0,
            data: None,
            kernel: KernelDefaults::default(),
            priors: Priors::default(),
            sampler: SamplerConfig::default(),
            simulation: SimulationConfig::default(),
            grid_games: Vec::new(),
            grid_points: 41,
            grid_half_width: 40.0,
            fit_sweeps: 1000,
            fit_burnin: 500,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| DpmfError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DpmfError::Config(e.to_string()))
    }

    /// Applies the seed from the environment, then an explicit one.
    pub fn apply_seed_overrides(&mut self, cli_seed: Option<u64>) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| DpmfError::Config(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        if let Some(s) = cli_seed {
            self.seed = s;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("features", self.features),
            ("chains", self.chains),
            ("thin", self.thin),
            ("samples_per_chain", self.samples_per_chain),
            ("block_weeks", self.block_weeks),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(DpmfError::Config(format!("{name} must be positive")));
            }
        }
        if self.features > crate::latent::MAX_FEATURES {
            return Err(DpmfError::Config(format!(
                "at most {} features are supported",
                crate::latent::MAX_FEATURES
            )));
        }
        if self.simulation.teams < 2 || self.simulation.seasons == 0 || self.simulation.weeks_per_season == 0 {
            return Err(DpmfError::Config("simulation needs ≥2 teams, ≥1 season and ≥1 week".to_string()));
        }
        self.kernel.template(self.variant)?;
        Ok(())
    }
}
