use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use dpmf::harness::{self, ExperimentConfig, Variant};
use dpmf::Result;

#[derive(Parser, Debug)]
#[command(name = "dpmf", version, about = "Dependent probabilistic matrix factorization for game scores")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed and DPMF_SEED.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Game file; overrides `data`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// PMF, DPMF_t, DPMF_h or DPMF_th; overrides `variant`.
    #[arg(long)]
    variant: Option<Variant>,
    /// Latent features; overrides `features`.
    #[arg(long)]
    features: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Frozen hyperparameter file; switches to freeze_after_preburn.
    #[arg(long)]
    frozen_hypers: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a synthetic game file and its latent truth.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Burn in kernel hyperparameters on the leading seasons and freeze them.
    Preburn {
        #[command(flatten)]
        common: Common,
    },
    /// Fit one date range and write posterior summaries and traces.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: Option<NaiveDate>,
        #[arg(long)]
        to: Option<NaiveDate>,
    },
    /// Rolling block-by-block evaluation.
    RollingEval {
        #[command(flatten)]
        common: Common,
    },
    /// Predict one matchup from the games before a date.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        home: String,
        #[arg(long)]
        away: String,
        #[arg(long)]
        date: NaiveDate,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply_seed_overrides(common.seed)?;
    if let Some(d) = &common.data {
        cfg.data = Some(d.clone());
    }
    if let Some(v) = common.variant {
        cfg.variant = v;
    }
    if let Some(k) = common.features {
        cfg.features = k;
    }
    if let Some(c) = common.chains {
        cfg.chains = c;
    }
    if let Some(f) = &common.frozen_hypers {
        cfg.frozen_hypers = Some(f.clone());
        cfg.hyper_mode = harness::HyperMode::FreezeAfterPreburn;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common } => {
            let cfg = load(&common)?;
            let sim = harness::cmd_simulate(&cfg, &common.out)?;
            println!("{} games written to {}", sim.records.len(), common.out.join("games.csv").display());
        }
        Command::Preburn { common } => {
            let cfg = load(&common)?;
            match harness::cmd_preburn(&cfg, &common.out)? {
                Some(_) => println!("frozen hyperparameters written to {}", common.out.join("frozen_hypers.json").display()),
                None => println!("hyper_mode = always_sample: nothing to freeze"),
            }
        }
        Command::Fit { common, from, to } => {
            let cfg = load(&common)?;
            let s = harness::cmd_fit(&cfg, &common.out, from, to)?;
            println!("sigma {:.4} rho {:.4} over {} stored states", s.sigma_mean, s.rho_mean, s.stored);
        }
        Command::RollingEval { common } => {
            let cfg = load(&common)?;
            let r = harness::cmd_rolling_eval(&cfg, &common.out)?;
            println!(
                "{} K={}: mean log prob {:.4}, winner error {:.2}%, rmse {:.3} over {} games",
                r.variant, r.features, r.overall.mean_logprob, r.overall.winner_error_pct, r.overall.rmse, r.overall.games
            );
        }
        Command::Predict { common, home, away, date } => {
            let cfg = load(&common)?;
            let p = harness::cmd_predict(&cfg, &common.out, &home, &away, date)?;
            println!(
                "{} {:.1} - {:.1} {} (P(home win) = {:.3})",
                p.home_team, p.pred_home, p.pred_away, p.away_team, p.p_home_win
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
