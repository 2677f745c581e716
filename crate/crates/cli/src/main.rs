//! Experiment harness for sampled sparse control of alignment systems.
//!
//! Subcommands: `simulate`, `sweep-k`, `exactness`, `bounds`, `gen-config`.
//! Parallel cell execution is capped by the CONSENSUS_JL_THREADS env var.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use consensus_jl::analysis::compute_constants;
use consensus_jl::control::DrMode;
use consensus_jl::experiments::{
    cmd_exactness, cmd_simulate, cmd_sweep_k, generate_config, ConfigName, ExperimentConfig,
};
use consensus_jl::io::save_state;
use consensus_jl::jl::dimension_estimate;
use consensus_jl::model::{consensus_margin, moments};

#[derive(Parser)]
#[command(name = "consensus-jl", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Experiment config file (flat key = value text).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named reference configuration (outlier, geometric, cauchy, gaussian,
    /// uniform) with its reference parameters; overridden by --config.
    #[arg(long)]
    name: Option<String>,
    /// Seed list override, comma-separated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Strategy list override (none, sp, u, r, dr), comma-separated.
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<String>,
    /// Projected dimensions for the dr strategy, comma-separated.
    #[arg(long, value_delimiter = ',')]
    k: Vec<usize>,
    /// Low-system threshold mode: experimental | theoretical.
    #[arg(long)]
    mode: Option<String>,
    /// Horizon override (time units; rounded up to whole sampling steps).
    #[arg(long)]
    horizon: Option<f64>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.name) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ExperimentConfig::parse(&text)?
            }
            (None, Some(name)) => {
                let name = ConfigName::parse(name)
                    .with_context(|| format!("unknown config name {name}"))?;
                ExperimentConfig::for_name(name)
            }
            (None, None) => bail!("need --config <path> or --name <config>"),
        };
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if !self.strategy.is_empty() {
            cfg.strategies = self.strategy.clone();
        }
        if !self.k.is_empty() {
            cfg.k_list = self.k.clone();
        }
        if let Some(mode) = &self.mode {
            cfg.dr_mode = match mode.as_str() {
                "experimental" => DrMode::Experimental,
                "theoretical" => DrMode::Theoretical,
                other => bail!("unknown mode {other}"),
            };
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every (strategy, seed, k) cell; write per-run CSVs and a JSON summary.
    Simulate(ConfigArgs),
    /// Mean time-to-consensus of (dr) per projected dimension k, with sp and
    /// r baselines, as a plot-ready CSV.
    SweepK(ConfigArgs),
    /// Exactness-at-0 study at fixed k: one (E_M, T0) row per matrix plus an
    /// identity control row and the rank correlation.
    Exactness {
        #[command(flatten)]
        common: ConfigArgs,
        /// Number of seeded matrices (seeds are taken from the config's seed
        /// list, extended as base_seed+i when exhausted).
        #[arg(long, default_value_t = 6)]
        matrices: usize,
    },
    /// Print the convergence-guarantee constants and the worst-case JL
    /// dimension estimate for a configuration.
    Bounds {
        #[command(flatten)]
        common: ConfigArgs,
        /// JL distortion used for the dimension estimate.
        #[arg(long, default_value_t = 0.5)]
        eps: f64,
        /// Small-norm threshold used for the dimension estimate; defaults to
        /// the constants' Delta when finite.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Emit an initial-state file for a named configuration.
    GenConfig {
        #[command(flatten)]
        common: ConfigArgs,
        /// Output state file path.
        #[arg(long, default_value = "initial_state.txt")]
        state_out: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(common) => {
            let cfg = common.build()?;
            let summary = cmd_simulate(&cfg)?;
            println!("wrote {}", summary.display());
        }
        Command::SweepK(common) => {
            let cfg = common.build()?;
            if cfg.k_list.is_empty() {
                bail!("sweep-k needs --k or a k_list in the config");
            }
            let (path, rows) = cmd_sweep_k(&cfg)?;
            for r in &rows {
                let k = r.k.map(|k| k.to_string()).unwrap_or_else(|| "-".into());
                match r.mean_t0 {
                    Some(m) => println!(
                        "{:>4} k={k:>4}  mean T0 = {m:.4}  (n = {})",
                        r.control, r.n_seeds
                    ),
                    None => println!("{:>4} k={k:>4}  consensus not reached", r.control),
                }
            }
            println!("wrote {}", path.display());
        }
        Command::Exactness { common, matrices } => {
            let cfg = common.build()?;
            let k = *cfg
                .k_list
                .first()
                .context("exactness needs --k (the fixed projected dimension)")?;
            let mut seeds = cfg.seeds.clone();
            let base = seeds.last().copied().unwrap_or(1);
            while seeds.len() < matrices {
                seeds.push(base + seeds.len() as u64);
            }
            seeds.truncate(matrices);
            let (path, study) = cmd_exactness(&cfg, k, &seeds)?;
            for row in &study.rows {
                println!(
                    "matrix seed {:>4} ({}): E_M = {:.5}  T0 = {}",
                    row.matrix_seed,
                    row.family,
                    row.e_m,
                    row.t0.map(|t| format!("{t:.4}")).unwrap_or_else(|| "not reached".into())
                );
            }
            match study.rank_correlation {
                Some(rho) => println!("rank correlation (E_M vs T0): {rho:.4}"),
                None => println!("rank correlation: not enough points"),
            }
            println!("wrote {}", path.display());
        }
        Command::Bounds { common, eps, delta } => {
            let cfg = common.build()?;
            let initial = cfg.initial_state()?;
            let m = moments(&initial);
            let margin = consensus_margin(&initial, &cfg.params);
            let consts = compute_constants(m.x, m.v, m.v, m.x, &cfg.params);
            println!("X0 = {:.6}  V0 = {:.6}  margin = {:.6}", m.x, m.v, margin);
            println!("{}", serde_json_pretty(&consts)?);
            let delta = delta.unwrap_or(if consts.delta.is_finite() { consts.delta } else { 0.1 });
            let est = dimension_estimate(&cfg.params, cfg.horizon, eps, delta, m.v, m.x);
            println!(
                "JL dimension estimate (eps = {eps}, delta = {delta}): \
                 log10(N_total) = {:.3}, k0 = {:.3e} (proportionality constant {}), \
                 branching exponent {}",
                est.log10_total(),
                est.k0,
                est.jl_constant,
                est.path_exponent
            );
        }
        Command::GenConfig { common, state_out } => {
            let cfg = common.build()?;
            let state = generate_config(cfg.name, &cfg.params, cfg.config_seed)?;
            save_state(&state, &state_out)?;
            let m = moments(&state);
            println!(
                "wrote {} (N = {}, dim = {}, X0 = {:.4}, V0 = {:.4})",
                state_out.display(),
                cfg.params.n,
                cfg.params.dim,
                m.x,
                m.v
            );
        }
    }
    Ok(())
}

fn serde_json_pretty<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}
