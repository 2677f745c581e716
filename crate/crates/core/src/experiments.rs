//! Experiment harness: the five reference initial configurations, experiment
//! configuration files, and the simulate / sweep-k / exactness commands with
//! CSV and JSON emission.

use std::path::PathBuf;

use nalgebra::DVector;
use serde::Serialize;

use crate::analysis::{compute_constants, TheoryConstants};
use crate::control::{run_strategy, DrMode, RunRecord, Strategy, StrategyKind};
use crate::dynamics::{RunOptions, SimError};
use crate::io::{self, IoError};
use crate::jl::{generate, Family, ProjectionMatrix};
use crate::model::{consensus_margin, moments, FlockState, ModelParams};
use crate::par;
use crate::rng::{cauchy, standard_normal, substream, STREAM_CONFIG_X, STREAM_CONFIG_V};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigName {
    Outlier,
    Geometric,
    Cauchy,
    Gaussian,
    Uniform,
    File,
}

impl ConfigName {
    pub fn label(self) -> &'static str {
        match self {
            ConfigName::Outlier => "outlier",
            ConfigName::Geometric => "geometric",
            ConfigName::Cauchy => "cauchy",
            ConfigName::Gaussian => "gaussian",
            ConfigName::Uniform => "uniform",
            ConfigName::File => "file",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "outlier" => Some(ConfigName::Outlier),
            "geometric" => Some(ConfigName::Geometric),
            "cauchy" => Some(ConfigName::Cauchy),
            "gaussian" => Some(ConfigName::Gaussian),
            "uniform" => Some(ConfigName::Uniform),
            "file" => Some(ConfigName::File),
            _ => None,
        }
    }
}

/// The parameter table each named configuration was studied with.
pub fn paper_params(name: ConfigName) -> ModelParams {
    let p = |n, dim, beta, theta, tau| ModelParams::new(n, dim, 1.0, 1.0, beta, theta, tau);
    match name {
        ConfigName::Outlier => p(9, 100, 0.6, 5.0, 0.01),
        ConfigName::Geometric => p(15, 500, 0.65, 20.0, 0.01),
        ConfigName::Cauchy => p(25, 100, 0.6, 5.0, 0.01),
        ConfigName::Gaussian => p(10, 500, 0.65, 20.0, 0.005),
        ConfigName::Uniform => p(15, 200, 0.8, 5.0, 0.001),
        ConfigName::File => p(2, 1, 0.6, 1.0, 0.01),
    }
    .expect("reference parameters are valid")
}

/// Cauchy scale of the cauchy configuration's consensus parameters.
const CAUCHY_SCALE: f64 = 1.0 / 40.0;

#[derive(Clone, Debug)]
pub enum ConfigError {
    Unsupported(&'static str),
    Sim(SimError),
    Io(IoError),
    Parse(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Unsupported(msg) => write!(f, "{msg}"),
            ConfigError::Sim(e) => write!(f, "{e}"),
            ConfigError::Io(e) => write!(f, "{e}"),
            ConfigError::Parse(msg) => write!(f, "config parse: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        ConfigError::Sim(e)
    }
}

impl From<IoError> for ConfigError {
    fn from(e: IoError) -> Self {
        ConfigError::Io(e)
    }
}

// IoError carries PathBuf + io::Error which are not Clone; keep ConfigError
// Clone-free where it embeds them.
impl Clone for IoError {
    fn clone(&self) -> Self {
        match self {
            IoError::Io(p, e) => {
                IoError::Io(p.clone(), std::io::Error::new(e.kind(), e.to_string()))
            }
            IoError::Parse(s) => IoError::Parse(s.clone()),
            IoError::State(e) => IoError::State(e.clone()),
        }
    }
}

/// Build one of the named initial configurations.
///
/// Formula indices i (agent) and j (coordinate) are 1-based, matching the
/// index-sensitive trigonometric recipes; storage stays 0-based. Random
/// configurations (cauchy, gaussian) are regenerated deterministically from
/// the seed, drawing coordinates agent-major from the x- and v-substreams.
pub fn generate_config(
    name: ConfigName,
    params: &ModelParams,
    seed: u64,
) -> Result<FlockState, ConfigError> {
    let (n, d) = (params.n, params.dim);
    let i1 = |i: usize| (i + 1) as f64;
    let j1 = |j: usize| (j + 1) as f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    let sqrt3 = 3.0f64.sqrt();

    let outlier_x = || -> Vec<DVector<f64>> {
        (0..n)
            .map(|i| DVector::from_fn(d, |j, _| 0.5 * (i1(i) + j1(j) * sqrt2).cos()))
            .collect()
    };

    let state = match name {
        ConfigName::Outlier => {
            let x = outlier_x();
            let mut v: Vec<DVector<f64>> = (0..n - 1)
                .map(|i| DVector::from_fn(d, |j, _| (i1(i) * sqrt3 - j1(j)).sin()))
                .collect();
            v.push(DVector::from_element(d, 10.0));
            FlockState::new(x, v)
        }
        ConfigName::Geometric => {
            let x = outlier_x();
            // the published recipe stops at i = N-1; the last agent follows
            // the same formula (no outlier term is defined for it)
            let v: Vec<DVector<f64>> = (0..n)
                .map(|i| {
                    let amp = 1.2f64.powf((i1(i) - 1.0) / 2.0);
                    DVector::from_fn(d, |j, _| amp * (i1(i) * sqrt3 - j1(j)).sin())
                })
                .collect();
            FlockState::new(x, v)
        }
        ConfigName::Cauchy => {
            let mut rx = substream(seed, STREAM_CONFIG_X);
            let mut rv = substream(seed, STREAM_CONFIG_V);
            let x = (0..n)
                .map(|_| DVector::from_fn(d, |_, _| standard_normal(&mut rx)))
                .collect();
            let v = (0..n)
                .map(|_| DVector::from_fn(d, |_, _| cauchy(&mut rv, CAUCHY_SCALE)))
                .collect();
            FlockState::new(x, v)
        }
        ConfigName::Gaussian => {
            let mut rx = substream(seed, STREAM_CONFIG_X);
            let mut rv = substream(seed, STREAM_CONFIG_V);
            let x = (0..n)
                .map(|_| DVector::from_fn(d, |_, _| 10.0 * standard_normal(&mut rx)))
                .collect();
            let v = (0..n)
                .map(|_| DVector::from_fn(d, |_, _| 8.0 * standard_normal(&mut rv)))
                .collect();
            FlockState::new(x, v)
        }
        ConfigName::Uniform => {
            let x: Vec<DVector<f64>> = (0..n)
                .map(|i| DVector::from_fn(d, |j, _| (i1(i) + j1(j) * sqrt2).cos()))
                .collect();
            let v = x.clone();
            FlockState::new(x, v)
        }
        ConfigName::File => {
            return Err(ConfigError::Unsupported(
                "config name `file` loads from state_file, it cannot be generated",
            ))
        }
    };
    state.map_err(|e| ConfigError::Parse(e.to_string()))
}

/// A full experiment description; round-trips losslessly through its flat
/// key-value text form.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: ConfigName,
    pub params: ModelParams,
    pub strategies: Vec<String>,
    pub k_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub dr_mode: DrMode,
    pub family: Family,
    pub out_dir: PathBuf,
    pub config_seed: u64,
    pub state_file: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for a named configuration with its reference parameters.
    pub fn for_name(name: ConfigName) -> Self {
        ExperimentConfig {
            name,
            params: paper_params(name),
            strategies: vec!["sp".into()],
            k_list: Vec::new(),
            seeds: vec![1],
            horizon: 100.0,
            dr_mode: DrMode::Experimental,
            family: Family::Bernoulli,
            out_dir: PathBuf::from("runs"),
            config_seed: 1,
            state_file: None,
        }
    }

    pub fn emit(&self) -> String {
        let mut s = String::new();
        let join_u = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let join_s = |v: &[u64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        s.push_str(&format!("name = {}\n", self.name.label()));
        s.push_str(&format!("n = {}\n", self.params.n));
        s.push_str(&format!("dim = {}\n", self.params.dim));
        s.push_str(&format!("kernel_scale = {}\n", self.params.kernel_scale));
        s.push_str(&format!("sigma = {}\n", self.params.sigma));
        s.push_str(&format!("beta = {}\n", self.params.beta));
        s.push_str(&format!("theta = {}\n", self.params.theta));
        s.push_str(&format!("tau = {}\n", self.params.tau));
        s.push_str(&format!("strategies = {}\n", self.strategies.join(",")));
        s.push_str(&format!("k_list = {}\n", join_u(&self.k_list)));
        s.push_str(&format!("seeds = {}\n", join_s(&self.seeds)));
        s.push_str(&format!("horizon = {}\n", self.horizon));
        s.push_str(&format!("dr_mode = {}\n", self.dr_mode.label()));
        s.push_str(&format!("family = {}\n", self.family.label()));
        s.push_str(&format!("out_dir = {}\n", self.out_dir.display()));
        s.push_str(&format!("config_seed = {}\n", self.config_seed));
        if let Some(f) = &self.state_file {
            s.push_str(&format!("state_file = {}\n", f.display()));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ExperimentConfig::for_name(ConfigName::Outlier);
        let mut params = cfg.params;
        let bad = |k: &str, v: &str| ConfigError::Parse(format!("bad value for {k}: {v}"));
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Parse(format!("line {}: missing `=`", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "name" => {
                    cfg.name = ConfigName::parse(value).ok_or_else(|| bad(key, value))?;
                }
                "n" => params.n = value.parse().map_err(|_| bad(key, value))?,
                "dim" => params.dim = value.parse().map_err(|_| bad(key, value))?,
                "kernel_scale" => {
                    params.kernel_scale = value.parse().map_err(|_| bad(key, value))?
                }
                "sigma" => params.sigma = value.parse().map_err(|_| bad(key, value))?,
                "beta" => params.beta = value.parse().map_err(|_| bad(key, value))?,
                "theta" => params.theta = value.parse().map_err(|_| bad(key, value))?,
                "tau" => params.tau = value.parse().map_err(|_| bad(key, value))?,
                "strategies" => {
                    cfg.strategies = split_list(value).map(str::to_string).collect();
                }
                "k_list" => {
                    cfg.k_list = split_list(value)
                        .map(|t| t.parse().map_err(|_| bad(key, value)))
                        .collect::<Result<_, _>>()?;
                }
                "seeds" => {
                    cfg.seeds = split_list(value)
                        .map(|t| t.parse().map_err(|_| bad(key, value)))
                        .collect::<Result<_, _>>()?;
                }
                "horizon" => cfg.horizon = value.parse().map_err(|_| bad(key, value))?,
                "dr_mode" => {
                    cfg.dr_mode = match value {
                        "experimental" => DrMode::Experimental,
                        "theoretical" => DrMode::Theoretical,
                        _ => return Err(bad(key, value)),
                    }
                }
                "family" => {
                    cfg.family = Family::parse(value).ok_or_else(|| bad(key, value))?;
                }
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "config_seed" => cfg.config_seed = value.parse().map_err(|_| bad(key, value))?,
                "state_file" => cfg.state_file = Some(PathBuf::from(value)),
                _ => return Err(ConfigError::Parse(format!("unknown key {key}"))),
            }
        }
        params.validate().map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.params = params;
        Ok(cfg)
    }

    /// The initial state this config describes.
    pub fn initial_state(&self) -> Result<FlockState, ConfigError> {
        match (self.name, &self.state_file) {
            (ConfigName::File, Some(path)) => Ok(io::load_state(path)?),
            (ConfigName::File, None) => {
                Err(ConfigError::Unsupported("config name `file` requires state_file"))
            }
            (name, _) => generate_config(name, &self.params, self.config_seed),
        }
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_strategy(label: &str) -> Result<StrategyKind, ConfigError> {
    match label {
        "none" => Ok(StrategyKind::None),
        "sp" => Ok(StrategyKind::Sp),
        "u" => Ok(StrategyKind::Uniform),
        "r" => Ok(StrategyKind::Random),
        _ => Err(ConfigError::Parse(format!("unknown strategy {label}"))),
    }
}

/// One (strategy, k, seed) cell of an experiment.
#[derive(Clone, Debug, Serialize)]
pub struct CellSummary {
    pub strategy: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub seed: u64,
    pub t0: Option<f64>,
    pub t0_5: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_m: Option<f64>,
    pub final_margin: f64,
    pub csv: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulateSummary {
    pub config: ExperimentConfig,
    pub x0: f64,
    pub v0: f64,
    pub initial_margin: f64,
    pub constants: TheoryConstants,
    pub cells: Vec<CellSummary>,
}

fn dr_strategy(cfg: &ExperimentConfig, k: usize, seed: u64) -> Result<Strategy, ConfigError> {
    let d = cfg.params.dim;
    let matrix = if k == d && cfg.family != Family::ScaledProjection {
        ProjectionMatrix::identity(d)
    } else {
        generate(cfg.family, k, d, seed).map_err(|e| ConfigError::Parse(e.to_string()))?
    };
    Ok(Strategy::Dr { matrix, mode: cfg.dr_mode })
}

fn run_one(
    cfg: &ExperimentConfig,
    initial: &FlockState,
    strategy_label: &str,
    k: Option<usize>,
    seed: u64,
) -> Result<RunRecord, ConfigError> {
    let strategy = match (strategy_label, k) {
        ("dr", Some(k)) => dr_strategy(cfg, k, seed)?,
        ("dr", None) => return Err(ConfigError::Parse("dr strategy needs k".into())),
        (label, _) => Strategy::Simple(parse_strategy(label)?),
    };
    Ok(run_strategy(initial, &strategy, cfg.horizon, &cfg.params, seed, &RunOptions::default())?)
}

/// Run every (strategy, seed, k) cell of the config, write one CSV per run
/// and a JSON summary. Cells execute in parallel; outputs are keyed by cell
/// so results are independent of scheduling.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<PathBuf, ConfigError> {
    let initial = cfg.initial_state()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| ConfigError::Io(IoError::Io(cfg.out_dir.clone(), e)))?;

    let mut cells: Vec<(String, Option<usize>, u64)> = Vec::new();
    for strategy in &cfg.strategies {
        if strategy == "dr" {
            for &k in &cfg.k_list {
                for &seed in &cfg.seeds {
                    cells.push((strategy.clone(), Some(k), seed));
                }
            }
        } else {
            for &seed in &cfg.seeds {
                cells.push((strategy.clone(), None, seed));
            }
        }
    }

    let results = par::map_items(cells, |(strategy, k, seed)| -> Result<CellSummary, ConfigError> {
        let record = run_one(cfg, &initial, &strategy, k, seed)?;
        let file = match k {
            Some(k) => format!("{}_{}_k{}_s{}.csv", cfg.name.label(), strategy, k, seed),
            None => format!("{}_{}_s{}.csv", cfg.name.label(), strategy, seed),
        };
        let path = cfg.out_dir.join(&file);
        io::write_run_csv(&record, &path)?;
        Ok(CellSummary {
            strategy,
            k,
            seed,
            t0: record.t0,
            t0_5: record.t0_5,
            ts: record.ts,
            e_m: record.e_m,
            final_margin: record.final_margin,
            csv: file,
        })
    });
    let mut cell_summaries = Vec::with_capacity(results.len());
    for r in results {
        cell_summaries.push(r?);
    }
    cell_summaries.sort_by(|a, b| {
        (&a.strategy, a.k, a.seed).cmp(&(&b.strategy, b.k, b.seed))
    });

    let m0 = moments(&initial);
    let summary = SimulateSummary {
        config: cfg.clone(),
        x0: m0.x,
        v0: m0.v,
        initial_margin: consensus_margin(&initial, &cfg.params),
        constants: compute_constants(m0.x, m0.v, m0.v, m0.x, &cfg.params),
        cells: cell_summaries,
    };
    let path = cfg.out_dir.join(format!("{}_summary.json", cfg.name.label()));
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    std::fs::write(&path, json).map_err(|e| ConfigError::Io(IoError::Io(path.clone(), e)))?;
    Ok(path)
}

/// Aggregate of T0 across seeds for one table row.
#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub control: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    pub mean_t0: Option<f64>,
    pub min_t0: Option<f64>,
    pub max_t0: Option<f64>,
    /// Number of seeded runs that reached the consensus region.
    pub n_seeds: usize,
}

fn aggregate(control: &str, k: Option<usize>, t0s: &[Option<f64>]) -> SweepRow {
    let reached: Vec<f64> = t0s.iter().flatten().cloned().collect();
    let n = reached.len();
    if n == 0 {
        return SweepRow { control: control.into(), k, mean_t0: None, min_t0: None, max_t0: None, n_seeds: 0 };
    }
    SweepRow {
        control: control.into(),
        k,
        mean_t0: Some(reached.iter().sum::<f64>() / n as f64),
        min_t0: reached.iter().cloned().reduce(f64::min),
        max_t0: reached.iter().cloned().reduce(f64::max),
        n_seeds: n,
    }
}

/// Mean time-to-consensus of the dimension-reduction control per projected
/// dimension k, with the sparse and random baselines, as a plot-ready CSV.
pub fn cmd_sweep_k(cfg: &ExperimentConfig) -> Result<(PathBuf, Vec<SweepRow>), ConfigError> {
    let initial = cfg.initial_state()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| ConfigError::Io(IoError::Io(cfg.out_dir.clone(), e)))?;

    enum Cell {
        Baseline(StrategyKind, u64),
        Dr(usize, u64),
    }
    let mut cells = Vec::new();
    for &seed in &cfg.seeds {
        cells.push(Cell::Baseline(StrategyKind::Sp, seed));
        cells.push(Cell::Baseline(StrategyKind::Random, seed));
        for &k in &cfg.k_list {
            cells.push(Cell::Dr(k, seed));
        }
    }
    let results = par::map_items(cells, |cell| -> Result<(String, Option<usize>, u64, Option<f64>), ConfigError> {
        match cell {
            Cell::Baseline(kind, seed) => {
                let record = run_strategy(
                    &initial,
                    &Strategy::Simple(kind),
                    cfg.horizon,
                    &cfg.params,
                    seed,
                    &RunOptions::default(),
                )?;
                Ok((kind.label().to_string(), None, seed, record.t0))
            }
            Cell::Dr(k, seed) => {
                let record = run_one(cfg, &initial, "dr", Some(k), seed)?;
                Ok((format!("dr"), Some(k), seed, record.t0))
            }
        }
    });
    let mut flat = Vec::new();
    for r in results {
        flat.push(r?);
    }

    let mut rows = Vec::new();
    for control in ["sp", "r"] {
        let t0s: Vec<Option<f64>> =
            flat.iter().filter(|(c, _, _, _)| c == control).map(|(_, _, _, t)| *t).collect();
        rows.push(aggregate(control, None, &t0s));
    }
    for &k in &cfg.k_list {
        let t0s: Vec<Option<f64>> = flat
            .iter()
            .filter(|(c, kk, _, _)| c == "dr" && *kk == Some(k))
            .map(|(_, _, _, t)| *t)
            .collect();
        rows.push(aggregate("dr", Some(k), &t0s));
    }

    let path = cfg.out_dir.join(format!("{}_sweep_k.csv", cfg.name.label()));
    let fmt_opt = |v: Option<f64>| v.map(io::format_float).unwrap_or_default();
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{}",
                r.control,
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                fmt_opt(r.mean_t0),
                fmt_opt(r.min_t0),
                fmt_opt(r.max_t0),
                r.n_seeds
            )
        })
        .collect();
    io::write_table(&path, "control,k,mean_t0,min_t0,max_t0,n_seeds", &lines)?;
    Ok((path, rows))
}

/// One matrix of an exactness study.
#[derive(Clone, Debug, Serialize)]
pub struct ExactnessRow {
    pub matrix_seed: u64,
    pub family: String,
    pub e_m: f64,
    pub t0: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExactnessStudy {
    pub k: usize,
    pub rows: Vec<ExactnessRow>,
    /// Spearman rank correlation between E_M and T0 over the random rows
    /// that reached consensus.
    pub rank_correlation: Option<f64>,
}

/// For `n_matrices` seeded matrices at fixed k: (E_M, T0) pairs, scatter CSV,
/// and the rank correlation. A full identity matrix is included as the
/// E_M = 0 control row.
pub fn cmd_exactness(
    cfg: &ExperimentConfig,
    k: usize,
    matrix_seeds: &[u64],
) -> Result<(PathBuf, ExactnessStudy), ConfigError> {
    let initial = cfg.initial_state()?;
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| ConfigError::Io(IoError::Io(cfg.out_dir.clone(), e)))?;

    let mut cells: Vec<Option<u64>> = vec![None]; // None = identity control row
    cells.extend(matrix_seeds.iter().map(|&s| Some(s)));
    let results = par::map_items(cells, |cell| -> Result<ExactnessRow, ConfigError> {
        let (matrix, seed) = match cell {
            None => (ProjectionMatrix::identity(cfg.params.dim), 0),
            Some(seed) => (
                generate(cfg.family, k, cfg.params.dim, seed)
                    .map_err(|e| ConfigError::Parse(e.to_string()))?,
                seed,
            ),
        };
        let family = matrix.family.label().to_string();
        let record = run_strategy(
            &initial,
            &Strategy::Dr { matrix, mode: cfg.dr_mode },
            cfg.horizon,
            &cfg.params,
            seed,
            &RunOptions::default(),
        )?;
        Ok(ExactnessRow { matrix_seed: seed, family, e_m: record.e_m.unwrap_or(f64::NAN), t0: record.t0 })
    });
    let mut rows = Vec::new();
    for r in results {
        rows.push(r?);
    }

    let scatter: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.family != "identity")
        .filter_map(|r| r.t0.map(|t0| (r.e_m, t0)))
        .collect();
    let rank_correlation = spearman_rho(&scatter);

    let path = cfg.out_dir.join(format!("{}_exactness_k{}.csv", cfg.name.label(), k));
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{}",
                r.matrix_seed,
                r.family,
                io::format_float(r.e_m),
                r.t0.map(io::format_float).unwrap_or_default()
            )
        })
        .collect();
    io::write_table(&path, "matrix_seed,family,e_m,t0", &lines)?;
    Ok((path, ExactnessStudy { k, rows, rank_correlation }))
}

/// Spearman rank correlation; None for fewer than two points.
pub fn spearman_rho(pairs: &[(f64, f64)]) -> Option<f64> {
    if pairs.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let rx = ranks(&xs);
    let ry = ranks(&ys);
    pearson(&rx, &ry)
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0; // average rank of the tie group
        for &orig in &idx[i..=j] {
            out[orig] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}
