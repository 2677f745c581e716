//! Sampled control strategies: sparse (act on the agent farthest from the
//! mean), uniform, random sparse, and the dimension-reduction strategy that
//! picks the controlled agent from a projected low-dimensional twin system.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{compute_constants, TheoryConstants};
use crate::dynamics::{
    rk4_step, run_sampled, sample_record, RunOptions, SampleLoop, SimError, Trajectory,
};
use crate::jl::{exactness_at_zero, ProjectionMatrix};
use crate::model::{margin_from_moments, moments, perp_decompose, FlockState, ModelParams};
use crate::rng::{substream, STREAM_RANDOM_CONTROL};

/// A per-agent control with the l1(l2) budget sum_i ||u_i|| <= theta.
#[derive(Clone, Debug)]
pub struct ControlVector {
    pub entries: Vec<DVector<f64>>,
    /// The single agent a sparse strategy acts on (0-based storage index).
    pub active_index: Option<usize>,
    /// Total budget actually spent.
    pub magnitude: f64,
}

impl ControlVector {
    pub fn zero(n: usize, dim: usize) -> Self {
        ControlVector { entries: vec![DVector::zeros(dim); n], active_index: None, magnitude: 0.0 }
    }

    /// sum_i ||u_i||.
    pub fn budget(&self) -> f64 {
        self.entries.iter().map(|u| u.norm()).sum()
    }
}

/// Uncoupled strategies handled by `dynamics::run_sampled`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    None,
    Sp,
    Uniform,
    Random,
}

impl StrategyKind {
    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::None => "none",
            StrategyKind::Sp => "sp",
            StrategyKind::Uniform => "u",
            StrategyKind::Random => "r",
        }
    }
}

/// Threshold rule for switching the low-dimensional system off.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DrMode {
    /// W <= gamma(Y)^2, the same region test the high system uses.
    Experimental,
    /// W <= (2 Delta)^2 with Delta from the convergence constants.
    Theoretical,
}

impl DrMode {
    pub fn label(self) -> &'static str {
        match self {
            DrMode::Experimental => "experimental",
            DrMode::Theoretical => "theoretical",
        }
    }
}

/// Full strategy configuration for a run.
#[derive(Clone, Debug)]
pub enum Strategy {
    Simple(StrategyKind),
    Dr { matrix: ProjectionMatrix, mode: DrMode },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Simple(k) => k.label().to_string(),
            Strategy::Dr { .. } => "dr".to_string(),
        }
    }
}

/// Smallest index attaining the maximal perp norm, with that norm.
/// An all-zero perp family returns (0, 0.0).
pub fn select_max_perp_index(v: &[DVector<f64>]) -> (usize, f64) {
    let (_, perps) = perp_decompose(v);
    let mut best = 0;
    let mut best_norm = perps[0].norm();
    for (i, p) in perps.iter().enumerate().skip(1) {
        let n = p.norm();
        if n > best_norm {
            best = i;
            best_norm = n;
        }
    }
    (best, best_norm)
}

fn sparse_entry(n: usize, dim: usize, index: usize, perp: &DVector<f64>, theta: f64) -> ControlVector {
    let norm = perp.norm();
    if norm == 0.0 {
        // the feedback direction is undefined; zero is the only
        // budget-feasible continuous completion
        return ControlVector::zero(n, dim);
    }
    let mut c = ControlVector::zero(n, dim);
    c.entries[index] = perp * (-theta / norm);
    c.active_index = Some(index);
    c.magnitude = theta;
    c
}

/// Act with the full budget on the agent whose consensus parameter is
/// farthest from the mean: u_i^ = -theta v_i^perp / ||v_i^perp||.
pub fn control_sp(state: &FlockState, params: &ModelParams) -> ControlVector {
    let (_, perps) = perp_decompose(&state.v);
    let (index, norm) = select_max_perp_index(&state.v);
    if norm == 0.0 {
        return ControlVector::zero(state.n(), state.dim);
    }
    sparse_entry(state.n(), state.dim, index, &perps[index], params.theta)
}

/// Act on every agent with budget share theta/N toward the mean.
pub fn control_uniform(state: &FlockState, params: &ModelParams) -> ControlVector {
    let n = state.n();
    let (_, perps) = perp_decompose(&state.v);
    let mut c = ControlVector::zero(n, state.dim);
    let share = params.theta / n as f64;
    let mut spent = 0.0;
    for (i, p) in perps.iter().enumerate() {
        let norm = p.norm();
        if norm > 0.0 {
            c.entries[i] = p * (-share / norm);
            spent += share;
        }
    }
    c.magnitude = spent;
    c
}

/// Act with the full budget on an agent drawn uniformly from the run's
/// seeded control stream.
pub fn control_random(
    state: &FlockState,
    params: &ModelParams,
    rng: &mut ChaCha8Rng,
) -> ControlVector {
    let n = state.n();
    let index = rng.gen_range(0..n);
    let (_, perps) = perp_decompose(&state.v);
    sparse_entry(n, state.dim, index, &perps[index], params.theta)
}

/// A coupled high/low run under the dimension-reduction strategy.
#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub high: Trajectory,
    pub low: Trajectory,
    /// First sample time with the high system in the consensus region.
    pub t0: Option<f64>,
    /// First sample time with the high margin at half its initial value.
    pub t0_5: Option<f64>,
    /// Sample time at which the random strategy replaced the low-index rule
    /// (set to t0 when the high system entered the region first).
    pub ts: Option<f64>,
    /// Exactness of the matrix at 0.
    pub e_m: f64,
    pub final_margin: f64,
    pub seed: u64,
    pub mode: DrMode,
    /// Constants backing the theoretical threshold (Theoretical mode only).
    pub theory: Option<TheoryConstants>,
}

/// Run the coupled sampling solutions of the high system and its projected
/// low-dimensional twin under the dimension-reduction control.
///
/// At each sample time: (i) if the high system satisfies V <= gamma(X)^2 the
/// control is zero from then on and T0 is set; (ii) otherwise, if the low
/// system already crossed its threshold, the high control follows the random
/// sparse strategy; (iii) otherwise the controlled index is selected from the
/// low system's perp norms while the control direction uses the high system's
/// v_i^perp (the only high-dimensional observations required are v_i and the
/// control-drift-reconstructible mean). Both systems then advance one RK4
/// step with their own frozen controls.
pub fn run_dr(
    initial_high: &FlockState,
    matrix: &ProjectionMatrix,
    params: &ModelParams,
    mode: DrMode,
    horizon: f64,
    seed: u64,
    opts: &RunOptions,
) -> Result<CoupledRun, SimError> {
    if initial_high.dim != matrix.d {
        return Err(SimError::DimensionMismatch { expected: matrix.d, got: initial_high.dim });
    }
    let mut high_loop = SampleLoop::new(params, horizon)?;
    let steps = high_loop.steps;
    let mut rng = substream(seed, STREAM_RANDOM_CONTROL);

    let mut high = initial_high.clone();
    let mut low = matrix
        .project_state(initial_high)
        .map_err(|_| SimError::DimensionMismatch { expected: matrix.d, got: initial_high.dim })?;
    let low_params = ModelParams { dim: matrix.k, ..*params };

    let e_m = exactness_at_zero(matrix, &initial_high.v)
        .map_err(|_| SimError::DimensionMismatch { expected: matrix.d, got: initial_high.dim })?;

    let theory = match mode {
        DrMode::Theoretical => {
            let m_high = moments(&high);
            let m_low = moments(&low);
            Some(compute_constants(m_high.x, m_high.v, m_low.v, m_low.x, params))
        }
        DrMode::Experimental => None,
    };
    let low_threshold = theory.as_ref().map(|c| c.gamma_threshold);

    let mut high_samples = Vec::with_capacity(steps + 1);
    let mut low_samples = Vec::with_capacity(steps + 1);
    let mut high_states = Vec::new();
    let mut low_states = Vec::new();
    let mut t0 = None;
    let mut ts = None;
    let mut low_crossed = false;
    let t_base = initial_high.t;

    for n in 0..=steps {
        let tn = t_base + n as f64 * params.tau;
        let m_high = moments(&high);
        let margin_high = margin_from_moments(&m_high, &high_loop.gamma);
        let m_low = moments(&low);
        let margin_low = margin_from_moments(&m_low, &high_loop.gamma);

        if t0.is_none() && margin_high <= 0.0 {
            t0 = Some(tn);
            if ts.is_none() {
                ts = Some(tn);
            }
            high_loop.switched_off = true;
        }
        if !low_crossed {
            let crossed = match low_threshold {
                Some(gamma_threshold) => m_low.v <= gamma_threshold,
                None => margin_low <= 0.0,
            };
            if crossed {
                low_crossed = true;
                if ts.is_none() {
                    ts = Some(tn);
                }
            }
        }

        if opts.record_states {
            high_states.push(high.clone());
            low_states.push(low.clone());
        }
        if n == steps {
            let gs_high = m_high.v - margin_high;
            let gs_low = m_low.v - margin_low;
            high_samples.push(sample_record(&high, m_high, gs_high, margin_high, None));
            low_samples.push(sample_record(&low, m_low, gs_low, margin_low, None));
            break;
        }

        let (high_control, low_control) = if high_loop.switched_off {
            (ControlVector::zero(high.n(), high.dim), ControlVector::zero(low.n(), low.dim))
        } else if low_crossed {
            (
                control_random(&high, params, &mut rng),
                ControlVector::zero(low.n(), low.dim),
            )
        } else {
            let (_, low_perps) = perp_decompose(&low.v);
            let (index, low_norm) = select_max_perp_index(&low.v);
            let (_, high_perps) = perp_decompose(&high.v);
            let low_control = if low_norm == 0.0 {
                ControlVector::zero(low.n(), low.dim)
            } else {
                sparse_entry(low.n(), low.dim, index, &low_perps[index], params.theta)
            };
            let high_control =
                sparse_entry(high.n(), high.dim, index, &high_perps[index], params.theta);
            (high_control, low_control)
        };

        let gs_high = m_high.v - margin_high;
        let gs_low = m_low.v - margin_low;
        high_samples.push(sample_record(&high, m_high, gs_high, margin_high, Some(&high_control)));
        low_samples.push(sample_record(&low, m_low, gs_low, margin_low, Some(&low_control)));

        let h = params.tau / opts.substeps as f64;
        for _ in 0..opts.substeps {
            high = rk4_step(&high, &high_control, h, params).map_err(|e| match e {
                SimError::NonFinite { t, .. } => SimError::NonFinite { step: n, t },
                other => other,
            })?;
            low = rk4_step(&low, &low_control, h, &low_params).map_err(|e| match e {
                SimError::NonFinite { t, .. } => SimError::NonFinite { step: n, t },
                other => other,
            })?;
        }
        let t_next = t_base + (n + 1) as f64 * params.tau;
        high.t = t_next;
        low.t = t_next;
    }

    let high_traj =
        Trajectory { samples: high_samples, states: high_states, params: *params, seed: Some(seed) };
    let low_traj =
        Trajectory { samples: low_samples, states: low_states, params: low_params, seed: Some(seed) };
    let t0_5 = high_traj.t_half();
    let final_margin = high_traj.final_margin();
    Ok(CoupledRun {
        high: high_traj,
        low: low_traj,
        t0,
        t0_5,
        ts,
        e_m,
        final_margin,
        seed,
        mode,
        theory,
    })
}

/// Outcome of one strategy run: trajectories plus summary metrics.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub strategy: String,
    pub high: Trajectory,
    pub low: Option<Trajectory>,
    pub t0: Option<f64>,
    pub t0_5: Option<f64>,
    pub ts: Option<f64>,
    pub e_m: Option<f64>,
    /// Margin at the final sample; diagnostic when t0 was never reached.
    pub final_margin: f64,
    pub seed: u64,
}

/// Dispatch a strategy run and collect the summary metrics T0, T0.5, T_S.
pub fn run_strategy(
    initial: &FlockState,
    strategy: &Strategy,
    horizon: f64,
    params: &ModelParams,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunRecord, SimError> {
    match strategy {
        Strategy::Simple(kind) => {
            let traj = run_sampled(initial, *kind, horizon, params, seed, opts)?;
            Ok(RunRecord {
                strategy: kind.label().to_string(),
                t0: traj.t0(),
                t0_5: traj.t_half(),
                ts: None,
                e_m: None,
                final_margin: traj.final_margin(),
                high: traj,
                low: None,
                seed,
            })
        }
        Strategy::Dr { matrix, mode } => {
            let run = run_dr(initial, matrix, params, *mode, horizon, seed, opts)?;
            Ok(RunRecord {
                strategy: "dr".to_string(),
                t0: run.t0,
                t0_5: run.t0_5,
                ts: run.ts,
                e_m: Some(run.e_m),
                final_margin: run.final_margin,
                high: run.high,
                low: Some(run.low),
                seed,
            })
        }
    }
}
