//! Right-hand side of the (controlled) alignment system and the fixed-step
//! RK4 integrator for sampling solutions: the feedback is recomputed at
//! multiples of the sampling time tau and frozen inside each interval.

use nalgebra::DVector;

use crate::control::{self, ControlVector, StrategyKind};
use crate::model::{
    margin_from_moments, max_pairwise_distance, moments, FlockState, GammaFn, ModelParams, Moments,
};
use crate::rng::{substream, STREAM_RANDOM_CONTROL};

#[derive(Clone, Debug)]
pub enum SimError {
    DimensionMismatch { expected: usize, got: usize },
    AgentCountMismatch { expected: usize, got: usize },
    NonFinite { step: usize, t: f64 },
    BadHorizon(f64),
    Infeasible(String),
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            SimError::AgentCountMismatch { expected, got } => {
                write!(f, "agent count mismatch: expected {expected}, got {got}")
            }
            SimError::NonFinite { step, t } => {
                write!(f, "numerical blow-up: non-finite state at step {step} (t = {t})")
            }
            SimError::BadHorizon(h) => write!(f, "horizon must be positive, got {h}"),
            SimError::Infeasible(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for SimError {}

/// Time derivative of a flock state.
#[derive(Clone, Debug)]
pub struct Derivative {
    pub dx: Vec<DVector<f64>>,
    pub dv: Vec<DVector<f64>>,
}

/// dx_i = v_i; dv_i = (1/N) sum_j a(||x_i - x_j||)(v_j - v_i) + u_i.
///
/// Pair terms are accumulated antisymmetrically, so with zero control the mean
/// consensus parameter is conserved to rounding.
pub fn rhs(
    state: &FlockState,
    control: &ControlVector,
    params: &ModelParams,
) -> Result<Derivative, SimError> {
    let n = state.n();
    if control.entries.len() != n {
        return Err(SimError::AgentCountMismatch { expected: n, got: control.entries.len() });
    }
    for u in &control.entries {
        if u.len() != state.dim {
            return Err(SimError::DimensionMismatch { expected: state.dim, got: u.len() });
        }
    }
    let dx = state.v.clone();
    let mut dv: Vec<DVector<f64>> = vec![DVector::zeros(state.dim); n];
    for i in 0..n {
        for j in (i + 1)..n {
            let r = (&state.x[i] - &state.x[j]).norm();
            let a = params.a(r);
            let term = (&state.v[j] - &state.v[i]) * a;
            dv[i] += &term;
            dv[j] -= &term;
        }
    }
    let inv_n = 1.0 / n as f64;
    for (i, d) in dv.iter_mut().enumerate() {
        *d *= inv_n;
        *d += &control.entries[i];
    }
    Ok(Derivative { dx, dv })
}

fn advanced(state: &FlockState, k: &Derivative, dt: f64) -> FlockState {
    let mut s = state.clone();
    for i in 0..s.n() {
        s.x[i] += &k.dx[i] * dt;
        s.v[i] += &k.dv[i] * dt;
    }
    s
}

/// One classical RK4 step of width `h` with the control held constant.
///
/// Advances t by h and the accumulated mean drift by h * (1/N) sum_i u_i
/// (exact, since the control is frozen). h = 0 returns the state unchanged.
pub fn rk4_step(
    state: &FlockState,
    control: &ControlVector,
    h: f64,
    params: &ModelParams,
) -> Result<FlockState, SimError> {
    if h == 0.0 {
        return Ok(state.clone());
    }
    let k1 = rhs(state, control, params)?;
    let k2 = rhs(&advanced(state, &k1, 0.5 * h), control, params)?;
    let k3 = rhs(&advanced(state, &k2, 0.5 * h), control, params)?;
    let k4 = rhs(&advanced(state, &k3, h), control, params)?;
    let mut out = state.clone();
    let w = h / 6.0;
    for i in 0..out.n() {
        out.x[i] += (&k1.dx[i] + &k2.dx[i] * 2.0 + &k3.dx[i] * 2.0 + &k4.dx[i]) * w;
        out.v[i] += (&k1.dv[i] + &k2.dv[i] * 2.0 + &k3.dv[i] * 2.0 + &k4.dv[i]) * w;
    }
    out.t = state.t + h;
    let mut mean_u = DVector::zeros(state.dim);
    for u in &control.entries {
        mean_u += u;
    }
    out.vbar_drift += mean_u * (h / state.n() as f64);
    if !out.is_finite() {
        return Err(SimError::NonFinite { step: 0, t: out.t });
    }
    Ok(out)
}

/// Per-sample record of a run: scalar observables at t = n tau.
#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub t: f64,
    pub moments: Moments,
    pub gamma_sq: f64,
    pub margin: f64,
    /// Agent the sparse control acted on over [t, t + tau), 0-based.
    pub control_index: Option<usize>,
    pub control_active: bool,
    /// l1(l2) budget actually spent by the control of this interval.
    pub control_budget: f64,
    pub max_pair_x: f64,
    pub max_pair_v: f64,
}

/// A sampled run: observables on the exact grid n tau, and (optionally) full
/// state snapshots for error analysis.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    /// State snapshots aligned with `samples`; empty unless requested.
    pub states: Vec<FlockState>,
    pub params: ModelParams,
    pub seed: Option<u64>,
}

impl Trajectory {
    /// First sample time with margin <= 0 (consensus region entered).
    pub fn t0(&self) -> Option<f64> {
        self.samples.iter().find(|s| s.margin <= 0.0).map(|s| s.t)
    }

    /// First sample time with margin <= half the initial margin.
    pub fn t_half(&self) -> Option<f64> {
        let m0 = self.samples.first()?.margin;
        self.samples.iter().find(|s| s.margin <= 0.5 * m0).map(|s| s.t)
    }

    pub fn final_margin(&self) -> f64 {
        self.samples.last().map(|s| s.margin).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct RunOptions {
    /// Record a full state snapshot at every sample time.
    pub record_states: bool,
    /// RK4 substeps per sampling interval; the sampling scheme itself always
    /// freezes the control over the whole interval. All reference experiments
    /// use 1 (integrator step width equal to tau).
    pub substeps: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { record_states: false, substeps: 1 }
    }
}

pub(crate) struct SampleLoop {
    pub gamma: GammaFn,
    pub steps: usize,
    pub switched_off: bool,
}

impl SampleLoop {
    pub fn new(params: &ModelParams, horizon: f64) -> Result<Self, SimError> {
        if !(horizon > 0.0) {
            return Err(SimError::BadHorizon(horizon));
        }
        // ceil with a grid-rounding guard so that e.g. 100.0 / 0.01 stays 10000
        let steps = ((horizon / params.tau) - 1e-9).ceil().max(1.0) as usize;
        Ok(SampleLoop { gamma: GammaFn::new(params), steps, switched_off: false })
    }

    pub fn observe(&mut self, state: &FlockState) -> (Moments, f64, f64) {
        let m = moments(state);
        let margin = margin_from_moments(&m, &self.gamma);
        if margin <= 0.0 {
            self.switched_off = true;
        }
        let gamma_sq = m.v - margin; // finite only when gamma is finite
        (m, gamma_sq, margin)
    }
}

pub(crate) fn sample_record(
    state: &FlockState,
    m: Moments,
    gamma_sq: f64,
    margin: f64,
    control: Option<&ControlVector>,
) -> TrajectorySample {
    TrajectorySample {
        t: state.t,
        moments: m,
        gamma_sq,
        margin,
        control_index: control.and_then(|c| c.active_index),
        control_active: control.map(|c| c.magnitude > 0.0).unwrap_or(false),
        control_budget: control.map(|c| c.budget()).unwrap_or(0.0),
        max_pair_x: max_pairwise_distance(&state.x),
        max_pair_v: max_pairwise_distance(&state.v),
    }
}

/// Run the sampling solution of one system under an uncoupled strategy.
///
/// For each interval [n tau, (n+1) tau) the control is computed once from the
/// state at n tau and held constant while one RK4 step of width tau is taken.
/// The consensus test V <= gamma(X)^2 runs at the beginning of each interval,
/// before the control is computed; once it holds the control is zero for all
/// later times. The horizon is rounded up to a whole number of intervals, and
/// sample times are n tau computed from the integer index.
pub fn run_sampled(
    initial: &FlockState,
    strategy: StrategyKind,
    horizon: f64,
    params: &ModelParams,
    seed: u64,
    opts: &RunOptions,
) -> Result<Trajectory, SimError> {
    let mut ctl = SampleLoop::new(params, horizon)?;
    let t_base = initial.t;
    let mut rng = substream(seed, STREAM_RANDOM_CONTROL);
    let mut state = initial.clone();
    let mut samples = Vec::with_capacity(ctl.steps + 1);
    let mut states = Vec::new();
    for n in 0..=ctl.steps {
        let (m, gamma_sq, margin) = ctl.observe(&state);
        if opts.record_states {
            states.push(state.clone());
        }
        if n == ctl.steps {
            samples.push(sample_record(&state, m, gamma_sq, margin, None));
            break;
        }
        let control = if ctl.switched_off {
            ControlVector::zero(state.n(), state.dim)
        } else {
            match strategy {
                StrategyKind::None => ControlVector::zero(state.n(), state.dim),
                StrategyKind::Sp => control::control_sp(&state, params),
                StrategyKind::Uniform => control::control_uniform(&state, params),
                StrategyKind::Random => control::control_random(&state, params, &mut rng),
            }
        };
        samples.push(sample_record(&state, m, gamma_sq, margin, Some(&control)));
        let h = params.tau / opts.substeps as f64;
        for _ in 0..opts.substeps {
            state = rk4_step(&state, &control, h, params)
                .map_err(|e| match e {
                    SimError::NonFinite { t, .. } => SimError::NonFinite { step: n, t },
                    other => other,
                })?;
        }
        state.t = t_base + (n + 1) as f64 * params.tau;
    }
    Ok(Trajectory { samples, states, params: *params, seed: Some(seed) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_agent_params(beta: f64) -> ModelParams {
        ModelParams::new(2, 1, 1.0, 1.0, beta, 1.0, 0.01).unwrap()
    }

    fn state_1d(xs: &[f64], vs: &[f64]) -> FlockState {
        FlockState::new(
            xs.iter().map(|&x| DVector::from_vec(vec![x])).collect(),
            vs.iter().map(|&v| DVector::from_vec(vec![v])).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rhs_consensus_is_invariant() {
        let c = DVector::from_vec(vec![1.0, -2.0]);
        let state = FlockState::new(
            vec![DVector::from_vec(vec![0.0, 0.0]), DVector::from_vec(vec![3.0, 1.0])],
            vec![c.clone(), c],
        )
        .unwrap();
        let p = ModelParams::new(2, 2, 1.0, 1.0, 0.7, 1.0, 0.01).unwrap();
        let zero = ControlVector::zero(2, 2);
        let d = rhs(&state, &zero, &p).unwrap();
        assert!(d.dv.iter().all(|w| w.norm() == 0.0));
    }

    #[test]
    fn rhs_two_agent_hand_value() {
        // x1 = x2 = 0, v = (1, -1), a(0) = 1: dv1 = -1, dv2 = +1
        let state = state_1d(&[0.0, 0.0], &[1.0, -1.0]);
        let p = two_agent_params(0.37);
        let zero = ControlVector::zero(2, 1);
        let d = rhs(&state, &zero, &p).unwrap();
        assert_relative_eq!(d.dv[0][0], -1.0, max_relative = 1e-14);
        assert_relative_eq!(d.dv[1][0], 1.0, max_relative = 1e-14);
        assert_eq!(d.dx[0][0], 1.0);
    }

    #[test]
    fn rhs_mean_velocity_conserved() {
        let mut rng = crate::rng::substream(17, 0);
        let state = FlockState::new(
            (0..6)
                .map(|_| DVector::from_fn(4, |_, _| crate::rng::standard_normal(&mut rng)))
                .collect(),
            (0..6)
                .map(|_| DVector::from_fn(4, |_, _| crate::rng::standard_normal(&mut rng)))
                .collect(),
        )
        .unwrap();
        let p = ModelParams::new(6, 4, 1.3, 0.8, 0.9, 1.0, 0.01).unwrap();
        let d = rhs(&state, &ControlVector::zero(6, 4), &p).unwrap();
        let mut sum = DVector::zeros(4);
        for w in &d.dv {
            sum += w;
        }
        assert!(sum.norm() < 1e-12);
    }

    #[test]
    fn rhs_rejects_mismatched_control() {
        let state = state_1d(&[0.0, 1.0], &[1.0, -1.0]);
        let p = two_agent_params(1.0);
        let bad = ControlVector::zero(3, 1);
        assert!(rhs(&state, &bad, &p).is_err());
        let bad_dim = ControlVector::zero(2, 2);
        assert!(rhs(&state, &bad_dim, &p).is_err());
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        // beta = 0 makes the kernel constant: the relative coordinate solves
        // dv_rel/dt = -v_rel exactly, so one step must match exp(-h) to O(h^5)
        let state = state_1d(&[0.3, -0.3], &[0.5, -0.5]);
        let p = two_agent_params(0.0);
        let h = 0.01;
        let next = rk4_step(&state, &ControlVector::zero(2, 1), h, &p).unwrap();
        let v_rel = next.v[0][0] - next.v[1][0];
        let exact = 1.0 * (-h as f64).exp();
        assert!((v_rel - exact).abs() < 1e-8, "v_rel {v_rel} exact {exact}");
        assert!((v_rel - exact).abs() < 1e-12, "RK4 local error should be ~h^5/120");
    }

    #[test]
    fn rk4_translates_consensus_state() {
        let c = DVector::from_vec(vec![2.0]);
        let state = FlockState::new(
            vec![DVector::from_vec(vec![0.0]), DVector::from_vec(vec![1.0])],
            vec![c.clone(), c.clone()],
        )
        .unwrap();
        let p = two_agent_params(0.6);
        let next = rk4_step(&state, &ControlVector::zero(2, 1), 0.5, &p).unwrap();
        assert_relative_eq!(next.x[0][0], 1.0, max_relative = 1e-14);
        assert_relative_eq!(next.x[1][0], 2.0, max_relative = 1e-14);
        assert_eq!(next.v[0], c);
    }

    #[test]
    fn rk4_zero_width_is_identity() {
        let state = state_1d(&[0.1, 0.4], &[1.0, 2.0]);
        let p = two_agent_params(0.6);
        let next = rk4_step(&state, &ControlVector::zero(2, 1), 0.0, &p).unwrap();
        assert_eq!(next, state);
    }

    #[test]
    fn uncontrolled_run_conserves_mean_and_decreases_v() {
        let mut rng = crate::rng::substream(23, 0);
        for trial in 0..5 {
            let n = 3 + trial;
            let state = FlockState::new(
                (0..n)
                    .map(|_| DVector::from_fn(3, |_, _| crate::rng::standard_normal(&mut rng)))
                    .collect(),
                (0..n)
                    .map(|_| DVector::from_fn(3, |_, _| crate::rng::standard_normal(&mut rng)))
                    .collect(),
            )
            .unwrap();
            let p = ModelParams::new(n, 3, 1.0, 1.0, 0.8, 1.0, 0.02).unwrap();
            let mean0 = state.mean_v();
            let traj = run_sampled(
                &state,
                StrategyKind::None,
                2.0,
                &p,
                0,
                &RunOptions { record_states: true, substeps: 1 },
            )
            .unwrap();
            for w in traj.samples.windows(2) {
                assert!(w[1].moments.v <= w[0].moments.v + 1e-9);
            }
            for s in &traj.states {
                assert!((s.mean_v() - &mean0).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn sample_grid_is_exact_and_runs_deterministic() {
        let state = state_1d(&[0.0, 1.0], &[1.0, -1.0]);
        let p = two_agent_params(0.9);
        let a = run_sampled(&state, StrategyKind::Random, 0.25, &p, 42, &RunOptions::default())
            .unwrap();
        let b = run_sampled(&state, StrategyKind::Random, 0.25, &p, 42, &RunOptions::default())
            .unwrap();
        for (i, s) in a.samples.iter().enumerate() {
            assert_eq!(s.t, i as f64 * p.tau);
        }
        assert_eq!(a.samples.len(), b.samples.len());
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            assert_eq!(sa.moments.v.to_bits(), sb.moments.v.to_bits());
            assert_eq!(sa.moments.x.to_bits(), sb.moments.x.to_bits());
            assert_eq!(sa.control_index, sb.control_index);
        }
    }
}
