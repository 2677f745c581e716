//! Core model data: parameters, flock states, disagreement moments, the
//! interaction kernel and the consensus-region functional gamma.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::quad;

/// Parameters of an alignment system and its sampled control.
///
/// The interaction kernel is a(r) = K / (sigma^2 + r^2)^beta; theta is the
/// per-instant l1(l2) control budget and tau the sampling time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Number of agents (N >= 2).
    pub n: usize,
    /// Ambient dimension of the governed system.
    pub dim: usize,
    /// Kernel scale K > 0.
    pub kernel_scale: f64,
    /// Kernel offset sigma > 0.
    pub sigma: f64,
    /// Kernel decay power beta >= 0.
    pub beta: f64,
    /// Control budget theta > 0.
    pub theta: f64,
    /// Sampling time tau > 0.
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    InvalidParams(String),
    NegativeRadius(f64),
    NegativeSpread(f64),
    InvalidState(String),
}

impl std::fmt::Display for ModelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelError::InvalidParams(msg) => write!(f, "invalid model parameters: {msg}"),
            ModelError::NegativeRadius(r) => write!(f, "kernel radius must be >= 0, got {r}"),
            ModelError::NegativeSpread(x) => write!(f, "spatial spread must be >= 0, got {x}"),
            ModelError::InvalidState(msg) => write!(f, "invalid state: {msg}"),
        }
    }
}

impl std::error::Error for ModelError {}

impl ModelParams {
    pub fn new(
        n: usize,
        dim: usize,
        kernel_scale: f64,
        sigma: f64,
        beta: f64,
        theta: f64,
        tau: f64,
    ) -> Result<Self, ModelError> {
        let p = ModelParams { n, dim, kernel_scale, sigma, beta, theta, tau };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: &str| Err(ModelError::InvalidParams(msg.to_string()));
        if self.n < 2 {
            return fail("need at least two agents");
        }
        if self.dim < 1 {
            return fail("dimension must be positive");
        }
        if !(self.kernel_scale > 0.0) {
            return fail("kernel scale K must be positive");
        }
        if !(self.sigma > 0.0) {
            return fail("sigma must be positive");
        }
        if !(self.beta >= 0.0) {
            return fail("beta must be nonnegative");
        }
        if !(self.theta > 0.0) {
            return fail("theta must be positive");
        }
        if !(self.tau > 0.0) {
            return fail("tau must be positive");
        }
        Ok(())
    }

    /// Kernel value at radius r (unchecked fast path; r must be >= 0).
    #[inline]
    pub(crate) fn a(&self, r: f64) -> f64 {
        self.kernel_scale * (self.sigma * self.sigma + r * r).powf(-self.beta)
    }

    /// a(0) = K / sigma^(2 beta).
    pub fn a0(&self) -> f64 {
        self.a(0.0)
    }
}

/// Interaction kernel a(r) = K / (sigma^2 + r^2)^beta.
pub fn kernel_a(r: f64, params: &ModelParams) -> Result<f64, ModelError> {
    if r < 0.0 {
        return Err(ModelError::NegativeRadius(r));
    }
    Ok(params.a(r))
}

/// Lipschitz constant of the kernel, L_a = max_{r>=0} |a'(r)|.
///
/// a'(r) = -2 beta K r / (sigma^2 + r^2)^(beta+1) attains its maximal modulus
/// at r* = sigma / sqrt(2 beta + 1); for beta = 0 the kernel is constant.
pub fn lipschitz_constant(params: &ModelParams) -> f64 {
    if params.beta == 0.0 {
        return 0.0;
    }
    let r_star = params.sigma / (2.0 * params.beta + 1.0).sqrt();
    let denom = (params.sigma * params.sigma + r_star * r_star).powf(params.beta + 1.0);
    2.0 * params.beta * params.kernel_scale * r_star / denom
}

/// State of N agents: main states x, consensus parameters v, the current time
/// and the accumulated mean-control drift (1/N) sum_i int u_i ds.
#[derive(Clone, Debug, PartialEq)]
pub struct FlockState {
    pub dim: usize,
    pub x: Vec<DVector<f64>>,
    pub v: Vec<DVector<f64>>,
    pub t: f64,
    pub vbar_drift: DVector<f64>,
}

impl FlockState {
    pub fn new(x: Vec<DVector<f64>>, v: Vec<DVector<f64>>) -> Result<Self, ModelError> {
        if x.is_empty() || x.len() != v.len() {
            return Err(ModelError::InvalidState(format!(
                "need equally many x and v vectors, got {} and {}",
                x.len(),
                v.len()
            )));
        }
        let dim = x[0].len();
        if dim == 0 {
            return Err(ModelError::InvalidState("zero-dimensional agents".into()));
        }
        for w in x.iter().chain(v.iter()) {
            if w.len() != dim {
                return Err(ModelError::InvalidState(format!(
                    "mixed dimensions: expected {dim}, got {}",
                    w.len()
                )));
            }
        }
        Ok(FlockState { dim, x, v, t: 0.0, vbar_drift: DVector::zeros(dim) })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    /// Mean consensus parameter (1/N) sum_i v_i.
    pub fn mean_v(&self) -> DVector<f64> {
        mean(&self.v)
    }

    /// Mean consensus parameter reconstructed from the initial mean plus the
    /// accumulated control drift; agrees with `mean_v` up to rounding because
    /// the alignment term conserves the mean and controls are integrated
    /// exactly over each sampling interval.
    pub fn reconstructed_mean_v(&self, initial_mean: &DVector<f64>) -> DVector<f64> {
        initial_mean + &self.vbar_drift
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.v.iter()).all(|w| w.iter().all(|c| c.is_finite()))
            && self.vbar_drift.iter().all(|c| c.is_finite())
    }
}

/// Mean-square disagreement of main states (X) and consensus parameters (V).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// X = B(x, x), spatial disagreement.
    pub x: f64,
    /// V = B(v, v), consensus-parameter disagreement.
    pub v: f64,
}

fn mean(vs: &[DVector<f64>]) -> DVector<f64> {
    let mut m = DVector::zeros(vs[0].len());
    for v in vs {
        m += v;
    }
    m / vs.len() as f64
}

/// Split each vector into the shared mean and its zero-sum remainder.
pub fn perp_decompose(vs: &[DVector<f64>]) -> (DVector<f64>, Vec<DVector<f64>>) {
    let m = mean(vs);
    let perps = vs.iter().map(|v| v - &m).collect();
    (m, perps)
}

fn mean_square_spread(vs: &[DVector<f64>]) -> f64 {
    let m = mean(vs);
    vs.iter().map(|v| (v - &m).norm_squared()).sum::<f64>() / vs.len() as f64
}

/// X and V evaluated through the perp-norm form of the bilinear form B,
/// B(u, u) = (1/N) sum_i ||u_i - mean||^2.
pub fn moments(state: &FlockState) -> Moments {
    Moments { x: mean_square_spread(&state.x), v: mean_square_spread(&state.v) }
}

/// X and V through the pairwise form B(u, u) = (1/2N^2) sum_ij ||u_i - u_j||^2.
///
/// Algebraically identical to [`moments`]; kept as the independent second
/// route for cross-checking.
pub fn moments_pairwise(state: &FlockState) -> Moments {
    let pair = |vs: &[DVector<f64>]| {
        let n = vs.len();
        let mut acc = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                acc += (&vs[i] - &vs[j]).norm_squared();
            }
        }
        acc / (n * n) as f64
    };
    Moments { x: pair(&state.x), v: pair(&state.v) }
}

/// Largest pairwise distance within a family of vectors.
pub fn max_pairwise_distance(vs: &[DVector<f64>]) -> f64 {
    let n = vs.len();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            best = best.max((&vs[i] - &vs[j]).norm());
        }
    }
    best
}

/// Evaluator for gamma(X0) = int_{sqrt(X0)}^inf a(sqrt(2N) r) dr.
///
/// Construction precomputes the full half-line integral of the kernel once;
/// each query then only integrates the smooth head [0, sqrt(2N X0)]. When the
/// query sits deep in the tail the difference loses precision, so the tail is
/// re-integrated directly through the finite mapping u = 1/(1+s). For
/// beta <= 1/2 the integral diverges and every query returns +infinity.
#[derive(Clone, Debug)]
pub struct GammaFn {
    params: ModelParams,
    scale: f64,
    total: f64,
}

const GAMMA_REL_TOL: f64 = 1e-9;
/// Inner tolerance for the cached half-line integral; tighter than the query
/// tolerance so that head-total cancellation keeps ~1e-9 relative accuracy.
const GAMMA_TOTAL_REL_TOL: f64 = 1e-13;

impl GammaFn {
    pub fn new(params: &ModelParams) -> Self {
        let scale = (2.0 * params.n as f64).sqrt();
        let total = if params.beta > 0.5 {
            let p = *params;
            quad::integrate_to_infinity(move |s| p.a(s), 0.0, GAMMA_TOTAL_REL_TOL)
        } else {
            f64::INFINITY
        };
        GammaFn { params: *params, scale, total }
    }

    /// gamma(X0); +infinity for beta <= 1/2.
    pub fn eval(&self, x0: f64) -> Result<f64, ModelError> {
        if x0 < 0.0 {
            return Err(ModelError::NegativeSpread(x0));
        }
        if self.params.beta <= 0.5 {
            return Ok(f64::INFINITY);
        }
        let s0 = (2.0 * self.params.n as f64 * x0).sqrt();
        if x0 == 0.0 {
            return Ok(self.total / self.scale);
        }
        let p = self.params;
        let head = quad::integrate(move |s| p.a(s), 0.0, s0, GAMMA_TOTAL_REL_TOL);
        let diff = self.total - head;
        if diff <= 0.02 * self.total {
            // deep tail: avoid cancellation by integrating it directly
            let p = self.params;
            let tail = quad::integrate_to_infinity(move |s| p.a(s), s0, GAMMA_REL_TOL);
            return Ok(tail / self.scale);
        }
        Ok(diff / self.scale)
    }

    /// gamma(X0)^2 with the +infinity convention preserved.
    pub fn eval_sq(&self, x0: f64) -> Result<f64, ModelError> {
        Ok(self.eval(x0)?.powi(2))
    }
}

/// One-shot gamma evaluation; prefer [`GammaFn`] in loops.
pub fn gamma_functional(x0: f64, params: &ModelParams) -> Result<f64, ModelError> {
    GammaFn::new(params).eval(x0)
}

/// V(t) - gamma(X(t))^2: nonpositive exactly when the state sits in the
/// consensus region. For beta <= 1/2 gamma is infinite and the margin is
/// -infinity (the region is the whole space).
pub fn consensus_margin(state: &FlockState, params: &ModelParams) -> f64 {
    let m = moments(state);
    let gamma = GammaFn::new(params);
    margin_from_moments(&m, &gamma)
}

/// Margin from precomputed moments and a reusable gamma evaluator.
pub fn margin_from_moments(m: &Moments, gamma: &GammaFn) -> f64 {
    let g = gamma.eval(m.x).expect("nonnegative spread from moments");
    if g.is_infinite() {
        f64::NEG_INFINITY
    } else {
        m.v - g * g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(beta: f64) -> ModelParams {
        ModelParams::new(2, 1, 1.0, 1.0, beta, 1.0, 0.1).unwrap()
    }

    #[test]
    fn params_invariants_enforced() {
        assert!(ModelParams::new(1, 1, 1.0, 1.0, 0.5, 1.0, 0.1).is_err());
        assert!(ModelParams::new(2, 0, 1.0, 1.0, 0.5, 1.0, 0.1).is_err());
        assert!(ModelParams::new(2, 1, 0.0, 1.0, 0.5, 1.0, 0.1).is_err());
        assert!(ModelParams::new(2, 1, 1.0, -1.0, 0.5, 1.0, 0.1).is_err());
        assert!(ModelParams::new(2, 1, 1.0, 1.0, -0.1, 1.0, 0.1).is_err());
        assert!(ModelParams::new(2, 1, 1.0, 1.0, 0.5, 0.0, 0.1).is_err());
        assert!(ModelParams::new(2, 1, 1.0, 1.0, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn kernel_reference_values() {
        assert_relative_eq!(kernel_a(0.0, &params(0.6)).unwrap(), 1.0);
        let p = ModelParams::new(2, 1, 2.0, 1.0, 1.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(kernel_a(0.0, &p).unwrap(), 2.0);
        assert_relative_eq!(kernel_a(3.0, &params(1.0)).unwrap(), 0.1);
        assert!(kernel_a(-0.5, &params(1.0)).is_err());
    }

    #[test]
    fn kernel_non_increasing_on_grid() {
        let p = params(0.7);
        let mut prev = f64::INFINITY;
        for i in 0..1000 {
            let r = i as f64 * 0.05;
            let a = kernel_a(r, &p).unwrap();
            assert!(a <= prev + 1e-15);
            assert!(a > 0.0);
            prev = a;
        }
    }

    /// Grid search oracle for max |a'| with a golden-section polish.
    fn lipschitz_grid_oracle(p: &ModelParams) -> f64 {
        let da = |r: f64| {
            2.0 * p.beta * p.kernel_scale * r
                / (p.sigma * p.sigma + r * r).powf(p.beta + 1.0)
        };
        let mut best_r = 0.0;
        let mut best = 0.0;
        for i in 0..200_000 {
            let r = i as f64 * (100.0 / 200_000.0);
            let v = da(r);
            if v > best {
                best = v;
                best_r = r;
            }
        }
        // golden-section refinement around the grid optimum
        let (mut lo, mut hi) = ((best_r - 0.01).max(0.0), best_r + 0.01);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if da(m1) < da(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        da(0.5 * (lo + hi))
    }

    #[test]
    fn lipschitz_constant_reference_values() {
        assert_eq!(lipschitz_constant(&params(0.0)), 0.0);
        let exact = 3.0 * 3f64.sqrt() / 8.0;
        assert_relative_eq!(lipschitz_constant(&params(1.0)), exact, max_relative = 1e-12);
        assert_relative_eq!(
            lipschitz_constant(&params(1.0)),
            lipschitz_grid_oracle(&params(1.0)),
            max_relative = 1e-8
        );
        assert_relative_eq!(
            lipschitz_constant(&params(0.6)),
            lipschitz_grid_oracle(&params(0.6)),
            max_relative = 1e-8
        );
    }

    #[test]
    fn lipschitz_matches_grid_oracle_for_random_params() {
        use rand::Rng;
        let mut rng = crate::rng::substream(5, 0);
        for _ in 0..20 {
            let p = ModelParams::new(
                2,
                1,
                rng.gen_range(0.2..5.0),
                rng.gen_range(0.3..3.0),
                rng.gen_range(0.05..2.0),
                1.0,
                0.1,
            )
            .unwrap();
            let exact = lipschitz_constant(&p);
            let grid = lipschitz_grid_oracle(&p);
            assert!(
                (exact - grid).abs() <= 1e-6 * exact.max(1.0),
                "exact {exact} grid {grid} for {p:?}"
            );
        }
    }

    #[test]
    fn moments_reference_values() {
        let c = DVector::from_vec(vec![1.0, 2.0]);
        let state =
            FlockState::new(vec![c.clone(); 3], vec![c.clone(), c.clone(), c]).unwrap();
        let m = moments(&state);
        assert_eq!(m.x, 0.0);

        let v1 = DVector::from_vec(vec![1.0, 0.0]);
        let v2 = DVector::from_vec(vec![-1.0, 0.0]);
        let state = FlockState::new(
            vec![DVector::zeros(2), DVector::zeros(2)],
            vec![v1, v2],
        )
        .unwrap();
        assert_relative_eq!(moments(&state).v, 1.0);
        assert_relative_eq!(moments_pairwise(&state).v, 1.0);
    }

    #[test]
    fn perp_decompose_examples() {
        let c = DVector::from_vec(vec![2.0, -1.0]);
        let (m, p) = perp_decompose(&[c.clone(), c.clone(), c.clone()]);
        assert_eq!(m, c);
        assert!(p.iter().all(|w| w.norm() == 0.0));

        let (m, p) = perp_decompose(&[
            DVector::from_vec(vec![3.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
        ]);
        assert_eq!(m, DVector::from_vec(vec![2.0, 0.0]));
        assert_eq!(p[0], DVector::from_vec(vec![1.0, 0.0]));
        assert_eq!(p[1], DVector::from_vec(vec![-1.0, 0.0]));

        let mut rng = crate::rng::substream(3, 0);
        let vs: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(3, |_, _| crate::rng::standard_normal(&mut rng)))
            .collect();
        let (_, perps) = perp_decompose(&vs);
        let mut s = DVector::zeros(3);
        for p in &perps {
            s += p;
        }
        assert!(s.norm() < 1e-12);
    }

    #[test]
    fn gamma_closed_form_beta_one() {
        // gamma(X0) = K/(sigma sqrt(2N)) (pi/2 - arctan(sqrt(2N X0)/sigma))
        let p = ModelParams::new(2, 1, 1.0, 1.0, 1.0, 1.0, 0.1).unwrap();
        let g = GammaFn::new(&p);
        for x0 in [0.0f64, 1.0, 10.0] {
            let s = (2.0 * p.n as f64).sqrt();
            let exact = (std::f64::consts::FRAC_PI_2 - (s * x0.sqrt()).atan()) / s;
            assert_relative_eq!(g.eval(x0).unwrap(), exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn gamma_deep_tail_stays_accurate() {
        let p = ModelParams::new(9, 1, 1.0, 1.0, 1.0, 1.0, 0.1).unwrap();
        let g = GammaFn::new(&p);
        let s = (2.0 * p.n as f64).sqrt();
        for x0 in [1e4, 1e8, 1e12] {
            let exact = (std::f64::consts::FRAC_PI_2 - (s * (x0 as f64).sqrt()).atan()) / s;
            assert_relative_eq!(g.eval(x0).unwrap(), exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn gamma_divergent_below_half() {
        let p = ModelParams::new(2, 1, 1.0, 1.0, 0.4, 1.0, 0.1).unwrap();
        assert!(gamma_functional(5.0, &p).unwrap().is_infinite());
        assert!(gamma_functional(0.0, &p).unwrap().is_infinite());
    }

    #[test]
    fn gamma_monotone_in_x0_and_kernel_scale() {
        let p = params(0.8);
        let g = GammaFn::new(&p);
        let g100 = g.eval(100.0).unwrap();
        let g1 = g.eval(1.0).unwrap();
        let g0 = g.eval(0.0).unwrap();
        assert!(g100 < g1 && g1 < g0);

        let mut prev = 0.0;
        for k in [0.5, 1.0, 2.0, 4.0] {
            let p = ModelParams::new(2, 1, k, 1.0, 0.8, 1.0, 0.1).unwrap();
            let val = gamma_functional(2.0, &p).unwrap();
            assert!(val > prev);
            prev = val;
        }

        let mut prev = f64::INFINITY;
        for x0 in [0.0, 0.5, 1.0, 2.0, 5.0, 20.0, 80.0] {
            let val = g.eval(x0).unwrap();
            assert!(val <= prev);
            prev = val;
        }
    }

    #[test]
    fn gamma_rejects_negative_spread() {
        assert!(gamma_functional(-1.0, &params(0.9)).is_err());
    }

    #[test]
    fn margin_conventions() {
        let v1 = DVector::from_vec(vec![0.0, 0.0]);
        let state = FlockState::new(
            vec![DVector::zeros(2), DVector::from_vec(vec![1.0, 0.0])],
            vec![v1.clone(), v1],
        )
        .unwrap();
        // V = 0: margin is nonpositive for any finite gamma
        assert!(consensus_margin(&state, &params(1.0)) <= 0.0);
        // beta <= 1/2: margin is -infinity by convention
        assert_eq!(consensus_margin(&state, &params(0.4)), f64::NEG_INFINITY);
    }
}
