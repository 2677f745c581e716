//! Johnson-Lindenstrauss projection matrices: generation (Gaussian, scaled
//! Bernoulli, scaled random projection), weak/strong property verification,
//! sample-count and target-dimension estimators, and the exactness-at-zero
//! diagnostic.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::{perp_decompose, FlockState, ModelParams};
use crate::rng::{standard_normal, substream, MATRIX_ROW_BASE, STREAM_POWER_ITERATION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// i.i.d. entries N(0, 1/k).
    Gaussian,
    /// i.i.d. entries +-1/sqrt(k).
    Bernoulli,
    /// sqrt(d/k) times a random k-dimensional orthogonal projection.
    ScaledProjection,
    /// Restriction to the first k canonical coordinates (identity when k = d).
    /// Used as the deterministic control case; not a random family.
    Identity,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
            Family::ScaledProjection => "scaled_projection",
            Family::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s {
            "gaussian" => Some(Family::Gaussian),
            "bernoulli" => Some(Family::Bernoulli),
            "scaled_projection" => Some(Family::ScaledProjection),
            "identity" => Some(Family::Identity),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum JlError {
    BadDimensions { k: usize, d: usize },
    DimensionMismatch { expected: usize, got: usize },
    Io(String),
    Parse(String),
}

impl std::fmt::Display for JlError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            JlError::BadDimensions { k, d } => {
                write!(f, "need 1 <= k <= d, got k = {k}, d = {d}")
            }
            JlError::DimensionMismatch { expected, got } => {
                write!(f, "point dimension mismatch: expected {expected}, got {got}")
            }
            JlError::Io(msg) => write!(f, "matrix io: {msg}"),
            JlError::Parse(msg) => write!(f, "matrix parse: {msg}"),
        }
    }
}

impl std::error::Error for JlError {}

/// A k x d projection matrix with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix {
    pub k: usize,
    pub d: usize,
    pub entries: DMatrix<f64>,
    pub family: Family,
    pub seed: u64,
}

/// Generate a projection matrix; deterministic in (family, k, d, seed).
/// Row r draws from its own substream of the seed.
pub fn generate(family: Family, k: usize, d: usize, seed: u64) -> Result<ProjectionMatrix, JlError> {
    if k < 1 || k > d {
        return Err(JlError::BadDimensions { k, d });
    }
    let entries = match family {
        Family::Gaussian => {
            let scale = 1.0 / (k as f64).sqrt();
            from_rows(k, d, |rng| standard_normal(rng) * scale, seed)
        }
        Family::Bernoulli => {
            let scale = 1.0 / (k as f64).sqrt();
            from_rows(
                k,
                d,
                |rng| {
                    use rand::Rng;
                    if rng.gen::<bool>() {
                        scale
                    } else {
                        -scale
                    }
                },
                seed,
            )
        }
        Family::ScaledProjection => scaled_projection(k, d, seed),
        Family::Identity => coordinate_restriction(k, d),
    };
    Ok(ProjectionMatrix { k, d, entries, family, seed })
}

fn from_rows<F: FnMut(&mut rand_chacha::ChaCha8Rng) -> f64>(
    k: usize,
    d: usize,
    mut draw: F,
    seed: u64,
) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k, d);
    for r in 0..k {
        let mut rng = substream(seed, MATRIX_ROW_BASE + r as u64);
        for c in 0..d {
            m[(r, c)] = draw(&mut rng);
        }
    }
    m
}

fn coordinate_restriction(k: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(k, d, |r, c| if r == c { 1.0 } else { 0.0 })
}

/// sqrt(d/k) times the transpose of the thin Q factor of a Gaussian d x k
/// seed matrix; rows are re-orthogonalized if the QR output drifts.
fn scaled_projection(k: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let gaussian = from_rows(k, d, |rng| standard_normal(rng), seed);
    let qr = gaussian.transpose().qr();
    let mut rows = qr.q().transpose();
    if orthonormality_defect(&rows) > 1e-10 {
        gram_schmidt_rows(&mut rows);
    }
    rows * (d as f64 / k as f64).sqrt()
}

fn orthonormality_defect(rows: &DMatrix<f64>) -> f64 {
    let g = rows * rows.transpose();
    let k = rows.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

fn gram_schmidt_rows(rows: &mut DMatrix<f64>) {
    let k = rows.nrows();
    for i in 0..k {
        for j in 0..i {
            let proj = rows.row(i).dot(&rows.row(j));
            let prev = rows.row(j).into_owned();
            let mut row = rows.row_mut(i);
            row -= prev * proj;
        }
        let norm = rows.row(i).norm();
        let mut row = rows.row_mut(i);
        row /= norm;
    }
}

impl ProjectionMatrix {
    /// The identity map on R^d (the k = d control case).
    pub fn identity(d: usize) -> Self {
        generate(Family::Identity, d, d, 0).expect("identity dims")
    }

    /// Restriction to the first k coordinates (an unscaled partial isometry).
    pub fn coordinate_restriction(k: usize, d: usize) -> Result<Self, JlError> {
        generate(Family::Identity, k, d, 0)
    }

    /// Wrap explicit entries (for externally constructed matrices).
    pub fn from_entries(entries: DMatrix<f64>, family: Family, seed: u64) -> Self {
        ProjectionMatrix { k: entries.nrows(), d: entries.ncols(), entries, family, seed }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.entries * x
    }

    /// Project a d-dimensional state to (Mx, Mv) in R^k.
    pub fn project_state(&self, state: &FlockState) -> Result<FlockState, JlError> {
        if state.dim != self.d {
            return Err(JlError::DimensionMismatch { expected: self.d, got: state.dim });
        }
        let mut low = FlockState::new(
            state.x.iter().map(|x| self.apply(x)).collect(),
            state.v.iter().map(|v| self.apply(v)).collect(),
        )
        .expect("projected state is well formed");
        low.t = state.t;
        low.vbar_drift = self.apply(&state.vbar_drift);
        Ok(low)
    }

    /// Operator norm by power iteration on M^T M to relative 1e-6 (at least
    /// 20 iterations); falls back to the a.s. bound sqrt(d) if the iteration
    /// fails to converge.
    pub fn operator_norm(&self) -> f64 {
        let mut rng = substream(self.seed, STREAM_POWER_ITERATION);
        let mut v = DVector::from_fn(self.d, |_, _| standard_normal(&mut rng));
        if v.norm() == 0.0 {
            v[0] = 1.0;
        }
        v /= v.norm();
        let mut sigma = 0.0;
        for it in 0..1000 {
            let w = &self.entries * &v;
            let new_sigma = w.norm();
            if new_sigma == 0.0 {
                return 0.0;
            }
            let z = self.entries.tr_mul(&w);
            v = &z / z.norm();
            if it >= 20 && (new_sigma - sigma).abs() <= 1e-6 * new_sigma {
                return new_sigma;
            }
            sigma = new_sigma;
        }
        (self.d as f64).sqrt()
    }
}

/// Classification of a point cloud under the weak JL property.
#[derive(Clone, Copy, Debug, Default)]
pub struct DistortionReport {
    /// max over points of ||Mx||/||x|| - 1 (points with ||x|| > 0).
    pub max_expand: f64,
    /// max over points with ||x|| > delta of 1 - ||Mx||/||x||.
    pub max_shrink: f64,
    /// Points satisfying neither the quasi-isometry nor the small-norm clause.
    pub weak_violations: usize,
    /// Points handled only by the small-norm clause.
    pub delta_bucket: usize,
    pub n_points: usize,
    pub eps: f64,
    pub delta: f64,
}

impl DistortionReport {
    /// Strong property: every point passes the quasi-isometry clause.
    pub fn strong_holds(&self) -> bool {
        self.weak_violations == 0
            && self.delta_bucket == 0
            && self.max_expand.max(self.max_shrink) <= self.eps
    }

    pub fn weak_holds(&self) -> bool {
        self.weak_violations == 0
    }
}

/// Check the weak JL property of parameters (eps, delta) at every point.
/// With delta = 0 this is exactly the strong property check.
pub fn check_weak_jl(
    m: &ProjectionMatrix,
    points: &[DVector<f64>],
    eps: f64,
    delta: f64,
) -> Result<DistortionReport, JlError> {
    let mut report = DistortionReport {
        n_points: points.len(),
        eps,
        delta,
        ..DistortionReport::default()
    };
    for p in points {
        if p.len() != m.d {
            return Err(JlError::DimensionMismatch { expected: m.d, got: p.len() });
        }
        let norm = p.norm();
        let image = m.apply(p).norm();
        if norm == 0.0 {
            // 0 <= ||M 0|| = 0 <= 0: satisfies the quasi-isometry clause
            continue;
        }
        let ratio = image / norm;
        report.max_expand = report.max_expand.max(ratio - 1.0);
        if norm > delta {
            report.max_shrink = report.max_shrink.max(1.0 - ratio);
        }
        let quasi = (1.0 - eps) * norm <= image && image <= (1.0 + eps) * norm;
        if quasi {
            continue;
        }
        if norm <= delta && image <= delta {
            report.delta_bucket += 1;
        } else {
            report.weak_violations += 1;
        }
    }
    Ok(report)
}

/// Sample count guaranteeing the weak property along a Lipschitz curve over a
/// unit time interval: ceil(4 L (sqrt(d) + 2) / (delta eps)).
pub fn curve_sample_count(l_phi: f64, d: usize, delta: f64, eps: f64) -> u64 {
    let raw = 4.0 * l_phi * ((d as f64).sqrt() + 2.0) / (delta * eps);
    raw.ceil() as u64
}

/// Worst-case point counts and the implied JL target dimension, in log space.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DimensionEstimate {
    /// ln of the trajectory-sampling count N1.
    pub ln_n1: f64,
    /// ln of the per-switching-time count N2 = N^(floor(T/tau)+3).
    pub ln_n2: f64,
    /// ln of N3 = 2N.
    pub ln_n3: f64,
    pub ln_total: f64,
    /// k0 = ceil(eps^-2 ln(N_total)) with proportionality constant 1.
    pub k0: f64,
    /// The assumed proportionality constant in k ~ eps^-2 log(N).
    pub jl_constant: f64,
    /// Branching exponent floor(T/tau) + 1.
    pub path_exponent: u64,
    pub eps: f64,
    pub delta: f64,
    pub v0: f64,
    pub x0: f64,
}

impl DimensionEstimate {
    pub fn log10_total(&self) -> f64 {
        self.ln_total / std::f64::consts::LN_10
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Count the sampling points needed for the three JL hypotheses over every
/// realizable controlled trajectory, and the implied target dimension.
///
/// All arithmetic is carried out on logarithms: the path count alone is
/// N^(floor(T/tau)+1) and overflows f64 for realistic sampling rates.
pub fn dimension_estimate(
    params: &ModelParams,
    horizon: f64,
    eps: f64,
    delta: f64,
    v0: f64,
    x0: f64,
) -> DimensionEstimate {
    let n = params.n as f64;
    // grid-rounding guard as elsewhere: 115.17/0.01 must count as 11517
    let steps = ((horizon / params.tau) + 1e-9).floor();
    let ln_n = n.ln();
    let ln_paths = (steps + 1.0) * ln_n;
    let l_x = (2.0 * n * v0).sqrt();
    let pairs = n * (n - 1.0) / 2.0;
    let ln_n1 = ln_paths
        + (horizon + params.tau).ln()
        + pairs.ln()
        + (4.0 * l_x * ((params.dim as f64).sqrt() + 2.0)).ln()
        - (delta * eps).ln();
    let ln_n2 = (steps + 3.0) * ln_n;
    let ln_n3 = (2.0 * n).ln();
    let ln_total = log_sum_exp(&[ln_n1, ln_n2, ln_n3]);
    DimensionEstimate {
        ln_n1,
        ln_n2,
        ln_n3,
        ln_total,
        k0: (ln_total / (eps * eps)).ceil(),
        jl_constant: 1.0,
        path_exponent: (steps + 1.0) as u64,
        eps,
        delta,
        v0,
        x0,
    }
}

/// E_M = |1 - V(0)/W(0)|: how faithfully M preserves the initial
/// consensus-parameter spread. Depends only on perp components. A vanishing
/// denominator with nonvanishing numerator reports +infinity; the
/// all-consensus case (0/0) reports 0.
pub fn exactness_at_zero(m: &ProjectionMatrix, v0: &[DVector<f64>]) -> Result<f64, JlError> {
    for v in v0 {
        if v.len() != m.d {
            return Err(JlError::DimensionMismatch { expected: m.d, got: v.len() });
        }
    }
    let (_, perps) = perp_decompose(v0);
    let high: f64 = perps.iter().map(|p| p.norm_squared()).sum();
    let low: f64 = perps.iter().map(|p| m.apply(p).norm_squared()).sum();
    if low == 0.0 {
        return Ok(if high == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((1.0 - high / low).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LemmaBranch {
    /// sqrt(B) >= 2 Delta: the projected cloud is informative.
    LargeB,
    /// sqrt(B) <= 2 Delta: the original cloud is small.
    SmallB,
}

/// Outcome of checking the norm-comparison lemma on one instance.
#[derive(Clone, Debug)]
pub struct LemmaVerdict {
    pub branch: LemmaBranch,
    pub hypothesis_ok: bool,
    pub hypothesis_failure: Option<String>,
    pub conclusion_ok: bool,
    pub conclusion_failure: Option<String>,
    pub max_index: usize,
    pub mean_square_a: f64,
    pub mean_square_b: f64,
}

/// Check the mean-square norm comparison lemma (constants c = 1/sqrt(289),
/// C = sqrt(72)) on explicit data.
///
/// Hypotheses: M has the weak JL property with eps = 1/2, delta = Delta at
/// every a_i, and ||M a_i - b_i|| <= Delta. Conclusions: with
/// i^ = argmax ||b_i|| (smallest index), A and B the mean squares,
/// if sqrt(B) >= 2 Delta then ||a_i^|| >= ||b_i^||/4, ||a_i^|| >= sqrt(A)/17
/// and B <= 16 N A; if sqrt(B) <= 2 Delta then sqrt(A) <= sqrt(72) Delta.
/// A hypothesis violation is reported separately from a conclusion violation.
pub fn technical_lemma_check(
    a_list: &[DVector<f64>],
    b_list: &[DVector<f64>],
    m: &ProjectionMatrix,
    delta: f64,
) -> Result<LemmaVerdict, JlError> {
    assert!(delta > 0.0, "Delta must be positive");
    assert_eq!(a_list.len(), b_list.len(), "need matching point counts");
    let n = a_list.len();
    let mut hypothesis_failure = None;
    for (i, a) in a_list.iter().enumerate() {
        if a.len() != m.d {
            return Err(JlError::DimensionMismatch { expected: m.d, got: a.len() });
        }
        let norm = a.norm();
        let image = m.apply(a).norm();
        let quasi = 0.5 * norm <= image && image <= 1.5 * norm;
        let small = norm <= delta && image <= delta;
        if !(quasi || small) {
            hypothesis_failure =
                Some(format!("weak JL (eps = 1/2, delta = {delta}) fails at a_{i}"));
            break;
        }
        if (m.apply(a) - &b_list[i]).norm() > delta {
            hypothesis_failure = Some(format!("||M a_{i} - b_{i}|| > Delta"));
            break;
        }
    }

    let mut max_index = 0;
    for (i, b) in b_list.iter().enumerate() {
        if b.norm() > b_list[max_index].norm() {
            max_index = i;
        }
    }
    let mean_sq = |vs: &[DVector<f64>]| vs.iter().map(|v| v.norm_squared()).sum::<f64>() / n as f64;
    let a_ms = mean_sq(a_list);
    let b_ms = mean_sq(b_list);
    let a_hat = a_list[max_index].norm();
    let b_hat = b_list[max_index].norm();

    // closed inequalities; absorb only rounding noise
    let slack = 1e-12;
    let (branch, conclusion_failure): (LemmaBranch, Option<String>) = if b_ms.sqrt() >= 2.0 * delta
    {
        let f = if a_hat + slack * b_hat < b_hat / 4.0 {
            Some(format!("||a^|| = {a_hat} < ||b^||/4 = {}", b_hat / 4.0))
        } else if a_hat + slack * a_ms.sqrt() < a_ms.sqrt() / 17.0 {
            Some(format!("||a^|| = {a_hat} < sqrt(A)/17 = {}", a_ms.sqrt() / 17.0))
        } else if b_ms > 16.0 * n as f64 * a_ms * (1.0 + slack) {
            Some(format!("B = {b_ms} > 16 N A = {}", 16.0 * n as f64 * a_ms))
        } else {
            None
        };
        (LemmaBranch::LargeB, f)
    } else {
        let bound = 72f64.sqrt() * delta;
        let f = if a_ms.sqrt() > bound * (1.0 + slack) {
            Some(format!("sqrt(A) = {} > sqrt(72) Delta = {bound}", a_ms.sqrt()))
        } else {
            None
        };
        (LemmaBranch::SmallB, f)
    };

    Ok(LemmaVerdict {
        branch,
        hypothesis_ok: hypothesis_failure.is_none(),
        hypothesis_failure,
        conclusion_ok: conclusion_failure.is_none(),
        conclusion_failure,
        max_index,
        mean_square_a: a_ms,
        mean_square_b: b_ms,
    })
}

/// Write a matrix as a text grid: header `family k d seed`, then k rows of d
/// entries with full round-trip precision.
pub fn save_matrix(m: &ProjectionMatrix, path: &std::path::Path) -> Result<(), JlError> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| JlError::Io(e.to_string()))?;
    let mut w = std::io::BufWriter::new(file);
    let emit = |w: &mut dyn Write| -> std::io::Result<()> {
        writeln!(w, "{} {} {} {}", m.family.label(), m.k, m.d, m.seed)?;
        for r in 0..m.k {
            let row: Vec<String> = (0..m.d).map(|c| format!("{:.16e}", m.entries[(r, c)])).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    };
    emit(&mut w).map_err(|e| JlError::Io(e.to_string()))
}

pub fn load_matrix(path: &std::path::Path) -> Result<ProjectionMatrix, JlError> {
    let text = std::fs::read_to_string(path).map_err(|e| JlError::Io(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| JlError::Parse("empty matrix file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(JlError::Parse(format!("bad header: {header}")));
    }
    let family =
        Family::parse(fields[0]).ok_or_else(|| JlError::Parse(format!("bad family {}", fields[0])))?;
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| JlError::Parse(e.to_string()));
    let k = parse_usize(fields[1])?;
    let d = parse_usize(fields[2])?;
    let seed = fields[3].parse::<u64>().map_err(|e| JlError::Parse(e.to_string()))?;
    let mut entries = DMatrix::zeros(k, d);
    for r in 0..k {
        let line = lines.next().ok_or_else(|| JlError::Parse(format!("missing row {r}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        if vals.len() != d {
            return Err(JlError::Parse(format!("row {r} has {} entries, want {d}", vals.len())));
        }
        for (c, v) in vals.iter().enumerate() {
            entries[(r, c)] = v.parse::<f64>().map_err(|e| JlError::Parse(e.to_string()))?;
        }
    }
    Ok(ProjectionMatrix { k, d, entries, family, seed })
}
