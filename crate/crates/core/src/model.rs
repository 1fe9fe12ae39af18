//! Domain types and pointwise evaluation of the covariate-driven multivariate
//! Hawkes intensity
//!
//! ```text
//! λᵢ(t) = αᵢ·exp(Xᵢ(t)ᵀβ) + Σⱼ Cᵢⱼ Σ_{t_j^(k) < t} g(t − t_j^(k); γ),
//! g(u; γ) = exp(−γu)·1(u ≤ A).
//! ```
//!
//! Node and segment indices are zero-based throughout the crate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};

/// Tail mass `exp(−γA)` dropped by the default kernel truncation.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

/// Exponential excitation kernel truncated at a support horizon `A`.
///
/// `horizon` may be `f64::INFINITY` for the untruncated kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct KernelSpec {
    gamma: f64,
    horizon: f64,
}

#[derive(Serialize, Deserialize)]
struct KernelRepr {
    gamma: f64,
    /// `null` encodes an untruncated kernel.
    horizon: Option<f64>,
}

impl TryFrom<KernelRepr> for KernelSpec {
    type Error = Error;
    fn try_from(r: KernelRepr) -> Result<Self> {
        KernelSpec::new(r.gamma, r.horizon.unwrap_or(f64::INFINITY))
    }
}

impl From<KernelSpec> for KernelRepr {
    fn from(k: KernelSpec) -> Self {
        KernelRepr {
            gamma: k.gamma,
            horizon: k.horizon.is_finite().then_some(k.horizon),
        }
    }
}

impl KernelSpec {
    pub fn new(gamma: f64, horizon: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("kernel decay gamma must be positive, got {gamma}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::Domain(format!("kernel horizon must be positive, got {horizon}")));
        }
        Ok(Self { gamma, horizon })
    }

    pub fn untruncated(gamma: f64) -> Result<Self> {
        Self::new(gamma, f64::INFINITY)
    }

    /// Truncate where the dropped tail mass `exp(−γA)` equals `tol`.
    pub fn with_tail_tolerance(gamma: f64, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::Domain(format!("tail tolerance must lie in (0,1), got {tol}")));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Domain(format!("kernel decay gamma must be positive, got {gamma}")));
        }
        Self::new(gamma, -tol.ln() / gamma)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_truncated(&self) -> bool {
        self.horizon.is_finite()
    }

    /// `g(u) = exp(−γu)` for `0 ≤ u ≤ A`, zero beyond the horizon.
    pub fn eval(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("kernel evaluated at negative lag {u}")));
        }
        Ok(if u <= self.horizon { (-self.gamma * u).exp() } else { 0.0 })
    }

    /// `∫₀^A g(t) dt = (1 − exp(−γA))/γ`.
    pub fn mass(&self) -> f64 {
        -(-self.gamma * self.horizon).exp_m1() / self.gamma
    }

    /// Mass `exp(−γA)` dropped relative to the untruncated kernel.
    pub fn tail_mass(&self) -> f64 {
        (-self.gamma * self.horizon).exp()
    }
}

/// How the kernel support is chosen when γ varies during estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Infinite,
    Fixed(f64),
    TailTolerance(f64),
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon::TailTolerance(DEFAULT_TAIL_TOLERANCE)
    }
}

impl Horizon {
    pub fn kernel(&self, gamma: f64) -> Result<KernelSpec> {
        match *self {
            Horizon::Infinite => KernelSpec::untruncated(gamma),
            Horizon::Fixed(a) => KernelSpec::new(gamma, a),
            Horizon::TailTolerance(tol) => KernelSpec::with_tail_tolerance(gamma, tol),
        }
    }
}

/// `ν₀(x; β) = exp(xᵀβ)`.
pub fn baseline_eval(x: &[f64], beta: &[f64]) -> Result<f64> {
    dim_check("covariate/beta length", beta.len(), x.len())?;
    Ok(dot(x, beta).exp())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Global parameters θ = (β, γ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta: Vec<f64>,
    pub gamma: f64,
}

impl Theta {
    pub fn new(beta: Vec<f64>, gamma: f64) -> Self {
        Self { beta, gamma }
    }

    pub fn dim(&self) -> usize {
        self.beta.len() + 1
    }

    /// Flat view `(β₁, …, β_p, γ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.beta.clone();
        v.push(self.gamma);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let (beta, gamma) = v.split_at(v.len() - 1);
        Self { beta: beta.to_vec(), gamma: gamma[0] }
    }
}

/// Full parameter set (C, α, β, γ) together with the kernel truncation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HawkesParams {
    #[serde(with = "crate::serde_matrix")]
    pub c: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub kernel: KernelSpec,
}

impl HawkesParams {
    pub fn new(c: DMatrix<f64>, alpha: Vec<f64>, beta: Vec<f64>, kernel: KernelSpec) -> Result<Self> {
        if !c.is_square() {
            return Err(Error::Dimension(format!("C must be square, got {}x{}", c.nrows(), c.ncols())));
        }
        dim_check("alpha length", c.nrows(), alpha.len())?;
        if beta.is_empty() {
            return Err(Error::Dimension("beta must have at least one coordinate".into()));
        }
        Ok(Self { c, alpha, beta, kernel })
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    pub fn p(&self) -> usize {
        self.beta.len()
    }

    pub fn gamma(&self) -> f64 {
        self.kernel.gamma()
    }

    pub fn theta(&self) -> Theta {
        Theta::new(self.beta.clone(), self.gamma())
    }

    /// `a₀ = maxᵢ ‖C_{i·}‖₁ · ∫₀^A g`.
    pub fn branching_factor(&self) -> f64 {
        let mass = self.kernel.mass();
        (0..self.n())
            .map(|i| self.c.row(i).iter().map(|v| v.abs()).sum::<f64>() * mass)
            .fold(0.0, f64::max)
    }
}

/// Outcome of [`validate_params`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamsVerdict {
    pub valid: bool,
    pub branching_factor: f64,
    pub kernel_tail_mass: f64,
    pub failures: Vec<String>,
}

/// Membership test for the stable parameter space: non-negative C and α and
/// `a₀ < 1 − margin`.
pub fn validate_params_with_margin(params: &HawkesParams, margin: f64) -> ParamsVerdict {
    let mut failures = Vec::new();
    let n = params.n();
    for i in 0..n {
        for j in 0..n {
            let v = params.c[(i, j)];
            if !v.is_finite() || v < 0.0 {
                failures.push(format!("C[{i},{j}] = {v} is not a finite non-negative number"));
            }
        }
        let a = params.alpha[i];
        if !a.is_finite() || a < 0.0 {
            failures.push(format!("alpha[{i}] = {a} is not a finite non-negative number"));
        }
    }
    for (k, b) in params.beta.iter().enumerate() {
        if !b.is_finite() {
            failures.push(format!("beta[{k}] = {b} is not finite"));
        }
    }
    let a0 = params.branching_factor();
    if !(a0 < 1.0 - margin) {
        failures.push(format!("branching factor {a0} is not below {}", 1.0 - margin));
    }
    ParamsVerdict {
        valid: failures.is_empty(),
        branching_factor: a0,
        kernel_tail_mass: params.kernel.tail_mass(),
        failures,
    }
}

pub fn validate_params(params: &HawkesParams) -> ParamsVerdict {
    validate_params_with_margin(params, 0.0)
}

/// Realized multivariate point pattern on `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    horizon: f64,
    times: Vec<Vec<f64>>,
}

impl EventLog {
    pub fn new(horizon: f64, times: Vec<Vec<f64>>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("observation horizon must be positive, got {horizon}")));
        }
        for (i, node) in times.iter().enumerate() {
            for (k, &t) in node.iter().enumerate() {
                if !(0.0..=horizon).contains(&t) {
                    return Err(Error::InvalidInput(format!(
                        "event {k} of node {i} at {t} lies outside [0, {horizon}]"
                    )));
                }
                if k > 0 && t <= node[k - 1] {
                    return Err(Error::InvalidInput(format!(
                        "event times of node {i} are not strictly increasing at index {k}"
                    )));
                }
            }
        }
        Ok(Self { horizon, times })
    }

    pub fn empty(n: usize, horizon: f64) -> Result<Self> {
        Self::new(horizon, vec![Vec::new(); n])
    }

    pub fn n(&self) -> usize {
        self.times.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.times[i]
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.times
    }

    pub fn counts(&self) -> Vec<usize> {
        self.times.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.times.iter().map(Vec::len).sum()
    }

    /// Events in `[0, s]`, keeping the horizon at `s`.
    pub fn truncate(&self, s: f64) -> Result<Self> {
        let times = self
            .times
            .iter()
            .map(|v| v.iter().copied().take_while(|&t| t <= s).collect())
            .collect();
        Self::new(s, times)
    }
}

/// Piecewise-constant covariate paths on a shared segment grid. The value on
/// `[s_{r}, s_{r+1})` is the one stored for segment `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovariateField {
    boundaries: Vec<f64>,
    n: usize,
    p: usize,
    /// Layout `[node][segment][coordinate]`.
    values: Vec<f64>,
}

impl CovariateField {
    pub fn new(boundaries: Vec<f64>, n: usize, p: usize, values: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidInput("covariate grid needs at least one segment".into()));
        }
        if boundaries[0] != 0.0 {
            return Err(Error::InvalidInput(format!(
                "covariate grid must start at 0, starts at {}",
                boundaries[0]
            )));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) || !boundaries.iter().all(|b| b.is_finite()) {
            return Err(Error::InvalidInput("covariate segment boundaries must be strictly increasing".into()));
        }
        if p == 0 {
            return Err(Error::Dimension("covariate dimension must be at least 1".into()));
        }
        let r = boundaries.len() - 1;
        dim_check("covariate value count", n * r * p, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("covariate values must be finite".into()));
        }
        Ok(Self { boundaries, n, p, values })
    }

    /// Same path for every node; `path[r]` holds the p values on segment r.
    pub fn shared(boundaries: Vec<f64>, n: usize, path: &[Vec<f64>]) -> Result<Self> {
        let p = path.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * path.len() * p);
        for _ in 0..n {
            for seg in path {
                dim_check("covariate segment width", p, seg.len())?;
                values.extend_from_slice(seg);
            }
        }
        Self::new(boundaries, n, p, values)
    }

    /// Identically zero covariates, so that `ν₀ ≡ 1` for every β.
    pub fn zeros(n: usize, p: usize, horizon: f64) -> Result<Self> {
        Self::new(vec![0.0, horizon], n, p, vec![0.0; n * p])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn n_segments(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn horizon(&self) -> f64 {
        *self.boundaries.last().unwrap()
    }

    pub fn value(&self, node: usize, seg: usize) -> &[f64] {
        let start = (node * self.n_segments() + seg) * self.p;
        &self.values[start..start + self.p]
    }

    /// Left-closed segment lookup; the right end `T` maps to the last segment.
    pub fn segment_of(&self, t: f64) -> usize {
        let r = self.n_segments();
        let idx = self.boundaries.partition_point(|&b| b <= t);
        idx.clamp(1, r) - 1
    }

    pub fn at(&self, node: usize, t: f64) -> &[f64] {
        self.value(node, self.segment_of(t))
    }
}

/// Pointwise intensity `λ(t)` using events strictly before `t`.
pub fn intensity(params: &HawkesParams, events: &EventLog, covariates: &CovariateField, t: f64) -> Result<Vec<f64>> {
    let n = params.n();
    dim_check("event log node count", n, events.n())?;
    dim_check("covariate node count", n, covariates.n())?;
    dim_check("covariate dimension", params.p(), covariates.dim())?;
    if !(0.0..=events.horizon()).contains(&t) {
        return Err(Error::Domain(format!("time {t} outside [0, {}]", events.horizon())));
    }
    let mut excitation = vec![0.0; n];
    for (j, w) in excitation.iter_mut().enumerate() {
        let node = events.node(j);
        let before = node.partition_point(|&s| s < t);
        for &s in &node[..before] {
            *w += params.kernel.eval(t - s)?;
        }
    }
    (0..n)
        .map(|i| {
            let base = params.alpha[i] * baseline_eval(covariates.at(i, t), &params.beta)?;
            let exc: f64 = (0..n).map(|j| params.c[(i, j)] * excitation[j]).sum();
            Ok(base + exc)
        })
        .collect()
}
