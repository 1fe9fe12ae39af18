//! Covariate shock paths, exact Hawkes sampling by thinning, and the
//! stationary-rate oracle of the branching representation.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::model::{dot, validate_params, CovariateField, EventLog, HawkesParams, Horizon};

/// Default cap on events per node before a run is declared explosive.
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// Decay law of a covariate shock, applied per elapsed segment `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShockDecay {
    /// `amplitude · (1 − rate)^k`
    #[default]
    Multiplicative,
    /// `amplitude · exp(−rate · k)`
    Exponential,
}

/// Data-generating process of the simulation study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n: usize,
    #[serde(rename = "T")]
    pub t: f64,
    pub segment_length: f64,
    pub shock_count: usize,
    pub shock_amplitude: f64,
    pub shock_decay: f64,
    pub shock_decay_law: ShockDecay,
    pub shock_duration: f64,
    pub noise_sd: f64,
    pub alpha_range: [f64; 2],
    pub edge_weight: f64,
    pub allow_self_parent: bool,
    pub beta_true: Vec<f64>,
    pub gamma_true: f64,
    pub horizon: Horizon,
    pub event_cap: usize,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 10,
            t: 34.0,
            segment_length: 1.0 / 24.0,
            shock_count: 8,
            shock_amplitude: 0.8,
            shock_decay: 0.05,
            shock_decay_law: ShockDecay::Multiplicative,
            shock_duration: 10.0,
            noise_sd: 0.05,
            alpha_range: [0.5, 1.0],
            edge_weight: 0.5,
            allow_self_parent: true,
            beta_true: vec![1.0],
            gamma_true: 1.1,
            horizon: Horizon::default(),
            event_cap: DEFAULT_EVENT_CAP,
            seed: 0,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return bad("T must be positive and finite");
        }
        if !(self.segment_length > 0.0) {
            return bad("segment_length must be positive");
        }
        if !(self.shock_duration >= 0.0 && self.noise_sd >= 0.0 && self.shock_decay >= 0.0) {
            return bad("shock_duration, shock_decay and noise_sd must be non-negative");
        }
        let [lo, hi] = self.alpha_range;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return bad("alpha_range must satisfy 0 <= lo <= hi");
        }
        if !(self.edge_weight >= 0.0) {
            return bad("edge_weight must be non-negative");
        }
        if self.beta_true.is_empty() {
            return bad("beta_true needs at least one coordinate");
        }
        if !self.allow_self_parent && self.n < 2 {
            return bad("a parent other than the node itself needs n >= 2");
        }
        self.horizon.kernel(self.gamma_true)?;
        Ok(())
    }

    /// Segment grid `0, ℓ, 2ℓ, …, T`; a final short segment closes at `T`.
    pub fn boundaries(&self) -> Vec<f64> {
        let full = (self.t / self.segment_length).floor() as usize;
        let mut b: Vec<f64> = (0..=full).map(|r| r as f64 * self.segment_length).collect();
        if self.t - b[full] > 1e-9 * self.segment_length {
            b.push(self.t);
        } else {
            b[full] = self.t;
        }
        b
    }

    fn duration_segments(&self) -> usize {
        (self.shock_duration / self.segment_length).round() as usize
    }
}

/// Sampling purpose of an RNG stream.
#[derive(Clone, Copy, Debug)]
pub enum StreamKind {
    Truth = 0,
    Covariates = 1,
    Events = 2,
    Fit = 3,
}

/// Independent generator for replication `rep` and the given purpose.
pub fn rng_stream(seed: u64, rep: u64, kind: StreamKind) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep * 4 + kind as u64);
    rng
}

/// Fixed ground truth of a study: parameters and shock start segments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpTruth {
    pub params: HawkesParams,
    /// Per covariate coordinate, the segments where shocks start.
    pub shocks: Vec<Vec<usize>>,
}

/// One realization of the DGP.
#[derive(Clone, Debug)]
pub struct DgpSample {
    pub truth: DgpTruth,
    pub covariates: CovariateField,
    /// Noiseless path `[segment][coordinate]`.
    pub mean_path: Vec<Vec<f64>>,
    pub events: EventLog,
}

/// α uniform on the range, one parent per node with the configured weight,
/// and uniform shock starts.
pub fn sample_truth<R: Rng>(config: &DgpConfig, rng: &mut R) -> Result<DgpTruth> {
    config.validate()?;
    let n = config.n;
    let [lo, hi] = config.alpha_range;
    let alpha: Vec<f64> = if hi > lo {
        let u = Uniform::new(lo, hi).map_err(|e| Error::InvalidInput(e.to_string()))?;
        (0..n).map(|_| u.sample(rng)).collect()
    } else {
        vec![lo; n]
    };
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        let j = if config.allow_self_parent {
            rng.random_range(0..n)
        } else {
            let j = rng.random_range(0..n - 1);
            if j >= i { j + 1 } else { j }
        };
        c[(i, j)] = config.edge_weight;
    }
    let kernel = config.horizon.kernel(config.gamma_true)?;
    let params = HawkesParams::new(c, alpha, config.beta_true.clone(), kernel)?;
    let shocks = draw_shocks(config, rng);
    Ok(DgpTruth { params, shocks })
}

fn draw_shocks<R: Rng>(config: &DgpConfig, rng: &mut R) -> Vec<Vec<usize>> {
    let r = config.boundaries().len() - 1;
    (0..config.beta_true.len())
        .map(|_| {
            let mut s: Vec<usize> = (0..config.shock_count).map(|_| rng.random_range(0..r)).collect();
            s.sort_unstable();
            s
        })
        .collect()
}

/// Noiseless shock path `[segment][coordinate]` for the given shock starts.
pub fn mean_path(config: &DgpConfig, shocks: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let r = config.boundaries().len() - 1;
    let dur = config.duration_segments();
    let p = shocks.len();
    let mut path = vec![vec![0.0; p]; r];
    for (k, starts) in shocks.iter().enumerate() {
        for &s in starts {
            for (lag, seg) in (s..r.min(s + dur)).enumerate() {
                let decay = match config.shock_decay_law {
                    ShockDecay::Multiplicative => (1.0 - config.shock_decay).powi(lag as i32),
                    ShockDecay::Exponential => (-config.shock_decay * lag as f64).exp(),
                };
                path[seg][k] += config.shock_amplitude * decay;
            }
        }
    }
    path
}

/// Shared covariate field: the shock path plus independent Gaussian noise
/// per segment. Returns the realized field and the noiseless path.
pub fn covariates_from_shocks<R: Rng>(
    config: &DgpConfig,
    shocks: &[Vec<usize>],
    rng: &mut R,
) -> Result<(CovariateField, Vec<Vec<f64>>)> {
    let mean = mean_path(config, shocks);
    let mut realized = mean.clone();
    if config.noise_sd > 0.0 {
        let noise = Normal::new(0.0, config.noise_sd).map_err(|e| Error::InvalidInput(e.to_string()))?;
        for seg in realized.iter_mut() {
            for v in seg.iter_mut() {
                *v += noise.sample(rng);
            }
        }
    }
    let field = CovariateField::shared(config.boundaries(), config.n, &realized)?;
    Ok((field, mean))
}

/// Draw shock starts, then the realized covariate field.
pub fn simulate_covariates<R: Rng>(config: &DgpConfig, rng: &mut R) -> Result<(CovariateField, Vec<Vec<f64>>)> {
    config.validate()?;
    let shocks = draw_shocks(config, rng);
    covariates_from_shocks(config, &shocks, rng)
}

/// Ogata thinning on `[0, T]`.
///
/// Between events the excitation only decays (or drops at truncation
/// expiries) and the baseline is constant on each covariate segment, so the
/// current total intensity bounds the intensity up to the next segment
/// boundary or accepted event.
pub fn simulate_hawkes<R: Rng>(
    params: &HawkesParams,
    covariates: &CovariateField,
    horizon: f64,
    event_cap: usize,
    rng: &mut R,
) -> Result<EventLog> {
    let verdict = validate_params(params);
    if !verdict.valid {
        return Err(Error::InvalidParams(verdict.failures.join("; ")));
    }
    let n = params.n();
    dim_check("covariate node count", n, covariates.n())?;
    dim_check("covariate dimension", params.p(), covariates.dim())?;
    if !(horizon > 0.0 && horizon <= covariates.horizon() * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!(
            "simulation horizon {horizon} exceeds covariate horizon {}",
            covariates.horizon()
        )));
    }
    let gamma = params.gamma();
    let a = params.kernel.horizon();
    let unit = Exp::new(1.0).expect("unit rate");
    let bounds = covariates.boundaries();

    let mut times: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut active: Vec<VecDeque<f64>> = vec![VecDeque::new(); n];
    // w[j] = Σ over active events of j of exp(−γ(t_state − s))
    let mut w = vec![0.0; n];
    let mut t_state = 0.0;
    let mut seg = 0usize;
    let mut base = baselines(params, covariates, 0)?;
    let mut lam = vec![0.0; n];

    let advance = |w: &mut [f64], active: &mut [VecDeque<f64>], t_state: &mut f64, t: f64| {
        let f = (-gamma * (t - *t_state)).exp();
        for (wj, act) in w.iter_mut().zip(active.iter_mut()) {
            *wj *= f;
            while let Some(&s) = act.front() {
                if t - s > a {
                    act.pop_front();
                    *wj -= (-gamma * (t - s)).exp();
                } else {
                    break;
                }
            }
            *wj = if act.is_empty() { 0.0 } else { wj.max(0.0) };
        }
        *t_state = t;
    };

    loop {
        let seg_end = bounds[seg + 1].min(horizon);
        total_intensity(params, &base, &w, &mut lam);
        let m: f64 = lam.iter().sum();
        let cand = if m > 0.0 { t_state + unit.sample(rng) / m } else { f64::INFINITY };
        if cand >= seg_end {
            if seg_end >= horizon {
                break;
            }
            advance(&mut w, &mut active, &mut t_state, seg_end);
            seg += 1;
            base = baselines(params, covariates, seg)?;
            continue;
        }
        advance(&mut w, &mut active, &mut t_state, cand);
        total_intensity(params, &base, &w, &mut lam);
        let total: f64 = lam.iter().sum();
        let u: f64 = rng.random::<f64>() * m;
        if u >= total {
            continue;
        }
        // attribute the accepted point proportionally to the node intensities
        let mut acc = 0.0;
        let mut node = n - 1;
        for (i, &l) in lam.iter().enumerate() {
            acc += l;
            if u < acc {
                node = i;
                break;
            }
        }
        times[node].push(cand);
        if times[node].len() > event_cap {
            return Err(Error::Explosion(format!(
                "node {node} exceeded {event_cap} events before t = {cand}"
            )));
        }
        active[node].push_back(cand);
        w[node] += 1.0;
    }
    EventLog::new(horizon, times)
}

fn baselines(params: &HawkesParams, cov: &CovariateField, seg: usize) -> Result<Vec<f64>> {
    (0..params.n())
        .map(|i| Ok(params.alpha[i] * dot(cov.value(i, seg), &params.beta).exp()))
        .collect()
}

fn total_intensity(params: &HawkesParams, base: &[f64], w: &[f64], out: &mut [f64]) {
    let n = params.n();
    for i in 0..n {
        let mut l = base[i];
        for j in 0..n {
            l += params.c[(i, j)] * w[j];
        }
        out[i] = l;
    }
}

/// `(I − C·m)⁻¹ (α ⊙ ν̄)` with `m` the kernel mass.
pub fn expected_count_stationary(params: &HawkesParams, nu_bar: &[f64]) -> Result<Vec<f64>> {
    let n = params.n();
    dim_check("nu_bar length", n, nu_bar.len())?;
    let k = &params.c * params.kernel.mass();
    let rho = k.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho >= 1.0 {
        return Err(Error::Singular(format!("spectral radius of C·mass is {rho} >= 1")));
    }
    let m = DMatrix::identity(n, n) - k;
    let rhs = DVector::from_iterator(n, params.alpha.iter().zip(nu_bar).map(|(a, v)| a * v));
    let x = m.lu().solve(&rhs).ok_or_else(|| Error::Singular("I - C·mass is singular".into()))?;
    Ok(x.iter().copied().collect())
}

/// Fixed truth plus replication 0, each from its own stream of `config.seed`.
pub fn sample_dgp(config: &DgpConfig) -> Result<DgpSample> {
    let truth = sample_truth(config, &mut rng_stream(config.seed, 0, StreamKind::Truth))?;
    sample_replication(config, &truth, 0)
}

/// Replication `rep` under a fixed truth: fresh covariate noise and events.
pub fn sample_replication(config: &DgpConfig, truth: &DgpTruth, rep: u64) -> Result<DgpSample> {
    let (covariates, mean_path) =
        covariates_from_shocks(config, &truth.shocks, &mut rng_stream(config.seed, rep, StreamKind::Covariates))?;
    let events = simulate_hawkes(
        &truth.params,
        &covariates,
        config.t,
        config.event_cap,
        &mut rng_stream(config.seed, rep, StreamKind::Events),
    )?;
    Ok(DgpSample { truth: truth.clone(), covariates, mean_path, events })
}
