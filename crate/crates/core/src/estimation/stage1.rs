//! Joint first-stage fit: profile the row problems out at each θ and search
//! θ over a box from several random starts.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::optimize::{nelder_mead_box, SimplexResult};
use crate::error::{dim_check, Error, Result};
use crate::lasso::{solve_all_rows, RowOptions, RowSolution};
use crate::model::{CovariateField, EventLog, Horizon, Theta};
use crate::simulate::{rng_stream, StreamKind};
use crate::stats::{compute_stats, SuffStats, Window};

/// Observed data plus the window on which the criterion is evaluated.
#[derive(Clone, Copy, Debug)]
pub struct FitData<'a> {
    pub events: &'a EventLog,
    pub covariates: &'a CovariateField,
    pub horizon: Horizon,
    pub window: Window,
}

impl<'a> FitData<'a> {
    pub fn new(events: &'a EventLog, covariates: &'a CovariateField, horizon: Horizon) -> Result<Self> {
        dim_check("covariate node count", events.n(), covariates.n())?;
        Ok(Self { events, covariates, horizon, window: Window::full(events) })
    }

    pub fn with_window(self, window: Window) -> Self {
        Self { window, ..self }
    }

    pub fn n(&self) -> usize {
        self.events.n()
    }

    pub fn p(&self) -> usize {
        self.covariates.dim()
    }

    pub fn stats(&self, theta: &Theta) -> Result<SuffStats> {
        let kernel = self.horizon.kernel(theta.gamma)?;
        compute_stats(self.events, self.covariates, theta, &kernel, self.window)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThetaBox {
    pub beta: [f64; 2],
    pub gamma: [f64; 2],
}

impl Default for ThetaBox {
    fn default() -> Self {
        Self { beta: [-10.0, 10.0], gamma: [0.1, 5.0] }
    }
}

impl ThetaBox {
    pub fn validate(&self) -> Result<()> {
        let ok = |b: [f64; 2]| b[0].is_finite() && b[1].is_finite() && b[0] < b[1];
        if !ok(self.beta) || !ok(self.gamma) || self.gamma[0] <= 0.0 {
            return Err(Error::InvalidInput(format!("invalid θ box {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, theta: &Theta) -> bool {
        theta.beta.iter().all(|b| (self.beta[0]..=self.beta[1]).contains(b))
            && (self.gamma[0]..=self.gamma[1]).contains(&theta.gamma)
    }

    /// Projection onto the box; the flag reports whether anything moved.
    pub fn clip(&self, theta: &Theta) -> (Theta, bool) {
        let beta: Vec<f64> = theta.beta.iter().map(|b| b.clamp(self.beta[0], self.beta[1])).collect();
        let gamma = theta.gamma.clamp(self.gamma[0], self.gamma[1]);
        let clipped = beta != theta.beta || gamma != theta.gamma;
        (Theta::new(beta, gamma), clipped)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Options {
    pub restarts: usize,
    /// Row alternation tolerance.
    pub tol1: f64,
    /// Restart refinement tolerance.
    pub tol2: f64,
    /// Final refinement tolerance.
    pub tol3: f64,
    pub theta_box: ThetaBox,
    /// Hold γ at this value instead of estimating it.
    pub fixed_gamma: Option<f64>,
    /// Hold β at this value instead of estimating it.
    pub fixed_beta: Option<Vec<f64>>,
    pub max_evals: usize,
    pub kkt_tol: f64,
    pub seed: u64,
}

impl Default for Stage1Options {
    fn default() -> Self {
        Self {
            restarts: 10,
            tol1: 1e-4,
            tol2: 1e-3,
            tol3: 1e-6,
            theta_box: ThetaBox::default(),
            fixed_gamma: None,
            fixed_beta: None,
            max_evals: 2000,
            kkt_tol: 1e-8,
            seed: 0,
        }
    }
}

impl Stage1Options {
    pub fn validate(&self) -> Result<()> {
        self.theta_box.validate()?;
        if self.restarts == 0 {
            return Err(Error::InvalidInput("at least one restart is required".into()));
        }
        for (name, v) in [("tol1", self.tol1), ("tol2", self.tol2), ("tol3", self.tol3), ("kkt_tol", self.kkt_tol)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(b) = &self.fixed_beta {
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("fixed beta must be finite".into()));
            }
        }
        if let Some(g) = self.fixed_gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidInput(format!("fixed gamma must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn row_options(&self, tol: f64) -> RowOptions {
        RowOptions { tol, kkt_tol: self.kkt_tol, alpha_penalty: 0.0 }
    }
}

/// Row solutions at one θ and the profile value.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Profile {
    pub theta: Theta,
    /// `(1/n)Σᵢ [LSᵢ/T + 2ωᵢ‖Ĉᵢ‖₁]`
    pub value: f64,
    pub rows: Vec<RowSolution>,
}

impl Profile {
    pub fn c(&self) -> DMatrix<f64> {
        let n = self.rows.len();
        DMatrix::from_fn(n, n, |i, j| self.rows[i].c[j])
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.alpha).collect()
    }
}

pub fn profile_at(data: &FitData, theta: &Theta, omega: &[f64], opts: RowOptions) -> Result<Profile> {
    dim_check("omega length", data.n(), omega.len())?;
    let stats = data.stats(theta)?;
    let rows = solve_all_rows(&stats, omega, opts)?;
    let value = rows.iter().map(|r| r.objective).sum::<f64>() / data.n() as f64;
    Ok(Profile { theta: theta.clone(), value, rows })
}

pub fn profile_criterion(data: &FitData, theta: &Theta, omega: &[f64], tol_inner: f64) -> Result<f64> {
    Ok(profile_at(data, theta, omega, RowOptions { tol: tol_inner, ..RowOptions::default() })?.value)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestartTrace {
    pub start: Theta,
    pub end: Theta,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stage1Result {
    pub theta: Theta,
    #[serde(with = "crate::serde_matrix")]
    pub c: DMatrix<f64>,
    pub alpha: Vec<f64>,
    pub criterion: f64,
    pub restarts: Vec<RestartTrace>,
    pub refinement: Option<RestartTrace>,
    pub rows: Vec<RowSolution>,
}

/// Free coordinates of θ: β and γ unless they are held fixed.
struct Search<'a> {
    data: &'a FitData<'a>,
    omega: &'a [f64],
    opts: &'a Stage1Options,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl<'a> Search<'a> {
    fn new(data: &'a FitData<'a>, omega: &'a [f64], opts: &'a Stage1Options) -> Result<Self> {
        let p = data.p();
        if let Some(b) = &opts.fixed_beta {
            dim_check("fixed beta length", p, b.len())?;
        }
        let bx = &opts.theta_box;
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        if opts.fixed_beta.is_none() {
            lo.extend(std::iter::repeat_n(bx.beta[0], p));
            hi.extend(std::iter::repeat_n(bx.beta[1], p));
        }
        if opts.fixed_gamma.is_none() {
            lo.push(bx.gamma[0]);
            hi.push(bx.gamma[1]);
        }
        Ok(Self { data, omega, opts, lo, hi })
    }

    fn theta(&self, x: &[f64]) -> Theta {
        let p = self.data.p();
        let (beta, rest) = match &self.opts.fixed_beta {
            Some(b) => (b.clone(), x),
            None => (x[..p].to_vec(), &x[p..]),
        };
        Theta::new(beta, self.opts.fixed_gamma.unwrap_or_else(|| rest[0]))
    }

    fn coords(&self, theta: &Theta) -> Vec<f64> {
        let mut x = if self.opts.fixed_beta.is_none() { theta.beta.clone() } else { Vec::new() };
        if self.opts.fixed_gamma.is_none() {
            x.push(theta.gamma);
        }
        x
    }

    fn run(&self, start: &[f64], tol: f64) -> SimplexResult {
        let row = self.opts.row_options(self.opts.tol1);
        let f = |x: &[f64]| match profile_at(self.data, &self.theta(x), self.omega, row) {
            Ok(pr) => pr.value,
            Err(_) => f64::INFINITY,
        };
        nelder_mead_box(f, start, &self.lo, &self.hi, tol, self.opts.max_evals)
    }

    fn trace(&self, start: &[f64], r: &SimplexResult) -> RestartTrace {
        RestartTrace {
            start: self.theta(start),
            end: self.theta(&r.x),
            value: r.value,
            evals: r.evals,
            converged: r.converged,
        }
    }
}

/// Random starts drawn from the fit stream of `seed`, uniform in the box.
pub fn stage1_fit(data: &FitData, omega: &[f64], opts: &Stage1Options) -> Result<Stage1Result> {
    opts.validate()?;
    dim_check("omega length", data.n(), omega.len())?;
    let search = Search::new(data, omega, opts)?;
    let mut rng = rng_stream(opts.seed, 0, StreamKind::Fit);
    let starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|_| (0..search.lo.len()).map(|k| rng.random_range(search.lo[k]..=search.hi[k])).collect())
        .collect();
    stage1_from_starts(&search, &starts)
}

/// Stage 1 with explicit starting values instead of random draws.
pub fn stage1_fit_from(data: &FitData, omega: &[f64], opts: &Stage1Options, starts: &[Theta]) -> Result<Stage1Result> {
    opts.validate()?;
    dim_check("omega length", data.n(), omega.len())?;
    if starts.is_empty() {
        return Err(Error::InvalidInput("at least one start is required".into()));
    }
    let search = Search::new(data, omega, opts)?;
    let coords: Vec<Vec<f64>> = starts
        .iter()
        .map(|t| {
            dim_check("start beta length", data.p(), t.beta.len())?;
            Ok(search.coords(&opts.theta_box.clip(t).0))
        })
        .collect::<Result<_>>()?;
    stage1_from_starts(&search, &coords)
}

fn stage1_from_starts(search: &Search, starts: &[Vec<f64>]) -> Result<Stage1Result> {
    let opts = search.opts;
    let mut restarts = Vec::with_capacity(starts.len());
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let r = search.run(s, opts.tol2);
        restarts.push(search.trace(s, &r));
        if r.value.is_finite() && best.as_ref().is_none_or(|(_, v)| r.value < *v) {
            best = Some((r.x.clone(), r.value));
        }
    }
    let Some((x2, _)) = best else {
        return Err(Error::NonConvergence("no restart produced a finite criterion".into()));
    };
    let (x3, refinement) = if x2.is_empty() {
        (x2, None)
    } else {
        let r = search.run(&x2, opts.tol3);
        let tr = search.trace(&x2, &r);
        (r.x, Some(tr))
    };
    let theta = search.theta(&x3);
    let pr = profile_at(search.data, &theta, search.omega, opts.row_options(opts.tol1))?;
    Ok(Stage1Result {
        theta,
        c: pr.c(),
        alpha: pr.alpha(),
        criterion: pr.value,
        restarts,
        refinement,
        rows: pr.rows,
    })
}
