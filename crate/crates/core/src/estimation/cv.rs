//! Time-split cross-validation of the per-node penalties: fit on `[0, S]`,
//! score each node's `LSᵢ` on `(S, T]`, and move each `ωᵢ` by its own
//! golden-section search in log-space.

use serde::{Deserialize, Serialize};

use super::stage1::{stage1_fit, FitData, Stage1Options, Stage1Result, ThetaBox};
use super::tuning::{theory_tuning, TuningConstants, TuningValues};
use crate::error::{dim_check, Error, Result};
use crate::model::Theta;
use crate::stats::{ls_value, Window};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvOptions {
    /// Training end `S` as a fraction of the window length.
    pub split_fraction: f64,
    pub iterations: usize,
    /// Width of the search bracket in log ω.
    pub log_span: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { split_fraction: 2.0 / 3.0, iterations: 8, log_span: 1e3f64.ln() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvRound {
    pub omega: Vec<f64>,
    pub test_ls: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvResult {
    pub omega: Vec<f64>,
    pub split: f64,
    pub theory: TuningValues,
    /// Smallest penalty that zeroes each row for every γ on the tuning grid,
    /// at the β of the first training fit.
    pub omega_max: Vec<f64>,
    pub rounds: Vec<CvRound>,
}

/// Per-node golden-section search on `[lo, hi]` in log ω, one new probe per
/// round.
#[derive(Clone, Debug)]
struct Golden {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    fc: Option<f64>,
    fd: Option<f64>,
}

impl Golden {
    fn new(lo: f64, hi: f64) -> Self {
        let c = hi - INV_PHI * (hi - lo);
        let d = lo + INV_PHI * (hi - lo);
        Self { a: lo, b: hi, c, d, fc: None, fd: None }
    }

    fn next(&self) -> f64 {
        if self.fc.is_none() { self.c } else { self.d }
    }

    fn record(&mut self, f: f64) {
        if self.fc.is_none() {
            self.fc = Some(f);
            return;
        }
        if self.fd.is_none() {
            self.fd = Some(f);
        }
        let (fc, fd) = (self.fc.unwrap(), self.fd.unwrap());
        if fc <= fd {
            self.b = self.d;
            self.d = self.c;
            self.fd = Some(fc);
            self.c = self.b - INV_PHI * (self.b - self.a);
            self.fc = None;
        } else {
            self.a = self.c;
            self.c = self.d;
            self.fc = Some(fd);
            self.d = self.a + INV_PHI * (self.b - self.a);
            self.fd = None;
        }
    }

    /// Point to probe after `record`: whichever interior point lacks a value.
    fn pending(&self) -> f64 {
        if self.fc.is_none() { self.c } else { self.d }
    }
}

fn test_losses(data: &FitData, fit: &Stage1Result, split: f64) -> Result<Vec<f64>> {
    let test = data.with_window(Window::new(split, data.window.end)?);
    let stats = test.stats(&fit.theta)?;
    let t = test.window.len();
    (0..data.n())
        .map(|i| {
            let c: Vec<f64> = fit.c.row(i).iter().copied().collect();
            Ok(ls_value(&stats, &c, fit.alpha[i], i)? / t)
        })
        .collect()
}

/// `max over γ, j of (A_ij − â·G_ij)₊ / T`, with `â = v_i / V_ii`: above it
/// the row optimum is `c = 0` for every γ on the grid.
fn zeroing_penalty(train: &FitData, theta: &Theta, theta_box: &ThetaBox, grid: usize) -> Result<Vec<f64>> {
    let n = train.n();
    let t = train.window.len();
    let [lo, hi] = theta_box.gamma;
    let mut out = vec![0.0; n];
    for k in 0..grid {
        let gamma = lo * (hi / lo).powf(k as f64 / (grid - 1) as f64);
        let st = train.stats(&Theta::new(theta.beta.clone(), gamma))?;
        for (i, o) in out.iter_mut().enumerate() {
            let a0 = if st.v_diag[i] > 0.0 { (st.v[i] / st.v_diag[i]).max(0.0) } else { 0.0 };
            for j in 0..n {
                *o = f64::max(*o, (st.a[(i, j)] - a0 * st.g[(i, j)]).max(0.0) / t);
            }
        }
    }
    Ok(out)
}

pub fn cross_validate(
    data: &FitData,
    cv: &CvOptions,
    fit_opts: &Stage1Options,
    tuning: &TuningConstants,
) -> Result<CvResult> {
    let (s0, e0) = (data.window.start, data.window.end);
    let split = s0 + cv.split_fraction * (e0 - s0);
    if !(cv.split_fraction > 0.0 && cv.split_fraction < 1.0) {
        return Err(Error::InvalidInput(format!("split S = {split} must lie strictly inside the window")));
    }
    if cv.iterations == 0 {
        return Err(Error::InvalidInput("cross-validation needs at least one iteration".into()));
    }
    let n = data.n();
    let theory = theory_tuning(data, None, tuning)?;
    let train = data.with_window(Window::new(s0, split)?);
    let mut omega = theory.omega.clone();
    let mut rounds = Vec::with_capacity(cv.iterations);
    let mut searches: Vec<Golden> = Vec::new();
    let mut omega_max = vec![0.0; n];
    for m in 0..cv.iterations {
        dim_check("omega length", n, omega.len())?;
        let fit = stage1_fit(&train, &omega, fit_opts)?;
        let ls = test_losses(data, &fit, split)?;
        rounds.push(CvRound { omega: omega.clone(), test_ls: ls.clone(), theta: fit.theta.to_vec() });
        if m + 1 == cv.iterations {
            break;
        }
        if m == 0 {
            omega_max = zeroing_penalty(&train, &fit.theta, &tuning.theta_box, tuning.gamma_grid)?;
            searches = (0..n)
                .map(|i| {
                    let cap = if omega_max[i] > 0.0 { theory.omega[i].min(omega_max[i]) } else { theory.omega[i] };
                    let hi = cap.max(f64::MIN_POSITIVE).ln();
                    Golden::new(hi - cv.log_span, hi)
                })
                .collect();
            omega = searches.iter().map(|g| g.next().exp()).collect();
        } else {
            for (i, g) in searches.iter_mut().enumerate() {
                g.record(ls[i]);
                omega[i] = g.pending().exp();
            }
        }
    }
    let best: Vec<f64> = (0..n)
        .map(|i| {
            let k = (0..rounds.len())
                .min_by(|&a, &b| rounds[a].test_ls[i].total_cmp(&rounds[b].test_ls[i]))
                .expect("at least one round");
            rounds[k].omega[i]
        })
        .collect();
    Ok(CvResult { omega: best, split, theory, omega_max, rounds })
}
