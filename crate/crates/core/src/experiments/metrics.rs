//! Aggregate statistics of replicated estimates and edge detection tallies.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Result};

/// Consistency factor of the median absolute deviation under normality.
pub const MAD_SCALE: f64 = 1.4826;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRow {
    pub scenario: String,
    pub parameter: String,
    pub truth: f64,
    pub n: usize,
    pub mean_bias: f64,
    pub median_bias: f64,
    /// Sample standard deviation (N − 1 denominator; 0 when N = 1).
    pub sd: f64,
    pub mad: f64,
    pub rmse: f64,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) }
}

/// Summary of estimates of one parameter. `rmse² = mean_bias² + sd²(N−1)/N`.
pub fn summarize(scenario: &str, parameter: &str, truth: f64, est: &[f64]) -> ParamRow {
    let n = est.len();
    if n == 0 {
        return ParamRow {
            scenario: scenario.into(),
            parameter: parameter.into(),
            truth,
            n,
            mean_bias: f64::NAN,
            median_bias: f64::NAN,
            sd: f64::NAN,
            mad: f64::NAN,
            rmse: f64::NAN,
        };
    }
    let m = mean(est);
    let med = median(est);
    let ss: f64 = est.iter().map(|x| (x - m).powi(2)).sum();
    let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
    let dev: Vec<f64> = est.iter().map(|x| (x - med).abs()).collect();
    let rmse = (est.iter().map(|x| (x - truth).powi(2)).sum::<f64>() / n as f64).sqrt();
    ParamRow {
        scenario: scenario.into(),
        parameter: parameter.into(),
        truth,
        n,
        mean_bias: m - truth,
        median_bias: med - truth,
        sd,
        mad: MAD_SCALE * median(&dev),
        rmse,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
}

/// Detection means `|Ĉ_ij| > threshold`; self-edges are counted like any other.
pub fn confusion_matrix(c_hat: &DMatrix<f64>, c_true: &DMatrix<f64>, threshold: f64) -> Result<Confusion> {
    dim_check("estimate rows", c_true.nrows(), c_hat.nrows())?;
    dim_check("estimate columns", c_true.ncols(), c_hat.ncols())?;
    let mut out = Confusion::default();
    for (e, t) in c_hat.iter().zip(c_true.iter()) {
        match (e.abs() > threshold, *t != 0.0) {
            (true, true) => out.tp += 1,
            (false, true) => out.fn_ += 1,
            (true, false) => out.fp += 1,
            (false, false) => out.tn += 1,
        }
    }
    Ok(out)
}

/// Mean estimated weight on true edges against that on non-edges.
pub fn edge_separation(c_hat: &DMatrix<f64>, c_true: &DMatrix<f64>) -> (f64, f64) {
    let (mut on, mut off, mut k_on, mut k_off) = (0.0, 0.0, 0usize, 0usize);
    for (e, t) in c_hat.iter().zip(c_true.iter()) {
        if *t != 0.0 {
            on += e;
            k_on += 1;
        } else {
            off += e;
            k_off += 1;
        }
    }
    (on / k_on.max(1) as f64, off / k_off.max(1) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionRow {
    pub scenario: String,
    pub replications: usize,
    pub tp: f64,
    #[serde(rename = "fn")]
    pub fn_: f64,
    pub fp: f64,
    pub tn: f64,
}

pub fn average_confusion(scenario: &str, cs: &[Confusion]) -> ConfusionRow {
    let k = cs.len() as f64;
    let avg = |f: fn(&Confusion) -> usize| cs.iter().map(|c| f(c) as f64).sum::<f64>() / k;
    ConfusionRow {
        scenario: scenario.into(),
        replications: cs.len(),
        tp: avg(|c| c.tp),
        fn_: avg(|c| c.fn_),
        fp: avg(|c| c.fp),
        tn: avg(|c| c.tn),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionRow {
    pub scenario: String,
    /// 1-based node labels.
    pub target: usize,
    pub source: usize,
    pub truth: f64,
    pub percent: f64,
}

/// Percentage of replications with `|Ĉ_ij| > threshold`, per edge.
pub fn detection_rates(scenario: &str, estimates: &[DMatrix<f64>], c_true: &DMatrix<f64>, threshold: f64) -> Vec<DetectionRow> {
    let k = estimates.len() as f64;
    let mut rows = Vec::with_capacity(c_true.len());
    for i in 0..c_true.nrows() {
        for j in 0..c_true.ncols() {
            let hits = estimates.iter().filter(|c| c[(i, j)].abs() > threshold).count() as f64;
            rows.push(DetectionRow { scenario: scenario.into(), target: i + 1, source: j + 1, truth: c_true[(i, j)], percent: 100.0 * hits / k });
        }
    }
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub quantity: String,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    /// Values outside the histogram range, excluded from every bin.
    pub outside: usize,
}

/// Equal-width bins over `[lo, hi]`; the last bin is closed.
pub fn histogram(quantity: &str, values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<HistogramRow> {
    let w = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut outside = 0;
    for &v in values {
        if !(lo..=hi).contains(&v) {
            outside += 1;
            continue;
        }
        counts[(((v - lo) / w) as usize).min(bins - 1)] += 1;
    }
    (0..bins)
        .map(|b| HistogramRow {
            quantity: quantity.into(),
            bin_lo: lo + b as f64 * w,
            bin_hi: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * w },
            count: counts[b],
            outside,
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationRow {
    pub scenario: String,
    pub replications: usize,
    /// Replications whose mean weight on true edges exceeds that on non-edges.
    pub separated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub scenario: String,
    pub attempted: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub theta: Vec<ParamRow>,
    pub confusion: Vec<ConfusionRow>,
    pub edges: Vec<ParamRow>,
    pub alpha: Vec<ParamRow>,
    pub detection: Vec<DetectionRow>,
    pub separation: Vec<SeparationRow>,
    pub histograms: Vec<HistogramRow>,
    pub failures: Vec<FailureRow>,
}
