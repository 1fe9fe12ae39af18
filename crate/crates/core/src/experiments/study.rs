//! Replicated fits of the simulation design under a fixed ground truth.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::*;
use crate::error::{Error, Result};
use crate::estimation::{
    cross_validate, fit_with_omega, theory_tuning, CvOptions, CvResult, FitConfig, FitData, OmegaSource, SigmaRule,
    Stage1Options, Stages, TuningConstants,
};
use crate::model::{CovariateField, Theta};
use crate::simulate::{rng_stream, sample_replication, sample_truth, DgpConfig, DgpSample, DgpTruth, StreamKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FullStage1,
    FullStage3,
    SlimStage1,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FullStage1 => "full_stage1",
            Self::FullStage3 => "full_stage3",
            Self::SlimStage1 => "slim_stage1",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum StudyOmega {
    /// Cross-validate on the first replication (full model) and reuse.
    CvOnce,
    CvPerReplication,
    Theory,
    Explicit { omega: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub replications: usize,
    pub scenarios: Vec<Scenario>,
    pub dgp: DgpConfig,
    pub omega: StudyOmega,
    pub stage1: Stage1Options,
    pub cv: CvOptions,
    pub tuning: TuningConstants,
    pub sigma_rule: SigmaRule,
    /// Detection means `|Ĉ_ij| > threshold`.
    pub threshold: f64,
    /// Worker cap; `None` uses the global pool.
    pub threads: Option<usize>,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            replications: 100,
            scenarios: vec![Scenario::FullStage1, Scenario::FullStage3, Scenario::SlimStage1],
            dgp: DgpConfig::default(),
            omega: StudyOmega::CvOnce,
            stage1: Stage1Options::default(),
            cv: CvOptions::default(),
            tuning: TuningConstants::default(),
            sigma_rule: SigmaRule::default(),
            threshold: 0.0,
            threads: None,
            seed: 0,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidInput("replications must be at least 1".into()));
        }
        if self.scenarios.is_empty() {
            return Err(Error::InvalidInput("at least one scenario is required".into()));
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::InvalidInput("threshold must be non-negative".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        if let StudyOmega::Explicit { omega } = &self.omega {
            crate::error::dim_check("explicit omega length", self.dgp.n, omega.len())?;
        }
        self.dgp.validate()?;
        self.stage1.validate()?;
        self.tuning.validate()
    }

    fn dgp(&self) -> DgpConfig {
        DgpConfig { seed: self.seed, ..self.dgp.clone() }
    }

    fn has(&self, s: Scenario) -> bool {
        self.scenarios.contains(&s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullFit {
    pub theta_check: Theta,
    #[serde(with = "crate::serde_matrix")]
    pub c_check: DMatrix<f64>,
    pub alpha_check: Vec<f64>,
    pub theta_bar: Option<Theta>,
    #[serde(with = "crate::serde_matrix::option")]
    pub c_hat: Option<DMatrix<f64>>,
    pub alpha_hat: Option<Vec<f64>>,
    pub debias_realized: Option<f64>,
    pub debias_bound: Option<f64>,
    pub clipped: bool,
    pub flagged_rows: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlimFit {
    #[serde(with = "crate::serde_matrix")]
    pub c: DMatrix<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepRecord {
    pub rep: u64,
    pub event_counts: Vec<usize>,
    pub omega: Vec<f64>,
    pub full: Option<FullFit>,
    pub slim: Option<SlimFit>,
    pub full_error: Option<String>,
    pub slim_error: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub truth: DgpTruth,
    pub cv: Option<CvResult>,
    pub records: Vec<RepRecord>,
    pub metrics: MetricsTable,
}

fn fit_config(cfg: &StudyConfig, stages: Stages, stage1: Stage1Options) -> FitConfig {
    FitConfig {
        stages,
        omega: OmegaSource::Theory,
        horizon: cfg.dgp.horizon,
        stage1,
        sigma_rule: cfg.sigma_rule,
        tuning: cfg.tuning.clone(),
        cv: cfg.cv.clone(),
    }
}

fn rep_seed(seed: u64, rep: u64) -> u64 {
    rng_stream(seed, rep, StreamKind::Fit).next_u64()
}

fn full_omega(cfg: &StudyConfig, sample: &DgpSample, stage1: &Stage1Options) -> Result<(Vec<f64>, Option<CvResult>)> {
    let data = FitData::new(&sample.events, &sample.covariates, cfg.dgp.horizon)?;
    match &cfg.omega {
        StudyOmega::Explicit { omega } => Ok((omega.clone(), None)),
        StudyOmega::Theory => Ok((theory_tuning(&data, None, &cfg.tuning)?.omega, None)),
        StudyOmega::CvOnce | StudyOmega::CvPerReplication => {
            let r = cross_validate(&data, &cfg.cv, stage1, &cfg.tuning)?;
            Ok((r.omega.clone(), Some(r)))
        }
    }
}

/// Full model: β, γ, α and C estimated from events and covariates.
fn run_full(cfg: &StudyConfig, sample: &DgpSample, omega: &[f64], stage1: &Stage1Options) -> Result<FullFit> {
    let stages = if cfg.has(Scenario::FullStage3) { Stages::All } else { Stages::One };
    let fc = fit_config(cfg, stages, stage1.clone());
    let data = FitData::new(&sample.events, &sample.covariates, cfg.dgp.horizon)?;
    let rep = fit_with_omega(&data, &fc, omega.to_vec(), None, None)?;
    let debias = rep.debias.as_ref();
    Ok(FullFit {
        theta_check: rep.stage1.theta.clone(),
        c_check: rep.stage1.c.clone(),
        alpha_check: rep.stage1.alpha.clone(),
        theta_bar: debias.map(|d| d.theta_bar.clone()),
        c_hat: rep.stage3.as_ref().map(|s| s.c.clone()),
        alpha_hat: rep.stage3.as_ref().map(|s| s.alpha.clone()),
        debias_realized: debias.map(|d| d.realized),
        debias_bound: debias.map(|d| d.max_bound),
        clipped: rep.clipped,
        flagged_rows: rep.flagged_rows,
    })
}

/// Slim oracle: unit baseline and γ at its true value. Only the event log is
/// read; the covariate field handed to the fit is identically zero.
fn run_slim(cfg: &StudyConfig, sample: &DgpSample, omega: &[f64], stage1: &Stage1Options) -> Result<SlimFit> {
    let p = cfg.dgp.beta_true.len();
    let zero = CovariateField::zeros(cfg.dgp.n, p, cfg.dgp.t)?;
    let opts = Stage1Options { fixed_gamma: Some(cfg.dgp.gamma_true), fixed_beta: Some(vec![0.0; p]), ..stage1.clone() };
    let data = FitData::new(&sample.events, &zero, cfg.dgp.horizon)?;
    let rep = fit_with_omega(&data, &fit_config(cfg, Stages::One, opts), omega.to_vec(), None, None)?;
    Ok(SlimFit { c: rep.stage1.c, alpha: rep.stage1.alpha })
}

fn run_replication(cfg: &StudyConfig, truth: &DgpTruth, rep: u64, shared: Option<&[f64]>) -> Result<RepRecord> {
    let sample = sample_replication(&cfg.dgp(), truth, rep)?;
    let stage1 = Stage1Options { seed: rep_seed(cfg.seed, rep), ..cfg.stage1.clone() };
    let (omega, omega_err) = match shared {
        Some(w) => (Some(w.to_vec()), None),
        None => match full_omega(cfg, &sample, &stage1) {
            Ok((w, _)) => (Some(w), None),
            Err(e) => (None, Some(e.to_string())),
        },
    };
    let mut rec = RepRecord {
        rep,
        event_counts: sample.events.counts(),
        omega: omega.clone().unwrap_or_default(),
        full: None,
        slim: None,
        full_error: omega_err.clone(),
        slim_error: omega_err,
    };
    let Some(omega) = omega else { return Ok(rec) };
    if cfg.has(Scenario::FullStage1) || cfg.has(Scenario::FullStage3) {
        match run_full(cfg, &sample, &omega, &stage1) {
            Ok(f) => rec.full = Some(f),
            Err(e) => rec.full_error = Some(e.to_string()),
        }
    }
    if cfg.has(Scenario::SlimStage1) {
        match run_slim(cfg, &sample, &omega, &stage1) {
            Ok(f) => rec.slim = Some(f),
            Err(e) => rec.slim_error = Some(e.to_string()),
        }
    }
    Ok(rec)
}

/// Truth drawn once from the master seed; every replication redraws the
/// covariate noise and the events.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let dgp = cfg.dgp();
    let truth = sample_truth(&dgp, &mut rng_stream(cfg.seed, 0, StreamKind::Truth))?;
    let run = || -> Result<StudyResult> {
        let (shared, cv) = match cfg.omega {
            StudyOmega::CvPerReplication => (None, None),
            _ => {
                let first = sample_replication(&dgp, &truth, 0)?;
                let stage1 = Stage1Options { seed: rep_seed(cfg.seed, 0), ..cfg.stage1.clone() };
                let (w, cv) = full_omega(cfg, &first, &stage1)?;
                (Some(w), cv)
            }
        };
        let records: Vec<RepRecord> = (0..cfg.replications as u64)
            .into_par_iter()
            .map(|k| run_replication(cfg, &truth, k, shared.as_deref()))
            .collect::<Result<_>>()?;
        let metrics = compute_metrics(cfg, &truth, &records);
        Ok(StudyResult { config: cfg.clone(), truth: truth.clone(), cv, records, metrics })
    };
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .install(run),
        None => run(),
    }
}

pub const HIST_RANGE: [f64; 2] = [-3.0, 3.0];
pub const HIST_BINS: usize = 30;

/// Everything reported, recomputable from the raw records alone.
pub fn compute_metrics(cfg: &StudyConfig, truth: &DgpTruth, records: &[RepRecord]) -> MetricsTable {
    let tp = &truth.params;
    let n = tp.n();
    let mut m = MetricsTable::default();
    let full: Vec<&FullFit> = records.iter().filter_map(|r| r.full.as_ref()).collect();
    let stage3: Vec<&FullFit> = full.iter().copied().filter(|f| f.c_hat.is_some()).collect();
    let slim: Vec<&SlimFit> = records.iter().filter_map(|r| r.slim.as_ref()).collect();
    let wanted: BTreeSet<Scenario> = cfg.scenarios.iter().copied().collect();

    // per scenario: estimated C and α for each successful replication
    let mut fits: Vec<(Scenario, Vec<DMatrix<f64>>, Vec<Vec<f64>>)> = Vec::new();
    for &s in &wanted {
        let (cs, als) = match s {
            Scenario::FullStage1 => (full.iter().map(|f| f.c_check.clone()).collect(), full.iter().map(|f| f.alpha_check.clone()).collect()),
            Scenario::FullStage3 => (
                stage3.iter().map(|f| f.c_hat.clone().unwrap()).collect(),
                stage3.iter().map(|f| f.alpha_hat.clone().unwrap()).collect(),
            ),
            Scenario::SlimStage1 => (slim.iter().map(|f| f.c.clone()).collect(), slim.iter().map(|f| f.alpha.clone()).collect()),
        };
        let failed = match s {
            Scenario::SlimStage1 => records.len() - slim.len(),
            Scenario::FullStage1 => records.len() - full.len(),
            Scenario::FullStage3 => records.len() - stage3.len(),
        };
        m.failures.push(FailureRow { scenario: s.name().into(), attempted: records.len(), failed });
        fits.push((s, cs, als));
    }

    let beta_label = |k: usize| if tp.p() == 1 { "beta".to_string() } else { format!("beta{}", k + 1) };
    if wanted.contains(&Scenario::FullStage1) {
        for k in 0..tp.p() {
            let v: Vec<f64> = full.iter().map(|f| f.theta_check.beta[k]).collect();
            m.theta.push(summarize("full_stage1", &beta_label(k), tp.beta[k], &v));
        }
        let v: Vec<f64> = full.iter().map(|f| f.theta_check.gamma).collect();
        m.theta.push(summarize("full_stage1", "gamma", tp.gamma(), &v));
    }
    if wanted.contains(&Scenario::FullStage3) {
        let bars: Vec<&Theta> = full.iter().filter_map(|f| f.theta_bar.as_ref()).collect();
        for k in 0..tp.p() {
            let v: Vec<f64> = bars.iter().map(|t| t.beta[k]).collect();
            m.theta.push(summarize("debiased", &beta_label(k), tp.beta[k], &v));
            m.histograms.extend(histogram(&format!("{}_bar", beta_label(k)), &v, HIST_RANGE[0], HIST_RANGE[1], HIST_BINS));
        }
        let v: Vec<f64> = bars.iter().map(|t| t.gamma).collect();
        m.theta.push(summarize("debiased", "gamma", tp.gamma(), &v));
        m.histograms.extend(histogram("gamma_bar", &v, HIST_RANGE[0], HIST_RANGE[1], HIST_BINS));
    }

    for (s, cs, als) in &fits {
        let name = s.name();
        let conf: Vec<Confusion> = cs.iter().map(|c| confusion_matrix(c, &tp.c, cfg.threshold).expect("same shape")).collect();
        m.confusion.push(average_confusion(name, &conf));
        for i in 0..n {
            for j in 0..n {
                if tp.c[(i, j)] != 0.0 {
                    let v: Vec<f64> = cs.iter().map(|c| c[(i, j)]).collect();
                    m.edges.push(summarize(name, &format!("C[{},{}]", i + 1, j + 1), tp.c[(i, j)], &v));
                }
            }
            let v: Vec<f64> = als.iter().map(|a| a[i]).collect();
            m.alpha.push(summarize(name, &format!("alpha[{}]", i + 1), tp.alpha[i], &v));
        }
        m.detection.extend(detection_rates(name, cs, &tp.c, cfg.threshold));
        let separated = cs.iter().filter(|c| {
            let (on, off) = edge_separation(c, &tp.c);
            on > off
        });
        m.separation.push(SeparationRow { scenario: name.into(), replications: cs.len(), separated: separated.count() });
    }
    m
}
