//! The staged pipeline: joint fit, de-biasing of θ, refit of (C, α) at the
//! corrected θ, with tuning and diagnostics collected into one report.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvOptions, CvResult};
use super::debias::{fitted_params, stage2_debias, stage3_fit, DebiasResult, SigmaRule, Stage3Result};
use super::diagnostics::{compatibility_diagnostic, residual_check};
use super::stage1::{stage1_fit, FitData, Stage1Options, Stage1Result};
use super::tuning::{theory_tuning, TuningConstants, TuningValues};
use crate::error::{dim_check, Error, Result};
use crate::model::{CovariateField, EventLog, Horizon, Theta};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stages {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "12")]
    OneTwo,
    #[serde(rename = "123")]
    All,
}

impl std::str::FromStr for Stages {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(Self::One),
            "12" => Ok(Self::OneTwo),
            "123" => Ok(Self::All),
            _ => Err(Error::InvalidInput(format!("stages must be 1, 12 or 123, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum OmegaSource {
    Theory,
    Cv,
    Explicit { omega: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub stages: Stages,
    pub omega: OmegaSource,
    pub horizon: Horizon,
    pub stage1: Stage1Options,
    pub sigma_rule: SigmaRule,
    pub tuning: TuningConstants,
    pub cv: CvOptions,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            stages: Stages::All,
            omega: OmegaSource::Cv,
            horizon: Horizon::default(),
            stage1: Stage1Options::default(),
            sigma_rule: SigmaRule::default(),
            tuning: TuningConstants::default(),
            cv: CvOptions::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.stage1.validate()?;
        self.tuning.validate()?;
        if !(self.sigma_rule.c > 0.0) {
            return Err(Error::InvalidInput("sigma rule constant must be positive".into()));
        }
        if let OmegaSource::Explicit { omega } = &self.omega {
            if omega.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return Err(Error::InvalidInput("explicit omega must be finite and non-negative".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Per-node smallest eigenvalue of the row Gram block at the final θ.
    pub compatibility: Vec<f64>,
    /// `N_i(T) − ∫λ_i` at the final estimates.
    pub residuals: Vec<f64>,
    pub rows_polished: usize,
    pub rows_non_monotone: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub stages: Stages,
    pub omega: Vec<f64>,
    pub tuning: Option<TuningValues>,
    pub cv: Option<CvResult>,
    pub stage1: Stage1Result,
    pub debias: Option<DebiasResult>,
    pub stage3: Option<Stage3Result>,
    /// Final estimates from the last stage run.
    pub theta: Theta,
    #[serde(with = "crate::serde_matrix")]
    pub c: DMatrix<f64>,
    pub alpha: Vec<f64>,
    /// θ̄ left the box and was projected back before the refit.
    pub clipped: bool,
    /// θ coordinates whose de-biasing row had τ ≤ 0.
    pub flagged_rows: Vec<usize>,
    pub diagnostics: Diagnostics,
}

/// Penalty levels from the configured source.
pub fn select_omega(data: &FitData, cfg: &FitConfig) -> Result<(Vec<f64>, Option<TuningValues>, Option<CvResult>)> {
    match &cfg.omega {
        OmegaSource::Explicit { omega } => {
            dim_check("explicit omega length", data.n(), omega.len())?;
            Ok((omega.clone(), None, None))
        }
        OmegaSource::Theory => {
            let t = theory_tuning(data, None, &cfg.tuning)?;
            Ok((t.omega.clone(), Some(t), None))
        }
        OmegaSource::Cv => {
            let r = cross_validate(data, &cfg.cv, &cfg.stage1, &cfg.tuning)?;
            Ok((r.omega.clone(), Some(r.theory.clone()), Some(r)))
        }
    }
}

pub fn fit(events: &EventLog, covariates: &CovariateField, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let data = FitData::new(events, covariates, cfg.horizon)?;
    let (omega, tuning, cv) = select_omega(&data, cfg)?;
    fit_with_omega(&data, cfg, omega, tuning, cv)
}

pub fn fit_with_omega(
    data: &FitData,
    cfg: &FitConfig,
    omega: Vec<f64>,
    tuning: Option<TuningValues>,
    cv: Option<CvResult>,
) -> Result<FitReport> {
    let s1 = stage1_fit(data, &omega, &cfg.stage1)?;
    let debias = match cfg.stages {
        Stages::One => None,
        _ => Some(stage2_debias(&s1, data, cfg.sigma_rule)?),
    };
    let stage3 = match (&cfg.stages, &debias) {
        (Stages::All, Some(d)) => Some(stage3_fit(
            data,
            &d.theta_bar,
            &omega,
            &cfg.stage1.theta_box,
            cfg.stage1.row_options(cfg.stage1.tol1.min(1e-8)),
        )?),
        _ => None,
    };
    let (theta, c, alpha, rows) = match (&stage3, &debias) {
        (Some(s3), _) => (s3.theta.clone(), s3.c.clone(), s3.alpha.clone(), &s3.rows),
        (None, Some(d)) => (d.theta_bar.clone(), s1.c.clone(), s1.alpha.clone(), &s1.rows),
        (None, None) => (s1.theta.clone(), s1.c.clone(), s1.alpha.clone(), &s1.rows),
    };
    let (theta_final, _) = cfg.stage1.theta_box.clip(&theta);
    let stats = data.stats(&theta_final)?;
    let compatibility = (0..data.n()).map(|i| compatibility_diagnostic(&stats, i)).collect::<Result<_>>()?;
    let params = fitted_params(data, &theta_final, &c, &alpha)?;
    let residuals = residual_check(data.events, data.covariates, &params)?;
    let diagnostics = Diagnostics {
        compatibility,
        residuals,
        rows_polished: rows.iter().filter(|r| r.polished).count(),
        rows_non_monotone: rows.iter().filter(|r| !r.monotone).count(),
    };
    let flagged_rows = debias.as_ref().map(|d| d.rows.iter().filter(|r| r.flagged).map(|r| r.index).collect()).unwrap_or_default();
    let clipped = stage3.as_ref().is_some_and(|s| s.clipped);
    Ok(FitReport {
        stages: cfg.stages,
        omega,
        tuning,
        cv,
        stage1: s1,
        debias,
        stage3,
        theta,
        c,
        alpha,
        clipped,
        flagged_rows,
        diagnostics,
    })
}
