//! Convergence-rate study of `E sup|x^β - y|²` over a grid of `β`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{compute_ledger, BoundCheck, BoundLedger};
use crate::coupling::{coupled_simulate, CoupledRun};
use crate::ensemble::SimConfig;
use crate::error::{param, Error, Result};
use crate::stats::fit_line;

/// Accepted band for the fitted log-log slope. The zero-kernel error behaves
/// like `log(βT)/β`, so exactly `-1` is not expected at these sizes.
pub const SLOPE_BAND: (f64, f64) = (-1.2, -0.75);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NStepsPolicy {
    #[default]
    Fixed,
    /// `n_steps = max(base, ceil(β T))`, so that `βh ≤ 1`.
    ScaleWithBeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub beta_grid: Vec<f64>,
    /// `base.beta` is ignored.
    pub base: SimConfig,
    pub n_steps_policy: NStepsPolicy,
    pub output_dir: PathBuf,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beta_grid.len() < 3 {
            return Err(param(
                "beta_grid",
                format!("rate fit needs at least 3 values, got {}", self.beta_grid.len()),
            ));
        }
        if self.beta_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(param("beta_grid", "must be strictly increasing"));
        }
        if self.beta_grid.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(param("beta_grid", "entries must be finite and > 0"));
        }
        Ok(())
    }

    pub fn n_steps_for(&self, beta: f64) -> usize {
        match self.n_steps_policy {
            NStepsPolicy::Fixed => self.base.n_steps,
            NStepsPolicy::ScaleWithBeta => self.base.n_steps.max((beta * self.base.t_end).ceil() as usize),
        }
    }

    pub fn sim_config(&self, beta: f64) -> SimConfig {
        SimConfig {
            beta,
            n_steps: self.n_steps_for(beta),
            ..self.base.clone()
        }
    }

    pub fn ledger(&self) -> Result<BoundLedger> {
        compute_ledger(self.base.init.m, self.base.kernel.kappa(), self.base.t_end)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaPoint {
    pub beta: f64,
    pub n_steps: usize,
    pub error_mean: f64,
    pub ci_halfwidth: f64,
    pub bound_printed: f64,
    pub bound_sharp: f64,
    pub ln_bound_printed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Fit weighted by the inverse variance of `log(error_mean)`.
    pub weighted_slope: f64,
    pub per_beta: Vec<BetaPoint>,
}

impl RateFit {
    pub fn slope_in_band(&self) -> bool {
        self.slope >= SLOPE_BAND.0 && self.slope <= SLOPE_BAND.1
    }

    /// Every error mean at or below the as-printed bound.
    pub fn bound_dominance(&self) -> bool {
        self.per_beta.iter().all(|p| p.error_mean <= p.bound_printed)
    }

    /// Consecutive error means decrease, or their confidence intervals overlap.
    pub fn decreasing_up_to_overlap(&self) -> bool {
        self.per_beta.windows(2).all(|w| {
            let (a, b) = (&w[0], &w[1]);
            b.error_mean < a.error_mean || b.error_mean - b.ci_halfwidth <= a.error_mean + a.ci_halfwidth
        })
    }
}

pub fn run_convergence_study(study: &StudyConfig) -> Result<RateFit> {
    run_convergence_study_with(study, |_| Ok(()))
}

/// Like [`run_convergence_study`], handing each coupled run to `on_run`
/// before it is dropped.
pub fn run_convergence_study_with(
    study: &StudyConfig,
    mut on_run: impl FnMut(&CoupledRun) -> Result<()>,
) -> Result<RateFit> {
    study.validate()?;
    let ledger = study.ledger()?;
    let mut per_beta = Vec::with_capacity(study.beta_grid.len());
    for &beta in &study.beta_grid {
        let labeled = |e: Error| Error::Study {
            beta,
            source: Box::new(e),
        };
        let config = study.sim_config(beta);
        let run = coupled_simulate(&config).map_err(labeled)?;
        let est = run.estimate().map_err(labeled)?;
        on_run(&run).map_err(labeled)?;
        let printed = ledger.strong_error_bound(beta);
        per_beta.push(BetaPoint {
            beta,
            n_steps: config.n_steps,
            error_mean: est.mean,
            ci_halfwidth: est.confidence_halfwidth_95,
            bound_printed: printed.value,
            bound_sharp: ledger.strong_error_bound_sharp(beta).value,
            ln_bound_printed: printed.ln,
        });
    }
    fit_points(per_beta)
}

/// Log-log fits over the entries with a positive error mean.
pub fn fit_points(per_beta: Vec<BetaPoint>) -> Result<RateFit> {
    let used: Vec<&BetaPoint> = per_beta.iter().filter(|p| p.error_mean > 0.0).collect();
    if used.len() < 2 {
        return Err(param("beta_grid", "fewer than two positive error means to fit"));
    }
    let lx: Vec<f64> = used.iter().map(|p| p.beta.ln()).collect();
    let ly: Vec<f64> = used.iter().map(|p| p.error_mean.ln()).collect();
    let w: Vec<f64> = used
        .iter()
        .map(|p| {
            let rel = p.ci_halfwidth / 1.96 / p.error_mean;
            if rel > 0.0 {
                1.0 / (rel * rel)
            } else {
                1.0
            }
        })
        .collect();
    let plain = fit_line(&lx, &ly, None)?;
    let weighted = fit_line(&lx, &ly, Some(&w))?;
    Ok(RateFit {
        slope: plain.slope,
        intercept: plain.intercept,
        r_squared: plain.r_squared,
        weighted_slope: weighted.slope,
        per_beta,
    })
}

/// Error mean at the largest `β` with `n_steps` and `2·n_steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub beta: f64,
    pub n_steps: usize,
    pub error_mean: f64,
    pub error_mean_refined: f64,
    pub ci_halfwidth: f64,
    pub passes: bool,
}

pub fn grid_sensitivity(study: &StudyConfig) -> Result<GridCheck> {
    study.validate()?;
    let beta = *study.beta_grid.last().expect("validated");
    let coarse = study.sim_config(beta);
    let fine = SimConfig {
        n_steps: 2 * coarse.n_steps,
        ..coarse.clone()
    };
    let a = coupled_simulate(&coarse)?.estimate()?;
    let b = coupled_simulate(&fine)?.estimate()?;
    Ok(GridCheck {
        beta,
        n_steps: coarse.n_steps,
        error_mean: a.mean,
        error_mean_refined: b.mean,
        ci_halfwidth: a.confidence_halfwidth_95,
        passes: (a.mean - b.mean).abs() < a.confidence_halfwidth_95,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary<'a> {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub weighted_slope: f64,
    pub slope_band: [f64; 2],
    pub slope_in_band: bool,
    pub bound_dominance: bool,
    pub decreasing_up_to_overlap: bool,
    pub grid_check: Option<&'a GridCheck>,
    pub ledger: &'a BoundLedger,
    pub validations: &'a [BoundCheck],
    pub passes: bool,
}

impl<'a> StudySummary<'a> {
    pub fn new(fit: &RateFit, ledger: &'a BoundLedger, validations: &'a [BoundCheck], grid_check: Option<&'a GridCheck>) -> Self {
        let passes = fit.slope_in_band()
            && fit.bound_dominance()
            && fit.decreasing_up_to_overlap()
            && grid_check.is_none_or(|g| g.passes)
            && validations.iter().all(|v| v.passes);
        Self {
            slope: fit.slope,
            intercept: fit.intercept,
            r_squared: fit.r_squared,
            weighted_slope: fit.weighted_slope,
            slope_band: [SLOPE_BAND.0, SLOPE_BAND.1],
            slope_in_band: fit.slope_in_band(),
            bound_dominance: fit.bound_dominance(),
            decreasing_up_to_overlap: fit.decreasing_up_to_overlap(),
            grid_check,
            ledger,
            validations,
            passes,
        }
    }
}

pub fn write_study_csv(fit: &RateFit, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["beta", "error_mean", "ci_halfwidth", "bound_printed", "bound_sharp"])?;
    for p in &fit.per_beta {
        w.serialize((p.beta, p.error_mean, p.ci_halfwidth, p.bound_printed, p.bound_sharp))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `study.csv` and `summary.json` into `dir`; returns the paths and
/// whether every check in the summary passed.
pub fn emit_report(
    fit: &RateFit,
    ledger: &BoundLedger,
    validations: &[BoundCheck],
    grid_check: Option<&GridCheck>,
    dir: &Path,
) -> Result<(Vec<PathBuf>, bool)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("study.csv");
    write_study_csv(fit, &csv_path)?;
    let summary = StudySummary::new(fit, ledger, validations, grid_check);
    let json_path = dir.join("summary.json");
    fs::write(&json_path, serde_json::to_string_pretty(&summary)?)?;
    Ok((vec![csv_path, json_path], summary.passes))
}
