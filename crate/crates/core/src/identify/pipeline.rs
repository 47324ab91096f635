use serde::Serialize;

use super::dataset::{Dataset, DatasetGaps};
use super::gap::{eq2_derivative, FiniteDifferenceGaps, GapSource};
use super::matching::Axis;
use super::oracle::ChoiceOracle;
use super::recover::{recover_copula, recover_marginal, MarginalRecovery};
use super::{IdentifyConfig, IdentifyError};
use crate::choice::Scenario;
use crate::numeric::linspace;
use crate::preferences::{PricePair, ThresholdSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    AlphaF,
    BetaG,
    Copula,
    Eq2Baseline,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: Stage,
    pub error: IdentifyError,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopulaPoint {
    pub u: f64,
    pub v: f64,
    pub c_hat: Option<f64>,
    pub c_true: Option<f64>,
}

/// Two-type derivative at one level: `∂P/∂V_I` with `V_I = v < V_II`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eq2Point {
    pub v: f64,
    pub derivative: Option<f64>,
    pub prices: Option<PricePair>,
}

#[derive(Debug, Clone)]
pub struct IdentificationResult {
    pub f: MarginalRecovery,
    pub g: MarginalRecovery,
    /// The ν-axis leading constant: α times the full-attention mass.
    pub alpha_times_o_hat: Option<f64>,
    /// The leading constant itself when attention is assumed full.
    pub alpha_hat: Option<f64>,
    pub beta_times_o_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub copula: Vec<CopulaPoint>,
    pub eq2: Vec<Eq2Point>,
    pub errors: Vec<StageError>,
}

impl IdentificationResult {
    pub fn coverage_f(&self) -> f64 {
        self.f.coverage
    }

    pub fn coverage_g(&self) -> f64 {
        self.g.coverage
    }

    pub fn error_for(&self, stage: Stage) -> Option<&IdentifyError> {
        self.errors.iter().find(|e| e.stage == stage).map(|e| &e.error)
    }

    /// Sup-norm copula error over grid points with both values present.
    pub fn copula_sup_error(&self) -> Option<f64> {
        self.copula
            .iter()
            .filter_map(|p| Some((p.c_hat? - p.c_true?).abs()))
            .reduce(f64::max)
    }
}

/// Interior grid `k/(n+1)`, `k = 1..=n`, in both coordinates.
pub fn copula_grid(n: usize) -> Vec<(f64, f64)> {
    let pts: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
    pts.iter().flat_map(|&u| pts.iter().map(move |&v| (u, v))).collect()
}

/// Runs both marginal recoveries from `source` and, when an `oracle` is
/// given, the copula and two-type baseline stages. `truth` only supplies the
/// reference copula values and never enters the estimates.
///
/// `full_attention` states whether the analyst assumes full consideration;
/// without it only the products with the full-attention mass are reported
/// and the copula stage is skipped.
pub fn identify_with(
    source: &dyn GapSource,
    oracle: Option<&dyn ChoiceOracle>,
    ts: &ThresholdSystem,
    truth: Option<&Scenario>,
    full_attention: bool,
    cfg: &IdentifyConfig,
) -> Result<IdentificationResult, IdentifyError> {
    cfg.validate()?;
    let v_grid = linspace(0.0, ts.nu_bar, cfg.v_grid);
    let w_grid = linspace(0.0, ts.omega_bar, cfg.w_grid);
    let f = recover_marginal(source, Axis::Nu, &v_grid, cfg)?;
    let g = recover_marginal(source, Axis::Omega, &w_grid, cfg)?;
    let mut errors = Vec::new();

    let mut leading = |r: &MarginalRecovery, stage| match r.check_coverage(cfg.min_coverage) {
        Ok(()) => r.share_hat,
        Err(error) => {
            errors.push(StageError { stage, error });
            None
        }
    };
    let alpha_times_o_hat = leading(&f, Stage::AlphaF);
    let beta_times_o_hat = leading(&g, Stage::BetaG);
    let alpha_hat = alpha_times_o_hat.filter(|_| full_attention);
    let beta_hat = beta_times_o_hat.filter(|_| full_attention);

    let c_true = |u: f64, v: f64| truth.map(|sc| sc.mix.copula.cdf(u, v));
    let mut copula: Vec<CopulaPoint> = copula_grid(cfg.copula_grid)
        .into_iter()
        .map(|(u, v)| CopulaPoint {
            u,
            v,
            c_hat: None,
            c_true: c_true(u, v),
        })
        .collect();
    let mut eq2 = Vec::new();

    match oracle {
        Some(oracle) => {
            if !full_attention {
                errors.push(StageError {
                    stage: Stage::Copula,
                    error: IdentifyError::InvalidConfig("copula recovery requires full attention".into()),
                });
            } else if alpha_hat.is_some() && beta_hat.is_some() {
                let mut first_err = None;
                for p in copula.iter_mut() {
                    match recover_copula(oracle, ts, p.u, p.v, &f, &g, cfg.copula_floor) {
                        Ok(c) => p.c_hat = Some(c),
                        Err(e) => {
                            first_err.get_or_insert(e);
                        }
                    }
                }
                if let Some(error) = first_err {
                    errors.push(StageError {
                        stage: Stage::Copula,
                        error,
                    });
                }
            }
            let mut eq2_err = None;
            for &v in &v_grid {
                let point = match eq2_derivative(oracle, ts, v, cfg) {
                    Ok((d, prices)) => Eq2Point {
                        v,
                        derivative: Some(d),
                        prices: Some(prices),
                    },
                    Err(e) => {
                        eq2_err.get_or_insert(e);
                        Eq2Point {
                            v,
                            derivative: None,
                            prices: None,
                        }
                    }
                };
                eq2.push(point);
            }
            if eq2.iter().all(|p| p.derivative.is_none()) {
                if let Some(error) = eq2_err {
                    errors.push(StageError {
                        stage: Stage::Eq2Baseline,
                        error,
                    });
                }
            }
        }
        None => errors.push(StageError {
            stage: Stage::Copula,
            error: IdentifyError::InvalidConfig("copula recovery needs choice probabilities, not a dataset".into()),
        }),
    }

    Ok(IdentificationResult {
        f,
        g,
        alpha_times_o_hat,
        alpha_hat,
        beta_times_o_hat,
        beta_hat,
        copula,
        eq2,
        errors,
    })
}

/// The full pipeline on exact model probabilities.
pub fn identify_pipeline(sc: &Scenario, cfg: &IdentifyConfig) -> Result<IdentificationResult, IdentifyError> {
    let source = FiniteDifferenceGaps {
        oracle: sc,
        ts: &sc.ts,
        cfg,
    };
    identify_with(&source, Some(sc), &sc.ts, Some(sc), sc.consideration.is_full_attention(), cfg)
}

/// Marginal recovery from observed choices. The copula stage needs
/// probabilities at designed prices and is not run.
pub fn identify_dataset(
    data: &Dataset,
    sc: &Scenario,
    cfg: &IdentifyConfig,
) -> Result<IdentificationResult, IdentifyError> {
    cfg.validate()?;
    let source = DatasetGaps::fit(data, &sc.ts, cfg);
    identify_with(&source, None, &sc.ts, Some(sc), sc.consideration.is_full_attention(), cfg)
}
