//! Recovery of the type shares, marginals and copula from choice
//! probabilities at chosen prices.
//!
//! The cutoff functions are taken as known. Identification works on kinks:
//! with both CARA cutoffs equal to `v` and the dual cutoffs strictly apart,
//! the derivative of the (1,1) probability along `V_I` jumps by `α f(v)` as
//! `V_II` crosses `v`. The mirror construction along `W_II` gives `β g(w)`.

mod dataset;
mod gap;
mod matching;
mod oracle;
mod pipeline;
mod recover;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{fit_sieve, Dataset, DatasetGaps, Observation, SieveConfig, SieveFit};
pub use gap::{
    derivative_gap, derivative_in_threshold, eq2_derivative, one_sided_derivative, FiniteDifferenceGaps, GapEstimate,
    GapSource, Perturbation,
};
pub use matching::{match_prices, match_prices_eq2, match_prices_eq4, separation, Axis, MatchedPricePair};
pub use oracle::{ChoiceOracle, MonteCarloOracle};
pub use pipeline::{
    copula_grid, identify_dataset, identify_pipeline, identify_with, CopulaPoint, Eq2Point, IdentificationResult, Stage,
    StageError,
};
pub use recover::{recover_alpha_f, recover_beta_g, recover_copula, recover_marginal, MarginalRecovery, MIN_SHARE_FOR_CDF};

use crate::choice::ChoiceError;
use crate::numeric::NumericError;
use crate::preferences::{PreferenceError, ThresholdKind};

/// Why a matching condition could not be met.
#[derive(Debug, Clone, PartialEq)]
pub enum InfeasibleReason {
    Unattainable { kind: ThresholdKind, target: f64 },
    SlackTooSmall { slack: f64, slack_min: f64 },
    NeverAbove { what: &'static str, best: f64 },
    NotJointly { v_margin: f64, w_margin: f64 },
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Unattainable { kind, target } => write!(f, "{kind:?} cannot reach {target} on its price range"),
            Self::SlackTooSmall { slack, slack_min } => write!(f, "separation {slack} does not exceed {slack_min}"),
            Self::NeverAbove { what, best } => write!(f, "no price has {what} (best margin {best})"),
            Self::NotJointly { v_margin, w_margin } => {
                write!(f, "inequalities never hold together (margins {v_margin}, {w_margin})")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IdentifyError {
    #[error("level {level} infeasible: {reason}")]
    Infeasible { level: f64, reason: InfeasibleReason },
    #[error("perturbation {eps} around level {level} breaks the separation condition")]
    StepTooLarge { level: f64, eps: f64 },
    #[error("{kind:?} is flat at price {price}")]
    FlatThreshold { kind: ThresholdKind, price: f64 },
    #[error("{} coverage {coverage} below required {required}", .axis.label())]
    InsufficientCoverage { axis: Axis, coverage: f64, required: f64 },
    #[error("type-(iii) share {share} below floor {floor}")]
    DegenerateShare { share: f64, floor: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Choice(#[from] ChoiceError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Numerical settings of an identification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    /// Offset of the crossing cutoff, relative to its support bound.
    pub eps_rel: f64,
    /// Finite-difference step, relative to the differentiated price range.
    pub h_rel: f64,
    /// Required separation of the other family's cutoffs.
    pub slack_min: f64,
    /// Minimum fraction of feasible grid points.
    pub min_coverage: f64,
    /// Minimum type-(iii) share for copula recovery.
    pub copula_floor: f64,
    pub v_grid: usize,
    pub w_grid: usize,
    /// Interior points per side of the copula grid.
    pub copula_grid: usize,
    /// Resolution of the feasible-hull edge search, in cutoff units.
    pub edge_tol: f64,
    pub sieve: SieveConfig,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        Self {
            eps_rel: 1e-4,
            h_rel: 1e-6,
            slack_min: 1e-3,
            min_coverage: 0.5,
            copula_floor: 0.01,
            v_grid: 201,
            w_grid: 201,
            copula_grid: 9,
            edge_tol: 1e-7,
            sieve: SieveConfig::default(),
        }
    }
}

impl IdentifyConfig {
    pub fn validate(&self) -> Result<(), IdentifyError> {
        let bad = |m: String| Err(IdentifyError::InvalidConfig(m));
        let positive = [
            ("eps_rel", self.eps_rel),
            ("h_rel", self.h_rel),
            ("edge_tol", self.edge_tol),
            ("sieve.window_rel", self.sieve.window_rel),
        ];
        for (name, x) in positive {
            if !(x.is_finite() && x > 0.0) {
                return bad(format!("{name} must be positive, got {x}"));
            }
        }
        if !(self.h_rel < self.eps_rel) {
            return bad(format!("h_rel {} must be smaller than eps_rel {}", self.h_rel, self.eps_rel));
        }
        if !(self.slack_min.is_finite() && self.slack_min >= 0.0) {
            return bad(format!("slack_min must be non-negative, got {}", self.slack_min));
        }
        for (name, x) in [("min_coverage", self.min_coverage), ("copula_floor", self.copula_floor)] {
            if !(0.0..=1.0).contains(&x) {
                return bad(format!("{name} must lie in [0, 1], got {x}"));
            }
        }
        if self.v_grid < 2 || self.w_grid < 2 {
            return bad("v_grid and w_grid need at least 2 points".into());
        }
        if self.sieve.kink_degree == 0 {
            return bad("sieve.kink_degree must be at least 1".into());
        }
        Ok(())
    }
}
