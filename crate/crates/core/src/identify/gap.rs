use serde::Serialize;

use super::matching::{match_prices, separation, Axis, MatchedPricePair};
use super::oracle::ChoiceOracle;
use super::{IdentifyConfig, IdentifyError, InfeasibleReason};
use crate::numeric::{directional_diff, DiffConfig, Side};
use crate::preferences::{invert_threshold, PricePair, ThresholdSystem};

/// Perturbation sizes in absolute units for one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perturbation {
    /// Offset of the crossing cutoff, in cutoff units.
    pub eps: f64,
    /// Finite-difference step in the differentiated price.
    pub h: f64,
}

impl Perturbation {
    pub fn for_axis(ts: &ThresholdSystem, axis: Axis, cfg: &IdentifyConfig) -> Self {
        Self {
            eps: cfg.eps_rel * axis.bar(ts),
            h: cfg.h_rel * ts.range(axis.diff_context()).width(),
        }
    }
}

/// `∂P/∂T` at `prices`, where `T` is the axis' differentiated cutoff:
/// `(∂P/∂x)/(dT/dx)` with both factors by central differences of step `h`
/// in the differentiated context's price.
pub fn derivative_in_threshold<O: ChoiceOracle + ?Sized>(
    oracle: &O,
    ts: &ThresholdSystem,
    axis: Axis,
    prices: PricePair,
    h: f64,
) -> Result<f64, IdentifyError> {
    let ctx = axis.diff_context();
    let kind = axis.diff_kind();
    let x = prices.get(ctx);
    let mut failure = None;
    let mut dp_fn = |z: f64| match oracle.prob_11(prices.with(ctx, z)) {
        Ok(p) => p,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let dp = directional_diff(&mut dp_fn, x, DiffConfig::central(h));
    if let Some(e) = failure {
        return Err(e);
    }
    let dp = dp?;
    let dt = directional_diff(|z| ts.eval(kind, z).unwrap_or(f64::NAN), x, DiffConfig::central(h))?;
    if !(dt > 0.0) {
        return Err(IdentifyError::FlatThreshold { kind, price: x });
    }
    Ok(dp / dt)
}

/// One-sided limit of `∂P/∂T` as the crossing cutoff approaches the matched
/// level from above (`Side::Right`) or below (`Side::Left`). The crossing
/// context's price is moved so that its cutoff sits at `level ± eps`.
pub fn one_sided_derivative<O: ChoiceOracle + ?Sized>(
    oracle: &O,
    ts: &ThresholdSystem,
    axis: Axis,
    matched: &MatchedPricePair,
    side: Side,
    pert: Perturbation,
) -> Result<(f64, PricePair), IdentifyError> {
    let target = match side {
        Side::Right => matched.level + pert.eps,
        Side::Left => matched.level - pert.eps,
        Side::Central => matched.level,
    };
    let cross_kind = axis.cross_kind();
    let x_cross = invert_threshold(ts, cross_kind, target).map_err(|_| IdentifyError::Infeasible {
        level: matched.level,
        reason: InfeasibleReason::Unattainable {
            kind: cross_kind,
            target,
        },
    })?;
    let prices = matched.prices.with(axis.cross_context(), x_cross);
    if !(separation(ts, axis, prices)? > 0.0) {
        return Err(IdentifyError::StepTooLarge {
            level: matched.level,
            eps: pert.eps,
        });
    }
    Ok((derivative_in_threshold(oracle, ts, axis, prices, pert.h)?, prices))
}

/// Result of one discontinuity measurement. `gap` is `None` when the level
/// was infeasible.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapEstimate {
    pub level: f64,
    pub gap: Option<f64>,
    pub slack: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
    #[serde(skip)]
    pub reason: Option<IdentifyError>,
}

impl GapEstimate {
    pub fn feasible(&self) -> bool {
        self.gap.is_some()
    }

    pub fn infeasible(level: f64, reason: IdentifyError) -> Self {
        Self {
            level,
            gap: None,
            slack: None,
            left: None,
            right: None,
            reason: Some(reason),
        }
    }
}

/// Right minus left one-sided derivative at `level`. Failures mark the
/// estimate infeasible instead of propagating.
pub fn derivative_gap<O: ChoiceOracle + ?Sized>(
    oracle: &O,
    ts: &ThresholdSystem,
    axis: Axis,
    level: f64,
    cfg: &IdentifyConfig,
) -> GapEstimate {
    let pert = Perturbation::for_axis(ts, axis, cfg);
    let run = || -> Result<GapEstimate, IdentifyError> {
        let matched = match_prices(ts, axis, level, cfg.slack_min)?;
        let (right, _) = one_sided_derivative(oracle, ts, axis, &matched, Side::Right, pert)?;
        let (left, _) = one_sided_derivative(oracle, ts, axis, &matched, Side::Left, pert)?;
        Ok(GapEstimate {
            level,
            gap: Some(right - left),
            slack: Some(matched.slack),
            left: Some(left),
            right: Some(right),
            reason: None,
        })
    };
    run().unwrap_or_else(|e| GapEstimate::infeasible(level, e))
}

/// Source of gap measurements along an axis.
pub trait GapSource: Sync {
    fn gap(&self, axis: Axis, level: f64) -> GapEstimate;
}

/// Gaps from finite differences of an oracle's probabilities.
pub struct FiniteDifferenceGaps<'a, O: ChoiceOracle + ?Sized> {
    pub oracle: &'a O,
    pub ts: &'a ThresholdSystem,
    pub cfg: &'a IdentifyConfig,
}

impl<O: ChoiceOracle + ?Sized> GapSource for FiniteDifferenceGaps<'_, O> {
    fn gap(&self, axis: Axis, level: f64) -> GapEstimate {
        derivative_gap(self.oracle, self.ts, axis, level, self.cfg)
    }
}

/// The two-type derivative identity: at prices with `V_I = v < V_II` and
/// `W_I > W_II`, `∂P/∂V_I` equals `α f(v)` (times the full-attention mass).
pub fn eq2_derivative<O: ChoiceOracle + ?Sized>(
    oracle: &O,
    ts: &ThresholdSystem,
    v: f64,
    cfg: &IdentifyConfig,
) -> Result<(f64, PricePair), IdentifyError> {
    let prices = super::matching::match_prices_eq2(ts, v, cfg.slack_min)?;
    let h = Perturbation::for_axis(ts, Axis::Nu, cfg).h;
    Ok((derivative_in_threshold(oracle, ts, Axis::Nu, prices, h)?, prices))
}
