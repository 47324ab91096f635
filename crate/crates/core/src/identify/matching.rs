use serde::{Deserialize, Serialize};

use super::{IdentifyError, InfeasibleReason};
use crate::numeric::{find_root, Bracket};
use crate::preferences::{invert_threshold, Context, Family, PricePair, ThresholdKind, ThresholdSystem};

/// Which marginal an identification run targets.
///
/// `Nu` recovers (α, F): the context-I CARA cutoff is the differentiation
/// variable, the context-II CARA cutoff is moved across it, and the dual
/// cutoffs must stay apart with `W_I > W_II`. `Omega` is the mirror for
/// (β, G): differentiate along `W_II`, move `W_I` across it, and keep
/// `V_II > V_I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    Nu,
    Omega,
}

impl Axis {
    pub fn family(self) -> Family {
        match self {
            Axis::Nu => Family::Nu,
            Axis::Omega => Family::Omega,
        }
    }

    /// Context whose price the choice probability is differentiated in.
    pub fn diff_context(self) -> Context {
        match self {
            Axis::Nu => Context::I,
            Axis::Omega => Context::II,
        }
    }

    /// Context whose cutoff is moved across the matched level.
    pub fn cross_context(self) -> Context {
        match self {
            Axis::Nu => Context::II,
            Axis::Omega => Context::I,
        }
    }

    pub fn diff_kind(self) -> ThresholdKind {
        ThresholdKind::of(self.family(), self.diff_context())
    }

    pub fn cross_kind(self) -> ThresholdKind {
        ThresholdKind::of(self.family(), self.cross_context())
    }

    /// The other family's cutoffs as `(larger, smaller)`: the first must
    /// exceed the second at a matched pair.
    pub fn separation_kinds(self) -> (ThresholdKind, ThresholdKind) {
        match self {
            Axis::Nu => (ThresholdKind::WI, ThresholdKind::WII),
            Axis::Omega => (ThresholdKind::VII, ThresholdKind::VI),
        }
    }

    pub fn bar(self, ts: &ThresholdSystem) -> f64 {
        ts.bar(self.family())
    }

    pub fn label(self) -> &'static str {
        match self {
            Axis::Nu => "nu",
            Axis::Omega => "omega",
        }
    }
}

/// A price pair at which both cutoffs of the axis family equal `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchedPricePair {
    pub prices: PricePair,
    pub level: f64,
    /// Margin of the strict inequality between the other family's cutoffs.
    pub slack: f64,
}

/// `larger - smaller` for the axis' separation pair at `prices`.
pub fn separation(ts: &ThresholdSystem, axis: Axis, prices: PricePair) -> Result<f64, IdentifyError> {
    let (big, small) = axis.separation_kinds();
    let a = ts.eval(big, prices.get(big.context()))?;
    let b = ts.eval(small, prices.get(small.context()))?;
    Ok(a - b)
}

fn invert_or_infeasible(ts: &ThresholdSystem, kind: ThresholdKind, target: f64, level: f64) -> Result<f64, IdentifyError> {
    invert_threshold(ts, kind, target).map_err(|_| IdentifyError::Infeasible {
        level,
        reason: InfeasibleReason::Unattainable { kind, target },
    })
}

/// Prices with both axis-family cutoffs equal to `level` and the other
/// family's cutoffs separated by more than `slack_min`.
pub fn match_prices(ts: &ThresholdSystem, axis: Axis, level: f64, slack_min: f64) -> Result<MatchedPricePair, IdentifyError> {
    let x_diff = invert_or_infeasible(ts, axis.diff_kind(), level, level)?;
    let x_cross = invert_or_infeasible(ts, axis.cross_kind(), level, level)?;
    let prices = PricePair::new(0.0, 0.0)
        .with(axis.diff_context(), x_diff)
        .with(axis.cross_context(), x_cross);
    let slack = separation(ts, axis, prices)?;
    if !(slack > slack_min) {
        return Err(IdentifyError::Infeasible {
            level,
            reason: InfeasibleReason::SlackTooSmall { slack, slack_min },
        });
    }
    Ok(MatchedPricePair { prices, level, slack })
}

/// The ν-axis matching: `V_I(x_I) = V_II(x_II) = v` with `W_I(x_I) > W_II(x_II)`.
/// Depends on the cutoff functions only.
pub fn match_prices_eq4(ts: &ThresholdSystem, v: f64, slack_min: f64) -> Result<MatchedPricePair, IdentifyError> {
    match_prices(ts, Axis::Nu, v, slack_min)
}

/// Two-type matching: `V_I(x_I) = v < V_II(x_II)` and `W_I(x_I) > W_II(x_II)`.
///
/// `x_I` is fixed by inversion. The first margin rises and the second falls
/// in `x_II`, so the context-II price that maximises the smaller margin is
/// where they cross; it is found by bisection.
pub fn match_prices_eq2(ts: &ThresholdSystem, v: f64, slack_min: f64) -> Result<PricePair, IdentifyError> {
    let x_i = invert_or_infeasible(ts, ThresholdKind::VI, v, v)?;
    let w_i = ts.w_i(x_i);
    let range = ts.range_ii;
    let margins = |x: f64| -> Result<(f64, f64), IdentifyError> { Ok((ts.v_ii(x)? - v, w_i - ts.w_ii(x))) };

    let (v_hi, _) = margins(range.hi)?;
    let (_, w_lo) = margins(range.lo)?;
    if v_hi <= slack_min {
        return Err(IdentifyError::Infeasible {
            level: v,
            reason: InfeasibleReason::NeverAbove {
                what: "V_II exceeding v",
                best: v_hi,
            },
        });
    }
    if w_lo <= slack_min {
        return Err(IdentifyError::Infeasible {
            level: v,
            reason: InfeasibleReason::NeverAbove {
                what: "W_I exceeding W_II",
                best: w_lo,
            },
        });
    }
    let balance = |x: f64| margins(x).map(|(a, b)| a - b).unwrap_or(f64::NAN);
    let x_ii = if balance(range.lo) >= 0.0 {
        range.lo
    } else if balance(range.hi) <= 0.0 {
        range.hi
    } else {
        find_root(balance, Bracket::new(range.lo, range.hi)?, 0.0)?
    };
    let (m1, m2) = margins(x_ii)?;
    if m1.min(m2) <= slack_min {
        return Err(IdentifyError::Infeasible {
            level: v,
            reason: InfeasibleReason::NotJointly {
                v_margin: m1,
                w_margin: m2,
            },
        });
    }
    Ok(PricePair::new(x_i, x_ii))
}
