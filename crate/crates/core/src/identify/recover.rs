use rayon::prelude::*;
use serde::Serialize;

use super::gap::{GapEstimate, GapSource};
use super::matching::Axis;
use super::oracle::ChoiceOracle;
use super::{IdentifyConfig, IdentifyError, InfeasibleReason};
use crate::numeric::{cumulative_trapezoid, interp_linear};
use crate::preferences::{invert_threshold, PricePair, ThresholdKind, ThresholdSystem};

/// Below this recovered share the marginal cdf is not reported: dividing by
/// it would only amplify finite-difference noise.
pub const MIN_SHARE_FOR_CDF: f64 = 1e-6;

/// A recovered (share, marginal) pair along one axis.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalRecovery {
    pub axis: Axis,
    /// Integral of the gap over the feasible hull: the type share, times the
    /// full-attention mass under limited consideration. `None` without any
    /// feasible point.
    pub share_hat: Option<f64>,
    /// The requested grid and the measurement at each point.
    pub grid: Vec<f64>,
    pub gaps: Vec<GapEstimate>,
    /// Recovered cdf at each grid point; `None` outside the feasible hull.
    pub cdf_hat: Vec<Option<f64>>,
    /// Fraction of grid points where the matching condition held.
    pub coverage: f64,
    /// Integration nodes: feasible hull, interior gaps filled by
    /// interpolation, plus any refined edge points.
    pub nodes: Vec<(f64, f64)>,
    /// Recovered cdf at the nodes.
    pub node_cdf: Vec<f64>,
}

impl MarginalRecovery {
    pub fn hull(&self) -> Option<(f64, f64)> {
        Some((self.nodes.first()?.0, self.nodes.last()?.0))
    }

    /// Recovered cdf at `x`: 0 below the hull, 1 above it.
    pub fn cdf_at(&self, x: f64) -> Option<f64> {
        if self.node_cdf.is_empty() {
            return None;
        }
        let xs: Vec<f64> = self.nodes.iter().map(|n| n.0).collect();
        Some(interp_linear(&xs, &self.node_cdf, x))
    }

    /// Smallest node-interpolated point where the recovered cdf reaches `p`.
    pub fn quantile(&self, p: f64) -> Option<f64> {
        let c = &self.node_cdf;
        if c.is_empty() {
            return None;
        }
        let k = c.iter().position(|&y| y >= p)?;
        if k == 0 {
            return Some(self.nodes[0].0);
        }
        let (x0, x1) = (self.nodes[k - 1].0, self.nodes[k].0);
        let (y0, y1) = (c[k - 1], c[k]);
        if y1 <= y0 {
            return Some(x1);
        }
        Some(x0 + (p - y0) / (y1 - y0) * (x1 - x0))
    }

    pub fn check_coverage(&self, min_coverage: f64) -> Result<(), IdentifyError> {
        if self.coverage < min_coverage || self.share_hat.is_none() {
            Err(IdentifyError::InsufficientCoverage {
                axis: self.axis,
                coverage: self.coverage,
                required: min_coverage,
            })
        } else {
            Ok(())
        }
    }
}

/// Bisects between an infeasible level and a feasible one until they are
/// `tol` apart and returns the measurement at the feasible end.
fn refine_edge<S: GapSource + ?Sized>(
    source: &S,
    axis: Axis,
    mut infeasible: f64,
    mut feasible: GapEstimate,
    tol: f64,
) -> GapEstimate {
    while (feasible.level - infeasible).abs() > tol {
        let mid = 0.5 * (feasible.level + infeasible);
        let est = source.gap(axis, mid);
        if est.feasible() {
            feasible = est;
        } else {
            infeasible = mid;
        }
    }
    feasible
}

/// Measures the gap along `grid`, integrates it over the feasible hull and
/// normalises the running integral into a cdf.
///
/// Interior infeasible points get their gap by linear interpolation between
/// feasible neighbours. Outside the hull nothing is filled in; when the hull
/// stops short of a grid end, its edge is located by bisection to within
/// `cfg.edge_tol` and measured there, so the integral reaches as far as the
/// matching condition allows.
pub fn recover_marginal<S: GapSource + ?Sized>(
    source: &S,
    axis: Axis,
    grid: &[f64],
    cfg: &IdentifyConfig,
) -> Result<MarginalRecovery, IdentifyError> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(IdentifyError::InvalidConfig("grid must be strictly increasing with at least 2 points".into()));
    }
    let gaps: Vec<GapEstimate> = grid.par_iter().map(|&l| source.gap(axis, l)).collect();
    let feasible: Vec<usize> = (0..grid.len()).filter(|&i| gaps[i].feasible()).collect();
    let coverage = feasible.len() as f64 / grid.len() as f64;

    let empty = MarginalRecovery {
        axis,
        share_hat: None,
        grid: grid.to_vec(),
        gaps: gaps.clone(),
        cdf_hat: vec![None; grid.len()],
        coverage,
        nodes: Vec::new(),
        node_cdf: Vec::new(),
    };
    let (Some(&first), Some(&last)) = (feasible.first(), feasible.last()) else {
        return Ok(empty);
    };

    let feasible_levels: Vec<f64> = feasible.iter().map(|&i| grid[i]).collect();
    let feasible_gaps: Vec<f64> = feasible.iter().map(|&i| gaps[i].gap.unwrap_or(0.0)).collect();
    let mut nodes: Vec<(f64, f64)> = Vec::new();
    if first > 0 {
        let edge = refine_edge(source, axis, grid[first - 1], gaps[first].clone(), cfg.edge_tol);
        if edge.level < grid[first] {
            nodes.push((edge.level, edge.gap.unwrap_or(0.0)));
        }
    }
    for i in first..=last {
        let g = gaps[i]
            .gap
            .unwrap_or_else(|| interp_linear(&feasible_levels, &feasible_gaps, grid[i]));
        nodes.push((grid[i], g));
    }
    if last + 1 < grid.len() {
        let edge = refine_edge(source, axis, grid[last + 1], gaps[last].clone(), cfg.edge_tol);
        if edge.level > grid[last] {
            nodes.push((edge.level, edge.gap.unwrap_or(0.0)));
        }
    }

    if nodes.len() < 2 {
        return Ok(MarginalRecovery {
            nodes,
            ..empty
        });
    }
    let cum = cumulative_trapezoid(&nodes)?;
    let share = *cum.last().unwrap_or(&0.0);
    let node_cdf: Vec<f64> = if share > MIN_SHARE_FOR_CDF {
        let mut running: f64 = 0.0;
        cum.iter()
            .map(|c| {
                running = running.max(c / share);
                running.clamp(0.0, 1.0)
            })
            .collect()
    } else {
        Vec::new()
    };
    let (lo, hi) = (nodes[0].0, nodes[nodes.len() - 1].0);
    let xs: Vec<f64> = nodes.iter().map(|n| n.0).collect();
    let cdf_hat = grid
        .iter()
        .map(|&x| {
            if node_cdf.is_empty() || x < lo || x > hi {
                None
            } else {
                Some(interp_linear(&xs, &node_cdf, x))
            }
        })
        .collect();
    Ok(MarginalRecovery {
        axis,
        share_hat: Some(share),
        grid: grid.to_vec(),
        gaps,
        cdf_hat,
        coverage,
        nodes,
        node_cdf,
    })
}

/// (α, F) from the ν-axis gaps; fails when coverage is below the minimum.
pub fn recover_alpha_f<S: GapSource + ?Sized>(
    source: &S,
    v_grid: &[f64],
    cfg: &IdentifyConfig,
) -> Result<MarginalRecovery, IdentifyError> {
    let r = recover_marginal(source, Axis::Nu, v_grid, cfg)?;
    r.check_coverage(cfg.min_coverage)?;
    Ok(r)
}

/// (β, G) from the mirrored ω-axis gaps.
pub fn recover_beta_g<S: GapSource + ?Sized>(
    source: &S,
    w_grid: &[f64],
    cfg: &IdentifyConfig,
) -> Result<MarginalRecovery, IdentifyError> {
    let r = recover_marginal(source, Axis::Omega, w_grid, cfg)?;
    r.check_coverage(cfg.min_coverage)?;
    Ok(r)
}

/// Recovered copula value at `(u, v)` from one probability evaluation.
///
/// Prices are set so that `V_I(x_I) = F̂⁻¹(u)` and `W_II(x_II) = Ĝ⁻¹(v)`; the
/// two single-family terms of the three-type probability are evaluated with
/// the recovered shares and marginals at the actual cutoffs and subtracted.
/// When `V_I < V_II` and `W_I > W_II` at those prices this is
/// `(P − α̂u − β̂v)/(1 − α̂ − β̂)`.
pub fn recover_copula<O: ChoiceOracle + ?Sized>(
    oracle: &O,
    ts: &ThresholdSystem,
    u: f64,
    v: f64,
    f_hat: &MarginalRecovery,
    g_hat: &MarginalRecovery,
    copula_floor: f64,
) -> Result<f64, IdentifyError> {
    let (alpha, beta) = match (f_hat.share_hat, g_hat.share_hat) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(IdentifyError::InsufficientCoverage {
                axis: if f_hat.share_hat.is_none() { Axis::Nu } else { Axis::Omega },
                coverage: f_hat.coverage.min(g_hat.coverage),
                required: 0.0,
            })
        }
    };
    let gamma = 1.0 - alpha - beta;
    if !(gamma >= copula_floor) {
        return Err(IdentifyError::DegenerateShare {
            share: gamma,
            floor: copula_floor,
        });
    }
    let missing = |axis| IdentifyError::InsufficientCoverage {
        axis,
        coverage: 0.0,
        required: 0.0,
    };
    let nu = f_hat.quantile(u).ok_or_else(|| missing(Axis::Nu))?;
    let omega = g_hat.quantile(v).ok_or_else(|| missing(Axis::Omega))?;
    let price = |kind: ThresholdKind, target: f64| {
        invert_threshold(ts, kind, target).map_err(|_| IdentifyError::Infeasible {
            level: target,
            reason: InfeasibleReason::Unattainable { kind, target },
        })
    };
    let prices = PricePair::new(price(ThresholdKind::VI, nu)?, price(ThresholdKind::WII, omega)?);
    let t = ts.at(prices)?;
    let p = oracle.prob_11(prices)?;
    let f_min = f_hat.cdf_at(t.v_i.min(t.v_ii)).unwrap_or(0.0);
    let g_min = g_hat.cdf_at(t.w_i.min(t.w_ii)).unwrap_or(0.0);
    Ok((p - alpha * f_min - beta * g_min) / gamma)
}
