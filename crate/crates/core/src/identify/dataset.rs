//! Gap estimation from individual choices instead of exact probabilities.
//!
//! Each observation is mapped to threshold coordinates `(s, t)`: the axis'
//! differentiated and crossing cutoffs at the observed prices. Away from the
//! diagonal `s = t` the (1,1) probability is smooth in `(s, t)`; on the
//! diagonal its derivative in `s` jumps by the gap. One least-squares fit
//! over all usable observations models the response as
//!
//! - a kink part `K(min(s, t))`, with `K' = gap` expanded in a Bernstein basis,
//! - a bivariate polynomial for everything smooth,
//! - truncated powers at the known prices where the other family's cutoffs
//!   clip, which put kinks into the single-context choice shares.
//!
//! The response is `(2·c_I − 1)(2·c_II − 1)/4` with `c` the option-1
//! indicators. Its mean differs from the (1,1) probability only by the two
//! single-context shares, which have no kink on the diagonal, and its
//! variance is a quarter of that of the (1,1) indicator.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Read;

use super::gap::{GapEstimate, GapSource};
use super::matching::{match_prices, Axis};
use super::{IdentifyConfig, IdentifyError};
use crate::numeric::linspace;
use crate::preferences::{indifference_price, Alternative, Family, ThresholdKind, ThresholdSystem};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x_i: f64,
    pub x_ii: f64,
    pub choice_i: Alternative,
    pub choice_ii: Alternative,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub observations: Vec<Observation>,
}

fn parse_alt(s: &str) -> Option<Alternative> {
    match s.trim() {
        "1" => Some(Alternative::One),
        "2" => Some(Alternative::Two),
        _ => None,
    }
}

impl Dataset {
    /// Reads the simulate output format. Lines starting with `#` are
    /// skipped; only the price and choice columns are used.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, IdentifyError> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| IdentifyError::Dataset(e.to_string()))?
            .clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| IdentifyError::Dataset(format!("missing column {name}")))
        };
        let (ci, cii, chi, chii) = (col("x_I")?, col("x_II")?, col("choice_I")?, col("choice_II")?);
        let mut observations = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| IdentifyError::Dataset(e.to_string()))?;
            let bad = |what: &str| IdentifyError::Dataset(format!("row {}: bad {what}", row + 1));
            let num = |i: usize, what: &str| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok()).ok_or_else(|| bad(what));
            observations.push(Observation {
                x_i: num(ci, "x_I")?,
                x_ii: num(cii, "x_II")?,
                choice_i: rec.get(chi).and_then(parse_alt).ok_or_else(|| bad("choice_I"))?,
                choice_ii: rec.get(chii).and_then(parse_alt).ok_or_else(|| bad("choice_II"))?,
            });
        }
        Ok(Self { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Tuning of the series fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SieveConfig {
    /// Degree of the Bernstein expansion of the gap curve.
    pub kink_degree: usize,
    /// Total degree of the smooth bivariate polynomial.
    pub smooth_degree: usize,
    /// Highest truncated power used at each clipping knot.
    pub knot_degree: usize,
    /// Half-width of the neighbourhood used to decide feasibility, as a
    /// fraction of the support bound.
    pub window_rel: f64,
    /// Observations required on each side of the diagonal within that
    /// neighbourhood.
    pub min_side_points: usize,
}

impl Default for SieveConfig {
    fn default() -> Self {
        Self {
            kink_degree: 4,
            smooth_degree: 5,
            knot_degree: 4,
            window_rel: 0.1,
            min_side_points: 1000,
        }
    }
}

/// Tabulated CARA cutoff. The closed-form inverse gives price as a function
/// of ν; interpolating that table the other way avoids a root solve per
/// observation. With 2^16 intervals the interpolation error is far below
/// the sampling noise of any dataset.
struct CutoffTable {
    prices: Vec<f64>,
    nus: Vec<f64>,
}

impl CutoffTable {
    fn new(ts: &ThresholdSystem, kind: ThresholdKind) -> Self {
        let menu = ts.menu(kind.context());
        let nus = linspace(0.0, ts.nu_bar, (1 << 16) + 1);
        let prices = nus.iter().map(|&nu| indifference_price(menu, nu)).collect();
        Self { prices, nus }
    }

    fn eval(&self, x: f64) -> f64 {
        crate::numeric::interp_linear(&self.prices, &self.nus, x)
    }
}

struct Cutoffs<'a> {
    ts: &'a ThresholdSystem,
    v_i: CutoffTable,
    v_ii: CutoffTable,
}

impl<'a> Cutoffs<'a> {
    fn new(ts: &'a ThresholdSystem) -> Self {
        Self {
            ts,
            v_i: CutoffTable::new(ts, ThresholdKind::VI),
            v_ii: CutoffTable::new(ts, ThresholdKind::VII),
        }
    }

    fn eval(&self, kind: ThresholdKind, x: f64) -> f64 {
        match kind {
            ThresholdKind::VI => self.v_i.eval(x),
            ThresholdKind::VII => self.v_ii.eval(x),
            ThresholdKind::WI => self.ts.w_i(x),
            ThresholdKind::WII => self.ts.w_ii(x),
        }
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

fn bernstein(k: usize, n: usize, x: f64) -> f64 {
    binom(n, k) * x.powi(k as i32) * (1.0 - x).powi((n - k) as i32)
}

/// `∫_0^m b_{k,n}` expressed through degree n+1 Bernstein polynomials.
fn bernstein_integral(k: usize, n: usize, m: f64) -> f64 {
    ((k + 1)..=(n + 1)).map(|j| bernstein(j, n + 1, m)).sum::<f64>() / (n + 1) as f64
}

/// A fitted gap curve for one axis.
#[derive(Debug, Clone, Serialize)]
pub struct SieveFit {
    pub axis: Axis,
    pub bar: f64,
    pub kink_coef: Vec<f64>,
    pub n_used: usize,
    pub knots_s: Vec<f64>,
    pub knots_t: Vec<f64>,
    /// Usable points as `(s, t)`, sorted by `s`, kept for feasibility counts.
    #[serde(skip)]
    points: Vec<(f64, f64)>,
}

impl SieveFit {
    pub fn gap_at(&self, level: f64) -> f64 {
        let n = self.kink_coef.len() - 1;
        let x = (level / self.bar).clamp(0.0, 1.0);
        self.kink_coef
            .iter()
            .enumerate()
            .map(|(k, a)| a * bernstein(k, n, x))
            .sum::<f64>()
            / self.bar
    }

    /// Observations within `half` of `(level, level)` on each side of the
    /// diagonal: `(below, above)` with below meaning `s < t`.
    pub fn side_counts(&self, level: f64, half: f64) -> (usize, usize) {
        let lo = self.points.partition_point(|p| p.0 < level - half);
        let hi = self.points.partition_point(|p| p.0 <= level + half);
        let mut below = 0;
        let mut above = 0;
        for &(s, t) in &self.points[lo..hi] {
            if (t - level).abs() <= half {
                if s < t {
                    below += 1;
                } else if s > t {
                    above += 1;
                }
            }
        }
        (below, above)
    }
}

/// Prices where the other family's cutoff in `ctx` clips, mapped to the
/// axis cutoff of the same context.
fn clip_knots(ts: &ThresholdSystem, cut: &Cutoffs, axis: Axis, ctx: crate::preferences::Context) -> Vec<f64> {
    let own = ThresholdKind::of(axis.family(), ctx);
    let other = ThresholdKind::of(axis.family().other(), ctx);
    let menu = ts.menu(ctx);
    let range = ts.range(ctx);
    let other_bar = ts.bar(other.family());
    let clip_prices = match other.family() {
        Family::Nu => [indifference_price(menu, 0.0), indifference_price(menu, other_bar)],
        Family::Omega => {
            let unit = menu.mu * (menu.d1 - menu.d2) / (menu.r2 - menu.r1);
            [unit, (1.0 + other_bar) * unit]
        }
    };
    let bar = axis.bar(ts);
    let mut knots: Vec<f64> = clip_prices
        .iter()
        .filter(|&&x| range.contains(x))
        .map(|&x| cut.eval(own, x))
        .filter(|&k| k > 0.0 && k < bar)
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    knots
}

/// Fits the series model for `axis`.
pub fn fit_sieve(
    data: &Dataset,
    ts: &ThresholdSystem,
    axis: Axis,
    slack_min: f64,
    cfg: &SieveConfig,
) -> Result<SieveFit, IdentifyError> {
    let cut = Cutoffs::new(ts);
    let bar = axis.bar(ts);
    let (big, small) = axis.separation_kinds();
    let diff_ctx = axis.diff_context();
    let knots_s: Vec<f64> = clip_knots(ts, &cut, axis, diff_ctx);
    let knots_t: Vec<f64> = clip_knots(ts, &cut, axis, axis.cross_context());

    let mut rows: Vec<(f64, f64, f64)> = Vec::with_capacity(data.len() / 2);
    for o in &data.observations {
        let price = |ctx| match ctx {
            crate::preferences::Context::I => o.x_i,
            crate::preferences::Context::II => o.x_ii,
        };
        let s = cut.eval(axis.diff_kind(), price(diff_ctx));
        let t = cut.eval(axis.cross_kind(), price(axis.cross_context()));
        if !(s > 0.0 && s < bar && t > 0.0 && t < bar) {
            continue;
        }
        let sep = cut.eval(big, price(big.context())) - cut.eval(small, price(small.context()));
        if !(sep > slack_min) {
            continue;
        }
        let sign = |a: Alternative| if a == Alternative::One { 1.0 } else { -1.0 };
        rows.push((s, t, 0.25 * sign(o.choice_i) * sign(o.choice_ii)));
    }

    let k = cfg.kink_degree;
    let d = cfg.smooth_degree;
    let q = cfg.knot_degree;
    let n_kink = k + 1;
    let n_smooth = (d + 1) * (d + 2) / 2;
    let n_cols = n_kink + n_smooth + q * (knots_s.len() + knots_t.len());
    if rows.len() < 10 * n_cols {
        return Err(IdentifyError::Dataset(format!(
            "only {} usable observations for the {} axis",
            rows.len(),
            axis.label()
        )));
    }

    let fill = |s: f64, t: f64, out: &mut [f64]| {
        let (a, b) = (s / bar, t / bar);
        let m = a.min(b);
        let mut c = 0;
        for j in 0..n_kink {
            out[c] = bernstein_integral(j, k, m);
            c += 1;
        }
        let (za, zb) = (2.0 * a - 1.0, 2.0 * b - 1.0);
        for i in 0..=d {
            for j in 0..=(d - i) {
                out[c] = za.powi(i as i32) * zb.powi(j as i32);
                c += 1;
            }
        }
        for &kn in &knots_s {
            let z = (a - kn / bar).max(0.0);
            for p in 1..=q {
                out[c] = z.powi(p as i32);
                c += 1;
            }
        }
        for &kn in &knots_t {
            let z = (b - kn / bar).max(0.0);
            for p in 1..=q {
                out[c] = z.powi(p as i32);
                c += 1;
            }
        }
    };

    // Normal equations, accumulated chunk by chunk in a fixed order.
    let mut xtx = DMatrix::<f64>::zeros(n_cols, n_cols);
    let mut xty = DVector::<f64>::zeros(n_cols);
    let mut x = vec![0.0; n_cols];
    for &(s, t, y) in &rows {
        fill(s, t, &mut x);
        for i in 0..n_cols {
            let xi = x[i];
            xty[i] += xi * y;
            for j in 0..=i {
                xtx[(i, j)] += xi * x[j];
            }
        }
    }
    for i in 0..n_cols {
        for j in 0..i {
            xtx[(j, i)] = xtx[(i, j)];
        }
    }
    let coef = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx
            .svd(true, true)
            .solve(&xty, 1e-12)
            .map_err(|e| IdentifyError::Dataset(e.to_string()))?,
    };

    let mut points: Vec<(f64, f64)> = rows.iter().map(|r| (r.0, r.1)).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SieveFit {
        axis,
        bar,
        kink_coef: coef.iter().take(n_kink).copied().collect(),
        n_used: rows.len(),
        knots_s,
        knots_t,
        points,
    })
}

/// Gaps read off fitted series models.
pub struct DatasetGaps<'a> {
    pub ts: &'a ThresholdSystem,
    pub cfg: &'a IdentifyConfig,
    pub nu: Option<SieveFit>,
    pub omega: Option<SieveFit>,
}

impl<'a> DatasetGaps<'a> {
    /// Fits both axes; an axis whose fit fails is left empty and reports
    /// every level as infeasible.
    pub fn fit(data: &Dataset, ts: &'a ThresholdSystem, cfg: &'a IdentifyConfig) -> Self {
        let nu = fit_sieve(data, ts, Axis::Nu, cfg.slack_min, &cfg.sieve).ok();
        let omega = fit_sieve(data, ts, Axis::Omega, cfg.slack_min, &cfg.sieve).ok();
        Self { ts, cfg, nu, omega }
    }
}

impl GapSource for DatasetGaps<'_> {
    fn gap(&self, axis: Axis, level: f64) -> GapEstimate {
        let fit = match axis {
            Axis::Nu => &self.nu,
            Axis::Omega => &self.omega,
        };
        let Some(fit) = fit else {
            return GapEstimate::infeasible(level, IdentifyError::Dataset("no fit for this axis".into()));
        };
        let matched = match match_prices(self.ts, axis, level, self.cfg.slack_min) {
            Ok(m) => m,
            Err(e) => return GapEstimate::infeasible(level, e),
        };
        let half = self.cfg.sieve.window_rel * fit.bar;
        let (below, above) = fit.side_counts(level, half);
        let need = self.cfg.sieve.min_side_points;
        if below < need || above < need {
            return GapEstimate::infeasible(
                level,
                IdentifyError::Dataset(format!(
                    "{below} and {above} observations on the two sides near {level}, need {need}"
                )),
            );
        }
        GapEstimate {
            level,
            gap: Some(fit.gap_at(level)),
            slack: Some(matched.slack),
            left: None,
            right: None,
            reason: None,
        }
    }
}
