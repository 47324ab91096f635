//! Two-option insurance menus, the two single-crossing utility families and
//! the four cutoff functions they induce.
//!
//! Type-ν agents evaluate a menu with CARA expected utility, type-ω agents
//! with a dual (probability-distortion) valuation. In each context option 1
//! is the cheap, high-deductible plan. A cutoff is the value of the risk
//! parameter at which the agent is indifferent between the two options;
//! at or below it option 1 is weakly preferred.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{find_root, Bracket, NumericError};

/// Below this CARA coefficient the utility uses its first-order expansion.
pub const CARA_SMALL_NU: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreferenceError {
    #[error("final wealth {wealth} is not positive at price {price}")]
    Domain { price: f64, wealth: f64 },
    #[error("invalid menu: {0}")]
    InvalidMenu(String),
    #[error("invalid threshold system: {0}")]
    InvalidSystem(String),
    #[error("risk parameter must be finite and non-negative, got {0}")]
    InvalidParameter(f64),
    #[error("target {target} outside attainable range [{lo}, {hi}] of {kind:?}")]
    Unattainable {
        kind: ThresholdKind,
        target: f64,
        lo: f64,
        hi: f64,
    },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Alternative {
    One,
    Two,
}

impl Alternative {
    pub fn index(self) -> u8 {
        match self {
            Alternative::One => 1,
            Alternative::Two => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Context {
    I,
    II,
}

/// One context's insurance lottery. A scalar price index `x` sets the
/// premium of option `l` to `x * r_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContextMenu {
    /// Claim probability.
    pub mu: f64,
    /// Deductible of option 1 (the high one).
    pub d1: f64,
    pub d2: f64,
    /// Price rate of option 1 (the low one).
    pub r1: f64,
    pub r2: f64,
    pub wealth: f64,
}

impl ContextMenu {
    pub fn new(mu: f64, d1: f64, d2: f64, r1: f64, r2: f64, wealth: f64) -> Result<Self, PreferenceError> {
        let menu = Self {
            mu,
            d1,
            d2,
            r1,
            r2,
            wealth,
        };
        menu.validate()?;
        Ok(menu)
    }

    pub fn validate(&self) -> Result<(), PreferenceError> {
        let all_finite = [self.mu, self.d1, self.d2, self.r1, self.r2, self.wealth]
            .iter()
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(PreferenceError::InvalidMenu("non-finite field".into()));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(PreferenceError::InvalidMenu(format!(
                "claim probability {} not in (0, 1)",
                self.mu
            )));
        }
        if !(self.d1 > self.d2 && self.d2 >= 0.0) {
            return Err(PreferenceError::InvalidMenu(format!(
                "need d1 > d2 >= 0, got d1 = {}, d2 = {}",
                self.d1, self.d2
            )));
        }
        if !(self.r2 > self.r1 && self.r1 >= 0.0) {
            return Err(PreferenceError::InvalidMenu(format!(
                "need r2 > r1 >= 0, got r1 = {}, r2 = {}",
                self.r1, self.r2
            )));
        }
        Ok(())
    }

    pub fn rate(&self, alt: Alternative) -> f64 {
        match alt {
            Alternative::One => self.r1,
            Alternative::Two => self.r2,
        }
    }

    pub fn deductible(&self, alt: Alternative) -> f64 {
        match alt {
            Alternative::One => self.d1,
            Alternative::Two => self.d2,
        }
    }

    /// Price at which a risk-neutral agent is indifferent.
    pub fn break_even_price(&self) -> f64 {
        self.mu * (self.d1 - self.d2) / (self.r2 - self.r1)
    }

    /// Lowest final wealth over both options and both states at price `x`.
    pub fn min_final_wealth(&self, x: f64) -> f64 {
        let one = self.wealth - x * self.r1 - self.d1;
        let two = self.wealth - x * self.r2 - self.d2;
        one.min(two)
    }

    fn check_wealth(&self, x: f64) -> Result<(), PreferenceError> {
        let w = self.min_final_wealth(x);
        if w > 0.0 {
            Ok(())
        } else {
            Err(PreferenceError::Domain { price: x, wealth: w })
        }
    }
}

fn check_parameter(p: f64) -> Result<(), PreferenceError> {
    if p.is_finite() && p >= 0.0 {
        Ok(())
    } else {
        Err(PreferenceError::InvalidParameter(p))
    }
}

fn cara(nu: f64, y: f64) -> f64 {
    if nu == 0.0 {
        y
    } else if nu < CARA_SMALL_NU {
        y - 0.5 * nu * y * y
    } else {
        -(-nu * y).exp_m1() / nu
    }
}

/// `u(a) - u(b)` for CARA utility, without forming either utility.
fn cara_gap(nu: f64, a: f64, b: f64) -> f64 {
    let delta = a - b;
    if nu == 0.0 {
        delta
    } else if nu < CARA_SMALL_NU {
        delta - 0.5 * nu * (a * a - b * b)
    } else {
        (-nu * a).exp() * (nu * delta).exp_m1() / nu
    }
}

/// CARA expected utility of `alt` at price `x`.
pub fn eu_value(nu: f64, menu: &ContextMenu, x: f64, alt: Alternative) -> Result<f64, PreferenceError> {
    check_parameter(nu)?;
    let no_claim = menu.wealth - x * menu.rate(alt);
    let claim = no_claim - menu.deductible(alt);
    if claim <= 0.0 {
        return Err(PreferenceError::Domain {
            price: x,
            wealth: claim,
        });
    }
    Ok((1.0 - menu.mu) * cara(nu, no_claim) + menu.mu * cara(nu, claim))
}

/// `eu_value(option 1) - eu_value(option 2)`, evaluated state by state so
/// that nearly equal utilities do not cancel.
pub fn eu_difference(nu: f64, menu: &ContextMenu, x: f64) -> Result<f64, PreferenceError> {
    check_parameter(nu)?;
    menu.check_wealth(x)?;
    let n1 = menu.wealth - x * menu.r1;
    let n2 = menu.wealth - x * menu.r2;
    let c1 = n1 - menu.d1;
    let c2 = n2 - menu.d2;
    Ok((1.0 - menu.mu) * cara_gap(nu, n1, n2) + menu.mu * cara_gap(nu, c1, c2))
}

/// The price at which a CARA agent with coefficient `nu` is indifferent,
/// i.e. the certainty-equivalent deductible gap divided by the rate gap.
/// Strictly increasing in `nu` for a valid menu.
pub fn indifference_price(menu: &ContextMenu, nu: f64) -> f64 {
    let dr = menu.r2 - menu.r1;
    if nu < CARA_SMALL_NU {
        let (mu, d1, d2) = (menu.mu, menu.d1, menu.d2);
        (mu * (d1 - d2) + 0.5 * nu * mu * (1.0 - mu) * (d1 * d1 - d2 * d2)) / dr
    } else {
        let ln_m = |d: f64| (menu.mu * (nu * d).exp_m1()).ln_1p();
        (ln_m(menu.d1) - ln_m(menu.d2)) / (nu * dr)
    }
}

/// Dual valuation of `alt`: premium plus the distorted expected deductible.
pub fn dual_value(omega: f64, menu: &ContextMenu, x: f64, alt: Alternative) -> f64 {
    let weight = ((1.0 + omega) * menu.mu).min(1.0);
    -x * menu.rate(alt) - weight * menu.deductible(alt)
}

pub fn dual_difference(omega: f64, menu: &ContextMenu, x: f64) -> f64 {
    dual_value(omega, menu, x, Alternative::One) - dual_value(omega, menu, x, Alternative::Two)
}

/// CARA cutoff at price `x`, clipped into `[0, nu_bar]`.
pub fn threshold_v(menu: &ContextMenu, x: f64, nu_bar: f64) -> Result<f64, PreferenceError> {
    if eu_difference(0.0, menu, x)? <= 0.0 {
        return Ok(0.0);
    }
    if eu_difference(nu_bar, menu, x)? >= 0.0 {
        return Ok(nu_bar);
    }
    // Bisect to machine precision: the cutoff is differentiated numerically
    // downstream, so a coarser tolerance would show up as derivative noise.
    let root = find_root(
        |nu| eu_difference(nu, menu, x).unwrap_or(f64::NAN),
        Bracket::new(0.0, nu_bar)?,
        0.0,
    )?;
    Ok(root)
}

/// Dual cutoff at price `x` in closed form, clipped into `[0, omega_bar]`.
pub fn threshold_w(menu: &ContextMenu, x: f64, omega_bar: f64) -> f64 {
    let raw = x * (menu.r2 - menu.r1) / (menu.mu * (menu.d1 - menu.d2)) - 1.0;
    raw.clamp(0.0, omega_bar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRange {
    pub lo: f64,
    pub hi: f64,
}

impl PriceRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self, PreferenceError> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(PreferenceError::InvalidSystem(format!(
                "price range [{lo}, {hi}] must satisfy 0 < lo < hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricePair {
    pub x_i: f64,
    pub x_ii: f64,
}

impl PricePair {
    pub fn new(x_i: f64, x_ii: f64) -> Self {
        Self { x_i, x_ii }
    }

    pub fn get(&self, ctx: Context) -> f64 {
        match ctx {
            Context::I => self.x_i,
            Context::II => self.x_ii,
        }
    }

    pub fn with(&self, ctx: Context, x: f64) -> Self {
        match ctx {
            Context::I => Self { x_i: x, ..*self },
            Context::II => Self { x_ii: x, ..*self },
        }
    }
}

/// Which utility family a cutoff belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Nu,
    Omega,
}

impl Family {
    pub fn other(self) -> Self {
        match self {
            Family::Nu => Family::Omega,
            Family::Omega => Family::Nu,
        }
    }
}

/// The four cutoffs. `VI` compares bundle (1,1) against (2,1) and depends on
/// the context-I price only; `VII` compares (1,1) against (1,2) and depends on
/// the context-II price only. Likewise for the dual family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ThresholdKind {
    VI,
    VII,
    WI,
    WII,
}

impl ThresholdKind {
    pub fn of(family: Family, ctx: Context) -> Self {
        match (family, ctx) {
            (Family::Nu, Context::I) => ThresholdKind::VI,
            (Family::Nu, Context::II) => ThresholdKind::VII,
            (Family::Omega, Context::I) => ThresholdKind::WI,
            (Family::Omega, Context::II) => ThresholdKind::WII,
        }
    }

    pub fn family(self) -> Family {
        match self {
            ThresholdKind::VI | ThresholdKind::VII => Family::Nu,
            ThresholdKind::WI | ThresholdKind::WII => Family::Omega,
        }
    }

    pub fn context(self) -> Context {
        match self {
            ThresholdKind::VI | ThresholdKind::WI => Context::I,
            ThresholdKind::VII | ThresholdKind::WII => Context::II,
        }
    }
}

/// All four cutoffs at one price pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub v_i: f64,
    pub v_ii: f64,
    pub w_i: f64,
    pub w_ii: f64,
}

impl Thresholds {
    pub fn get(&self, kind: ThresholdKind) -> f64 {
        match kind {
            ThresholdKind::VI => self.v_i,
            ThresholdKind::VII => self.v_ii,
            ThresholdKind::WI => self.w_i,
            ThresholdKind::WII => self.w_ii,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSystem {
    pub menu_i: ContextMenu,
    pub menu_ii: ContextMenu,
    pub range_i: PriceRange,
    pub range_ii: PriceRange,
    pub nu_bar: f64,
    pub omega_bar: f64,
}

impl ThresholdSystem {
    pub fn new(
        menu_i: ContextMenu,
        menu_ii: ContextMenu,
        range_i: PriceRange,
        range_ii: PriceRange,
        nu_bar: f64,
        omega_bar: f64,
    ) -> Result<Self, PreferenceError> {
        let ts = Self::unvalidated(menu_i, menu_ii, range_i, range_ii, nu_bar, omega_bar);
        ts.validate()?;
        Ok(ts)
    }

    /// Builds a system without checking any invariant. Meant for diagnostics
    /// such as [`check_single_crossing`] on deliberately broken menus.
    pub fn unvalidated(
        menu_i: ContextMenu,
        menu_ii: ContextMenu,
        range_i: PriceRange,
        range_ii: PriceRange,
        nu_bar: f64,
        omega_bar: f64,
    ) -> Self {
        Self {
            menu_i,
            menu_ii,
            range_i,
            range_ii,
            nu_bar,
            omega_bar,
        }
    }

    pub fn validate(&self) -> Result<(), PreferenceError> {
        if !(self.nu_bar.is_finite() && self.nu_bar > 0.0) {
            return Err(PreferenceError::InvalidSystem(format!("nu_bar = {}", self.nu_bar)));
        }
        if !(self.omega_bar.is_finite() && self.omega_bar > 0.0) {
            return Err(PreferenceError::InvalidSystem(format!(
                "omega_bar = {}",
                self.omega_bar
            )));
        }
        for ctx in [Context::I, Context::II] {
            let menu = self.menu(ctx);
            let range = self.range(ctx);
            menu.validate()?;
            PriceRange::new(range.lo, range.hi)?;
            if menu.min_final_wealth(range.hi) <= 0.0 {
                return Err(PreferenceError::InvalidSystem(format!(
                    "context {ctx:?}: final wealth not positive at the top of the price range"
                )));
            }
            if (1.0 + self.omega_bar) * menu.mu > 1.0 {
                return Err(PreferenceError::InvalidSystem(format!(
                    "context {ctx:?}: distorted claim probability (1 + omega_bar) * mu exceeds 1"
                )));
            }
        }
        Ok(())
    }

    pub fn menu(&self, ctx: Context) -> &ContextMenu {
        match ctx {
            Context::I => &self.menu_i,
            Context::II => &self.menu_ii,
        }
    }

    pub fn range(&self, ctx: Context) -> PriceRange {
        match ctx {
            Context::I => self.range_i,
            Context::II => self.range_ii,
        }
    }

    pub fn bar(&self, family: Family) -> f64 {
        match family {
            Family::Nu => self.nu_bar,
            Family::Omega => self.omega_bar,
        }
    }

    pub fn eval(&self, kind: ThresholdKind, x: f64) -> Result<f64, PreferenceError> {
        let menu = self.menu(kind.context());
        match kind.family() {
            Family::Nu => threshold_v(menu, x, self.nu_bar),
            Family::Omega => Ok(threshold_w(menu, x, self.omega_bar)),
        }
    }

    pub fn v_i(&self, x: f64) -> Result<f64, PreferenceError> {
        self.eval(ThresholdKind::VI, x)
    }

    pub fn v_ii(&self, x: f64) -> Result<f64, PreferenceError> {
        self.eval(ThresholdKind::VII, x)
    }

    pub fn w_i(&self, x: f64) -> f64 {
        threshold_w(&self.menu_i, x, self.omega_bar)
    }

    pub fn w_ii(&self, x: f64) -> f64 {
        threshold_w(&self.menu_ii, x, self.omega_bar)
    }

    pub fn at(&self, prices: PricePair) -> Result<Thresholds, PreferenceError> {
        Ok(Thresholds {
            v_i: self.v_i(prices.x_i)?,
            v_ii: self.v_ii(prices.x_ii)?,
            w_i: self.w_i(prices.x_i),
            w_ii: self.w_ii(prices.x_ii),
        })
    }

    /// Range of `kind` over its context's admissible prices.
    pub fn attainable(&self, kind: ThresholdKind) -> Result<(f64, f64), PreferenceError> {
        let r = self.range(kind.context());
        Ok((self.eval(kind, r.lo)?, self.eval(kind, r.hi)?))
    }
}

/// The asymmetric reference design: context II has a smaller, rarer loss
/// than context I, so the two contexts' ν-cutoffs can be matched while their
/// ω-cutoffs stay apart over almost all of both supports.
impl Default for ThresholdSystem {
    fn default() -> Self {
        Self {
            menu_i: ContextMenu {
                mu: 0.10,
                d1: 5.0,
                d2: 1.0,
                r1: 1.0,
                r2: 3.0,
                wealth: 12.0,
            },
            menu_ii: ContextMenu {
                mu: 0.05,
                d1: 0.5,
                d2: 0.1,
                r1: 0.2,
                r2: 0.25,
                wealth: 12.0,
            },
            range_i: PriceRange { lo: 0.1, hi: 1.5 },
            range_ii: PriceRange { lo: 0.3, hi: 1.2 },
            nu_bar: 1.0,
            omega_bar: 1.5,
        }
    }
}

impl ThresholdSystem {
    /// Both contexts share context I's menu and price range. Cutoffs of the
    /// same family then coincide whenever they are matched, so no matching
    /// condition with strict separation can hold.
    pub fn symmetric() -> Self {
        let base = Self::default();
        Self {
            menu_ii: base.menu_i,
            range_ii: base.range_i,
            ..base
        }
    }
}

/// Price at which the cutoff `kind` equals `target`.
///
/// Uses the closed-form inverse of each family, so it is an independent
/// route from the bisection in [`threshold_v`]. A target on a clipping
/// boundary (0 or the support bound) maps to the edge of the clipped region,
/// which is the only point where the cutoff leaves that boundary.
pub fn invert_threshold(ts: &ThresholdSystem, kind: ThresholdKind, target: f64) -> Result<f64, PreferenceError> {
    let (lo, hi) = ts.attainable(kind)?;
    if !(target.is_finite() && target >= lo && target <= hi) {
        return Err(PreferenceError::Unattainable { kind, target, lo, hi });
    }
    let menu = ts.menu(kind.context());
    let x = match kind.family() {
        Family::Nu => indifference_price(menu, target),
        Family::Omega => (1.0 + target) * menu.mu * (menu.d1 - menu.d2) / (menu.r2 - menu.r1),
    };
    let range = ts.range(kind.context());
    Ok(x.clamp(range.lo, range.hi))
}

/// Where a single-crossing check first failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingViolation {
    pub price: f64,
    pub parameter: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossingCheck {
    pub name: &'static str,
    pub context: Context,
    pub passed: bool,
    pub first_violation: Option<CrossingViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleCrossingReport {
    pub grid_size: usize,
    pub checks: Vec<CrossingCheck>,
}

impl SingleCrossingReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CrossingCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn check(name: &'static str, context: Context, violation: Option<CrossingViolation>) -> CrossingCheck {
    CrossingCheck {
        name,
        context,
        passed: violation.is_none(),
        first_violation: violation,
    }
}

/// Scans a price grid and a risk-parameter grid (both `grid_size` points,
/// at least 3) for each context and verifies that
/// - both cutoffs are nondecreasing in price,
/// - each preference difference changes sign at most once, from favouring
///   option 1 to favouring option 2, as the risk parameter rises,
/// - the indifference price rises with the risk parameter, i.e. risk
///   aversion pushes agents toward the low-deductible option.
pub fn check_single_crossing(ts: &ThresholdSystem, grid_size: usize) -> SingleCrossingReport {
    let n = grid_size.max(3);
    let mut checks = Vec::new();
    for ctx in [Context::I, Context::II] {
        let menu = ts.menu(ctx);
        let range = ts.range(ctx);
        let prices = crate::numeric::linspace(range.lo, range.hi, n);
        let nus = crate::numeric::linspace(0.0, ts.nu_bar, n);
        let omegas = crate::numeric::linspace(0.0, ts.omega_bar, n);

        for family in [Family::Nu, Family::Omega] {
            let kind = ThresholdKind::of(family, ctx);
            let mut violation = None;
            let mut prev: Option<f64> = None;
            for &x in &prices {
                match ts.eval(kind, x) {
                    Ok(t) => {
                        if let Some(p) = prev {
                            if t < p {
                                violation = Some(CrossingViolation {
                                    price: x,
                                    parameter: None,
                                    detail: format!("cutoff fell from {p} to {t}"),
                                });
                                break;
                            }
                        }
                        prev = Some(t);
                    }
                    Err(e) => {
                        violation = Some(CrossingViolation {
                            price: x,
                            parameter: None,
                            detail: e.to_string(),
                        });
                        break;
                    }
                }
            }
            let name = match family {
                Family::Nu => "v_cutoff_nondecreasing",
                Family::Omega => "w_cutoff_nondecreasing",
            };
            checks.push(check(name, ctx, violation));
        }

        let mut nu_violation = None;
        'prices: for &x in &prices {
            let mut seen_negative = false;
            for &nu in &nus {
                match eu_difference(nu, menu, x) {
                    Ok(d) if d < 0.0 => seen_negative = true,
                    Ok(d) if d > 0.0 && seen_negative => {
                        nu_violation = Some(CrossingViolation {
                            price: x,
                            parameter: Some(nu),
                            detail: "option 1 preferred again after option 2".into(),
                        });
                        break 'prices;
                    }
                    Ok(_) => {}
                    Err(e) => {
                        nu_violation = Some(CrossingViolation {
                            price: x,
                            parameter: Some(nu),
                            detail: e.to_string(),
                        });
                        break 'prices;
                    }
                }
            }
        }
        checks.push(check("nu_single_crossing", ctx, nu_violation));
        checks.push(check(
            "nu_orientation",
            ctx,
            rising_indifference(&nus, |nu| indifference_price(menu, nu)),
        ));

        let mut omega_violation = None;
        'prices_w: for &x in &prices {
            let mut seen_negative = false;
            for &omega in &omegas {
                let d = dual_difference(omega, menu, x);
                if d < 0.0 {
                    seen_negative = true;
                } else if d > 0.0 && seen_negative {
                    omega_violation = Some(CrossingViolation {
                        price: x,
                        parameter: Some(omega),
                        detail: "option 1 preferred again after option 2".into(),
                    });
                    break 'prices_w;
                }
            }
        }
        checks.push(check("omega_single_crossing", ctx, omega_violation));
        checks.push(check(
            "omega_orientation",
            ctx,
            rising_indifference(&omegas, |omega| {
                (1.0 + omega) * menu.mu * (menu.d1 - menu.d2) / (menu.r2 - menu.r1)
            }),
        ));
    }
    SingleCrossingReport {
        grid_size: n,
        checks,
    }
}

fn rising_indifference<F: Fn(f64) -> f64>(params: &[f64], price: F) -> Option<CrossingViolation> {
    let mut prev = price(params[0]);
    for &p in &params[1..] {
        let x = price(p);
        if !(x > prev) {
            return Some(CrossingViolation {
                price: x,
                parameter: Some(p),
                detail: format!("indifference price did not rise ({prev} -> {x})"),
            });
        }
        prev = x;
    }
    None
}
