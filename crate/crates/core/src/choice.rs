//! Forward model: bundle-choice probabilities, region classification and the
//! Monte Carlo data-generating process.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::SeededStream;
use crate::population::{
    AgentType, ConsiderationMeasure, ConsiderationSet, MarginalDist, MixtureSpec, OptionSet, PopulationError,
};
use crate::preferences::{Alternative, Context, PreferenceError, PricePair, PriceRange, ThresholdSystem, Thresholds};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChoiceError {
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Population(#[from] PopulationError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bundle {
    pub opt_i: Alternative,
    pub opt_ii: Alternative,
}

impl Bundle {
    pub const ALL: [Bundle; 4] = [
        Bundle::new(Alternative::One, Alternative::One),
        Bundle::new(Alternative::One, Alternative::Two),
        Bundle::new(Alternative::Two, Alternative::One),
        Bundle::new(Alternative::Two, Alternative::Two),
    ];

    pub const fn new(opt_i: Alternative, opt_ii: Alternative) -> Self {
        Self { opt_i, opt_ii }
    }

    pub fn get(&self, ctx: Context) -> Alternative {
        match ctx {
            Context::I => self.opt_i,
            Context::II => self.opt_ii,
        }
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.opt_i.index(), self.opt_ii.index())
    }

    fn from_flags(one_i: bool, one_ii: bool) -> Self {
        let pick = |one| if one { Alternative::One } else { Alternative::Two };
        Self::new(pick(one_i), pick(one_ii))
    }
}

/// Probabilities of the four bundles, indexed `p{opt_I}{opt_II}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BundleDistribution {
    pub p11: f64,
    pub p12: f64,
    pub p21: f64,
    pub p22: f64,
}

impl BundleDistribution {
    pub fn get(&self, b: Bundle) -> f64 {
        match (b.opt_i, b.opt_ii) {
            (Alternative::One, Alternative::One) => self.p11,
            (Alternative::One, Alternative::Two) => self.p12,
            (Alternative::Two, Alternative::One) => self.p21,
            (Alternative::Two, Alternative::Two) => self.p22,
        }
    }

    pub fn sum(&self) -> f64 {
        self.p11 + self.p12 + self.p21 + self.p22
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.p11, self.p12, self.p21, self.p22]
    }

    fn add_scaled(&mut self, w: f64, other: &BundleDistribution) {
        self.p11 += w * other.p11;
        self.p12 += w * other.p12;
        self.p21 += w * other.p21;
        self.p22 += w * other.p22;
    }
}

/// Model primitives without prices. Prices vary point by point in every
/// computation, so they are passed alongside rather than stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Scenario {
    pub ts: ThresholdSystem,
    pub mix: MixtureSpec,
    pub consideration: ConsiderationMeasure,
}

impl Scenario {
    pub fn new(ts: ThresholdSystem, mix: MixtureSpec, consideration: ConsiderationMeasure) -> Result<Self, ChoiceError> {
        let sc = Self {
            ts,
            mix,
            consideration,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), ChoiceError> {
        self.ts.validate()?;
        self.mix.validate()?;
        self.consideration
            .validate()
            .map_err(PopulationError::InvalidConsideration)?;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        if !close(self.mix.f.bound(), self.ts.nu_bar) {
            return Err(ChoiceError::InvalidScenario(format!(
                "support of F ends at {} but nu_bar = {}",
                self.mix.f.bound(),
                self.ts.nu_bar
            )));
        }
        if !close(self.mix.g.bound(), self.ts.omega_bar) {
            return Err(ChoiceError::InvalidScenario(format!(
                "support of G ends at {} but omega_bar = {}",
                self.mix.g.bound(),
                self.ts.omega_bar
            )));
        }
        Ok(())
    }

    /// Reference population on the default design: α = 0.3, β = 0.5,
    /// F = beta(2,2) scaled to [0, ν̄], G uniform on [0, ω̄], independent
    /// type-(iii) parameters and full attention.
    pub fn reference() -> Self {
        let ts = ThresholdSystem::default();
        let f = MarginalDist::beta(2.0, 2.0, ts.nu_bar).expect("valid beta marginal");
        let g = MarginalDist::uniform(ts.omega_bar).expect("valid uniform marginal");
        let mix = MixtureSpec::new(0.3, 0.5, f, g, crate::population::Copula::independence()).expect("valid mixture");
        Self::new(ts, mix, ConsiderationMeasure::full_attention()).expect("valid reference scenario")
    }

    /// The four cutoffs mapped through the marginal cdfs.
    pub fn cutoff_probs(&self, prices: PricePair) -> Result<CutoffProbs, ChoiceError> {
        let t = self.ts.at(prices)?;
        Ok(CutoffProbs::new(&t, &self.mix.f, &self.mix.g))
    }
}

/// `F(V_I), F(V_II), G(W_I), G(W_II)` at one price pair. A type I agent with
/// ν-rank `u` takes option 1 in context c iff `u ≤ F(V_c)`, and likewise for
/// the dual family, so these four numbers settle every choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffProbs {
    pub fv_i: f64,
    pub fv_ii: f64,
    pub gw_i: f64,
    pub gw_ii: f64,
}

impl CutoffProbs {
    pub fn new(t: &Thresholds, f: &MarginalDist, g: &MarginalDist) -> Self {
        Self {
            fv_i: f.cdf_clamped(t.v_i),
            fv_ii: f.cdf_clamped(t.v_ii),
            gw_i: g.cdf_clamped(t.w_i),
            gw_ii: g.cdf_clamped(t.w_ii),
        }
    }
}

/// Two-type probability of bundle (1,1): `α F(V_I ∧ V_II) + (1−α) G(W_I ∧ W_II)`.
pub fn prob_11_two_type(
    ts: &ThresholdSystem,
    alpha: f64,
    f: &MarginalDist,
    g: &MarginalDist,
    prices: PricePair,
) -> Result<f64, ChoiceError> {
    let t = ts.at(prices)?;
    Ok(alpha * f.cdf_clamped(t.v_i.min(t.v_ii)) + (1.0 - alpha) * g.cdf_clamped(t.w_i.min(t.w_ii)))
}

/// Three-type probability of bundle (1,1) under full attention. The mixed
/// type's term pairs the context-I CARA cutoff with the context-II dual cutoff.
pub fn prob_11_three_type(ts: &ThresholdSystem, mix: &MixtureSpec, prices: PricePair) -> Result<f64, ChoiceError> {
    let t = ts.at(prices)?;
    let c = CutoffProbs::new(&t, &mix.f, &mix.g);
    Ok(mix.alpha * mix.f.cdf_clamped(t.v_i.min(t.v_ii))
        + mix.beta * mix.g.cdf_clamped(t.w_i.min(t.w_ii))
        + mix.gamma() * mix.copula.cdf(c.fv_i, c.gw_ii))
}

/// Probability of bundle (1,1) under the consideration measure. Only the
/// atoms that keep option 1 available in both contexts contribute.
pub fn prob_11_limited(sc: &Scenario, prices: PricePair) -> Result<f64, ChoiceError> {
    let c = sc.cutoff_probs(prices)?;
    Ok(prob_11_from_cutoffs(sc, &c))
}

pub fn prob_11_from_cutoffs(sc: &Scenario, c: &CutoffProbs) -> f64 {
    let o = &sc.consideration;
    let mix = &sc.mix;
    let type_i = o.both_both * c.fv_i.min(c.fv_ii) + o.both_one * c.fv_i + o.one_both * c.fv_ii + o.one_one;
    let type_ii = o.both_both * c.gw_i.min(c.gw_ii) + o.both_one * c.gw_i + o.one_both * c.gw_ii + o.one_one;
    let type_iii =
        o.both_both * mix.copula.cdf(c.fv_i, c.gw_ii) + o.both_one * c.fv_i + o.one_both * c.gw_ii + o.one_one;
    mix.alpha * type_i + mix.beta * type_ii + mix.gamma() * type_iii
}

/// Probability of taking option 1 in one context, given the option set and
/// the cutoff probability that applies when both options are seen.
fn accept(set: OptionSet, cutoff_prob: f64) -> f64 {
    match set {
        OptionSet::One => 1.0,
        OptionSet::Two => 0.0,
        OptionSet::Both => cutoff_prob,
    }
}

/// Bundle law when both contexts' acceptance events are lower sets of the
/// same scalar parameter.
fn comonotone(a_i: f64, a_ii: f64) -> BundleDistribution {
    let p11 = a_i.min(a_ii);
    BundleDistribution {
        p11,
        p12: a_i - p11,
        p21: a_ii - p11,
        p22: 1.0 - a_i - a_ii + p11,
    }
}

fn through_copula(copula: &crate::population::Copula, a_i: f64, a_ii: f64) -> BundleDistribution {
    let p11 = copula.cdf(a_i, a_ii);
    BundleDistribution {
        p11,
        p12: a_i - p11,
        p21: a_ii - p11,
        p22: 1.0 - a_i - a_ii + p11,
    }
}

/// Bundle law for one type and one consideration set.
pub fn conditional_distribution(
    sc: &Scenario,
    c: &CutoffProbs,
    kind: AgentType,
    set: ConsiderationSet,
) -> BundleDistribution {
    match kind {
        AgentType::I => comonotone(accept(set.ctx_i, c.fv_i), accept(set.ctx_ii, c.fv_ii)),
        AgentType::II => comonotone(accept(set.ctx_i, c.gw_i), accept(set.ctx_ii, c.gw_ii)),
        AgentType::III => through_copula(
            &sc.mix.copula,
            accept(set.ctx_i, c.fv_i),
            accept(set.ctx_ii, c.gw_ii),
        ),
    }
}

/// All four bundle probabilities. The (1,1) entry is the value returned by
/// [`prob_11_limited`].
pub fn bundle_distribution(sc: &Scenario, prices: PricePair) -> Result<BundleDistribution, ChoiceError> {
    let c = sc.cutoff_probs(prices)?;
    let mut out = BundleDistribution::default();
    let shares = [
        (AgentType::I, sc.mix.alpha),
        (AgentType::II, sc.mix.beta),
        (AgentType::III, sc.mix.gamma()),
    ];
    for (set, mass) in sc.consideration.iter() {
        if mass == 0.0 {
            continue;
        }
        for (kind, share) in shares {
            if share == 0.0 {
                continue;
            }
            out.add_scaled(mass * share, &conditional_distribution(sc, &c, kind, set));
        }
    }
    out.p11 = prob_11_from_cutoffs(sc, &c);
    Ok(out)
}

/// Bundle chosen by a fully attentive agent of type `kind` with risk
/// parameters `(nu, omega)`. Types I and II ignore the parameter they do not
/// carry. Ties go to option 1.
pub fn region_classify(
    ts: &ThresholdSystem,
    prices: PricePair,
    nu: f64,
    omega: f64,
    kind: AgentType,
) -> Result<Bundle, ChoiceError> {
    let t = ts.at(prices)?;
    Ok(classify_with(&t, nu, omega, kind))
}

pub fn classify_with(t: &Thresholds, nu: f64, omega: f64, kind: AgentType) -> Bundle {
    match kind {
        AgentType::I => Bundle::from_flags(nu <= t.v_i, nu <= t.v_ii),
        AgentType::II => Bundle::from_flags(omega <= t.w_i, omega <= t.w_ii),
        AgentType::III => Bundle::from_flags(nu <= t.v_i, omega <= t.w_ii),
    }
}

/// Uniform draws consumed per simulated agent.
pub const DRAWS_PER_AGENT: u64 = 4;

/// One simulated agent. `nu_rank`/`omega_rank` are the parameters' positions
/// on the uniform scale; the parameters themselves follow by quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentDraw {
    pub kind: AgentType,
    pub nu_rank: Option<f64>,
    pub omega_rank: Option<f64>,
    pub consideration: ConsiderationSet,
}

impl AgentDraw {
    /// Reads exactly [`DRAWS_PER_AGENT`] uniforms: type, two parameter ranks,
    /// consideration set.
    pub fn draw(sc: &Scenario, stream: &mut SeededStream) -> Self {
        let t = stream.uniform01();
        let u1 = stream.uniform01();
        let u2 = stream.uniform01();
        let s = stream.uniform01();
        let kind = sc.mix.type_for(t);
        let (nu_rank, omega_rank) = match kind {
            AgentType::I => (Some(u1), None),
            AgentType::II => (None, Some(u1)),
            AgentType::III => {
                let (u, v) = sc.mix.copula.sample_uv(u1, u2);
                (Some(u), Some(v))
            }
        };
        Self {
            kind,
            nu_rank,
            omega_rank,
            consideration: sc.consideration.sample(s),
        }
    }

    pub fn nu(&self, sc: &Scenario) -> Option<f64> {
        self.nu_rank.map(|u| sc.mix.f.quantile(u).unwrap_or(f64::NAN))
    }

    pub fn omega(&self, sc: &Scenario) -> Option<f64> {
        self.omega_rank.map(|v| sc.mix.g.quantile(v).unwrap_or(f64::NAN))
    }

    /// The bundle this agent picks given the cutoff probabilities at the
    /// prices it faces. Comparing ranks with `F(V)` is the same as comparing
    /// `ν` with `V` because `F` is continuous and strictly increasing.
    pub fn choose(&self, c: &CutoffProbs) -> Bundle {
        let (one_i, one_ii) = match self.kind {
            AgentType::I => {
                let u = self.nu_rank.unwrap_or(0.0);
                (u <= c.fv_i, u <= c.fv_ii)
            }
            AgentType::II => {
                let v = self.omega_rank.unwrap_or(0.0);
                (v <= c.gw_i, v <= c.gw_ii)
            }
            AgentType::III => (
                self.nu_rank.unwrap_or(0.0) <= c.fv_i,
                self.omega_rank.unwrap_or(0.0) <= c.gw_ii,
            ),
        };
        let pick = |set: OptionSet, pref_one: bool| match set {
            OptionSet::One => true,
            OptionSet::Two => false,
            OptionSet::Both => pref_one,
        };
        Bundle::from_flags(
            pick(self.consideration.ctx_i, one_i),
            pick(self.consideration.ctx_ii, one_ii),
        )
    }
}

/// Draws one agent from the population and returns the bundle it picks.
pub fn sample_choice(sc: &Scenario, prices: PricePair, stream: &mut SeededStream) -> Result<Bundle, ChoiceError> {
    let c = sc.cutoff_probs(prices)?;
    Ok(AgentDraw::draw(sc, stream).choose(&c))
}

impl AgentDraw {
    /// Same decision as [`AgentDraw::choose`], evaluating only the cutoffs
    /// this agent actually compares against.
    pub fn choose_at(&self, sc: &Scenario, prices: PricePair) -> Result<Bundle, ChoiceError> {
        let ts = &sc.ts;
        let (f, g) = (&sc.mix.f, &sc.mix.g);
        let set = self.consideration;
        let decide = |ctx: Context, pref: &dyn Fn() -> Result<bool, ChoiceError>| -> Result<bool, ChoiceError> {
            match set.get(ctx) {
                OptionSet::One => Ok(true),
                OptionSet::Two => Ok(false),
                OptionSet::Both => pref(),
            }
        };
        let nu_rank = self.nu_rank.unwrap_or(0.0);
        let omega_rank = self.omega_rank.unwrap_or(0.0);
        let by_nu = |ctx: Context| -> Result<bool, ChoiceError> {
            let v = match ctx {
                Context::I => ts.v_i(prices.x_i)?,
                Context::II => ts.v_ii(prices.x_ii)?,
            };
            Ok(nu_rank <= f.cdf_clamped(v))
        };
        let by_omega = |ctx: Context| -> Result<bool, ChoiceError> {
            let w = match ctx {
                Context::I => ts.w_i(prices.x_i),
                Context::II => ts.w_ii(prices.x_ii),
            };
            Ok(omega_rank <= g.cdf_clamped(w))
        };
        let (one_i, one_ii) = match self.kind {
            AgentType::I => (decide(Context::I, &|| by_nu(Context::I))?, decide(Context::II, &|| by_nu(Context::II))?),
            AgentType::II => (
                decide(Context::I, &|| by_omega(Context::I))?,
                decide(Context::II, &|| by_omega(Context::II))?,
            ),
            AgentType::III => (
                decide(Context::I, &|| by_nu(Context::I))?,
                decide(Context::II, &|| by_omega(Context::II))?,
            ),
        };
        Ok(Bundle::from_flags(one_i, one_ii))
    }
}

/// A box of price pairs and its share of simulated agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRectangle {
    pub x_i: PriceRange,
    pub x_ii: PriceRange,
    pub weight: f64,
}

/// Price assignment for simulated agents: a rectangle is picked with
/// probability proportional to its weight, then prices are uniform inside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceDesign {
    rectangles: Vec<PriceRectangle>,
    cumulative: Vec<f64>,
}

impl PriceDesign {
    pub fn new(rectangles: Vec<PriceRectangle>) -> Result<Self, ChoiceError> {
        if rectangles.is_empty() {
            return Err(ChoiceError::InvalidScenario("price design has no rectangles".into()));
        }
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(rectangles.len());
        for r in &rectangles {
            if !(r.weight.is_finite() && r.weight > 0.0) {
                return Err(ChoiceError::InvalidScenario(format!("rectangle weight {} must be positive", r.weight)));
            }
            PriceRange::new(r.x_i.lo, r.x_i.hi)?;
            PriceRange::new(r.x_ii.lo, r.x_ii.hi)?;
            total += r.weight;
            cumulative.push(total);
        }
        cumulative.iter_mut().for_each(|c| *c /= total);
        Ok(Self { rectangles, cumulative })
    }

    /// The whole price range of `ts` as a single rectangle.
    pub fn full(ts: &ThresholdSystem) -> Self {
        Self::new(vec![PriceRectangle {
            x_i: ts.range_i,
            x_ii: ts.range_ii,
            weight: 1.0,
        }])
        .expect("validated ranges")
    }

    pub fn rectangles(&self) -> &[PriceRectangle] {
        &self.rectangles
    }

    /// Reads [`PRICE_DRAWS_PER_AGENT`] uniforms.
    pub fn draw(&self, stream: &mut SeededStream) -> PricePair {
        let pick = stream.uniform01();
        let a = stream.uniform01();
        let b = stream.uniform01();
        let k = self.cumulative.partition_point(|&c| c < pick).min(self.rectangles.len() - 1);
        let r = &self.rectangles[k];
        PricePair::new(r.x_i.lo + a * r.x_i.width(), r.x_ii.lo + b * r.x_ii.width())
    }
}

pub const PRICE_DRAWS_PER_AGENT: u64 = 3;

/// Stream id used for price draws; agent draws use stream 0.
const PRICE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedAgent {
    pub id: u64,
    pub prices: PricePair,
    pub bundle: Bundle,
    pub draw: AgentDraw,
}

const SIM_CHUNK: u64 = 1 << 16;
const SIM_BATCH: u64 = 16;

/// Agents `start..end` of the simulation with this seed. Agent `k` reads a
/// fixed window of each stream, so any split gives the same agents.
pub fn simulate_range(
    sc: &Scenario,
    design: &PriceDesign,
    seed: u64,
    start: u64,
    end: u64,
) -> Result<Vec<SimulatedAgent>, ChoiceError> {
    let mut agents = SeededStream::new(seed, 0);
    let mut prices = SeededStream::new(seed, PRICE_STREAM);
    agents.seek(start * DRAWS_PER_AGENT);
    prices.seek(start * PRICE_DRAWS_PER_AGENT);
    (start..end)
        .map(|id| {
            let draw = AgentDraw::draw(sc, &mut agents);
            let p = design.draw(&mut prices);
            Ok(SimulatedAgent {
                id,
                prices: p,
                bundle: draw.choose_at(sc, p)?,
                draw,
            })
        })
        .collect()
}

/// Simulates `n` agents and hands them to `sink` in id order. Work is split
/// into fixed chunks evaluated in parallel, a bounded batch at a time.
pub fn simulate<E, S>(sc: &Scenario, design: &PriceDesign, n: u64, seed: u64, mut sink: S) -> Result<(), E>
where
    E: From<ChoiceError>,
    S: FnMut(&SimulatedAgent) -> Result<(), E>,
{
    use rayon::prelude::*;
    let chunks = n.div_ceil(SIM_CHUNK);
    let mut c0 = 0;
    while c0 < chunks {
        let c1 = (c0 + SIM_BATCH).min(chunks);
        let batch: Vec<Result<Vec<SimulatedAgent>, ChoiceError>> = (c0..c1)
            .into_par_iter()
            .map(|c| simulate_range(sc, design, seed, c * SIM_CHUNK, ((c + 1) * SIM_CHUNK).min(n)))
            .collect();
        for chunk in batch {
            for a in &chunk? {
                sink(a)?;
            }
        }
        c0 = c1;
    }
    Ok(())
}
