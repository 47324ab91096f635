use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use ctxrisk::choice::{
    bundle_distribution, prob_11_limited, region_classify, simulate, simulate_range, Bundle, ChoiceError, PriceDesign,
    PriceRectangle, Scenario, SimulatedAgent,
};
use ctxrisk::identify::{ChoiceOracle, MonteCarloOracle};
use ctxrisk::population::{AgentType, ConsiderationMeasure, Copula, CopulaFamily, MarginalDist, MixtureSpec};
use ctxrisk::preferences::{Alternative, PricePair, PriceRange, ThresholdSystem};

fn scenario(alpha: f64, beta: f64, copula: Copula, consideration: ConsiderationMeasure) -> Scenario {
    let ts = ThresholdSystem::default();
    let f = MarginalDist::beta(2.0, 3.0, ts.nu_bar).unwrap();
    let g = MarginalDist::beta(1.5, 1.5, ts.omega_bar).unwrap();
    Scenario::new(ts, MixtureSpec::new(alpha, beta, f, g, copula).unwrap(), consideration).unwrap()
}

fn prices(ts: &ThresholdSystem, a: f64, b: f64) -> PricePair {
    PricePair::new(ts.range_i.lo + a * ts.range_i.width(), ts.range_ii.lo + b * ts.range_ii.width())
}

fn atom(k: usize) -> ConsiderationMeasure {
    let mut a = [0.0; 9];
    a[k] = 1.0;
    ConsiderationMeasure::from_atoms(a)
}

#[test]
fn pure_types_follow_their_cutoffs() {
    let clayton = Copula::new(CopulaFamily::Clayton, 3.0).unwrap();
    for (a, b) in [(0.2, 0.7), (0.5, 0.5), (0.9, 0.1)] {
        let sc = scenario(1.0, 0.0, clayton, ConsiderationMeasure::full_attention());
        let p = prices(&sc.ts, a, b);
        let t = sc.ts.at(p).unwrap();
        let f = |x: f64| sc.mix.f.cdf_clamped(x);
        let g = |x: f64| sc.mix.g.cdf_clamped(x);
        assert_abs_diff_eq!(prob_11_limited(&sc, p).unwrap(), f(t.v_i.min(t.v_ii)), epsilon = 1e-14);

        let sc = scenario(0.0, 1.0, clayton, ConsiderationMeasure::full_attention());
        assert_abs_diff_eq!(prob_11_limited(&sc, p).unwrap(), g(t.w_i.min(t.w_ii)), epsilon = 1e-14);

        let sc = scenario(0.0, 0.0, clayton, ConsiderationMeasure::full_attention());
        let expected = clayton.cdf(f(t.v_i), g(t.w_ii));
        assert_abs_diff_eq!(prob_11_limited(&sc, p).unwrap(), expected, epsilon = 1e-14);

        // Only option 1 in context I: the choice there is forced.
        let sc = scenario(1.0, 0.0, clayton, atom(1));
        assert_abs_diff_eq!(prob_11_limited(&sc, p).unwrap(), f(t.v_ii), epsilon = 1e-14);
        // Only option 2 in context II: (1,1) is impossible.
        let sc = scenario(0.3, 0.3, clayton, atom(4));
        assert_eq!(prob_11_limited(&sc, p).unwrap(), 0.0);
    }
}

proptest! {
    #[test]
    fn bundle_probabilities_form_a_distribution(
        alpha in 0.0f64..1.0, beta_frac in 0.0f64..1.0, theta in -1.0f64..1.0,
        full in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0,
    ) {
        let beta = beta_frac * (1.0 - alpha);
        let sc = scenario(alpha, beta, Copula::new(CopulaFamily::Fgm, theta).unwrap(), ConsiderationMeasure::with_full(full));
        let p = prices(&sc.ts, a, b);
        let d = bundle_distribution(&sc, p).unwrap();
        prop_assert!((d.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(d.to_array().iter().all(|&x| x >= -1e-15));
        prop_assert_eq!(d.p11, prob_11_limited(&sc, p).unwrap());
    }

    #[test]
    fn type_iii_region_uses_cross_family_cutoffs(nu in 0.0f64..1.0, omega in 0.0f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let ts = ThresholdSystem::default();
        let p = prices(&ts, a, b);
        let t = ts.at(p).unwrap();
        let bundle = region_classify(&ts, p, nu, omega, AgentType::III).unwrap();
        let pick = |one: bool| if one { Alternative::One } else { Alternative::Two };
        prop_assert_eq!(bundle, Bundle::new(pick(nu <= t.v_i), pick(omega <= t.w_ii)));
    }
}

#[test]
fn monte_carlo_frequencies_match_exact_distribution() {
    let sc = scenario(0.3, 0.4, Copula::new(CopulaFamily::Gaussian, 0.5).unwrap(), ConsiderationMeasure::with_full(0.7));
    let mc = MonteCarloOracle::new(&sc, 1_000_000, 3);
    for (a, b) in [(0.3, 0.3), (0.6, 0.8)] {
        let p = prices(&sc.ts, a, b);
        let exact = bundle_distribution(&sc, p).unwrap().to_array();
        let counts = mc.bundle_counts(p).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(counts[k] as f64 / 1e6, exact[k], epsilon = 0.003);
        }
        assert_abs_diff_eq!(mc.prob_11(p).unwrap(), exact[0], epsilon = 0.003);
    }
}

fn design() -> PriceDesign {
    let rect = |a: f64, b: f64, c: f64, d: f64, weight| PriceRectangle {
        x_i: PriceRange::new(a, b).unwrap(),
        x_ii: PriceRange::new(c, d).unwrap(),
        weight,
    };
    PriceDesign::new(vec![rect(0.2, 1.0, 0.4, 0.6, 3.0), rect(0.2, 0.5, 0.4, 1.0, 1.0)]).unwrap()
}

fn run(sc: &Scenario, design: &PriceDesign, n: u64, workers: usize) -> Vec<SimulatedAgent> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
    pool.install(|| {
        let mut out = Vec::new();
        simulate::<ChoiceError, _>(sc, design, n, 42, |a| {
            out.push(*a);
            Ok(())
        })
        .unwrap();
        out
    })
}

#[test]
fn simulation_is_independent_of_workers_and_splits() {
    let sc = Scenario::reference();
    let d = design();
    let n = 150_000;
    let one = run(&sc, &d, n, 1);
    let three = run(&sc, &d, n, 3);
    assert_eq!(one.len() as u64, n);
    assert_eq!(one, three);
    assert!(one.iter().enumerate().all(|(k, a)| a.id == k as u64));
    let tail = simulate_range(&sc, &d, 42, 99_999, 100_010).unwrap();
    assert_eq!(&one[99_999..100_010], &tail[..]);
}

#[test]
fn simulated_prices_follow_design_weights() {
    let sc = Scenario::reference();
    let agents = run(&sc, &design(), 100_000, 1);
    assert!(agents.iter().all(|a| (0.2..=1.0).contains(&a.prices.x_i) && (0.4..=1.0).contains(&a.prices.x_ii)));
    let wide_ii = agents.iter().filter(|a| a.prices.x_ii > 0.6).count() as f64 / 1e5;
    // Only the second rectangle (weight 1/4) reaches x_II > 0.6, on 2/3 of its width.
    assert_abs_diff_eq!(wide_ii, 0.25 * 2.0 / 3.0, epsilon = 0.005);
}

#[test]
fn simulated_choices_match_their_draws() {
    let sc = Scenario::reference();
    for a in run(&sc, &design(), 20_000, 1) {
        assert_eq!(a.draw.choose_at(&sc, a.prices).unwrap(), a.bundle);
    }
}

#[test]
fn invalid_design_is_rejected() {
    let r = PriceRange::new(0.2, 0.4).unwrap();
    assert!(PriceDesign::new(vec![]).is_err());
    assert!(PriceDesign::new(vec![PriceRectangle { x_i: r, x_ii: r, weight: 0.0 }]).is_err());
}
