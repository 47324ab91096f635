use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use ctxrisk::numeric::SeededStream;
use ctxrisk::population::{
    sample_pair, AgentType, ConsiderationMeasure, ConsiderationSet, Copula, CopulaFamily, MarginalDist, MixtureSpec,
    OptionSet,
};

fn family(ix: usize, t: f64) -> Copula {
    match ix {
        0 => Copula::independence(),
        1 => Copula::new(CopulaFamily::Fgm, 2.0 * t - 1.0).unwrap(),
        2 => Copula::new(CopulaFamily::Clayton, 0.1 + 9.9 * t).unwrap(),
        _ => Copula::new(CopulaFamily::Gaussian, 1.9 * t - 0.95).unwrap(),
    }
}

proptest! {
    #[test]
    fn copula_boundaries_and_bounds(ix in 0usize..4, t in 0.0f64..1.0, u in 0.0f64..=1.0, v in 0.0f64..=1.0) {
        let c = family(ix, t);
        prop_assert!(c.cdf(u, 0.0).abs() <= 1e-12);
        prop_assert!((c.cdf(u, 1.0) - u).abs() <= 1e-12);
        prop_assert!((c.cdf(1.0, v) - v).abs() <= 1e-12);
        let x = c.cdf(u, v);
        prop_assert!(x >= (u + v - 1.0).max(0.0) - 1e-12 && x <= u.min(v) + 1e-12);
        let d = c.du(u, v);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&d));
    }

    #[test]
    fn conditional_inverse_round_trips(ix in 0usize..4, t in 0.0f64..1.0, u in 0.01f64..0.99, p in 0.01f64..0.99) {
        let c = family(ix, t);
        let v = c.du_inverse(u, p);
        prop_assert!((c.du(u, v) - p).abs() <= 1e-8);
    }

    #[test]
    fn marginal_quantile_round_trips(a in 0.5f64..5.0, b in 0.5f64..5.0, p in 0.001f64..0.999) {
        let m = MarginalDist::beta(a, b, 2.0).unwrap();
        let x = m.quantile(p).unwrap();
        prop_assert!((0.0..=2.0).contains(&x));
        prop_assert!((m.cdf(x).unwrap() - p).abs() <= 1e-9);
    }
}

#[test]
fn consideration_atoms_must_sum_to_one() {
    let mut atoms = [0.0; 9];
    atoms[0] = 0.98;
    assert!(ConsiderationMeasure::from_atoms(atoms).validate().is_err());
    atoms[0] = 1.0;
    assert!(ConsiderationMeasure::from_atoms(atoms).validate().is_ok());
    atoms[1] = -0.1;
    atoms[0] = 1.1;
    assert!(ConsiderationMeasure::from_atoms(atoms).validate().is_err());
}

#[test]
fn consideration_sampling_matches_atoms() {
    let m = ConsiderationMeasure::with_full(0.6);
    let mut s = SeededStream::new(5, 0);
    let n = 200_000;
    let full = (0..n).filter(|_| m.sample(s.uniform01()) == ConsiderationSet::FULL).count();
    assert_abs_diff_eq!(full as f64 / n as f64, 0.6, epsilon = 0.005);
    assert_eq!(ConsiderationMeasure::full_attention().sample(0.999), ConsiderationSet::FULL);
    assert!(OptionSet::Both.contains(ctxrisk::preferences::Alternative::Two));
}

#[test]
fn mixture_shares_are_validated() {
    let f = MarginalDist::uniform(1.0).unwrap();
    let c = Copula::independence();
    assert!(MixtureSpec::new(0.7, 0.5, f, f, c).is_err());
    assert!(MixtureSpec::new(-0.1, 0.5, f, f, c).is_err());
    let m = MixtureSpec::new(0.3, 0.5, f, f, c).unwrap();
    assert_abs_diff_eq!(m.gamma(), 0.2, epsilon = 1e-15);
    assert_eq!(m.type_for(0.1), AgentType::I);
    assert_eq!(m.type_for(0.5), AgentType::II);
    assert_eq!(m.type_for(0.9), AgentType::III);
}

#[test]
fn sampled_pairs_follow_the_copula() {
    let c = Copula::new(CopulaFamily::Clayton, 2.0).unwrap();
    let f = MarginalDist::beta(2.0, 2.0, 1.0).unwrap();
    let g = MarginalDist::uniform(3.0).unwrap();
    let mut s = SeededStream::new(11, 0);
    let n = 200_000;
    let (x, y) = (f.quantile(0.4).unwrap(), g.quantile(0.6).unwrap());
    let hits = (0..n)
        .filter(|_| {
            let (nu, om) = sample_pair(&c, &f, &g, &mut s);
            nu <= x && om <= y
        })
        .count();
    assert_abs_diff_eq!(hits as f64 / n as f64, c.cdf(0.4, 0.6), epsilon = 0.005);
}
