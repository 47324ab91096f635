//! Acceptance gate. Runs every criterion at its stated tolerance and time
//! budget and prints one PASS/FAIL line each; exits nonzero on any FAIL.

use std::path::Path;
use std::time::{Duration, Instant};

use ctxrisk::choice::{prob_11_limited, prob_11_three_type, prob_11_two_type, Scenario};
use ctxrisk::cli;
use ctxrisk::identify::{
    derivative_gap, identify_pipeline, match_prices, one_sided_derivative, Axis, ChoiceOracle, IdentifyConfig,
    MarginalRecovery, MonteCarloOracle, Perturbation,
};
use ctxrisk::numeric::{linspace, SeededStream, Side};
use ctxrisk::population::{
    ConsiderationMeasure, Copula, CopulaFamily, MarginalDist, MarginalFamily, MixtureSpec,
};
use ctxrisk::preferences::{check_single_crossing, invert_threshold, PricePair, ThresholdKind, ThresholdSystem};

type Outcome = Result<String, String>;

fn uniform(s: &mut SeededStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * s.uniform01()
}

fn random_copula(s: &mut SeededStream, family: CopulaFamily) -> Copula {
    let theta = match family {
        CopulaFamily::Independence => 0.0,
        CopulaFamily::Fgm => uniform(s, -1.0, 1.0),
        CopulaFamily::Clayton => uniform(s, 0.2, 8.0),
        CopulaFamily::Gaussian => uniform(s, -0.9, 0.9),
    };
    Copula::new(family, theta).unwrap()
}

fn random_marginal(s: &mut SeededStream, bound: f64) -> MarginalDist {
    if s.uniform01() < 0.3 {
        MarginalDist::uniform(bound).unwrap()
    } else {
        MarginalDist::new(
            MarginalFamily::Beta {
                a: uniform(s, 0.6, 4.0),
                b: uniform(s, 0.6, 4.0),
            },
            bound,
        )
        .unwrap()
    }
}

/// Random atoms with at least 0.3 on full attention.
fn random_consideration(s: &mut SeededStream) -> ConsiderationMeasure {
    let full = uniform(s, 0.3, 0.9);
    let raw: Vec<f64> = (0..8).map(|_| s.uniform01()).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms = [0.0; 9];
    atoms[0] = full;
    for k in 0..8 {
        atoms[k + 1] = (1.0 - full) * raw[k] / total;
    }
    let sum: f64 = atoms.iter().sum();
    atoms[0] += 1.0 - sum;
    ConsiderationMeasure::from_atoms(atoms)
}

fn random_scenario(s: &mut SeededStream, family: CopulaFamily, consideration: ConsiderationMeasure) -> Scenario {
    let ts = ThresholdSystem::default();
    let alpha = uniform(s, 0.05, 0.6);
    let beta = uniform(s, 0.05, 0.95 - alpha);
    let f = random_marginal(s, ts.nu_bar);
    let g = random_marginal(s, ts.omega_bar);
    let mix = MixtureSpec::new(alpha, beta, f, g, random_copula(s, family)).unwrap();
    Scenario::new(ts, mix, consideration).unwrap()
}

fn random_prices(s: &mut SeededStream, ts: &ThresholdSystem) -> PricePair {
    PricePair::new(
        uniform(s, ts.range_i.lo, ts.range_i.hi),
        uniform(s, ts.range_ii.lo, ts.range_ii.hi),
    )
}

const FAMILIES: [CopulaFamily; 4] = [
    CopulaFamily::Independence,
    CopulaFamily::Fgm,
    CopulaFamily::Clayton,
    CopulaFamily::Gaussian,
];

fn criterion_1() -> Outcome {
    let mut s = SeededStream::new(101, 0);
    let (mut worst_full, mut worst_two) = (0.0f64, 0.0f64);
    for k in 0..100 {
        let sc = random_scenario(&mut s, FAMILIES[k % 4], ConsiderationMeasure::full_attention());
        let two = {
            let mix = MixtureSpec::new(sc.mix.alpha, 1.0 - sc.mix.alpha, sc.mix.f, sc.mix.g, sc.mix.copula).unwrap();
            Scenario::new(sc.ts, mix, ConsiderationMeasure::full_attention()).unwrap()
        };
        for _ in 0..20 {
            let p = random_prices(&mut s, &sc.ts);
            let limited = prob_11_limited(&sc, p).unwrap();
            let three = prob_11_three_type(&sc.ts, &sc.mix, p).unwrap();
            worst_full = worst_full.max((limited - three).abs());
            let three_two = prob_11_three_type(&two.ts, &two.mix, p).unwrap();
            let eq1 = prob_11_two_type(&two.ts, two.mix.alpha, &two.mix.f, &two.mix.g, p).unwrap();
            worst_two = worst_two.max((three_two - eq1).abs());
        }
    }
    let detail = format!("max |limited - three-type| {worst_full:.1e}, max |three-type - two-type| {worst_two:.1e}");
    if worst_full <= 1e-12 && worst_two <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_2() -> Outcome {
    let mut s = SeededStream::new(202, 0);
    let mut worst = 0.0f64;
    for k in 0..10u64 {
        let consideration = random_consideration(&mut s);
        let sc = random_scenario(&mut s, FAMILIES[k as usize % 4], consideration);
        let p = random_prices(&mut s, &sc.ts);
        let exact = prob_11_limited(&sc, p).unwrap();
        let mc = MonteCarloOracle::new(&sc, 1_000_000, 9000 + k).prob_11(p).unwrap();
        worst = worst.max((exact - mc).abs());
    }
    let detail = format!("max |exact - MC| {worst:.4} over 10 scenarios at 1e6 draws");
    if worst <= 0.005 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3() -> Outcome {
    let sc = Scenario::reference();
    let cfg = IdentifyConfig::default();
    let pert = Perturbation::for_axis(&sc.ts, Axis::Nu, &cfg);
    let (alpha, gamma) = (sc.mix.alpha, sc.mix.gamma());
    let (mut worst_gap, mut worst_side, mut feasible) = (0.0f64, 0.0f64, 0);
    for v in linspace(0.02, 0.98, 51) {
        let est = derivative_gap(&sc, &sc.ts, Axis::Nu, v, &cfg);
        let Some(gap) = est.gap else { continue };
        feasible += 1;
        let fv = sc.mix.f.pdf(v).unwrap();
        worst_gap = worst_gap.max((gap - alpha * fv).abs());

        let matched = match_prices(&sc.ts, Axis::Nu, v, cfg.slack_min).map_err(|e| e.to_string())?;
        for side in [Side::Right, Side::Left] {
            let (d, prices) = one_sided_derivative(&sc, &sc.ts, Axis::Nu, &matched, side, pert).map_err(|e| e.to_string())?;
            let g_w = sc.mix.g.cdf_clamped(sc.ts.w_ii(prices.x_ii));
            let c1 = sc.mix.copula.du(sc.mix.f.cdf(v).unwrap(), g_w);
            let expected = match side {
                Side::Right => alpha * fv + gamma * c1 * fv,
                _ => gamma * c1 * fv,
            };
            worst_side = worst_side.max((d - expected).abs());
        }
    }
    let detail = format!(
        "{feasible}/51 feasible, max |gap - alpha f| {worst_gap:.1e}, max one-sided error {worst_side:.1e}"
    );
    if feasible == 51 && worst_gap <= 1e-3 && worst_side <= 1e-4 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn sup_cdf_error(r: &MarginalRecovery, truth: &MarginalDist) -> f64 {
    r.grid
        .iter()
        .zip(&r.cdf_hat)
        .filter_map(|(&x, c)| Some((c.as_ref()? - truth.cdf(x).unwrap()).abs()))
        .fold(0.0, f64::max)
}

fn criterion_4() -> Outcome {
    let sc = Scenario::reference();
    let r = identify_pipeline(&sc, &IdentifyConfig::default()).map_err(|e| e.to_string())?;
    let (Some(a), Some(b)) = (r.alpha_hat, r.beta_hat) else {
        return Err(format!("missing shares: {:?}", r.errors));
    };
    let (ef, eg) = (sup_cdf_error(&r.f, &sc.mix.f), sup_cdf_error(&r.g, &sc.mix.g));
    let detail = format!("alpha_hat {a:.6}, beta_hat {b:.6}, sup F err {ef:.1e}, sup G err {eg:.1e}");
    if (a - 0.3).abs() <= 1e-3 && (b - 0.5).abs() <= 1e-3 && ef <= 1e-3 && eg <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Outcome {
    let mut sc = Scenario::reference();
    sc.consideration = ConsiderationMeasure::with_full(0.6);
    let r = identify_pipeline(&sc, &IdentifyConfig::default()).map_err(|e| e.to_string())?;
    let Some(ao) = r.alpha_times_o_hat else {
        return Err(format!("missing alpha*O: {:?}", r.errors));
    };
    let ef = sup_cdf_error(&r.f, &sc.mix.f);
    let detail = format!("alpha*O_full hat {ao:.6}, sup F err {ef:.1e}");
    if (ao - 0.18).abs() <= 1e-3 && ef <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_6() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (family, theta) in [
        (CopulaFamily::Independence, 0.0),
        (CopulaFamily::Fgm, 1.0),
        (CopulaFamily::Clayton, 2.0),
    ] {
        let mut sc = Scenario::reference();
        sc.mix.copula = Copula::new(family, theta).unwrap();
        let r = identify_pipeline(&sc, &IdentifyConfig::default()).map_err(|e| e.to_string())?;
        let n = r.copula.iter().filter(|p| p.c_hat.is_some()).count();
        let err = r.copula_sup_error().unwrap_or(f64::INFINITY);
        ok &= n == 81 && err <= 1e-3;
        parts.push(format!("{family:?} {err:.1e} ({n}/81)"));
    }
    let detail = format!("sup |C_hat - C|: {}", parts.join(", "));
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Outcome {
    let base = Scenario::reference();
    let mix = MixtureSpec::new(0.3, 0.7, base.mix.f, base.mix.g, base.mix.copula).unwrap();
    let sc = Scenario::new(base.ts, mix, ConsiderationMeasure::full_attention()).unwrap();
    let r = identify_pipeline(&sc, &IdentifyConfig::default()).map_err(|e| e.to_string())?;
    let (mut worst_truth, mut worst_paths, mut both) = (0.0f64, 0.0f64, 0);
    for (p, g) in r.eq2.iter().zip(&r.f.gaps) {
        let Some(d) = p.derivative else { continue };
        let target = sc.mix.alpha * sc.mix.f.pdf(p.v).unwrap();
        worst_truth = worst_truth.max((d - target).abs());
        if let Some(gap) = g.gap {
            worst_paths = worst_paths.max((d - gap).abs());
            both += 1;
        }
    }
    let n = r.eq2.len();
    let detail = format!(
        "{both}/{n} levels on both paths, max |eq2 - alpha f| {worst_truth:.1e}, max |eq2 - gap| {worst_paths:.1e}"
    );
    if both * 2 >= n && worst_truth <= 1e-3 && worst_paths <= 1e-3 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn run_cli(args: &[&str]) -> i32 {
    let mut full = vec!["ctxrisk"];
    full.extend_from_slice(args);
    cli::run(full)
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_column_empty(path: &Path, column: &str) -> bool {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == column).unwrap();
    rdr.records().all(|r| r.unwrap().get(idx) == Some(""))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/symmetric.toml");
    let out = dir.path().join("out");
    let code = run_cli(&["identify", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let summary = read_json(&out.join("summary.json"));
    let cov_f = summary["coverage_F"].as_f64().unwrap_or(f64::NAN);
    let cov_g = summary["coverage_G"].as_f64().unwrap_or(f64::NAN);
    let no_shares = ["alpha_hat", "alpha_times_O_hat", "beta_hat", "beta_times_O_hat"]
        .iter()
        .all(|k| summary[k].is_null());
    let no_numbers = csv_column_empty(&out.join("gap_F.csv"), "gap")
        && csv_column_empty(&out.join("gap_G.csv"), "gap")
        && csv_column_empty(&out.join("F_hat.csv"), "F_hat")
        && csv_column_empty(&out.join("G_hat.csv"), "G_hat");
    let detail = format!(
        "exit {code}, coverage F {cov_f}, G {cov_g}, shares null {no_shares}, gap/cdf columns empty {no_numbers}"
    );
    if code == cli::EXIT_INFEASIBLE && cov_f == 0.0 && cov_g == 0.0 && no_shares && no_numbers {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/dataset.toml");
    let config = config.to_str().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let code = run_cli(&["simulate", "--config", config, "--out", out]);
    if code != 0 {
        return Err(format!("simulate exited {code}"));
    }
    let data = dir.path().join("out/dataset.csv");
    let code = run_cli(&["identify", "--config", config, "--out", out, "--dataset", data.to_str().unwrap()]);
    let summary = read_json(&dir.path().join("out/summary.json"));
    let alpha = summary["alpha_hat"].as_f64().unwrap_or(f64::NAN);
    let beta = summary["beta_hat"].as_f64().unwrap_or(f64::NAN);
    let detail = format!("exit {code}, alpha_hat {alpha:.4} (|err| {:.4}), beta_hat {beta:.4}, 4e6 agents", (alpha - 0.3).abs());
    if code == 0 && (alpha - 0.3).abs() <= 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_10() -> Outcome {
    let copulas = [
        Copula::independence(),
        Copula::new(CopulaFamily::Fgm, -1.0).unwrap(),
        Copula::new(CopulaFamily::Fgm, 1.0).unwrap(),
        Copula::new(CopulaFamily::Clayton, 0.5).unwrap(),
        Copula::new(CopulaFamily::Clayton, 2.0).unwrap(),
        Copula::new(CopulaFamily::Clayton, 10.0).unwrap(),
        Copula::new(CopulaFamily::Gaussian, -0.7).unwrap(),
        Copula::new(CopulaFamily::Gaussian, 0.5).unwrap(),
    ];
    let grid = linspace(0.0, 1.0, 41);
    let (mut boundary, mut rect, mut c1) = (0.0f64, 0.0f64, 0.0f64);
    for c in &copulas {
        for &u in &grid {
            boundary = boundary
                .max(c.cdf(u, 0.0).abs())
                .max(c.cdf(0.0, u).abs())
                .max((c.cdf(u, 1.0) - u).abs())
                .max((c.cdf(1.0, u) - u).abs());
        }
        for i in 1..grid.len() {
            for j in 1..grid.len() {
                let (u1, u2, v1, v2) = (grid[i - 1], grid[i], grid[j - 1], grid[j]);
                let vol = c.cdf(u2, v2) - c.cdf(u1, v2) - c.cdf(u2, v1) + c.cdf(u1, v1);
                rect = rect.min(vol);
            }
        }
        let h = 1e-5;
        for &u in &grid[1..40] {
            for &v in &grid[1..40] {
                let fd = (c.cdf(u + h, v) - c.cdf(u - h, v)) / (2.0 * h);
                c1 = c1.max((fd - c.du(u, v)).abs());
            }
        }
    }

    let ts = ThresholdSystem::default();
    let mut round_trip = 0.0f64;
    for kind in [ThresholdKind::VI, ThresholdKind::VII, ThresholdKind::WI, ThresholdKind::WII] {
        let (lo, hi) = ts.attainable(kind).map_err(|e| e.to_string())?;
        for t in linspace(lo, hi, 201) {
            let x = invert_threshold(&ts, kind, t).map_err(|e| e.to_string())?;
            round_trip = round_trip.max((ts.eval(kind, x).map_err(|e| e.to_string())? - t).abs());
        }
    }
    let crossing = check_single_crossing(&ts, 2001);
    let detail = format!(
        "boundary {boundary:.1e}, min rectangle volume {rect:.1e}, C1 vs FD {c1:.1e}, threshold round trip {round_trip:.1e}, single crossing {}",
        if crossing.passed() { "ok" } else { "violated" }
    );
    if boundary <= 1e-12 && rect >= -1e-12 && c1 <= 1e-6 && round_trip <= 1e-9 && crossing.passed() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(u32, &str, Duration, fn() -> Outcome); 10] = [
        (1, "reduction identities", Duration::from_secs(1), criterion_1),
        (2, "forward model vs Monte Carlo", Duration::from_secs(30), criterion_2),
        (3, "kink identity and one-sided limits", Duration::from_secs(60), criterion_3),
        (4, "end-to-end recovery of alpha, F, beta, G", Duration::from_secs(300), criterion_4),
        (5, "limited consideration alpha*O_full", Duration::from_secs(300), criterion_5),
        (6, "copula recovery", Duration::from_secs(120), criterion_6),
        (7, "two-type baseline consistency", Duration::from_secs(60), criterion_7),
        (8, "infeasibility honesty", Duration::from_secs(10), criterion_8),
        (9, "finite-sample dataset path", Duration::from_secs(600), criterion_9),
        (10, "numerics suite", Duration::from_secs(30), criterion_10),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= budget => (true, d),
            Ok(d) => (false, format!("{d}; over time budget")),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "{} [{id:>2}] {name}: {detail} ({:.2}s of {}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
