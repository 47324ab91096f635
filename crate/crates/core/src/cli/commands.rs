use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::output::{ensure_dir, num, opt, write_json, CsvOut, Provenance};
use super::{CliError, EXIT_INFEASIBLE, EXIT_OK, EXIT_VALIDATION};
use crate::choice::{classify_with, simulate, Bundle, ChoiceError, Scenario};
use crate::identify::{
    identify_dataset, identify_pipeline, Dataset, IdentificationResult, IdentifyError, MarginalRecovery, Stage,
};
use crate::numeric::linspace;
use crate::population::AgentType;

fn provenance(cfg: &ExperimentConfig) -> Provenance {
    Provenance::new(cfg.hash(), cfg.run.seed)
}

impl From<ChoiceError> for CliError {
    fn from(e: ChoiceError) -> Self {
        CliError::validation("scenario", e)
    }
}

/// Writes `dataset.csv` with one row per simulated agent.
pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let sc = cfg.scenario.build()?;
    let design = cfg.simulate.design(&sc.ts)?;
    if cfg.simulate.n == 0 {
        return Err(CliError::validation("simulate.n", "must be at least 1"));
    }
    let dir = &cfg.run.out_dir;
    ensure_dir(dir)?;
    let path = dir.join("dataset.csv");
    let truth = cfg.simulate.truth_columns;
    let mut header = vec!["agent_id", "x_I", "x_II", "choice_I", "choice_II"];
    if truth {
        header.extend(["type", "nu", "omega", "consider_I", "consider_II"]);
    }
    let mut out = CsvOut::create(&path, &provenance(cfg), &header)?;
    let mut counts = [0u64; 4];
    simulate::<CliError, _>(&sc, &design, cfg.simulate.n, cfg.run.seed, |a| {
        counts[Bundle::ALL.iter().position(|b| *b == a.bundle).unwrap_or(0)] += 1;
        let mut row = vec![
            a.id.to_string(),
            num(a.prices.x_i),
            num(a.prices.x_ii),
            a.bundle.opt_i.index().to_string(),
            a.bundle.opt_ii.index().to_string(),
        ];
        if truth {
            row.extend([
                a.draw.kind.label().to_string(),
                opt(a.draw.nu(&sc)),
                opt(a.draw.omega(&sc)),
                a.draw.consideration.ctx_i.label().to_string(),
                a.draw.consideration.ctx_ii.label().to_string(),
            ]);
        }
        out.row(&row)
    })?;
    out.finish()?;

    #[derive(Serialize)]
    struct SimSummary<'a> {
        n: u64,
        bundle_shares: [f64; 4],
        #[serde(flatten)]
        provenance: Provenance,
        config: &'a ExperimentConfig,
    }
    let n = cfg.simulate.n as f64;
    write_json(
        &dir.join("simulate_summary.json"),
        &SimSummary {
            n: cfg.simulate.n,
            bundle_shares: counts.map(|c| c as f64 / n),
            provenance: provenance(cfg),
            config: cfg,
        },
    )?;
    Ok(path)
}

#[derive(Debug, Clone, Serialize)]
pub struct StageMessage {
    pub stage: Stage,
    pub message: String,
}

/// Scalars and diagnostics of one identify run.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub alpha_hat: Option<f64>,
    #[serde(rename = "alpha_times_O_hat")]
    pub alpha_times_o_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    #[serde(rename = "beta_times_O_hat")]
    pub beta_times_o_hat: Option<f64>,
    #[serde(rename = "coverage_F")]
    pub coverage_f: f64,
    #[serde(rename = "coverage_G")]
    pub coverage_g: f64,
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub mode: &'static str,
    pub n_observations: Option<usize>,
    pub copula_sup_error: Option<f64>,
    pub errors: Vec<StageMessage>,
    pub config: ExperimentConfig,
}

pub struct IdentifyOutcome {
    pub summary: Summary,
    pub result: IdentificationResult,
}

impl IdentifyOutcome {
    /// Nonzero when either marginal failed its coverage requirement.
    pub fn exit_code(&self) -> i32 {
        let failed = self
            .result
            .errors
            .iter()
            .any(|e| matches!(e.stage, Stage::AlphaF | Stage::BetaG));
        if failed {
            EXIT_INFEASIBLE
        } else {
            EXIT_OK
        }
    }
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Dataset::from_csv(std::io::BufReader::new(file)).map_err(|e| CliError::validation(&path.display().to_string(), e))
}

fn run_identify(
    cfg: &ExperimentConfig,
    sc: &Scenario,
    data: Option<&Dataset>,
) -> Result<IdentificationResult, CliError> {
    let r = match data {
        Some(d) => identify_dataset(d, sc, &cfg.numeric),
        None => identify_pipeline(sc, &cfg.numeric),
    };
    r.map_err(|e| match e {
        IdentifyError::InvalidConfig(m) => CliError::validation("numeric", m),
        other => CliError::Infeasible(other.to_string()),
    })
}

fn summarize(cfg: &ExperimentConfig, r: &IdentificationResult, mode: &'static str, n_obs: Option<usize>) -> Summary {
    let p = provenance(cfg);
    Summary {
        alpha_hat: r.alpha_hat,
        alpha_times_o_hat: r.alpha_times_o_hat,
        beta_hat: r.beta_hat,
        beta_times_o_hat: r.beta_times_o_hat,
        coverage_f: r.coverage_f(),
        coverage_g: r.coverage_g(),
        config_hash: p.config_hash,
        seed: p.seed,
        version: p.version,
        mode,
        n_observations: n_obs,
        copula_sup_error: r.copula_sup_error(),
        errors: r
            .errors
            .iter()
            .map(|e| StageMessage {
                stage: e.stage,
                message: e.error.to_string(),
            })
            .collect(),
        config: cfg.clone(),
    }
}

fn write_marginal(dir: &Path, prov: &Provenance, r: &MarginalRecovery, var: &str, name: &str) -> Result<(), CliError> {
    let mut gaps = CsvOut::create(&dir.join(format!("gap_{name}.csv")), prov, &[var, "gap", "feasible", "slack"])?;
    for g in &r.gaps {
        gaps.row([num(g.level), opt(g.gap), (g.feasible() as u8).to_string(), opt(g.slack)])?;
    }
    gaps.finish()?;
    let col = format!("{name}_hat");
    let mut cdf = CsvOut::create(&dir.join(format!("{name}_hat.csv")), prov, &[var, col.as_str()])?;
    for (x, c) in r.grid.iter().zip(&r.cdf_hat) {
        cdf.row([num(*x), opt(*c)])?;
    }
    cdf.finish()
}

/// Runs the pipeline and writes gap curves, recovered cdfs, the copula
/// grid, the two-type baseline, a per-point coverage report and
/// `summary.json`. Files are written even when coverage fails.
pub fn cmd_identify(cfg: &ExperimentConfig, dataset: Option<&Path>) -> Result<IdentifyOutcome, CliError> {
    let sc = cfg.scenario.build()?;
    cfg.numeric.validate().map_err(|e| CliError::validation("numeric", e))?;
    let data = dataset.map(load_dataset).transpose()?;
    let result = run_identify(cfg, &sc, data.as_ref())?;
    let mode = if data.is_some() { "dataset" } else { "exact" };
    let summary = summarize(cfg, &result, mode, data.as_ref().map(|d| d.len()));

    let dir = &cfg.run.out_dir;
    ensure_dir(dir)?;
    let prov = provenance(cfg);
    write_marginal(dir, &prov, &result.f, "v", "F")?;
    write_marginal(dir, &prov, &result.g, "w", "G")?;

    let mut cop = CsvOut::create(&dir.join("copula.csv"), &prov, &["u", "v", "C_hat", "C_true"])?;
    for p in &result.copula {
        cop.row([num(p.u), num(p.v), opt(p.c_hat), opt(p.c_true)])?;
    }
    cop.finish()?;

    let mut eq2 = CsvOut::create(&dir.join("eq2.csv"), &prov, &["v", "derivative", "x_I", "x_II"])?;
    for p in &result.eq2 {
        eq2.row([
            num(p.v),
            opt(p.derivative),
            opt(p.prices.map(|x| x.x_i)),
            opt(p.prices.map(|x| x.x_ii)),
        ])?;
    }
    eq2.finish()?;

    let mut cov = CsvOut::create(&dir.join("coverage.csv"), &prov, &["axis", "level", "feasible", "reason"])?;
    for r in [&result.f, &result.g] {
        for g in &r.gaps {
            let reason = g.reason.as_ref().map(|e| e.to_string()).unwrap_or_default();
            cov.row([
                r.axis.label().to_string(),
                num(g.level),
                (g.feasible() as u8).to_string(),
                reason,
            ])?;
        }
    }
    cov.finish()?;

    write_json(&dir.join("summary.json"), &summary)?;
    Ok(IdentifyOutcome { summary, result })
}

/// Writes `region.csv`: the bundle each type picks on a (ν, ω) lattice at
/// the configured prices.
pub fn cmd_region(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let ts = cfg.scenario.threshold_system()?;
    if cfg.region.grid == 0 {
        return Err(CliError::validation("region.grid", "must be at least 1"));
    }
    let t = ts
        .at(cfg.region.prices())
        .map_err(|e| CliError::validation("region", e))?;
    let dir = &cfg.run.out_dir;
    ensure_dir(dir)?;
    let prov = provenance(cfg);
    let path = dir.join("region.csv");
    let mut out = CsvOut::create(&path, &prov, &["nu", "omega", "type", "bundle"])?;
    let nus = linspace(0.0, ts.nu_bar, cfg.region.grid);
    let omegas = linspace(0.0, ts.omega_bar, cfg.region.grid);
    for kind in [AgentType::I, AgentType::II, AgentType::III] {
        for &nu in &nus {
            for &omega in &omegas {
                let b = classify_with(&t, nu, omega, kind);
                out.row([num(nu), num(omega), kind.label().to_string(), b.label()])?;
            }
        }
    }
    out.finish()?;

    #[derive(Serialize)]
    struct RegionSummary {
        x_i: f64,
        x_ii: f64,
        v_i: f64,
        v_ii: f64,
        w_i: f64,
        w_ii: f64,
        #[serde(flatten)]
        provenance: Provenance,
    }
    write_json(
        &dir.join("region_summary.json"),
        &RegionSummary {
            x_i: cfg.region.x_i,
            x_ii: cfg.region.x_ii,
            v_i: t.v_i,
            v_ii: t.v_ii,
            w_i: t.w_i,
            w_ii: t.w_ii,
            provenance: prov,
        },
    )?;
    Ok(path)
}

/// One exact-probability identify run per value of `sweep.parameter`.
/// Values that fail validation are recorded and skipped.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<i32, CliError> {
    let param = cfg.sweep.parameter.as_str();
    if cfg.sweep.values.is_empty() || param.is_empty() {
        log::warn!("sweep has no parameter or no values; nothing to do");
        return Ok(EXIT_OK);
    }
    let dir = &cfg.run.out_dir;
    ensure_dir(dir)?;
    let prov = provenance(cfg);
    let mut scalars = CsvOut::create(
        &dir.join("sweep.csv"),
        &prov,
        &[
            "parameter",
            "value",
            "status",
            "alpha_hat",
            "alpha_times_O_hat",
            "beta_hat",
            "beta_times_O_hat",
            "coverage_F",
            "coverage_G",
            "copula_sup_error",
        ],
    )?;
    let mut f_long = CsvOut::create(&dir.join("sweep_F.csv"), &prov, &["value", "v", "F_hat"])?;
    let mut g_long = CsvOut::create(&dir.join("sweep_G.csv"), &prov, &["value", "w", "G_hat"])?;
    let mut code = EXIT_OK;
    for &value in &cfg.sweep.values {
        let run = cfg.with_parameter(param, value).and_then(|c| {
            let sc = c.scenario.build()?;
            run_identify(&c, &sc, None)
        });
        match run {
            Ok(r) => {
                let failed = r.errors.iter().any(|e| matches!(e.stage, Stage::AlphaF | Stage::BetaG));
                if failed && code == EXIT_OK {
                    code = EXIT_INFEASIBLE;
                }
                scalars.row([
                    param.to_string(),
                    num(value),
                    if failed { "insufficient_coverage" } else { "ok" }.to_string(),
                    opt(r.alpha_hat),
                    opt(r.alpha_times_o_hat),
                    opt(r.beta_hat),
                    opt(r.beta_times_o_hat),
                    num(r.coverage_f()),
                    num(r.coverage_g()),
                    opt(r.copula_sup_error()),
                ])?;
                for (out, m) in [(&mut f_long, &r.f), (&mut g_long, &r.g)] {
                    for (x, c) in m.grid.iter().zip(&m.cdf_hat) {
                        out.row([num(value), num(*x), opt(*c)])?;
                    }
                }
            }
            Err(e) => {
                log::warn!("sweep value {value}: {e}");
                code = if e.exit_code() == EXIT_VALIDATION { EXIT_VALIDATION } else { code.max(e.exit_code()) };
                let status = format!("error: {e}");
                let mut row = vec![param.to_string(), num(value), status];
                row.extend(std::iter::repeat_n(String::new(), 7));
                scalars.row(&row)?;
            }
        }
    }
    scalars.finish()?;
    f_long.finish()?;
    g_long.finish()?;
    Ok(code)
}
