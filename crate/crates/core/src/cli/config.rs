use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::choice::{PriceDesign, PriceRectangle, Scenario};
use crate::identify::IdentifyConfig;
use crate::population::{ConsiderationMeasure, Copula, CopulaFamily, MarginalDist, MarginalFamily, MixtureSpec};
use crate::preferences::{ContextMenu, PricePair, PriceRange, ThresholdSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub numeric: IdentifyConfig,
    pub run: RunConfig,
    pub simulate: SimulateConfig,
    pub region: RegionConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            numeric: IdentifyConfig::default(),
            run: RunConfig::default(),
            simulate: SimulateConfig::default(),
            region: RegionConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextConfig {
    pub mu: f64,
    pub d1: f64,
    pub d2: f64,
    pub r1: f64,
    pub r2: f64,
    pub wealth: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl ContextConfig {
    fn from_parts(m: &ContextMenu, r: PriceRange) -> Self {
        Self {
            mu: m.mu,
            d1: m.d1,
            d2: m.d2,
            r1: m.r1,
            r2: m.r2,
            wealth: m.wealth,
            x_min: r.lo,
            x_max: r.hi,
        }
    }

    fn menu(&self) -> ContextMenu {
        ContextMenu {
            mu: self.mu,
            d1: self.d1,
            d2: self.d2,
            r1: self.r1,
            r2: self.r2,
            wealth: self.wealth,
        }
    }

    fn range(&self) -> PriceRange {
        PriceRange {
            lo: self.x_min,
            hi: self.x_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub alpha: f64,
    pub beta: f64,
    pub f: MarginalFamily,
    pub g: MarginalFamily,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CopulaConfig {
    pub family: CopulaFamily,
    #[serde(default)]
    pub theta: f64,
}

/// Consideration atoms; any atom left out is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AtomsConfig {
    pub both_both: f64,
    pub one_both: f64,
    pub two_both: f64,
    pub both_one: f64,
    pub both_two: f64,
    pub one_one: f64,
    pub one_two: f64,
    pub two_one: f64,
    pub two_two: f64,
}

impl AtomsConfig {
    fn measure(&self) -> ConsiderationMeasure {
        ConsiderationMeasure::from_atoms([
            self.both_both,
            self.one_both,
            self.two_both,
            self.both_one,
            self.both_two,
            self.one_one,
            self.one_two,
            self.two_one,
            self.two_two,
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub nu_bar: f64,
    pub omega_bar: f64,
    pub context_i: ContextConfig,
    pub context_ii: ContextConfig,
    pub mixture: MixtureConfig,
    pub copula: CopulaConfig,
    pub consideration: AtomsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let ts = ThresholdSystem::default();
        Self {
            nu_bar: ts.nu_bar,
            omega_bar: ts.omega_bar,
            context_i: ContextConfig::from_parts(&ts.menu_i, ts.range_i),
            context_ii: ContextConfig::from_parts(&ts.menu_ii, ts.range_ii),
            mixture: MixtureConfig {
                alpha: 0.3,
                beta: 0.5,
                f: MarginalFamily::Beta { a: 2.0, b: 2.0 },
                g: MarginalFamily::Uniform,
            },
            copula: CopulaConfig {
                family: CopulaFamily::Independence,
                theta: 0.0,
            },
            consideration: AtomsConfig {
                both_both: 1.0,
                ..AtomsConfig::default()
            },
        }
    }
}

impl ScenarioConfig {
    pub fn threshold_system(&self) -> Result<ThresholdSystem, CliError> {
        ThresholdSystem::new(
            self.context_i.menu(),
            self.context_ii.menu(),
            self.context_i.range(),
            self.context_ii.range(),
            self.nu_bar,
            self.omega_bar,
        )
        .map_err(|e| CliError::validation("scenario", e))
    }

    pub fn build(&self) -> Result<Scenario, CliError> {
        let ts = self.threshold_system()?;
        let f = MarginalDist::new(self.mixture.f, self.nu_bar).map_err(|e| CliError::validation("scenario.mixture.f", e))?;
        let g = MarginalDist::new(self.mixture.g, self.omega_bar)
            .map_err(|e| CliError::validation("scenario.mixture.g", e))?;
        let copula =
            Copula::new(self.copula.family, self.copula.theta).map_err(|e| CliError::validation("scenario.copula", e))?;
        let mix = MixtureSpec::new(self.mixture.alpha, self.mixture.beta, f, g, copula)
            .map_err(|e| CliError::validation("scenario.mixture", e))?;
        let consideration = self.consideration.measure();
        consideration
            .validate()
            .map_err(|v| CliError::validation("scenario.consideration", crate::population::PopulationError::InvalidConsideration(v)))?;
        Scenario::new(ts, mix, consideration).map_err(|e| CliError::validation("scenario", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectangleConfig {
    pub x_i: [f64; 2],
    pub x_ii: [f64; 2],
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: u64,
    pub truth_columns: bool,
    /// Price boxes; empty means the scenario's full price ranges.
    pub rectangles: Vec<RectangleConfig>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            truth_columns: false,
            rectangles: Vec::new(),
        }
    }
}

impl SimulateConfig {
    pub fn design(&self, ts: &ThresholdSystem) -> Result<PriceDesign, CliError> {
        if self.rectangles.is_empty() {
            return Ok(PriceDesign::full(ts));
        }
        let range = |r: [f64; 2], path: &str| PriceRange::new(r[0], r[1]).map_err(|e| CliError::validation(path, e));
        let rects = self
            .rectangles
            .iter()
            .enumerate()
            .map(|(k, r)| {
                Ok(PriceRectangle {
                    x_i: range(r.x_i, &format!("simulate.rectangles[{k}].x_i"))?,
                    x_ii: range(r.x_ii, &format!("simulate.rectangles[{k}].x_ii"))?,
                    weight: r.weight,
                })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        PriceDesign::new(rects).map_err(|e| CliError::validation("simulate.rectangles", e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegionConfig {
    /// Lattice points per axis.
    pub grid: usize,
    pub x_i: f64,
    pub x_ii: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            grid: 101,
            x_i: 0.6,
            x_ii: 0.5,
        }
    }
}

impl RegionConfig {
    pub fn prices(&self) -> PricePair {
        PricePair::new(self.x_i, self.x_ii)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Dotted path of a numeric config field, e.g. `numeric.eps_rel`.
    pub parameter: String,
    pub values: Vec<f64>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::new(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let message = inner.message().to_string();
            if message.starts_with("unknown field") {
                return CliError::UnknownKey { path, message };
            }
            let (line, column) = inner
                .span()
                .map(|s| line_col(text, s.start))
                .unwrap_or((0, 0));
            CliError::Parse {
                path,
                line,
                column,
                message,
            }
        })
    }

    /// Reads and fully validates a config file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let cfg = Self::from_toml_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Runs every component validator.
    pub fn validate(&self) -> Result<(), CliError> {
        let sc = self.scenario.build()?;
        self.numeric.validate().map_err(|e| CliError::validation("numeric", e))?;
        self.simulate.design(&sc.ts)?;
        if self.simulate.n == 0 {
            return Err(CliError::validation("simulate.n", "must be at least 1"));
        }
        if self.region.grid == 0 {
            return Err(CliError::validation("region.grid", "must be at least 1"));
        }
        sc.ts
            .at(self.region.prices())
            .map_err(|e| CliError::validation("region", e))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, leaving out settings that cannot
    /// change results (worker count, output directory) and the seed, which
    /// is reported on its own.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(run) = v.get_mut("run").and_then(|r| r.as_object_mut()) {
            run.remove("workers");
            run.remove("out_dir");
            run.remove("seed");
        }
        let canonical = serde_json::to_string(&v).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    /// A copy with the numeric field at dotted `path` set to `value`.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Self, CliError> {
        let mut root = toml::Value::try_from(self).map_err(|e| CliError::validation(path, e))?;
        let mut node = &mut root;
        for key in path.split('.') {
            node = node
                .get_mut(key)
                .ok_or_else(|| CliError::validation(path, "no such config field"))?;
        }
        *node = match node {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 && value.abs() < 9.0e15 => toml::Value::Integer(value as i64),
            toml::Value::Integer(_) => return Err(CliError::validation(path, format!("{value} is not an integer"))),
            _ => return Err(CliError::validation(path, "not a numeric field")),
        };
        let text = toml::to_string(&root).map_err(|e| CliError::validation(path, e))?;
        let cfg = Self::from_toml_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}
