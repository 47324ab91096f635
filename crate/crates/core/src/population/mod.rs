//! Population primitives: type shares, risk-parameter marginals, the copula
//! tying the two parameters of mixed-type agents, and the consideration
//! measure.

mod consideration;
mod copula;
mod marginal;

pub use consideration::{
    ConsiderationMeasure, ConsiderationSet, ConsiderationViolation, OptionSet, SUM_TOL,
};
pub use copula::{Copula, CopulaFamily, CLAYTON_MAX, GAUSSIAN_MAX_ABS};
pub use marginal::{MarginalDist, MarginalFamily};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{NumericError, SeededStream};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PopulationError {
    #[error("bad parameter: {0}")]
    BadParameter(String),
    #[error("point {point} outside support [{lo}, {hi}]")]
    OutOfSupport { point: f64, lo: f64, hi: f64 },
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
    #[error("invalid consideration measure: {}", join(.0))]
    InvalidConsideration(Vec<ConsiderationViolation>),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

fn join(v: &[ConsiderationViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Which preference type an agent is. Type I uses the CARA family in both
/// contexts, type II the dual family in both, and type III CARA in context I
/// with the dual family in context II.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentType {
    I,
    II,
    III,
}

impl AgentType {
    pub fn label(self) -> &'static str {
        match self {
            AgentType::I => "i",
            AgentType::II => "ii",
            AgentType::III => "iii",
        }
    }
}

impl std::str::FromStr for AgentType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "i" => Ok(AgentType::I),
            "ii" => Ok(AgentType::II),
            "iii" => Ok(AgentType::III),
            other => Err(format!("unknown agent type {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureSpec {
    pub alpha: f64,
    pub beta: f64,
    /// Distribution of the CARA coefficient ν.
    pub f: MarginalDist,
    /// Distribution of the distortion ω.
    pub g: MarginalDist,
    pub copula: Copula,
}

impl MixtureSpec {
    pub fn new(alpha: f64, beta: f64, f: MarginalDist, g: MarginalDist, copula: Copula) -> Result<Self, PopulationError> {
        let spec = Self {
            alpha,
            beta,
            f,
            g,
            copula,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), PopulationError> {
        let (a, b) = (self.alpha, self.beta);
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0 && a + b <= 1.0 + 1e-12) {
            return Err(PopulationError::InvalidMixture(format!(
                "need alpha, beta >= 0 and alpha + beta <= 1, got alpha = {a}, beta = {b}"
            )));
        }
        Ok(())
    }

    /// Share of type III.
    pub fn gamma(&self) -> f64 {
        (1.0 - self.alpha - self.beta).max(0.0)
    }

    pub fn type_for(&self, u: f64) -> AgentType {
        if u < self.alpha {
            AgentType::I
        } else if u < self.alpha + self.beta {
            AgentType::II
        } else {
            AgentType::III
        }
    }
}

/// Draws `(ν, ω)` from `C(F, G)` by conditional inversion.
pub fn sample_pair(c: &Copula, f: &MarginalDist, g: &MarginalDist, stream: &mut SeededStream) -> (f64, f64) {
    let u = stream.uniform01();
    let p = stream.uniform01();
    let (u, v) = c.sample_uv(u, p);
    let nu = f.quantile(u).unwrap_or(f.bound() * u);
    let omega = g.quantile(v).unwrap_or(g.bound() * v);
    (nu, omega)
}
