use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};

use super::PopulationError;
use crate::numeric::{find_root, Bracket};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MarginalFamily {
    Uniform,
    Beta { a: f64, b: f64 },
}

/// A risk-parameter distribution supported on `[0, bound]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalDist {
    family: MarginalFamily,
    bound: f64,
    ln_norm: f64,
}

impl MarginalDist {
    pub fn new(family: MarginalFamily, bound: f64) -> Result<Self, PopulationError> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(PopulationError::BadParameter(format!("support bound {bound}")));
        }
        let ln_norm = match family {
            MarginalFamily::Uniform => 0.0,
            MarginalFamily::Beta { a, b } => {
                let ok = |p: f64| p.is_finite() && p > 0.0;
                if !(ok(a) && ok(b)) {
                    return Err(PopulationError::BadParameter(format!(
                        "beta shapes must be positive, got a = {a}, b = {b}"
                    )));
                }
                ln_beta(a, b)
            }
        };
        Ok(Self {
            family,
            bound,
            ln_norm,
        })
    }

    pub fn uniform(bound: f64) -> Result<Self, PopulationError> {
        Self::new(MarginalFamily::Uniform, bound)
    }

    pub fn beta(a: f64, b: f64, bound: f64) -> Result<Self, PopulationError> {
        Self::new(MarginalFamily::Beta { a, b }, bound)
    }

    pub fn family(&self) -> MarginalFamily {
        self.family
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn check_support(&self, x: f64) -> Result<f64, PopulationError> {
        if x.is_finite() && (0.0..=self.bound).contains(&x) {
            Ok(x / self.bound)
        } else {
            Err(PopulationError::OutOfSupport {
                point: x,
                lo: 0.0,
                hi: self.bound,
            })
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64, PopulationError> {
        let t = self.check_support(x)?;
        Ok(self.cdf_unit(t))
    }

    pub fn pdf(&self, x: f64) -> Result<f64, PopulationError> {
        let t = self.check_support(x)?;
        let density = match self.family {
            MarginalFamily::Uniform => 1.0,
            MarginalFamily::Beta { a, b } => {
                if (t == 0.0 && a < 1.0) || (t == 1.0 && b < 1.0) {
                    f64::INFINITY
                } else if (t == 0.0 && a > 1.0) || (t == 1.0 && b > 1.0) {
                    0.0
                } else {
                    let log_kernel = |s: f64, p: f64| if p == 1.0 { 0.0 } else { (p - 1.0) * s.ln() };
                    (log_kernel(t, a) + log_kernel(1.0 - t, b) - self.ln_norm).exp()
                }
            }
        };
        Ok(density / self.bound)
    }

    pub fn quantile(&self, p: f64) -> Result<f64, PopulationError> {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(PopulationError::OutOfSupport {
                point: p,
                lo: 0.0,
                hi: 1.0,
            });
        }
        let t = match self.family {
            MarginalFamily::Uniform => p,
            MarginalFamily::Beta { .. } => {
                if p == 0.0 || p == 1.0 {
                    p
                } else {
                    find_root(|t| self.cdf_unit(t) - p, Bracket { lo: 0.0, hi: 1.0 }, 0.0)?
                }
            }
        };
        Ok(t * self.bound)
    }

    /// Cdf at a point already known to lie in the support; values outside
    /// are clamped.
    pub fn cdf_clamped(&self, x: f64) -> f64 {
        self.cdf_unit((x / self.bound).clamp(0.0, 1.0))
    }

    fn cdf_unit(&self, t: f64) -> f64 {
        match self.family {
            MarginalFamily::Uniform => t,
            MarginalFamily::Beta { a, b } => {
                if t <= 0.0 {
                    0.0
                } else if t >= 1.0 {
                    1.0
                } else {
                    beta_reg(a, b, t)
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_basics() {
        let d = MarginalDist::uniform(1.0).unwrap();
        assert_eq!(d.pdf(0.3).unwrap(), 1.0);
        assert_abs_diff_eq!(d.cdf(0.3).unwrap(), 0.3, epsilon = 1e-15);
        assert_eq!(d.cdf(0.0).unwrap(), 0.0);
        assert_eq!(d.cdf(1.0).unwrap(), 1.0);
    }

    #[test]
    fn scaled_beta_density() {
        let d = MarginalDist::beta(2.0, 2.0, 2.0).unwrap();
        assert_abs_diff_eq!(d.pdf(1.0).unwrap(), 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(d.cdf(1.0).unwrap(), 0.5, epsilon = 1e-12);
        // Beta(2,2) cdf is 3t^2 - 2t^3.
        let t: f64 = 0.3;
        assert_abs_diff_eq!(d.cdf(0.6).unwrap(), 3.0 * t * t - 2.0 * t.powi(3), epsilon = 1e-12);
    }

    #[test]
    fn quantile_round_trip() {
        for d in [
            MarginalDist::uniform(1.5).unwrap(),
            MarginalDist::beta(2.0, 2.0, 1.0).unwrap(),
            MarginalDist::beta(0.7, 3.0, 2.0).unwrap(),
        ] {
            for k in 0..=100 {
                let x = d.bound() * k as f64 / 100.0;
                let back = d.quantile(d.cdf(x).unwrap()).unwrap();
                assert!((back - x).abs() <= 1e-10, "{d:?} at {x}: {back}");
            }
        }
    }

    #[test]
    fn out_of_support() {
        let d = MarginalDist::uniform(1.0).unwrap();
        assert!(matches!(d.cdf(1.5), Err(PopulationError::OutOfSupport { .. })));
        assert!(d.pdf(-0.1).is_err());
        assert!(d.quantile(1.1).is_err());
        assert!(MarginalDist::beta(0.0, 1.0, 1.0).is_err());
        assert!(MarginalDist::uniform(0.0).is_err());
    }
}
