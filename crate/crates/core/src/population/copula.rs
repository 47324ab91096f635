use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use super::PopulationError;
use crate::numeric::{find_root, Bracket};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Independence,
    Fgm,
    Clayton,
    Gaussian,
}

/// Largest Clayton parameter accepted; beyond it the copula is numerically
/// indistinguishable from the upper Fréchet bound on a double grid.
pub const CLAYTON_MAX: f64 = 50.0;
/// Gaussian correlations are kept away from ±1.
pub const GAUSSIAN_MAX_ABS: f64 = 0.99;

/// A bivariate copula with one dependence parameter. For the Gaussian family
/// `theta` is the correlation; it is ignored for independence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Copula {
    family: CopulaFamily,
    theta: f64,
}

impl Copula {
    pub fn new(family: CopulaFamily, theta: f64) -> Result<Self, PopulationError> {
        let ok = match family {
            CopulaFamily::Independence => true,
            CopulaFamily::Fgm => (-1.0..=1.0).contains(&theta),
            CopulaFamily::Clayton => theta > 0.0 && theta <= CLAYTON_MAX,
            CopulaFamily::Gaussian => theta.abs() < GAUSSIAN_MAX_ABS,
        };
        if !ok || !theta.is_finite() {
            return Err(PopulationError::BadParameter(format!(
                "theta = {theta} outside the {family:?} copula domain"
            )));
        }
        let theta = if family == CopulaFamily::Independence { 0.0 } else { theta };
        Ok(Self { family, theta })
    }

    pub fn independence() -> Self {
        Self {
            family: CopulaFamily::Independence,
            theta: 0.0,
        }
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `C(u, v)`. Arguments are clamped into the unit square.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if u == 0.0 || v == 0.0 {
            return 0.0;
        }
        if u == 1.0 {
            return v;
        }
        if v == 1.0 {
            return u;
        }
        let theta = self.theta;
        match self.family {
            CopulaFamily::Independence => u * v,
            CopulaFamily::Fgm => u * v * (1.0 + theta * (1.0 - u) * (1.0 - v)),
            CopulaFamily::Clayton => {
                let s = u.powf(-theta) + v.powf(-theta) - 1.0;
                s.powf(-1.0 / theta)
            }
            CopulaFamily::Gaussian => bivariate_normal_cdf(norm_inv(u), norm_inv(v), theta),
        }
    }

    /// `∂C/∂u`, the conditional cdf of the second coordinate given the first.
    pub fn du(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        if v == 0.0 {
            return 0.0;
        }
        if v == 1.0 {
            return 1.0;
        }
        let theta = self.theta;
        let value = match self.family {
            CopulaFamily::Independence => v,
            CopulaFamily::Fgm => v * (1.0 + theta * (1.0 - 2.0 * u) * (1.0 - v)),
            CopulaFamily::Clayton => {
                if u == 0.0 {
                    return 1.0;
                }
                // u^{-θ-1} s^{-1/θ-1} written as (u^{-θ}/s)^{(1+θ)/θ}.
                let a = u.powf(-theta);
                let b = v.powf(-theta);
                let ratio = 1.0 / (1.0 + (b - 1.0) / a);
                ratio.powf((1.0 + theta) / theta)
            }
            CopulaFamily::Gaussian => {
                if theta == 0.0 {
                    return v;
                }
                if u == 0.0 || u == 1.0 {
                    // Conditional law degenerates at an end of the unit interval.
                    return if (u == 0.0) == (theta > 0.0) { 1.0 } else { 0.0 };
                }
                let s = (1.0 - theta * theta).sqrt();
                norm_cdf((norm_inv(v) - theta * norm_inv(u)) / s)
            }
        };
        value.clamp(0.0, 1.0)
    }

    /// The `v` solving `du(u, v) = p`, in closed form for every family.
    pub fn du_inverse(&self, u: f64, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        if p == 0.0 || p == 1.0 {
            return p;
        }
        let u = u.clamp(0.0, 1.0);
        let theta = self.theta;
        let v = match self.family {
            CopulaFamily::Independence => p,
            CopulaFamily::Fgm => {
                let k = theta * (1.0 - 2.0 * u);
                let lead = 1.0 + k;
                2.0 * p / (lead + (lead * lead - 4.0 * k * p).sqrt())
            }
            CopulaFamily::Clayton => {
                if u == 0.0 {
                    return 0.0;
                }
                let a = u.powf(-theta);
                let b = a * (p.powf(-theta / (1.0 + theta)) - 1.0) + 1.0;
                b.powf(-1.0 / theta)
            }
            CopulaFamily::Gaussian => {
                if theta == 0.0 {
                    return p;
                }
                if u == 0.0 || u == 1.0 {
                    return if (u == 0.0) == (theta > 0.0) { 0.0 } else { 1.0 };
                }
                let s = (1.0 - theta * theta).sqrt();
                norm_cdf(theta * norm_inv(u) + s * norm_inv(p))
            }
        };
        v.clamp(0.0, 1.0)
    }

    /// The same inverse by bisection on `du`. Slower; kept as an
    /// independent route for checking [`Copula::du_inverse`].
    pub fn du_inverse_bisect(&self, u: f64, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        find_root(|v| self.du(u, v) - p, Bracket { lo: 0.0, hi: 1.0 }, 0.0)
            .unwrap_or(if p <= 0.0 { 0.0 } else { 1.0 })
    }

    /// Draws `(u, v)` with joint law `C` by conditional inversion.
    pub fn sample_uv(&self, u: f64, p: f64) -> (f64, f64) {
        (u, self.du_inverse(u, p))
    }
}

pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

pub(crate) fn norm_inv(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Ten-point Gauss–Legendre nodes and weights on [-1, 1] (positive half).
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Below this standard-normal quantile the normal mass (≈ 1e-19) is dropped.
const NORMAL_TAIL: f64 = 9.0;

/// `P(X ≤ a, Y ≤ b)` for standard normals with correlation `rho`, as
/// `∫_{-∞}^{a} φ(z) Φ((b − ρ z)/√(1−ρ²)) dz` by composite Gauss–Legendre.
/// Panels are at most half the conditional standard deviation wide, which keeps
/// the absolute error far below 1e-12 for |ρ| < 0.99.
pub(crate) fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let lo = -NORMAL_TAIL;
    let hi = a.min(NORMAL_TAIL);
    if hi <= lo {
        return 0.0;
    }
    let width = (hi - lo) / ((hi - lo) / (0.5 * s.min(0.5))).ceil();
    let panels = ((hi - lo) / width).round() as usize;
    let integrand = |z: f64| norm_pdf(z) * norm_cdf((b - rho * z) / s);
    let mut total = 0.0;
    for k in 0..panels {
        let left = lo + k as f64 * width;
        let mid = left + 0.5 * width;
        let half = 0.5 * width;
        let mut panel = 0.0;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            panel += w * (integrand(mid - half * x) + integrand(mid + half * x));
        }
        total += panel * half;
    }
    total.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn test_set() -> Vec<Copula> {
        vec![
            Copula::independence(),
            Copula::new(CopulaFamily::Fgm, 1.0).unwrap(),
            Copula::new(CopulaFamily::Fgm, -0.6).unwrap(),
            Copula::new(CopulaFamily::Clayton, 0.5).unwrap(),
            Copula::new(CopulaFamily::Clayton, 2.0).unwrap(),
            Copula::new(CopulaFamily::Gaussian, 0.5).unwrap(),
            Copula::new(CopulaFamily::Gaussian, -0.7).unwrap(),
        ]
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(Copula::independence().cdf(0.5, 0.5), 0.25);
        let fgm = Copula::new(CopulaFamily::Fgm, 1.0).unwrap();
        assert_abs_diff_eq!(fgm.cdf(0.5, 0.5), 0.3125, epsilon = 1e-15);
        for c in test_set() {
            for u in [0.0, 0.13, 0.5, 0.77, 1.0] {
                assert_eq!(c.cdf(u, 1.0), u);
                assert_eq!(c.cdf(1.0, u), u);
                assert_eq!(c.cdf(u, 0.0), 0.0);
            }
        }
    }

    #[test]
    fn bad_parameters() {
        assert!(Copula::new(CopulaFamily::Fgm, 1.5).is_err());
        assert!(Copula::new(CopulaFamily::Clayton, 0.0).is_err());
        assert!(Copula::new(CopulaFamily::Gaussian, 0.995).is_err());
        assert!(Copula::new(CopulaFamily::Clayton, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_special_values() {
        // Φ2(0, 0; ρ) = 1/4 + asin(ρ)/(2π).
        for rho in [-0.9, -0.3, 0.0, 0.4, 0.95] {
            let expected = 0.25 + f64::asin(rho) / (2.0 * std::f64::consts::PI);
            assert_abs_diff_eq!(bivariate_normal_cdf(0.0, 0.0, rho), expected, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(bivariate_normal_cdf(1.3, 0.4, 0.0), norm_cdf(1.3) * norm_cdf(0.4), epsilon = 1e-13);
    }

    #[test]
    fn du_inverse_matches_bisection() {
        for c in test_set() {
            for u in [0.05, 0.3, 0.5, 0.81, 0.97] {
                for p in [0.01, 0.2, 0.5, 0.9, 0.999] {
                    let closed = c.du_inverse(u, p);
                    assert_abs_diff_eq!(closed, c.du_inverse_bisect(u, p), epsilon = 1e-10);
                    assert_abs_diff_eq!(c.du(u, closed), p, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn independence_derivative() {
        let c = Copula::independence();
        for u in [0.1, 0.5, 0.9] {
            assert_eq!(c.du(u, 0.37), 0.37);
        }
    }
}
