//! Deterministic numerical kernels: bracketed root finding, finite
//! differences, composite trapezoid quadrature and seeded random streams.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

/// Default absolute tolerance on the bracket width for [`find_root`].
pub const ROOT_TOL: f64 = 1e-12;
/// Default step for one-sided differences.
pub const ONE_SIDED_STEP: f64 = 1e-5;
/// Default relative step for central differences.
pub const CENTRAL_STEP_REL: f64 = 1e-5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("no sign change on [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    NoSignChange {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("non-finite function value at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid bracket [{lo}, {hi}]")]
    InvalidBracket { lo: f64, hi: f64 },
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("quadrature needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("grid is not strictly increasing at index {index}")]
    NonMonotoneGrid { index: usize },
}

/// A closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Result<Self, NumericError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(NumericError::InvalidBracket { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisection on a sign-changing bracket.
///
/// Stops once the bracket is no wider than `tol`, the midpoint is an exact
/// zero, or the midpoint can no longer be separated from the endpoints in
/// floating point. A `tol` of zero therefore bisects to machine precision.
pub fn find_root<F>(mut f: F, bracket: Bracket, tol: f64) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> f64,
{
    let (mut lo, mut hi) = (bracket.lo, bracket.hi);
    let f_lo = eval_finite(&mut f, lo)?;
    let f_hi = eval_finite(&mut f, hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(NumericError::NoSignChange { lo, hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;

    // 2100 halvings exhaust any finite f64 interval.
    for _ in 0..2100 {
        let mid = lo + 0.5 * (hi - lo);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = eval_finite(&mut f, mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + 0.5 * (hi - lo))
}

fn eval_finite<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64, NumericError> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(NumericError::NonFinite { x })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Central,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffConfig {
    pub step: f64,
    pub side: Side,
}

impl DiffConfig {
    pub fn new(step: f64, side: Side) -> Result<Self, NumericError> {
        if !(step.is_finite() && step > 0.0) {
            return Err(NumericError::InvalidStep(step));
        }
        Ok(Self { step, side })
    }

    pub fn left(step: f64) -> Self {
        Self {
            step,
            side: Side::Left,
        }
    }

    pub fn right(step: f64) -> Self {
        Self {
            step,
            side: Side::Right,
        }
    }

    pub fn central(step: f64) -> Self {
        Self {
            step,
            side: Side::Central,
        }
    }
}

/// First-order one-sided or second-order central difference of `f` at `x`.
pub fn directional_diff<F>(mut f: F, x: f64, cfg: DiffConfig) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> f64,
{
    let h = cfg.step;
    if !(h.is_finite() && h > 0.0) {
        return Err(NumericError::InvalidStep(h));
    }
    match cfg.side {
        Side::Left => {
            let f0 = eval_finite(&mut f, x)?;
            let fm = eval_finite(&mut f, x - h)?;
            Ok((f0 - fm) / h)
        }
        Side::Right => {
            let fp = eval_finite(&mut f, x + h)?;
            let f0 = eval_finite(&mut f, x)?;
            Ok((fp - f0) / h)
        }
        Side::Central => {
            let fp = eval_finite(&mut f, x + h)?;
            let fm = eval_finite(&mut f, x - h)?;
            Ok((fp - fm) / (2.0 * h))
        }
    }
}

fn check_grid(points: &[(f64, f64)]) -> Result<(), NumericError> {
    if points.len() < 2 {
        return Err(NumericError::TooFewPoints(points.len()));
    }
    for (i, w) in points.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(NumericError::NonMonotoneGrid { index: i + 1 });
        }
    }
    Ok(())
}

/// Composite trapezoid estimate of the integral of `y dx` over sorted `(x, y)` pairs.
pub fn trapezoid(points: &[(f64, f64)]) -> Result<f64, NumericError> {
    check_grid(points)?;
    Ok(points
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum())
}

/// Running trapezoid integral; the first entry is zero and the last equals
/// [`trapezoid`] over the same points.
pub fn cumulative_trapezoid(points: &[(f64, f64)]) -> Result<Vec<f64>, NumericError> {
    check_grid(points)?;
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(acc);
    for w in points.windows(2) {
        acc += 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1);
        out.push(acc);
    }
    Ok(out)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
                .collect()
        }
    }
}

/// Piecewise-linear interpolation on a strictly increasing grid, held
/// constant outside it.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&g| g <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    ys[k - 1] + t * (ys[k] - ys[k - 1])
}

/// A reproducible random stream identified by `(seed, stream_id)`.
///
/// Backed by the counter-based ChaCha12 generator: the seed fixes the key and
/// the stream id selects an independent keystream, so workers can each own a
/// stream without coordinating.
#[derive(Debug, Clone)]
pub struct SeededStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl SeededStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different id. Mixing the ids
    /// keeps substreams of nearby parents apart.
    pub fn substream(&self, index: u64) -> Self {
        Self::new(self.seed, splitmix64(self.stream_id ^ splitmix64(index)))
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform01(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Rewinds to draw `index` of this stream.
    pub fn seek(&mut self, index: u64) {
        // Each f64 draw consumes two 32-bit words.
        self.rng.set_word_pos(2 * index as u128);
    }
}

/// Uniform draw in `[0, 1)` from `stream`.
pub fn uniform01(stream: &mut SeededStream) -> f64 {
    stream.uniform01()
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
