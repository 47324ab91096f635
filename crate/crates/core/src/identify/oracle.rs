use rayon::prelude::*;

use super::IdentifyError;
use crate::choice::{prob_11_limited, AgentDraw, Bundle, Scenario, DRAWS_PER_AGENT};
use crate::numeric::SeededStream;
use crate::preferences::{Alternative, PricePair};

/// Anything that can report the probability of bundle (1,1) at a price pair.
pub trait ChoiceOracle: Sync {
    fn prob_11(&self, prices: PricePair) -> Result<f64, IdentifyError>;
}

/// Exact probabilities from the model.
impl ChoiceOracle for Scenario {
    fn prob_11(&self, prices: PricePair) -> Result<f64, IdentifyError> {
        Ok(prob_11_limited(self, prices)?)
    }
}

const CHUNK: u64 = 1 << 16;

/// Frequency of bundle (1,1) among `n` simulated agents.
///
/// Every evaluation reuses the same agents (agent `k` always reads the same
/// uniforms), so differences between nearby price pairs are not swamped by
/// fresh sampling noise. Counts are summed as integers, which makes the
/// result independent of how the work is split across threads.
#[derive(Debug, Clone)]
pub struct MonteCarloOracle<'a> {
    pub scenario: &'a Scenario,
    pub n: u64,
    pub seed: u64,
    pub stream_id: u64,
}

impl<'a> MonteCarloOracle<'a> {
    pub fn new(scenario: &'a Scenario, n: u64, seed: u64) -> Self {
        Self {
            scenario,
            n,
            seed,
            stream_id: 0,
        }
    }

    /// Counts of each bundle, indexed as in [`Bundle::ALL`].
    pub fn bundle_counts(&self, prices: PricePair) -> Result<[u64; 4], IdentifyError> {
        let cut = self.scenario.cutoff_probs(prices)?;
        let chunks = self.n.div_ceil(CHUNK);
        let counts = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let start = c * CHUNK;
                let end = (start + CHUNK).min(self.n);
                let mut stream = SeededStream::new(self.seed, self.stream_id);
                stream.seek(start * DRAWS_PER_AGENT);
                let mut local = [0u64; 4];
                for _ in start..end {
                    let b = AgentDraw::draw(self.scenario, &mut stream).choose(&cut);
                    local[bundle_index(b)] += 1;
                }
                local
            })
            .reduce(
                || [0u64; 4],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        Ok(counts)
    }
}

pub(crate) fn bundle_index(b: Bundle) -> usize {
    match (b.opt_i, b.opt_ii) {
        (Alternative::One, Alternative::One) => 0,
        (Alternative::One, Alternative::Two) => 1,
        (Alternative::Two, Alternative::One) => 2,
        (Alternative::Two, Alternative::Two) => 3,
    }
}

impl ChoiceOracle for MonteCarloOracle<'_> {
    fn prob_11(&self, prices: PricePair) -> Result<f64, IdentifyError> {
        if self.n == 0 {
            return Err(IdentifyError::InvalidConfig("Monte Carlo sample size is zero".into()));
        }
        let counts = self.bundle_counts(prices)?;
        Ok(counts[0] as f64 / self.n as f64)
    }
}
