use serde::{Deserialize, Serialize};

use crate::preferences::{Alternative, Context};

/// Options an agent looks at in one context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptionSet {
    One,
    Two,
    Both,
}

impl OptionSet {
    pub fn contains(self, alt: Alternative) -> bool {
        matches!(
            (self, alt),
            (OptionSet::Both, _) | (OptionSet::One, Alternative::One) | (OptionSet::Two, Alternative::Two)
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            OptionSet::One => "1",
            OptionSet::Two => "2",
            OptionSet::Both => "12",
        }
    }
}

/// A product consideration set: one option set per context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConsiderationSet {
    pub ctx_i: OptionSet,
    pub ctx_ii: OptionSet,
}

impl ConsiderationSet {
    pub const fn new(ctx_i: OptionSet, ctx_ii: OptionSet) -> Self {
        Self { ctx_i, ctx_ii }
    }

    pub const FULL: Self = Self {
        ctx_i: OptionSet::Both,
        ctx_ii: OptionSet::Both,
    };

    pub fn get(&self, ctx: Context) -> OptionSet {
        match ctx {
            Context::I => self.ctx_i,
            Context::II => self.ctx_ii,
        }
    }
}

/// Probability of each of the nine product consideration sets. Field names
/// read context I first: `one_both` is {1} in context I and {1,2} in
/// context II.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsiderationMeasure {
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

impl Default for ConsiderationMeasure {
    fn default() -> Self {
        Self::full_attention()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConsiderationViolation {
    NonFinite { atom: &'static str },
    Negative { atom: &'static str, value: f64 },
    AboveOne { atom: &'static str, value: f64 },
    Sum { sum: f64 },
}

impl std::fmt::Display for ConsiderationViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonFinite { atom } => write!(f, "atom {atom} is not finite"),
            Self::Negative { atom, value } => write!(f, "atom {atom} = {value} is negative"),
            Self::AboveOne { atom, value } => write!(f, "atom {atom} = {value} exceeds 1"),
            Self::Sum { sum } => write!(f, "atoms sum to {sum}, not 1"),
        }
    }
}

/// Tolerance on the unit-sum constraint.
pub const SUM_TOL: f64 = 1e-12;

impl ConsiderationMeasure {
    pub const NAMES: [&'static str; 9] = [
        "both_both",
        "one_both",
        "two_both",
        "both_one",
        "both_two",
        "one_one",
        "one_two",
        "two_one",
        "two_two",
    ];

    const SETS: [ConsiderationSet; 9] = {
        use OptionSet::*;
        [
            ConsiderationSet::new(Both, Both),
            ConsiderationSet::new(One, Both),
            ConsiderationSet::new(Two, Both),
            ConsiderationSet::new(Both, One),
            ConsiderationSet::new(Both, Two),
            ConsiderationSet::new(One, One),
            ConsiderationSet::new(One, Two),
            ConsiderationSet::new(Two, One),
            ConsiderationSet::new(Two, Two),
        ]
    };

    pub fn full_attention() -> Self {
        Self::from_atoms([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn uniform() -> Self {
        Self::from_atoms([1.0 / 9.0; 9])
    }

    /// A measure with the given full-attention mass and the remainder spread
    /// evenly over the other eight atoms.
    pub fn with_full(full: f64) -> Self {
        let rest = (1.0 - full) / 8.0;
        let mut atoms = [rest; 9];
        atoms[0] = full;
        Self::from_atoms(atoms)
    }

    /// Atoms in the order of [`ConsiderationMeasure::NAMES`].
    pub fn from_atoms(a: [f64; 9]) -> Self {
        Self {
            both_both: a[0],
            one_both: a[1],
            two_both: a[2],
            both_one: a[3],
            both_two: a[4],
            one_one: a[5],
            one_two: a[6],
            two_one: a[7],
            two_two: a[8],
        }
    }

    pub fn atoms(&self) -> [f64; 9] {
        [
            self.both_both,
            self.one_both,
            self.two_both,
            self.both_one,
            self.both_two,
            self.one_one,
            self.one_two,
            self.two_one,
            self.two_two,
        ]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConsiderationSet, f64)> {
        Self::SETS.into_iter().zip(self.atoms())
    }

    pub fn full(&self) -> f64 {
        self.both_both
    }

    pub fn is_full_attention(&self) -> bool {
        self.both_both == 1.0
    }

    pub fn validate(&self) -> Result<(), Vec<ConsiderationViolation>> {
        let mut violations = Vec::new();
        for (atom, value) in Self::NAMES.into_iter().zip(self.atoms()) {
            if !value.is_finite() {
                violations.push(ConsiderationViolation::NonFinite { atom });
            } else if value < 0.0 {
                violations.push(ConsiderationViolation::Negative { atom, value });
            } else if value > 1.0 {
                violations.push(ConsiderationViolation::AboveOne { atom, value });
            }
        }
        let sum: f64 = self.atoms().iter().sum();
        if !((sum - 1.0).abs() <= SUM_TOL) {
            violations.push(ConsiderationViolation::Sum { sum });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }

    /// Maps a uniform draw to a consideration set by inverting the
    /// cumulative atom masses.
    pub fn sample(&self, u: f64) -> ConsiderationSet {
        let mut acc = 0.0;
        let mut last = ConsiderationSet::FULL;
        for (set, mass) in self.iter() {
            if mass <= 0.0 {
                continue;
            }
            acc += mass;
            last = set;
            if u < acc {
                return set;
            }
        }
        last
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_examples() {
        assert!(ConsiderationMeasure::uniform().validate().is_ok());
        assert!(ConsiderationMeasure::full_attention().validate().is_ok());
        let mut short = ConsiderationMeasure::uniform();
        short.two_two -= 0.01;
        let v = short.validate().unwrap_err();
        assert!(matches!(v.as_slice(), [ConsiderationViolation::Sum { .. }]));
        let mut neg = ConsiderationMeasure::full_attention();
        neg.one_one = -0.1;
        neg.both_both = 1.1;
        let v = neg.validate().unwrap_err();
        assert!(v.iter().any(|x| matches!(x, ConsiderationViolation::Negative { atom: "one_one", .. })));
        assert!(v.iter().any(|x| matches!(x, ConsiderationViolation::AboveOne { atom: "both_both", .. })));
    }

    #[test]
    fn sampling_covers_atoms() {
        let m = ConsiderationMeasure::uniform();
        let mut counts = [0usize; 9];
        let n = 9000;
        for k in 0..n {
            let set = m.sample((k as f64 + 0.5) / n as f64);
            let idx = ConsiderationMeasure::SETS.iter().position(|s| *s == set).unwrap();
            counts[idx] += 1;
        }
        assert!(counts.iter().all(|&c| c == 1000));
        let forced = ConsiderationMeasure::from_atoms([0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(forced.sample(0.999_999).ctx_i, OptionSet::Two);
    }

    #[test]
    fn option_set_membership() {
        assert!(OptionSet::Both.contains(Alternative::Two));
        assert!(!OptionSet::One.contains(Alternative::Two));
        assert!(OptionSet::Two.contains(Alternative::Two));
    }
}
