//! Simulation and identification of a three-type mixture of context-dependent
//! risk preferences over two insurance contexts, with optional limited
//! consideration.
//!
//! The forward model ([`choice`]) maps primitives to bundle-choice
//! probabilities; [`identify`] recovers the primitives back from those
//! probabilities through the jump in one-sided derivatives that appears when
//! the two contexts' cutoffs cross.

pub mod numeric;
pub mod preferences;
pub mod population;
pub mod choice;
pub mod identify;
pub mod cli;
