//! Sequential interval calibrators.
//!
//! Every algorithm implements [`Predictor`]: call [`Predictor::next_radius`]
//! to get the half-width for the coming round, then feed the realized score
//! to [`Predictor::observe`]. The two calls must alternate, starting with
//! `next_radius`; calling `observe` first panics. All algorithms are
//! deterministic functions of their configuration and the score stream.

mod alpha_correction;
mod dtaci;
mod kt;
mod osd;
mod pid;
mod sfogd;
mod trivial;
mod up_ocp;

pub use alpha_correction::{AlphaCorrected, OffsetSign};
pub use dtaci::{DtAci, DtAciConfig};
pub use kt::Kt;
pub use osd::Osd;
pub use pid::{Gain, IntegratorConfig, Pid};
pub use sfogd::SfOgd;
pub use trivial::{rational_approximation, Trivial};
pub use up_ocp::UpOcp;

use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel, Trace};

pub trait Predictor<T: Real> {
    /// Miscoverage level used for reporting subgradients.
    fn alpha(&self) -> TargetLevel<T>;

    /// Radius for the upcoming round. Idempotent until the round is observed.
    fn next_radius(&mut self) -> Radius<T>;

    /// Closes the current round with its realized score.
    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T>;

    /// Unclipped iterate behind the pending radius, for algorithms that keep one.
    fn raw_radius(&self) -> Option<T> {
        None
    }

    /// Current wealth, for betting-style algorithms.
    fn wealth(&self) -> Option<T> {
        None
    }
}

impl<T: Real, P: Predictor<T> + ?Sized> Predictor<T> for Box<P> {
    fn alpha(&self) -> TargetLevel<T> {
        (**self).alpha()
    }
    fn next_radius(&mut self) -> Radius<T> {
        (**self).next_radius()
    }
    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        (**self).observe(score)
    }
    fn raw_radius(&self) -> Option<T> {
        (**self).raw_radius()
    }
    fn wealth(&self) -> Option<T> {
        (**self).wealth()
    }
}

/// Runs a predictor over a score stream and records the trace.
pub fn run<T: Real, P: Predictor<T> + ?Sized>(predictor: &mut P, scores: &[Score<T>]) -> Trace<T> {
    let mut trace = Trace::new();
    for &s in scores {
        predictor.next_radius();
        let outcome = predictor.observe(s);
        trace.push(outcome, predictor.wealth());
    }
    trace
}

pub(crate) const ALTERNATION: &str = "observe() called without a pending next_radius()";

/// Radius handed out for the round in progress.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pending<T> {
    pub raw: T,
    pub radius: Radius<T>,
}

#[cfg(test)]
pub(crate) mod test_util {
    use super::*;

    pub fn lvl(a: f64) -> TargetLevel<f64> {
        TargetLevel::new(a).unwrap()
    }

    pub fn sc(s: f64) -> Score<f64> {
        Score::new(s).unwrap()
    }

    pub fn scores(v: &[f64]) -> Vec<Score<f64>> {
        v.iter().map(|&s| sc(s)).collect()
    }
}
