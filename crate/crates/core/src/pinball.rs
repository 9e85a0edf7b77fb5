//! Pinball loss, its subgradient, and the coverage bookkeeping built on them.
//!
//! Every predictor in the crate reports its rounds through [`RoundOutcome`],
//! whose coverage flag and subgradient come from the same comparison
//! `radius >= score`. Ties therefore count as covered and carry the
//! subgradient `alpha`.

use crate::error::{OcpError, Result};
use crate::num::Real;

fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Target miscoverage rate, strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TargetLevel<T>(T);

impl<T: Real> TargetLevel<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha > T::zero() && alpha < T::one() {
            Ok(Self(alpha))
        } else {
            Err(OcpError::InvalidAlpha(as_f64(alpha)))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// Target coverage `1 - alpha`.
    #[inline]
    pub fn coverage(self) -> T {
        T::one() - self.0
    }
}

/// Nonconformity score `|y - y_hat|`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Score<T>(T);

impl<T: Real> Score<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(OcpError::InvalidScore(as_f64(value)))
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

/// Wraps a slice of raw values, rejecting the first invalid one.
pub fn scores_from<T: Real>(values: &[T]) -> Result<Vec<Score<T>>> {
    values.iter().map(|&v| Score::new(v)).collect()
}

/// Interval half-width. `+inf` encodes the full (trivially covering) set.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Radius<T>(T);

impl<T: Real> Radius<T> {
    pub fn new(value: T) -> Result<Self> {
        if value >= T::zero() {
            Ok(Self(value))
        } else {
            Err(OcpError::InvalidRadius(as_f64(value)))
        }
    }

    /// `max(0, raw)`. A NaN raw value maps to zero.
    pub fn clipped(raw: T) -> Self {
        if raw > T::zero() {
            Self(raw)
        } else {
            Self(T::zero())
        }
    }

    pub fn zero() -> Self {
        Self(T::zero())
    }

    pub fn infinite() -> Self {
        Self(T::infinity())
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    #[inline]
    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// Set size `2 b`.
    pub fn width(self) -> T {
        self.0 + self.0
    }
}

/// Subgradient of the pinball loss; one of `{-(1 - alpha), alpha}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Subgradient<T>(T);

impl<T: Real> Subgradient<T> {
    pub fn for_verdict(covered: bool, alpha: TargetLevel<T>) -> Self {
        if covered {
            Self(alpha.value())
        } else {
            Self(-alpha.coverage())
        }
    }

    #[inline]
    pub fn value(self) -> T {
        self.0
    }

    /// True when this is the miss subgradient `-(1 - alpha)`.
    pub fn is_miss(self) -> bool {
        self.0 < T::zero()
    }
}

/// `max{(1 - alpha)(s - b), alpha (b - s)}`.
pub fn pinball_loss<T: Real>(b: T, s: Score<T>, alpha: TargetLevel<T>) -> T {
    let a = alpha.value();
    let diff = s.value() - b;
    (alpha.coverage() * diff).max(-a * diff)
}

/// Right subgradient of the pinball loss at `b`: `alpha` if `b >= s`, else `-(1 - alpha)`.
pub fn subgradient<T: Real>(b: T, s: Score<T>, alpha: TargetLevel<T>) -> Subgradient<T> {
    Subgradient::for_verdict(b >= s.value(), alpha)
}

/// One round of the online game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome<T> {
    pub t: u64,
    pub radius: Radius<T>,
    pub score: Score<T>,
    pub covered: bool,
    pub grad: Subgradient<T>,
}

impl<T: Real> RoundOutcome<T> {
    pub fn new(t: u64, radius: Radius<T>, score: Score<T>, alpha: TargetLevel<T>) -> Self {
        let covered = radius.value() >= score.value();
        Self {
            t,
            radius,
            score,
            covered,
            grad: Subgradient::for_verdict(covered, alpha),
        }
    }

    /// `(1 - alpha) S_t + g_t b_t`; nonnegative for every round of every algorithm.
    pub fn reward_slack(&self, alpha: TargetLevel<T>) -> T {
        let b = self.radius.value();
        let g = self.grad.value();
        // g * inf with g > 0 is +inf; only reachable on covered rounds
        alpha.coverage() * self.score.value() + g * b
    }
}

/// Sequence of rounds from one predictor run, plus the wealth path for
/// predictors that keep one.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    rounds: Vec<RoundOutcome<T>>,
    wealth: Option<Vec<T>>,
}

impl<T: Real> Default for Trace<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Trace<T> {
    pub fn new() -> Self {
        Self {
            rounds: Vec::new(),
            wealth: None,
        }
    }

    pub fn from_rounds(rounds: Vec<RoundOutcome<T>>) -> Self {
        Self { rounds, wealth: None }
    }

    /// Appends a round. `wealth` must be given for every round or for none.
    pub fn push(&mut self, outcome: RoundOutcome<T>, wealth: Option<T>) {
        match (wealth, &mut self.wealth) {
            (Some(w), Some(path)) => path.push(w),
            (Some(w), None) if self.rounds.is_empty() => self.wealth = Some(vec![w]),
            (None, None) => {}
            _ => panic!("wealth must be reported for every round or for none"),
        }
        self.rounds.push(outcome);
    }

    pub fn rounds(&self) -> &[RoundOutcome<T>] {
        &self.rounds
    }

    /// Wealth after each round, `W_1..W_T`.
    pub fn wealth(&self) -> Option<&[T]> {
        self.wealth.as_deref()
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn covered_count(&self) -> usize {
        self.rounds.iter().filter(|r| r.covered).count()
    }

    pub fn grad_sum(&self) -> T {
        self.rounds.iter().fold(T::zero(), |acc, r| acc + r.grad.value())
    }

    /// Drops the first `n` rounds (and their wealth entries).
    pub fn skip(&self, n: usize) -> Trace<T> {
        let n = n.min(self.rounds.len());
        Trace {
            rounds: self.rounds[n..].to_vec(),
            wealth: self.wealth.as_ref().map(|w| w[n..].to_vec()),
        }
    }
}

/// `|covered / T - (1 - alpha)|`, the realized miscoverage error.
pub fn miscoverage<T: Real>(trace: &Trace<T>, alpha: TargetLevel<T>) -> Result<T> {
    if trace.is_empty() {
        return Err(OcpError::EmptyTrace);
    }
    let n = T::count(trace.len() as u64);
    let from_counts = (T::count(trace.covered_count() as u64) / n - alpha.coverage()).abs();
    debug_assert!(
        (from_counts - trace.grad_sum().abs() / n).abs() <= T::lit(1e-6),
        "coverage count and subgradient sum disagree"
    );
    Ok(from_counts)
}

/// `sum_t g_t (b_t - u)`.
pub fn linearized_regret<T: Real>(trace: &Trace<T>, u: T) -> Result<T> {
    if trace.is_empty() {
        return Err(OcpError::EmptyTrace);
    }
    let mut total = T::zero();
    for r in trace.rounds() {
        if r.radius.is_infinite() {
            return Err(OcpError::InfiniteRadius {
                round: r.t,
                what: "linearized regret",
            });
        }
        total = total + r.grad.value() * (r.radius.value() - u);
    }
    Ok(total)
}

/// `sum_t loss(b_t) - sum_t loss(u)` against the constant comparator `u`.
pub fn pinball_regret<T: Real>(trace: &Trace<T>, u: T, alpha: TargetLevel<T>) -> Result<T> {
    if trace.is_empty() {
        return Err(OcpError::EmptyTrace);
    }
    let mut total = T::zero();
    for r in trace.rounds() {
        if r.radius.is_infinite() {
            return Err(OcpError::InfiniteRadius {
                round: r.t,
                what: "pinball regret",
            });
        }
        total = total + pinball_loss(r.radius.value(), r.score, alpha) - pinball_loss(u, r.score, alpha);
    }
    Ok(total)
}
