use super::{Predictor, ALTERNATION};
use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

const MAX_DENOMINATOR: u64 = 1000;

/// Best continued-fraction convergent `k / n` of `x` in `(0, 1)` with `n <= max_den`.
pub fn rational_approximation(x: f64, max_den: u64) -> (u64, u64) {
    // convergents h_i / k_i of the continued fraction of x
    let (mut h_prev, mut h) = (0u64, 1u64);
    let (mut k_prev, mut k) = (1u64, 0u64);
    let mut rem = x;
    loop {
        let a = rem.floor();
        if a > u64::MAX as f64 {
            break;
        }
        let a = a as u64;
        let h_next = a.saturating_mul(h).saturating_add(h_prev);
        let k_next = a.saturating_mul(k).saturating_add(k_prev);
        if k_next > max_den {
            break;
        }
        (h_prev, h) = (h, h_next);
        (k_prev, k) = (k, k_next);
        let frac = rem - a as f64;
        if frac.abs() < 1e-12 || (x - h as f64 / k as f64).abs() < 1e-12 {
            break;
        }
        rem = 1.0 / frac;
    }
    (h, k)
}

/// Data-independent cyclic predictor: over each cycle of `n` rounds it emits
/// the full set (`+inf`) `k` times and the zero-radius set otherwise, with
/// `k / n ~ 1 - alpha`. Coverage is exact at every cycle boundary for
/// positive scores, and the sets are useless; this is the reference showing
/// that coverage alone says nothing.
#[derive(Debug, Clone)]
pub struct Trivial<T> {
    alpha: TargetLevel<T>,
    k: u64,
    n: u64,
    round: u64,
    pending: Option<Radius<T>>,
}

impl<T: Real> Trivial<T> {
    pub fn new(alpha: TargetLevel<T>) -> Result<Self> {
        let target = alpha
            .coverage()
            .to_f64()
            .ok_or_else(|| OcpError::param("alpha", "not representable"))?;
        let (mut k, mut n) = rational_approximation(target, MAX_DENOMINATOR);
        // levels within 1/1000 of an endpoint collapse to 0/1 or 1/1
        if k == 0 {
            (k, n) = (1, MAX_DENOMINATOR);
        } else if k >= n {
            (k, n) = (MAX_DENOMINATOR - 1, MAX_DENOMINATOR);
        }
        Ok(Self::with_cycle(alpha, k, n))
    }

    /// Uses the given `k / n` instead of approximating `1 - alpha`.
    pub fn with_cycle(alpha: TargetLevel<T>, k: u64, n: u64) -> Self {
        assert!(0 < k && k < n, "need 0 < k < n, got {k}/{n}");
        Self {
            alpha,
            k,
            n,
            round: 0,
            pending: None,
        }
    }

    /// `(k, n)` with coverage `k / n` per cycle.
    pub fn cycle(&self) -> (u64, u64) {
        (self.k, self.n)
    }

    fn is_full_set(&self, position: u64) -> bool {
        (position + 1) * self.k / self.n > position * self.k / self.n
    }
}

impl<T: Real> Predictor<T> for Trivial<T> {
    fn alpha(&self) -> TargetLevel<T> {
        self.alpha
    }

    fn next_radius(&mut self) -> Radius<T> {
        let r = if self.is_full_set(self.round % self.n) {
            Radius::infinite()
        } else {
            Radius::zero()
        };
        self.pending = Some(r);
        r
    }

    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        let r = self.pending.take().expect(ALTERNATION);
        self.round += 1;
        RoundOutcome::new(self.round, r, score, self.alpha)
    }
}
