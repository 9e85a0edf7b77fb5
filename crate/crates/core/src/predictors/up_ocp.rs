use super::{Pending, Predictor, ALTERNATION};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

/// Universal-portfolio calibrator over the two-asset conformal market.
///
/// The portfolio weight on the "miss" asset is the Jeffreys-prior posterior
/// mean `(N + 1/2) / t`, where `N` counts past misses. The radius is the
/// coin-betting bet `W_{t-1} (lambda_t - alpha) / (alpha (1 - alpha))`,
/// clipped at zero. Wealth evolves multiplicatively and stays positive.
#[derive(Debug, Clone)]
pub struct UpOcp<T> {
    alpha: TargetLevel<T>,
    wealth: T,
    miss_count: u64,
    round: u64,
    pending: Option<(T, Pending<T>)>,
}

impl<T: Real> UpOcp<T> {
    pub fn new(alpha: TargetLevel<T>) -> Self {
        Self {
            alpha,
            wealth: T::one(),
            miss_count: 0,
            round: 0,
            pending: None,
        }
    }

    pub fn miss_count(&self) -> u64 {
        self.miss_count
    }

    /// Completed rounds.
    pub fn rounds(&self) -> u64 {
        self.round
    }

    /// Portfolio weight for the next round, `(N + 1/2) / t`.
    pub fn lambda(&self) -> T {
        (T::count(self.miss_count) + T::half()) / T::count(self.round + 1)
    }
}

impl<T: Real> Predictor<T> for UpOcp<T> {
    fn alpha(&self) -> TargetLevel<T> {
        self.alpha
    }

    fn next_radius(&mut self) -> Radius<T> {
        if let Some((_, p)) = self.pending {
            return p.radius;
        }
        let a = self.alpha.value();
        let lambda = self.lambda();
        let raw = self.wealth * (lambda - a) / (a * self.alpha.coverage());
        let radius = Radius::clipped(raw);
        self.pending = Some((lambda, Pending { raw, radius }));
        radius
    }

    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        let (lambda, p) = self.pending.take().expect(ALTERNATION);
        self.round += 1;
        let outcome = RoundOutcome::new(self.round, p.radius, score, self.alpha);
        if outcome.covered {
            self.wealth = self.wealth * (T::one() - lambda) / self.alpha.coverage();
        } else {
            self.miss_count += 1;
            self.wealth = self.wealth * lambda / self.alpha.value();
        }
        outcome
    }

    fn raw_radius(&self) -> Option<T> {
        self.pending.map(|(_, p)| p.raw)
    }

    fn wealth(&self) -> Option<T> {
        Some(self.wealth)
    }
}
