use super::{Pending, Predictor, ALTERNATION};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

/// Krichevsky-Trofimov coin bettor on the pinball subgradients.
///
/// Bets `b_t = beta_t W_{t-1}` with `beta_{t+1} = t/(t+1) beta_t - g_t/(t+1)`
/// and additive wealth `W_t = W_{t-1} - g_t b_t`. The emitted radius is the
/// bet clipped at zero; state evolves on the raw bet.
#[derive(Debug, Clone)]
pub struct Kt<T> {
    alpha: TargetLevel<T>,
    wealth: T,
    fraction: T,
    round: u64,
    pending: Option<Pending<T>>,
}

impl<T: Real> Kt<T> {
    pub fn new(alpha: TargetLevel<T>) -> Self {
        Self {
            alpha,
            wealth: T::one(),
            fraction: T::zero(),
            round: 0,
            pending: None,
        }
    }

    /// Betting fraction for the next round.
    pub fn fraction(&self) -> T {
        self.fraction
    }
}

impl<T: Real> Predictor<T> for Kt<T> {
    fn alpha(&self) -> TargetLevel<T> {
        self.alpha
    }

    fn next_radius(&mut self) -> Radius<T> {
        if let Some(p) = self.pending {
            return p.radius;
        }
        let raw = self.fraction * self.wealth;
        let radius = Radius::clipped(raw);
        self.pending = Some(Pending { raw, radius });
        radius
    }

    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        let p = self.pending.take().expect(ALTERNATION);
        self.round += 1;
        let outcome = RoundOutcome::new(self.round, p.radius, score, self.alpha);
        let g = outcome.grad.value();
        let t = T::count(self.round);
        self.wealth = self.wealth - g * p.raw;
        self.fraction = (t * self.fraction - g) / (t + T::one());
        outcome
    }

    fn raw_radius(&self) -> Option<T> {
        self.pending.map(|p| p.raw)
    }

    fn wealth(&self) -> Option<T> {
        Some(self.wealth)
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_two_rounds() {
        let mut p = Kt::new(lvl(0.05));
        assert_eq!(p.next_radius().value(), 0.0);
        let o = p.observe(sc(3.0));
        assert_abs_diff_eq!(o.grad.value(), -0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(p.wealth().unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.fraction(), 0.475, epsilon = 1e-15);
        assert_abs_diff_eq!(p.next_radius().value(), 0.475, epsilon = 1e-15);
    }

    #[test]
    fn all_miss_matches_scalar_replay() {
        let alpha = 0.5;
        let mut p = Kt::new(lvl(alpha));
        for _ in 0..10 {
            p.next_radius();
            assert!(!p.observe(sc(1e12)).covered);
        }

        // independent replay: every round g = -(1 - alpha)
        let (mut w, mut beta) = (1.0f64, 0.0f64);
        for t in 1..=10 {
            let bet = beta * w;
            let g = -(1.0 - alpha);
            w -= g * bet;
            beta = (t as f64 / (t as f64 + 1.0)) * beta - g / (t as f64 + 1.0);
        }
        assert_abs_diff_eq!(p.wealth().unwrap(), w, epsilon = 1e-12 * w);
    }

    #[test]
    fn fraction_stays_in_unit_ball() {
        let mut p = Kt::new(lvl(0.1));
        for i in 0..500 {
            p.next_radius();
            let s = if i % 7 == 0 { 50.0 } else { 0.1 };
            p.observe(sc(s));
            assert!(p.fraction().abs() <= 1.0);
        }
    }
}
