use super::{Pending, Predictor, ALTERNATION};
use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

/// Online subgradient descent with a fixed step: `b_{t+1} = b_t - eta g_t`, `b_1 = 0`.
#[derive(Debug, Clone)]
pub struct Osd<T> {
    alpha: TargetLevel<T>,
    eta: T,
    radius_raw: T,
    round: u64,
    pending: Option<Pending<T>>,
}

impl<T: Real> Osd<T> {
    pub fn new(alpha: TargetLevel<T>, eta: T) -> Result<Self> {
        Self::starting_at(alpha, eta, T::zero())
    }

    /// Starts from `b_1 = start` instead of zero.
    pub fn starting_at(alpha: TargetLevel<T>, eta: T, start: T) -> Result<Self> {
        if !(eta > T::zero() && eta.is_finite()) {
            return Err(OcpError::param("eta", "step size must be positive and finite"));
        }
        Ok(Self {
            alpha,
            eta,
            radius_raw: start,
            round: 0,
            pending: None,
        })
    }

    pub fn eta(&self) -> T {
        self.eta
    }
}

impl<T: Real> Predictor<T> for Osd<T> {
    fn alpha(&self) -> TargetLevel<T> {
        self.alpha
    }

    fn next_radius(&mut self) -> Radius<T> {
        let raw = self.radius_raw;
        let radius = Radius::clipped(raw);
        self.pending = Some(Pending { raw, radius });
        radius
    }

    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        let p = self.pending.take().expect(ALTERNATION);
        self.round += 1;
        let outcome = RoundOutcome::new(self.round, p.radius, score, self.alpha);
        self.radius_raw = self.radius_raw - self.eta * outcome.grad.value();
        outcome
    }

    fn raw_radius(&self) -> Option<T> {
        self.pending.map(|p| p.raw)
    }
}
