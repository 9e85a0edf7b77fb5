use super::{Pending, Predictor, ALTERNATION};
use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

/// Scale-free online gradient descent:
/// `b_{t+1} = b_t - eta g_t / sqrt(eps + sum g_i^2)`, starting at `b_1 = 0`.
#[derive(Debug, Clone)]
pub struct SfOgd<T> {
    alpha: TargetLevel<T>,
    eta: T,
    eps: T,
    radius_raw: T,
    grad_sq_sum: T,
    round: u64,
    pending: Option<Pending<T>>,
}

impl<T: Real> SfOgd<T> {
    pub fn new(alpha: TargetLevel<T>, eta: T) -> Result<Self> {
        Self::with_eps(alpha, eta, T::lit(1e-6))
    }

    pub fn with_eps(alpha: TargetLevel<T>, eta: T, eps: T) -> Result<Self> {
        if !(eta > T::zero() && eta.is_finite()) {
            return Err(OcpError::param("eta", "step size must be positive and finite"));
        }
        if !(eps > T::zero()) {
            return Err(OcpError::param("eps", "must be positive"));
        }
        Ok(Self {
            alpha,
            eta,
            eps,
            radius_raw: T::zero(),
            grad_sq_sum: T::zero(),
            round: 0,
            pending: None,
        })
    }

    pub fn grad_sq_sum(&self) -> T {
        self.grad_sq_sum
    }
}

impl<T: Real> Predictor<T> for SfOgd<T> {
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
        let g = outcome.grad.value();
        self.grad_sq_sum = self.grad_sq_sum + g * g;
        self.radius_raw = self.radius_raw - self.eta * g / (self.grad_sq_sum + self.eps).sqrt();
        outcome
    }

    fn raw_radius(&self) -> Option<T> {
        self.pending.map(|p| p.raw)
    }
}
