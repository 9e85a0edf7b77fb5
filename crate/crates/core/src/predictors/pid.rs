use super::{Predictor, ALTERNATION};
use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

/// Proportional gain of the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gain<T> {
    /// Constant `eta`.
    Fixed(T),
    /// `eta_t = lambda * B_t`, where `B_t` is the running max of observed scores.
    Adaptive(T),
}

/// Tangent integrator `r(E) = K_I tan(E ln(T) / (T C_sat))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub horizon: u64,
    /// `None` uses the running max score.
    pub k_i: Option<T>,
    /// `None` uses `(2/pi) ln(T delta)`.
    pub c_sat: Option<T>,
    pub delta: T,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn for_horizon(horizon: u64) -> Self {
        Self {
            horizon,
            k_i: None,
            c_sat: None,
            delta: T::lit(0.01),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Integrator<T> {
    k_i: Option<T>,
    /// `ln(T) / (T C_sat)`.
    scale: T,
}

/// Conformal P / PI controller: `b_{t+1} = b_t + eta (err_t - alpha) + r(E_t)`.
///
/// The radius is clipped at zero after every update, so the controller's
/// state is always the emitted radius. The tangent argument is clamped to
/// `+-(pi/2 - 1e-6)` so the integrator stays finite.
#[derive(Debug, Clone)]
pub struct Pid<T> {
    alpha: TargetLevel<T>,
    gain: Gain<T>,
    integrator: Option<Integrator<T>>,
    radius: T,
    cum_err: T,
    running_max_score: T,
    round: u64,
    pending: Option<Radius<T>>,
}

impl<T: Real> Pid<T> {
    pub fn new(alpha: TargetLevel<T>, gain: Gain<T>, integrator: Option<IntegratorConfig<T>>) -> Result<Self> {
        match gain {
            Gain::Fixed(eta) if !(eta >= T::zero() && eta.is_finite()) => {
                return Err(OcpError::param("lr", "gain must be finite and nonnegative"))
            }
            Gain::Adaptive(l) if !(l >= T::zero() && l.is_finite()) => {
                return Err(OcpError::param("lambda", "gain scale must be finite and nonnegative"))
            }
            _ => {}
        }
        let integrator = integrator.map(Self::build_integrator).transpose()?;
        Ok(Self {
            alpha,
            gain,
            integrator,
            radius: T::zero(),
            cum_err: T::zero(),
            running_max_score: T::zero(),
            round: 0,
            pending: None,
        })
    }

    /// P control with a constant gain.
    pub fn p_fixed(alpha: TargetLevel<T>, eta: T) -> Result<Self> {
        Self::new(alpha, Gain::Fixed(eta), None)
    }

    /// P control with gain `lambda * max score so far`.
    pub fn p_adaptive(alpha: TargetLevel<T>, lambda: T) -> Result<Self> {
        Self::new(alpha, Gain::Adaptive(lambda), None)
    }

    /// PI control with default integrator constants for `horizon` rounds.
    pub fn pi(alpha: TargetLevel<T>, gain: Gain<T>, horizon: u64) -> Result<Self> {
        Self::new(alpha, gain, Some(IntegratorConfig::for_horizon(horizon)))
    }

    fn build_integrator(cfg: IntegratorConfig<T>) -> Result<Integrator<T>> {
        if cfg.horizon < 2 {
            return Err(OcpError::param("horizon", "PI control needs a horizon of at least 2"));
        }
        let t = T::count(cfg.horizon);
        let c_sat = match cfg.c_sat {
            Some(c) => c,
            None => T::lit(2.0) / T::PI() * (t * cfg.delta).ln(),
        };
        if !(c_sat > T::zero() && c_sat.is_finite()) {
            return Err(OcpError::param(
                "c_sat",
                "saturation constant must be positive (for the default, horizon * delta must exceed 1)",
            ));
        }
        if let Some(k) = cfg.k_i {
            if !(k >= T::zero() && k.is_finite()) {
                return Err(OcpError::param("k_i", "must be finite and nonnegative"));
            }
        }
        Ok(Integrator {
            k_i: cfg.k_i,
            scale: t.ln() / (t * c_sat),
        })
    }

    pub fn cumulative_error(&self) -> T {
        self.cum_err
    }

    fn integrator_step(&self) -> T {
        let Some(int) = self.integrator else {
            return T::zero();
        };
        let limit = T::FRAC_PI_2() - T::lit(1e-6);
        let arg = (self.cum_err * int.scale).max(-limit).min(limit);
        let k_i = int.k_i.unwrap_or(self.running_max_score);
        k_i * arg.tan()
    }
}

impl<T: Real> Predictor<T> for Pid<T> {
    fn alpha(&self) -> TargetLevel<T> {
        self.alpha
    }

    fn next_radius(&mut self) -> Radius<T> {
        let r = Radius::clipped(self.radius);
        self.pending = Some(r);
        r
    }

    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        let radius = self.pending.take().expect(ALTERNATION);
        self.round += 1;
        let outcome = RoundOutcome::new(self.round, radius, score, self.alpha);
        let err = if outcome.covered { T::zero() } else { T::one() };
        let e = err - self.alpha.value();
        self.cum_err = self.cum_err + e;
        self.running_max_score = self.running_max_score.max(score.value());
        let eta = match self.gain {
            Gain::Fixed(eta) => eta,
            Gain::Adaptive(lambda) => lambda * self.running_max_score,
        };
        let next = radius.value() + eta * e + self.integrator_step();
        self.radius = Radius::clipped(next).value();
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn p_step_fixed_gain() {
        let mut p = Pid::p_fixed(lvl(0.05), 0.5).unwrap();
        p.radius = 1.0;
        assert_eq!(p.next_radius().value(), 1.0);
        assert!(!p.observe(sc(2.0)).covered);
        assert_abs_diff_eq!(p.next_radius().value(), 1.475, epsilon = 1e-15);
    }

    #[test]
    fn zero_integrator_reduces_to_p() {
        let mut pi = Pid::pi(lvl(0.05), Gain::Fixed(0.5), 3000).unwrap();
        assert_eq!(pi.integrator_step(), 0.0);
        let mut p = Pid::p_fixed(lvl(0.05), 0.5).unwrap();
        pi.next_radius();
        p.next_radius();
        // a cover at b = 0 needs S = 0; E stays at -alpha, not zero, so compare one step only
        pi.observe(sc(0.0));
        p.observe(sc(0.0));
        assert_eq!(pi.next_radius().value(), 0.0);
        assert_eq!(p.next_radius().value(), 0.0);
    }

    #[test]
    fn adaptive_gain_uses_running_max() {
        let mut p = Pid::p_adaptive(lvl(0.1), 0.1).unwrap();
        p.next_radius();
        p.observe(sc(10.0));
        // eta = 0.1 * 10, miss: 0 + 1 * 0.9
        assert_abs_diff_eq!(p.next_radius().value(), 0.9, epsilon = 1e-15);
        p.observe(sc(4.0));
        assert_abs_diff_eq!(p.next_radius().value(), 1.8, epsilon = 1e-15);
    }

    #[test]
    fn integrator_saturates_on_all_miss_stream() {
        let mut p = Pid::new(
            lvl(0.05),
            Gain::Fixed(0.0),
            Some(IntegratorConfig {
                horizon: 100,
                k_i: Some(1.0),
                c_sat: Some(1e-3),
                delta: 0.01,
            }),
        )
        .unwrap();
        for _ in 0..1000 {
            let b = p.next_radius();
            assert!(b.value().is_finite());
            p.observe(sc(f64::MAX / 4.0));
        }
        let limit = std::f64::consts::FRAC_PI_2 - 1e-6;
        assert_abs_diff_eq!(p.integrator_step(), limit.tan(), epsilon = 1e-3);
    }

    #[test]
    fn construction_errors() {
        assert!(Pid::pi(lvl(0.05), Gain::Fixed(0.5), 1).is_err());
        // horizon * delta <= 1 gives a nonpositive default C_sat
        assert!(Pid::pi(lvl(0.05), Gain::Fixed(0.5), 50).is_err());
        assert!(Pid::p_fixed(lvl(0.05), -1.0).is_err());
        assert!(Pid::p_adaptive(lvl(0.05), f64::NAN).is_err());
    }
}
