use super::Predictor;
use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

/// Direction of the `k / sqrt(T)` offset applied to the miscoverage parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffsetSign {
    /// Run the inner predictor at `alpha - k/sqrt(T)` (raises coverage).
    #[default]
    Decrease,
    /// Run the inner predictor at `alpha + k/sqrt(T)`.
    Increase,
}

/// Runs any predictor at a shifted miscoverage level while reporting every
/// round against the nominal level.
#[derive(Debug, Clone)]
pub struct AlphaCorrected<P, T> {
    inner: P,
    nominal: TargetLevel<T>,
    effective: TargetLevel<T>,
}

impl<T: Real, P: Predictor<T>> AlphaCorrected<P, T> {
    /// `build` receives the effective level and constructs the inner predictor.
    pub fn new<F>(alpha: TargetLevel<T>, k: T, horizon: u64, sign: OffsetSign, build: F) -> Result<Self>
    where
        F: FnOnce(TargetLevel<T>) -> Result<P>,
    {
        if horizon == 0 {
            return Err(OcpError::param("horizon", "must be at least 1"));
        }
        if !(k >= T::zero() && k.is_finite()) {
            return Err(OcpError::param("k", "offset constant must be finite and nonnegative"));
        }
        let offset = k / T::count(horizon).sqrt();
        let shifted = match sign {
            OffsetSign::Decrease => alpha.value() - offset,
            OffsetSign::Increase => alpha.value() + offset,
        };
        let effective = TargetLevel::new(shifted).map_err(|_| {
            OcpError::param(
                "k",
                format!(
                    "effective level {} falls outside (0, 1)",
                    shifted.to_f64().unwrap_or(f64::NAN)
                ),
            )
        })?;
        Ok(Self {
            inner: build(effective)?,
            nominal: alpha,
            effective,
        })
    }

    pub fn effective_alpha(&self) -> TargetLevel<T> {
        self.effective
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<T: Real, P: Predictor<T>> Predictor<T> for AlphaCorrected<P, T> {
    fn alpha(&self) -> TargetLevel<T> {
        self.nominal
    }

    fn next_radius(&mut self) -> Radius<T> {
        self.inner.next_radius()
    }

    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        let inner = self.inner.observe(score);
        RoundOutcome::new(inner.t, inner.radius, inner.score, self.nominal)
    }

    fn raw_radius(&self) -> Option<T> {
        self.inner.raw_radius()
    }

    fn wealth(&self) -> Option<T> {
        self.inner.wealth()
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::super::{run, UpOcp};
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_offset_is_transparent() {
        let s = scores(&[3.0, 1.0, 8.0, 0.5, 2.0, 2.0, 9.0]);
        let mut wrapped = AlphaCorrected::new(lvl(0.1), 0.0, 7, OffsetSign::Decrease, |a| Ok(UpOcp::new(a))).unwrap();
        let mut plain = UpOcp::new(lvl(0.1));
        assert_eq!(run(&mut wrapped, &s), run(&mut plain, &s));
    }

    #[test]
    fn decrease_offset_arithmetic() {
        let w = AlphaCorrected::new(lvl(0.05), 1.0, 10_000, OffsetSign::Decrease, |a| Ok(UpOcp::new(a))).unwrap();
        assert_abs_diff_eq!(w.effective_alpha().value(), 0.04, epsilon = 1e-15);
        assert_eq!(w.alpha().value(), 0.05);
        let w = AlphaCorrected::new(lvl(0.05), 1.0, 10_000, OffsetSign::Increase, |a| Ok(UpOcp::new(a))).unwrap();
        assert_abs_diff_eq!(w.effective_alpha().value(), 0.06, epsilon = 1e-15);
    }

    #[test]
    fn out_of_range_effective_level() {
        let r = AlphaCorrected::new(lvl(0.01), 5.0, 100, OffsetSign::Decrease, |a| Ok(UpOcp::new(a)));
        assert!(r.is_err());
    }

    #[test]
    fn reports_nominal_subgradients() {
        let mut w = AlphaCorrected::new(lvl(0.2), 1.0, 100, OffsetSign::Decrease, |a| Ok(UpOcp::new(a))).unwrap();
        w.next_radius();
        let o = w.observe(sc(0.0));
        assert!(o.covered);
        assert_eq!(o.grad.value(), 0.2);
    }
}
