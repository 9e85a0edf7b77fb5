//! Closed-form coverage and regret bounds, and the growth envelope they take.
//!
//! All logarithms are natural. Every function here is total for its
//! documented domain and returns finite values for finite inputs.

use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::Score;

/// Absolute tolerance used by [`BoundVerdict`].
pub const VERDICT_TOLERANCE: f64 = 1e-9;

/// Polynomial growth assumption `S_t <= d * t^q` for all rounds `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthEnvelope<T> {
    d: T,
    q: T,
}

impl<T: Real> GrowthEnvelope<T> {
    pub fn new(d: T, q: T) -> Result<Self> {
        if !(d > T::zero() && d.is_finite()) {
            return Err(OcpError::param("d", "envelope scale must be positive and finite"));
        }
        if !(q >= T::zero() && q.is_finite()) {
            return Err(OcpError::param("q", "growth exponent must be finite and nonnegative"));
        }
        Ok(Self { d, q })
    }

    pub fn d(&self) -> T {
        self.d
    }

    pub fn q(&self) -> T {
        self.q
    }

    /// Envelope value `d * t^q` at round `t` (1-based).
    pub fn at(&self, t: u64) -> T {
        self.d * T::count(t).powf(self.q)
    }

    /// True iff every score satisfies the envelope; `scores[0]` is round 1.
    pub fn holds_for(&self, scores: &[Score<T>]) -> bool {
        scores
            .iter()
            .enumerate()
            .all(|(i, s)| s.value() <= self.at(i as u64 + 1))
    }
}

/// Tightest `d` for a given `q`: `max_t S_t / t^q`.
///
/// An all-zero stream yields the smallest positive scalar as `d`.
pub fn fit_growth_envelope<T: Real>(scores: &[Score<T>], q: T) -> Result<GrowthEnvelope<T>> {
    if scores.is_empty() {
        return Err(OcpError::param("scores", "cannot fit an envelope to an empty stream"));
    }
    if !(q >= T::zero() && q.is_finite()) {
        return Err(OcpError::param("q", "growth exponent must be finite and nonnegative"));
    }
    let d = scores
        .iter()
        .enumerate()
        .map(|(i, s)| s.value() / T::count(i as u64 + 1).powf(q))
        .fold(T::min_positive_value(), T::max);
    GrowthEnvelope::new(d, q)
}

/// Outcome of checking an observed quantity against a bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundVerdict {
    pub observed: f64,
    pub bound: f64,
    pub holds: bool,
    /// `bound - observed`.
    pub slack: f64,
}

impl BoundVerdict {
    pub fn new(observed: f64, bound: f64) -> Self {
        Self {
            observed,
            bound,
            holds: observed <= bound + VERDICT_TOLERANCE,
            slack: bound - observed,
        }
    }
}

fn x_ln_ratio<T: Real>(x: T, y: T) -> T {
    if x == T::zero() {
        T::zero()
    } else {
        x * (x / y).ln()
    }
}

/// Bernoulli KL divergence `KL(p || q)` with `0 ln 0 = 0`.
pub fn bernoulli_kl<T: Real>(p: T, q: T) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(OcpError::param("q", "must lie in (0, 1)"));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(OcpError::param("p", "must lie in [0, 1]"));
    }
    let kl = x_ln_ratio(p, q) + x_ln_ratio(T::one() - p, T::one() - q);
    Ok(kl.max(T::zero()))
}

/// Lower bound on the Bernoulli KL: `(p - q)^2 / (2 q (1 - q) + (2/3) |p - q|)`.
pub fn kl_lower_bound_rhs<T: Real>(p: T, q: T) -> Result<T> {
    if !(q > T::zero() && q < T::one()) {
        return Err(OcpError::param("q", "must lie in (0, 1)"));
    }
    if !(p >= T::zero() && p <= T::one()) {
        return Err(OcpError::param("p", "must lie in [0, 1]"));
    }
    let d = p - q;
    if d == T::zero() {
        return Ok(T::zero());
    }
    Ok(d * d / (T::lit(2.0) * q * (T::one() - q) + T::lit(2.0 / 3.0) * d.abs()))
}

/// `eps_T = (1/T) [ln(1 + (1-alpha) D (T+1)^{q+1} / (q+1)) + (1/2) ln(pi (T+1))]`.
pub fn up_epsilon<T: Real>(horizon: u64, env: &GrowthEnvelope<T>, alpha: T) -> T {
    let t = T::count(horizon);
    let t1 = t + T::one();
    let q1 = env.q() + T::one();
    let growth = T::one() + (T::one() - alpha) * env.d() * t1.powf(q1) / q1;
    (growth.ln() + T::half() * (T::PI() * t1).ln()) / t
}

/// Miscoverage bound for the universal-portfolio calibrator:
/// `eps_T + sqrt(2 alpha (1 - alpha) eps_T)`.
pub fn up_coverage_bound<T: Real>(horizon: u64, env: &GrowthEnvelope<T>, alpha: T) -> Result<T> {
    check_horizon(horizon)?;
    let eps = up_epsilon(horizon, env, alpha);
    Ok(eps + (T::lit(2.0) * alpha * (T::one() - alpha) * eps).sqrt())
}

/// Miscoverage bound for the KT bettor:
/// `(1/T) sqrt(2 T ln((sqrt(24) D (1-alpha)/(q+1)) T^{3/2+q} + sqrt(24 T)))`.
pub fn kt_coverage_bound<T: Real>(horizon: u64, env: &GrowthEnvelope<T>, alpha: T) -> Result<T> {
    check_horizon(horizon)?;
    let t = T::count(horizon);
    let s24 = T::lit(24.0).sqrt();
    let q1 = env.q() + T::one();
    let inner = s24 * env.d() * (T::one() - alpha) / q1 * t.powf(T::lit(1.5) + env.q()) + (T::lit(24.0) * t).sqrt();
    Ok((T::lit(2.0) * t * inner.ln()).sqrt() / t)
}

/// Miscoverage bound for fixed-step OSD started at zero: `(D T^q / eta + 1) / T`.
pub fn osd_coverage_bound<T: Real>(horizon: u64, env: &GrowthEnvelope<T>, eta: T) -> Result<T> {
    check_horizon(horizon)?;
    check_eta(eta)?;
    let t = T::count(horizon);
    Ok((env.at(horizon) / eta + T::one()) / t)
}

/// Bound on the OSD iterate `|b_t| <= D (t-1)^q + eta` at round `t >= 1`.
pub fn osd_iterate_bound<T: Real>(round: u64, env: &GrowthEnvelope<T>, eta: T) -> Result<T> {
    check_horizon(round)?;
    check_eta(eta)?;
    Ok(env.d() * T::count(round - 1).powf(env.q()) + eta)
}

/// Linearized-regret envelope `F_T(|u|)` of the universal-portfolio calibrator:
/// the max of `|u| sqrt(2 T a(1-a) ln(4 (T+1)^{3/(2a)} (1-a) u^2 + 1))` and
/// `(4/3) |u| (ln(3 |u| sqrt(T+1)) - 1)`.
pub fn up_regret_envelope<T: Real>(horizon: u64, u: T, alpha: T) -> Result<T> {
    check_horizon(horizon)?;
    let u = u.abs();
    if u == T::zero() {
        return Ok(T::zero());
    }
    let t = T::count(horizon);
    let t1 = t + T::one();
    let var = alpha * (T::one() - alpha);
    // ln(4 (T+1)^{3/(2a)} (1-a) u^2 + 1), evaluated in log space to avoid overflow
    let log_term = T::lit(4.0).ln() + T::lit(1.5) / alpha * t1.ln() + (T::one() - alpha).ln() + T::lit(2.0) * u.ln();
    let ln_arg = if log_term > T::lit(30.0) {
        log_term + (-log_term).exp().ln_1p()
    } else {
        log_term.exp().ln_1p()
    };
    let first = u * (T::lit(2.0) * t * var * ln_arg).sqrt();
    let second = T::lit(4.0 / 3.0) * u * ((T::lit(3.0) * u * t1.sqrt()).ln() - T::one());
    Ok(first.max(second))
}

fn check_horizon(t: u64) -> Result<()> {
    if t == 0 {
        Err(OcpError::param("horizon", "must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_eta<T: Real>(eta: T) -> Result<()> {
    if eta > T::zero() {
        Ok(())
    } else {
        Err(OcpError::param("eta", "step size must be positive"))
    }
}
