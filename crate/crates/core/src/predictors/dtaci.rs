use super::{Pending, Predictor, ALTERNATION};
use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::{Radius, RoundOutcome, Score, TargetLevel};

/// Hyperparameters of [`DtAci`].
#[derive(Debug, Clone, PartialEq)]
pub struct DtAciConfig<T> {
    /// Candidate ACI step sizes, one expert each.
    pub gammas: Vec<T>,
    /// Fixed-share mixing rate.
    pub sigma: T,
    /// Exponential-weights learning rate.
    pub eta: T,
}

impl<T: Real> Default for DtAciConfig<T> {
    /// `gamma = 0.001 * 2^k` for `k = 0..=7`, `sigma = 0.001`, `eta = e`.
    fn default() -> Self {
        Self {
            gammas: (0..8).map(|k| T::lit(0.001 * f64::powi(2.0, k))).collect(),
            sigma: T::lit(0.001),
            eta: T::E(),
        }
    }
}

/// Dynamically-tuned adaptive conformal inference.
///
/// A bank of ACI experts, each tracking its own miscoverage level with a
/// different step size, aggregated by exponential weights with fixed share.
/// The radius is the empirical `(1 - alpha_bar)` quantile of past scores,
/// taken as the `ceil((1 - alpha_bar) n)`-th order statistic. Levels at or
/// below zero give an infinite radius; levels at or above one give zero.
#[derive(Debug, Clone)]
pub struct DtAci<T> {
    alpha: TargetLevel<T>,
    config: DtAciConfig<T>,
    alpha_experts: Vec<T>,
    weights: Vec<T>,
    /// Past scores, kept sorted ascending.
    history: Vec<T>,
    round: u64,
    pending: Option<(T, Pending<T>)>,
}

impl<T: Real> DtAci<T> {
    pub fn new(alpha: TargetLevel<T>) -> Self {
        Self::with_config(alpha, DtAciConfig::default()).expect("default config is valid")
    }

    pub fn with_config(alpha: TargetLevel<T>, config: DtAciConfig<T>) -> Result<Self> {
        if config.gammas.is_empty() {
            return Err(OcpError::param("gammas", "need at least one expert"));
        }
        if config.gammas.iter().any(|g| !(*g > T::zero())) {
            return Err(OcpError::param("gammas", "step sizes must be positive"));
        }
        if !(config.sigma >= T::zero() && config.sigma <= T::one()) {
            return Err(OcpError::param("sigma", "must lie in [0, 1]"));
        }
        if !(config.eta > T::zero()) {
            return Err(OcpError::param("eta", "must be positive"));
        }
        let k = config.gammas.len();
        Ok(Self {
            alpha,
            alpha_experts: vec![alpha.value(); k],
            weights: vec![T::one(); k],
            config,
            history: Vec::new(),
            round: 0,
            pending: None,
        })
    }

    /// Mixture probabilities `p_t^i`.
    pub fn probabilities(&self) -> Vec<T> {
        let total = self.weights.iter().fold(T::zero(), |a, &w| a + w);
        self.weights.iter().map(|&w| w / total).collect()
    }

    pub fn expert_levels(&self) -> &[T] {
        &self.alpha_experts
    }

    /// Aggregated level `alpha_bar_t = sum_i p_t^i alpha_t^i`.
    pub fn aggregate_level(&self) -> T {
        self.probabilities()
            .iter()
            .zip(&self.alpha_experts)
            .fold(T::zero(), |acc, (&p, &a)| acc + p * a)
    }

    /// Radius for miscoverage level `level` given the score history.
    pub fn quantile_radius(&self, level: T) -> Radius<T> {
        let n = self.history.len();
        if n == 0 || level <= T::zero() {
            return Radius::infinite();
        }
        if level >= T::one() {
            return Radius::zero();
        }
        let rank = ((T::one() - level) * T::count(n as u64))
            .ceil()
            .to_usize()
            .unwrap_or(n)
            .clamp(1, n);
        Radius::clipped(self.history[rank - 1])
    }

    /// Largest level whose set still covers `s`: the fraction of past scores
    /// at or above `s`. With no history every set is the full set, so 1.
    pub fn covering_level(&self, s: T) -> T {
        let n = self.history.len();
        if n == 0 {
            return T::one();
        }
        let below = self.history.partition_point(|&h| h < s);
        T::count((n - below) as u64) / T::count(n as u64)
    }
}

/// Pinball loss at level `alpha` between the realized covering level `beta`
/// and an expert's level.
pub(crate) fn expert_loss<T: Real>(beta: T, expert: T, alpha: T) -> T {
    let d = beta - expert;
    if beta >= expert {
        alpha * d
    } else {
        (alpha - T::one()) * d
    }
}

impl<T: Real> Predictor<T> for DtAci<T> {
    fn alpha(&self) -> TargetLevel<T> {
        self.alpha
    }

    fn next_radius(&mut self) -> Radius<T> {
        if let Some((_, p)) = self.pending {
            return p.radius;
        }
        let level = self.aggregate_level();
        let radius = self.quantile_radius(level);
        self.pending = Some((
            level,
            Pending {
                raw: radius.value(),
                radius,
            },
        ));
        radius
    }

    fn observe(&mut self, score: Score<T>) -> RoundOutcome<T> {
        let (_, p) = self.pending.take().expect(ALTERNATION);
        self.round += 1;
        let outcome = RoundOutcome::new(self.round, p.radius, score, self.alpha);
        let s = score.value();
        let a = self.alpha.value();
        let beta = self.covering_level(s);
        let k = T::count(self.weights.len() as u64);

        let mut shrunk: Vec<T> = self
            .weights
            .iter()
            .zip(&self.alpha_experts)
            .map(|(&w, &ai)| w * (-self.config.eta * expert_loss(beta, ai, a)).exp())
            .collect();
        let total = shrunk.iter().fold(T::zero(), |acc, &w| acc + w);
        let sigma = self.config.sigma;
        for w in &mut shrunk {
            *w = (T::one() - sigma) * *w + total * sigma / k;
        }
        // renormalize to keep weights away from underflow; probabilities are unchanged
        let norm = shrunk.iter().fold(T::zero(), |acc, &w| acc + w);
        self.weights = shrunk.into_iter().map(|w| w / norm).collect();

        let errs: Vec<bool> = self
            .alpha_experts
            .iter()
            .map(|&ai| s > self.quantile_radius(ai).value())
            .collect();
        for ((ai, &gamma), err) in self.alpha_experts.iter_mut().zip(&self.config.gammas).zip(errs) {
            let e = if err { T::one() } else { T::zero() };
            *ai = *ai + gamma * (a - e);
        }

        let at = self.history.partition_point(|&h| h <= s);
        self.history.insert(at, s);
        outcome
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_util::*;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expert_loss_example() {
        assert_abs_diff_eq!(expert_loss(0.5, 0.3, 0.1), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(expert_loss(0.2, 0.3, 0.1), 0.09, epsilon = 1e-15);
        assert_eq!(expert_loss(0.3, 0.3, 0.1), 0.0);
    }

    #[test]
    fn default_grid() {
        let c = DtAciConfig::<f64>::default();
        assert_eq!(c.gammas.len(), 8);
        assert_abs_diff_eq!(c.gammas[0], 0.001);
        assert_abs_diff_eq!(c.gammas[7], 0.128, epsilon = 1e-15);
        assert_eq!(c.sigma, 0.001);
        assert_eq!(c.eta, std::f64::consts::E);
    }

    #[test]
    fn cold_start_is_infinite() {
        let mut p = DtAci::new(lvl(0.1));
        assert!(p.next_radius().is_infinite());
        assert!(p.observe(sc(5.0)).covered);
    }

    #[test]
    fn out_of_range_levels() {
        let mut p = DtAci::new(lvl(0.1));
        p.next_radius();
        p.observe(sc(3.0));
        assert!(p.quantile_radius(0.0).is_infinite());
        assert!(p.quantile_radius(-0.2).is_infinite());
        assert_eq!(p.quantile_radius(1.0).value(), 0.0);
        assert_eq!(p.quantile_radius(1.3).value(), 0.0);
    }

    #[test]
    fn quantile_is_ceiling_order_statistic() {
        let mut p = DtAci::new(lvl(0.25));
        for s in [4.0, 1.0, 3.0, 2.0] {
            p.next_radius();
            p.observe(sc(s));
        }
        // sorted [1, 2, 3, 4]; level 0.25 -> ceil(3) = 3rd
        assert_eq!(p.quantile_radius(0.25).value(), 3.0);
        // level 0.3 -> ceil(2.8) = 3rd
        assert_eq!(p.quantile_radius(0.3).value(), 3.0);
        // level 0.9 -> ceil(0.4) = 1st
        assert_eq!(p.quantile_radius(0.9).value(), 1.0);
        assert_eq!(p.quantile_radius(0.01).value(), 4.0);
        // covering level counts ties as covering
        assert_eq!(p.covering_level(3.0), 0.5);
        assert_eq!(p.covering_level(0.5), 1.0);
        assert_eq!(p.covering_level(9.0), 0.0);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut p = DtAci::new(lvl(0.05));
        for i in 0..300 {
            p.next_radius();
            p.observe(sc(((i * 37) % 11) as f64));
            let total: f64 = p.probabilities().iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            assert!(p.probabilities().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn experts_follow_aci_updates() {
        let mut p = DtAci::new(lvl(0.1));
        p.next_radius();
        p.observe(sc(1.0)); // every expert covered by the infinite first set
        for (ai, g) in p.expert_levels().iter().zip(DtAciConfig::<f64>::default().gammas) {
            assert_abs_diff_eq!(*ai, 0.1 + g * 0.1, epsilon = 1e-15);
        }
        p.next_radius();
        p.observe(sc(100.0)); // above every finite quantile
        for (ai, g) in p.expert_levels().iter().zip(DtAciConfig::<f64>::default().gammas) {
            assert_abs_diff_eq!(*ai, 0.1 + g * 0.1 + g * (0.1 - 1.0), epsilon = 1e-15);
        }
    }
}
