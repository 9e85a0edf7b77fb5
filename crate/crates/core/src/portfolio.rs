//! Two-asset conformal market, wealth processes and the universal-portfolio
//! integral used to check the closed-form update.

use crate::bounds::bernoulli_kl;
use crate::error::{OcpError, Result};
use crate::num::Real;
use crate::pinball::{Subgradient, TargetLevel};

/// Gross returns of the two synthetic stocks for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketReturns<T> {
    pub w1: T,
    pub w2: T,
}

impl<T: Real> MarketReturns<T> {
    /// Return of the portfolio putting `lambda` on the first stock.
    pub fn mixed(&self, lambda: T) -> T {
        lambda * self.w1 + (T::one() - lambda) * self.w2
    }
}

/// Coin outcome `c_t = -g_t`: `1 - alpha` on a miss, `-alpha` on a cover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinOutcome<T>(T);

impl<T: Real> CoinOutcome<T> {
    pub fn from_grad(g: Subgradient<T>) -> Self {
        Self(-g.value())
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Signed betting fraction in `[-1/(1-alpha), 1/alpha]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BettingFraction<T>(T);

impl<T: Real> BettingFraction<T> {
    pub fn value(self) -> T {
        self.0
    }

    /// Wealth multiplier `1 + beta c` for one coin outcome.
    pub fn multiplier(self, c: CoinOutcome<T>) -> T {
        T::one() + self.0 * c.value()
    }
}

/// `w1 = 1 - g/alpha`, `w2 = 1 + g/(1 - alpha)`.
pub fn market_returns<T: Real>(g: Subgradient<T>, alpha: TargetLevel<T>) -> MarketReturns<T> {
    let g = g.value();
    // exact zeros for the two admissible gradients, without rounding residue
    let w1 = (T::one() - g / alpha.value()).max(T::zero());
    let w2 = (T::one() + g / alpha.coverage()).max(T::zero());
    MarketReturns { w1, w2 }
}

/// `beta = (lambda - alpha) / (alpha (1 - alpha))`.
pub fn lambda_to_beta<T: Real>(lambda: T, alpha: TargetLevel<T>) -> Result<BettingFraction<T>> {
    check_lambda(lambda)?;
    let a = alpha.value();
    Ok(BettingFraction((lambda - a) / (a * alpha.coverage())))
}

fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if lambda >= T::zero() && lambda <= T::one() {
        Ok(())
    } else {
        Err(OcpError::param(
            "lambda",
            format!(
                "portfolio weight {} outside [0, 1]",
                lambda.to_f64().unwrap_or(f64::NAN)
            ),
        ))
    }
}

/// Result of replaying a portfolio sequence through the market.
#[derive(Debug, Clone, PartialEq)]
pub struct WealthReplay<T> {
    pub final_wealth: T,
    /// Unclipped bets `b_t = W_{t-1} beta_t`.
    pub radii: Vec<T>,
    /// `W_1..W_T`.
    pub path: Vec<T>,
}

/// Replays the wealth process `W_t = W_{t-1} (lambda_t w_{t,1} + (1 - lambda_t) w_{t,2})`
/// from `W_0 = 1`, together with the implied bets.
pub fn wealth_replay<T: Real>(
    lambdas: &[T],
    grads: &[Subgradient<T>],
    alpha: TargetLevel<T>,
) -> Result<WealthReplay<T>> {
    if lambdas.len() != grads.len() {
        return Err(OcpError::LengthMismatch {
            left: lambdas.len(),
            right: grads.len(),
        });
    }
    let mut wealth = T::one();
    let mut radii = Vec::with_capacity(lambdas.len());
    let mut path = Vec::with_capacity(lambdas.len());
    for (&lambda, &g) in lambdas.iter().zip(grads) {
        let beta = lambda_to_beta(lambda, alpha)?;
        radii.push(wealth * beta.value());
        wealth = wealth * market_returns(g, alpha).mixed(lambda);
        path.push(wealth);
    }
    Ok(WealthReplay {
        final_wealth: wealth,
        radii,
        path,
    })
}

/// Jeffreys-prior mixture over constant portfolios, discretized on
/// `lambda = (1 - cos theta) / 2` with the midpoint rule in `theta`.
///
/// Under this substitution the prior density becomes uniform in `theta`, so
/// every node carries equal prior weight. Each node keeps its log-wealth;
/// the posterior mean is formed after shifting by the largest log-wealth.
#[derive(Debug, Clone)]
pub struct JeffreysMixture<T> {
    alpha: TargetLevel<T>,
    lambdas: Vec<T>,
    log_wealth: Vec<T>,
}

impl<T: Real> JeffreysMixture<T> {
    pub fn new(alpha: TargetLevel<T>, nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(OcpError::param("nodes", "need at least one quadrature node"));
        }
        let n = T::count(nodes as u64);
        let lambdas = (0..nodes)
            .map(|j| {
                let theta = T::PI() * (T::count(j as u64) + T::half()) / n;
                (T::one() - theta.cos()) * T::half()
            })
            .collect();
        Ok(Self {
            alpha,
            lambdas,
            log_wealth: vec![T::zero(); nodes],
        })
    }

    /// Multiplies every constant portfolio's wealth by its return for `g`.
    pub fn push(&mut self, g: Subgradient<T>) {
        let r = market_returns(g, self.alpha);
        for (lw, &l) in self.log_wealth.iter_mut().zip(&self.lambdas) {
            *lw = *lw + r.mixed(l).ln();
        }
    }

    /// Posterior mean `int lambda W(lambda) dmu / int W(lambda) dmu`.
    pub fn weight(&self) -> T {
        let top = self.log_wealth.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        let (mut num, mut den) = (T::zero(), T::zero());
        for (&lw, &l) in self.log_wealth.iter().zip(&self.lambdas) {
            let w = (lw - top).exp();
            num = num + l * w;
            den = den + w;
        }
        num / den
    }
}

/// Default node count for [`up_weight_integral`].
pub const DEFAULT_NODES: usize = 100_000;

/// Universal-portfolio weight after the history `grads`, by quadrature.
///
/// Validation oracle for the closed form `(N + 1/2) / t`.
pub fn up_weight_integral<T: Real>(grads: &[Subgradient<T>], alpha: TargetLevel<T>, nodes: usize) -> Result<T> {
    let mut mix = JeffreysMixture::new(alpha, nodes)?;
    for &g in grads {
        mix.push(g);
    }
    Ok(mix.weight())
}

/// Log wealth of the best constant portfolio in hindsight, `T KL(M/T || alpha)`.
pub fn best_crp_log_wealth<T: Real>(miss_count: u64, horizon: u64, alpha: TargetLevel<T>) -> Result<T> {
    if miss_count > horizon {
        return Err(OcpError::param("miss_count", "cannot exceed the horizon"));
    }
    if horizon == 0 {
        return Ok(T::zero());
    }
    let t = T::count(horizon);
    Ok(t * bernoulli_kl(T::count(miss_count) / t, alpha.value())?)
}

/// Slack `(1/2) ln(pi (T + 1))` between the universal portfolio and the best
/// constant portfolio.
pub fn universal_regret_slack<T: Real>(horizon: u64) -> T {
    T::half() * (T::PI() * T::count(horizon + 1)).ln()
}
