//! Coverage and set-size statistics, Pareto frontiers, target tracking and
//! the width-convergence check on i.i.d. streams.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundVerdict;
use crate::error::{OcpError, Result};
use crate::pinball::{miscoverage, pinball_regret, TargetLevel, Trace};

/// Half-width of the band used by [`target_tracking`].
pub const TRACKING_BAND: f64 = 0.03;

/// Summary of one run after burn-in. Sizes are interval widths `2 b_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub marginal_coverage: f64,
    pub longest_error_run: usize,
    pub mean_size: f64,
    pub median_size: f64,
    pub q75: f64,
    pub q90: f64,
    pub q95: f64,
    pub miscov: f64,
    pub rounds_used: usize,
}

/// Nearest-rank quantile of ascending `sorted`: the `ceil(p n)`-th value.
pub fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

fn longest_run(flags: impl Iterator<Item = bool>) -> usize {
    let (mut best, mut cur) = (0, 0);
    for miss in flags {
        cur = if miss { cur + 1 } else { 0 };
        best = best.max(cur);
    }
    best
}

pub fn compute_metrics(trace: &Trace<f64>, burn_in: usize, alpha: TargetLevel<f64>) -> Result<MetricsReport> {
    if burn_in >= trace.len() {
        return Err(OcpError::param(
            "burn_in",
            format!("burn-in {burn_in} leaves no rounds of a {}-round trace", trace.len()),
        ));
    }
    let kept = trace.skip(burn_in);
    let n = kept.len();
    let mut sizes: Vec<f64> = kept.rounds().iter().map(|r| r.radius.width()).collect();
    let mean_size = sizes.iter().sum::<f64>() / n as f64;
    sizes.sort_by(f64::total_cmp);
    Ok(MetricsReport {
        marginal_coverage: kept.covered_count() as f64 / n as f64,
        longest_error_run: longest_run(kept.rounds().iter().map(|r| !r.covered)),
        mean_size,
        median_size: nearest_rank(&sizes, 0.5),
        q75: nearest_rank(&sizes, 0.75),
        q90: nearest_rank(&sizes, 0.90),
        q95: nearest_rank(&sizes, 0.95),
        miscov: miscoverage(&kept, alpha)?,
        rounds_used: n,
    })
}

/// Trailing-window local coverage and mean width.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSeries {
    /// Round index `t` (1-based) closing each window.
    pub t: Vec<u64>,
    pub coverage: Vec<f64>,
    pub width: Vec<f64>,
}

pub fn rolling_local(trace: &Trace<f64>, window: usize) -> Result<LocalSeries> {
    if window == 0 || window > trace.len() {
        return Err(OcpError::param(
            "window",
            format!("window {window} must lie in 1..={}", trace.len()),
        ));
    }
    let rounds = trace.rounds();
    let mut out = LocalSeries {
        t: Vec::with_capacity(rounds.len() - window + 1),
        coverage: Vec::with_capacity(rounds.len() - window + 1),
        width: Vec::with_capacity(rounds.len() - window + 1),
    };
    for w in rounds.windows(window) {
        let covered = w.iter().filter(|r| r.covered).count();
        let width = w.iter().map(|r| r.radius.width()).sum::<f64>();
        out.t.push(w[window - 1].t);
        out.coverage.push(covered as f64 / window as f64);
        out.width.push(width / window as f64);
    }
    Ok(out)
}

/// Set-size statistic plotted against coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeStat {
    #[default]
    Mean,
    Median,
    Q75,
}

impl SizeStat {
    pub fn of(self, report: &MetricsReport) -> f64 {
        match self {
            SizeStat::Mean => report.mean_size,
            SizeStat::Median => report.median_size,
            SizeStat::Q75 => report.q75,
        }
    }
}

impl fmt::Display for SizeStat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizeStat::Mean => "mean",
            SizeStat::Median => "median",
            SizeStat::Q75 => "q75",
        })
    }
}

impl FromStr for SizeStat {
    type Err = OcpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(SizeStat::Mean),
            "median" => Ok(SizeStat::Median),
            "q75" => Ok(SizeStat::Q75),
            other => Err(OcpError::param("stat", format!("unknown size statistic `{other}`"))),
        }
    }
}

/// Metrics of one `(predictor, alpha, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub predictor: String,
    pub alpha: f64,
    pub seed: u64,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub predictor_id: String,
    pub target_alpha: f64,
    pub realized_coverage: f64,
    pub size_stat: f64,
    pub se_coverage: f64,
    pub se_size: f64,
}

/// Sample mean and standard error of the mean (ddof 1; zero for one value).
/// Any infinite value makes both infinite.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    if !mean.is_finite() {
        return (mean, f64::INFINITY);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn group(runs: &[RunRecord]) -> BTreeMap<(String, u64), Vec<&RunRecord>> {
    let mut groups: BTreeMap<(String, u64), Vec<&RunRecord>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.predictor.clone(), r.alpha.to_bits()))
            .or_default()
            .push(r);
    }
    groups
}

/// Seed-averaged `(coverage, size)` per `(predictor, alpha)`, sorted by
/// realized coverage. Infinite sizes are kept.
pub fn pareto_frontier(runs: &[RunRecord], stat: SizeStat) -> Vec<ParetoPoint> {
    let mut points: Vec<ParetoPoint> = group(runs)
        .into_iter()
        .map(|((predictor, bits), rs)| {
            let cov: Vec<f64> = rs.iter().map(|r| r.report.marginal_coverage).collect();
            let size: Vec<f64> = rs.iter().map(|r| stat.of(&r.report)).collect();
            let (realized_coverage, se_coverage) = mean_and_se(&cov);
            let (size_stat, se_size) = mean_and_se(&size);
            ParetoPoint {
                predictor_id: predictor,
                target_alpha: f64::from_bits(bits),
                realized_coverage,
                size_stat,
                se_coverage,
                se_size,
            }
        })
        .collect();
    points.sort_by(|a, b| {
        a.realized_coverage
            .total_cmp(&b.realized_coverage)
            .then_with(|| a.predictor_id.cmp(&b.predictor_id))
    });
    points
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingPoint {
    pub predictor_id: String,
    pub target_alpha: f64,
    pub target_coverage: f64,
    pub realized_coverage: f64,
    pub within_band: bool,
}

/// Seed-averaged realized coverage against `1 - alpha`, flagged against the
/// `+-0.03` band. Ordered by predictor, then alpha.
pub fn target_tracking(runs: &[RunRecord]) -> Vec<TrackingPoint> {
    let mut out: Vec<TrackingPoint> = group(runs)
        .into_iter()
        .map(|((predictor, bits), rs)| {
            let alpha = f64::from_bits(bits);
            let realized = rs.iter().map(|r| r.report.marginal_coverage).sum::<f64>() / rs.len() as f64;
            let target = 1.0 - alpha;
            TrackingPoint {
                predictor_id: predictor,
                target_alpha: alpha,
                target_coverage: target,
                realized_coverage: realized,
                within_band: (realized - target).abs() <= TRACKING_BAND + 1e-12,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        a.predictor_id
            .cmp(&b.predictor_id)
            .then(a.target_alpha.total_cmp(&b.target_alpha))
    });
    out
}

/// Places where realized coverage rises by more than `tolerance` between
/// consecutive alphas of one predictor. Empirical tendency only.
pub fn monotonicity_warnings(points: &[TrackingPoint], tolerance: f64) -> Vec<String> {
    points
        .windows(2)
        .filter(|w| w[0].predictor_id == w[1].predictor_id)
        .filter(|w| w[1].realized_coverage > w[0].realized_coverage + tolerance)
        .map(|w| {
            format!(
                "{}: coverage rises from {:.4} at alpha={:.4} to {:.4} at alpha={:.4}",
                w[0].predictor_id, w[0].realized_coverage, w[0].target_alpha, w[1].realized_coverage, w[1].target_alpha
            )
        })
        .collect()
}

/// Checks `(mean b - b*)^2 <= (2 / kappa) R / T` on the rounds after
/// `burn_in`, where `R` is the trace's measured pinball regret against `b*`.
pub fn width_convergence_check(
    trace: &Trace<f64>,
    alpha: TargetLevel<f64>,
    burn_in: usize,
    oracle_quantile: f64,
    kappa: f64,
) -> Result<BoundVerdict> {
    if !(kappa > 0.0) {
        return Err(OcpError::param("kappa", "density lower bound must be positive"));
    }
    if burn_in >= trace.len() {
        return Err(OcpError::param("burn_in", "leaves no rounds"));
    }
    let kept = trace.skip(burn_in);
    let regret = pinball_regret(&kept, oracle_quantile, alpha)?;
    let n = kept.len() as f64;
    let mean_b = kept.rounds().iter().map(|r| r.radius.value()).sum::<f64>() / n;
    Ok(BoundVerdict::new(
        (mean_b - oracle_quantile).powi(2),
        2.0 / kappa * regret / n,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pinball::{Radius, RoundOutcome, Score};
    use approx::assert_abs_diff_eq;

    fn lvl(a: f64) -> TargetLevel<f64> {
        TargetLevel::new(a).unwrap()
    }

    fn trace(pairs: &[(f64, f64)], alpha: f64) -> Trace<f64> {
        Trace::from_rounds(
            pairs
                .iter()
                .enumerate()
                .map(|(i, &(b, s))| {
                    RoundOutcome::new(
                        i as u64 + 1,
                        Radius::new(b).unwrap(),
                        Score::new(s).unwrap(),
                        lvl(alpha),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn longest_error_run_example() {
        let t = trace(&[(0.0, 1.0), (0.0, 1.0), (2.0, 1.0), (0.0, 1.0)], 0.1);
        let r = compute_metrics(&t, 0, lvl(0.1)).unwrap();
        assert_eq!(r.longest_error_run, 2);
        assert_eq!(r.marginal_coverage, 0.25);
        assert_abs_diff_eq!(r.miscov, (t.grad_sum() / 4.0).abs(), epsilon = 1e-12);
    }

    #[test]
    fn infinite_sizes_sort_last() {
        let mut pairs: Vec<(f64, f64)> = (1..=9).map(|i| (i as f64, 0.5)).collect();
        pairs.push((f64::INFINITY, 0.5));
        let r = compute_metrics(&trace(&pairs, 0.1), 0, lvl(0.1)).unwrap();
        assert!(r.mean_size.is_infinite());
        assert_eq!(r.median_size, 10.0);
        assert_eq!(r.q90, 18.0);
        assert!(r.q95.is_infinite());
        assert!(r.median_size <= r.q75 && r.q75 <= r.q90 && r.q90 <= r.q95);
    }

    #[test]
    fn burn_in_errors_and_skips() {
        let t = trace(&[(0.0, 1.0), (5.0, 1.0), (5.0, 1.0)], 0.1);
        assert!(compute_metrics(&t, 3, lvl(0.1)).is_err());
        let r = compute_metrics(&t, 1, lvl(0.1)).unwrap();
        assert_eq!(r.rounds_used, 2);
        assert_eq!(r.marginal_coverage, 1.0);
        assert_eq!(r.longest_error_run, 0);
    }

    #[test]
    fn rolling_examples() {
        let t = trace(&[(1.0, 0.5); 10], 0.1);
        let l = rolling_local(&t, 4).unwrap();
        assert!(l.coverage.iter().all(|&c| c == 1.0));
        assert_eq!(l.t, (4..=10).collect::<Vec<u64>>());
        assert!(l.width.iter().all(|&w| w == 2.0));

        let alt: Vec<(f64, f64)> = (0..10)
            .map(|i| if i % 2 == 0 { (1.0, 0.5) } else { (0.0, 0.5) })
            .collect();
        let l = rolling_local(&trace(&alt, 0.1), 2).unwrap();
        assert!(l.coverage.iter().all(|&c| c == 0.5));

        let t = trace(&alt, 0.1);
        let l = rolling_local(&t, 10).unwrap();
        assert_eq!(
            l.coverage,
            [compute_metrics(&t, 0, lvl(0.1)).unwrap().marginal_coverage]
        );
        assert!(rolling_local(&t, 11).is_err());
    }

    fn record(p: &str, alpha: f64, seed: u64, cov: f64, mean: f64) -> RunRecord {
        RunRecord {
            predictor: p.into(),
            alpha,
            seed,
            report: MetricsReport {
                marginal_coverage: cov,
                longest_error_run: 0,
                mean_size: mean,
                median_size: mean,
                q75: mean,
                q90: mean,
                q95: mean,
                miscov: 0.0,
                rounds_used: 1,
            },
        }
    }

    #[test]
    fn pareto_single_seed_and_infinity() {
        let runs = vec![record("a", 0.1, 1, 0.9, 3.0), record("b", 0.1, 1, 0.95, f64::INFINITY)];
        let pts = pareto_frontier(&runs, SizeStat::Mean);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].predictor_id, "a");
        assert_eq!((pts[0].se_coverage, pts[0].se_size), (0.0, 0.0));
        assert!(pts[1].size_stat.is_infinite());
    }

    #[test]
    fn pareto_standard_errors() {
        let runs = vec![record("a", 0.1, 1, 0.8, 2.0), record("a", 0.1, 2, 0.9, 4.0)];
        let p = &pareto_frontier(&runs, SizeStat::Mean)[0];
        assert_abs_diff_eq!(p.realized_coverage, 0.85, epsilon = 1e-15);
        // sample sd 0.0707..., se = sd / sqrt(2) = 0.05
        assert_abs_diff_eq!(p.se_coverage, 0.05, epsilon = 1e-12);
        assert_abs_diff_eq!(p.se_size, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn tracking_band() {
        let runs = vec![record("up", 0.05, 1, 0.931, 1.0), record("x", 0.05, 1, 0.91, 1.0)];
        let t = target_tracking(&runs);
        assert!(t[0].within_band);
        assert!(!t[1].within_band);
        let runs = vec![record("a", 0.1, 1, 0.9, 1.0), record("a", 0.2, 1, 0.95, 1.0)];
        assert_eq!(monotonicity_warnings(&target_tracking(&runs), 0.01).len(), 1);
    }

    #[test]
    fn width_check_at_oracle() {
        let pairs: Vec<(f64, f64)> = (0..100).map(|i| (0.9, (i as f64 * 0.37) % 1.0)).collect();
        let v = width_convergence_check(&trace(&pairs, 0.1), lvl(0.1), 0, 0.9, 1.0).unwrap();
        assert_abs_diff_eq!(v.observed, 0.0, epsilon = 1e-20);
        assert!(v.bound >= 0.0);
        assert!(v.holds);
        let inf = trace(&[(f64::INFINITY, 0.1), (1.0, 0.1)], 0.1);
        assert!(width_convergence_check(&inf, lvl(0.1), 0, 0.9, 1.0).is_err());
    }
}
