//! Seeded synthetic score streams, a demonstration AR(3) forecaster and CSV
//! ingestion of precomputed forecasts.
//!
//! Every generator draws from `ChaCha8Rng::seed_from_u64(seed)` switched to
//! its own stream number (sinusoid 1, stationary 2, quadratic 3, i.i.d. 4),
//! so equal seeds never share random numbers across generator kinds.

use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{OcpError, Result};
use crate::pinball::{Score, TargetLevel};

const STREAM_SINUSOID: u64 = 1;
const STREAM_STATIONARY: u64 = 2;
const STREAM_QUADRATIC: u64 = 3;
const STREAM_IID: u64 = 4;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn score(x: f64) -> Score<f64> {
    Score::new(x.max(0.0)).expect("generated scores are finite")
}

/// `S_t = max(0, (sin(2 pi t / P) + 1/2) S_mag + S_min + eps_t)`, `t = 1..T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidConfig {
    pub period: f64,
    pub magnitude: f64,
    pub offset: f64,
    pub noise_sd: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for SinusoidConfig {
    fn default() -> Self {
        Self {
            period: 200.0,
            magnitude: 10.0,
            offset: 2.0,
            noise_sd: 0.3,
            horizon: 3000,
            seed: 0,
        }
    }
}

impl SinusoidConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(OcpError::param("period", "must be positive"));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(OcpError::param("noise_sd", "must be finite and nonnegative"));
        }
        if !self.magnitude.is_finite() || !self.offset.is_finite() {
            return Err(OcpError::param("magnitude", "shape parameters must be finite"));
        }
        check_horizon(self.horizon)
    }
}

pub fn gen_sinusoid(cfg: &SinusoidConfig) -> Result<Vec<Score<f64>>> {
    cfg.validate()?;
    let mut rng = rng_for(cfg.seed, STREAM_SINUSOID);
    let noise = Normal::new(0.0, cfg.noise_sd).expect("validated noise_sd");
    Ok((1..=cfg.horizon)
        .map(|t| {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / cfg.period;
            let eps = noise.sample(&mut rng);
            score((phase.sin() + 0.5) * cfg.magnitude + cfg.offset + eps)
        })
        .collect())
}

/// Spiky stationary stream: `C (1 + B_t E_t)` passed through a centered
/// rolling max of width `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryConfig {
    pub baseline: f64,
    pub spike_prob: f64,
    /// Mean of the exponential spike size.
    pub exp_scale: f64,
    pub window: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self {
            baseline: 10.0,
            spike_prob: 0.1,
            exp_scale: 10.0,
            window: 25,
            horizon: 3000,
            seed: 0,
        }
    }
}

/// Quadratic ramp `T_t = end (t/T)^2` with the same spike and filter model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticMixConfig {
    pub end_value: f64,
    pub spike_prob: f64,
    pub exp_scale: f64,
    pub window: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for QuadraticMixConfig {
    fn default() -> Self {
        Self {
            end_value: 20.0,
            spike_prob: 0.1,
            exp_scale: 10.0,
            window: 25,
            horizon: 3000,
            seed: 0,
        }
    }
}

fn check_horizon(horizon: usize) -> Result<()> {
    if horizon == 0 {
        Err(OcpError::param("horizon", "must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_spikes(level: f64, p: f64, scale: f64, window: usize, horizon: usize) -> Result<()> {
    if !(level >= 0.0 && level.is_finite()) {
        return Err(OcpError::param("baseline", "must be finite and nonnegative"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(OcpError::param("spike_prob", "must lie in [0, 1]"));
    }
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(OcpError::param("exp_scale", "must be finite and nonnegative"));
    }
    if window == 0 || window.is_multiple_of(2) {
        return Err(OcpError::param("window", "must be a positive odd integer"));
    }
    check_horizon(horizon)
}

/// Centered rolling maximum of odd width, truncated at both ends.
pub fn centered_rolling_max(values: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// `level(t) (1 + B_t E_t)` for `t = 1..T`, before filtering.
fn spiked(level: impl Fn(usize) -> f64, p: f64, scale: f64, horizon: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let exp = (scale > 0.0).then(|| Exp::new(1.0 / scale).expect("positive rate"));
    (1..=horizon)
        .map(|t| {
            let spike = rng.random::<f64>() < p;
            let e = exp.as_ref().map_or(0.0, |d| d.sample(rng));
            level(t) * (1.0 + if spike { e } else { 0.0 })
        })
        .collect()
}

pub fn gen_stationary(cfg: &StationaryConfig) -> Result<Vec<Score<f64>>> {
    check_spikes(cfg.baseline, cfg.spike_prob, cfg.exp_scale, cfg.window, cfg.horizon)?;
    let mut rng = rng_for(cfg.seed, STREAM_STATIONARY);
    let raw = spiked(|_| cfg.baseline, cfg.spike_prob, cfg.exp_scale, cfg.horizon, &mut rng);
    Ok(centered_rolling_max(&raw, cfg.window).into_iter().map(score).collect())
}

pub fn gen_quadratic_mix(cfg: &QuadraticMixConfig) -> Result<Vec<Score<f64>>> {
    check_spikes(cfg.end_value, cfg.spike_prob, cfg.exp_scale, cfg.window, cfg.horizon)?;
    let mut rng = rng_for(cfg.seed, STREAM_QUADRATIC);
    let n = cfg.horizon as f64;
    let ramp = |t: usize| cfg.end_value * (t as f64 / n).powi(2);
    let raw = spiked(ramp, cfg.spike_prob, cfg.exp_scale, cfg.horizon, &mut rng);
    Ok(centered_rolling_max(&raw, cfg.window).into_iter().map(score).collect())
}

/// Score law for i.i.d. streams.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IidDistribution {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Exponential with the given mean.
    Exponential { scale: f64 },
}

impl IidDistribution {
    /// Oracle radius `b* = F^{-1}(1 - alpha)`.
    pub fn oracle_quantile(&self, alpha: TargetLevel<f64>) -> f64 {
        match *self {
            IidDistribution::Uniform => alpha.coverage(),
            IidDistribution::Exponential { scale } => scale * (1.0 / alpha.value()).ln(),
        }
    }

    /// Density at the oracle radius; for the uniform law this is the global
    /// lower bound `kappa = 1`.
    pub fn density_at_quantile(&self, alpha: TargetLevel<f64>) -> f64 {
        match *self {
            IidDistribution::Uniform => 1.0,
            IidDistribution::Exponential { scale } => alpha.value() / scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IidConfig {
    pub distribution: IidDistribution,
    pub horizon: usize,
    pub seed: u64,
}

pub fn gen_iid(cfg: &IidConfig) -> Result<Vec<Score<f64>>> {
    check_horizon(cfg.horizon)?;
    let mut rng = rng_for(cfg.seed, STREAM_IID);
    match cfg.distribution {
        IidDistribution::Uniform => Ok((0..cfg.horizon).map(|_| score(rng.random::<f64>())).collect()),
        IidDistribution::Exponential { scale } => {
            if !(scale > 0.0 && scale.is_finite()) {
                return Err(OcpError::param("scale", "must be positive and finite"));
            }
            let d = Exp::new(1.0 / scale).expect("positive rate");
            Ok((0..cfg.horizon).map(|_| score(d.sample(&mut rng))).collect())
        }
    }
}

/// AR(3) residual scores with the 0-based indices of rounds that fell back
/// to last-value prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Ar3Scores {
    /// One score per index `burn_in..len`.
    pub scores: Vec<Score<f64>>,
    pub fallback_rounds: Vec<usize>,
}

/// Relative singular-value cutoff on the normal equations.
const AR_RANK_TOL: f64 = 1e-12;

/// Scores `|y_t - y_hat_t|` of an AR(3)-with-intercept forecaster refit by
/// least squares on all points before `t`, for every `t >= burn_in`.
pub fn ar3_scores(series: &[f64], burn_in: usize) -> Result<Ar3Scores> {
    if burn_in < 4 {
        return Err(OcpError::param("burn_in", "must be at least 4"));
    }
    if series.len() <= burn_in {
        return Err(OcpError::param("series", "must be longer than burn_in"));
    }
    if let Some(x) = series.iter().find(|x| !x.is_finite()) {
        return Err(OcpError::param("series", format!("non-finite value {x}")));
    }
    let row = |j: usize| Vector4::new(1.0, series[j - 1], series[j - 2], series[j - 3]);
    // normal equations over targets j = 3..t, accumulated as t grows
    let mut xtx = Matrix4::<f64>::zeros();
    let mut xty = Vector4::<f64>::zeros();
    for j in 3..burn_in {
        let x = row(j);
        xtx += x * x.transpose();
        xty += x * series[j];
    }
    let mut out = Ar3Scores {
        scores: Vec::with_capacity(series.len() - burn_in),
        fallback_rounds: Vec::new(),
    };
    for t in burn_in..series.len() {
        let svd = xtx.svd(true, true);
        let top = svd.singular_values.max();
        let full_rank = top > 0.0 && svd.rank(top * AR_RANK_TOL) == 4;
        let pred = match full_rank.then(|| svd.solve(&xty, top * AR_RANK_TOL)) {
            Some(Ok(coef)) => coef.dot(&row(t)),
            _ => {
                out.fallback_rounds.push(t);
                series[t - 1]
            }
        };
        out.scores.push(score((series[t] - pred).abs()));
        let x = row(t);
        xtx += x * x.transpose();
        xty += x * series[t];
    }
    Ok(out)
}

/// Reads scores from a CSV with a `t` column and either a `score` column or
/// `y` and `yhat` columns. Other columns are ignored. `t` must increase by
/// exactly one per row.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Vec<Score<f64>>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| OcpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let csv_err = |row: usize, message: String| OcpError::Csv {
        path: path.to_path_buf(),
        row,
        message,
    };
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| csv_err(1, format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    enum Layout {
        Score(usize),
        Residual(usize, usize),
    }
    let t_col = col("t");
    let layout = match (t_col, col("score"), col("y"), col("yhat")) {
        (Some(_), Some(s), _, _) => Layout::Score(s),
        (Some(_), None, Some(y), Some(yh)) => Layout::Residual(y, yh),
        _ => {
            return Err(csv_err(
                1,
                format!(
                    "malformed header `{}`: expected columns t,score or t,y,yhat",
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ))
        }
    };
    let t_col = t_col.expect("checked above");

    let mut scores = Vec::new();
    let mut prev_t: Option<i64> = None;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| csv_err(row, e.to_string()))?;
        let cell = |c: usize, name: &str| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| csv_err(row, format!("non-numeric {name} `{raw}`")))
        };
        let t_raw = rec.get(t_col).unwrap_or("");
        let t: i64 = t_raw
            .parse()
            .map_err(|_| csv_err(row, format!("t must be an integer, got `{t_raw}`")))?;
        if let Some(p) = prev_t {
            if t <= p {
                return Err(csv_err(row, format!("t not increasing: {t} after {p}")));
            }
            if t > p + 1 {
                return Err(csv_err(row, format!("gap at t={}", p + 1)));
            }
        }
        prev_t = Some(t);
        let value = match layout {
            Layout::Score(s) => {
                let v = cell(s, "score")?;
                if v < 0.0 {
                    return Err(csv_err(row, format!("negative score {v}")));
                }
                v
            }
            Layout::Residual(y, yh) => (cell(y, "y")? - cell(yh, "yhat")?).abs(),
        };
        let s = Score::new(value).map_err(|_| csv_err(row, format!("non-finite score {value}")))?;
        scores.push(s);
    }
    if scores.is_empty() {
        return Err(csv_err(2, "no data rows".into()));
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::io::Write;

    fn vals(s: &[Score<f64>]) -> Vec<f64> {
        s.iter().map(|x| x.value()).collect()
    }

    #[test]
    fn sinusoid_noise_free_values() {
        let cfg = SinusoidConfig {
            noise_sd: 0.0,
            ..Default::default()
        };
        let s = vals(&gen_sinusoid(&cfg).unwrap());
        assert_eq!(s.len(), 3000);
        assert_abs_diff_eq!(s[49], 17.0, epsilon = 1e-12);
        assert_eq!(s[149], 0.0);
    }

    #[test]
    fn sinusoid_deterministic_and_seed_sensitive() {
        let cfg = SinusoidConfig {
            seed: 7,
            ..Default::default()
        };
        assert_eq!(gen_sinusoid(&cfg).unwrap(), gen_sinusoid(&cfg).unwrap());
        let other = SinusoidConfig { seed: 8, ..cfg };
        assert_ne!(gen_sinusoid(&cfg).unwrap(), gen_sinusoid(&other).unwrap());
    }

    #[test]
    fn sinusoid_envelope() {
        let s = vals(&gen_sinusoid(&SinusoidConfig::default()).unwrap());
        assert!(s.iter().all(|&x| x <= 17.0 + 6.0 * 0.3));
    }

    #[test]
    fn stationary_without_spikes_is_constant() {
        let cfg = StationaryConfig {
            spike_prob: 0.0,
            ..Default::default()
        };
        assert!(vals(&gen_stationary(&cfg).unwrap()).iter().all(|&x| x == 10.0));
        let cfg = StationaryConfig {
            spike_prob: 1.0,
            exp_scale: 0.0,
            ..Default::default()
        };
        assert!(vals(&gen_stationary(&cfg).unwrap()).iter().all(|&x| x == 10.0));
    }

    #[test]
    fn single_spike_plateau() {
        let mut raw = vec![10.0; 200];
        raw[99] = 37.0; // t = 100
        let f = centered_rolling_max(&raw, 25);
        for (i, &v) in f.iter().enumerate() {
            let t = i + 1;
            let expect = if (88..=112).contains(&t) { 37.0 } else { 10.0 };
            assert_eq!(v, expect, "t={t}");
        }
    }

    #[test]
    fn rolling_max_dominates_input() {
        let cfg = StationaryConfig {
            seed: 3,
            horizon: 500,
            ..Default::default()
        };
        let mut rng = rng_for(cfg.seed, STREAM_STATIONARY);
        let raw = spiked(|_| cfg.baseline, cfg.spike_prob, cfg.exp_scale, cfg.horizon, &mut rng);
        let out = vals(&gen_stationary(&cfg).unwrap());
        assert!(raw.iter().zip(&out).all(|(r, o)| o >= r));
        assert!(out.iter().any(|&x| x > 10.0));
    }

    #[test]
    fn quadratic_noise_free() {
        let cfg = QuadraticMixConfig {
            spike_prob: 0.0,
            ..Default::default()
        };
        let s = vals(&gen_quadratic_mix(&cfg).unwrap());
        let ramp = |t: usize| 20.0 * (t as f64 / 3000.0).powi(2);
        assert_abs_diff_eq!(s[2999], 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ramp(1500), 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s[1499], ramp(1512), epsilon = 1e-12);
        for (i, &v) in s.iter().enumerate() {
            assert_abs_diff_eq!(v, ramp((i + 1 + 12).min(3000)), epsilon = 1e-12);
        }
    }

    #[test]
    fn invalid_configs() {
        assert!(gen_stationary(&StationaryConfig {
            window: 24,
            ..Default::default()
        })
        .is_err());
        assert!(gen_quadratic_mix(&QuadraticMixConfig {
            spike_prob: 1.5,
            ..Default::default()
        })
        .is_err());
        assert!(gen_sinusoid(&SinusoidConfig {
            horizon: 0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn iid_oracles() {
        let a = TargetLevel::new(0.1).unwrap();
        assert_abs_diff_eq!(IidDistribution::Uniform.oracle_quantile(a), 0.9);
        let a = TargetLevel::new(0.05).unwrap();
        let e = IidDistribution::Exponential { scale: 1.0 };
        assert_abs_diff_eq!(e.oracle_quantile(a), 2.995732273553991, epsilon = 1e-12);
        assert_abs_diff_eq!(e.density_at_quantile(a), 0.05, epsilon = 1e-15);
        let cfg = IidConfig {
            distribution: IidDistribution::Uniform,
            horizon: 1000,
            seed: 11,
        };
        let s = gen_iid(&cfg).unwrap();
        assert_eq!(s, gen_iid(&cfg).unwrap());
        assert!(s.iter().all(|x| (0.0..=1.0).contains(&x.value())));
    }

    #[test]
    fn ar3_recovers_noise_free_process() {
        // modes 1, e^{+-0.7i}, -1 give an exact AR(3) with intercept and a
        // design matrix that never degenerates
        let y: Vec<f64> = (0..80)
            .map(|t| {
                let t = t as f64;
                2.0 + (0.7 * t).sin() + 0.5 * (std::f64::consts::PI * t).cos()
            })
            .collect();
        let out = ar3_scores(&y, 12).unwrap();
        assert_eq!(out.scores.len(), 68);
        assert!(out.fallback_rounds.is_empty());
        assert!(out.scores.iter().all(|s| s.value() < 1e-6), "{:?}", vals(&out.scores));
    }

    #[test]
    fn ar3_constant_series_falls_back() {
        let out = ar3_scores(&[4.0; 30], 5).unwrap();
        assert!(out.scores.iter().all(|s| s.value() == 0.0));
        assert_eq!(out.fallback_rounds.len(), 25);
    }

    #[test]
    fn ar3_random_walk_matches_innovations() {
        let mut rng = rng_for(5, 99);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let innov: Vec<f64> = (0..2000).map(|_| noise.sample(&mut rng)).collect();
        let y: Vec<f64> = innov
            .iter()
            .scan(0.0, |acc, e| {
                *acc += e;
                Some(*acc)
            })
            .collect();
        let burn = 500;
        let out = ar3_scores(&y, burn).unwrap();
        let mean_gap = out
            .scores
            .iter()
            .zip(&innov[burn..])
            .map(|(s, e)| (s.value() - e.abs()).abs())
            .sum::<f64>()
            / out.scores.len() as f64;
        assert!(mean_gap < 0.1, "mean gap {mean_gap}");
        assert!(ar3_scores(&y, 3).is_err());
        assert!(ar3_scores(&y[..10], 10).is_err());
    }

    fn csv_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_layouts() {
        let f = csv_file("t,y,yhat\n1,10.0,9.5\n2,3,4\n");
        assert_eq!(vals(&ingest_csv(f.path()).unwrap()), [0.5, 1.0]);
        let f = csv_file("t,score\r\n1,0.25\r\n2,3\r\n");
        assert_eq!(vals(&ingest_csv(f.path()).unwrap()), [0.25, 3.0]);
        // extra columns, as in an exported trace
        let f = csv_file("t,b,score,covered\n1,inf,2.5,true\n");
        assert_eq!(vals(&ingest_csv(f.path()).unwrap()), [2.5]);
    }

    fn csv_error(body: &str) -> String {
        ingest_csv(csv_file(body).path()).unwrap_err().to_string()
    }

    #[test]
    fn csv_errors() {
        let e = csv_error("t,score\n1,-2\n");
        assert!(e.contains("negative score") && e.contains("row 2"), "{e}");
        let e = csv_error("t,score\n1,1\n2,1\n4,1\n");
        assert!(e.contains("gap at t=3") && e.contains("row 4"), "{e}");
        let e = csv_error("t,score\n2,1\n1,1\n");
        assert!(e.contains("not increasing"), "{e}");
        let e = csv_error("t,score\n1,abc\n");
        assert!(e.contains("non-numeric") && e.contains("row 2"), "{e}");
        let e = csv_error("time,value\n1,2\n");
        assert!(e.contains("malformed header"), "{e}");
        let e = ingest_csv("/nonexistent/scores.csv").unwrap_err();
        assert!(matches!(e, OcpError::Io { .. }));
    }
}
