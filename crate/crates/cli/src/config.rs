//! Command-line flags, the `key = value` config file, and their merge.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ocp_core::metrics::SizeStat;

use crate::error::{CliError, CliResult};
use crate::spec::{default_roster, PredictorSpec, SourceSpec};

#[derive(Debug, Parser)]
#[command(name = "ocp", version, about = "Online conformal calibration experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one predictor on one stream; writes trace.csv, report.json and local.csv.
    Run(CommonArgs),
    /// Compare predictors at one alpha across seeds; writes bench.csv and bench.json.
    Bench(CommonArgs),
    /// Sweep an alpha grid; writes pareto.csv and tracking.csv.
    Pareto(CommonArgs),
    /// Check every bound and identity on a synthetic battery.
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// Predictor spec `name[:key=value,...]`; repeatable.
    #[arg(long = "predictor", value_name = "SPEC")]
    pub predictors: Vec<String>,
    /// Target miscoverage level.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Alpha grid `N:LO:HI`, N values evenly spaced.
    #[arg(long, value_name = "N:LO:HI")]
    pub alpha_grid: Option<String>,
    /// Score generator `name[:key=value,...]`.
    #[arg(long)]
    pub generator: Option<String>,
    /// CSV of scores (`t,score` or `t,y,yhat`).
    #[arg(long, conflicts_with = "generator")]
    pub csv: Option<PathBuf>,
    /// Seeds: `A..B` (inclusive) or a comma list.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Trailing window for local coverage.
    #[arg(long)]
    pub window: Option<usize>,
    /// Size statistic for Pareto points: mean, median or q75.
    #[arg(long)]
    pub stat: Option<String>,
    /// Output directory, or `-` for stdout.
    #[arg(long)]
    pub out: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Negates every subgradient in the reward check (negative control).
    #[arg(long, hide = true)]
    pub corrupt_grad_sign: bool,
}

const KEYS: [&str; 13] = [
    "predictor",
    "alpha",
    "alpha-grid",
    "generator",
    "csv",
    "seeds",
    "horizon",
    "burn-in",
    "window",
    "stat",
    "out",
    "jobs",
    "config",
];

/// Parsed config file: each key maps to its values in file order.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, Vec<String>>,
}

impl ConfigFile {
    pub fn parse(text: &str, path: &Path) -> CliResult<Self> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("{}:{}: expected `key = value`", path.display(), i + 1)))?;
            let k = k.trim().replace('_', "-");
            if !KEYS.contains(&k.as_str()) || k == "config" {
                return Err(CliError::Parse(format!(
                    "{}:{}: unknown key `{k}`",
                    path.display(),
                    i + 1
                )));
            }
            entries.entry(k).or_default().push(v.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    fn last(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    fn all(&self, key: &str) -> &[String] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Stdout,
    Dir(PathBuf),
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Predictors given explicitly; empty means the default roster.
    pub predictors: Vec<PredictorSpec>,
    /// Explicit single alpha, if given.
    pub alpha: Option<f64>,
    /// Explicit alpha grid, if given.
    pub alpha_grid: Option<Vec<f64>>,
    pub source: SourceSpec,
    /// Whether the source came from a flag or config rather than the default.
    pub source_given: bool,
    pub seeds: Option<Vec<u64>>,
    pub horizon: Option<usize>,
    pub burn_in: usize,
    pub window: usize,
    pub stat: SizeStat,
    pub out: Output,
    pub jobs: usize,
}

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_BURN_IN: usize = 50;
pub const DEFAULT_WINDOW: usize = 100;

impl ExperimentConfig {
    /// The given predictors, or the default roster. Labels must be unique.
    pub fn roster(&self) -> CliResult<Vec<PredictorSpec>> {
        let roster = if self.predictors.is_empty() {
            default_roster()
        } else {
            self.predictors.clone()
        };
        for (i, p) in roster.iter().enumerate() {
            if roster[..i].iter().any(|q| q.label() == p.label()) {
                return Err(CliError::usage(format!("predictor `{p}` given twice")));
            }
        }
        Ok(roster)
    }

    pub fn single_alpha(&self) -> CliResult<f64> {
        if self.alpha_grid.is_some() {
            return Err(CliError::usage("this command takes --alpha, not --alpha-grid"));
        }
        Ok(self.alpha.unwrap_or(DEFAULT_ALPHA))
    }

    /// Explicit grid, else the explicit alpha, else 50 values in [0.05, 0.25].
    pub fn alpha_list(&self) -> Vec<f64> {
        match (&self.alpha_grid, self.alpha) {
            (Some(g), _) => g.clone(),
            (None, Some(a)) => vec![a],
            (None, None) => alpha_grid(50, 0.05, 0.25),
        }
    }

    /// Seeds to run: the given list, or `default` for synthetic sources and
    /// a single pass for CSV input.
    pub fn seed_list(&self, default: std::ops::RangeInclusive<u64>) -> Vec<u64> {
        match (&self.seeds, self.source.is_synthetic()) {
            (Some(s), true) => s.clone(),
            (_, false) => vec![0],
            (None, true) => default.collect(),
        }
    }
}

pub fn alpha_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn parse_alpha_grid(s: &str) -> CliResult<Vec<f64>> {
    let bad = || {
        CliError::usage(format!(
            "alpha grid must be N:LO:HI with N >= 1 and 0 < LO <= HI < 1, got `{s}`"
        ))
    };
    let parts: Vec<&str> = s.split(':').map(str::trim).collect();
    let [n, lo, hi] = parts.as_slice() else {
        return Err(bad());
    };
    let n: usize = n.parse().map_err(|_| bad())?;
    let lo: f64 = lo.parse().map_err(|_| bad())?;
    let hi: f64 = hi.parse().map_err(|_| bad())?;
    if n == 0 || !(0.0 < lo && lo <= hi && hi < 1.0) {
        return Err(bad());
    }
    Ok(alpha_grid(n, lo, hi))
}

pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::usage(format!("seeds must be `A..B` or a comma list, got `{s}`"));
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| bad()))
            .collect::<CliResult<_>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("--{key}: cannot parse `{v}`")))
}

/// Merges flags over the config file over built-in defaults.
pub fn resolve(args: &CommonArgs) -> CliResult<ExperimentConfig> {
    let file = match &args.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let pick = |flag: Option<String>, key: &str| flag.or_else(|| file.last(key).map(str::to_string));

    let predictor_strs: Vec<String> = if args.predictors.is_empty() {
        file.all("predictor").to_vec()
    } else {
        args.predictors.clone()
    };
    let predictors = predictor_strs
        .iter()
        .map(|s| s.parse())
        .collect::<CliResult<Vec<PredictorSpec>>>()?;

    let alpha = pick(args.alpha.map(|a| a.to_string()), "alpha")
        .map(|v| parse_num::<f64>("alpha", &v))
        .transpose()?;
    if let Some(a) = alpha {
        if !(a > 0.0 && a < 1.0) {
            return Err(CliError::usage(format!("--alpha must lie in (0, 1), got {a}")));
        }
    }
    let alpha_grid = pick(args.alpha_grid.clone(), "alpha-grid")
        .map(|g| parse_alpha_grid(&g))
        .transpose()?;

    let csv = args.csv.clone().or_else(|| {
        (args.generator.is_none())
            .then(|| file.last("csv").map(PathBuf::from))
            .flatten()
    });
    let generator = pick(args.generator.clone(), "generator");
    let (source, source_given) = match (csv, generator) {
        (Some(path), _) => (SourceSpec::csv(path), true),
        (None, Some(g)) => (g.parse()?, true),
        (None, None) => ("sinusoid".parse()?, false),
    };

    let seeds = pick(args.seeds.clone(), "seeds").map(|s| parse_seeds(&s)).transpose()?;
    let horizon = pick(args.horizon.map(|h| h.to_string()), "horizon")
        .map(|v| parse_num::<usize>("horizon", &v))
        .transpose()?;
    if horizon == Some(0) {
        return Err(CliError::usage("--horizon must be at least 1"));
    }
    let burn_in = pick(args.burn_in.map(|h| h.to_string()), "burn-in")
        .map(|v| parse_num::<usize>("burn-in", &v))
        .transpose()?
        .unwrap_or(DEFAULT_BURN_IN);
    let window = pick(args.window.map(|h| h.to_string()), "window")
        .map(|v| parse_num::<usize>("window", &v))
        .transpose()?
        .unwrap_or(DEFAULT_WINDOW);
    let stat = pick(args.stat.clone(), "stat")
        .map(|s| s.parse::<SizeStat>().map_err(|e| CliError::usage(e.to_string())))
        .transpose()?
        .unwrap_or_default();
    let out = match pick(args.out.clone(), "out").as_deref() {
        Some("-") => Output::Stdout,
        Some(dir) => Output::Dir(PathBuf::from(dir)),
        None => Output::Dir(PathBuf::from("ocp-out")),
    };
    let jobs = pick(args.jobs.map(|j| j.to_string()), "jobs")
        .map(|v| parse_num::<usize>("jobs", &v))
        .transpose()?
        .unwrap_or(0);

    Ok(ExperimentConfig {
        predictors,
        alpha,
        alpha_grid,
        source,
        source_given,
        seeds,
        horizon,
        burn_in,
        window,
        stat,
        out,
        jobs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g = parse_alpha_grid("5:0.05:0.25").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 0.25).abs() < 1e-15 && (g[1] - 0.1).abs() < 1e-15);
        assert_eq!(parse_alpha_grid("1:0.1:0.2").unwrap(), [0.1]);
        assert!(parse_alpha_grid("0:0.1:0.2").is_err());
        assert!(parse_alpha_grid("3:0.3:0.2").is_err());
        assert!(parse_alpha_grid("3:0.1").is_err());
        assert_eq!(alpha_grid(50, 0.05, 0.25).len(), 50);
    }

    #[test]
    fn seed_parsing() {
        assert_eq!(parse_seeds("1..4").unwrap(), [1, 2, 3, 4]);
        assert_eq!(parse_seeds("1..=2").unwrap(), [1, 2]);
        assert_eq!(parse_seeds("7, 9").unwrap(), [7, 9]);
        assert!(parse_seeds("4..1").is_err());
        assert!(parse_seeds("a").is_err());
    }

    #[test]
    fn config_file_and_precedence() {
        let text = "# experiment\nalpha = 0.2\npredictor = up\npredictor = kt\nseeds = 1..3\nburn_in = 10\n";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        std::fs::write(&path, text).unwrap();
        let args = CommonArgs {
            config: Some(path.clone()),
            alpha: Some(0.1),
            ..Default::default()
        };
        let cfg = resolve(&args).unwrap();
        assert_eq!(cfg.alpha, Some(0.1));
        assert_eq!(cfg.predictors.len(), 2);
        assert_eq!(cfg.seeds, Some(vec![1, 2, 3]));
        assert_eq!(cfg.burn_in, 10);
        assert!(ConfigFile::parse("colour = red\n", &path).is_err());
        assert!(ConfigFile::parse("alpha 0.1\n", &path).is_err());
    }

    #[test]
    fn defaults() {
        let cfg = resolve(&CommonArgs::default()).unwrap();
        assert_eq!(cfg.alpha_list().len(), 50);
        assert_eq!(cfg.seed_list(1..=10), (1..=10).collect::<Vec<_>>());
        assert_eq!(cfg.burn_in, 50);
        assert_eq!(cfg.window, 100);
        assert_eq!(cfg.roster().unwrap().len(), 6);
        assert!(!cfg.source_given);
    }
}
