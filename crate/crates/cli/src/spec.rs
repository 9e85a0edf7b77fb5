//! Predictor and score-source specifications of the form `name:key=value,...`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ocp_core::generators::{
    gen_iid, gen_quadratic_mix, gen_sinusoid, gen_stationary, ingest_csv, IidConfig, IidDistribution,
    QuadraticMixConfig, SinusoidConfig, StationaryConfig,
};
use ocp_core::predictors::{AlphaCorrected, DtAci, Gain, IntegratorConfig, Kt, Osd, Pid, SfOgd, Trivial, UpOcp};
use ocp_core::{OffsetSign, Predictor, Score, TargetLevel};

use crate::error::{CliError, CliResult};

/// Splits `name:k=v,k2=v2` into the name and its parameters.
fn split_spec(s: &str) -> CliResult<(String, BTreeMap<String, String>)> {
    let s = s.trim();
    let (name, rest) = s.split_once(':').unwrap_or((s, ""));
    let mut params = BTreeMap::new();
    for item in rest.split(',').map(str::trim).filter(|x| !x.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("parameter `{item}` in `{s}` is not key=value")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((name.trim().to_ascii_lowercase(), params))
}

struct Params {
    spec: String,
    map: BTreeMap<String, String>,
}

impl Params {
    fn take_f64(&mut self, key: &str) -> CliResult<Option<f64>> {
        self.map
            .remove(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| CliError::usage(format!("`{key}` in `{}` must be a number, got `{v}`", self.spec)))
            })
            .transpose()
    }

    fn take_str(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn finish(self) -> CliResult<()> {
        match self.map.keys().next() {
            None => Ok(()),
            Some(k) => Err(CliError::usage(format!("unknown parameter `{k}` in `{}`", self.spec))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictorKind {
    Up,
    Kt,
    DtAci,
    SfOgd {
        eta: f64,
    },
    Osd {
        eta: f64,
    },
    P {
        gain: Gain<f64>,
    },
    Pi {
        gain: Gain<f64>,
        k_i: Option<f64>,
        c_sat: Option<f64>,
        delta: f64,
    },
    Trivial,
}

/// A predictor with its parameters and an optional miscoverage offset.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSpec {
    pub kind: PredictorKind,
    pub offset: Option<(f64, OffsetSign)>,
    label: String,
}

fn gain(p: &mut Params) -> CliResult<Gain<f64>> {
    match (p.take_f64("lr")?, p.take_f64("lambda")?) {
        (Some(_), Some(_)) => Err(CliError::usage(format!(
            "`{}`: give either lr or lambda, not both",
            p.spec
        ))),
        (None, Some(l)) => Ok(Gain::Adaptive(l)),
        (lr, None) => Ok(Gain::Fixed(lr.unwrap_or(0.5))),
    }
}

impl FromStr for PredictorSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (name, map) = split_spec(s)?;
        let mut p = Params {
            spec: s.trim().to_string(),
            map,
        };
        let kind = match name.as_str() {
            "up" | "up-ocp" => PredictorKind::Up,
            "kt" => PredictorKind::Kt,
            "dtaci" => PredictorKind::DtAci,
            "sfogd" => PredictorKind::SfOgd {
                eta: p.take_f64("eta")?.or(p.take_f64("lr")?).unwrap_or(1.0),
            },
            "osd" => PredictorKind::Osd {
                eta: p.take_f64("eta")?.or(p.take_f64("lr")?).unwrap_or(1.0),
            },
            "p" => PredictorKind::P { gain: gain(&mut p)? },
            "pi" => PredictorKind::Pi {
                gain: gain(&mut p)?,
                k_i: p.take_f64("k_i")?,
                c_sat: p.take_f64("c_sat")?,
                delta: p.take_f64("delta")?.unwrap_or(0.01),
            },
            "trivial" => PredictorKind::Trivial,
            other => {
                return Err(CliError::usage(format!(
                    "unknown predictor `{other}` (expected up, kt, dtaci, sfogd, osd, p, pi, trivial)"
                )))
            }
        };
        let k = p.take_f64("acorr")?;
        let sign = match p.take_str("sign").as_deref() {
            None | Some("decrease") | Some("-") => OffsetSign::Decrease,
            Some("increase") | Some("+") => OffsetSign::Increase,
            Some(other) => {
                return Err(CliError::usage(format!(
                    "sign must be decrease or increase, got `{other}`"
                )))
            }
        };
        let label = p.spec.clone();
        p.finish()?;
        Ok(Self {
            kind,
            offset: k.map(|k| (k, sign)),
            label,
        })
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl PredictorSpec {
    pub fn label(&self) -> &str {
        &self.label
    }

    /// True when the bound checks of the plain algorithm apply, i.e. it runs
    /// at the nominal level.
    pub fn is_plain(&self) -> bool {
        self.offset.is_none()
    }

    fn build_inner(&self, alpha: TargetLevel, horizon: usize) -> CliResult<Box<dyn Predictor<f64>>> {
        Ok(match &self.kind {
            PredictorKind::Up => Box::new(UpOcp::new(alpha)),
            PredictorKind::Kt => Box::new(Kt::new(alpha)),
            PredictorKind::DtAci => Box::new(DtAci::new(alpha)),
            PredictorKind::SfOgd { eta } => Box::new(SfOgd::new(alpha, *eta)?),
            PredictorKind::Osd { eta } => Box::new(Osd::new(alpha, *eta)?),
            PredictorKind::P { gain } => Box::new(Pid::new(alpha, *gain, None)?),
            PredictorKind::Pi {
                gain,
                k_i,
                c_sat,
                delta,
            } => Box::new(Pid::new(
                alpha,
                *gain,
                Some(IntegratorConfig {
                    horizon: horizon as u64,
                    k_i: *k_i,
                    c_sat: *c_sat,
                    delta: *delta,
                }),
            )?),
            PredictorKind::Trivial => Box::new(Trivial::new(alpha)?),
        })
    }

    pub fn build(&self, alpha: f64, horizon: usize) -> CliResult<Box<dyn Predictor<f64>>> {
        let alpha = TargetLevel::new(alpha)?;
        match self.offset {
            None => self.build_inner(alpha, horizon),
            Some((k, sign)) => {
                let wrapped = AlphaCorrected::new(alpha, k, horizon as u64, sign, |a| {
                    self.build_inner(a, horizon)
                        .map_err(|e| ocp_core::OcpError::InvalidParameter {
                            name: "predictor",
                            reason: e.to_string(),
                        })
                })?;
                Ok(Box::new(wrapped))
            }
        }
    }
}

/// Predictors compared in the sinusoid table.
pub fn default_roster() -> Vec<PredictorSpec> {
    ["up", "kt", "dtaci", "sfogd:eta=100", "p:lr=0.5", "pi:lr=0.5"]
        .iter()
        .map(|s| s.parse().expect("built-in spec"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Sinusoid(SinusoidConfig),
    Stationary(StationaryConfig),
    Quadratic(QuadraticMixConfig),
    Iid(IidDistribution),
    Csv(PathBuf),
}

/// Where scores come from, plus the label used in outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub source: Source,
    label: String,
}

impl FromStr for SourceSpec {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        let (name, map) = split_spec(s)?;
        let mut p = Params {
            spec: s.trim().to_string(),
            map,
        };
        let usize_of = |x: Option<f64>, key: &str| -> CliResult<Option<usize>> {
            x.map(|v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(CliError::usage(format!("`{key}` must be a nonnegative integer")))
                }
            })
            .transpose()
        };
        let source = match name.as_str() {
            "sinusoid" => {
                let d = SinusoidConfig::default();
                Source::Sinusoid(SinusoidConfig {
                    period: p.take_f64("period")?.unwrap_or(d.period),
                    magnitude: p.take_f64("magnitude")?.unwrap_or(d.magnitude),
                    offset: p.take_f64("offset")?.unwrap_or(d.offset),
                    noise_sd: p.take_f64("noise")?.unwrap_or(d.noise_sd),
                    ..d
                })
            }
            "stationary" => {
                let d = StationaryConfig::default();
                Source::Stationary(StationaryConfig {
                    baseline: p.take_f64("baseline")?.unwrap_or(d.baseline),
                    spike_prob: p.take_f64("p")?.unwrap_or(d.spike_prob),
                    exp_scale: p.take_f64("scale")?.unwrap_or(d.exp_scale),
                    window: usize_of(p.take_f64("window")?, "window")?.unwrap_or(d.window),
                    ..d
                })
            }
            "quadratic" => {
                let d = QuadraticMixConfig::default();
                Source::Quadratic(QuadraticMixConfig {
                    end_value: p.take_f64("end")?.unwrap_or(d.end_value),
                    spike_prob: p.take_f64("p")?.unwrap_or(d.spike_prob),
                    exp_scale: p.take_f64("scale")?.unwrap_or(d.exp_scale),
                    window: usize_of(p.take_f64("window")?, "window")?.unwrap_or(d.window),
                    ..d
                })
            }
            "uniform" => Source::Iid(IidDistribution::Uniform),
            "exponential" => Source::Iid(IidDistribution::Exponential {
                scale: p.take_f64("scale")?.unwrap_or(1.0),
            }),
            other => {
                return Err(CliError::usage(format!(
                    "unknown generator `{other}` (expected sinusoid, stationary, quadratic, uniform, exponential)"
                )))
            }
        };
        let label = p.spec.clone();
        p.finish()?;
        Ok(Self { source, label })
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl SourceSpec {
    pub fn csv(path: PathBuf) -> Self {
        Self {
            label: format!("csv:{}", path.display()),
            source: Source::Csv(path),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_synthetic(&self) -> bool {
        !matches!(self.source, Source::Csv(_))
    }

    /// Growth exponent used when fitting the score envelope.
    pub fn growth_exponent(&self) -> f64 {
        match self.source {
            Source::Quadratic(_) => 2.0,
            _ => 0.0,
        }
    }

    /// Scores for one seed. CSV sources ignore the seed and are truncated to
    /// `horizon` when it is given.
    pub fn scores(&self, seed: u64, horizon: Option<usize>) -> CliResult<Vec<Score>> {
        let horizon_or = |d: usize| horizon.unwrap_or(d);
        let scores = match &self.source {
            Source::Sinusoid(c) => gen_sinusoid(&SinusoidConfig {
                seed,
                horizon: horizon_or(c.horizon),
                ..*c
            })?,
            Source::Stationary(c) => gen_stationary(&StationaryConfig {
                seed,
                horizon: horizon_or(c.horizon),
                ..*c
            })?,
            Source::Quadratic(c) => gen_quadratic_mix(&QuadraticMixConfig {
                seed,
                horizon: horizon_or(c.horizon),
                ..*c
            })?,
            Source::Iid(d) => gen_iid(&IidConfig {
                distribution: *d,
                horizon: horizon_or(3000),
                seed,
            })?,
            Source::Csv(path) => {
                let mut s = ingest_csv(path)?;
                if let Some(h) = horizon {
                    s.truncate(h);
                }
                s
            }
        };
        Ok(scores)
    }
}

/// The standard synthetic battery.
pub fn synthetic_battery() -> Vec<SourceSpec> {
    ["sinusoid", "stationary", "quadratic", "uniform", "exponential"]
        .iter()
        .map(|s| s.parse().expect("built-in generator"))
        .collect()
}
