//! Bound and identity checks, shared by `run` (one trace) and `verify`
//! (a whole battery).

use std::collections::BTreeMap;

use ocp_core::bounds::{
    bernoulli_kl, fit_growth_envelope, kl_lower_bound_rhs, kt_coverage_bound, osd_coverage_bound, osd_iterate_bound,
    up_coverage_bound, up_regret_envelope, BoundVerdict,
};
use ocp_core::pinball::miscoverage;
use ocp_core::portfolio::{best_crp_log_wealth, universal_regret_slack, JeffreysMixture};
use ocp_core::{GrowthEnvelope, Kt, Osd, Predictor, Score, TargetLevel, Trace, UpOcp};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::spec::{synthetic_battery, PredictorKind, PredictorSpec, SourceSpec};

/// Default alphas of the verification battery.
pub const VERIFY_ALPHAS: [f64; 5] = [0.01, 0.05, 0.1, 0.25, 0.5];
const QUADRATURE_NODES: usize = 4000;
const QUADRATURE_ROUNDS: usize = 200;
const STEP: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub verdict: BoundVerdict,
}

fn check(name: &'static str, observed: f64, bound: f64) -> Check {
    Check {
        name,
        verdict: BoundVerdict::new(observed, bound),
    }
}

/// A trace plus the unclipped iterate of every round.
pub struct RawRun {
    pub trace: Trace,
    pub raw: Vec<f64>,
}

pub fn run_raw<P: Predictor<f64> + ?Sized>(p: &mut P, scores: &[Score]) -> RawRun {
    let mut trace = Trace::new();
    let mut raw = Vec::with_capacity(scores.len());
    for &s in scores {
        let r = p.next_radius();
        raw.push(p.raw_radius().unwrap_or(r.value()));
        let o = p.observe(s);
        trace.push(o, p.wealth());
    }
    RawRun { trace, raw }
}

/// `(1 - alpha) S + g b >= 0` on every round; observed is the worst
/// violation `max -(slack)`. `corrupt` negates every subgradient.
pub fn reward_check(trace: &Trace, alpha: TargetLevel, corrupt: bool) -> Check {
    let worst = trace
        .rounds()
        .iter()
        .map(|o| {
            if corrupt {
                let g = -o.grad.value();
                -(alpha.coverage() * o.score.value() + g * o.radius.value())
            } else {
                -o.reward_slack(alpha)
            }
        })
        .fold(f64::NEG_INFINITY, f64::max);
    check("per_round_reward_bound", worst, 0.0)
}

/// Relative gap between the final wealth and `1 + sum c_t b_t`.
pub fn telescoping_check(run: &RawRun) -> Option<Check> {
    let w_t = *run.trace.wealth()?.last()?;
    let sum: f64 = run
        .trace
        .rounds()
        .iter()
        .zip(&run.raw)
        .map(|(o, b)| -o.grad.value() * b)
        .sum();
    Some(check(
        "wealth_telescoping",
        ((1.0 + sum) - w_t).abs() / w_t.abs().max(1.0),
        1e-9,
    ))
}

/// `T KL(M/T || alpha) - ln W_T` against `(1/2) ln(pi (T+1))`.
pub fn universal_slack_check(trace: &Trace, alpha: TargetLevel) -> CliResult<Option<Check>> {
    let Some(w_t) = trace.wealth().and_then(|w| w.last().copied()) else {
        return Ok(None);
    };
    let t = trace.len() as u64;
    let misses = (trace.len() - trace.covered_count()) as u64;
    let best = best_crp_log_wealth(misses, t, alpha)?;
    Ok(Some(check(
        "universal_portfolio_slack",
        best - w_t.ln(),
        universal_regret_slack::<f64>(t),
    )))
}

fn coverage_check(name: &'static str, trace: &Trace, alpha: TargetLevel, bound: f64) -> CliResult<Check> {
    Ok(check(name, miscoverage(trace, alpha)?, bound))
}

/// Tightest round of `|b_t| <= D (t-1)^q + eta`.
///
/// With a zero score, a negative iterate clips to a tie and counts as
/// covered, so the iterate keeps falling; only `b_t <= D (t-1)^q + eta` is
/// checked on such streams.
pub fn osd_iterate_check(raw: &[f64], scores: &[Score], env: &GrowthEnvelope, eta: f64) -> CliResult<Check> {
    let two_sided = scores.iter().all(|s| s.value() > 0.0);
    let mut best: Option<Check> = None;
    for (i, &b) in raw.iter().enumerate() {
        let observed = if two_sided { b.abs() } else { b };
        let c = check(
            "osd_iterate_bound",
            observed,
            osd_iterate_bound(i as u64 + 1, env, eta)?,
        );
        if best.as_ref().is_none_or(|x| c.verdict.slack < x.verdict.slack) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| CliError::usage("empty trace"))
}

/// Linearized regret against each comparator in `us` under its envelope.
pub fn regret_envelope_check(run: &RawRun, alpha: f64, us: &[f64]) -> CliResult<Check> {
    let t = run.trace.len() as u64;
    let mut best: Option<Check> = None;
    for &u in us {
        let regret: f64 = run
            .trace
            .rounds()
            .iter()
            .zip(&run.raw)
            .map(|(o, b)| o.grad.value() * (b - u))
            .sum();
        let c = check("up_regret_envelope", regret, up_regret_envelope(t, u, alpha)?);
        if best.as_ref().is_none_or(|x| c.verdict.slack < x.verdict.slack) {
            best = Some(c);
        }
    }
    best.ok_or_else(|| CliError::usage("no comparators"))
}

/// Verdicts that apply to one predictor's run, for `report.json`.
pub fn run_checks(
    spec: &PredictorSpec,
    run: &RawRun,
    scores: &[Score],
    alpha: TargetLevel,
    env: &GrowthEnvelope,
) -> CliResult<Vec<Check>> {
    let t = run.trace.len() as u64;
    let a = alpha.value();
    let mut out = vec![reward_check(&run.trace, alpha, false)];
    if !spec.is_plain() {
        return Ok(out);
    }
    match spec.kind {
        PredictorKind::Up => {
            out.push(coverage_check(
                "up_coverage_bound",
                &run.trace,
                alpha,
                up_coverage_bound(t, env, a)?,
            )?);
            out.extend(universal_slack_check(&run.trace, alpha)?);
            out.extend(telescoping_check(run));
        }
        PredictorKind::Kt => {
            out.push(coverage_check(
                "kt_coverage_bound",
                &run.trace,
                alpha,
                kt_coverage_bound(t, env, a)?,
            )?);
            out.extend(telescoping_check(run));
        }
        PredictorKind::Osd { eta } => {
            out.push(coverage_check(
                "osd_coverage_bound",
                &run.trace,
                alpha,
                osd_coverage_bound(t, env, eta)?,
            )?);
            out.push(osd_iterate_check(&run.raw, scores, env, eta)?);
        }
        _ => {}
    }
    Ok(out)
}

/// Max `|closed form - quadrature|` of the UP weight along the first
/// `QUADRATURE_ROUNDS` rounds of `scores`.
fn closed_form_check(scores: &[Score], alpha: TargetLevel) -> CliResult<Check> {
    let mut up = UpOcp::new(alpha);
    let mut mix = JeffreysMixture::new(alpha, QUADRATURE_NODES)?;
    let mut worst = 0.0f64;
    for &s in scores.iter().take(QUADRATURE_ROUNDS) {
        worst = worst.max((up.lambda() - mix.weight()).abs());
        up.next_radius();
        mix.push(up.observe(s).grad);
    }
    worst = worst.max((up.lambda() - mix.weight()).abs());
    Ok(check("closed_form_vs_integral", worst, 1e-6))
}

fn kl_check() -> CliResult<Check> {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..=100 {
        let p = i as f64 / 100.0;
        for j in 1..100 {
            let q = j as f64 / 100.0;
            worst = worst.max(kl_lower_bound_rhs(p, q)? - bernoulli_kl(p, q)?);
        }
    }
    Ok(check("kl_lower_bound", worst, 0.0))
}

/// Every check on one `(stream, alpha)` cell.
fn cell_checks(scores: &[Score], q: f64, a: f64, corrupt: bool) -> CliResult<Vec<Check>> {
    let alpha = TargetLevel::new(a)?;
    let env = fit_growth_envelope(scores, q)?;
    let t = scores.len() as u64;
    let mut out = vec![closed_form_check(scores, alpha)?];

    let up = run_raw(&mut UpOcp::new(alpha), scores);
    out.extend(telescoping_check(&up));
    out.extend(universal_slack_check(&up.trace, alpha)?);
    out.push(coverage_check(
        "up_coverage_bound",
        &up.trace,
        alpha,
        up_coverage_bound(t, &env, a)?,
    )?);
    let max_s = scores.iter().map(|s| s.value()).fold(0.0, f64::max).max(1.0);
    let us: Vec<f64> = [-5.0, -1.0, -0.5, -0.1, 0.1, 0.5, 1.0, 5.0]
        .iter()
        .map(|m| m * max_s)
        .collect();
    out.push(regret_envelope_check(&up, a, &us)?);

    let kt = run_raw(&mut Kt::new(alpha), scores);
    out.extend(telescoping_check(&kt));
    out.push(coverage_check(
        "kt_coverage_bound",
        &kt.trace,
        alpha,
        kt_coverage_bound(t, &env, a)?,
    )?);

    let osd = run_raw(&mut Osd::new(alpha, STEP)?, scores);
    out.push(coverage_check(
        "osd_coverage_bound",
        &osd.trace,
        alpha,
        osd_coverage_bound(t, &env, STEP)?,
    )?);
    out.push(osd_iterate_check(&osd.raw, scores, &env, STEP)?);

    for name in ["up", "kt", "dtaci", "sfogd", "osd", "p", "pi", "trivial"] {
        let spec: PredictorSpec = name.parse().expect("built-in spec");
        let mut p = spec.build(a, scores.len())?;
        let r = run_raw(p.as_mut(), scores);
        out.push(reward_check(&r.trace, alpha, corrupt));
    }
    Ok(out)
}

/// Worst verdict per check plus how many instances were evaluated.
pub struct Summary {
    pub name: &'static str,
    pub worst: BoundVerdict,
    pub count: usize,
}

/// Runs the battery and reduces each check to its tightest instance, in a
/// fixed order.
pub fn verify_battery(cfg: &ExperimentConfig, corrupt: bool) -> CliResult<Vec<Summary>> {
    let sources: Vec<SourceSpec> = if cfg.source_given {
        vec![cfg.source.clone()]
    } else {
        synthetic_battery()
    };
    let alphas = match (&cfg.alpha_grid, cfg.alpha) {
        (None, None) => VERIFY_ALPHAS.to_vec(),
        _ => cfg.alpha_list(),
    };
    let mut streams = Vec::new();
    for src in &sources {
        for seed in cfg.seed_list(1..=3) {
            streams.push((src.scores(seed, cfg.horizon)?, src.growth_exponent()));
        }
    }
    let cells: Vec<(usize, f64)> = (0..streams.len())
        .flat_map(|i| alphas.iter().map(move |&a| (i, a)))
        .collect();
    let results: Vec<CliResult<Vec<Check>>> = cells
        .par_iter()
        .map(|&(i, a)| cell_checks(&streams[i].0, streams[i].1, a, corrupt))
        .collect();

    let mut order: Vec<&'static str> = Vec::new();
    let mut worst: BTreeMap<&'static str, (BoundVerdict, usize)> = BTreeMap::new();
    let mut add = |c: Check| {
        if !order.contains(&c.name) {
            order.push(c.name);
        }
        let e = worst.entry(c.name).or_insert((c.verdict, 0));
        if c.verdict.slack < e.0.slack || (!c.verdict.holds && e.0.holds) {
            e.0 = c.verdict;
        }
        e.1 += 1;
    };
    for r in results {
        r?.into_iter().for_each(&mut add);
    }
    add(kl_check()?);
    Ok(order
        .into_iter()
        .map(|name| {
            let (v, n) = worst.remove(name).expect("recorded");
            Summary {
                name,
                worst: v,
                count: n,
            }
        })
        .collect())
}
