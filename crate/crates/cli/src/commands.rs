//! The `run`, `bench`, `pareto` and `verify` subcommands.

use ocp_core::bounds::fit_growth_envelope;
use ocp_core::metrics::{
    compute_metrics, monotonicity_warnings, pareto_frontier, rolling_local, target_tracking, MetricsReport, RunRecord,
};
use ocp_core::{Score, TargetLevel};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::output::{csv_document, csv_f64, emit, json_document, json_f64};
use crate::spec::PredictorSpec;
use crate::verify::{run_checks, run_raw, verify_battery, Check};

pub const SCHEMA_VERSION: u32 = 1;
/// Tolerance of the coverage-monotonicity warning along an alpha grid.
const MONOTONICITY_TOLERANCE: f64 = 0.01;

fn pool(jobs: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::usage(format!("cannot start {jobs} workers: {e}")))
}

fn metrics_json(m: &MetricsReport, into: &mut Map<String, Value>) {
    into.insert("marginal_coverage".into(), json_f64(m.marginal_coverage));
    into.insert("longest_error_run".into(), json!(m.longest_error_run));
    into.insert("mean_size".into(), json_f64(m.mean_size));
    into.insert("median_size".into(), json_f64(m.median_size));
    into.insert("q75".into(), json_f64(m.q75));
    into.insert("q90".into(), json_f64(m.q90));
    into.insert("q95".into(), json_f64(m.q95));
    into.insert("miscov".into(), json_f64(m.miscov));
    into.insert("rounds_used".into(), json!(m.rounds_used));
}

fn verdict_json(c: &Check) -> Value {
    json!({
        "name": c.name,
        "observed": json_f64(c.verdict.observed),
        "bound": json_f64(c.verdict.bound),
        "slack": json_f64(c.verdict.slack),
        "holds": c.verdict.holds,
    })
}

/// Metrics of one predictor on one stream.
fn cell(spec: &PredictorSpec, scores: &[Score], alpha: f64, burn_in: usize) -> CliResult<MetricsReport> {
    let mut p = spec.build(alpha, scores.len())?;
    let trace = ocp_core::run(p.as_mut(), scores);
    Ok(compute_metrics(&trace, burn_in, TargetLevel::new(alpha)?)?)
}

fn single_predictor(cfg: &ExperimentConfig) -> CliResult<PredictorSpec> {
    match cfg.predictors.as_slice() {
        [] => Ok("up".parse().expect("built-in spec")),
        [p] => Ok(p.clone()),
        _ => Err(CliError::usage("run takes exactly one --predictor")),
    }
}

pub fn cmd_run(cfg: &ExperimentConfig) -> CliResult<()> {
    let spec = single_predictor(cfg)?;
    let a = cfg.single_alpha()?;
    let alpha = TargetLevel::new(a)?;
    let seed = cfg.seed_list(1..=1)[0];
    let scores = cfg.source.scores(seed, cfg.horizon)?;

    let mut p = spec.build(a, scores.len())?;
    let run = run_raw(p.as_mut(), &scores);
    let report = compute_metrics(&run.trace, cfg.burn_in, alpha)?;
    let window = cfg.window.min(run.trace.len());
    if window < cfg.window {
        eprintln!(
            "window {} exceeds the {}-round trace; using {window}",
            cfg.window,
            run.trace.len()
        );
    }
    let local = rolling_local(&run.trace, window)?;
    let env = fit_growth_envelope(&scores, cfg.source.growth_exponent())?;
    let checks = run_checks(&spec, &run, &scores, alpha, &env)?;
    for c in checks.iter().filter(|c| !c.verdict.holds) {
        eprintln!(
            "bound violated: {} observed {} > bound {}",
            c.name, c.verdict.observed, c.verdict.bound
        );
    }

    let wealth = run.trace.wealth();
    let trace_csv = csv_document(
        &["t", "b", "score", "covered", "g", "wealth"],
        run.trace.rounds().iter().enumerate().map(|(i, o)| {
            vec![
                o.t.to_string(),
                csv_f64(o.radius.value()),
                csv_f64(o.score.value()),
                u8::from(o.covered).to_string(),
                csv_f64(o.grad.value()),
                wealth.map(|w| csv_f64(w[i])).unwrap_or_default(),
            ]
        }),
    )?;
    let local_csv = csv_document(
        &["t", "coverage", "width"],
        (0..local.t.len()).map(|i| {
            vec![
                local.t[i].to_string(),
                csv_f64(local.coverage[i]),
                csv_f64(local.width[i]),
            ]
        }),
    )?;

    let mut doc = Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("predictor".into(), json!(spec.label()));
    doc.insert("source".into(), json!(cfg.source.label()));
    doc.insert("alpha".into(), json!(a));
    doc.insert("seed".into(), json!(seed));
    doc.insert("horizon".into(), json!(scores.len()));
    doc.insert("burn_in".into(), json!(cfg.burn_in));
    doc.insert("window".into(), json!(window));
    metrics_json(&report, &mut doc);
    doc.insert(
        "envelope".into(),
        json!({ "d": json_f64(env.d()), "q": json_f64(env.q()) }),
    );
    doc.insert(
        "verdicts".into(),
        Value::Array(checks.iter().map(verdict_json).collect()),
    );

    emit(
        &cfg.out,
        &[
            ("report.json", json_document(&Value::Object(doc))),
            ("trace.csv", trace_csv),
            ("local.csv", local_csv),
        ],
        "report.json",
    )
}

/// Runs every `(predictor, alpha, seed)` cell on the worker pool. Results
/// come back in cell order regardless of scheduling.
fn grid(cfg: &ExperimentConfig, roster: &[PredictorSpec], alphas: &[f64], seeds: &[u64]) -> CliResult<Vec<RunRecord>> {
    let workers = pool(cfg.jobs)?;
    workers.install(|| {
        let streams: Vec<Vec<Score>> = seeds
            .par_iter()
            .map(|&s| cfg.source.scores(s, cfg.horizon))
            .collect::<CliResult<_>>()?;
        let cells: Vec<(usize, f64, usize)> = (0..roster.len())
            .flat_map(|p| {
                alphas
                    .iter()
                    .flat_map(move |&a| (0..seeds.len()).map(move |s| (p, a, s)))
            })
            .collect();
        cells
            .par_iter()
            .map(|&(p, a, s)| {
                Ok(RunRecord {
                    predictor: roster[p].label().to_string(),
                    alpha: a,
                    seed: seeds[s],
                    report: cell(&roster[p], &streams[s], a, cfg.burn_in)?,
                })
            })
            .collect()
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

pub fn cmd_bench(cfg: &ExperimentConfig) -> CliResult<()> {
    let roster = cfg.roster()?;
    let a = cfg.single_alpha()?;
    let seeds = cfg.seed_list(1..=10);
    let runs = grid(cfg, &roster, &[a], &seeds)?;

    let rows: Vec<(String, [f64; 7])> = roster
        .iter()
        .map(|spec| {
            let rs: Vec<&MetricsReport> = runs
                .iter()
                .filter(|r| r.predictor == spec.label())
                .map(|r| &r.report)
                .collect();
            let avg = |f: fn(&MetricsReport) -> f64| mean(rs.iter().map(|r| f(r)));
            (
                spec.label().to_string(),
                [
                    avg(|r| r.marginal_coverage),
                    avg(|r| r.longest_error_run as f64),
                    avg(|r| r.mean_size),
                    avg(|r| r.median_size),
                    avg(|r| r.q75),
                    avg(|r| r.q90),
                    avg(|r| r.q95),
                ],
            )
        })
        .collect();

    const COLS: [&str; 7] = [
        "coverage",
        "longest_error_run",
        "mean_size",
        "median_size",
        "q75",
        "q90",
        "q95",
    ];
    let mut header = vec!["predictor", "alpha", "seeds"];
    header.extend(COLS);
    let bench_csv = csv_document(
        &header,
        rows.iter().map(|(name, vals)| {
            let mut row = vec![name.clone(), a.to_string(), seeds.len().to_string()];
            row.extend(vals.iter().map(|&v| csv_f64(v)));
            row
        }),
    )?;
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|(name, vals)| {
            let mut m = Map::new();
            m.insert("predictor".into(), json!(name));
            for (k, &v) in COLS.iter().zip(vals) {
                m.insert((*k).into(), json_f64(v));
            }
            Value::Object(m)
        })
        .collect();
    let bench_json = json!({
        "schema_version": SCHEMA_VERSION,
        "source": cfg.source.label(),
        "alpha": a,
        "seeds": seeds,
        "burn_in": cfg.burn_in,
        "rows": json_rows,
    });
    emit(
        &cfg.out,
        &[("bench.json", json_document(&bench_json)), ("bench.csv", bench_csv)],
        "bench.json",
    )
}

pub fn cmd_pareto(cfg: &ExperimentConfig) -> CliResult<()> {
    let roster = cfg.roster()?;
    let alphas = cfg.alpha_list();
    let seeds = cfg.seed_list(1..=10);
    let runs = grid(cfg, &roster, &alphas, &seeds)?;

    let rank = |id: &str| roster.iter().position(|p| p.label() == id).unwrap_or(usize::MAX);
    let mut points = pareto_frontier(&runs, cfg.stat);
    points.sort_by(|x, y| {
        rank(&x.predictor_id)
            .cmp(&rank(&y.predictor_id))
            .then(x.target_alpha.total_cmp(&y.target_alpha))
    });
    let stat = cfg.stat.to_string();
    let pareto_csv = csv_document(
        &["predictor", "alpha", "coverage", "se_cov", "size", "se_size", "stat"],
        points.iter().map(|p| {
            vec![
                p.predictor_id.clone(),
                p.target_alpha.to_string(),
                csv_f64(p.realized_coverage),
                csv_f64(p.se_coverage),
                csv_f64(p.size_stat),
                csv_f64(p.se_size),
                stat.clone(),
            ]
        }),
    )?;

    let tracking = target_tracking(&runs);
    for w in monotonicity_warnings(&tracking, MONOTONICITY_TOLERANCE) {
        eprintln!("warning: {w}");
    }
    let tracking_csv = csv_document(
        &["predictor", "alpha", "target_coverage", "coverage", "within_band"],
        tracking.iter().map(|t| {
            vec![
                t.predictor_id.clone(),
                t.target_alpha.to_string(),
                csv_f64(t.target_coverage),
                csv_f64(t.realized_coverage),
                t.within_band.to_string(),
            ]
        }),
    )?;
    emit(
        &cfg.out,
        &[("pareto.csv", pareto_csv), ("tracking.csv", tracking_csv)],
        "pareto.csv",
    )
}

pub fn cmd_verify(cfg: &ExperimentConfig, corrupt_grad_sign: bool) -> CliResult<()> {
    let summaries = pool(cfg.jobs)?.install(|| verify_battery(cfg, corrupt_grad_sign))?;
    let failed = summaries.iter().filter(|s| !s.worst.holds).count();
    for s in &summaries {
        println!(
            "{} {:.6e} {:.6e} {}",
            s.name,
            s.worst.observed,
            s.worst.bound,
            if s.worst.holds { "PASS" } else { "FAIL" }
        );
        eprintln!("  {} instance(s), tightest slack {:.3e}", s.count, s.worst.slack);
    }
    if failed > 0 {
        return Err(CliError::VerifyFailed {
            failed,
            total: summaries.len(),
        });
    }
    Ok(())
}
