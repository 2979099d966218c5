//! Scenario execution and metric aggregation.

use serde::Serialize;

use super::config::{ScenarioConfig, SweepParam};
use crate::error::{Error, Result};
use crate::simulation::{min_threshold, parallel_runs, simulate_trials, single_records, RunLimit};
use crate::stopping::{summarize_parallel, summarize_single, TrialRecord};

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub procedure: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub trials: u64,
    pub pfa: f64,
    pub pfa_ci_lo: f64,
    pub pfa_ci_hi: f64,
    pub add: f64,
    pub add_ci_lo: f64,
    pub add_ci_hi: f64,
    pub fdr: Option<f64>,
    pub fdr_ci_lo: Option<f64>,
    pub fdr_ci_hi: Option<f64>,
    pub mean_stop: f64,
}

/// Per-trial dump, enough to recompute every aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialDumpRow {
    pub scenario: String,
    pub procedure: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub alpha: f64,
    pub run: u64,
    pub cluster: usize,
    pub change: Option<u64>,
    pub origin_x: f64,
    pub origin_y: f64,
    pub stop: Option<u64>,
    pub delay: f64,
    pub false_alarm: bool,
    pub capped: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioResult {
    pub rows: Vec<ResultRow>,
    pub trials: Vec<TrialDumpRow>,
    /// Trials that hit the slot cap without stopping, summed over rows.
    pub capped: u64,
}

fn dump(
    cfg: &ScenarioConfig,
    procedure: &str,
    param: &str,
    value: f64,
    alpha: f64,
    recs: &[TrialRecord],
) -> impl Iterator<Item = TrialDumpRow> {
    let (scenario, procedure, param) = (cfg.name.clone(), procedure.to_string(), param.to_string());
    recs.iter()
        .map(move |r| TrialDumpRow {
            scenario: scenario.clone(),
            procedure: procedure.clone(),
            sweep_param: param.clone(),
            sweep_value: value,
            alpha,
            run: r.trial,
            cluster: r.cluster,
            change: r.change,
            origin_x: r.origin.x,
            origin_y: r.origin.y,
            stop: r.stop,
            delay: r.delay,
            false_alarm: r.false_alarm,
            capped: r.capped,
        })
        .collect::<Vec<_>>()
        .into_iter()
}

/// Runs every (procedure, sweep value) cell of a scenario on the current
/// rayon pool. Trial `k` uses the same random streams at every sweep value,
/// so cells are paired across the sweep as well as across procedures.
pub fn run_scenario(cfg: &ScenarioConfig, keep_trials: bool) -> Result<ScenarioResult> {
    cfg.validate()?;
    let sweep_values: Vec<Option<f64>> = match &cfg.sweep {
        Some(s) if s.param != SweepParam::Alpha => s.values.iter().map(|&v| Some(v)).collect(),
        _ => vec![None],
    };
    let mut out = ScenarioResult::default();
    for value in sweep_values {
        let (world, procedures, deadline) = cfg.instantiate(value)?;
        let thresholds: Vec<Vec<f64>> = (0..procedures.len()).map(|i| cfg.thresholds(i)).collect();
        let stop_below: Vec<f64> = thresholds.iter().map(|t| min_threshold(t)).collect();
        let names: Vec<String> = procedures.iter().map(|p| p.display_name()).collect();

        if let (Some(par), Some(deadline)) = (&cfg.parallel, deadline) {
            let limit = RunLimit {
                deadline: Some(deadline),
                cap: deadline,
            };
            let total = cfg
                .trials
                .checked_mul(par.clusters as u64)
                .ok_or_else(|| Error::InstanceTooLarge("trials × clusters overflows".into()))?;
            let outcomes = simulate_trials(
                &world,
                &procedures,
                &stop_below,
                &limit,
                total,
                cfg.seed,
                &[],
            )?;
            for (i, proc) in procedures.iter().enumerate() {
                let d = proc.deadline.map_or(deadline, |p| p.min(deadline));
                for &alpha in &thresholds[i] {
                    let runs = parallel_runs(&outcomes, par.clusters, i, alpha, d);
                    let s = summarize_parallel(&runs);
                    let (param, sv) = label(cfg, value, alpha);
                    let (alo, ahi) = s.add.ci95();
                    let (flo, fhi) = s.fdr.ci95();
                    out.rows.push(ResultRow {
                        scenario: cfg.name.clone(),
                        procedure: names[i].clone(),
                        sweep_param: param.to_string(),
                        sweep_value: sv,
                        trials: cfg.trials,
                        pfa: s.pfa,
                        pfa_ci_lo: s.pfa_ci.0,
                        pfa_ci_hi: s.pfa_ci.1,
                        add: s.add.mean,
                        add_ci_lo: alo,
                        add_ci_hi: ahi,
                        fdr: Some(s.fdr.mean),
                        fdr_ci_lo: Some(flo),
                        fdr_ci_hi: Some(fhi),
                        mean_stop: s.mean_stop,
                    });
                    if keep_trials {
                        for run in &runs {
                            out.trials
                                .extend(dump(cfg, &names[i], param, sv, alpha, &run.records));
                        }
                    }
                }
            }
        } else {
            let cap = cfg.slot_cap.unwrap_or_else(|| world.default_cap());
            let limit = RunLimit {
                deadline: None,
                cap,
            };
            let outcomes = simulate_trials(
                &world,
                &procedures,
                &stop_below,
                &limit,
                cfg.trials,
                cfg.seed,
                &[],
            )?;
            for (i, proc) in procedures.iter().enumerate() {
                for &alpha in &thresholds[i] {
                    let recs = single_records(&outcomes, i, alpha, proc.deadline);
                    let s = summarize_single(&recs);
                    out.capped += s.capped;
                    let (param, sv) = label(cfg, value, alpha);
                    let (alo, ahi) = s.add.ci95();
                    out.rows.push(ResultRow {
                        scenario: cfg.name.clone(),
                        procedure: names[i].clone(),
                        sweep_param: param.to_string(),
                        sweep_value: sv,
                        trials: cfg.trials,
                        pfa: s.pfa,
                        pfa_ci_lo: s.pfa_ci.0,
                        pfa_ci_hi: s.pfa_ci.1,
                        add: s.add.mean,
                        add_ci_lo: alo,
                        add_ci_hi: ahi,
                        fdr: None,
                        fdr_ci_lo: None,
                        fdr_ci_hi: None,
                        mean_stop: s.mean_stop,
                    });
                    if keep_trials {
                        out.trials
                            .extend(dump(cfg, &names[i], param, sv, alpha, &recs));
                    }
                }
            }
        }
    }
    Ok(out)
}

fn label(cfg: &ScenarioConfig, value: Option<f64>, alpha: f64) -> (&'static str, f64) {
    match (&cfg.sweep, value) {
        (Some(s), Some(v)) => (s.param.as_str(), v),
        _ => ("alpha", alpha),
    }
}

/// Runs a scenario on a dedicated pool of `workers` threads.
pub fn run_with_workers(
    cfg: &ScenarioConfig,
    workers: usize,
    keep_trials: bool,
) -> Result<ScenarioResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config {
            field: "workers".into(),
            reason: e.to_string(),
        })?;
    pool.install(|| run_scenario(cfg, keep_trials))
}
