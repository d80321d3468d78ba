use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Experiment, SweepAxis};
use super::trial::{match_permutation, run_estimator, EstimatorOutcome, EstimatorRun};
use crate::crb::crb_theta;
use crate::error::{Error, Result};
use crate::estimators::Flags;

/// Mean-squared angle error of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMse {
    pub mse_db: f64,
    pub trials_used: usize,
    pub failures: usize,
}

/// `10 log10` of the mean over successful trials of the summed squared error
/// (degrees²) over all `2K` angles. This is the same convention as
/// [`crate::crb::CrbResult::aggregate_db`], so both columns are comparable.
/// `None` entries are failed trials; they are excluded and counted.
pub fn aggregate(trial_errors: &[Option<Vec<f64>>]) -> Result<CellMse> {
    let used: Vec<f64> = trial_errors.iter().flatten().map(|e| e.iter().sum()).collect();
    let failures = trial_errors.len() - used.len();
    if used.is_empty() {
        return Err(Error::AllTrialsFailed { failures });
    }
    let mean = used.iter().sum::<f64>() / used.len() as f64;
    Ok(CellMse {
        mse_db: 10.0 * mean.log10(),
        trials_used: used.len(),
        failures,
    })
}

/// One output line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_axis: &'static str,
    pub sweep_value: f64,
    pub estimator: String,
    pub iterations: usize,
    /// NaN when every trial failed.
    pub mse_db: f64,
    pub crb_db: f64,
    pub trials_used: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrbRow {
    pub sweep_value: f64,
    pub crb_db: f64,
}

/// Aggregate bound in dB at every sweep value.
pub fn crb_curve(experiment: &Experiment) -> Result<Vec<CrbRow>> {
    experiment
        .points
        .iter()
        .map(|p| {
            let crb = crb_theta(&experiment.geometry, &p.scene, &p.clutter)
                .map_err(|e| e.context(format!("bound at sweep value {}", p.value)))?;
            Ok(CrbRow {
                sweep_value: p.value,
                crb_db: crb.aggregate_db(),
            })
        })
        .collect()
}

/// Full Monte Carlo sweep. Trials of a sweep value run in parallel; cells
/// where every trial failed are kept with `mse_db = NaN`.
pub fn sweep(experiment: &Experiment) -> Result<SweepResult> {
    sweep_with_progress(experiment, |_, _| {})
}

/// [`sweep`] calling `progress(done, total)` after each sweep value.
pub fn sweep_with_progress(experiment: &Experiment, mut progress: impl FnMut(usize, usize)) -> Result<SweepResult> {
    let crb = crb_curve(experiment)?;
    let mut rows = Vec::new();
    for (si, point) in experiment.points.iter().enumerate() {
        let outcomes: Vec<Vec<EstimatorOutcome>> = (0..experiment.trials)
            .into_par_iter()
            .map(|t| experiment.run_trial(si, t))
            .collect::<Result<_>>()?;
        for (ei, sel) in experiment.estimators.iter().enumerate() {
            for (ii, &iterations) in sel.iterations.iter().enumerate() {
                let errors: Vec<Option<Vec<f64>>> = outcomes
                    .iter()
                    .map(|trial| trial[ei].result.as_ref().ok().map(|r| r[ii].squared_errors.clone()))
                    .collect();
                let cell = aggregate(&errors).unwrap_or(CellMse {
                    mse_db: f64::NAN,
                    trials_used: 0,
                    failures: errors.len(),
                });
                rows.push(SweepRow {
                    sweep_axis: experiment.axis.as_str(),
                    sweep_value: point.value,
                    estimator: sel.name.clone(),
                    iterations,
                    mse_db: cell.mse_db,
                    crb_db: crb[si].crb_db,
                    trials_used: cell.trials_used,
                    failures: cell.failures,
                });
            }
        }
        progress(si + 1, experiment.points.len());
    }
    rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then_with(|| a.estimator.cmp(&b.estimator))
            .then_with(|| a.iterations.cmp(&b.iterations))
    });
    Ok(SweepResult {
        axis: experiment.axis,
        rows,
    })
}

fn write_rows<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// CSV with header `sweep_axis,sweep_value,estimator,iterations,mse_db,crb_db,trials_used,failures`.
pub fn write_sweep_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    write_rows(&result.rows, out)
}

/// CSV with header `sweep_value,crb_db`.
pub fn write_crb_csv<W: Write>(rows: &[CrbRow], out: W) -> Result<()> {
    write_rows(rows, out)
}

/// Everything one estimator produced on a single trial, angles in degrees.
#[derive(Debug, Clone, Serialize)]
pub struct EstimatorReport {
    pub name: String,
    pub error: Option<String>,
    pub theta_deg: Vec<Vec<f64>>,
    pub a_hat: Vec<f64>,
    pub b_hat: Vec<f64>,
    pub ll_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    pub flags: Flags,
    /// Matched per-angle squared errors of the final estimate, degrees².
    pub squared_errors: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialReport {
    pub sweep_axis: &'static str,
    pub sweep_value: f64,
    pub sweep_index: usize,
    pub trial_index: usize,
    pub truth_deg: Vec<f64>,
    pub estimators: Vec<EstimatorReport>,
}

/// One trial with the full estimator output, for inspection.
pub fn simulate(experiment: &Experiment, sweep_index: usize, trial_index: usize) -> Result<TrialReport> {
    let point = experiment.point(sweep_index)?;
    let truth = point.scene.theta();
    let truth_deg: Vec<f64> = truth.iter().map(|t| t.to_degrees()).collect();
    let obs = experiment.observation(sweep_index, trial_index)?;
    let mut estimators = Vec::new();
    for sel in &experiment.estimators {
        let max_iter = sel.iterations.iter().copied().max().unwrap_or(1);
        let mut report = EstimatorReport {
            name: sel.name.clone(),
            error: None,
            theta_deg: Vec::new(),
            a_hat: Vec::new(),
            b_hat: Vec::new(),
            ll_trace: Vec::new(),
            converged: false,
            iterations_used: 0,
            flags: Flags::default(),
            squared_errors: Vec::new(),
        };
        let to_deg = |t: &[f64]| t.iter().map(|x| x.to_degrees()).collect::<Vec<f64>>();
        match run_estimator(&sel.name, &obs, experiment, truth.len() / 2, max_iter) {
            Ok(EstimatorRun::Iterative(r)) => {
                report.theta_deg = r.theta_hat.iter().map(|t| to_deg(t)).collect();
                report.a_hat = r.a_hat;
                report.b_hat = r.b_hat;
                report.ll_trace = r.ll_trace;
                report.converged = r.converged;
                report.iterations_used = r.iterations_used;
                report.flags = r.flags;
            }
            Ok(EstimatorRun::Music { theta, flags }) => {
                report.theta_deg = vec![to_deg(&theta)];
                report.converged = true;
                report.iterations_used = 1;
                report.flags = flags;
            }
            Err(e) => report.error = Some(e.to_string()),
        }
        if let Some(last) = report.theta_deg.last() {
            report.squared_errors = match_permutation(last, &truth_deg)?;
        }
        estimators.push(report);
    }
    Ok(TrialReport {
        sweep_axis: experiment.axis.as_str(),
        sweep_value: point.value,
        sweep_index,
        trial_index,
        truth_deg,
        estimators,
    })
}
