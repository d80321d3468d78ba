use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Experiment, SweepPoint};
use crate::clutter::sample_clutter;
use crate::error::{Error, Result};
use crate::estimators::{
    gaussian_baseline, immle_run, music_scm, texture_weighted_baseline, EstimateResult, EstimatorConfig, Flags,
    TextureMode, CVMLE_U, ICDMLE, ICVMLE, IJMLE, IMMLE, MUSIC_SCM,
};
use crate::model::{synthesize, ObservationBlock};

const TRIAL_STREAM_TAG: u64 = 0x6d69_6d6f_7369_7270;

/// Generator for one trial. The key packs the base seed and both indices, so
/// every trial has its own stream independent of execution order.
pub fn trial_rng(base_seed: u64, sweep_index: usize, trial_index: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key
        .chunks_exact_mut(8)
        .zip([base_seed, sweep_index as u64, trial_index as u64, TRIAL_STREAM_TAG])
    {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Squared errors (degrees²) of one estimator after a given iteration count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationErrors {
    pub iterations: usize,
    /// Per-angle squared errors in interleaved order after matching.
    pub squared_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    pub name: String,
    /// One entry per requested iteration count, or the failure message.
    pub result: std::result::Result<Vec<IterationErrors>, String>,
}

/// Per-angle squared errors under the assignment of estimated to true
/// (DOD, DOA) pairs with the smallest total, searched exhaustively.
pub fn match_permutation(theta_hat: &[f64], theta_true: &[f64]) -> Result<Vec<f64>> {
    if theta_true.is_empty() || !theta_true.len().is_multiple_of(2) {
        return Err(Error::domain("match_permutation", "angles must hold DOD/DOA pairs"));
    }
    if theta_hat.len() != theta_true.len() {
        return Err(Error::Dimension {
            expected: theta_true.len(),
            found: theta_hat.len(),
        });
    }
    let k = theta_true.len() / 2;
    if k > 8 {
        return Err(Error::domain("match_permutation", format!("exhaustive matching supports K <= 8, got {k}")));
    }
    let cost = |i: usize, j: usize| {
        (theta_hat[2 * i] - theta_true[2 * j]).powi(2) + (theta_hat[2 * i + 1] - theta_true[2 * j + 1]).powi(2)
    };
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = (f64::INFINITY, perm.clone());
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
        if total < best.0 {
            best = (total, p.to_vec());
        }
    });
    let mut out = vec![0.0; 2 * k];
    for (i, &j) in best.1.iter().enumerate() {
        out[2 * j] = (theta_hat[2 * i] - theta_true[2 * j]).powi(2);
        out[2 * j + 1] = (theta_hat[2 * i + 1] - theta_true[2 * j + 1]).powi(2);
    }
    Ok(out)
}

fn permute(p: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == p.len() {
        visit(p);
        return;
    }
    for i in start..p.len() {
        p.swap(start, i);
        permute(p, start + 1, visit);
        p.swap(start, i);
    }
}

/// What one estimator produced on one observation block.
#[derive(Debug, Clone)]
pub enum EstimatorRun {
    Iterative(EstimateResult),
    Music { theta: Vec<f64>, flags: Flags },
}

impl EstimatorRun {
    /// Angles after `iterations` outer iterations (radians).
    pub fn theta_at(&self, iterations: usize) -> &[f64] {
        match self {
            EstimatorRun::Iterative(r) => r.theta_at(iterations),
            EstimatorRun::Music { theta, .. } => theta,
        }
    }
}

/// Run one named estimator for at most `max_iterations` outer iterations.
pub fn run_estimator(
    name: &str,
    obs: &ObservationBlock,
    experiment: &Experiment,
    k: usize,
    max_iterations: usize,
) -> Result<EstimatorRun> {
    let geom = &experiment.geometry;
    let config = EstimatorConfig {
        max_outer_iters: max_iterations.max(1),
        ..experiment.estimator_config
    };
    let kind = experiment.kind;
    let result = match name {
        IMMLE => immle_run(obs, geom, k, kind, &config)?,
        ICDMLE => texture_weighted_baseline(obs, geom, k, kind, &config, TextureMode::Conditional)?,
        IJMLE => texture_weighted_baseline(obs, geom, k, kind, &config, TextureMode::Joint)?,
        ICVMLE => gaussian_baseline(obs, geom, k, &config, true)?,
        CVMLE_U => gaussian_baseline(obs, geom, k, &config, false)?,
        MUSIC_SCM => {
            let m = music_scm(obs, geom, k, &config)?;
            let flags = Flags {
                degenerate_spectrum: m.degenerate,
                ..Flags::default()
            };
            return Ok(EstimatorRun::Music { theta: m.theta, flags });
        }
        other => return Err(Error::Config(format!("unknown estimator `{other}`"))),
    };
    Ok(EstimatorRun::Iterative(result))
}

impl Experiment {
    pub fn point(&self, sweep_index: usize) -> Result<&SweepPoint> {
        self.points.get(sweep_index).ok_or(Error::Index {
            index: sweep_index,
            len: self.points.len(),
        })
    }

    /// The observation block of one trial.
    pub fn observation(&self, sweep_index: usize, trial_index: usize) -> Result<ObservationBlock> {
        let point = self.point(sweep_index)?;
        let mut rng = trial_rng(self.base_seed, sweep_index, trial_index);
        let clutter = sample_clutter(&point.clutter, point.scene.pulses(), &mut rng);
        synthesize(&self.geometry, &point.scene, &clutter)
    }

    /// Every selected estimator on one trial, each run as far as its largest
    /// requested iteration count. Failures are recorded per estimator.
    pub fn run_trial(&self, sweep_index: usize, trial_index: usize) -> Result<Vec<EstimatorOutcome>> {
        let truth = self.point(sweep_index)?.scene.theta();
        let obs = self.observation(sweep_index, trial_index)?;
        Ok(self
            .estimators
            .iter()
            .map(|sel| {
                let max_iter = sel.iterations.iter().copied().max().unwrap_or(1);
                let result = run_estimator(&sel.name, &obs, self, truth.len() / 2, max_iter).and_then(|run| {
                    sel.iterations
                        .iter()
                        .map(|&i| {
                            let deg: Vec<f64> = run.theta_at(i).iter().map(|t| t.to_degrees()).collect();
                            let truth_deg: Vec<f64> = truth.iter().map(|t| t.to_degrees()).collect();
                            Ok(IterationErrors {
                                iterations: i,
                                squared_errors: match_permutation(&deg, &truth_deg)?,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                });
                EstimatorOutcome {
                    name: sel.name.clone(),
                    result: result.map_err(|e| e.to_string()),
                }
            })
            .collect())
    }
}
