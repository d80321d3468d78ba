//! Angle estimators: the marginal-likelihood estimator (IMMLE), the
//! Gaussian and texture-weighted likelihood baselines, and MUSIC on the
//! sample covariance.
//!
//! Angle vectors are interleaved pairs `[dod_0, doa_0, dod_1, doa_1, ...]` in
//! radians. Search settings in [`EstimatorConfig`] are in degrees.

mod baselines;
mod immle;
mod likelihood;
mod music;
mod objective;
mod projection;
mod search;
mod sigma;
mod texture_params;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CMatrix, CVector};

pub use baselines::{gaussian_baseline, texture_weighted_baseline, TextureMode};
pub use immle::{immle_run, immle_theta_objective};
pub use likelihood::marginal_log_likelihood;
pub use music::{music_scm, MusicResult};
pub use objective::{ConcentratedObjective, PulseCost};
pub use projection::{
    estimate_v, estimate_v_all, residuals, whitened_residual_norm_sq, whitened_residual_powers, Whitener,
};
pub use search::{minimize_theta, nelder_mead, NelderMeadOutcome, PairEvaluator, SearchOutcome, ThetaObjective};
pub use sigma::{update_sigma, update_sigma_with, SigmaUpdate};
pub use texture_params::{fit_gamma, solve_texture_params, TextureUpdate};

/// Names used on the command line and in output rows.
pub const IMMLE: &str = "IMMLE";
pub const ICDMLE: &str = "ICdMLE";
pub const IJMLE: &str = "IJMLE";
pub const ICVMLE: &str = "ICvMLE";
pub const CVMLE_U: &str = "CvMLE-U";
pub const MUSIC_SCM: &str = "MUSIC-SCM";
pub const ALL_ESTIMATORS: [&str; 6] = [IMMLE, ICDMLE, IJMLE, ICVMLE, CVMLE_U, MUSIC_SCM];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Grid spacing of the per-target (DOD, DOA) scan, degrees.
    pub coarse_grid_step: f64,
    /// Polish tolerance and outer-loop stopping threshold, degrees.
    pub refine_tol: f64,
    pub max_outer_iters: usize,
    pub sigma_fixed_point_iters: usize,
    /// Relative Frobenius change that stops the covariance fixed point.
    pub sigma_fixed_point_tol: f64,
    /// `[a_min, a_max, b_min, b_max]`.
    pub ab_bounds: [f64; 4],
    pub root_tol: f64,
    pub initial_a: f64,
    pub initial_b: f64,
    /// Simplex evaluation budget per target polish.
    pub polish_budget: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            coarse_grid_step: 1.0,
            refine_tol: 0.01,
            max_outer_iters: 5,
            sigma_fixed_point_iters: 10,
            sigma_fixed_point_tol: 1e-3,
            ab_bounds: [0.05, 100.0, 1e-3, 1e4],
            root_tol: 1e-6,
            initial_a: 2.0,
            initial_b: 1.0,
            polish_budget: 200,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.coarse_grid_step > 0.0 && self.coarse_grid_step < 90.0) {
            return bad(format!("coarse_grid_step must lie in (0, 90), got {}", self.coarse_grid_step));
        }
        if !(self.refine_tol > 0.0 && self.refine_tol < self.coarse_grid_step) {
            return bad(format!(
                "refine_tol must lie in (0, coarse_grid_step), got {}",
                self.refine_tol
            ));
        }
        if self.max_outer_iters == 0 {
            return bad("max_outer_iters must be >= 1".into());
        }
        if self.sigma_fixed_point_iters == 0 || !(self.sigma_fixed_point_tol > 0.0) {
            return bad("sigma fixed point needs >= 1 iteration and a positive tolerance".into());
        }
        let [a_lo, a_hi, b_lo, b_hi] = self.ab_bounds;
        if !(a_lo > 0.0 && a_lo < a_hi && b_lo > 0.0 && b_lo < b_hi && a_hi.is_finite() && b_hi.is_finite()) {
            return bad(format!("ab_bounds must be positive and ordered, got {:?}", self.ab_bounds));
        }
        if !(self.root_tol > 0.0) {
            return bad("root_tol must be > 0".into());
        }
        if !(self.initial_a > 0.0 && self.initial_b > 0.0) {
            return bad("initial_a and initial_b must be > 0".into());
        }
        if self.polish_budget < 3 {
            return bad("polish_budget must be >= 3".into());
        }
        Ok(())
    }

    pub(crate) fn grid_step_rad(&self) -> f64 {
        self.coarse_grid_step.to_radians()
    }

    pub(crate) fn refine_tol_rad(&self) -> f64 {
        self.refine_tol.to_radians()
    }
}

/// Conditions worth surfacing that did not stop an estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Flags {
    /// The two search sweeps disagreed by more than one grid step.
    pub multimodal: bool,
    /// A texture-parameter root was not bracketed inside the bounds.
    pub bracket_exhausted: bool,
    /// The covariance estimate needed diagonal loading.
    pub diagonal_loading: bool,
    /// MUSIC found no gap between signal and noise eigenvalues.
    pub degenerate_spectrum: bool,
}

/// Per-iteration estimates of one estimator run.
#[derive(Debug, Clone)]
pub struct EstimateResult {
    pub theta_hat: Vec<Vec<f64>>,
    /// Trace-normalised speckle covariance per iteration.
    pub sigma_hat: Vec<CMatrix>,
    /// Texture shape per iteration; empty for estimators without one.
    pub a_hat: Vec<f64>,
    pub b_hat: Vec<f64>,
    /// `v(l)` of the last iteration as a `K x L` matrix.
    pub v_hat: CMatrix,
    /// Marginal log-likelihood per iteration; empty for the baselines.
    pub ll_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
    pub flags: Flags,
}

impl EstimateResult {
    /// Angles after `iteration` (1-based) iterations, or the final angles if
    /// the run stopped earlier.
    pub fn theta_at(&self, iteration: usize) -> &[f64] {
        let i = iteration.clamp(1, self.theta_hat.len()) - 1;
        &self.theta_hat[i]
    }

    pub fn final_theta(&self) -> &[f64] {
        self.theta_hat.last().expect("at least one iteration")
    }

    pub fn v_column(&self, l: usize) -> CVector {
        self.v_hat.column(l).into_owned()
    }
}

/// Largest absolute angle change between two interleaved angle vectors.
pub(crate) fn max_angle_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
pub(crate) mod test_support {
    use num_complex::Complex64;

    use crate::model::{ArrayGeometry, CMatrix, Scene};

    pub fn geometry() -> ArrayGeometry {
        ArrayGeometry::half_wavelength_ula(3, 4, 1.0).unwrap()
    }

    pub fn scene() -> Scene {
        Scene::new(
            vec![18f64.to_radians(), 45f64.to_radians()],
            vec![20f64.to_radians(), 40f64.to_radians()],
            vec![Complex64::new(2.0, 3.0), Complex64::new(1.0, -0.5)],
            vec![0.3, 0.8],
            15,
            5,
        )
        .unwrap()
    }

    /// A deterministic Hermitian positive-definite matrix.
    pub fn spd(n: usize, seed: u64) -> CMatrix {
        let b = CMatrix::from_fn(n, n, |r, c| {
            let x = ((r * 7 + c * 13) as f64 + seed as f64 * 0.37).sin();
            let y = ((r * 3 + c * 5) as f64 + seed as f64 * 1.1).cos();
            Complex64::new(x, y)
        });
        &b * b.adjoint() + CMatrix::identity(n, n) * Complex64::from(0.5)
    }
}
