use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::projection::{residuals, whitened_residual_powers, Whitener};
use super::EstimatorConfig;
use crate::clutter::{h_weight_unchecked, TextureFamily};
use crate::error::{Error, Result};
use crate::model::{ArrayGeometry, CMatrix, ObservationBlock};

const LOADING_RATIO: f64 = 1e-12;
const LOADING_LEVEL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct SigmaUpdate {
    /// Estimate rescaled to trace `MN`.
    pub sigma: CMatrix,
    /// `tr / MN` of the estimate before rescaling.
    pub scale: f64,
    pub loaded: bool,
    pub iterations: usize,
}

/// `(1/L) sum_l w_l r(l) r(l)^H`, Hermitian by construction, loaded when
/// numerically singular. Falls back to the identity when the scatter vanishes.
pub(crate) fn weighted_scatter(res: &CMatrix, weights: &[f64]) -> (CMatrix, bool) {
    let n = res.nrows();
    let pulses = res.ncols() as f64;
    let mut scaled = res.clone();
    for (mut col, w) in scaled.column_iter_mut().zip(weights) {
        col *= Complex64::from(w.sqrt());
    }
    let mut s = &scaled * scaled.adjoint() / Complex64::from(pulses);
    s = (&s + s.adjoint()) * Complex64::from(0.5);
    let trace = s.trace().re;
    if !(trace > 0.0 && trace.is_finite()) {
        return (CMatrix::identity(n, n), true);
    }
    let eig = SymmetricEigen::new(s.clone());
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if min / max < LOADING_RATIO {
        for i in 0..n {
            s[(i, i)] += Complex64::from(LOADING_LEVEL * trace / n as f64);
        }
        return (s, true);
    }
    (s, false)
}

/// Fixed point `Sigma <- (1/L) sum_l weight(|rho(l)|^2) r(l) r(l)^H`, where
/// `|rho(l)|^2 = r(l)^H Sigma^-1 r(l)` uses the previous iterate. Stops on a
/// relative Frobenius change below the configured tolerance or after the
/// configured number of maps, then rescales to trace `MN`.
pub fn update_sigma_with<F: Fn(f64) -> f64>(
    res: &CMatrix,
    sigma0: &CMatrix,
    weight: F,
    config: &EstimatorConfig,
) -> Result<SigmaUpdate> {
    let n = res.nrows();
    if sigma0.nrows() != n || sigma0.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: sigma0.nrows(),
        });
    }
    let mut current = sigma0.clone();
    let mut loaded = false;
    let mut iterations = 0;
    for _ in 0..config.sigma_fixed_point_iters {
        iterations += 1;
        let w = Whitener::cholesky(&current)?;
        let weights: Vec<f64> = whitened_residual_powers(&w, res).into_iter().map(&weight).collect();
        let (next, l) = weighted_scatter(res, &weights);
        loaded |= l;
        let change = (&next - &current).norm() / current.norm();
        current = next;
        if change < config.sigma_fixed_point_tol {
            break;
        }
    }
    let scale = current.trace().re / n as f64;
    Ok(SigmaUpdate {
        sigma: current / Complex64::from(scale),
        scale,
        loaded,
        iterations,
    })
}

/// Covariance update with the marginal-likelihood weight `h_MN`.
pub fn update_sigma(
    geom: &ArrayGeometry,
    theta: &[f64],
    v_hat: &CMatrix,
    texture: &TextureFamily,
    obs: &ObservationBlock,
    sigma0: &CMatrix,
    config: &EstimatorConfig,
) -> Result<SigmaUpdate> {
    let res = residuals(geom, theta, v_hat, obs);
    let mn = geom.mn();
    update_sigma_with(&res, sigma0, |r| h_weight_unchecked(r, texture, mn), config)
}
