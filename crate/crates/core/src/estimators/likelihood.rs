use std::f64::consts::PI;

use super::projection::{residuals, whitened_residual_powers, Whitener};
use crate::clutter::{log_g_unchecked, TextureFamily};
use crate::error::{Error, Result};
use crate::model::{ArrayGeometry, CMatrix, ObservationBlock};

/// `Lambda = -L MN ln(pi) - L ln|Sigma| + sum_l ln g_MN(|rho(l)|^2)`.
pub fn marginal_log_likelihood(
    geom: &ArrayGeometry,
    theta: &[f64],
    v_hat: &CMatrix,
    sigma: &CMatrix,
    texture: &TextureFamily,
    obs: &ObservationBlock,
) -> Result<f64> {
    if obs.dim() != geom.mn() {
        return Err(Error::Dimension {
            expected: geom.mn(),
            found: obs.dim(),
        });
    }
    if theta.len() != 2 * v_hat.nrows() || v_hat.ncols() != obs.pulses() {
        return Err(Error::Dimension {
            expected: 2 * v_hat.nrows(),
            found: theta.len(),
        });
    }
    let w = Whitener::cholesky(sigma)?;
    let rho = whitened_residual_powers(&w, &residuals(geom, theta, v_hat, obs));
    Ok(log_likelihood_from_powers(w.log_det_sigma(), &rho, texture, geom.mn()))
}

pub(crate) fn log_likelihood_from_powers(log_det: f64, rho_sq: &[f64], texture: &TextureFamily, mn: usize) -> f64 {
    let l = rho_sq.len() as f64;
    let kernel: f64 = rho_sq.iter().map(|&r| log_g_unchecked(r, texture, mn)).sum();
    -l * mn as f64 * PI.ln() - l * log_det + kernel
}
