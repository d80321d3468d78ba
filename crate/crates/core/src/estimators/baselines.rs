use super::immle::check_run_inputs;
use super::objective::{ConcentratedObjective, PulseCost};
use super::projection::{estimate_v_all, residuals, whitened_residual_powers, Whitener};
use super::search::minimize_theta;
use super::sigma::update_sigma_with;
use super::texture_params::fit_gamma;
use super::{max_angle_change, EstimateResult, EstimatorConfig, Flags};
use crate::clutter::{TextureFamily, TextureKind, RHO_FLOOR};
use crate::error::Result;
use crate::model::{ArrayGeometry, CMatrix, ObservationBlock};

/// Per-pulse texture estimate used to weight the baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextureMode {
    /// Maximiser of the conditional density given `tau`: `|rho|^2 / MN`.
    Conditional,
    /// Maximiser of the joint density of snapshot and texture.
    Joint,
}

#[derive(Debug, Clone, Copy)]
enum Weighting {
    Uniform,
    Conditional,
    Joint(TextureKind),
}

/// Joint-density maximiser in `tau` for one pulse.
pub(crate) fn joint_texture_estimate(rho_sq: f64, texture: &TextureFamily, mn: usize) -> f64 {
    let (a, b, m) = (texture.shape, texture.scale, mn as f64);
    let rho_sq = rho_sq.max(RHO_FLOOR * RHO_FLOOR);
    match texture.kind {
        TextureKind::TDistributed => (rho_sq + b) / (m + a + 1.0),
        TextureKind::KDistributed => {
            // positive root of tau^2 - b (a - 1 - MN) tau - b rho^2
            let c = b * (a - 1.0 - m);
            let disc = (c * c + 4.0 * b * rho_sq).sqrt();
            if c >= 0.0 {
                0.5 * (c + disc)
            } else {
                2.0 * b * rho_sq / (disc - c)
            }
        }
    }
}

fn conditional_texture_estimate(rho_sq: f64, mn: usize) -> f64 {
    rho_sq.max(RHO_FLOOR * RHO_FLOOR) / mn as f64
}

fn empty_result(k: usize, pulses: usize) -> EstimateResult {
    EstimateResult {
        theta_hat: Vec::new(),
        sigma_hat: Vec::new(),
        a_hat: Vec::new(),
        b_hat: Vec::new(),
        v_hat: CMatrix::zeros(k, pulses),
        ll_trace: Vec::new(),
        converged: false,
        iterations_used: 0,
        flags: Flags::default(),
    }
}

fn uniform_search(obs: &ObservationBlock, geom: &ArrayGeometry, k: usize, config: &EstimatorConfig) -> Result<(Vec<f64>, bool)> {
    let mn = geom.mn();
    let objective = ConcentratedObjective::new(geom, &CMatrix::identity(mn, mn), obs, k, PulseCost::Squared)?;
    let s = minimize_theta(&objective, config, None)?;
    Ok((s.theta, s.multimodal))
}

/// Gaussian-likelihood baselines. Without `iterative` the clutter is taken
/// as white (CvMLE-U); with it the angles alternate with the normalised
/// sample covariance of the residuals (ICvMLE), starting from CvMLE-U.
pub fn gaussian_baseline(
    obs: &ObservationBlock,
    geom: &ArrayGeometry,
    k: usize,
    config: &EstimatorConfig,
    iterative: bool,
) -> Result<EstimateResult> {
    config.validate()?;
    check_run_inputs(obs, geom, k)?;
    if iterative {
        return alternate(obs, geom, k, config, Weighting::Uniform);
    }
    let mn = geom.mn();
    let (theta, multimodal) = uniform_search(obs, geom, k, config)?;
    let identity = CMatrix::identity(mn, mn);
    let mut out = empty_result(k, obs.pulses());
    out.v_hat = estimate_v_all(geom, &theta, &Whitener::cholesky(&identity)?, obs)?;
    out.theta_hat.push(theta);
    out.sigma_hat.push(identity);
    out.converged = true;
    out.iterations_used = 1;
    out.flags.multimodal = multimodal;
    Ok(out)
}

/// Texture-weighted baselines: angles minimise `sum_l |P_perp z~(l)|^2 / tau(l)`
/// with per-pulse texture estimates from `mode` (ICdMLE for
/// [`TextureMode::Conditional`], IJMLE for [`TextureMode::Joint`]). Texture
/// estimates and the covariance alternate with the angles, starting from
/// CvMLE-U. In joint mode the texture parameters are refitted to the
/// estimates every iteration.
pub fn texture_weighted_baseline(
    obs: &ObservationBlock,
    geom: &ArrayGeometry,
    k: usize,
    kind: TextureKind,
    config: &EstimatorConfig,
    mode: TextureMode,
) -> Result<EstimateResult> {
    config.validate()?;
    check_run_inputs(obs, geom, k)?;
    let weighting = match mode {
        TextureMode::Conditional => Weighting::Conditional,
        TextureMode::Joint => Weighting::Joint(kind),
    };
    alternate(obs, geom, k, config, weighting)
}

/// Refit the texture family to per-pulse estimates.
fn refit(tau: &[f64], texture: &TextureFamily, config: &EstimatorConfig) -> Result<TextureFamily> {
    let [a_lo, a_hi, b_lo, b_hi] = config.ab_bounds;
    match texture.kind {
        TextureKind::KDistributed => {
            let (a, b) = fit_gamma(tau, config.ab_bounds)?;
            texture.with_params(a, b)
        }
        TextureKind::TDistributed => {
            let inv: Vec<f64> = tau.iter().map(|t| 1.0 / t).collect();
            let (a, s) = fit_gamma(&inv, [a_lo, a_hi, 1.0 / b_hi, 1.0 / b_lo])?;
            texture.with_params(a, 1.0 / s)
        }
    }
}

fn alternate(
    obs: &ObservationBlock,
    geom: &ArrayGeometry,
    k: usize,
    config: &EstimatorConfig,
    weighting: Weighting,
) -> Result<EstimateResult> {
    let mn = geom.mn();
    let [_, _, b_lo, b_hi] = config.ab_bounds;
    let mut out = empty_result(k, obs.pulses());
    let (mut theta, multimodal) = uniform_search(obs, geom, k, config)?;
    out.flags.multimodal |= multimodal;
    let mut sigma = CMatrix::identity(mn, mn);
    let mut tex = match weighting {
        Weighting::Joint(kind) => Some(TextureFamily::new(kind, config.initial_a, config.initial_b)?),
        _ => None,
    };
    let tau_of = |r: f64, tex: &Option<TextureFamily>| match (weighting, tex) {
        (Weighting::Uniform, _) => 1.0,
        (Weighting::Conditional, _) => conditional_texture_estimate(r, mn),
        (Weighting::Joint(_), Some(t)) => joint_texture_estimate(r, t, mn),
        (Weighting::Joint(_), None) => unreachable!("joint weighting carries a texture"),
    };

    for iteration in 1..=config.max_outer_iters {
        let whitener = Whitener::cholesky(&sigma)?;
        let v = estimate_v_all(geom, &theta, &whitener, obs)?;
        let res = residuals(geom, &theta, &v, obs);
        if let Some(t) = tex {
            let rho = whitened_residual_powers(&whitener, &res);
            let tau: Vec<f64> = rho.iter().map(|&r| tau_of(r, &tex)).collect();
            tex = Some(refit(&tau, &t, config)?);
        }
        let s = update_sigma_with(&res, &sigma, |r| 1.0 / tau_of(r, &tex), config)?;
        out.flags.diagonal_loading |= s.loaded;
        sigma = s.sigma;
        if let Some(t) = tex {
            tex = Some(t.with_params(t.shape, (t.scale * s.scale).clamp(b_lo, b_hi))?);
        }

        let whitener = Whitener::cholesky(&sigma)?;
        let cost = match weighting {
            Weighting::Uniform => PulseCost::Squared,
            _ => {
                let v = estimate_v_all(geom, &theta, &whitener, obs)?;
                let rho = whitened_residual_powers(&whitener, &residuals(geom, &theta, &v, obs));
                PulseCost::Weighted(rho.iter().map(|&r| 1.0 / tau_of(r, &tex)).collect())
            }
        };
        let objective = ConcentratedObjective::with_whitener(geom, whitener.clone(), obs, k, cost)?;
        let search = minimize_theta(&objective, config, Some(&theta))?;
        out.flags.multimodal |= search.multimodal;
        let change = max_angle_change(&theta, &search.theta);
        theta = search.theta;

        out.v_hat = estimate_v_all(geom, &theta, &whitener, obs)?;
        out.theta_hat.push(theta.clone());
        out.sigma_hat.push(sigma.clone());
        if let Some(t) = tex {
            out.a_hat.push(t.shape);
            out.b_hat.push(t.scale);
        }
        out.iterations_used = iteration;
        if iteration >= 2 && change < config.refine_tol_rad() {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}
