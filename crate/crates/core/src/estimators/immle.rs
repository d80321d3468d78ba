use super::likelihood::log_likelihood_from_powers;
use super::objective::{ConcentratedObjective, PulseCost};
use super::projection::{estimate_v_all, residuals, whitened_residual_powers, Whitener};
use super::search::minimize_theta;
use super::sigma::update_sigma_with;
use super::texture_params::solve_texture_params;
use super::{max_angle_change, EstimateResult, EstimatorConfig, Flags};
use crate::clutter::{h_weight_unchecked, TextureFamily, TextureKind};
use crate::error::{Error, Result};
use crate::model::{ArrayGeometry, CMatrix, ObservationBlock};

/// `-sum_l ln g_MN(|P_perp z~(l)|^2)` at `theta`.
pub fn immle_theta_objective(
    geom: &ArrayGeometry,
    theta: &[f64],
    sigma: &CMatrix,
    texture: &TextureFamily,
    obs: &ObservationBlock,
) -> Result<f64> {
    if theta.is_empty() || !theta.len().is_multiple_of(2) {
        return Err(Error::domain("immle_theta_objective", "theta must hold DOD/DOA pairs"));
    }
    let objective = ConcentratedObjective::new(geom, sigma, obs, theta.len() / 2, PulseCost::Marginal(*texture))?;
    let r2 = objective.residual_powers(theta)?;
    Ok(objective.cost_of_powers(&r2))
}

pub(crate) fn check_run_inputs(obs: &ObservationBlock, geom: &ArrayGeometry, k: usize) -> Result<()> {
    if obs.dim() != geom.mn() {
        return Err(Error::Dimension {
            expected: geom.mn(),
            found: obs.dim(),
        });
    }
    if k == 0 || k >= geom.mn() {
        return Err(Error::domain("estimator", format!("need 1 <= K < MN, got K = {k}")));
    }
    Ok(())
}

/// Stepwise concentration: per iteration the angles minimise the concentrated
/// marginal cost, `v(l)` follows by least squares, then the texture shape,
/// the texture scale and the speckle covariance are updated in that order.
/// Parameter and covariance updates are kept only when they do not lower the
/// marginal log-likelihood, so `ll_trace` never decreases.
pub fn immle_run(
    obs: &ObservationBlock,
    geom: &ArrayGeometry,
    k: usize,
    kind: TextureKind,
    config: &EstimatorConfig,
) -> Result<EstimateResult> {
    config.validate()?;
    check_run_inputs(obs, geom, k)?;
    let mn = geom.mn();
    let [_, _, b_lo, b_hi] = config.ab_bounds;
    let mut sigma = CMatrix::identity(mn, mn);
    let mut tex = TextureFamily::new(kind, config.initial_a, config.initial_b)?;
    let mut flags = Flags::default();
    let mut out = EstimateResult {
        theta_hat: Vec::new(),
        sigma_hat: Vec::new(),
        a_hat: Vec::new(),
        b_hat: Vec::new(),
        v_hat: CMatrix::zeros(k, obs.pulses()),
        ll_trace: Vec::new(),
        converged: false,
        iterations_used: 0,
        flags,
    };
    let mut previous: Option<Vec<f64>> = None;

    for iteration in 1..=config.max_outer_iters {
        let whitener = Whitener::cholesky(&sigma)?;
        let objective =
            ConcentratedObjective::with_whitener(geom, whitener.clone(), obs, k, PulseCost::Marginal(tex))?;
        let search = minimize_theta(&objective, config, previous.as_deref())?;
        flags.multimodal |= search.multimodal;
        let theta = search.theta;

        let v = estimate_v_all(geom, &theta, &whitener, obs)?;
        let res = residuals(geom, &theta, &v, obs);
        let rho = whitened_residual_powers(&whitener, &res);

        let upd = solve_texture_params(&rho, &tex, mn, config)?;
        flags.bracket_exhausted |= upd.bracket_exhausted;
        tex = tex.with_params(upd.shape, upd.scale)?;
        let mut ll = log_likelihood_from_powers(whitener.log_det_sigma(), &rho, &tex, mn);

        let s = update_sigma_with(&res, &sigma, |r| h_weight_unchecked(r, &tex, mn), config)?;
        flags.diagonal_loading |= s.loaded;
        if let Ok(w) = Whitener::cholesky(&s.sigma) {
            // the normalised covariance moves its scale into the texture
            let candidate_tex = tex.with_params(tex.shape, (tex.scale * s.scale).clamp(b_lo, b_hi))?;
            let rho_new = whitened_residual_powers(&w, &res);
            let candidate = log_likelihood_from_powers(w.log_det_sigma(), &rho_new, &candidate_tex, mn);
            if candidate >= ll {
                sigma = s.sigma;
                tex = candidate_tex;
                ll = candidate;
            }
        }

        let change = previous.as_deref().map(|p| max_angle_change(p, &theta));
        out.theta_hat.push(theta.clone());
        out.sigma_hat.push(sigma.clone());
        out.a_hat.push(tex.shape);
        out.b_hat.push(tex.scale);
        out.ll_trace.push(ll);
        out.v_hat = v;
        out.iterations_used = iteration;
        previous = Some(theta);
        if iteration >= 2 && change.is_some_and(|c| c < config.refine_tol_rad()) {
            out.converged = true;
            break;
        }
    }
    out.flags = flags;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clutter::{log_g, sample_clutter, ClutterModel};
    use crate::estimators::test_support::{geometry, scene};
    use crate::model::{noise_free, sigma2_for_scr, speckle_template, synthesize};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fast_config() -> EstimatorConfig {
        EstimatorConfig {
            coarse_grid_step: 2.0,
            max_outer_iters: 3,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn noiseless_scene_recovered_at_first_iteration() {
        let geom = geometry();
        let sc = scene();
        let obs = ObservationBlock::new(noise_free(&geom, &sc)).unwrap();
        let config = fast_config();
        for kind in [TextureKind::TDistributed, TextureKind::KDistributed] {
            let out = immle_run(&obs, &geom, 2, kind, &config).unwrap();
            let err = max_angle_change(out.theta_at(1), &sc.theta());
            assert!(err < config.refine_tol_rad(), "{kind:?}: {}", err.to_degrees());
        }
    }

    #[test]
    fn t_objective_is_negative_log_kernel_sum() {
        let geom = geometry();
        let sc = scene();
        let sigma = speckle_template(12, 1.0, 0.9, std::f64::consts::FRAC_PI_2);
        let tex = TextureFamily::new(TextureKind::TDistributed, 1.1, 2.0).unwrap();
        let model = ClutterModel::new(tex, sigma.clone()).unwrap();
        let n = sample_clutter(&model, sc.pulses(), &mut ChaCha8Rng::seed_from_u64(5));
        let obs = synthesize(&geom, &sc, &n).unwrap();
        let w = Whitener::cholesky(&sigma).unwrap();
        let mut offsets = Vec::new();
        for i in 0..10 {
            let theta: Vec<f64> = (0..4).map(|j| ((i * 4 + j) as f64 * 0.77).sin() * 1.3).collect();
            let obj = immle_theta_objective(&geom, &theta, &sigma, &tex, &obs).unwrap();
            let v = estimate_v_all(&geom, &theta, &w, &obs).unwrap();
            let rho = whitened_residual_powers(&w, &residuals(&geom, &theta, &v, &obs));
            let kernel: f64 = rho.iter().map(|&r| log_g(r, &tex, 12).unwrap()).sum();
            offsets.push(obj + kernel);
        }
        let spread = offsets.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x))
            - offsets.iter().fold(f64::INFINITY, |m, x| m.min(*x));
        assert!(spread < 1e-9, "{spread}");
    }

    #[test]
    fn t_objective_flattens_for_large_scale() {
        let geom = geometry();
        let sc = scene();
        let obs = ObservationBlock::new(noise_free(&geom, &sc)).unwrap();
        let sigma = CMatrix::identity(12, 12);
        let spread = |b: f64| {
            let tex = TextureFamily::new(TextureKind::TDistributed, 1.1, b).unwrap();
            let x = immle_theta_objective(&geom, &sc.theta(), &sigma, &tex, &obs).unwrap();
            let y = immle_theta_objective(&geom, &[0.1, -0.2, 0.5, 0.6], &sigma, &tex, &obs).unwrap();
            (x - y).abs()
        };
        assert!(spread(1e12) < 1e-6 * spread(1.0));
    }

    #[test]
    fn single_target_noiseless_grid_argmin_is_truth() {
        let geom = geometry();
        let sc = crate::model::Scene::new(
            vec![20f64.to_radians()],
            vec![-30f64.to_radians()],
            vec![num_complex::Complex64::new(1.0, 1.0)],
            vec![0.2],
            10,
            5,
        )
        .unwrap();
        let obs = ObservationBlock::new(noise_free(&geom, &sc)).unwrap();
        let tex = TextureFamily::new(TextureKind::TDistributed, 1.1, 2.0).unwrap();
        let sigma = CMatrix::identity(12, 12);
        let mut best = (f64::INFINITY, 0, 0);
        for dod in -89..=89 {
            for doa in -89..=89 {
                let th = [(dod as f64).to_radians(), (doa as f64).to_radians()];
                let v = immle_theta_objective(&geom, &th, &sigma, &tex, &obs).unwrap();
                if v < best.0 {
                    best = (v, dod, doa);
                }
            }
        }
        assert_eq!((best.1, best.2), (20, -30));
    }

    #[test]
    fn likelihood_trace_never_decreases_and_covariance_stays_normalised() {
        let geom = geometry();
        let sc = scene();
        let tex = TextureFamily::new(TextureKind::KDistributed, 2.0, 10.0).unwrap();
        let template = speckle_template(12, 1.0, 0.9, std::f64::consts::FRAC_PI_2);
        let sigma2 = sigma2_for_scr(&geom, &sc, &ClutterModel::new(tex, template).unwrap(), 15.0).unwrap();
        let model = ClutterModel::new(tex, speckle_template(12, sigma2, 0.9, std::f64::consts::FRAC_PI_2)).unwrap();
        let config = fast_config();
        for seed in 0..3 {
            let n = sample_clutter(&model, sc.pulses(), &mut ChaCha8Rng::seed_from_u64(seed));
            let obs = synthesize(&geom, &sc, &n).unwrap();
            let out = immle_run(&obs, &geom, 2, TextureKind::KDistributed, &config).unwrap();
            for w in out.ll_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-6, "{:?}", out.ll_trace);
            }
            for s in &out.sigma_hat {
                assert!((s.trace().re - 12.0).abs() < 1e-9);
            }
            assert!(out.iterations_used >= 2);
            assert_eq!(out.theta_hat.len(), out.iterations_used);
            assert!(max_angle_change(out.final_theta(), &sc.theta()) < 5f64.to_radians());
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let geom = geometry();
        let obs = ObservationBlock::new(CMatrix::zeros(12, 3)).unwrap();
        let config = EstimatorConfig::default();
        assert!(immle_run(&obs, &geom, 0, TextureKind::KDistributed, &config).is_err());
        assert!(immle_run(&obs, &geom, 12, TextureKind::KDistributed, &config).is_err());
        let bad = EstimatorConfig {
            refine_tol: 2.0,
            ..config
        };
        assert!(immle_run(&obs, &geom, 1, TextureKind::KDistributed, &bad).is_err());
    }
}
