//! Cramér–Rao bound on the DOD/DOA parameters under compound-Gaussian
//! clutter with known texture family.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::clutter::{ClutterModel, TextureFamily, TextureKind};
use crate::error::{Error, Result};
use crate::estimators::Whitener;
use crate::model::{kron, signal_matrix, steering_matrix_from_theta, steering_vector, ArrayGeometry, CMatrix, Scene};
use crate::specfun::{ln_gamma_unchecked, log_integrate_halfline, log_k_and_ratio, QuadratureSpec};

const CONDITION_CAP: f64 = 1e12;

/// Bound on the `2K` angles in radians², rows and columns in the interleaved
/// order `[dod_0, doa_0, dod_1, doa_1, ...]`.
#[derive(Debug, Clone)]
pub struct CrbResult {
    pub matrix: DMatrix<f64>,
    pub kappa: f64,
    pub per_angle_bound: Vec<f64>,
}

impl CrbResult {
    /// `10 log10(trace)` with the bound converted to degrees².
    pub fn aggregate_db(&self) -> f64 {
        let deg2 = (180.0 / std::f64::consts::PI).powi(2);
        10.0 * (self.matrix.trace() * deg2).log10()
    }
}

fn kappa_k_integral(texture: &TextureFamily, mn: usize, spec: &QuadratureSpec) -> Result<f64> {
    let (a, m) = (texture.shape, mn as f64);
    let nu_num = (a - m - 1.0).abs();
    let nu_den = (a - m).abs();
    let log_f = |x: f64| (m + a - 1.0) * x.ln() + 2.0 * log_k_and_ratio(nu_num, x).0 - log_k_and_ratio(nu_den, x).0;
    log_integrate_halfline(log_f, Some(m + a), spec)
}

/// Texture-dependent Fisher-information factor of the bound.
pub fn kappa(texture: &TextureFamily, mn: usize) -> Result<f64> {
    if mn == 0 {
        return Err(Error::domain("kappa", "mn must be >= 1"));
    }
    let (a, b, m) = (texture.shape, texture.scale, mn as f64);
    match texture.kind {
        TextureKind::TDistributed => Ok(m * a * (a + m) / (b * (a + m + 1.0))),
        TextureKind::KDistributed => {
            let log_i = kappa_k_integral(texture, mn, &QuadratureSpec::default())
                .map_err(|e| e.context("K-family kappa"))?;
            let log_norm = (m + a - 2.0) * std::f64::consts::LN_2 + b.ln() + ln_gamma_unchecked(m) + ln_gamma_unchecked(a);
            Ok((log_i - log_norm).exp())
        }
    }
}

fn steering_derivative(positions: &[f64], wavelength: f64, theta: f64) -> Result<nalgebra::DVector<Complex64>> {
    let a = steering_vector(positions, wavelength, theta)?;
    let scale = 2.0 * std::f64::consts::PI * theta.cos() / wavelength;
    Ok(nalgebra::DVector::from_iterator(
        a.len(),
        a.iter().zip(positions).map(|(x, d)| x * Complex64::new(0.0, scale * d)),
    ))
}

/// Derivatives of the virtual steering vectors with respect to each
/// target's DOD and DOA, as `MN x K` matrices `(D_T, D_R)`.
pub fn steering_derivatives(geom: &ArrayGeometry, scene: &Scene) -> (CMatrix, CMatrix) {
    let (mn, k) = (geom.mn(), scene.k());
    let mut d_t = CMatrix::zeros(mn, k);
    let mut d_r = CMatrix::zeros(mn, k);
    for (i, (&dod, &doa)) in scene.dod().iter().zip(scene.doa()).enumerate() {
        let lambda = geom.wavelength();
        let a_t = steering_vector(geom.tx_positions(), lambda, dod).expect("scene angles are validated");
        let a_r = steering_vector(geom.rx_positions(), lambda, doa).expect("scene angles are validated");
        let da_t = steering_derivative(geom.tx_positions(), lambda, dod).expect("scene angles are validated");
        let da_r = steering_derivative(geom.rx_positions(), lambda, doa).expect("scene angles are validated");
        d_t.set_column(i, &kron(&da_t, &a_r));
        d_r.set_column(i, &kron(&a_t, &da_r));
    }
    (d_t, d_r)
}

/// `D~^H P_perp D~` with `D~` interleaved per target.
fn projected_derivative_gram(geom: &ArrayGeometry, scene: &Scene, sigma: &CMatrix) -> Result<CMatrix> {
    let root = Whitener::hermitian(sigma)?;
    let (d_t, d_r) = steering_derivatives(geom, scene);
    let k = scene.k();
    let mut d = CMatrix::zeros(geom.mn(), 2 * k);
    for i in 0..k {
        d.set_column(2 * i, &d_t.column(i));
        d.set_column(2 * i + 1, &d_r.column(i));
    }
    let dw = root.whiten(&d);
    let aw = root.whiten(&steering_matrix_from_theta(geom, &scene.theta()));
    let gram = aw.adjoint() * &aw;
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    if !(eig.eigenvalues.min() > eig.eigenvalues.max() / CONDITION_CAP) {
        return Err(Error::SingularFim);
    }
    let chol = gram.cholesky().ok_or(Error::SingularFim)?;
    let proj_dw = &dw - &aw * chol.solve(&(aw.adjoint() * &dw));
    Ok(dw.adjoint() * proj_dw)
}

fn invert_fim(fim: DMatrix<f64>, kappa: f64) -> Result<CrbResult> {
    let fim = (&fim + fim.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(fim.clone());
    let (min, max) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    if !(min > 0.0 && min / max > 1e-14) {
        return Err(Error::SingularFim);
    }
    let inv = fim.cholesky().ok_or(Error::SingularFim)?.inverse();
    let matrix = (&inv + inv.transpose()) * 0.5;
    Ok(CrbResult {
        per_angle_bound: matrix.diagonal().iter().copied().collect(),
        matrix,
        kappa,
    })
}

/// Bound in the Hadamard-product form
/// `MN / (2 kappa L) (Re{(D~^H P_perp D~) .* P^T})^-1`, with
/// `P = (1/L) J_2 kron sum_l v(l) v(l)^H` and `D~` whitened by the Hermitian
/// root of the speckle covariance.
pub fn crb_theta(geom: &ArrayGeometry, scene: &Scene, clutter: &ClutterModel) -> Result<CrbResult> {
    check(geom, clutter)?;
    let mn = geom.mn();
    let kap = kappa(clutter.texture(), mn)?;
    let x = projected_derivative_gram(geom, scene, clutter.speckle_cov())?;
    let v = signal_matrix(scene);
    let l = scene.pulses() as f64;
    let s = &v * v.adjoint() / Complex64::from(l);
    let n = 2 * scene.k();
    let core = DMatrix::from_fn(n, n, |i, j| (x[(i, j)] * s[(j / 2, i / 2)]).re);
    invert_fim(core * (2.0 * kap * l / mn as f64), kap)
}

/// The same bound from the per-pulse sum
/// `(2 kappa / MN Re{sum_l H(l)^H D~^H P_perp D~ H(l)})^-1`.
pub fn crb_theta_pulse_sum(geom: &ArrayGeometry, scene: &Scene, clutter: &ClutterModel) -> Result<CrbResult> {
    check(geom, clutter)?;
    let mn = geom.mn();
    let kap = kappa(clutter.texture(), mn)?;
    let x = projected_derivative_gram(geom, scene, clutter.speckle_cov())?;
    let v = signal_matrix(scene);
    let n = 2 * scene.k();
    let mut fim = DMatrix::zeros(n, n);
    for col in v.column_iter() {
        let h = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |i, _| col[i / 2]));
        fim += (h.adjoint() * &x * h).map(|c| c.re);
    }
    invert_fim(fim * (2.0 * kap / mn as f64), kap)
}

fn check(geom: &ArrayGeometry, clutter: &ClutterModel) -> Result<()> {
    if clutter.dim() != geom.mn() {
        return Err(Error::Dimension {
            expected: geom.mn(),
            found: clutter.dim(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sigma2_for_scr, speckle_template, virtual_steering};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn geometry() -> ArrayGeometry {
        ArrayGeometry::half_wavelength_ula(3, 4, 1.0).unwrap()
    }

    fn scene(pulses: usize) -> Scene {
        Scene::new(
            vec![18f64.to_radians(), 45f64.to_radians()],
            vec![20f64.to_radians(), 40f64.to_radians()],
            vec![Complex64::new(2.0, 3.0), Complex64::new(1.0, -0.5)],
            vec![0.3, 0.8],
            pulses,
            5,
        )
        .unwrap()
    }

    fn k_texture() -> TextureFamily {
        TextureFamily::new(TextureKind::KDistributed, 2.0, 10.0).unwrap()
    }

    fn clutter_at(scr_db: f64, sc: &Scene) -> ClutterModel {
        let geom = geometry();
        let template = ClutterModel::new(k_texture(), speckle_template(12, 1.0, 0.9, FRAC_PI_2)).unwrap();
        let s2 = sigma2_for_scr(&geom, sc, &template, scr_db).unwrap();
        ClutterModel::new(k_texture(), speckle_template(12, s2, 0.9, FRAC_PI_2)).unwrap()
    }

    #[test]
    fn kappa_t_family_closed_form() {
        let t = TextureFamily::new(TextureKind::TDistributed, 1.1, 2.0).unwrap();
        assert_relative_eq!(kappa(&t, 12).unwrap(), 12.0 * 1.1 * 13.1 / (2.0 * 14.1), max_relative = 1e-14);
        assert!((kappa(&t, 12).unwrap() - 6.13191).abs() < 1e-5);
    }

    #[test]
    fn kappa_halves_when_scale_doubles() {
        for kind in [TextureKind::KDistributed, TextureKind::TDistributed] {
            let t = TextureFamily::new(kind, 2.0, 10.0).unwrap();
            let t2 = t.with_params(2.0, 20.0).unwrap();
            assert_relative_eq!(kappa(&t, 12).unwrap(), 2.0 * kappa(&t2, 12).unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn kappa_k_family_matches_refined_quadrature() {
        let k = kappa(&k_texture(), 12).unwrap();
        assert!(k.is_finite() && k > 0.0);
        let fine = QuadratureSpec::new(1e-13, 0.0, 2000).unwrap();
        let log_i = kappa_k_integral(&k_texture(), 12, &fine).unwrap();
        let log_norm = 12.0 * std::f64::consts::LN_2 + 10f64.ln() + ln_gamma_unchecked(12.0);
        assert_relative_eq!(k, (log_i - log_norm).exp(), max_relative = 1e-4);
        // independent evaluation in double precision with scipy's kv
        assert!((k - 1.1078262237).abs() < 1e-8, "{k}");
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let geom = geometry();
        let sc = Scene::new(vec![0.3, -0.7], vec![1.1, 0.2], vec![Complex64::new(1.0, 0.0); 2], vec![0.1, 0.2], 4, 1)
            .unwrap();
        let (d_t, d_r) = steering_derivatives(&geom, &sc);
        let h = 1e-6;
        for k in 0..2 {
            let (dod, doa) = (sc.dod()[k], sc.doa()[k]);
            let fd_t = (virtual_steering(&geom, dod + h, doa) - virtual_steering(&geom, dod - h, doa)) / Complex64::from(2.0 * h);
            let fd_r = (virtual_steering(&geom, dod, doa + h) - virtual_steering(&geom, dod, doa - h)) / Complex64::from(2.0 * h);
            assert!((d_t.column(k) - fd_t).norm() < 1e-6);
            assert!((d_r.column(k) - fd_r).norm() < 1e-6);
        }
    }

    #[test]
    fn derivative_magnitudes_at_broadside_and_endfire() {
        let geom = geometry();
        let sc = Scene::new(vec![0.0], vec![0.0], vec![Complex64::new(1.0, 0.0)], vec![0.0], 1, 1).unwrap();
        let (d_t, d_r) = steering_derivatives(&geom, &sc);
        for m in 0..3 {
            for n in 0..4 {
                let expected_t = 2.0 * std::f64::consts::PI * geom.tx_positions()[m] / geom.wavelength();
                let expected_r = 2.0 * std::f64::consts::PI * geom.rx_positions()[n] / geom.wavelength();
                assert!((d_t[(m * 4 + n, 0)].norm() - expected_t).abs() < 1e-12);
                assert!((d_r[(m * 4 + n, 0)].norm() - expected_r).abs() < 1e-12);
            }
        }
        let edge = FRAC_PI_2 - 1e-9;
        let sc = Scene::new(vec![edge], vec![-edge], vec![Complex64::new(1.0, 0.0)], vec![0.0], 1, 1).unwrap();
        let (d_t, d_r) = steering_derivatives(&geom, &sc);
        assert!(d_t.norm() < 1e-7 && d_r.norm() < 1e-7);
    }

    #[test]
    fn hadamard_and_pulse_sum_forms_agree() {
        let geom = geometry();
        let sc = scene(15);
        let model = clutter_at(15.0, &sc);
        let a = crb_theta(&geom, &sc, &model).unwrap();
        let b = crb_theta_pulse_sum(&geom, &sc, &model).unwrap();
        assert!((&a.matrix - &b.matrix).norm() < 1e-9 * a.matrix.norm());
        assert!((&a.matrix - a.matrix.transpose()).norm() < 1e-10 * a.matrix.norm());
        assert!(a.matrix.clone().cholesky().is_some());
    }

    #[test]
    fn scales_with_covariance_and_pulses() {
        let geom = geometry();
        let sc = scene(15);
        let model = clutter_at(15.0, &sc);
        let base = crb_theta(&geom, &sc, &model).unwrap();
        let scaled = ClutterModel::new(k_texture(), model.speckle_cov() * Complex64::from(3.0)).unwrap();
        let c = crb_theta(&geom, &sc, &scaled).unwrap();
        assert!((&c.matrix - &base.matrix * 3.0).norm() < 1e-9 * c.matrix.norm());
        // Doppler 0 and 0.5 make v(l) 2-periodic, so 20 pulses repeat the 10-pulse block
        let still = Scene::new(sc.dod().to_vec(), sc.doa().to_vec(), sc.rcs().to_vec(), vec![0.0, 0.5], 10, 5).unwrap();
        let doubled = still.with_pulses(20).unwrap();
        let a = crb_theta(&geom, &still, &model).unwrap();
        let b = crb_theta(&geom, &doubled, &model).unwrap();
        assert!((&a.matrix - &b.matrix * 2.0).norm() < 1e-9 * a.matrix.norm());
    }

    #[test]
    fn reference_operating_points() {
        let geom = geometry();
        let sc = scene(15);
        let at = |scr: f64, sc: &Scene| crb_theta(&geom, sc, &clutter_at(scr, sc)).unwrap().aggregate_db();
        assert!((at(-5.0, &sc) - 17.2509).abs() < 1e-3, "{}", at(-5.0, &sc));
        for scr in [0.0, 5.0, 10.0, 20.0, 30.0] {
            assert!((at(scr, &sc) - (17.2509 - scr - 5.0)).abs() < 1e-3);
        }
        let short = sc.with_pulses(13).unwrap();
        let diff = at(15.0, &short) - at(15.0, &sc);
        assert!((diff - 0.622).abs() < 0.05, "{diff}");
    }

    #[test]
    fn coincident_targets_are_singular() {
        let geom = geometry();
        let sc = Scene::new(vec![0.2, 0.2], vec![0.4, 0.4], vec![Complex64::new(1.0, 0.0); 2], vec![0.1, 0.3], 15, 5)
            .unwrap();
        let model = ClutterModel::new(k_texture(), CMatrix::identity(12, 12)).unwrap();
        assert!(matches!(crb_theta(&geom, &sc, &model), Err(Error::SingularFim)));
    }
}
