//! Compound-Gaussian clutter: texture and speckle sampling, the marginal
//! density kernel `g_MN`, its weight `h_MN` and the texture-parameter scores.
//!
//! For a whitened residual power `rho_sq = |rho|^2` the kernel is
//! `g(rho_sq) = ∫ tau^-MN exp(-rho_sq / tau) p(tau; a, b) dtau`, with `p` a
//! gamma density (K-distributed clutter) or an inverse-gamma density
//! (t-distributed clutter).

use nalgebra::Cholesky;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CMatrix;
use crate::specfun::{
    digamma_unchecked, expectation_halfline, ln_gamma_unchecked, log_k_and_ratio, QuadratureSpec,
};

/// Floor applied to `|rho|` before K-family Bessel evaluations.
pub const RHO_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TextureKind {
    /// Gamma texture.
    #[serde(rename = "k")]
    KDistributed,
    /// Inverse-gamma texture.
    #[serde(rename = "t")]
    TDistributed,
}

/// Texture distribution with shape `a` and scale `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureFamily {
    pub kind: TextureKind,
    pub shape: f64,
    pub scale: f64,
}

impl TextureFamily {
    pub fn new(kind: TextureKind, shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::domain(
                "TextureFamily",
                format!("shape and scale must be finite and > 0, got a={shape}, b={scale}"),
            ));
        }
        Ok(Self { kind, shape, scale })
    }

    pub fn with_params(&self, shape: f64, scale: f64) -> Result<Self> {
        Self::new(self.kind, shape, scale)
    }

    /// `E{tau}`: `ab` for the gamma texture, `b/(a-1)` for the inverse gamma.
    pub fn mean(&self) -> Result<f64> {
        texture_mean(self)
    }
}

/// Texture law plus speckle covariance.
#[derive(Debug, Clone)]
pub struct ClutterModel {
    texture: TextureFamily,
    speckle_cov: CMatrix,
    factor: CMatrix,
}

impl ClutterModel {
    pub fn new(texture: TextureFamily, speckle_cov: CMatrix) -> Result<Self> {
        let n = speckle_cov.nrows();
        if n == 0 || speckle_cov.ncols() != n {
            return Err(Error::Dimension {
                expected: n,
                found: speckle_cov.ncols(),
            });
        }
        let asym = (&speckle_cov - speckle_cov.adjoint()).norm();
        if !(asym <= 1e-12 * speckle_cov.norm().max(1.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let factor = Cholesky::new(speckle_cov.clone())
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        // complex Cholesky happily takes sqrt of a negative pivot
        if factor.diagonal().iter().any(|d| !(d.re > 0.0) || d.im.abs() > 1e-12 * d.re) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self {
            texture,
            speckle_cov,
            factor,
        })
    }

    pub fn texture(&self) -> &TextureFamily {
        &self.texture
    }

    pub fn speckle_cov(&self) -> &CMatrix {
        &self.speckle_cov
    }

    /// Lower-triangular `F` with `F F^H = Sigma`.
    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.speckle_cov.nrows()
    }
}

/// `count` i.i.d. texture draws.
pub fn sample_texture<R: Rng + ?Sized>(texture: &TextureFamily, count: usize, rng: &mut R) -> Vec<f64> {
    match texture.kind {
        TextureKind::KDistributed => {
            let dist = Gamma::new(texture.shape, texture.scale).expect("validated parameters");
            (0..count).map(|_| dist.sample(rng)).collect()
        }
        TextureKind::TDistributed => {
            let dist = Gamma::new(texture.shape, 1.0 / texture.scale).expect("validated parameters");
            (0..count).map(|_| 1.0 / dist.sample(rng)).collect()
        }
    }
}

/// Circular complex Gaussian speckle `F w(l)` as an `MN x count` matrix.
pub fn sample_speckle<R: Rng + ?Sized>(model: &ClutterModel, count: usize, rng: &mut R) -> CMatrix {
    let n = model.dim();
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let w = CMatrix::from_fn(n, count, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * scale, im * scale)
    });
    &model.factor * w
}

/// Scales column `l` of `speckle` by `sqrt(tau_l)`.
pub fn compound(textures: &[f64], mut speckle: CMatrix) -> Result<CMatrix> {
    if textures.len() != speckle.ncols() {
        return Err(Error::Dimension {
            expected: speckle.ncols(),
            found: textures.len(),
        });
    }
    for (mut col, tau) in speckle.column_iter_mut().zip(textures) {
        col *= Complex64::from(tau.sqrt());
    }
    Ok(speckle)
}

/// `n(l) = sqrt(tau_l) F w(l)`; textures are drawn first, then speckle.
pub fn sample_clutter<R: Rng + ?Sized>(model: &ClutterModel, count: usize, rng: &mut R) -> CMatrix {
    let tau = sample_texture(&model.texture, count, rng);
    let speckle = sample_speckle(model, count, rng);
    compound(&tau, speckle).expect("matching lengths")
}

pub fn texture_mean(texture: &TextureFamily) -> Result<f64> {
    match texture.kind {
        TextureKind::KDistributed => Ok(texture.shape * texture.scale),
        TextureKind::TDistributed if texture.shape > 1.0 => Ok(texture.scale / (texture.shape - 1.0)),
        TextureKind::TDistributed => Err(Error::domain(
            "texture_mean",
            format!("inverse-gamma mean needs a > 1, got {}", texture.shape),
        )),
    }
}

fn check_kernel_args(op: &'static str, rho_sq: f64, mn: usize) -> Result<()> {
    if !(rho_sq.is_finite() && rho_sq >= 0.0) {
        return Err(Error::domain(op, format!("rho_sq must be finite and >= 0, got {rho_sq}")));
    }
    if mn == 0 {
        return Err(Error::domain(op, "mn must be >= 1"));
    }
    Ok(())
}

/// `(|rho|^2 floored, nu = a - MN, u = 2|rho|/sqrt(b))` for the K family.
fn k_arguments(rho_sq: f64, texture: &TextureFamily, mn: usize) -> (f64, f64, f64) {
    let rho_sq = rho_sq.max(RHO_FLOOR * RHO_FLOOR);
    let nu = texture.shape - mn as f64;
    let u = 2.0 * (rho_sq / texture.scale).sqrt();
    (rho_sq, nu, u)
}

/// `ln g_MN(rho_sq; a, b)`.
pub fn log_g(rho_sq: f64, texture: &TextureFamily, mn: usize) -> Result<f64> {
    check_kernel_args("log_g", rho_sq, mn)?;
    Ok(log_g_unchecked(rho_sq, texture, mn))
}

pub(crate) fn log_g_unchecked(rho_sq: f64, texture: &TextureFamily, mn: usize) -> f64 {
    let (a, b, m) = (texture.shape, texture.scale, mn as f64);
    match texture.kind {
        TextureKind::TDistributed => {
            a * b.ln() + ln_gamma_unchecked(m + a) - ln_gamma_unchecked(a) - (m + a) * (rho_sq + b).ln()
        }
        TextureKind::KDistributed => {
            let (rho_sq, nu, u) = k_arguments(rho_sq, texture, mn);
            std::f64::consts::LN_2 + 0.5 * nu * rho_sq.ln() + log_k_and_ratio(nu.abs(), u).0
                - 0.5 * (m + a) * b.ln()
                - ln_gamma_unchecked(a)
        }
    }
}

/// `h_MN = -d ln g / d rho_sq`, the per-pulse weight of the covariance update.
pub fn h_weight(rho_sq: f64, texture: &TextureFamily, mn: usize) -> Result<f64> {
    check_kernel_args("h_weight", rho_sq, mn)?;
    Ok(h_weight_unchecked(rho_sq, texture, mn))
}

pub(crate) fn h_weight_unchecked(rho_sq: f64, texture: &TextureFamily, mn: usize) -> f64 {
    let (a, b, m) = (texture.shape, texture.scale, mn as f64);
    match texture.kind {
        TextureKind::TDistributed => (m + a) / (rho_sq + b),
        TextureKind::KDistributed => {
            let (rho_sq, nu, u) = k_arguments(rho_sq, texture, mn);
            // K_{nu-1}(u) / K_nu(u)
            let ratio = if nu <= 0.0 {
                log_k_and_ratio(-nu, u).1
            } else if nu >= 1.0 {
                1.0 / log_k_and_ratio(nu - 1.0, u).1
            } else {
                (log_k_and_ratio(1.0 - nu, u).0 - log_k_and_ratio(nu, u).0).exp()
            };
            ratio / (b * rho_sq).sqrt()
        }
    }
}

/// Peak of the K-family texture posterior
/// `tau^(a-MN) exp(-rho_sq/tau - tau/b)` in `ln tau`.
fn k_posterior_mode(rho_sq: f64, nu: f64, b: f64) -> f64 {
    let disc = (nu * nu + 4.0 * rho_sq / b).sqrt();
    if nu >= 0.0 {
        0.5 * b * (nu + disc)
    } else {
        2.0 * rho_sq / (disc - nu)
    }
}

/// Posterior expectation `E[w(tau / mode)]` of the K-family texture given `rho_sq`.
fn k_posterior_expectation<W: Fn(f64) -> f64>(
    rho_sq: f64,
    texture: &TextureFamily,
    mn: usize,
    weight: W,
) -> Result<(f64, f64)> {
    let (rho_sq, nu, _) = k_arguments(rho_sq, texture, mn);
    let b = texture.scale;
    let y = k_posterior_mode(rho_sq, nu, b);
    // substitute tau = y t so the posterior peaks at t = 1
    let log_f = |t: f64| (nu - 1.0) * t.ln() - rho_sq / (y * t) - y * t / b;
    let e = expectation_halfline(log_f, weight, Some(1.0), &QuadratureSpec::default())?;
    Ok((e, y))
}

/// `d ln g_MN / da`, the per-pulse score of the texture shape.
pub fn score_a(rho_sq: f64, texture: &TextureFamily, mn: usize) -> Result<f64> {
    check_kernel_args("score_a", rho_sq, mn)?;
    let (a, b, m) = (texture.shape, texture.scale, mn as f64);
    match texture.kind {
        TextureKind::TDistributed => {
            Ok(b.ln() - (rho_sq + b).ln() + digamma_unchecked(m + a) - digamma_unchecked(a))
        }
        TextureKind::KDistributed => {
            let (e, y) = k_posterior_expectation(rho_sq, texture, mn, f64::ln)
                .map_err(|e| e.context("K-family shape score"))?;
            Ok(e + y.ln() - b.ln() - digamma_unchecked(a))
        }
    }
}

/// `d ln g_MN / db`, the per-pulse score of the texture scale.
pub fn score_b(rho_sq: f64, texture: &TextureFamily, mn: usize) -> Result<f64> {
    check_kernel_args("score_b", rho_sq, mn)?;
    let (a, b, m) = (texture.shape, texture.scale, mn as f64);
    match texture.kind {
        TextureKind::TDistributed => Ok((a * rho_sq - m * b) / (b * (rho_sq + b))),
        TextureKind::KDistributed => {
            let (e, y) = k_posterior_expectation(rho_sq, texture, mn, |t| t)
                .map_err(|e| e.context("K-family scale score"))?;
            Ok((e * y - a * b) / (b * b))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{log_bessel_k, log_integrate_halfline};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn k_paper() -> TextureFamily {
        TextureFamily::new(TextureKind::KDistributed, 2.0, 10.0).unwrap()
    }

    fn t_paper() -> TextureFamily {
        TextureFamily::new(TextureKind::TDistributed, 1.1, 2.0).unwrap()
    }

    /// ln of the texture integral computed by quadrature from the densities.
    fn log_g_quadrature(rho_sq: f64, tex: &TextureFamily, mn: usize) -> f64 {
        let (a, b, m) = (tex.shape, tex.scale, mn as f64);
        let log_prior = |tau: f64| match tex.kind {
            TextureKind::KDistributed => (a - 1.0) * tau.ln() - tau / b - ln_gamma_unchecked(a) - a * b.ln(),
            TextureKind::TDistributed => a * b.ln() - (a + 1.0) * tau.ln() - b / tau - ln_gamma_unchecked(a),
        };
        let log_f = |tau: f64| -rho_sq / tau - m * tau.ln() + log_prior(tau);
        log_integrate_halfline(log_f, None, &QuadratureSpec::new(1e-11, 0.0, 400).unwrap()).unwrap()
    }

    #[test]
    fn texture_mean_examples() {
        assert_eq!(texture_mean(&k_paper()).unwrap(), 20.0);
        assert_relative_eq!(texture_mean(&t_paper()).unwrap(), 20.0, max_relative = 1e-12);
        let t1 = TextureFamily::new(TextureKind::TDistributed, 1.0, 2.0).unwrap();
        assert!(texture_mean(&t1).is_err());
        assert!(TextureFamily::new(TextureKind::KDistributed, 0.0, 1.0).is_err());
    }

    #[test]
    fn texture_sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = sample_texture(&k_paper(), 100_000, &mut rng);
        let mean = k.iter().sum::<f64>() / k.len() as f64;
        // var = a b^2 = 200
        let se = (200.0f64 / 1e5).sqrt();
        assert!((mean - 20.0).abs() < 3.0 * se, "{mean}");
        let first = sample_texture(&k_paper(), 10, &mut ChaCha8Rng::seed_from_u64(5));
        let second = sample_texture(&k_paper(), 10, &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(first, second);
    }

    #[test]
    fn t_texture_median_matches_inverse_gamma() {
        // the a = 1.1 inverse gamma has infinite variance, so also check a quantile
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = sample_texture(&t_paper(), 100_000, &mut rng);
        t.sort_by(f64::total_cmp);
        let median = t[50_000];
        // median of Gamma(1.1, 1); tau = b / gamma
        let gamma_median = 0.790_275_279_542_816_8;
        assert_relative_eq!(median, 2.0 / gamma_median, max_relative = 0.02);
    }

    #[test]
    fn unit_speckle_is_standard_complex_gaussian() {
        let model = ClutterModel::new(k_paper(), CMatrix::identity(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = sample_speckle(&model, 50_000, &mut rng);
        let power = w.norm_squared() / (3.0 * 50_000.0);
        assert!((power - 1.0).abs() < 0.02);
        let cross = w.row(0).dot(&w.row(1).conjugate()) / 50_000.0;
        assert!(cross.norm() < 0.02);
    }

    #[test]
    fn empirical_covariance_matches_template() {
        let sigma = crate::model::speckle_template(6, 2.0, 0.9, std::f64::consts::FRAC_PI_2);
        let model = ClutterModel::new(k_paper(), sigma.clone()).unwrap();
        let count = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = sample_speckle(&model, count, &mut rng);
        let scm = &w * w.adjoint() / Complex64::from(count as f64);
        assert!((scm - &sigma).norm() / sigma.norm() < 0.02);

        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = sample_clutter(&model, count, &mut rng);
        let cov = &n * n.adjoint() / Complex64::from(count as f64);
        let expected = &sigma * Complex64::from(20.0);
        assert!((cov - &expected).norm() / expected.norm() < 0.03);
    }

    #[test]
    fn k_clutter_is_heavier_tailed_than_gaussian() {
        let small_a = TextureFamily::new(TextureKind::KDistributed, 0.5, 2.0).unwrap();
        let model = ClutterModel::new(small_a, CMatrix::identity(1, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = sample_clutter(&model, 200_000, &mut rng);
        // same mean power Gaussian: |n|^2 ~ Exp(1); 99.9% quantile at ln(1000)
        let threshold = 1000f64.ln();
        let exceed = n.iter().filter(|z| z.norm_sqr() > threshold).count() as f64 / 200_000.0;
        assert!(exceed > 0.001, "{exceed}");
    }

    #[test]
    fn clutter_model_rejects_bad_covariance() {
        let mut c = CMatrix::identity(2, 2);
        c[(0, 1)] = Complex64::new(0.5, 0.0);
        assert!(ClutterModel::new(k_paper(), c).is_err());
        let indefinite = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
        ]));
        assert!(ClutterModel::new(k_paper(), indefinite).is_err());
    }

    #[test]
    fn log_g_examples() {
        let t = TextureFamily::new(TextureKind::TDistributed, 1.0, 1.0).unwrap();
        assert_relative_eq!(log_g(0.0, &t, 2).unwrap(), 2f64.ln(), max_relative = 1e-14);
        // a = MN + 1/2: K_{1/2}(u) = sqrt(pi/(2u)) e^-u
        let mn = 12;
        let k = TextureFamily::new(TextureKind::KDistributed, 12.5, 3.0).unwrap();
        for &r in &[0.1, 1.0, 10.0] {
            let u = 2.0 * (r / 3.0f64).sqrt();
            let closed = std::f64::consts::LN_2 + 0.25 * f64::ln(r) + 0.5 * (std::f64::consts::PI / (2.0 * u)).ln()
                - u
                - 0.5 * 24.5 * 3f64.ln()
                - ln_gamma_unchecked(12.5);
            assert_relative_eq!(log_g(r, &k, mn).unwrap(), closed, max_relative = 1e-12);
            assert!((log_g(r, &k, mn).unwrap() - log_g_quadrature(r, &k, mn)).abs() < 1e-6);
        }
        assert!(log_g(-1.0, &t, 2).is_err());
        assert!(log_g(1.0, &t, 0).is_err());
    }

    #[test]
    fn log_g_matches_texture_integral_on_grid() {
        for tex in [k_paper(), t_paper()] {
            for &mn in &[2usize, 12] {
                for &r in &[0.1, 1.0, 10.0, 100.0] {
                    let lhs = log_g(r, &tex, mn).unwrap();
                    let rhs = log_g_quadrature(r, &tex, mn);
                    assert!((lhs - rhs).abs() < 1e-6, "{tex:?} mn={mn} r={r}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn log_g_is_finite_at_extremes() {
        for tex in [k_paper(), t_paper()] {
            for &r in &[0.0, 1e-30, 1e-8, 1e8] {
                assert!(log_g(r, &tex, 12).unwrap().is_finite());
                assert!(h_weight(r, &tex, 12).unwrap().is_finite());
            }
        }
        // at the floor the K value equals the clamped evaluation
        assert_eq!(log_g(0.0, &k_paper(), 12).unwrap(), log_g(1e-16, &k_paper(), 12).unwrap());
    }

    #[test]
    fn h_weight_examples() {
        let t = TextureFamily::new(TextureKind::TDistributed, 1.0, 1.0).unwrap();
        assert_relative_eq!(h_weight(1.0, &t, 2).unwrap(), 1.5, max_relative = 1e-15);
        // a = MN + 1/2 gives K_{-1/2} / K_{1/2} = 1
        let k = TextureFamily::new(TextureKind::KDistributed, 12.5, 3.0).unwrap();
        for &r in &[0.01, 2.0, 50.0] {
            assert_relative_eq!(h_weight(r, &k, 12).unwrap(), 1.0 / (3f64.sqrt() * r.sqrt()), max_relative = 1e-12);
        }
    }

    fn fd<F: Fn(f64) -> f64>(f: F, x: f64) -> f64 {
        let h = 1e-5 * x.abs().max(1e-3);
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    fn rel_err(value: f64, reference: f64) -> f64 {
        (value - reference).abs() / reference.abs().max(1e-3)
    }

    #[test]
    fn kernels_match_finite_differences_on_grid() {
        for tex in [k_paper(), t_paper()] {
            let tol = match tex.kind {
                TextureKind::KDistributed => 1e-4,
                TextureKind::TDistributed => 1e-5,
            };
            for &mn in &[2usize, 12] {
                for &r in &[0.1, 1.0, 10.0, 100.0] {
                    let h = h_weight(r, &tex, mn).unwrap();
                    let fd_h = -fd(|x| log_g(x, &tex, mn).unwrap(), r);
                    assert!(rel_err(h, fd_h) < tol, "h {tex:?} {mn} {r}: {h} {fd_h}");

                    let sa = score_a(r, &tex, mn).unwrap();
                    let fd_a = fd(|a| log_g(r, &tex.with_params(a, tex.scale).unwrap(), mn).unwrap(), tex.shape);
                    assert!(rel_err(sa, fd_a) < tol, "a {tex:?} {mn} {r}: {sa} {fd_a}");

                    let sb = score_b(r, &tex, mn).unwrap();
                    let fd_b = fd(|b| log_g(r, &tex.with_params(tex.shape, b).unwrap(), mn).unwrap(), tex.scale);
                    assert!(rel_err(sb, fd_b) < tol, "b {tex:?} {mn} {r}: {sb} {fd_b}");
                }
            }
        }
    }

    #[test]
    fn k_scale_score_matches_bessel_closed_form() {
        // posterior mean E[tau] = |rho| sqrt(b) K_{nu+1}(u) / K_nu(u)
        let tex = k_paper();
        for &r in &[0.1f64, 3.0, 400.0] {
            let nu = 2.0 - 12.0;
            let u = 2.0 * (r / 10.0).sqrt();
            let mean = (r * 10.0).sqrt()
                * (log_bessel_k(nu + 1.0, u).unwrap() - log_bessel_k(nu, u).unwrap()).exp();
            let closed = (mean - 20.0) / 100.0;
            assert_relative_eq!(score_b(r, &tex, 12).unwrap(), closed, max_relative = 1e-7);
        }
    }

    #[test]
    fn shape_score_has_zero_mean_at_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for tex in [k_paper(), t_paper()] {
            let mn = 4;
            let model = ClutterModel::new(tex, CMatrix::identity(mn, mn)).unwrap();
            let n = sample_clutter(&model, 10_000, &mut rng);
            let scores: Vec<f64> = n
                .column_iter()
                .map(|c| score_a(c.norm_squared(), &tex, mn).unwrap())
                .collect();
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (scores.len() - 1) as f64;
            let se = (var / scores.len() as f64).sqrt();
            assert!(mean.abs() < 3.0 * se, "{tex:?}: mean {mean} se {se}");
        }
    }

    proptest! {
        #[test]
        fn t_weight_positive_and_decreasing(r in 0.0f64..1e4, dr in 1e-3f64..10.0) {
            let t = t_paper();
            let h0 = h_weight(r, &t, 12).unwrap();
            let h1 = h_weight(r + dr, &t, 12).unwrap();
            prop_assert!(h0 > 0.0 && h1 < h0);
        }

        #[test]
        fn k_weight_positive(r in 0.0f64..1e6, a in 0.1f64..30.0, b in 0.01f64..100.0) {
            let k = TextureFamily::new(TextureKind::KDistributed, a, b).unwrap();
            let h = h_weight(r, &k, 12).unwrap();
            prop_assert!(h > 0.0 && h.is_finite());
        }

        #[test]
        fn clutter_sampler_is_deterministic(seed in any::<u64>()) {
            let model = ClutterModel::new(k_paper(), crate::model::speckle_template(4, 1.0, 0.9, 1.0)).unwrap();
            let x = sample_clutter(&model, 5, &mut ChaCha8Rng::seed_from_u64(seed));
            let y = sample_clutter(&model, 5, &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(x, y);
        }
    }
}
