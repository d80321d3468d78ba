use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{Error, Result};
use crate::model::{steering_matrix_from_theta, ArrayGeometry, CMatrix, CVector, ObservationBlock};

/// Condition-number cap for `A^H Sigma^-1 A`.
pub(crate) const CONDITION_CAP: f64 = 1e12;

/// A whitening matrix `W` with `W^H W = Sigma^-1`.
#[derive(Debug, Clone)]
pub struct Whitener {
    w: CMatrix,
    log_det_sigma: f64,
}

impl Whitener {
    /// `W = L^-1` for the Cholesky factor `Sigma = L L^H`.
    pub fn cholesky(sigma: &CMatrix) -> Result<Self> {
        let n = sigma.nrows();
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        if l.diagonal().iter().any(|d| !(d.re > 0.0) || d.im.abs() > 1e-12 * d.re) {
            return Err(Error::NotPositiveDefinite);
        }
        let log_det_sigma = 2.0 * l.diagonal().iter().map(|d| d.re.ln()).sum::<f64>();
        let w = l
            .solve_lower_triangular(&CMatrix::identity(n, n))
            .ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { w, log_det_sigma })
    }

    /// `W = Sigma^-1/2`, the Hermitian inverse square root.
    pub fn hermitian(sigma: &CMatrix) -> Result<Self> {
        let eig = SymmetricEigen::new(sigma.clone());
        if eig.eigenvalues.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::NotPositiveDefinite);
        }
        let log_det_sigma = eig.eigenvalues.iter().map(|e| e.ln()).sum();
        let scaled = CMatrix::from_fn(sigma.nrows(), sigma.ncols(), |r, c| {
            eig.eigenvectors[(r, c)] / eig.eigenvalues[c].sqrt()
        });
        Ok(Self {
            w: scaled * eig.eigenvectors.adjoint(),
            log_det_sigma,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.w
    }

    /// `ln |Sigma|`.
    pub fn log_det_sigma(&self) -> f64 {
        self.log_det_sigma
    }

    pub fn whiten(&self, x: &CMatrix) -> CMatrix {
        &self.w * x
    }

    pub fn whiten_vector(&self, x: &CVector) -> CVector {
        &self.w * x
    }
}

/// Least-squares coefficients `(A^H A)^-1 A^H Z` for whitened `a` and `z`,
/// refusing ill-conditioned `a`.
pub(crate) fn whitened_least_squares(a: &CMatrix, z: &CMatrix) -> Result<CMatrix> {
    let gram = a.adjoint() * a;
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > CONDITION_CAP {
        return Err(Error::RankDeficient {
            condition: if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    let rhs = a.adjoint() * z;
    let chol = Cholesky::new(gram).ok_or(Error::RankDeficient { condition: max / min })?;
    Ok(chol.solve(&rhs))
}

fn check_dims(geom: &ArrayGeometry, theta: &[f64], sigma: &CMatrix, rows: usize) -> Result<()> {
    if theta.is_empty() || !theta.len().is_multiple_of(2) {
        return Err(Error::domain("theta", format!("need 2K angles, got {}", theta.len())));
    }
    for found in [sigma.nrows(), sigma.ncols(), rows] {
        if found != geom.mn() {
            return Err(Error::Dimension {
                expected: geom.mn(),
                found,
            });
        }
    }
    Ok(())
}

/// `|P_perp(W A) W z|^2`, the whitened residual power after projecting out
/// the steering columns at `theta`.
pub fn whitened_residual_norm_sq(
    geom: &ArrayGeometry,
    theta: &[f64],
    sigma: &CMatrix,
    z: &CVector,
) -> Result<f64> {
    check_dims(geom, theta, sigma, z.len())?;
    let w = Whitener::cholesky(sigma)?;
    let a = w.whiten(&steering_matrix_from_theta(geom, theta));
    let zw = CMatrix::from_column_slice(z.len(), 1, w.whiten_vector(z).as_slice());
    let v = whitened_least_squares(&a, &zw)?;
    Ok((zw - a * v).norm_squared())
}

/// `v(l) = (A^H Sigma^-1 A)^-1 A^H Sigma^-1 z(l)`.
pub fn estimate_v(geom: &ArrayGeometry, theta: &[f64], sigma: &CMatrix, z: &CVector) -> Result<CVector> {
    check_dims(geom, theta, sigma, z.len())?;
    let w = Whitener::cholesky(sigma)?;
    let a = w.whiten(&steering_matrix_from_theta(geom, theta));
    let zw = CMatrix::from_column_slice(z.len(), 1, w.whiten_vector(z).as_slice());
    Ok(whitened_least_squares(&a, &zw)?.column(0).into_owned())
}

/// `v(l)` for every pulse, as a `K x L` matrix.
pub fn estimate_v_all(
    geom: &ArrayGeometry,
    theta: &[f64],
    whitener: &Whitener,
    obs: &ObservationBlock,
) -> Result<CMatrix> {
    let a = whitener.whiten(&steering_matrix_from_theta(geom, theta));
    whitened_least_squares(&a, &whitener.whiten(obs.snapshots()))
}

/// `z(l) - A(theta) v(l)` for every pulse.
pub fn residuals(geom: &ArrayGeometry, theta: &[f64], v: &CMatrix, obs: &ObservationBlock) -> CMatrix {
    obs.snapshots() - steering_matrix_from_theta(geom, theta) * v
}

/// `|rho(l)|^2 = r(l)^H Sigma^-1 r(l)` for each residual column.
pub fn whitened_residual_powers(whitener: &Whitener, residuals: &CMatrix) -> Vec<f64> {
    whitener.whiten(residuals).column_iter().map(|c| c.norm_squared()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use crate::estimators::test_support::{geometry, scene, spd};
    use crate::model::{signal_matrix, steering_matrix};
    use proptest::prelude::*;

    fn random_z(seed: u64) -> CVector {
        CVector::from_fn(12, |i, _| {
            Complex64::new(((i as u64 * 31 + seed) as f64).sin(), ((i as u64 * 17 + seed * 3) as f64).cos())
        })
    }

    #[test]
    fn span_is_annihilated() {
        let g = geometry();
        let s = scene();
        let z = steering_matrix(&g, &s) * signal_matrix(&s).column(3);
        let r = whitened_residual_norm_sq(&g, &s.theta(), &CMatrix::identity(12, 12), &z).unwrap();
        assert!(r < 1e-10 * z.norm_squared());
    }

    #[test]
    fn square_steering_leaves_nothing() {
        // MN = 4 virtual sensors and K = 4 targets
        let g = ArrayGeometry::half_wavelength_ula(2, 2, 1.0).unwrap();
        let theta = [0.1, -0.4, 0.5, 0.2, -0.7, 0.9, 0.3, -0.1];
        let z = CVector::from_fn(4, |i, _| Complex64::new(i as f64 + 1.0, 0.5 - i as f64));
        let r = whitened_residual_norm_sq(&g, &theta, &spd(4, 2), &z).unwrap();
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn coincident_targets_are_rank_deficient() {
        let g = geometry();
        let theta = [0.3, 0.2, 0.3, 0.2];
        let z = random_z(1);
        let err = whitened_residual_norm_sq(&g, &theta, &CMatrix::identity(12, 12), &z).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn estimate_v_examples() {
        let g = geometry();
        let s = scene();
        let v = signal_matrix(&s).column(2).into_owned();
        let z = steering_matrix(&g, &s) * &v;
        let v_hat = estimate_v(&g, &s.theta(), &CMatrix::identity(12, 12), &z).unwrap();
        assert!((v_hat - v).norm() < 1e-10);

        // z orthogonal to both columns
        let a = steering_matrix(&g, &s);
        let q = a.clone().qr().q();
        let mut z = random_z(4);
        z -= &q * (q.adjoint() * &z);
        let v_hat = estimate_v(&g, &s.theta(), &CMatrix::identity(12, 12), &z).unwrap();
        assert!(v_hat.norm() < 1e-12);
    }

    #[test]
    fn estimate_v_matches_explicit_normal_equations() {
        let g = geometry();
        let s = scene();
        let sigma = spd(12, 5);
        let z = random_z(9);
        let a = steering_matrix(&g, &s);
        let si = sigma.clone().try_inverse().unwrap();
        let gram = a.adjoint() * &si * &a;
        let brute = gram.try_inverse().unwrap() * a.adjoint() * &si * &z;
        let v = estimate_v(&g, &s.theta(), &sigma, &z).unwrap();
        assert!((&v - &brute).norm() < 1e-9 * brute.norm());
        // whitened residual orthogonal to whitened columns
        let w = Whitener::cholesky(&sigma).unwrap();
        let aw = w.whiten(&a);
        let rw = w.whiten_vector(&z) - &aw * &v;
        assert!((aw.adjoint() * rw).norm() < 1e-9 * w.whiten_vector(&z).norm());
        // explicit formula for the residual power
        let explicit = (z.adjoint() * &si * &z)[(0, 0)].re - (z.adjoint() * &si * &a * &brute)[(0, 0)].re;
        let r = whitened_residual_norm_sq(&g, &s.theta(), &sigma, &z).unwrap();
        assert!((r - explicit).abs() < 1e-9 * explicit.abs().max(1.0));
    }

    #[test]
    fn whiteners_agree_on_determinant_and_inverse() {
        let sigma = spd(12, 3);
        let c = Whitener::cholesky(&sigma).unwrap();
        let h = Whitener::hermitian(&sigma).unwrap();
        assert!((c.log_det_sigma() - h.log_det_sigma()).abs() < 1e-10);
        let inv = sigma.clone().try_inverse().unwrap();
        for w in [&c, &h] {
            let back = w.matrix().adjoint() * w.matrix();
            assert!((back - &inv).norm() < 1e-10 * inv.norm());
        }
        assert!(Whitener::cholesky(&(-sigma.clone())).is_err());
        assert!(Whitener::hermitian(&(-sigma)).is_err());
    }

    proptest! {
        #[test]
        fn residual_is_whitening_factor_invariant(seed in 0u64..1000, t0 in -1.4f64..1.4, t1 in -1.4f64..1.4) {
            let g = geometry();
            let sigma = spd(12, seed);
            let z = random_z(seed);
            let theta = [t0, t1];
            let c = Whitener::cholesky(&sigma).unwrap();
            let h = Whitener::hermitian(&sigma).unwrap();
            let a = steering_matrix_from_theta(&g, &theta);
            let zm = CMatrix::from_column_slice(12, 1, z.as_slice());
            let power = |w: &Whitener| {
                let aw = w.whiten(&a);
                let zw = w.whiten(&zm);
                let v = whitened_least_squares(&aw, &zw).unwrap();
                (zw - aw * v).norm_squared()
            };
            let (pc, ph) = (power(&c), power(&h));
            prop_assert!((pc - ph).abs() < 1e-10 * pc.max(1.0));
        }

        #[test]
        fn projector_algebra(seed in 0u64..1000, t0 in -1.4f64..1.4, t1 in -1.4f64..1.4, t2 in -1.4f64..1.4) {
            let g = geometry();
            let w = Whitener::cholesky(&spd(12, seed)).unwrap();
            let a = w.whiten(&steering_matrix_from_theta(&g, &[t0, t1, t2, -t0]));
            let gram = a.adjoint() * &a;
            prop_assume!(gram.clone().try_inverse().is_some());
            let p = CMatrix::identity(12, 12) - &a * gram.try_inverse().unwrap() * a.adjoint();
            let tol = 1e-10 * 12.0;
            prop_assert!((&p - p.adjoint()).norm() < tol);
            prop_assert!((&p * &p - &p).norm() < 1e-8);
            prop_assert!((&p * &a).norm() < 1e-8 * a.norm());
        }
    }
}
