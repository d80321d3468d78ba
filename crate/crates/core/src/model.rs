//! Array geometry, steering vectors and deterministic signal synthesis.
//!
//! Virtual-array vectors are ordered receive-index fastest: entry `m * N + n`
//! belongs to transmitter `m` and receiver `n`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::clutter::ClutterModel;
use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Transmit and receive sensor offsets (meters) and the carrier wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    tx_positions: Vec<f64>,
    rx_positions: Vec<f64>,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(tx_positions: Vec<f64>, rx_positions: Vec<f64>, wavelength: f64) -> Result<Self> {
        if tx_positions.is_empty() || rx_positions.is_empty() {
            return Err(Error::domain("ArrayGeometry", "need at least one sensor on each side"));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::domain("ArrayGeometry", format!("wavelength must be > 0, got {wavelength}")));
        }
        if tx_positions.iter().chain(&rx_positions).any(|p| !p.is_finite()) {
            return Err(Error::domain("ArrayGeometry", "sensor positions must be finite"));
        }
        Ok(Self {
            tx_positions,
            rx_positions,
            wavelength,
        })
    }

    /// Uniform linear arrays with half-wavelength spacing on both sides.
    pub fn half_wavelength_ula(m: usize, n: usize, wavelength: f64) -> Result<Self> {
        let ula = |count: usize| (0..count).map(|i| 0.5 * wavelength * i as f64).collect();
        Self::new(ula(m), ula(n), wavelength)
    }

    pub fn tx_positions(&self) -> &[f64] {
        &self.tx_positions
    }

    pub fn rx_positions(&self) -> &[f64] {
        &self.rx_positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn m(&self) -> usize {
        self.tx_positions.len()
    }

    pub fn n(&self) -> usize {
        self.rx_positions.len()
    }

    /// Virtual array size `MN`.
    pub fn mn(&self) -> usize {
        self.m() * self.n()
    }
}

/// A (DOD, DOA) pair in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    pub dod: f64,
    pub doa: f64,
}

/// Targets and the pulse structure of one coherent interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    dod: Vec<f64>,
    doa: Vec<f64>,
    rcs: Vec<Complex64>,
    doppler: Vec<f64>,
    pulses: usize,
    snapshots_per_pulse: usize,
}

impl Scene {
    pub fn new(
        dod: Vec<f64>,
        doa: Vec<f64>,
        rcs: Vec<Complex64>,
        doppler: Vec<f64>,
        pulses: usize,
        snapshots_per_pulse: usize,
    ) -> Result<Self> {
        let k = dod.len();
        if k == 0 || doa.len() != k || rcs.len() != k || doppler.len() != k {
            return Err(Error::domain(
                "Scene",
                format!(
                    "target lists must share one non-zero length (dod {}, doa {}, rcs {}, doppler {})",
                    k,
                    doa.len(),
                    rcs.len(),
                    doppler.len()
                ),
            ));
        }
        if pulses == 0 || snapshots_per_pulse == 0 {
            return Err(Error::domain("Scene", "pulses and snapshots per pulse must be >= 1"));
        }
        if dod.iter().chain(&doa).any(|t| !(t.abs() < PI / 2.0)) {
            return Err(Error::domain("Scene", "angles must lie in (-pi/2, pi/2)"));
        }
        if rcs.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) || doppler.iter().any(|f| !f.is_finite()) {
            return Err(Error::domain("Scene", "rcs and doppler must be finite"));
        }
        Ok(Self {
            dod,
            doa,
            rcs,
            doppler,
            pulses,
            snapshots_per_pulse,
        })
    }

    /// Number of targets `K`.
    pub fn k(&self) -> usize {
        self.dod.len()
    }

    pub fn dod(&self) -> &[f64] {
        &self.dod
    }

    pub fn doa(&self) -> &[f64] {
        &self.doa
    }

    pub fn rcs(&self) -> &[Complex64] {
        &self.rcs
    }

    pub fn doppler(&self) -> &[f64] {
        &self.doppler
    }

    pub fn pulses(&self) -> usize {
        self.pulses
    }

    pub fn snapshots_per_pulse(&self) -> usize {
        self.snapshots_per_pulse
    }

    pub fn angle_pairs(&self) -> Vec<AnglePair> {
        self.dod
            .iter()
            .zip(&self.doa)
            .map(|(&dod, &doa)| AnglePair { dod, doa })
            .collect()
    }

    /// Angles flattened as `[dod_0, doa_0, dod_1, doa_1, ...]`.
    pub fn theta(&self) -> Vec<f64> {
        self.dod.iter().zip(&self.doa).flat_map(|(&t, &r)| [t, r]).collect()
    }

    pub fn with_rcs(&self, rcs: Vec<Complex64>) -> Result<Self> {
        Self::new(
            self.dod.clone(),
            self.doa.clone(),
            rcs,
            self.doppler.clone(),
            self.pulses,
            self.snapshots_per_pulse,
        )
    }

    pub fn with_pulses(&self, pulses: usize) -> Result<Self> {
        Self::new(
            self.dod.clone(),
            self.doa.clone(),
            self.rcs.clone(),
            self.doppler.clone(),
            pulses,
            self.snapshots_per_pulse,
        )
    }
}

/// The `L` matched-filter outputs, one `MN`-dimensional column per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationBlock {
    snapshots: CMatrix,
}

impl ObservationBlock {
    pub fn new(snapshots: CMatrix) -> Result<Self> {
        if snapshots.ncols() == 0 || snapshots.nrows() == 0 {
            return Err(Error::domain("ObservationBlock", "need at least one non-empty snapshot"));
        }
        if snapshots.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::domain("ObservationBlock", "snapshots must be finite"));
        }
        Ok(Self { snapshots })
    }

    pub fn snapshots(&self) -> &CMatrix {
        &self.snapshots
    }

    pub fn pulses(&self) -> usize {
        self.snapshots.ncols()
    }

    pub fn dim(&self) -> usize {
        self.snapshots.nrows()
    }
}

/// Steering vector `exp(j 2 pi sin(theta) d_i / lambda)` of one linear array.
pub fn steering_vector(positions: &[f64], wavelength: f64, theta: f64) -> Result<CVector> {
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::domain("steering_vector", format!("wavelength must be > 0, got {wavelength}")));
    }
    Ok(steering_unchecked(positions, wavelength, theta))
}

fn steering_unchecked(positions: &[f64], wavelength: f64, theta: f64) -> CVector {
    let k = 2.0 * PI * theta.sin() / wavelength;
    DVector::from_iterator(positions.len(), positions.iter().map(|d| Complex64::from_polar(1.0, k * d)))
}

/// `vec(a_R a_T^T)`: the `MN` virtual-array response for one target.
pub fn virtual_steering(geom: &ArrayGeometry, dod: f64, doa: f64) -> CVector {
    let a_t = steering_unchecked(&geom.tx_positions, geom.wavelength, dod);
    let a_r = steering_unchecked(&geom.rx_positions, geom.wavelength, doa);
    kron(&a_t, &a_r)
}

pub(crate) fn kron(a_t: &CVector, a_r: &CVector) -> CVector {
    let n = a_r.len();
    DVector::from_fn(a_t.len() * n, |i, _| a_t[i / n] * a_r[i % n])
}

/// Steering matrix for interleaved angles `[dod_0, doa_0, dod_1, doa_1, ...]`.
pub fn steering_matrix_from_theta(geom: &ArrayGeometry, theta: &[f64]) -> CMatrix {
    let k = theta.len() / 2;
    let mut a = CMatrix::zeros(geom.mn(), k);
    for j in 0..k {
        a.set_column(j, &virtual_steering(geom, theta[2 * j], theta[2 * j + 1]));
    }
    a
}

/// `A(theta)`: column `k` is the virtual steering vector of target `k`.
pub fn steering_matrix(geom: &ArrayGeometry, scene: &Scene) -> CMatrix {
    steering_matrix_from_theta(geom, &scene.theta())
}

/// `v(l)`, entry `k` equal to `sqrt(T) alpha_k exp(2 pi j f_k l)`.
pub fn signal_vector(scene: &Scene, l: usize) -> Result<CVector> {
    if l >= scene.pulses {
        return Err(Error::Index {
            index: l,
            len: scene.pulses,
        });
    }
    let root_t = (scene.snapshots_per_pulse as f64).sqrt();
    Ok(DVector::from_iterator(
        scene.k(),
        scene
            .rcs
            .iter()
            .zip(&scene.doppler)
            .map(|(alpha, f)| alpha * root_t * Complex64::from_polar(1.0, 2.0 * PI * f * l as f64)),
    ))
}

/// All `v(l)` stacked as a `K x L` matrix.
pub fn signal_matrix(scene: &Scene) -> CMatrix {
    let mut v = CMatrix::zeros(scene.k(), scene.pulses);
    for l in 0..scene.pulses {
        v.set_column(l, &signal_vector(scene, l).expect("pulse index in range"));
    }
    v
}

/// Noise-free part `A(theta) v(l)` for every pulse, as an `MN x L` matrix.
pub fn noise_free(geom: &ArrayGeometry, scene: &Scene) -> CMatrix {
    steering_matrix(geom, scene) * signal_matrix(scene)
}

/// `z(l) = A(theta) v(l) + n(l)` with clutter given as an `MN x L` matrix.
pub fn synthesize(geom: &ArrayGeometry, scene: &Scene, clutter: &CMatrix) -> Result<ObservationBlock> {
    if clutter.nrows() != geom.mn() {
        return Err(Error::Dimension {
            expected: geom.mn(),
            found: clutter.nrows(),
        });
    }
    if clutter.ncols() != scene.pulses {
        return Err(Error::Dimension {
            expected: scene.pulses,
            found: clutter.ncols(),
        });
    }
    ObservationBlock::new(noise_free(geom, scene) + clutter)
}

fn mean_signal_power(geom: &ArrayGeometry, scene: &Scene) -> f64 {
    noise_free(geom, scene).norm_squared() / scene.pulses as f64
}

/// Signal-to-clutter ratio in dB: mean signal power over `E{tau} tr(Sigma)`.
pub fn scr_of(geom: &ArrayGeometry, scene: &Scene, clutter: &ClutterModel) -> Result<f64> {
    let mean_tau = clutter.texture().mean()?;
    let power = mean_tau * clutter.speckle_cov().trace().re;
    Ok(10.0 * (mean_signal_power(geom, scene) / power).log10())
}

/// Correlated speckle template `[Sigma]_{mn} = sigma2 rho^|m-n| exp(j phase (m-n))`.
pub fn speckle_template(mn: usize, sigma2: f64, rho: f64, phase_step: f64) -> CMatrix {
    CMatrix::from_fn(mn, mn, |r, c| {
        let d = r as f64 - c as f64;
        Complex64::from_polar(sigma2 * rho.powf(d.abs()), phase_step * d)
    })
}

/// The per-element power `sigma2 = tr(Sigma) / MN` that brings the template's
/// SCR to `target_scr_db`.
pub fn sigma2_for_scr(
    geom: &ArrayGeometry,
    scene: &Scene,
    clutter_template: &ClutterModel,
    target_scr_db: f64,
) -> Result<f64> {
    if !target_scr_db.is_finite() {
        return Err(Error::domain("sigma2_for_scr", "target SCR must be finite"));
    }
    let current = scr_of(geom, scene, clutter_template)?;
    let sigma2 = clutter_template.speckle_cov().trace().re / geom.mn() as f64;
    Ok(sigma2 * 10f64.powf((current - target_scr_db) / 10.0))
}
