use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::clutter::{ClutterModel, TextureFamily, TextureKind};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, ALL_ESTIMATORS, CVMLE_U, ICDMLE, ICVMLE, IJMLE, IMMLE, MUSIC_SCM};
use crate::model::{sigma2_for_scr, speckle_template, ArrayGeometry, Scene};

const MAX_PULSES: usize = 100_000;
const MAX_VIRTUAL_ELEMENTS: usize = 1024;

/// Experiment description as read from JSON. Angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub geometry: GeometryConfig,
    pub targets: Vec<TargetConfig>,
    /// Pulses `L` (replaced by the sweep value on a pulse sweep).
    pub pulses: usize,
    /// Snapshots per pulse `T`.
    pub snapshots_per_pulse: usize,
    pub clutter: ClutterConfig,
    pub sweep: SweepConfig,
    pub trials: usize,
    pub base_seed: u64,
    pub estimators: Vec<EstimatorSelection>,
    pub estimator_config: EstimatorConfig,
    /// Default CSV destination when none is given on the command line.
    pub output: Option<PathBuf>,
}

/// Uniform linear arrays with half-wavelength spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub wavelength: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    pub dod_deg: f64,
    pub doa_deg: f64,
    /// Complex amplitude as `[re, im]`.
    pub rcs: [f64; 2],
    /// Normalised Doppler frequency.
    pub doppler: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClutterConfig {
    pub family: TextureKind,
    pub shape: f64,
    pub scale: f64,
    /// Base of the `rho^|m-n|` speckle correlation.
    pub correlation: f64,
    /// Phase increment between neighbouring elements, degrees.
    pub phase_step_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Signal-to-clutter ratio in dB.
    #[serde(rename = "scr_db")]
    Scr,
    /// Number of pulses `L`.
    #[serde(rename = "pulses")]
    Pulses,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Scr => "scr_db",
            SweepAxis::Pulses => "pulses",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// SCR used on a pulse sweep, dB.
    pub fixed_scr_db: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSelection {
    pub name: String,
    /// Outer-iteration counts to report, each one output row.
    #[serde(default = "default_iterations")]
    pub iterations: Vec<usize>,
}

fn default_iterations() -> Vec<usize> {
    vec![2]
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            tx_elements: 3,
            rx_elements: 4,
            wavelength: 1.0,
        }
    }
}

impl Default for ClutterConfig {
    fn default() -> Self {
        Self::k_default()
    }
}

impl ClutterConfig {
    pub fn k_default() -> Self {
        Self {
            family: TextureKind::KDistributed,
            shape: 2.0,
            scale: 10.0,
            correlation: 0.9,
            phase_step_deg: 90.0,
        }
    }

    pub fn t_default() -> Self {
        Self {
            family: TextureKind::TDistributed,
            shape: 1.1,
            scale: 2.0,
            ..Self::k_default()
        }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Scr,
            values: (0..8).map(|i| -5.0 + 5.0 * i as f64).collect(),
            fixed_scr_db: 15.0,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let target = |dod_deg, doa_deg, re, im, doppler| TargetConfig {
            dod_deg,
            doa_deg,
            rcs: [re, im],
            doppler,
        };
        let select = |name: &str, iterations: &[usize]| EstimatorSelection {
            name: name.to_string(),
            iterations: iterations.to_vec(),
        };
        Self {
            geometry: GeometryConfig::default(),
            targets: vec![target(18.0, 20.0, 2.0, 3.0, 0.3), target(45.0, 40.0, 1.0, -0.5, 0.8)],
            pulses: 15,
            snapshots_per_pulse: 5,
            clutter: ClutterConfig::default(),
            sweep: SweepConfig::default(),
            trials: 500,
            base_seed: 0,
            estimators: vec![
                select(IMMLE, &[1, 2]),
                select(ICDMLE, &[2]),
                select(IJMLE, &[2]),
                select(ICVMLE, &[2]),
                select(MUSIC_SCM, &[1]),
            ],
            estimator_config: EstimatorConfig::default(),
            output: None,
        }
    }
}

/// Estimators that run a single pass; their only reported count is 1.
pub fn is_iterative(name: &str) -> bool {
    !matches!(name, CVMLE_U | MUSIC_SCM)
}

impl ExperimentConfig {
    /// Parse JSON text. Errors carry the serde line/column diagnostic.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Check the invariants and build the runtime objects.
    pub fn build(&self) -> Result<Experiment> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep.values must not be empty".into()));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) || !self.sweep.fixed_scr_db.is_finite() {
            return Err(Error::Config("sweep values must be finite".into()));
        }
        if self.sweep.axis == SweepAxis::Pulses
            && self.sweep.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0 || v > MAX_PULSES as f64)
        {
            return Err(Error::Config(format!("pulse sweep values must be integers in 1..={MAX_PULSES}")));
        }
        if self.pulses > MAX_PULSES {
            return Err(Error::Config(format!("pulses must be <= {MAX_PULSES}")));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("estimators must not be empty".into()));
        }
        let mut estimators: Vec<EstimatorSelection> = Vec::with_capacity(self.estimators.len());
        for sel in &self.estimators {
            if !ALL_ESTIMATORS.contains(&sel.name.as_str()) {
                return Err(Error::Config(format!(
                    "unknown estimator `{}`, expected one of {}",
                    sel.name,
                    ALL_ESTIMATORS.join(", ")
                )));
            }
            if estimators.iter().any(|e| e.name == sel.name) {
                return Err(Error::Config(format!("estimator `{}` listed twice", sel.name)));
            }
            if sel.iterations.is_empty() || sel.iterations.contains(&0) {
                return Err(Error::Config(format!("estimator `{}`: iterations must be >= 1 and non-empty", sel.name)));
            }
            let mut iterations = if is_iterative(&sel.name) { sel.iterations.clone() } else { vec![1] };
            iterations.sort_unstable();
            iterations.dedup();
            estimators.push(EstimatorSelection {
                name: sel.name.clone(),
                iterations,
            });
        }
        self.estimator_config
            .validate()
            .map_err(|e| Error::Config(format!("estimator_config: {e}")))?;

        let g = &self.geometry;
        if g.tx_elements.saturating_mul(g.rx_elements) > MAX_VIRTUAL_ELEMENTS {
            return Err(Error::Config(format!("tx_elements * rx_elements must be <= {MAX_VIRTUAL_ELEMENTS}")));
        }
        let geometry = ArrayGeometry::half_wavelength_ula(g.tx_elements, g.rx_elements, g.wavelength)
            .map_err(|e| Error::Config(format!("geometry: {e}")))?;
        let k = self.targets.len();
        if k == 0 || k >= geometry.mn() {
            return Err(Error::Config(format!("need 1 <= targets < MN = {}, got {k}", geometry.mn())));
        }
        let scene = Scene::new(
            self.targets.iter().map(|t| t.dod_deg.to_radians()).collect(),
            self.targets.iter().map(|t| t.doa_deg.to_radians()).collect(),
            self.targets.iter().map(|t| Complex64::new(t.rcs[0], t.rcs[1])).collect(),
            self.targets.iter().map(|t| t.doppler).collect(),
            self.pulses,
            self.snapshots_per_pulse,
        )
        .map_err(|e| Error::Config(format!("targets: {e}")))?;

        let c = &self.clutter;
        if !(c.correlation.is_finite() && c.correlation.abs() < 1.0 && c.phase_step_deg.is_finite()) {
            return Err(Error::Config("clutter.correlation must lie in (-1, 1)".into()));
        }
        let texture =
            TextureFamily::new(c.family, c.shape, c.scale).map_err(|e| Error::Config(format!("clutter: {e}")))?;
        if c.family == TextureKind::TDistributed && c.shape <= 1.0 {
            return Err(Error::Config("clutter: the t family needs shape > 1 for a finite mean".into()));
        }

        let mut points = Vec::with_capacity(self.sweep.values.len());
        for &value in &self.sweep.values {
            let at = |e: Error| Error::Config(format!("sweep value {value}: {e}"));
            let (scene_at, scr) = match self.sweep.axis {
                SweepAxis::Scr => (scene.clone(), value),
                SweepAxis::Pulses => (
                    scene.with_pulses(value as usize).map_err(at)?,
                    self.sweep.fixed_scr_db,
                ),
            };
            let template = ClutterModel::new(
                texture,
                speckle_template(geometry.mn(), 1.0, c.correlation, c.phase_step_deg.to_radians()),
            )
            .map_err(at)?;
            let sigma2 = sigma2_for_scr(&geometry, &scene_at, &template, scr).map_err(at)?;
            let clutter = ClutterModel::new(
                texture,
                speckle_template(geometry.mn(), sigma2, c.correlation, c.phase_step_deg.to_radians()),
            )
            .map_err(at)?;
            points.push(SweepPoint {
                value,
                scene: scene_at,
                clutter,
            });
        }

        Ok(Experiment {
            geometry,
            points,
            axis: self.sweep.axis,
            kind: c.family,
            trials: self.trials,
            base_seed: self.base_seed,
            estimators,
            estimator_config: self.estimator_config,
        })
    }
}

/// Scene and clutter at one sweep value.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub scene: Scene,
    pub clutter: ClutterModel,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub geometry: ArrayGeometry,
    pub points: Vec<SweepPoint>,
    pub axis: SweepAxis,
    /// Texture family the clutter is drawn from and the estimators assume.
    pub kind: TextureKind,
    pub trials: usize,
    pub base_seed: u64,
    /// Selected estimators with sorted, de-duplicated iteration counts.
    pub estimators: Vec<EstimatorSelection>,
    pub estimator_config: EstimatorConfig,
}
