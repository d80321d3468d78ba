use std::f64::consts::FRAC_PI_2;

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::immle::check_run_inputs;
use super::objective::{block_forms, small_form, steer};
use super::search::{angle_grid, nelder_mead};
use super::EstimatorConfig;
use crate::error::{Error, Result};
use crate::model::{ArrayGeometry, CMatrix, ObservationBlock};

const GAP_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct MusicResult {
    /// `2K` interleaved angles, radians.
    pub theta: Vec<f64>,
    /// The `K`-th and `K+1`-th eigenvalues were not separated.
    pub degenerate: bool,
}

/// Noise-subspace projector of the sample covariance and the degeneracy flag.
fn noise_projector(obs: &ObservationBlock, k: usize) -> (CMatrix, bool) {
    let z = obs.snapshots();
    let scm = z * z.adjoint() / Complex64::from(obs.pulses() as f64);
    let scm = (&scm + scm.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(scm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let largest = eig.eigenvalues[order[0]].abs().max(f64::MIN_POSITIVE);
    let gap = (eig.eigenvalues[order[k - 1]] - eig.eigenvalues[order[k]]) / largest;
    let n = z.nrows();
    let mut proj = CMatrix::zeros(n, n);
    for &i in &order[k..] {
        let e = eig.eigenvectors.column(i);
        proj += e * e.adjoint();
    }
    (proj, !(gap > GAP_TOLERANCE))
}

/// Pseudospectrum `a^H P_n a / a^H a` over `grid x grid`, indexed `[dod][doa]`.
fn pseudospectrum(geom: &ArrayGeometry, proj: &CMatrix, grid: &[f64]) -> Vec<Vec<f64>> {
    let m = geom.m();
    let norm = geom.mn() as f64;
    let tx: Vec<Vec<Complex64>> = grid.iter().map(|&t| steer(geom.tx_positions(), geom.wavelength(), t)).collect();
    let mut out = vec![vec![0.0; grid.len()]; grid.len()];
    let mut c = vec![Complex64::new(0.0, 0.0); m * m];
    for (j, &doa) in grid.iter().enumerate() {
        let ar = steer(geom.rx_positions(), geom.wavelength(), doa);
        block_forms(proj, &ar, m, &mut c);
        for (i, at) in tx.iter().enumerate() {
            out[i][j] = small_form(&c, at) / norm;
        }
    }
    out
}

fn point_value(geom: &ArrayGeometry, proj: &CMatrix, dod: f64, doa: f64) -> f64 {
    if dod.abs() >= FRAC_PI_2 || doa.abs() >= FRAC_PI_2 {
        return f64::INFINITY;
    }
    let at = steer(geom.tx_positions(), geom.wavelength(), dod);
    let ar = steer(geom.rx_positions(), geom.wavelength(), doa);
    let mut c = vec![Complex64::new(0.0, 0.0); at.len() * at.len()];
    block_forms(proj, &ar, at.len(), &mut c);
    small_form(&c, &at) / geom.mn() as f64
}

/// MUSIC on the sample covariance: the `K` deepest local minima of the
/// noise-subspace pseudospectrum that are at least two grid steps apart in
/// both angles, each refined by a simplex polish.
pub fn music_scm(
    obs: &ObservationBlock,
    geom: &ArrayGeometry,
    k: usize,
    config: &EstimatorConfig,
) -> Result<MusicResult> {
    config.validate()?;
    check_run_inputs(obs, geom, k)?;
    if obs.pulses() < k {
        return Err(Error::domain("music_scm", format!("need L >= K, got L = {} and K = {k}", obs.pulses())));
    }
    let (proj, degenerate) = noise_projector(obs, k);
    let grid = angle_grid(config.grid_step_rad());
    let spec = pseudospectrum(geom, &proj, &grid);
    let n = grid.len();

    let mut minima = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = spec[i][j];
            let is_min = (i.saturating_sub(1)..(i + 2).min(n))
                .flat_map(|p| (j.saturating_sub(1)..(j + 2).min(n)).map(move |q| (p, q)))
                .all(|(p, q)| (p, q) == (i, j) || spec[p][q] >= v);
            if is_min {
                minima.push((v, i, j));
            }
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut picked: Vec<(usize, usize)> = Vec::with_capacity(k);
    for &(_, i, j) in &minima {
        if picked.iter().all(|&(p, q)| i.abs_diff(p) >= 2 || j.abs_diff(q) >= 2) {
            picked.push((i, j));
            if picked.len() == k {
                break;
            }
        }
    }
    // too few separated minima: fill with the deepest remaining grid points
    if picked.len() < k {
        let mut all: Vec<(f64, usize, usize)> =
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (spec[i][j], i, j)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (_, i, j) in all {
            if picked.len() == k {
                break;
            }
            if picked.iter().all(|&(p, q)| i.abs_diff(p) >= 2 || j.abs_diff(q) >= 2) {
                picked.push((i, j));
            }
        }
    }

    let mut theta = Vec::with_capacity(2 * k);
    for (i, j) in picked {
        let polish = nelder_mead(
            |x: &[f64]| point_value(geom, &proj, x[0], x[1]),
            &[grid[i], grid[j]],
            0.5 * config.grid_step_rad(),
            0.1 * config.refine_tol_rad(),
            config.polish_budget - 2,
        );
        // stay in the basin the grid chose
        let inside = (polish.x[0] - grid[i]).abs() <= config.grid_step_rad()
            && (polish.x[1] - grid[j]).abs() <= config.grid_step_rad();
        if inside && polish.value <= spec[i][j] {
            theta.extend_from_slice(&polish.x);
        } else {
            theta.extend_from_slice(&[grid[i], grid[j]]);
        }
    }
    Ok(MusicResult { theta, degenerate })
}
