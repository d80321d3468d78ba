use num_complex::Complex64;

use super::projection::{whitened_least_squares, Whitener, CONDITION_CAP};
use super::search::{PairEvaluator, ThetaObjective};
use crate::clutter::{TextureFamily, TextureKind, RHO_FLOOR};
use crate::error::{Error, Result};
use crate::model::{steering_matrix_from_theta, ArrayGeometry, CMatrix, ObservationBlock};
use crate::specfun::{ln_gamma_unchecked, log_k_and_ratio};

/// Per-pulse cost applied to the whitened residual power `r^2`.
#[derive(Debug, Clone)]
pub enum PulseCost {
    /// `r^2`.
    Squared,
    /// `w_l r^2`, one weight per pulse.
    Weighted(Vec<f64>),
    /// `-ln g_MN(r^2)`, the marginal-likelihood kernel.
    Marginal(TextureFamily),
}

#[derive(Debug, Clone)]
enum Cost {
    Squared,
    Weighted(Vec<f64>),
    T { m_plus_a: f64, b: f64, offset: f64 },
    K { half_nu: f64, abs_nu: f64, inv_b: f64, offset: f64 },
}

impl Cost {
    fn new(cost: PulseCost, mn: usize, pulses: usize) -> Result<Self> {
        Ok(match cost {
            PulseCost::Squared => Cost::Squared,
            PulseCost::Weighted(w) => {
                if w.len() != pulses {
                    return Err(Error::Dimension {
                        expected: pulses,
                        found: w.len(),
                    });
                }
                if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                    return Err(Error::domain("PulseCost", "weights must be finite and >= 0"));
                }
                Cost::Weighted(w)
            }
            PulseCost::Marginal(tex) => {
                let (a, b, m) = (tex.shape, tex.scale, mn as f64);
                match tex.kind {
                    TextureKind::TDistributed => Cost::T {
                        m_plus_a: m + a,
                        b,
                        offset: a * b.ln() + ln_gamma_unchecked(m + a) - ln_gamma_unchecked(a),
                    },
                    TextureKind::KDistributed => Cost::K {
                        half_nu: 0.5 * (a - m),
                        abs_nu: (a - m).abs(),
                        inv_b: 1.0 / b,
                        offset: std::f64::consts::LN_2 - 0.5 * (m + a) * b.ln() - ln_gamma_unchecked(a),
                    },
                }
            }
        })
    }

    fn total(&self, r2: &[f64]) -> f64 {
        match self {
            Cost::Squared => r2.iter().sum(),
            Cost::Weighted(w) => r2.iter().zip(w).map(|(r, w)| r * w).sum(),
            Cost::T { m_plus_a, b, offset } => r2.iter().map(|r| m_plus_a * (r + b).ln() - offset).sum(),
            Cost::K {
                half_nu,
                abs_nu,
                inv_b,
                offset,
            } => r2
                .iter()
                .map(|&r| {
                    let r = r.max(RHO_FLOOR * RHO_FLOOR);
                    let u = 2.0 * (r * inv_b).sqrt();
                    -half_nu * r.ln() - log_k_and_ratio(*abs_nu, u).0 - offset
                })
                .sum(),
        }
    }
}

/// Concentrated angle objective `sum_l cost(|P_perp(W A) W z(l)|^2)`.
///
/// With [`PulseCost::Marginal`] the value is exactly `-sum_l ln g_MN`.
#[derive(Debug, Clone)]
pub struct ConcentratedObjective<'a> {
    geom: &'a ArrayGeometry,
    whitener: Whitener,
    zw: CMatrix,
    k: usize,
    cost: Cost,
}

impl<'a> ConcentratedObjective<'a> {
    pub fn new(
        geom: &'a ArrayGeometry,
        sigma: &CMatrix,
        obs: &ObservationBlock,
        k: usize,
        cost: PulseCost,
    ) -> Result<Self> {
        Self::with_whitener(geom, Whitener::cholesky(sigma)?, obs, k, cost)
    }

    pub fn with_whitener(
        geom: &'a ArrayGeometry,
        whitener: Whitener,
        obs: &ObservationBlock,
        k: usize,
        cost: PulseCost,
    ) -> Result<Self> {
        if obs.dim() != geom.mn() || whitener.matrix().nrows() != geom.mn() {
            return Err(Error::Dimension {
                expected: geom.mn(),
                found: obs.dim(),
            });
        }
        if k == 0 {
            return Err(Error::domain("ConcentratedObjective", "need at least one target"));
        }
        Ok(Self {
            geom,
            zw: whitener.whiten(obs.snapshots()),
            cost: Cost::new(cost, geom.mn(), obs.pulses())?,
            whitener,
            k,
        })
    }

    /// Whitened residual powers at `theta`.
    pub fn residual_powers(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let a = self.whitener.whiten(&steering_matrix_from_theta(self.geom, theta));
        let v = whitened_least_squares(&a, &self.zw)?;
        Ok((&self.zw - a * v).column_iter().map(|c| c.norm_squared()).collect())
    }

    pub fn cost_of_powers(&self, r2: &[f64]) -> f64 {
        self.cost.total(r2)
    }
}

impl ThetaObjective for ConcentratedObjective<'_> {
    fn num_targets(&self) -> usize {
        self.k
    }

    fn eval(&self, theta: &[f64]) -> f64 {
        match self.residual_powers(theta) {
            Ok(r2) => self.cost.total(&r2),
            Err(_) => f64::INFINITY,
        }
    }

    fn reduced(&self, fixed: &[f64]) -> Option<Box<dyn PairEvaluator + '_>> {
        Some(Box::new(PairScan::new(self, fixed)))
    }
}

/// Residual power for one candidate column after projecting out a fixed set:
/// with `y_l` the data already orthogonal to the fixed columns and `u` the
/// candidate's orthogonal part, `r_l^2 = |y_l|^2 - |u^H y_l|^2 / |u|^2`.
/// Quadratic forms are evaluated in the unwhitened steering domain so the
/// Kronecker structure of the steering vector can be exploited on grids.
struct PairScan<'o, 'a> {
    objective: &'o ConcentratedObjective<'a>,
    degenerate: bool,
    y_norm2: Vec<f64>,
    /// `W^H y_l` as columns.
    g: CMatrix,
    /// `W^H P_perp W`.
    h: CMatrix,
    /// `W^H W`.
    h0: CMatrix,
}

impl<'o, 'a> PairScan<'o, 'a> {
    fn new(objective: &'o ConcentratedObjective<'a>, fixed: &[f64]) -> Self {
        let w = objective.whitener.matrix();
        let f = w * steering_matrix_from_theta(objective.geom, fixed);
        let mut q: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(f.ncols());
        let mut degenerate = false;
        for col in f.column_iter() {
            let mut u = col.into_owned();
            for _ in 0..2 {
                for b in &q {
                    let proj = b.dotc(&u);
                    u -= b * proj;
                }
            }
            let ratio = u.norm_squared() / col.norm_squared();
            if !(ratio > 4.0 / CONDITION_CAP) {
                degenerate = true;
                break;
            }
            u /= Complex64::from(u.norm());
            q.push(u);
        }
        let mut y = objective.zw.clone();
        let mut wq = CMatrix::zeros(w.ncols(), q.len());
        for (i, b) in q.iter().enumerate() {
            let coeffs = b.adjoint() * &y;
            y -= b * coeffs;
            wq.set_column(i, &(w.adjoint() * b));
        }
        let h0 = w.adjoint() * w;
        let h = &h0 - &wq * wq.adjoint();
        Self {
            objective,
            degenerate,
            y_norm2: y.column_iter().map(|c| c.norm_squared()).collect(),
            g: w.adjoint() * y,
            h,
            h0,
        }
    }

    fn cost_from(&self, nu: f64, n0: f64, inner: impl Iterator<Item = Complex64>, r2: &mut Vec<f64>) -> f64 {
        if !(nu > n0 * 4.0 / CONDITION_CAP) {
            return f64::INFINITY;
        }
        r2.clear();
        r2.extend(inner.zip(&self.y_norm2).map(|(c, y)| (y - c.norm_sqr() / nu).max(0.0)));
        self.objective.cost.total(r2)
    }
}

fn quad_form(h: &CMatrix, a: &[Complex64]) -> f64 {
    let n = a.len();
    let mut acc = 0.0;
    for c in 0..n {
        let mut col = Complex64::new(0.0, 0.0);
        for r in 0..n {
            col += a[r].conj() * h[(r, c)];
        }
        acc += (col * a[c]).re;
    }
    acc
}

/// The `M x M` matrix `(I_M kron a_R)^H X (I_M kron a_R)`, row-major into `out`.
pub(crate) fn block_forms(x: &CMatrix, ar: &[Complex64], m: usize, out: &mut [Complex64]) {
    let n = ar.len();
    for mi in 0..m {
        for mj in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for nj in 0..n {
                let mut col = Complex64::new(0.0, 0.0);
                for ni in 0..n {
                    col += ar[ni].conj() * x[(mi * n + ni, mj * n + nj)];
                }
                acc += col * ar[nj];
            }
            out[mi * m + mj] = acc;
        }
    }
}

/// `a^H C a` for the `M x M` row-major `c`.
pub(crate) fn small_form(c: &[Complex64], at: &[Complex64]) -> f64 {
    let m = at.len();
    let mut acc = 0.0;
    for mi in 0..m {
        let mut row = Complex64::new(0.0, 0.0);
        for mj in 0..m {
            row += c[mi * m + mj] * at[mj];
        }
        acc += (at[mi].conj() * row).re;
    }
    acc
}

pub(crate) fn steer(positions: &[f64], wavelength: f64, theta: f64) -> Vec<Complex64> {
    let k = 2.0 * std::f64::consts::PI * theta.sin() / wavelength;
    positions.iter().map(|d| Complex64::from_polar(1.0, k * d)).collect()
}

impl PairEvaluator for PairScan<'_, '_> {
    fn eval(&self, dod: f64, doa: f64) -> f64 {
        if self.degenerate {
            return f64::INFINITY;
        }
        let geom = self.objective.geom;
        let at = steer(geom.tx_positions(), geom.wavelength(), dod);
        let ar = steer(geom.rx_positions(), geom.wavelength(), doa);
        let a: Vec<Complex64> = at.iter().flat_map(|t| ar.iter().map(move |r| t * r)).collect();
        let nu = quad_form(&self.h, &a);
        let n0 = quad_form(&self.h0, &a);
        let inner = self
            .g
            .column_iter()
            .map(|g| a.iter().zip(g.iter()).map(|(x, y)| x.conj() * y).sum::<Complex64>());
        self.cost_from(nu, n0, inner, &mut Vec::with_capacity(self.y_norm2.len()))
    }

    fn scan(&self, grid: &[f64]) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, grid[0], grid[0]);
        if self.degenerate {
            return best;
        }
        let geom = self.objective.geom;
        let (m, n) = (geom.m(), geom.n());
        let pulses = self.y_norm2.len();
        let tx: Vec<Vec<Complex64>> = grid
            .iter()
            .map(|&t| steer(geom.tx_positions(), geom.wavelength(), t))
            .collect();
        let mut c_h = vec![Complex64::new(0.0, 0.0); m * m];
        let mut c_h0 = vec![Complex64::new(0.0, 0.0); m * m];
        let mut e = vec![Complex64::new(0.0, 0.0); pulses * m];
        let mut inner = vec![Complex64::new(0.0, 0.0); pulses];
        let mut r2 = Vec::with_capacity(pulses);
        for &doa in grid {
            let ar = steer(geom.rx_positions(), geom.wavelength(), doa);
            block_forms(&self.h, &ar, m, &mut c_h);
            block_forms(&self.h0, &ar, m, &mut c_h0);
            for (l, g) in self.g.column_iter().enumerate() {
                for mi in 0..m {
                    e[l * m + mi] = (0..n).map(|ni| ar[ni].conj() * g[mi * n + ni]).sum();
                }
            }
            for (i, at) in tx.iter().enumerate() {
                let nu = small_form(&c_h, at);
                let n0 = small_form(&c_h0, at);
                for (l, slot) in inner.iter_mut().enumerate() {
                    *slot = (0..m).map(|mi| at[mi].conj() * e[l * m + mi]).sum();
                }
                let v = self.cost_from(nu, n0, inner.iter().copied(), &mut r2);
                if v < best.0 {
                    best = (v, grid[i], doa);
                }
            }
        }
        best
    }
}
