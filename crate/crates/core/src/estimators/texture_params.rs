use super::EstimatorConfig;
use crate::clutter::{log_g_unchecked, score_a, score_b, TextureFamily};
use crate::error::{Error, Result};
use crate::specfun::digamma_unchecked;

/// Relative rounding allowance when comparing kernel sums.
const ACCEPT_SLACK: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureUpdate {
    pub shape: f64,
    pub scale: f64,
    /// One of the two roots had no sign change inside the bounds.
    pub bracket_exhausted: bool,
}

/// Root of a decreasing-through-zero `f` on `[lo, hi]` (Illinois variant of
/// regula falsi). Without a sign change, the bound towards which `f` points
/// is returned and the flag is set.
fn illinois<F: FnMut(f64) -> Result<f64>>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, bool)> {
    let (mut x0, mut x1) = (lo, hi);
    let (mut f0, mut f1) = (f(x0)?, f(x1)?);
    if f0 == 0.0 {
        return Ok((x0, false));
    }
    if f1 == 0.0 {
        return Ok((x1, false));
    }
    if f0.signum() == f1.signum() {
        // positive score everywhere: the likelihood still rises at the upper bound
        return Ok((if f0 > 0.0 { hi } else { lo }, true));
    }
    if f0 < 0.0 {
        // increasing through zero is a minimum of the likelihood; leave it
        return Ok((if f(0.5 * (lo + hi))? > 0.0 { hi } else { lo }, true));
    }
    let mut side = 0;
    for _ in 0..200 {
        let x = (x0 * f1 - x1 * f0) / (f1 - f0);
        let fx = f(x)?;
        if fx.abs() < tol || (x1 - x0).abs() < 1e-13 * (1.0 + x.abs()) {
            return Ok((x, false));
        }
        if fx.signum() == f1.signum() {
            x1 = x;
            f1 = fx;
            if side == -1 {
                f0 *= 0.5;
            }
            side = -1;
        } else {
            x0 = x;
            f0 = fx;
            if side == 1 {
                f1 *= 0.5;
            }
            side = 1;
        }
    }
    Ok(((x0 * f1 - x1 * f0) / (f1 - f0), false))
}

fn kernel_sum(rho_sq: &[f64], tex: &TextureFamily, mn: usize) -> f64 {
    rho_sq.iter().map(|&r| log_g_unchecked(r, tex, mn)).sum()
}

/// One pass of the texture-parameter update: the shape solves
/// `sum_l d ln g / da = 0` at the current scale, then the scale solves
/// `sum_l d ln g / db = 0` at the new shape. Roots are searched in log
/// coordinates inside `ab_bounds`; a candidate is kept only when it does not
/// lower `sum_l ln g`.
pub fn solve_texture_params(
    rho_sq: &[f64],
    texture: &TextureFamily,
    mn: usize,
    config: &EstimatorConfig,
) -> Result<TextureUpdate> {
    if rho_sq.is_empty() {
        return Err(Error::domain("solve_texture_params", "need at least one pulse"));
    }
    let [a_lo, a_hi, b_lo, b_hi] = config.ab_bounds;
    let tol = config.root_tol;
    let mut tex = *texture;
    let mut best = kernel_sum(rho_sq, &tex, mn);

    let score_sum_a = |x: f64, b: f64| -> Result<f64> {
        let t = tex.with_params(x.exp(), b)?;
        rho_sq.iter().map(|&r| score_a(r, &t, mn)).sum::<Result<f64>>()
    };
    let (ln_a, flag_a) = illinois(|x| score_sum_a(x, tex.scale), a_lo.ln(), a_hi.ln(), tol)?;
    let candidate = tex.with_params(ln_a.exp(), tex.scale)?;
    let value = kernel_sum(rho_sq, &candidate, mn);
    if value >= best - ACCEPT_SLACK * best.abs() {
        tex = candidate;
        best = value;
    }

    let score_sum_b = |x: f64| -> Result<f64> {
        let t = tex.with_params(tex.shape, x.exp())?;
        rho_sq.iter().map(|&r| score_b(r, &t, mn)).sum::<Result<f64>>()
    };
    let (ln_b, flag_b) = illinois(score_sum_b, b_lo.ln(), b_hi.ln(), tol)?;
    let candidate = tex.with_params(tex.shape, ln_b.exp())?;
    if kernel_sum(rho_sq, &candidate, mn) >= best - ACCEPT_SLACK * best.abs() {
        tex = candidate;
    }
    Ok(TextureUpdate {
        shape: tex.shape,
        scale: tex.scale,
        bracket_exhausted: flag_a || flag_b,
    })
}

/// Maximum-likelihood gamma fit `(shape, scale)` to positive samples, clamped
/// to `[a_min, a_max] x [b_min, b_max]`.
pub fn fit_gamma(samples: &[f64], bounds: [f64; 4]) -> Result<(f64, f64)> {
    if samples.is_empty() || samples.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::domain("fit_gamma", "samples must be finite and > 0"));
    }
    let [a_lo, a_hi, b_lo, b_hi] = bounds;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let mean_ln = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    // ln a - digamma(a) = s is decreasing in a
    let s = mean.ln() - mean_ln;
    let shape = if !(s > 0.0) {
        a_hi
    } else {
        let g = |x: f64| Ok(x.exp().ln() - digamma_unchecked(x.exp()) - s);
        let (ln_a, _) = illinois(g, a_lo.ln(), a_hi.ln(), 1e-12)?;
        ln_a.exp()
    };
    Ok((shape, (mean / shape).clamp(b_lo, b_hi)))
}
