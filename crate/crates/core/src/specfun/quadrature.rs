//! Adaptive Gauss–Kronrod quadrature on finite intervals and on the half line.
//!
//! Half-line integrals are mapped through `tau = exp(s)` followed by
//! `s = t / (1 - t^2)`, which turns algebraic endpoint behaviour at `0` and
//! `+inf` into exponential decay and leaves the adaptive splitter to resolve
//! peaks wherever they sit. The log-domain variants locate the peak of the
//! log-integrand, subtract it, and integrate only over the window where the
//! integrand is within [`LOG_WINDOW`] nats of its maximum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances and subdivision budget for adaptive quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl QuadratureSpec {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = QuadratureSpec {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(Error::domain("QuadratureSpec", "rel_tol must be > 0"));
        }
        if !(self.abs_tol >= 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::domain("QuadratureSpec", "abs_tol must be >= 0"));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::domain("QuadratureSpec", "max_subdivisions must be >= 1"));
        }
        Ok(())
    }
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-300,
            max_subdivisions: 200,
        }
    }
}

/// Value of a definite integral with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub subdivisions: usize,
}

/// Integrands are considered negligible this many nats below their peak.
pub const LOG_WINDOW: f64 = 60.0;

// Gauss–Kronrod 7/15 abscissae and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Result<Segment> {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    if !resk.is_finite() || !resabs.is_finite() {
        return Err(Error::domain(
            "quadrature",
            format!("integrand is not finite on [{lo:e}, {hi:e}]"),
        ));
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let width = half.abs();
    let resasc = resasc * width;
    let resabs = resabs * width;
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Ok(Segment {
        lo,
        hi,
        value: resk * half,
        error,
        abs_value: resabs,
    })
}

/// Globally adaptive Gauss–Kronrod integration of `f` over `[lo, hi]`.
///
/// `breakpoints` are interior points where the interval is split up front.
/// Convergence is declared when the summed error estimate drops below
/// `max(abs_tol, rel_tol * integral of |f|)`.
pub fn integrate_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<Quadrature> {
    spec.validate()?;
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::domain(
            "integrate_interval",
            format!("invalid interval [{lo}, {hi}]"),
        ));
    }
    let mut cuts = vec![lo];
    cuts.extend(breakpoints.iter().copied().filter(|&p| p > lo && p < hi));
    cuts.push(hi);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::new();
    for w in cuts.windows(2) {
        heap.push(kronrod15(&mut f, w[0], w[1])?);
    }
    let totals = |heap: &BinaryHeap<Segment>| {
        heap.iter().fold((0.0, 0.0, 0.0), |(v, e, a), s| {
            (v + s.value, e + s.error, a + s.abs_value)
        })
    };
    loop {
        let (value, error, abs_value) = totals(&heap);
        let tol = spec.abs_tol.max(spec.rel_tol * abs_value);
        if error <= tol {
            return Ok(Quadrature {
                value,
                abs_error: error,
                subdivisions: heap.len(),
            });
        }
        let worst = *heap.peek().expect("heap never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if heap.len() >= spec.max_subdivisions || !(mid > worst.lo && mid < worst.hi) {
            return Err(Error::Convergence {
                estimate: value,
                error_bound: error,
                subdivisions: heap.len(),
            });
        }
        heap.pop();
        heap.push(kronrod15(&mut f, worst.lo, mid)?);
        heap.push(kronrod15(&mut f, mid, worst.hi)?);
    }
}

/// Integral of `f` over `(0, +inf)`.
///
/// The integrand is only ever evaluated at interior points of the half line.
pub fn integrate_halfline<F: Fn(f64) -> f64>(f: F, spec: &QuadratureSpec) -> Result<Quadrature> {
    // tau = exp(s), s = t / (1 - t^2), t in (-1, 1)
    let mapped = |t: f64| {
        let one_minus = 1.0 - t * t;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let s = t / one_minus;
        if s.abs() > 700.0 {
            return 0.0;
        }
        let tau = s.exp();
        let value = f(tau);
        if value == 0.0 {
            return 0.0;
        }
        value * tau * (1.0 + t * t) / (one_minus * one_minus)
    };
    integrate_interval(mapped, -1.0, 1.0, &[0.0], spec)
}

/// Log of a positive integral, `ln ∫ exp(log_f(x)) dx` over `[lo, hi]`,
/// given the location of the log-integrand's maximum.
#[derive(Debug, Clone, Copy)]
struct LogWindow {
    lo: f64,
    hi: f64,
    peak: f64,
    peak_log: f64,
}

fn golden_max<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Finds where `phi` drops [`LOG_WINDOW`] nats below `peak_log`, stepping away
/// from `peak` in `direction` with doubling steps, never crossing `limit`.
fn window_edge<F: Fn(f64) -> f64>(phi: &F, peak: f64, peak_log: f64, direction: f64, limit: f64) -> f64 {
    let mut step = 1e-6 * peak.abs().max(1.0);
    loop {
        let x = peak + direction * step;
        let beyond = if direction > 0.0 { x >= limit } else { x <= limit };
        if beyond {
            return limit;
        }
        let v = phi(x);
        if !(v > peak_log - LOG_WINDOW) {
            return x;
        }
        step *= 2.0;
    }
}

fn locate_log_window<F: Fn(f64) -> f64>(phi: &F, lo: f64, hi: f64, hint: Option<f64>) -> Result<LogWindow> {
    let peak = match hint {
        Some(p) if p.is_finite() => p.clamp(lo, hi),
        _ => {
            // coarse scan followed by golden-section refinement
            let n = 240;
            let step = (hi - lo) / n as f64;
            let mut best = (lo, f64::NEG_INFINITY);
            for i in 0..=n {
                let x = lo + step * i as f64;
                let v = phi(x);
                if v > best.1 {
                    best = (x, v);
                }
            }
            if !best.1.is_finite() {
                return Err(Error::domain("log quadrature", "log-integrand has no finite value"));
            }
            golden_max(phi, (best.0 - step).max(lo), (best.0 + step).min(hi), 60)
        }
    };
    let peak_log = phi(peak);
    if !peak_log.is_finite() {
        return Err(Error::domain(
            "log quadrature",
            format!("log-integrand is not finite at its peak ({peak:e})"),
        ));
    }
    Ok(LogWindow {
        lo: window_edge(phi, peak, peak_log, -1.0, lo),
        hi: window_edge(phi, peak, peak_log, 1.0, hi),
        peak,
        peak_log,
    })
}

/// `ln ∫_lo^hi exp(phi(x)) dx` for a log-integrand `phi`.
///
/// `peak_hint`, when known analytically, is the maximiser of `phi`.
pub fn log_integrate_interval<F: Fn(f64) -> f64>(
    phi: F,
    lo: f64,
    hi: f64,
    peak_hint: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let w = locate_log_window(&phi, lo, hi, peak_hint)?;
    let q = integrate_interval(
        |x| (phi(x) - w.peak_log).exp(),
        w.lo,
        w.hi,
        &[w.peak],
        spec,
    )?;
    Ok(w.peak_log + q.value.ln())
}

/// `ln ∫_0^inf exp(log_f(tau)) dtau` computed in log domain.
///
/// `mode_hint` is the maximiser of `log_f(tau) + ln(tau)`, i.e. the peak of
/// the integrand after the `tau = exp(s)` substitution, when known.
pub fn log_integrate_halfline<F: Fn(f64) -> f64>(
    log_f: F,
    mode_hint: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let phi = |s: f64| log_f(s.exp()) + s;
    log_integrate_interval(phi, -740.0, 709.0, mode_hint.map(f64::ln), spec)
}

/// Ratio `∫ exp(log_f) * weight / ∫ exp(log_f)` over the half line, i.e. the
/// expectation of `weight` under the (unnormalised) density `exp(log_f)`.
pub fn expectation_halfline<F, W>(
    log_f: F,
    weight: W,
    mode_hint: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    W: Fn(f64) -> f64,
{
    let phi = |s: f64| log_f(s.exp()) + s;
    let w = locate_log_window(&phi, -740.0, 709.0, mode_hint.map(f64::ln))?;
    let norm = integrate_interval(|s| (phi(s) - w.peak_log).exp(), w.lo, w.hi, &[w.peak], spec)?;
    let num = integrate_interval(
        |s| (phi(s) - w.peak_log).exp() * weight(s.exp()),
        w.lo,
        w.hi,
        &[w.peak],
        spec,
    )?;
    Ok(num.value / norm.value)
}
