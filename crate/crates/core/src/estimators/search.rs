use std::cell::Cell;
use std::f64::consts::FRAC_PI_2;

use super::{max_angle_change, EstimatorConfig};
use crate::error::{Error, Result};

/// Cost over one (DOD, DOA) pair with every other target held fixed.
pub trait PairEvaluator {
    fn eval(&self, dod: f64, doa: f64) -> f64;

    /// Minimum over the square grid `grid x grid`, as `(value, dod, doa)`.
    fn scan(&self, grid: &[f64]) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, grid[0], grid[0]);
        for &dod in grid {
            for &doa in grid {
                let v = self.eval(dod, doa);
                if v < best.0 {
                    best = (v, dod, doa);
                }
            }
        }
        best
    }
}

/// A cost over `2K` interleaved angles; lower is better.
pub trait ThetaObjective {
    fn num_targets(&self) -> usize;

    fn eval(&self, theta: &[f64]) -> f64;

    /// Evaluator for one extra pair next to the pairs in `fixed`, which may
    /// hold fewer than `K - 1` targets. `None` when only complete angle
    /// vectors can be scored.
    fn reduced(&self, _fixed: &[f64]) -> Option<Box<dyn PairEvaluator + '_>> {
        None
    }
}

struct FullPair<'a, O: ThetaObjective + ?Sized> {
    objective: &'a O,
    theta: Vec<f64>,
    index: usize,
    scratch: Cell<Option<Vec<f64>>>,
}

impl<O: ThetaObjective + ?Sized> PairEvaluator for FullPair<'_, O> {
    fn eval(&self, dod: f64, doa: f64) -> f64 {
        let mut theta = self.scratch.take().unwrap_or_else(|| self.theta.clone());
        theta[2 * self.index] = dod;
        theta[2 * self.index + 1] = doa;
        let v = self.objective.eval(&theta);
        self.scratch.set(Some(theta));
        v
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub theta: Vec<f64>,
    pub value: f64,
    /// The two sweeps disagreed by more than one grid step.
    pub multimodal: bool,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct NelderMeadOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Downhill simplex from `x0` with initial edge `step`, stopping when every
/// vertex lies within `tol` of the best one or after at most `budget`
/// evaluations.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    tol: f64,
    budget: usize,
) -> NelderMeadOutcome {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < tol || evals + n + 2 > budget {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let reflected = combine(&centroid, &worst.0, -1.0);
        let fr = eval(&reflected, &mut evals);
        if fr < simplex[0].1 {
            let expanded = combine(&centroid, &worst.0, -2.0);
            let fe = eval(&expanded, &mut evals);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let (target, ft) = if fr < worst.1 { (&reflected, fr) } else { (&worst.0, worst.1) };
            let contracted = combine(&centroid, target, 0.5);
            let fc = eval(&contracted, &mut evals);
            if fc < ft {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &vertex.0, 0.5);
                    let v = eval(&x, &mut evals);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    NelderMeadOutcome {
        x,
        value,
        evaluations: evals,
    }
}

/// Angle grid strictly inside `(-90°, 90°)` with spacing `step` radians.
pub(crate) fn angle_grid(step: f64) -> Vec<f64> {
    let step_deg = step.to_degrees();
    (1..)
        .map(|i| -90.0 + step_deg * i as f64)
        .take_while(|d| *d < 90.0 - 1e-9)
        .map(f64::to_radians)
        .collect()
}

/// Grid scan followed by a simplex polish of one pair; `(value, dod, doa, evaluations)`.
fn search_pair(eval: &dyn PairEvaluator, grid: &[f64], config: &EstimatorConfig) -> (f64, f64, f64, usize) {
    let (grid_value, dod, doa) = eval.scan(grid);
    let bounded = |x: &[f64]| {
        if x[0].abs() >= FRAC_PI_2 || x[1].abs() >= FRAC_PI_2 {
            f64::INFINITY
        } else {
            eval.eval(x[0], x[1])
        }
    };
    let polish = nelder_mead(
        bounded,
        &[dod, doa],
        0.5 * config.grid_step_rad(),
        0.1 * config.refine_tol_rad(),
        config.polish_budget - 2,
    );
    let evaluations = grid.len() * grid.len() + polish.evaluations;
    if polish.value <= grid_value {
        (polish.value, polish.x[0], polish.x[1], evaluations)
    } else {
        (grid_value, dod, doa, evaluations)
    }
}

fn without_pair(theta: &[f64], j: usize) -> Vec<f64> {
    theta
        .chunks(2)
        .enumerate()
        .filter(|(i, _)| *i != j)
        .flat_map(|(_, p)| p.iter().copied())
        .collect()
}

/// Alternating per-target minimisation: a first sweep adds targets one at a
/// time, a second sweep revisits each with the others fixed. Every target
/// search is a grid scan plus a simplex polish. A `start` vector is returned
/// instead when it scores better.
pub fn minimize_theta<O: ThetaObjective + ?Sized>(
    objective: &O,
    config: &EstimatorConfig,
    start: Option<&[f64]>,
) -> Result<SearchOutcome> {
    config.validate()?;
    let k = objective.num_targets();
    if k == 0 {
        return Err(Error::domain("minimize_theta", "need at least one target"));
    }
    if let Some(s) = start {
        if s.len() != 2 * k {
            return Err(Error::Dimension {
                expected: 2 * k,
                found: s.len(),
            });
        }
    }
    let grid = angle_grid(config.grid_step_rad());
    let mut theta = start.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; 2 * k]);
    let mut evaluations = 0;
    let pair_evaluator = |theta: &[f64], j: usize, fixed: &[f64]| -> Box<dyn PairEvaluator + '_> {
        objective.reduced(fixed).unwrap_or_else(|| {
            Box::new(FullPair {
                objective,
                theta: theta.to_vec(),
                index: j,
                scratch: Cell::new(None),
            })
        })
    };

    for j in 0..k {
        let eval = pair_evaluator(&theta, j, &theta[..2 * j]);
        let (_, dod, doa, n) = search_pair(eval.as_ref(), &grid, config);
        evaluations += n;
        theta[2 * j] = dod;
        theta[2 * j + 1] = doa;
    }
    let first_sweep = theta.clone();

    if k > 1 {
        for j in 0..k {
            let others = without_pair(&theta, j);
            let eval = pair_evaluator(&theta, j, &others);
            let current = eval.eval(theta[2 * j], theta[2 * j + 1]);
            let (value, dod, doa, n) = search_pair(eval.as_ref(), &grid, config);
            evaluations += n + 1;
            if value < current {
                theta[2 * j] = dod;
                theta[2 * j + 1] = doa;
            }
        }
    }

    let mut value = objective.eval(&theta);
    evaluations += 1;
    if let Some(s) = start {
        let start_value = objective.eval(s);
        evaluations += 1;
        if start_value <= value || !value.is_finite() {
            theta = s.to_vec();
            value = start_value;
        }
    }
    Ok(SearchOutcome {
        multimodal: max_angle_change(&first_sweep, &theta) > config.grid_step_rad(),
        theta,
        value,
        evaluations,
    })
}
