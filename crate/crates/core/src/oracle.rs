//! Brute-force references for cross-checking the solvers.
//!
//! Substituting the tight load `S = B x` leaves a convex problem in `x` alone:
//! minimize `W(x) = Σ g_i((Bx)_i) + Σ h_i(x_i)` over `x ∈ [0,1]^n` with
//! `(Bx)_i < T_i`. The overload cost already diverges at the threshold, so the
//! feasible minimizer is interior to the load constraints.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::greedy::greedy_derivative;
use crate::model::{routing_matrix, Matrix, SystemInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OracleMethod {
    Grid,
    ProjectedDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub objective: f64,
    pub method: OracleMethod,
    /// Grid spacing, or the stationarity tolerance for descent.
    pub resolution: f64,
    /// Upper bound estimate on `objective - optimum`.
    pub error_bound: f64,
    pub converged: bool,
}

/// Reduced objective over `x` with the per-node cost parameters unpacked once.
struct Objective {
    b: Matrix,
    eta: Vec<f64>,
    t: Vec<f64>,
    gamma: Vec<f64>,
    a: Vec<f64>,
    d: Vec<f64>,
}

impl Objective {
    fn new(instance: &SystemInstance) -> Self {
        Self {
            b: routing_matrix(instance),
            eta: instance.costs().iter().map(|c| c.eta).collect(),
            t: instance.thresholds().to_vec(),
            gamma: instance.costs().iter().map(|c| c.gamma_cost).collect(),
            a: instance.arrivals().to_vec(),
            d: instance.costs().iter().map(|c| c.d).collect(),
        }
    }

    fn n(&self) -> usize {
        self.t.len()
    }

    /// `W(x)`, or `None` when some load reaches its threshold.
    fn value(&self, x: &[f64], s: &mut [f64]) -> Option<f64> {
        self.b.mul_vec_into(x, s);
        let mut w = 0.0;
        for i in 0..self.n() {
            if s[i] >= self.t[i] {
                return None;
            }
            let u = 1.0 - x[i];
            w += self.eta[i] * s[i] / (1.0 - s[i] / self.t[i]) + self.gamma[i] * self.a[i] * u * (self.d[i] + self.a[i] * u);
        }
        Some(w)
    }

    /// `∇W(x)` at a feasible point.
    fn gradient(&self, x: &[f64], s: &[f64], out: &mut [f64]) {
        let n = self.n();
        let gp: Vec<f64> = (0..n)
            .map(|i| {
                let gap = self.t[i] - s[i];
                self.eta[i] * self.t[i] * self.t[i] / (gap * gap)
            })
            .collect();
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += gp[i] * self.b[(i, j)];
            }
            let u = 1.0 - x[j];
            out[j] = acc - self.gamma[j] * self.a[j] * (self.d[j] + 2.0 * self.a[j] * u);
        }
    }

    fn gradient_l1(&self, x: &[f64]) -> f64 {
        let mut s = vec![0.0; self.n()];
        let mut g = vec![0.0; self.n()];
        if self.value(x, &mut s).is_none() {
            return f64::INFINITY;
        }
        self.gradient(x, &s, &mut g);
        g.iter().map(|v| v.abs()).sum()
    }
}

/// Default grid spacing: 1e-3 per axis for `n ≤ 2`, 1e-2 for `n = 3`.
pub fn default_grid_resolution(n: usize) -> f64 {
    if n <= 2 {
        1e-3
    } else {
        1e-2
    }
}

/// Minimum over the box `lo + k·res` (`k = 0..m` per axis), clipped to `[0,1]`.
fn grid_min(obj: &Objective, lo: &[f64], res: f64, m: usize) -> Option<(f64, Vec<f64>)> {
    let n = obj.n();
    let total = m.pow(n as u32);
    let coord = |axis_lo: f64, k: usize| (axis_lo + k as f64 * res).clamp(0.0, 1.0);
    (0..m)
        .into_par_iter()
        .filter_map(|first| {
            let mut x = vec![0.0; n];
            let mut s = vec![0.0; n];
            let mut best: Option<(f64, usize)> = None;
            let inner = total / m;
            for rest in 0..inner {
                let mut idx = rest;
                x[0] = coord(lo[0], first);
                for axis in 1..n {
                    x[axis] = coord(lo[axis], idx % m);
                    idx /= m;
                }
                if let Some(w) = obj.value(&x, &mut s) {
                    let flat = first * inner + rest;
                    if best.is_none_or(|(bw, _)| w < bw) {
                        best = Some((w, flat));
                    }
                }
            }
            best
        })
        .reduce_with(|p, q| if q.0 < p.0 || (q.0 == p.0 && q.1 < p.1) { q } else { p })
        .map(|(w, flat)| {
            let inner = total / m;
            let mut idx = flat % inner;
            let mut x = vec![coord(lo[0], flat / inner); n];
            for axis in 1..n {
                x[axis] = coord(lo[axis], idx % m);
                idx /= m;
            }
            (w, x)
        })
}

/// Exhaustive grid over `[0,1]^n` (`n ≤ 3`) skipping points with `(Bx)_i ≥ T_i`.
pub fn primal_grid_solve(instance: &SystemInstance, resolution: f64) -> Result<OracleResult> {
    primal_grid_refine(instance, resolution, 0)
}

/// Grid solve followed by `levels` zoom passes, each a 41-point-per-axis grid
/// spanning `±2` cells of the previous spacing around the incumbent.
pub fn primal_grid_refine(instance: &SystemInstance, resolution: f64, levels: usize) -> Result<OracleResult> {
    let n = instance.n();
    if n > 3 {
        return Err(Error::Unsupported(format!("grid oracle supports n ≤ 3, got n = {n}")));
    }
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(Error::InvalidArgument(format!("grid resolution must lie in (0, 0.5], got {resolution}")));
    }
    let obj = Objective::new(instance);
    let m = (1.0 / resolution).round() as usize + 1;
    let (mut w, mut x) = grid_min(&obj, &vec![0.0; n], 1.0 / (m - 1) as f64, m)
        .ok_or_else(|| Error::InvalidInstance("no feasible grid point".into()))?;
    let mut res = 1.0 / (m - 1) as f64;
    for _ in 0..levels {
        let fine = res / 10.0;
        let lo: Vec<f64> = x.iter().map(|v| v - 2.0 * res).collect();
        if let Some((w2, x2)) = grid_min(&obj, &lo, fine, 41) {
            if w2 <= w {
                w = w2;
                x = x2;
            }
        }
        res = fine;
    }
    let mut s = vec![0.0; n];
    obj.value(&x, &mut s);
    Ok(OracleResult {
        error_bound: obj.gradient_l1(&x) * res,
        x,
        s,
        objective: w,
        method: OracleMethod::Grid,
        resolution: res,
        converged: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentConfig {
    /// Starting point; infeasible starts are shrunk towards `x = 0`.
    pub start: Option<Vec<f64>>,
    pub barrier_start: f64,
    pub barrier_decay: f64,
    pub barrier_min: f64,
    pub inner_iters: usize,
    pub tol: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            start: None,
            barrier_start: 1e-2,
            barrier_decay: 0.1,
            barrier_min: 1e-12,
            inner_iters: 20_000,
            tol: 1e-11,
        }
    }
}

/// Projected gradient descent on `W(x) - τ Σ log(T_i - (Bx)_i)` with
/// Barzilai-Borwein steps, Armijo backtracking and geometric decay of `τ`.
pub fn primal_projected_descent(instance: &SystemInstance, config: &DescentConfig) -> Result<OracleResult> {
    let n = instance.n();
    let obj = Objective::new(instance);
    let mut s = vec![0.0; n];
    let mut x = match &config.start {
        Some(v) if v.len() != n => {
            return Err(Error::Dimension {
                what: "start",
                got: v.len(),
                expected: n,
            })
        }
        Some(v) => v.iter().map(|x| x.clamp(0.0, 1.0)).collect(),
        None => vec![0.5; n],
    };
    while obj.value(&x, &mut s).is_none() {
        for v in &mut x {
            *v *= 0.5;
        }
    }

    let barrier_value = |x: &[f64], s: &mut [f64], tau: f64| {
        obj.value(x, s)
            .map(|w| w - tau * s.iter().zip(&obj.t).map(|(si, ti)| (ti - si).ln()).sum::<f64>())
    };
    let barrier_grad = |x: &[f64], s: &[f64], tau: f64, out: &mut [f64]| {
        obj.gradient(x, s, out);
        for j in 0..n {
            let mut acc = 0.0;
            for i in 0..n {
                acc += obj.b[(i, j)] / (obj.t[i] - s[i]);
            }
            out[j] += tau * acc;
        }
    };

    let mut tau = config.barrier_start;
    let mut g = vec![0.0; n];
    let mut g_prev = vec![0.0; n];
    let mut x_prev = x.clone();
    let mut trial = vec![0.0; n];
    let mut s_trial = vec![0.0; n];
    let converged = loop {
        let mut step = 1e-2;
        let mut f = barrier_value(&x, &mut s, tau).expect("iterate is feasible");
        barrier_grad(&x, &s, tau, &mut g);
        let mut stationary = false;
        for it in 0..config.inner_iters {
            if it > 0 {
                let (mut sy, mut ss) = (0.0, 0.0);
                for j in 0..n {
                    let dx = x[j] - x_prev[j];
                    sy += dx * (g[j] - g_prev[j]);
                    ss += dx * dx;
                }
                if sy > 0.0 {
                    step = (ss / sy).clamp(1e-12, 1e6);
                }
            }
            let mut accepted = false;
            for _ in 0..80 {
                for j in 0..n {
                    trial[j] = (x[j] - step * g[j]).clamp(0.0, 1.0);
                }
                if let Some(ft) = barrier_value(&trial, &mut s_trial, tau) {
                    let decrease: f64 = (0..n).map(|j| g[j] * (x[j] - trial[j])).sum();
                    if ft <= f - 1e-4 * decrease {
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                stationary = true;
                break;
            }
            let moved = x.iter().zip(&trial).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            x_prev.copy_from_slice(&x);
            g_prev.copy_from_slice(&g);
            x.copy_from_slice(&trial);
            s.copy_from_slice(&s_trial);
            f = barrier_value(&x, &mut s, tau).expect("accepted iterate is feasible");
            barrier_grad(&x, &s, tau, &mut g);
            // Projected-gradient residual with unit step.
            let resid = (0..n).fold(0.0f64, |m, j| m.max((x[j] - (x[j] - g[j]).clamp(0.0, 1.0)).abs()));
            if resid < config.tol || moved == 0.0 {
                stationary = true;
                break;
            }
        }
        if tau <= config.barrier_min {
            break stationary;
        }
        tau *= config.barrier_decay;
    };
    let objective = obj.value(&x, &mut s).expect("final iterate is feasible");
    Ok(OracleResult {
        x,
        s,
        objective,
        method: OracleMethod::ProjectedDescent,
        resolution: config.tol,
        error_bound: tau * n as f64,
        converged,
    })
}

/// Central differences of the greedy field with spacing `step`.
pub fn finite_diff_jacobian(instance: &SystemInstance, x: &[f64], sensitivity: f64, step: f64) -> Result<Matrix> {
    let n = instance.n();
    if x.len() != n {
        return Err(Error::Dimension {
            what: "x",
            got: x.len(),
            expected: n,
        });
    }
    if let Some((index, &value)) = x.iter().enumerate().find(|(_, v)| !(**v >= step && **v <= 1.0 - step)) {
        return Err(Error::BoundaryStart { index, value });
    }
    let mut j = Matrix::zeros(n);
    let mut xp = x.to_vec();
    for k in 0..n {
        xp[k] = x[k] + step;
        let fp = greedy_derivative(instance, &xp, sensitivity);
        xp[k] = x[k] - step;
        let fm = greedy_derivative(instance, &xp, sensitivity);
        xp[k] = x[k];
        for i in 0..n {
            j[(i, k)] = (fp[i] - fm[i]) / (2.0 * step);
        }
    }
    Ok(j)
}

/// `max |a - b| / max |a|`, with `max |a|` floored at `f64::MIN_POSITIVE`.
pub fn max_relative_error(a: &Matrix, b: &Matrix) -> f64 {
    let n = a.dim();
    let mut diff = 0.0f64;
    for i in 0..n {
        for k in 0..n {
            diff = diff.max((a[(i, k)] - b[(i, k)]).abs());
        }
    }
    diff / a.max_abs().max(f64::MIN_POSITIVE)
}
