//! The greedy local heuristic as a damped ODE.
//!
//! Each node nudges its offload probability against its own overload:
//! `dx_i/dt = -β R(x_i) (B x - T)_i` with `R(x) = x (1 - x)`. The damping factor
//! vanishes on the faces of the unit hypercube, which keeps trajectories started
//! in the interior inside it for all time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{routing_matrix, Matrix, SystemInstance};

/// Post-step clamp margin; the clamp is a numerical guard only.
pub const CLAMP_MARGIN: f64 = 1e-15;
/// Default tolerance on `S_i - T_i` for calling a node overloaded.
pub const DEFAULT_OVERLOAD_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    pub sensitivity: f64,
    /// Fixed RK4 step. `None` selects `0.01 / (sensitivity · max(1, max_j A_j))`.
    pub step: Option<f64>,
    pub horizon: f64,
    /// Threshold on `‖dx/dt‖∞`.
    pub conv_tol: f64,
    /// Consecutive steps below `conv_tol` required to declare convergence.
    pub conv_window: usize,
    pub boundary_eps: f64,
    pub overload_tol: f64,
    /// Upper bound on stored samples; older samples are thinned by halves.
    pub max_samples: usize,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            sensitivity: 1.0,
            step: None,
            horizon: 1e4,
            conv_tol: 1e-8,
            conv_window: 100,
            boundary_eps: 1e-3,
            overload_tol: DEFAULT_OVERLOAD_TOL,
            max_samples: 10_000,
        }
    }
}

impl GreedyConfig {
    pub fn step_for(&self, instance: &SystemInstance) -> f64 {
        self.step.unwrap_or_else(|| {
            let a_max = instance.arrivals().iter().copied().fold(1.0, f64::max);
            0.01 / (self.sensitivity * a_max)
        })
    }

    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("sensitivity", self.sensitivity)?;
        if let Some(h) = self.step {
            positive("step", h)?;
        }
        positive("horizon", self.horizon)?;
        positive("conv_tol", self.conv_tol)?;
        positive("overload_tol", self.overload_tol)?;
        if !(self.boundary_eps > 0.0 && self.boundary_eps < 0.5) {
            return Err(Error::InvalidArgument(format!(
                "boundary_eps must lie in (0, 0.5), got {}",
                self.boundary_eps
            )));
        }
        if self.conv_window == 0 || self.max_samples < 2 {
            return Err(Error::InvalidArgument("conv_window must be ≥ 1 and max_samples ≥ 2".into()));
        }
        Ok(())
    }
}

/// `R(x) = x (1 - x)`.
#[inline]
pub fn logistic_damping(x: f64) -> f64 {
    x * (1.0 - x)
}

/// `dx/dt = -β R(x) ∘ (B x - T)`.
pub fn greedy_derivative(instance: &SystemInstance, x: &[f64], sensitivity: f64) -> Vec<f64> {
    let s = routing_matrix(instance).mul_vec(x);
    (0..instance.n())
        .map(|i| -sensitivity * logistic_damping(x[i]) * (s[i] - instance.thresholds()[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    /// `∫_0^t S(τ) dτ`, integrated alongside `x` with the same RK4 weights.
    pub load_integral: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Converged { x: Vec<f64>, s: Vec<f64> },
    HorizonReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SteadyClass {
    Interior,
    AtZero,
    AtOne,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub verdict: Verdict,
    pub classes: Vec<SteadyClass>,
    pub step: f64,
    pub steps: usize,
    /// Largest pre-clamp distance of any coordinate outside `[0, 1]`.
    pub max_excursion: f64,
    /// Steps on which the clamp moved at least one coordinate.
    pub clamp_activations: usize,
    /// Largest single clamp displacement.
    pub max_clamp: f64,
}

impl Trajectory {
    pub fn is_converged(&self) -> bool {
        matches!(self.verdict, Verdict::Converged { .. })
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("a trajectory has at least one sample")
    }

    pub fn final_x(&self) -> &[f64] {
        &self.last().x
    }

    pub fn final_s(&self) -> &[f64] {
        &self.last().s
    }

    /// Sum of `‖x(t_{k+1}) - x(t_k)‖₁` over samples with `t ≥ (1 - fraction) t_end`.
    pub fn tail_total_variation(&self, fraction: f64) -> f64 {
        let t_end = self.last().t;
        let t0 = (1.0 - fraction) * t_end;
        let tail: Vec<&Sample> = self.samples.iter().filter(|s| s.t >= t0).collect();
        tail.windows(2)
            .map(|w| w[0].x.iter().zip(&w[1].x).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .sum()
    }

    /// Latest sample pair `(t0, t_end)` with `t_end - t0 ≥ min_gap` whose states
    /// agree within `tol` in the sup norm, searching backwards from the end.
    pub fn find_recurrence(&self, tol: f64, min_gap: f64) -> Option<(f64, f64)> {
        let end = self.last();
        self.samples
            .iter()
            .rev()
            .filter(|s| end.t - s.t >= min_gap)
            .find(|s| s.x.iter().zip(&end.x).all(|(a, b)| (a - b).abs() < tol))
            .map(|s| (s.t, end.t))
    }
}

/// Arrival rates as a function of time.
pub trait Arrivals {
    fn at(&self, t: f64, out: &mut [f64]);
}

/// Constant arrivals.
pub struct Constant<'a>(pub &'a [f64]);

impl Arrivals for Constant<'_> {
    fn at(&self, _t: f64, out: &mut [f64]) {
        out.copy_from_slice(self.0);
    }
}

impl<F: Fn(f64, &mut [f64])> Arrivals for F {
    fn at(&self, t: f64, out: &mut [f64]) {
        self(t, out)
    }
}

struct Field<'a, A: Arrivals, R: Fn(f64) -> f64> {
    ct: Matrix,
    thresholds: &'a [f64],
    sensitivity: f64,
    arrivals: A,
    damping: R,
    a_buf: Vec<f64>,
    y_buf: Vec<f64>,
}

impl<A: Arrivals, R: Fn(f64) -> f64> Field<'_, A, R> {
    /// Writes `dx/dt` and `S` at `(t, x)`.
    fn eval(&mut self, t: f64, x: &[f64], dx: &mut [f64], s: &mut [f64]) {
        self.arrivals.at(t, &mut self.a_buf);
        for ((y, a), xi) in self.y_buf.iter_mut().zip(&self.a_buf).zip(x) {
            *y = a * xi;
        }
        self.ct.mul_vec_into(&self.y_buf, s);
        for i in 0..x.len() {
            dx[i] = -self.sensitivity * (self.damping)(x[i]) * (s[i] - self.thresholds[i]);
        }
    }
}

fn check_start(x0: &[f64], n: usize) -> Result<()> {
    if x0.len() != n {
        return Err(Error::Dimension {
            what: "x0",
            got: x0.len(),
            expected: n,
        });
    }
    for (index, &value) in x0.iter().enumerate() {
        if !(value > 0.0 && value < 1.0) {
            return Err(Error::BoundaryStart { index, value });
        }
    }
    Ok(())
}

fn classify(x: &[f64], eps: f64) -> Vec<SteadyClass> {
    x.iter()
        .map(|&v| {
            if v <= eps {
                SteadyClass::AtZero
            } else if v >= 1.0 - eps {
                SteadyClass::AtOne
            } else {
                SteadyClass::Interior
            }
        })
        .collect()
}

/// Integrates from `x0` with the instance's constant arrivals.
pub fn integrate(instance: &SystemInstance, x0: &[f64], config: &GreedyConfig) -> Result<Trajectory> {
    integrate_with(instance, x0, config, Constant(instance.arrivals()), logistic_damping)
}

/// Integrates under time-varying arrivals `A(t)`.
pub fn integrate_forced<A: Arrivals>(
    instance: &SystemInstance,
    x0: &[f64],
    config: &GreedyConfig,
    arrivals: A,
) -> Result<Trajectory> {
    integrate_with(instance, x0, config, arrivals, logistic_damping)
}

/// Fixed-step RK4 with an arbitrary damping function `R` (`R(0) = R(1) = 0`).
pub fn integrate_with<A: Arrivals, R: Fn(f64) -> f64>(
    instance: &SystemInstance,
    x0: &[f64],
    config: &GreedyConfig,
    arrivals: A,
    damping: R,
) -> Result<Trajectory> {
    config.check()?;
    let n = instance.n();
    check_start(x0, n)?;
    let h = config.step_for(instance);
    let total_steps = (config.horizon / h).ceil() as usize;
    let mut field = Field {
        ct: instance.corr().transpose(),
        thresholds: instance.thresholds(),
        sensitivity: config.sensitivity,
        arrivals,
        damping,
        a_buf: vec![0.0; n],
        y_buf: vec![0.0; n],
    };

    let mut x = x0.to_vec();
    let mut integral = vec![0.0; n];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut s1, mut s2, mut s3, mut s4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];

    let mut samples = Vec::new();
    let mut stride = 1usize;
    let mut below = 0usize;
    let mut converged = false;
    let mut max_excursion = 0.0f64;
    let mut clamp_activations = 0usize;
    let mut max_clamp = 0.0f64;
    let mut k = 0usize;

    loop {
        let t = k as f64 * h;
        field.eval(t, &x, &mut k1, &mut s1);
        if k.is_multiple_of(stride) {
            samples.push(Sample {
                t,
                x: x.clone(),
                s: s1.clone(),
                load_integral: integral.clone(),
            });
            if samples.len() > config.max_samples {
                let mut idx = 0;
                samples.retain(|_| {
                    idx += 1;
                    (idx - 1) % 2 == 0
                });
                stride *= 2;
            }
        }
        let speed = k1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        below = if speed < config.conv_tol { below + 1 } else { 0 };
        if below >= config.conv_window {
            converged = true;
            break;
        }
        if k >= total_steps {
            break;
        }

        for i in 0..n {
            stage[i] = x[i] + 0.5 * h * k1[i];
        }
        field.eval(t + 0.5 * h, &stage, &mut k2, &mut s2);
        for i in 0..n {
            stage[i] = x[i] + 0.5 * h * k2[i];
        }
        field.eval(t + 0.5 * h, &stage, &mut k3, &mut s3);
        for i in 0..n {
            stage[i] = x[i] + h * k3[i];
        }
        field.eval(t + h, &stage, &mut k4, &mut s4);

        let mut clamped = false;
        for i in 0..n {
            let raw = x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            integral[i] += h / 6.0 * (s1[i] + 2.0 * s2[i] + 2.0 * s3[i] + s4[i]);
            max_excursion = max_excursion.max(-raw).max(raw - 1.0);
            let c = raw.clamp(CLAMP_MARGIN, 1.0 - CLAMP_MARGIN);
            if c != raw {
                clamped = true;
                max_clamp = max_clamp.max((c - raw).abs());
            }
            x[i] = c;
        }
        clamp_activations += usize::from(clamped);
        k += 1;
    }

    let t_end = k as f64 * h;
    if samples.last().map(|s| s.t) != Some(t_end) {
        if samples.len() >= config.max_samples {
            samples.pop();
        }
        samples.push(Sample {
            t: t_end,
            x: x.clone(),
            s: s1.clone(),
            load_integral: integral.clone(),
        });
    }
    let verdict = if converged {
        Verdict::Converged {
            x: x.clone(),
            s: s1.clone(),
        }
    } else {
        Verdict::HorizonReached
    };
    Ok(Trajectory {
        classes: classify(&x, config.boundary_eps),
        samples,
        verdict,
        step: h,
        steps: k,
        max_excursion,
        clamp_activations,
        max_clamp,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeStatus {
    Ok,
    OverloadedControllable,
    Uncontrollable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverloadReport {
    pub status: Vec<NodeStatus>,
    /// Set when the trajectory never converged; `status` then describes the last state only.
    pub indeterminate: bool,
}

impl OverloadReport {
    pub fn uncontrollable_count(&self) -> usize {
        self.status.iter().filter(|s| **s == NodeStatus::Uncontrollable).count()
    }

    pub fn uncontrollable_nodes(&self) -> Vec<usize> {
        (0..self.status.len())
            .filter(|&i| self.status[i] == NodeStatus::Uncontrollable)
            .collect()
    }
}

/// Locally uncontrollable overload: `S_i > T_i + tol` with `x_i ≤ boundary_eps`.
pub fn detect_uncontrollable(
    trajectory: &Trajectory,
    instance: &SystemInstance,
    boundary_eps: f64,
    tol: f64,
) -> OverloadReport {
    let x = trajectory.final_x();
    let s = trajectory.final_s();
    let status = (0..instance.n())
        .map(|i| {
            if s[i] > instance.thresholds()[i] + tol {
                if x[i] <= boundary_eps {
                    NodeStatus::Uncontrollable
                } else {
                    NodeStatus::OverloadedControllable
                }
            } else {
                NodeStatus::Ok
            }
        })
        .collect();
    OverloadReport {
        status,
        indeterminate: !trajectory.is_converged(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeAverage {
    pub t0: f64,
    pub t1: f64,
    pub mean_load: Vec<f64>,
    /// `S̄_i - T_i`.
    pub deviation: Vec<f64>,
    /// Set when some sample in the window lies within `boundary_eps` of a face.
    pub touches_boundary: bool,
}

/// `(1/τ) ∫ S dt` over the sample window `[t0, t1]`, from the RK4 load integral.
pub fn time_average_check(
    instance: &SystemInstance,
    trajectory: &Trajectory,
    t0: f64,
    t1: f64,
    boundary_eps: f64,
) -> Result<TimeAverage> {
    let find = |t: f64| {
        trajectory
            .samples
            .iter()
            .find(|s| s.t == t)
            .ok_or_else(|| Error::InvalidArgument(format!("no sample at t = {t}")))
    };
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("empty window [{t0}, {t1}]")));
    }
    let (a, b) = (find(t0)?, find(t1)?);
    let tau = t1 - t0;
    let mean_load: Vec<f64> = a.load_integral.iter().zip(&b.load_integral).map(|(p, q)| (q - p) / tau).collect();
    let deviation = mean_load.iter().zip(instance.thresholds()).map(|(s, t)| s - t).collect();
    let touches_boundary = trajectory
        .samples
        .iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .any(|s| s.x.iter().any(|&v| v <= boundary_eps || v >= 1.0 - boundary_eps));
    Ok(TimeAverage {
        t0,
        t1,
        mean_load,
        deviation,
        touches_boundary,
    })
}

/// Cell-centred `res × res` grid of `(x1, x2, dx1/dt, dx2/dt)` for two-node instances.
pub fn vector_field(instance: &SystemInstance, sensitivity: f64, res: usize) -> Result<Vec<[f64; 4]>> {
    if instance.n() != 2 {
        return Err(Error::Unsupported(format!("vector field needs n = 2, got n = {}", instance.n())));
    }
    if res == 0 {
        return Err(Error::InvalidArgument("resolution must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(res * res);
    for i in 0..res {
        for j in 0..res {
            let x = [(i as f64 + 0.5) / res as f64, (j as f64 + 0.5) / res as f64];
            let d = greedy_derivative(instance, &x, sensitivity);
            out.push([x[0], x[1], d[0], d[1]]);
        }
    }
    Ok(out)
}

/// Trajectory as CSV: `t,x_1..x_n,S_1..S_n`.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let n = trajectory.last().x.len();
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x_{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",S_{i}"));
    }
    out.push('\n');
    for s in &trajectory.samples {
        out.push_str(&s.t.to_string());
        for v in s.x.iter().chain(&s.s) {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}
