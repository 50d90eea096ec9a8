//! Per-node cost functions and their one-dimensional subproblem minimizers.
//!
//! The proxy cost is the M/G/1 aggregate delay `g(S) = η S / (1 - S/T)` and the
//! offload cost is `h(x) = γ A (1-x)(d + A(1-x))`. Both subproblems of the dual
//! decomposition have closed forms for these families; [`LoadCost`] and
//! [`OffloadPenalty`] let callers plug in other convex costs, which are then
//! minimized numerically by [`minimize_1d`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{NodeCost, SystemInstance};

/// Cost value that keeps overload distinct from arithmetic infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CostValue {
    Finite(f64),
    Overload,
}

impl CostValue {
    pub fn is_overload(self) -> bool {
        matches!(self, CostValue::Overload)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            CostValue::Finite(v) => Some(v),
            CostValue::Overload => None,
        }
    }

    /// Value for minimization: overload maps to `+∞`.
    pub fn or_infinity(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Overload absorbs.
impl std::ops::Add for CostValue {
    type Output = CostValue;

    fn add(self, other: CostValue) -> CostValue {
        match (self, other) {
            (CostValue::Finite(a), CostValue::Finite(b)) => CostValue::Finite(a + b),
            _ => CostValue::Overload,
        }
    }
}

/// Proxy delay cost `g(S) = η S / (1 - S/T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverloadCost {
    pub eta: f64,
    pub threshold: f64,
}

/// Secondary-layer latency cost `h(x) = γ A (1-x)(d + A(1-x))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffloadCost {
    pub gamma_cost: f64,
    pub arrival: f64,
    pub d: f64,
}

impl OverloadCost {
    pub fn for_node(instance: &SystemInstance, i: usize) -> Self {
        Self {
            eta: instance.costs()[i].eta,
            threshold: instance.thresholds()[i],
        }
    }
}

impl OffloadCost {
    pub fn for_node(instance: &SystemInstance, i: usize) -> Self {
        let NodeCost { gamma_cost, d, .. } = instance.costs()[i];
        Self {
            gamma_cost,
            arrival: instance.arrivals()[i],
            d,
        }
    }
}

pub fn eval_g(cost: &OverloadCost, s: f64) -> Result<CostValue> {
    if !(s >= 0.0) {
        return Err(Error::InvalidArgument(format!("load {s} is negative")));
    }
    if s >= cost.threshold {
        return Ok(CostValue::Overload);
    }
    Ok(CostValue::Finite(cost.eta * s / (1.0 - s / cost.threshold)))
}

pub fn eval_h(cost: &OffloadCost, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidArgument(format!("offload probability {x} is outside [0, 1]")));
    }
    let u = 1.0 - x;
    Ok(cost.gamma_cost * cost.arrival * u * (cost.d + cost.arrival * u))
}

/// `argmin_{0 ≤ S ≤ T} g(S) - μ S = T max(0, 1 - √(η/μ))`.
pub fn solve_s_subproblem(cost: &OverloadCost, mu: f64) -> f64 {
    if mu <= cost.eta {
        // Covers μ = 0, where the closed form divides by zero.
        return 0.0;
    }
    cost.threshold * (1.0 - (cost.eta / mu).sqrt())
}

/// Minimizer of `h(x) + A β x` over `[0, 1]`, the three-branch closed form with
/// `c1 = A γ` and `c2 = γ d - β`.
pub fn solve_x_subproblem(cost: &OffloadCost, beta: f64) -> f64 {
    if cost.arrival == 0.0 {
        // Objective is identically zero; keep the traffic in the primary layer.
        return 1.0;
    }
    let c1 = cost.arrival * cost.gamma_cost;
    let c2 = cost.gamma_cost * cost.d - beta;
    if c2 > 0.0 {
        1.0
    } else if 2.0 * c1 >= -c2 {
        1.0 + c2 / (2.0 * c1)
    } else {
        0.0
    }
}

/// Optimal value of the load subproblem, `min_{0 ≤ S ≤ T} g(S) - μ S`.
pub fn s_subproblem_value(cost: &OverloadCost, mu: f64) -> f64 {
    let s = solve_s_subproblem(cost, mu);
    eval_g(cost, s).map(CostValue::or_infinity).unwrap_or(f64::INFINITY) - mu * s
}

/// Optimal value of the offload subproblem, `min_{0 ≤ x ≤ 1} h(x) + A β x`.
pub fn x_subproblem_value(cost: &OffloadCost, beta: f64) -> f64 {
    let x = solve_x_subproblem(cost, beta);
    eval_h(cost, x).unwrap_or(f64::INFINITY) + cost.arrival * beta * x
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section search for the minimizer of a convex `f` on `[lo, hi]`,
/// to an absolute tolerance of `1e-10` in the argument. `f` may return `+∞`
/// on part of the interval (e.g. at a pole).
pub fn minimize_1d<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
    }
    const TOL: f64 = 1e-10;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    // Endpoints are never probed by the bracketing; check them explicitly.
    let best = [(lo, f(lo)), (mid, f(mid)), (hi, f(hi))]
        .into_iter()
        .fold((mid, f64::INFINITY), |acc, (x, v)| if v < acc.1 { (x, v) } else { acc });
    Ok(best.0)
}

/// A convex proxy cost with a capacity; the subproblem falls back to
/// [`minimize_1d`] unless overridden.
pub trait LoadCost {
    fn threshold(&self) -> f64;
    fn eval(&self, s: f64) -> CostValue;
    fn penalized_argmin(&self, mu: f64) -> f64 {
        minimize_1d(|s| self.eval(s).or_infinity() - mu * s, 0.0, self.threshold()).unwrap_or(0.0)
    }
}

/// A convex offload cost on `[0, 1]`; the coupled subproblem falls back to
/// [`minimize_1d`] unless overridden.
pub trait OffloadPenalty {
    fn arrival(&self) -> f64;
    fn eval(&self, x: f64) -> f64;
    fn coupled_argmin(&self, beta: f64) -> f64 {
        let a = self.arrival();
        minimize_1d(|x| self.eval(x) + a * beta * x, 0.0, 1.0).unwrap_or(1.0)
    }
}

impl LoadCost for OverloadCost {
    fn threshold(&self) -> f64 {
        self.threshold
    }
    fn eval(&self, s: f64) -> CostValue {
        eval_g(self, s.max(0.0)).unwrap_or(CostValue::Overload)
    }
    fn penalized_argmin(&self, mu: f64) -> f64 {
        solve_s_subproblem(self, mu)
    }
}

impl OffloadPenalty for OffloadCost {
    fn arrival(&self) -> f64 {
        self.arrival
    }
    fn eval(&self, x: f64) -> f64 {
        eval_h(self, x.clamp(0.0, 1.0)).unwrap_or(f64::INFINITY)
    }
    fn coupled_argmin(&self, beta: f64) -> f64 {
        solve_x_subproblem(self, beta)
    }
}

/// Primal objective `W(x, S) = Σ g_i(S_i) + h_i(x_i)`.
pub fn total_cost(instance: &SystemInstance, x: &[f64], s: &[f64]) -> CostValue {
    let mut total = CostValue::Finite(0.0);
    for i in 0..instance.n() {
        let g = eval_g(&OverloadCost::for_node(instance, i), s[i].max(0.0)).unwrap_or(CostValue::Overload);
        let h = eval_h(&OffloadCost::for_node(instance, i), x[i].clamp(0.0, 1.0)).unwrap_or(f64::INFINITY);
        total = total + g + CostValue::Finite(h);
    }
    total
}
