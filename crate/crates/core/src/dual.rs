//! Distributed dual-decomposition solver.
//!
//! Relaxing the coupling constraints `Σ_j C_ji A_j x_j ≤ S_i` with multipliers
//! `μ ≥ 0` splits the Lagrangian into per-node problems in `S_i` and `x_i`,
//! coupled only through `β_i = Σ_j C_ij μ_j`. Each iteration every node solves
//! its two scalar subproblems, observes its proxy load `S_obs = B x*`, and takes a
//! projected supergradient step `μ ← (μ + α (S_obs - S*))⁺`.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{self, CostValue, OffloadCost, OverloadCost};
use crate::error::{Error, Result};
use crate::fastcontrol::{self, ChannelConfig, ChannelMode};
use crate::model::{routing_matrix, Matrix, SystemInstance};
use crate::numeric::dot_rounded;

/// Iterations stored verbatim before the history is thinned to every 10th.
pub const HISTORY_FULL_PREFIX: usize = 10_000;
pub const DEFAULT_WINDOW: usize = 200;
pub const DEFAULT_WINDOW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum StepRule {
    /// `α = 2ε / (A_max² + N T_max²)` with `A_max = Σ A_i`, `T_max = max T_i`.
    FromEpsilon,
    /// `α = 1 / L̂`, with `L̂` an upper bound on the Lipschitz constant of the dual
    /// gradient for the built-in cost families. See [`smooth_step_size`].
    Smooth,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaMode {
    Exact,
    FastControl(ChannelConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualConfig {
    pub epsilon: f64,
    pub step: StepRule,
    pub max_iters: usize,
    pub beta_mode: BetaMode,
    /// Stop once the best dual value improves by less than
    /// `window_tol · (1 + |best|)` over this many iterations.
    pub window: usize,
    pub window_tol: f64,
    /// Primal optimum from an oracle; enables the gap column of the history.
    pub reference_optimum: Option<f64>,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            step: StepRule::FromEpsilon,
            max_iters: 2_000_000,
            beta_mode: BetaMode::Exact,
            window: DEFAULT_WINDOW,
            window_tol: DEFAULT_WINDOW_TOL,
            reference_optimum: None,
        }
    }
}

impl DualConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn step_size(&self, instance: &SystemInstance) -> f64 {
        match self.step {
            StepRule::FromEpsilon => step_size_for_epsilon(instance, self.epsilon),
            StepRule::Smooth => smooth_step_size(instance),
            StepRule::Explicit(a) => a,
        }
    }

    fn check(&self, instance: &SystemInstance) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        let alpha = self.step_size(instance);
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {alpha}")));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be at least 1".into()));
        }
        if let BetaMode::FastControl(ch) = &self.beta_mode {
            ch.check()?;
        }
        Ok(())
    }
}

/// Squared supergradient bound `A_max² + N T_max²`.
pub fn supergradient_bound(instance: &SystemInstance) -> f64 {
    let a_max = instance.total_arrivals();
    let t_max = instance.max_threshold();
    a_max * a_max + instance.n() as f64 * t_max * t_max
}

pub fn step_size_for_epsilon(instance: &SystemInstance, epsilon: f64) -> f64 {
    2.0 * epsilon / supergradient_bound(instance)
}

/// `1 / (‖C‖₁‖C‖∞ / (2 min γ) + max T / (2 min η))`.
///
/// The dual gradient is `B x*(Cμ) - S*(μ)`. Where the offload subproblem is
/// interior, `dx*_i/dβ_i = -1/(2 A_i γ_i)`, so the first term has Jacobian
/// `-Cᵀ diag(1/(2γ)) C`; the load minimizer has `dS*/dμ = T √η / (2 μ^{3/2}) ≤ T/(2η)`.
pub fn smooth_step_size(instance: &SystemInstance) -> f64 {
    let c = instance.corr();
    let gamma_min = instance.costs().iter().map(|c| c.gamma_cost).fold(f64::INFINITY, f64::min);
    let curv_s = (0..instance.n())
        .map(|i| instance.thresholds()[i] / (2.0 * instance.costs()[i].eta))
        .fold(0.0, f64::max);
    1.0 / (c.norm_one() * c.norm_inf() / (2.0 * gamma_min) + curv_s)
}

/// `β_i = Σ_j C_ij μ_j`, correctly rounded.
pub fn compute_beta_exact(instance: &SystemInstance, mu: &[f64]) -> Vec<f64> {
    let c = instance.corr();
    (0..instance.n()).map(|i| dot_rounded(c.row(i), mu)).collect()
}

/// `S_obs(x*) - S*`.
pub fn supergradient(instance: &SystemInstance, x_star: &[f64], s_star: &[f64]) -> Vec<f64> {
    let b = routing_matrix(instance);
    b.mul_vec(x_star).iter().zip(s_star).map(|(o, s)| o - s).collect()
}

/// Projected ascent step `(μ + α g)⁺`.
pub fn dual_update(mu: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    mu.iter().zip(g).map(|(m, gi)| (m + alpha * gi).max(0.0)).collect()
}

/// `L(x, S, μ) = Σ (g_i(S_i) - μ_i S_i) + Σ (h_i(x_i) + A_i x_i β_i(μ))`.
pub fn eval_lagrangian(instance: &SystemInstance, x: &[f64], s: &[f64], mu: &[f64]) -> CostValue {
    let beta = compute_beta_exact(instance, mu);
    let mut total = 0.0;
    for i in 0..instance.n() {
        let g = match costs::eval_g(&OverloadCost::for_node(instance, i), s[i].max(0.0)) {
            Ok(CostValue::Finite(v)) => v,
            _ => return CostValue::Overload,
        };
        let h = costs::eval_h(&OffloadCost::for_node(instance, i), x[i].clamp(0.0, 1.0)).unwrap_or(f64::INFINITY);
        total += g - mu[i] * s[i] + h + instance.arrivals()[i] * beta[i] * x[i];
    }
    CostValue::Finite(total)
}

/// Dual function value and the subproblem minimizers at `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEvaluation {
    pub value: f64,
    pub x_star: Vec<f64>,
    pub s_star: Vec<f64>,
    pub beta: Vec<f64>,
}

fn solve_subproblems(instance: &SystemInstance, mu: &[f64], beta: Vec<f64>) -> DualEvaluation {
    let n = instance.n();
    let mut x_star = Vec::with_capacity(n);
    let mut s_star = Vec::with_capacity(n);
    let mut value = 0.0;
    for i in 0..n {
        let g = OverloadCost::for_node(instance, i);
        let h = OffloadCost::for_node(instance, i);
        let s = costs::solve_s_subproblem(&g, mu[i]);
        let x = costs::solve_x_subproblem(&h, beta[i]);
        value += costs::s_subproblem_value(&g, mu[i]) + costs::x_subproblem_value(&h, beta[i]);
        s_star.push(s);
        x_star.push(x);
    }
    DualEvaluation {
        value,
        x_star,
        s_star,
        beta,
    }
}

/// `D(μ) = inf_{x, S} L(x, S, μ)` via the separable subproblems.
pub fn eval_dual(instance: &SystemInstance, mu: &[f64]) -> DualEvaluation {
    let beta = compute_beta_exact(instance, mu);
    solve_subproblems(instance, mu, beta)
}

/// Solver state after `k` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub mu: Vec<f64>,
    pub x_star: Vec<f64>,
    pub s_star: Vec<f64>,
    pub s_obs: Vec<f64>,
    pub k: usize,
    pub best_dual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub dual_value: f64,
    pub grad_norm_sq: f64,
    /// `max_i (S_obs_i - T_i)`.
    pub max_overload: f64,
    pub best_dual: f64,
    /// `reference_optimum - best_dual`, when a reference is configured.
    pub gap: Option<f64>,
}

/// Step-by-step driver for the dual algorithm.
pub struct DualSolver<'a> {
    instance: &'a SystemInstance,
    config: DualConfig,
    b: Matrix,
    alpha: f64,
    bound: f64,
    state: DualState,
    x_sum: Vec<f64>,
    bound_violations: usize,
    max_grad_ratio: f64,
    low_confidence_events: usize,
}

impl<'a> DualSolver<'a> {
    pub fn new(instance: &'a SystemInstance, config: DualConfig) -> Result<Self> {
        config.check(instance)?;
        if matches!(config.beta_mode, BetaMode::FastControl(_)) && !instance.is_strictly_positive() {
            let c = instance.corr();
            let n = instance.n();
            let (i, j) = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .find(|&(i, j)| !(c[(i, j)] > 0.0))
                .expect("a non-positive entry exists");
            return Err(Error::ZeroCorrelation { i, j });
        }
        let n = instance.n();
        Ok(Self {
            instance,
            b: routing_matrix(instance),
            alpha: config.step_size(instance),
            bound: supergradient_bound(instance),
            config,
            state: DualState {
                mu: vec![0.0; n],
                x_star: vec![1.0; n],
                s_star: vec![0.0; n],
                s_obs: vec![0.0; n],
                k: 0,
                best_dual: f64::NEG_INFINITY,
            },
            x_sum: vec![0.0; n],
            bound_violations: 0,
            max_grad_ratio: 0.0,
            low_confidence_events: 0,
        })
    }

    pub fn state(&self) -> &DualState {
        &self.state
    }

    pub fn step_size(&self) -> f64 {
        self.alpha
    }

    fn beta(&self) -> Result<Vec<f64>> {
        match &self.config.beta_mode {
            BetaMode::Exact => Ok(compute_beta_exact(self.instance, &self.state.mu)),
            BetaMode::FastControl(ch) => {
                // One channel round is a pure function of (μ, config, seed, k).
                let mut rng = match ch.mode {
                    ChannelMode::Poisson { seed, .. } => ChaCha8Rng::seed_from_u64(seed),
                    ChannelMode::Deterministic => ChaCha8Rng::seed_from_u64(0),
                };
                rng.set_stream(self.state.k as u64);
                let got = fastcontrol::channel_beta(self.instance, &self.state.mu, ch, &mut rng)?;
                Ok(got.beta)
            }
        }
    }

    /// Runs one iteration: subproblems at the current `μ`, observed loads,
    /// supergradient, multiplier update.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let beta = self.beta()?;
        if let BetaMode::FastControl(ChannelConfig {
            mode: ChannelMode::Poisson { .. },
            ..
        }) = self.config.beta_mode
        {
            // Low-confidence nodes report β = 0.
            self.low_confidence_events += beta.iter().filter(|b| **b == 0.0).count();
        }
        let eval = solve_subproblems(self.instance, &self.state.mu, beta);
        let s_obs = self.b.mul_vec(&eval.x_star);
        let g: Vec<f64> = s_obs.iter().zip(&eval.s_star).map(|(o, s)| o - s).collect();
        let grad_norm_sq: f64 = g.iter().map(|v| v * v).sum();
        if grad_norm_sq > self.bound {
            self.bound_violations += 1;
        }
        self.max_grad_ratio = self.max_grad_ratio.max(grad_norm_sq / self.bound);

        let st = &mut self.state;
        st.best_dual = st.best_dual.max(eval.value);
        let max_overload = s_obs
            .iter()
            .zip(self.instance.thresholds())
            .map(|(s, t)| s - t)
            .fold(f64::NEG_INFINITY, f64::max);
        let record = IterationRecord {
            k: st.k,
            dual_value: eval.value,
            grad_norm_sq,
            max_overload,
            best_dual: st.best_dual,
            gap: self.config.reference_optimum.map(|p| p - st.best_dual),
        };
        for (acc, x) in self.x_sum.iter_mut().zip(&eval.x_star) {
            *acc += x;
        }
        st.mu = dual_update(&st.mu, &g, self.alpha);
        st.x_star = eval.x_star;
        st.s_star = eval.s_star;
        st.s_obs = s_obs;
        st.k += 1;
        Ok(record)
    }

    /// Iterates until the stopping rule fires or `max_iters` is reached.
    pub fn run(mut self) -> Result<DualSolution> {
        let mut history = Vec::new();
        let mut recent = VecDeque::with_capacity(self.config.window + 1);
        let mut converged = false;
        while self.state.k < self.config.max_iters {
            let rec = self.step()?;
            if rec.k < HISTORY_FULL_PREFIX || rec.k % 10 == 0 {
                history.push(rec);
            }
            recent.push_back(rec.best_dual);
            if recent.len() > self.config.window {
                let old = recent.pop_front().expect("non-empty");
                let best = rec.best_dual;
                if best - old < self.config.window_tol * (1.0 + best.abs()) {
                    converged = true;
                    if history.last().map(|h| h.k) != Some(rec.k) {
                        history.push(rec);
                    }
                    break;
                }
            }
        }
        let k = self.state.k.max(1) as f64;
        let x_ergodic: Vec<f64> = self.x_sum.iter().map(|s| s / k).collect();
        let primal_cost = costs::total_cost(self.instance, &self.state.x_star, &self.state.s_obs);
        Ok(DualSolution {
            x: self.state.x_star,
            s_obs: self.state.s_obs,
            s_star: self.state.s_star,
            mu: self.state.mu,
            x_ergodic,
            best_dual: self.state.best_dual,
            primal_cost,
            converged,
            iterations: self.state.k,
            step_size: self.alpha,
            supergradient_bound: self.bound,
            bound_violations: self.bound_violations,
            max_grad_ratio: self.max_grad_ratio,
            low_confidence_events: self.low_confidence_events,
            history,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualSolution {
    /// Last primal iterate `x*(μ_K)`.
    pub x: Vec<f64>,
    /// Observed loads `B x` at the last iterate.
    pub s_obs: Vec<f64>,
    pub s_star: Vec<f64>,
    pub mu: Vec<f64>,
    /// Running average of the `x*` iterates.
    pub x_ergodic: Vec<f64>,
    pub best_dual: f64,
    /// `W(x, B x)` at the last iterate.
    pub primal_cost: CostValue,
    pub converged: bool,
    pub iterations: usize,
    pub step_size: f64,
    pub supergradient_bound: f64,
    /// Iterations whose squared supergradient norm exceeded the bound.
    pub bound_violations: usize,
    /// `max_k ‖g_k‖² / (A_max² + N T_max²)`.
    pub max_grad_ratio: f64,
    pub low_confidence_events: usize,
    #[serde(skip)]
    pub history: Vec<IterationRecord>,
}

impl DualSolution {
    /// Best dual value reached within the first `k` iterations, from the history.
    pub fn best_dual_after(&self, k: usize) -> Option<f64> {
        self.history.iter().take_while(|r| r.k < k).last().map(|r| r.best_dual)
    }
}

pub fn run_dual(instance: &SystemInstance, config: DualConfig) -> Result<DualSolution> {
    DualSolver::new(instance, config)?.run()
}

/// History as CSV: `k,dual_value,grad_norm_sq,max_overload,gap`.
pub fn history_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("k,dual_value,grad_norm_sq,max_overload,gap\n");
    for r in history {
        let gap = r.gap.map(|g| g.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k, r.dual_value, r.grad_norm_sq, r.max_overload, gap
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_load, NodeCost};
    use crate::model::tests::two_node_example;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn inst(rows: &[Vec<f64>], a: &[f64], t: &[f64]) -> SystemInstance {
        SystemInstance::uniform_costs(rows, a, t, NodeCost::default()).unwrap()
    }

    #[test]
    fn step_size_examples() {
        let fig = two_node_example();
        let a = step_size_for_epsilon(&fig, 0.1);
        assert!((a - 0.2 / 4.98).abs() < 1e-15);
        assert!((a - 0.040_160_6).abs() < 1e-7);
        assert_eq!(step_size_for_epsilon(&fig, 0.2), 2.0 * a);
        let one = inst(&[vec![1.0]], &[1.0], &[1.0]);
        assert_eq!(step_size_for_epsilon(&one, 1.0), 1.0);
    }

    #[test]
    fn beta_examples() {
        let i = inst(&[vec![0.6, 0.4], vec![0.3, 0.7]], &[1.0, 1.0], &[0.7, 0.7]);
        assert_eq!(compute_beta_exact(&i, &[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(compute_beta_exact(&i, &[1.0, 2.0]), vec![1.4, 1.7]);
        let id = inst(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[1.0, 1.0], &[0.7, 0.7]);
        assert_eq!(compute_beta_exact(&id, &[3.25, 0.5]), vec![3.25, 0.5]);
    }

    #[test]
    fn supergradient_examples() {
        let fig = two_node_example();
        assert_eq!(supergradient(&fig, &[0.0, 0.0], &[0.0, 0.0]), vec![0.0, 0.0]);
        let g = supergradient(&fig, &[1.0, 1.0], &[0.6, 0.7]);
        assert!(g[0].abs() < 1e-15 && (g[1] - 0.7).abs() < 1e-15);
        let x = [0.3, 0.8];
        let s = compute_load(&fig, &x);
        assert_eq!(supergradient(&fig, &x, &s), vec![0.0, 0.0]);
    }

    #[test]
    fn dual_update_examples() {
        assert!((dual_update(&[1.0], &[2.0], 0.1)[0] - 1.2).abs() < 1e-15);
        assert_eq!(dual_update(&[0.0], &[-5.0], 0.1), vec![0.0]);
        assert_eq!(dual_update(&[0.7, 2.0], &[0.0, 0.0], 0.3), vec![0.7, 2.0]);
    }

    #[test]
    fn lagrangian_examples() {
        let fig = two_node_example();
        assert_eq!(eval_lagrangian(&fig, &[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]), CostValue::Finite(0.0));
        assert_eq!(eval_lagrangian(&fig, &[1.0, 1.0], &[0.7, 0.1], &[0.0, 0.0]), CostValue::Overload);

        // Linear in μ with slope S_obs - S.
        let (x, s) = ([0.4, 0.9], [0.2, 0.5]);
        let (m1, m2) = ([0.5, 1.5], [2.0, 0.25]);
        let l1 = eval_lagrangian(&fig, &x, &s, &m1).finite().unwrap();
        let l2 = eval_lagrangian(&fig, &x, &s, &m2).finite().unwrap();
        let g = supergradient(&fig, &x, &s);
        let predicted: f64 = (0..2).map(|i| (m2[i] - m1[i]) * g[i]).sum();
        assert!((l2 - l1 - predicted).abs() < 1e-12);
    }

    #[test]
    fn lagrangian_matches_independent_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = 3;
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
                    let s: f64 = w.iter().sum();
                    w.into_iter().map(|v| v / s).collect()
                })
                .collect();
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let i = inst(&rows, &a, &[0.7; 3]);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.69)).collect();
            let mu: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
            // Written out from the definition with the double sum kept explicit.
            let mut want = 0.0;
            for k in 0..n {
                want += s[k] / (1.0 - s[k] / 0.7) - mu[k] * s[k];
                let u = 1.0 - x[k];
                want += 10.0 * a[k] * u * (0.5 + a[k] * u);
                for j in 0..n {
                    want += a[k] * x[k] * mu[j] * rows[k][j];
                }
            }
            let got = eval_lagrangian(&i, &x, &s, &mu).finite().unwrap();
            assert!((got - want).abs() < 1e-12 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn dual_at_zero() {
        let fig = two_node_example();
        let e = eval_dual(&fig, &[0.0, 0.0]);
        assert_eq!(e.value, 0.0);
        assert_eq!(e.s_star, vec![0.0, 0.0]);
        assert_eq!(e.x_star, vec![1.0, 1.0]);
    }

    #[test]
    fn first_iterate_keeps_traffic() {
        let fig = two_node_example();
        let mut solver = DualSolver::new(&fig, DualConfig::default()).unwrap();
        solver.step().unwrap();
        assert_eq!(solver.state().x_star, vec![1.0, 1.0]);
    }

    #[test]
    fn fastcontrol_needs_positive_correlations() {
        let i = inst(&[vec![1.0, 0.0], vec![0.5, 0.5]], &[1.0, 1.0], &[0.7, 0.7]);
        let cfg = DualConfig {
            beta_mode: BetaMode::FastControl(ChannelConfig::default()),
            ..DualConfig::default()
        };
        assert!(matches!(run_dual(&i, cfg), Err(Error::ZeroCorrelation { .. })));
    }

    #[test]
    fn bad_config_rejected() {
        let fig = two_node_example();
        for cfg in [
            DualConfig::with_epsilon(0.0),
            DualConfig {
                max_iters: 0,
                ..DualConfig::default()
            },
            DualConfig {
                step: StepRule::Explicit(-1.0),
                ..DualConfig::default()
            },
        ] {
            assert!(matches!(run_dual(&fig, cfg), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn invariants_hold_along_a_run() {
        let fig = two_node_example();
        let mut solver = DualSolver::new(&fig, DualConfig::with_epsilon(0.05)).unwrap();
        let mut last_best = f64::NEG_INFINITY;
        for _ in 0..5000 {
            let rec = solver.step().unwrap();
            let st = solver.state();
            assert!(st.mu.iter().all(|m| *m >= 0.0));
            assert!(st.x_star.iter().all(|x| (0.0..=1.0).contains(x)));
            assert!(st.s_star.iter().zip(fig.thresholds()).all(|(s, t)| (0.0..=*t).contains(s)));
            assert!(rec.grad_norm_sq <= supergradient_bound(&fig));
            assert!(rec.best_dual >= last_best);
            last_best = rec.best_dual;
        }
    }

    #[test]
    fn history_csv_layout() {
        let fig = two_node_example();
        let sol = run_dual(
            &fig,
            DualConfig {
                max_iters: 3,
                reference_optimum: Some(1.0),
                ..DualConfig::default()
            },
        )
        .unwrap();
        let csv = history_csv(&sol.history);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,dual_value,grad_norm_sq,max_overload,gap");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[1].split(',').count(), 5);
        assert!(!sol.converged);
        assert_eq!(sol.iterations, 3);
    }

    proptest! {
        #[test]
        fn dual_is_concave(
            m1 in prop::collection::vec(0.0f64..50.0, 2),
            m2 in prop::collection::vec(0.0f64..50.0, 2),
            lam in 0.0f64..1.0,
        ) {
            let fig = two_node_example();
            let mid: Vec<f64> = m1.iter().zip(&m2).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
            let d = |m: &[f64]| eval_dual(&fig, m).value;
            prop_assert!(d(&mid) >= lam * d(&m1) + (1.0 - lam) * d(&m2) - 1e-9);
        }
    }
}
