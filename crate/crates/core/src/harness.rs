//! Seeded Monte-Carlo sweeps over synthetic instances.
//!
//! Each trial draws `A_i ~ Poisson(Ā)`, `d_i ~ U[0, 1]` and a fresh correlation
//! matrix, then runs the dual solver (recording the optimal cost or the overload
//! sentinel) and/or the greedy dynamics (counting locally uncontrollable nodes).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::CostValue;
use crate::dual::{run_dual, DualConfig, StepRule};
use crate::error::{Error, Result};
use crate::greedy::{detect_uncontrollable, integrate, GreedyConfig};
use crate::model::{Matrix, NodeCost, SystemInstance};
use crate::numeric::{fsum, mean_std};

/// Synthetic correlation matrices.
///
/// Row `i` puts `clamp(self_corr + spread·U[-1, 1], 0.01, 0.99)` on the diagonal
/// and splits the remainder over the other columns in proportion to
/// `w_j · U(0, 1]`, where `w_j ~ LogNormal(0, popularity_sigma)` is a per-column
/// weight shared by all rows. Large weights model proxies whose anycast
/// catchment is much wider than their own DNS footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrGenerator {
    pub self_corr: f64,
    pub spread: f64,
    pub popularity_sigma: f64,
}

impl Default for CorrGenerator {
    fn default() -> Self {
        Self {
            self_corr: 0.3,
            spread: 0.1,
            popularity_sigma: 0.25,
        }
    }
}

impl CorrGenerator {
    fn check(&self) -> Result<()> {
        if !(self.self_corr > 0.0 && self.self_corr < 1.0) {
            return Err(Error::InvalidArgument(format!("self_corr must lie in (0, 1), got {}", self.self_corr)));
        }
        if !(self.spread >= 0.0 && self.popularity_sigma >= 0.0) {
            return Err(Error::InvalidArgument("spread and popularity_sigma must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Matrix {
        let pop = LogNormal::new(0.0, self.popularity_sigma).expect("sigma is nonnegative");
        let weights: Vec<f64> = (0..n).map(|_| pop.sample(rng)).collect();
        let mut c = Matrix::zeros(n);
        for i in 0..n {
            if n == 1 {
                c[(0, 0)] = 1.0;
                break;
            }
            let diag = (self.self_corr + self.spread * rng.gen_range(-1.0..=1.0)).clamp(0.01, 0.99);
            let raw: Vec<f64> = (0..n)
                .map(|j| if j == i { 0.0 } else { weights[j] * (1.0 - rng.gen::<f64>()) })
                .collect();
            let total = fsum(raw.iter().copied());
            for j in 0..n {
                c[(i, j)] = if j == i { diag } else { (1.0 - diag) * raw[j] / total };
            }
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dual,
    Greedy,
    Both,
}

impl Algorithm {
    fn dual(self) -> bool {
        matches!(self, Algorithm::Dual | Algorithm::Both)
    }

    fn greedy(self) -> bool {
        matches!(self, Algorithm::Greedy | Algorithm::Both)
    }
}

/// Dual settings used inside sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepDualSettings {
    pub epsilon: f64,
    pub step: StepRule,
    pub max_iters: usize,
}

impl Default for SweepDualSettings {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            step: StepRule::Smooth,
            max_iters: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub trials: usize,
    pub load_grid: Vec<f64>,
    pub corr_gen: CorrGenerator,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub threshold: f64,
    pub eta: f64,
    pub gamma_cost: f64,
    pub dual: SweepDualSettings,
    pub greedy: GreedyConfig,
    /// When `greedy.step` is unset, trials integrate with this multiple of the
    /// module default step `0.01 / (β · max(1, max_j A_j))`.
    pub greedy_step_scale: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 48,
            trials: 100,
            load_grid: vec![0.1, 0.3, 1.0, 3.0, 10.0],
            corr_gen: CorrGenerator::default(),
            seed: 0,
            algorithm: Algorithm::Both,
            threshold: 0.7,
            eta: 1.0,
            gamma_cost: 10.0,
            dual: SweepDualSettings::default(),
            greedy: GreedyConfig::default(),
            greedy_step_scale: 10.0,
        }
    }
}

impl ExperimentConfig {
    pub fn check(&self) -> Result<()> {
        if self.n == 0 || self.trials == 0 {
            return Err(Error::InvalidArgument("n and trials must be at least 1".into()));
        }
        if self.load_grid.is_empty() || self.load_grid.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::InvalidArgument("load_grid must be a nonempty list of positive values".into()));
        }
        if !(self.greedy_step_scale > 0.0 && self.greedy_step_scale.is_finite()) {
            return Err(Error::InvalidArgument("greedy_step_scale must be positive".into()));
        }
        if !(self.threshold > 0.0 && self.eta > 0.0 && self.gamma_cost > 0.0) {
            return Err(Error::InvalidArgument("threshold, eta and gamma_cost must be positive".into()));
        }
        self.corr_gen.check()?;
        self.greedy.check()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }
}

/// SplitMix64 finalizer; decorrelates nearby seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` at grid point `abar_index`.
pub fn trial_seed(master: u64, abar_index: usize, trial: usize) -> u64 {
    mix(mix(master ^ mix(abar_index as u64)) ^ trial as u64)
}

/// One synthetic instance: Poisson arrivals, uniform `d`, generated correlations.
pub fn generate_instance(config: &ExperimentConfig, abar: f64, seed: u64) -> Result<SystemInstance> {
    if !(abar > 0.0 && abar.is_finite()) {
        return Err(Error::InvalidArgument(format!("mean load must be positive, got {abar}")));
    }
    config.corr_gen.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = config.n;
    let corr = config.corr_gen.generate(n, &mut rng);
    let poisson = Poisson::new(abar).expect("positive mean");
    let arrivals: Vec<f64> = (0..n).map(|_| poisson.sample(&mut rng)).collect();
    let costs = (0..n)
        .map(|_| NodeCost {
            eta: config.eta,
            gamma_cost: config.gamma_cost,
            d: rng.gen_range(0.0..1.0),
        })
        .collect();
    SystemInstance::validated(corr, arrivals, vec![config.threshold; n], costs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub seed: u64,
    /// Primal cost at the last dual iterate.
    pub dual_cost: Option<CostValue>,
    pub dual_converged: Option<bool>,
    /// Iterations whose supergradient exceeded the uniform bound.
    pub dual_bound_violations: Option<usize>,
    pub uncontrollable: Option<usize>,
    pub greedy_converged: Option<bool>,
    /// Largest pre-clamp excursion outside the unit cube.
    pub greedy_max_excursion: Option<f64>,
    pub error: Option<String>,
}

pub fn run_trial(config: &ExperimentConfig, abar: f64, seed: u64) -> TrialOutcome {
    let mut out = TrialOutcome {
        seed,
        dual_cost: None,
        dual_converged: None,
        dual_bound_violations: None,
        uncontrollable: None,
        greedy_converged: None,
        greedy_max_excursion: None,
        error: None,
    };
    let instance = match generate_instance(config, abar, seed) {
        Ok(i) => i,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    if config.algorithm.dual() {
        let dc = DualConfig {
            epsilon: config.dual.epsilon,
            step: config.dual.step,
            max_iters: config.dual.max_iters,
            ..DualConfig::default()
        };
        match run_dual(&instance, dc) {
            Ok(sol) => {
                out.dual_cost = Some(sol.primal_cost);
                out.dual_converged = Some(sol.converged);
                out.dual_bound_violations = Some(sol.bound_violations);
            }
            Err(e) => out.error = Some(e.to_string()),
        }
    }
    if config.algorithm.greedy() {
        let x0 = vec![0.5; instance.n()];
        let mut greedy = config.greedy.clone();
        if greedy.step.is_none() {
            greedy.step = Some(config.greedy_step_scale * greedy.step_for(&instance));
        }
        match integrate(&instance, &x0, &greedy) {
            Ok(tr) => {
                let rep = detect_uncontrollable(&tr, &instance, config.greedy.boundary_eps, config.greedy.overload_tol);
                out.uncontrollable = Some(rep.uncontrollable_count());
                out.greedy_converged = Some(tr.is_converged());
                out.greedy_max_excursion = Some(tr.max_excursion);
            }
            Err(e) => out.error = Some(e.to_string()),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub abar: f64,
    /// Mean and population standard deviation over trials with a finite dual cost.
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_uncontrollable_count: f64,
    /// Fraction of dual trials ending at an overloaded point.
    pub overload_sentinel_rate: f64,
    pub dual_trials: usize,
    pub dual_unconverged: usize,
    pub greedy_trials: usize,
    pub greedy_unconverged: usize,
    pub failures: usize,
    pub bound_violations: usize,
    pub max_excursion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// `abar,mean_cost,std_cost,mean_uncontrollable_count,overload_sentinel_rate`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("abar,mean_cost,std_cost,mean_uncontrollable_count,overload_sentinel_rate\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.abar, r.mean_cost, r.std_cost, r.mean_uncontrollable_count, r.overload_sentinel_rate
            ));
        }
        out
    }
}

fn aggregate(abar: f64, trials: &[TrialOutcome]) -> SweepRow {
    let costs: Vec<f64> = trials.iter().filter_map(|t| t.dual_cost.and_then(CostValue::finite)).collect();
    let dual_trials = trials.iter().filter(|t| t.dual_cost.is_some()).count();
    let sentinels = trials.iter().filter(|t| t.dual_cost.is_some_and(CostValue::is_overload)).count();
    let counts: Vec<f64> = trials.iter().filter_map(|t| t.uncontrollable.map(|c| c as f64)).collect();
    let (mean_cost, std_cost) = mean_std(&costs);
    SweepRow {
        abar,
        mean_cost,
        std_cost,
        mean_uncontrollable_count: if counts.is_empty() { f64::NAN } else { fsum(counts.iter().copied()) / counts.len() as f64 },
        overload_sentinel_rate: if dual_trials == 0 { f64::NAN } else { sentinels as f64 / dual_trials as f64 },
        dual_trials,
        dual_unconverged: trials.iter().filter(|t| t.dual_converged == Some(false)).count(),
        greedy_trials: counts.len(),
        greedy_unconverged: trials.iter().filter(|t| t.greedy_converged == Some(false)).count(),
        failures: trials.iter().filter(|t| t.error.is_some()).count(),
        bound_violations: trials.iter().filter_map(|t| t.dual_bound_violations).sum(),
        max_excursion: trials.iter().filter_map(|t| t.greedy_max_excursion).fold(0.0, f64::max),
    }
}

/// Runs every `(Ā, trial)` pair in parallel and aggregates per `Ā`.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.check()?;
    let jobs: Vec<(usize, usize)> = (0..config.load_grid.len())
        .flat_map(|a| (0..config.trials).map(move |t| (a, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(a, t)| run_trial(config, config.load_grid[a], trial_seed(config.seed, a, t)))
        .collect();
    let rows = config
        .load_grid
        .iter()
        .enumerate()
        .map(|(a, &abar)| aggregate(abar, &outcomes[a * config.trials..(a + 1) * config.trials]))
        .collect();
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_are_reproducible() {
        let cfg = ExperimentConfig::default();
        let a = generate_instance(&cfg, 3.0, 42).unwrap();
        let b = generate_instance(&cfg, 3.0, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_instance(&cfg, 3.0, 43).unwrap());
        assert!(a.is_strictly_positive());
        assert!(crate::model::validate(&a).is_ok());
    }

    #[test]
    fn self_correlation_hits_target() {
        let cfg = ExperimentConfig {
            corr_gen: CorrGenerator {
                self_corr: 0.7,
                ..CorrGenerator::default()
            },
            ..ExperimentConfig::default()
        };
        for seed in 0..20 {
            let i = generate_instance(&cfg, 1.0, seed).unwrap();
            let mean = (0..48).map(|k| i.corr()[(k, k)]).sum::<f64>() / 48.0;
            assert!((0.6..=0.8).contains(&mean), "seed {seed}: {mean}");
        }
    }

    #[test]
    fn light_load_is_mostly_zero_or_one() {
        let cfg = ExperimentConfig::default();
        let i = generate_instance(&cfg, 0.1, 1).unwrap();
        let small = i.arrivals().iter().filter(|a| **a <= 1.0).count();
        assert!(small >= 45);
        assert!(i.arrivals().iter().all(|a| a.fract() == 0.0));
    }

    #[test]
    fn seeds_differ_across_cells() {
        let s: std::collections::HashSet<u64> = (0..5)
            .flat_map(|a| (0..100).map(move |t| trial_seed(7, a, t)))
            .collect();
        assert_eq!(s.len(), 500);
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"n": 4, "trials": 2, "load_grid": [0.5]}"#).unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.threshold, 0.7);
        assert!(ExperimentConfig::from_json(r#"{"load_grid": []}"#).is_err());
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn small_sweep_is_reproducible() {
        let cfg = ExperimentConfig {
            n: 6,
            trials: 4,
            load_grid: vec![0.1, 2.0],
            ..ExperimentConfig::default()
        };
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), 2);
        for r in &a.rows {
            assert!(r.std_cost >= 0.0);
            assert!((0.0..=6.0).contains(&r.mean_uncontrollable_count));
            assert_eq!(r.failures, 0);
        }
        assert!(a.to_csv().starts_with("abar,mean_cost,std_cost,mean_uncontrollable_count,overload_sentinel_rate\n"));
    }
}
