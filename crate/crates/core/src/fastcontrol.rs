//! Emulated control-packet channel.
//!
//! Node `i` makes its users emit category-`j` control packets at rate
//! `r_ij = γ μ_i C_ji / C_ij`. Anycast routing delivers a packet emitted through
//! node `i` to proxy `l` with probability `C_il`, so the rate of category-`i`
//! packets arriving at node `i` is
//!
//! ```text
//! R_i = Σ_j r_ji C_ji = γ Σ_j μ_j C_ij = γ β_i
//! ```
//!
//! and each node recovers its coupling factor as `β_i = R_i / γ` without any
//! explicit message exchange.
//!
//! In deterministic mode rates are carried as exact rationals, so the recovered
//! `β` is the correctly rounded value of `Σ_j C_ij μ_j`, bit-identical to
//! [`crate::dual::compute_beta_exact`]. Poisson mode samples packet counts over an
//! observation window.

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemInstance;

pub const DEFAULT_GAMMA_RATE: f64 = 10.0;
pub const DEFAULT_WINDOW: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ChannelMode {
    /// Expected rates, no sampling noise.
    Deterministic,
    /// Packet counts sampled over an observation window of length `window`.
    Poisson { window: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub gamma_rate: f64,
    pub mode: ChannelMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            gamma_rate: DEFAULT_GAMMA_RATE,
            mode: ChannelMode::Deterministic,
        }
    }
}

impl ChannelConfig {
    pub fn poisson(gamma_rate: f64, window: f64, seed: u64) -> Self {
        Self {
            gamma_rate,
            mode: ChannelMode::Poisson { window, seed },
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.gamma_rate > 0.0 && self.gamma_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "control packet rate scale must be positive, got {}",
                self.gamma_rate
            )));
        }
        if let ChannelMode::Poisson { window, .. } = self.mode {
            if !(window > 0.0 && window.is_finite()) {
                return Err(Error::InvalidArgument(format!("observation window must be positive, got {window}")));
            }
        }
        Ok(())
    }
}

fn rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

/// Emission rates `r_ij` of category-`j` packets through node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    n: usize,
    exact: Vec<BigRational>,
    rates: Vec<f64>,
}

impl EmissionMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Rate `r_ij` rounded to `f64`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.n + j]
    }

    pub fn exact_rate(&self, i: usize, j: usize) -> &BigRational {
        &self.exact[i * self.n + j]
    }

    /// Total emitted control traffic `Σ_ij r_ij`.
    pub fn total(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// `r_ij = γ μ_i C_ji / C_ij`. Requires strictly positive correlations.
pub fn emit_rates(instance: &SystemInstance, mu: &[f64], config: &ChannelConfig) -> Result<EmissionMatrix> {
    config.check()?;
    let n = instance.n();
    if mu.len() != n {
        return Err(Error::Dimension {
            what: "multipliers",
            got: mu.len(),
            expected: n,
        });
    }
    let c = instance.corr();
    if let Some((i, j)) = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .find(|&(i, j)| !(c[(i, j)] > 0.0))
    {
        return Err(Error::ZeroCorrelation { i, j });
    }
    let gamma = rational(config.gamma_rate);
    let mut exact = Vec::with_capacity(n * n);
    for i in 0..n {
        let scale = &gamma * rational(mu[i].max(0.0));
        for j in 0..n {
            exact.push(&scale * rational(c[(j, i)]) / rational(c[(i, j)]));
        }
    }
    let rates = exact.iter().map(|r| r.to_f64().unwrap_or(f64::INFINITY)).collect();
    Ok(EmissionMatrix { n, exact, rates })
}

/// Rates `R_i` of category-`i` packets received at node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedRates {
    pub rates: Vec<f64>,
    /// Packet counts per node, when sampled.
    pub packets: Option<Vec<u64>>,
    exact: Option<Vec<BigRational>>,
}

impl ReceivedRates {
    /// Rates measured by some external means.
    pub fn measured(rates: Vec<f64>) -> Self {
        Self {
            rates,
            packets: None,
            exact: None,
        }
    }
}

/// Routes emitted packets through the correlation matrix.
///
/// In Poisson mode node `j` generates category-`i` packets as a Poisson process
/// of rate `r_ji` over the window, each landing at node `l` with probability
/// `C_jl`; `R_i` is the number landing at `i` divided by the window.
pub fn route_and_receive<R: Rng + ?Sized>(
    instance: &SystemInstance,
    emissions: &EmissionMatrix,
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<ReceivedRates> {
    config.check()?;
    let n = instance.n();
    if emissions.dim() != n {
        return Err(Error::Dimension {
            what: "emission matrix",
            got: emissions.dim(),
            expected: n,
        });
    }
    let c = instance.corr();
    match config.mode {
        ChannelMode::Deterministic => {
            let exact: Vec<BigRational> = (0..n)
                .map(|i| {
                    (0..n).fold(BigRational::zero(), |acc, j| {
                        acc + emissions.exact_rate(j, i) * rational(c[(j, i)])
                    })
                })
                .collect();
            let rates = exact.iter().map(|r| r.to_f64().unwrap_or(f64::INFINITY)).collect();
            Ok(ReceivedRates {
                rates,
                packets: None,
                exact: Some(exact),
            })
        }
        ChannelMode::Poisson { window, .. } => {
            let mut packets = vec![0u64; n];
            for (i, count) in packets.iter_mut().enumerate() {
                for j in 0..n {
                    let lambda = emissions.rate(j, i) * window;
                    if lambda <= 0.0 {
                        continue;
                    }
                    let generated = Poisson::new(lambda)
                        .map_err(|e| Error::InvalidArgument(format!("packet rate {lambda}: {e}")))?
                        .sample(rng) as u64;
                    if generated == 0 {
                        continue;
                    }
                    let landed = Binomial::new(generated, c[(j, i)].clamp(0.0, 1.0))
                        .map_err(|e| Error::InvalidArgument(format!("landing probability: {e}")))?
                        .sample(rng);
                    *count += landed;
                }
            }
            let rates = packets.iter().map(|&k| k as f64 / window).collect();
            Ok(ReceivedRates {
                rates,
                packets: Some(packets),
                exact: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredBeta {
    pub beta: Vec<f64>,
    /// Nodes that received no packets in a sampled window; their `β` is reported as 0.
    pub low_confidence: Vec<bool>,
}

/// `β_i = R_i / γ`.
pub fn recover_beta(received: &ReceivedRates, config: &ChannelConfig) -> RecoveredBeta {
    let beta = match &received.exact {
        Some(exact) => {
            let gamma = rational(config.gamma_rate);
            exact
                .iter()
                .map(|r| (r / &gamma).to_f64().unwrap_or(f64::INFINITY))
                .collect()
        }
        None => received.rates.iter().map(|r| r / config.gamma_rate).collect(),
    };
    let low_confidence = match &received.packets {
        Some(p) => p.iter().map(|&k| k == 0).collect(),
        None => vec![false; received.rates.len()],
    };
    RecoveredBeta { beta, low_confidence }
}

/// One full channel round: emit, route and recover.
pub fn channel_beta<R: Rng + ?Sized>(
    instance: &SystemInstance,
    mu: &[f64],
    config: &ChannelConfig,
    rng: &mut R,
) -> Result<RecoveredBeta> {
    let emissions = emit_rates(instance, mu, config)?;
    let received = route_and_receive(instance, &emissions, config, rng)?;
    Ok(recover_beta(&received, config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::compute_beta_exact;
    use crate::model::{Matrix, NodeCost};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn instance(rows: &[Vec<f64>]) -> SystemInstance {
        let n = rows.len();
        SystemInstance::validated(
            Matrix::from_rows(rows).unwrap(),
            vec![1.0; n],
            vec![0.7; n],
            vec![NodeCost::default(); n],
        )
        .unwrap()
    }

    fn det(gamma: f64) -> ChannelConfig {
        ChannelConfig {
            gamma_rate: gamma,
            mode: ChannelMode::Deterministic,
        }
    }

    #[test]
    fn emission_examples() {
        let inst = instance(&[vec![0.6, 0.4], vec![0.3, 0.7]]);
        let zero = emit_rates(&inst, &[0.0, 0.0], &det(1.0)).unwrap();
        assert_eq!(zero.total(), 0.0);

        let r = emit_rates(&inst, &[1.0, 2.0], &det(1.0)).unwrap();
        assert_eq!(r.rate(0, 0), 1.0);
        // Exact quotients of the binary inputs, rounded once.
        assert_eq!(r.rate(0, 1), 0.3 / 0.4);
        assert!((r.rate(0, 1) - 0.75).abs() < 1e-15);
        assert_eq!(r.rate(1, 0), 0.8 / 0.3);
        assert!((r.rate(1, 0) - 8.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.rate(1, 1), 2.0);

        let uniform = instance(&[vec![0.25; 4], vec![0.25; 4], vec![0.25; 4], vec![0.25; 4]]);
        let r = emit_rates(&uniform, &[1.0, 2.0, 3.0, 4.0], &det(10.0)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(r.rate(i, j), 10.0 * (i + 1) as f64);
            }
        }
    }

    #[test]
    fn zero_correlation_is_rejected() {
        let inst = instance(&[vec![1.0, 0.0], vec![0.3, 0.7]]);
        assert_eq!(
            emit_rates(&inst, &[1.0, 1.0], &det(1.0)).unwrap_err(),
            Error::ZeroCorrelation { i: 0, j: 1 }
        );
    }

    #[test]
    fn receive_and_recover_examples() {
        let inst = instance(&[vec![0.6, 0.4], vec![0.3, 0.7]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = det(1.0);
        let r = emit_rates(&inst, &[1.0, 2.0], &cfg).unwrap();
        let got = route_and_receive(&inst, &r, &cfg, &mut rng).unwrap();
        assert_eq!(got.rates, vec![1.4, 1.7]);
        let beta = recover_beta(&got, &cfg);
        assert_eq!(beta.beta, compute_beta_exact(&inst, &[1.0, 2.0]));

        let r0 = emit_rates(&inst, &[0.0, 0.0], &cfg).unwrap();
        let got0 = route_and_receive(&inst, &r0, &cfg, &mut rng).unwrap();
        assert_eq!(got0.rates, vec![0.0, 0.0]);

        assert_eq!(recover_beta(&ReceivedRates::measured(vec![1.4, 1.7]), &det(1.0)).beta, vec![1.4, 1.7]);
        assert_eq!(recover_beta(&ReceivedRates::measured(vec![0.0]), &det(1.0)).beta, vec![0.0]);
        assert!((recover_beta(&ReceivedRates::measured(vec![14.0]), &det(10.0)).beta[0] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn poisson_mode_concentrates() {
        let inst = instance(&[vec![0.6, 0.4], vec![0.3, 0.7]]);
        let mu = [1.0, 2.0];
        let exact = compute_beta_exact(&inst, &mu);
        let mut within = 0;
        for seed in 0..100 {
            let cfg = ChannelConfig::poisson(10.0, 1e4, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let got = channel_beta(&inst, &mu, &cfg, &mut rng).unwrap();
            if got.beta.iter().zip(&exact).all(|(b, e)| ((b - e) / e).abs() < 0.05) {
                within += 1;
            }
        }
        assert_eq!(within, 100);
    }

    #[test]
    fn poisson_mode_is_unbiased() {
        let inst = instance(&[vec![0.5, 0.3, 0.2], vec![0.1, 0.6, 0.3], vec![0.25, 0.25, 0.5]]);
        let mu = [0.8, 1.5, 0.4];
        let exact = compute_beta_exact(&inst, &mu);
        let (gamma, window) = (10.0, 1e3);
        let windows = 100;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cfg = ChannelConfig::poisson(gamma, window, 42);
        let mut sums = [0.0; 3];
        for _ in 0..windows {
            let got = channel_beta(&inst, &mu, &cfg, &mut rng).unwrap();
            for (s, b) in sums.iter_mut().zip(&got.beta) {
                *s += b;
            }
        }
        for i in 0..3 {
            let mean = sums[i] / windows as f64;
            // Var(β̂) = β / (γ W) per window.
            let sigma = (exact[i] / (gamma * window) / windows as f64).sqrt();
            assert!((mean - exact[i]).abs() < 3.0 * sigma, "node {i}: {mean} vs {}", exact[i]);
        }
    }

    #[test]
    fn empty_window_is_low_confidence() {
        let inst = instance(&[vec![0.6, 0.4], vec![0.3, 0.7]]);
        let cfg = ChannelConfig::poisson(10.0, 1e3, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = channel_beta(&inst, &[0.0, 0.0], &cfg, &mut rng).unwrap();
        assert_eq!(got.beta, vec![0.0, 0.0]);
        assert_eq!(got.low_confidence, vec![true, true]);
    }

    #[test]
    fn emitted_traffic_scales_linearly() {
        let uniform = instance(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let mu = [0.3, 1.1];
        let base = emit_rates(&uniform, &mu, &det(1.0)).unwrap().total();
        let scaled_gamma = emit_rates(&uniform, &mu, &det(3.0)).unwrap().total();
        let scaled_mu = emit_rates(&uniform, &[0.6, 2.2], &det(1.0)).unwrap().total();
        assert!((scaled_gamma - 3.0 * base).abs() < 1e-12);
        assert!((scaled_mu - 2.0 * base).abs() < 1e-12);
        assert!((base - 2.0 * (0.3 + 1.1)).abs() < 1e-12);
    }
}
