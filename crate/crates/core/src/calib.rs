//! Calibration-error misclassification bound and its Monte-Carlo
//! verifier.
//!
//! Setup: the human answers a point correctly with true probability
//! `p_H`, the machine with `p_M`. Each agent exposes a calibrated
//! confidence equal to its true confidence plus independent zero-mean
//! noise of standard deviation epsilon. A router sends the point to
//! whichever agent claims higher confidence (ties favor the human).
//! Chebyshev's inequality bounds the probability of routing to the worse
//! agent by `2 * eps^2 / (p_H - p_M)^2`, for any noise distribution.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{binomial_ci_halfwidth, derive_seed};

/// Distribution family of the calibration error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    Gaussian,
    Uniform,
    Laplace,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Uniform, NoiseKind::Laplace];
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
            NoiseKind::Laplace => "laplace",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "uniform" => Ok(NoiseKind::Uniform),
            "laplace" => Ok(NoiseKind::Laplace),
            other => Err(Error::InvalidArgument(format!(
                "unknown noise kind {other:?} (expected gaussian|uniform|laplace)"
            ))),
        }
    }
}

/// One verification cell: true confidences, calibration-error scale,
/// and the noise family.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CalibrationScenario {
    pub human_confidence: f64,
    pub machine_confidence: f64,
    pub epsilon: f64,
    pub noise: NoiseKind,
}

impl CalibrationScenario {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !in_unit(self.human_confidence) || !in_unit(self.machine_confidence) {
            return Err(Error::InvalidArgument(
                "true confidences must lie in [0, 1]".into(),
            ));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(
                "epsilon must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn confidence_gap(&self) -> f64 {
        (self.human_confidence - self.machine_confidence).abs()
    }
}

/// The Chebyshev misclassification bound `min(1, 2 eps^2 / gap^2)`;
/// vacuously 1 when the confidences coincide.
pub fn chebyshev_bound(scenario: &CalibrationScenario) -> f64 {
    let gap = scenario.confidence_gap();
    if gap == 0.0 {
        return 1.0;
    }
    (2.0 * scenario.epsilon * scenario.epsilon / (gap * gap)).min(1.0)
}

/// Who handles the point under the confidence-comparison policy; a tie
/// favors the human.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Agent {
    Human,
    Machine,
}

pub fn confidence_deferral_policy(calibrated_human: f64, calibrated_machine: f64) -> Agent {
    if calibrated_human >= calibrated_machine {
        Agent::Human
    } else {
        Agent::Machine
    }
}

/// Zero-mean noise with standard deviation epsilon under each family:
/// the uniform half-width is eps * sqrt(3), the Laplace scale eps / sqrt(2).
fn sample_noise(kind: NoiseKind, epsilon: f64, rng: &mut impl Rng) -> f64 {
    if epsilon == 0.0 {
        return 0.0;
    }
    match kind {
        NoiseKind::Gaussian => Normal::new(0.0, epsilon)
            .expect("positive sigma")
            .sample(rng),
        NoiseKind::Uniform => {
            let half_width = epsilon * 3.0f64.sqrt();
            rng.random_range(-half_width..half_width)
        }
        NoiseKind::Laplace => {
            let scale = epsilon / 2.0f64.sqrt();
            let u: f64 = rng.random::<f64>().max(1e-300);
            if u < 0.5 {
                scale * (2.0 * u).ln()
            } else {
                -scale * (2.0 * (1.0 - u)).max(1e-300).ln()
            }
        }
    }
}

/// Monte-Carlo estimate of the misclassification rate with a binomial
/// confidence interval.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SimulationResult {
    pub rate: f64,
    /// 99% normal-approximation half-width of the rate estimate.
    pub ci_halfwidth: f64,
    pub trials: u64,
    pub misroutes: u64,
}

/// Draws calibrated confidences `p + noise` for both agents and counts
/// the trials where the agent with *lower* true confidence wins the
/// comparison strictly. Requires at least 10^4 trials.
pub fn simulate_misclassification(
    scenario: &CalibrationScenario,
    trials: u64,
    seed: u64,
) -> Result<SimulationResult> {
    scenario.validate()?;
    if trials < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10^4 trials, got {trials}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let human_better = scenario.human_confidence > scenario.machine_confidence;
    let tied = scenario.human_confidence == scenario.machine_confidence;
    let mut misroutes = 0u64;
    for _ in 0..trials {
        let g_h =
            scenario.human_confidence + sample_noise(scenario.noise, scenario.epsilon, &mut rng);
        let g_m =
            scenario.machine_confidence + sample_noise(scenario.noise, scenario.epsilon, &mut rng);
        if tied {
            continue;
        }
        let worse_wins = if human_better { g_m > g_h } else { g_h > g_m };
        if worse_wins {
            misroutes += 1;
        }
    }
    let rate = misroutes as f64 / trials as f64;
    Ok(SimulationResult {
        rate,
        ci_halfwidth: binomial_ci_halfwidth(rate, trials, 0.99),
        trials,
        misroutes,
    })
}

/// The verification grid: every ordered confidence pair from `probs`
/// with gap at least `min_gap`, crossed with every epsilon and noise
/// family.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundGridConfig {
    pub probs: Vec<f64>,
    pub min_gap: f64,
    pub epsilons: Vec<f64>,
    pub noise_kinds: Vec<NoiseKind>,
    pub trials: u64,
    pub seed: u64,
}

impl Default for BoundGridConfig {
    fn default() -> Self {
        BoundGridConfig {
            probs: (1..=9).map(|i| i as f64 / 10.0).collect(),
            min_gap: 0.1,
            epsilons: vec![0.01, 0.05, 0.1],
            noise_kinds: NoiseKind::ALL.to_vec(),
            trials: 1_000_000,
            seed: 0,
        }
    }
}

/// One verified grid cell.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct BoundCell {
    pub scenario: CalibrationScenario,
    pub bound: f64,
    pub empirical: f64,
    pub ci_halfwidth: f64,
    /// Distribution-free validity: empirical minus the CI half-width
    /// must not exceed the bound.
    pub pass: bool,
}

/// Runs the whole grid; cells execute in parallel under per-cell seeds,
/// so the output is independent of scheduling.
pub fn verify_bound_grid(cfg: &BoundGridConfig) -> Result<Vec<BoundCell>> {
    let mut scenarios = Vec::new();
    for &p_h in &cfg.probs {
        for &p_m in &cfg.probs {
            // Slack keeps grid points whose nominal gap equals min_gap
            // but rounds just below it in f64 (e.g. 0.3 - 0.2).
            if (p_h - p_m).abs() < cfg.min_gap - 1e-9 {
                continue;
            }
            for &epsilon in &cfg.epsilons {
                for &noise in &cfg.noise_kinds {
                    scenarios.push(CalibrationScenario {
                        human_confidence: p_h,
                        machine_confidence: p_m,
                        epsilon,
                        noise,
                    });
                }
            }
        }
    }
    scenarios
        .into_par_iter()
        .enumerate()
        .map(|(idx, scenario)| {
            let sim = simulate_misclassification(
                &scenario,
                cfg.trials,
                derive_seed(cfg.seed, idx as u64),
            )?;
            let bound = chebyshev_bound(&scenario);
            Ok(BoundCell {
                scenario,
                bound,
                empirical: sim.rate,
                ci_halfwidth: sim.ci_halfwidth,
                pass: sim.rate - sim.ci_halfwidth <= bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal as StatNormal};

    fn scenario(p_h: f64, p_m: f64, eps: f64, noise: NoiseKind) -> CalibrationScenario {
        CalibrationScenario {
            human_confidence: p_h,
            machine_confidence: p_m,
            epsilon: eps,
            noise,
        }
    }

    #[test]
    fn bound_direct_substitutions() {
        let b = chebyshev_bound(&scenario(0.9, 0.7, 0.05, NoiseKind::Gaussian));
        assert!((b - 0.125).abs() < 1e-15);
        assert_eq!(
            chebyshev_bound(&scenario(0.8, 0.8, 0.2, NoiseKind::Gaussian)),
            1.0
        );
        let b = chebyshev_bound(&scenario(0.9, 0.1, 0.1, NoiseKind::Gaussian));
        assert!((b - 0.03125).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn bound_is_symmetric_and_scales_quadratically(
            p_h in 0.0f64..1.0,
            p_m in 0.0f64..1.0,
            eps in 0.001f64..0.2,
        ) {
            let a = chebyshev_bound(&scenario(p_h, p_m, eps, NoiseKind::Gaussian));
            let b = chebyshev_bound(&scenario(p_m, p_h, eps, NoiseKind::Gaussian));
            prop_assert_eq!(a, b);
            let quarter = chebyshev_bound(&scenario(p_h, p_m, eps / 2.0, NoiseKind::Gaussian));
            if a < 1.0 {
                prop_assert!((quarter - a / 4.0).abs() < 1e-12);
            }
        }

        #[test]
        fn policy_is_translation_invariant(
            g_h in -2.0f64..2.0,
            g_m in -2.0f64..2.0,
            shift in -5.0f64..5.0,
        ) {
            prop_assert_eq!(
                confidence_deferral_policy(g_h, g_m),
                confidence_deferral_policy(g_h + shift, g_m + shift)
            );
        }
    }

    #[test]
    fn policy_decisions() {
        assert_eq!(confidence_deferral_policy(0.9, 0.5), Agent::Human);
        assert_eq!(confidence_deferral_policy(0.5, 0.9), Agent::Machine);
        assert_eq!(confidence_deferral_policy(0.7, 0.7), Agent::Human);
    }

    #[test]
    fn noise_std_matches_epsilon_for_every_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = 0.07;
        for kind in NoiseKind::ALL {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| sample_noise(kind, eps, &mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            assert!(mean.abs() < 1e-3, "{kind}: mean {mean}");
            let std = var.sqrt();
            assert!(
                (std - eps).abs() / eps < 0.02,
                "{kind}: std {std} vs epsilon {eps}"
            );
        }
    }

    #[test]
    fn zero_epsilon_never_misroutes() {
        let s = scenario(0.9, 0.4, 0.0, NoiseKind::Gaussian);
        let r = simulate_misclassification(&s, 10_000, 1).unwrap();
        assert_eq!(r.misroutes, 0);
        assert_eq!(r.rate, 0.0);
    }

    #[test]
    fn gaussian_rate_matches_closed_form() {
        // With independent Gaussian errors the misroute probability is
        // Phi(-gap / (eps * sqrt(2))).
        let s = scenario(0.9, 0.7, 0.05, NoiseKind::Gaussian);
        let r = simulate_misclassification(&s, 1_000_000, 7).unwrap();
        let exact = StatNormal::new(0.0, 1.0)
            .unwrap()
            .cdf(-0.2 / (0.05 * 2.0f64.sqrt()));
        assert!((exact - 0.0023).abs() < 1e-4, "oracle sanity: {exact}");
        let sigma = (exact * (1.0 - exact) / 1e6).sqrt();
        assert!(
            (r.rate - exact).abs() <= 4.0 * sigma,
            "rate {} vs closed form {exact}",
            r.rate
        );
        assert!(r.rate <= chebyshev_bound(&s));
    }

    #[test]
    fn uniform_rate_stays_under_bound() {
        let s = scenario(0.9, 0.7, 0.05, NoiseKind::Uniform);
        let r = simulate_misclassification(&s, 1_000_000, 8).unwrap();
        assert!(r.rate <= 0.125);
    }

    #[test]
    fn too_few_trials_rejected() {
        let s = scenario(0.9, 0.7, 0.05, NoiseKind::Gaussian);
        assert!(simulate_misclassification(&s, 9_999, 0).is_err());
    }

    #[test]
    fn small_grid_passes_everywhere() {
        let cfg = BoundGridConfig {
            probs: vec![0.2, 0.5, 0.8],
            trials: 20_000,
            ..BoundGridConfig::default()
        };
        let cells = verify_bound_grid(&cfg).unwrap();
        // 3 probs -> 6 ordered pairs with gap >= 0.1, x3 eps x3 kinds.
        assert_eq!(cells.len(), 6 * 9);
        assert!(cells.iter().all(|c| c.pass));

        let again = verify_bound_grid(&cfg).unwrap();
        assert_eq!(cells[3].empirical, again[3].empirical);
    }
}
