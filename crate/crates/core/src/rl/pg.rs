//! Score-function (REINFORCE) comparator with a linear softmax policy.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dqn::{discounted_return, environment_rng, rewards_by_uav, EpisodeStats};
use super::encode::{encode, observation_len};
use crate::error::Result;
use crate::model::ACTION_COUNT;
use crate::protocol::{run_cycle, Framework, ResourceManager};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PgConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub cycles_per_episode: usize,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            learning_rate: 0.05,
            cycles_per_episode: 40,
        }
    }
}

/// Logits `W x + b` over the 27 actions.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    pub inputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn new(inputs: usize) -> Self {
        Self {
            inputs,
            weights: vec![0.0; inputs * ACTION_COUNT],
            bias: vec![0.0; ACTION_COUNT],
        }
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let logits: Vec<f64> = self
            .weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / z).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> usize {
        let p = self.probabilities(x);
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc {
                return k;
            }
        }
        ACTION_COUNT - 1
    }

    /// Gradient ascent on `advantage * log pi(a|x)`.
    pub fn reinforce(&mut self, x: &[f64], action: usize, advantage: f64, lr: f64) {
        let p = self.probabilities(x);
        for (k, pk) in p.iter().enumerate() {
            let g = advantage * (f64::from(u8::from(k == action)) - pk);
            self.bias[k] += lr * g;
            for (w, v) in self.weights[k * self.inputs..(k + 1) * self.inputs].iter_mut().zip(x) {
                *w += lr * g * v;
            }
        }
    }
}

/// Independent REINFORCE learners, one per UAV, with a running-mean baseline
/// on the return-to-go.
pub fn run_policy_gradient(
    scenario: &Scenario,
    framework: Framework,
    config: &PgConfig,
    episodes: usize,
    seed: u64,
    rrm: &dyn ResourceManager,
) -> Result<Vec<EpisodeStats>> {
    use rand::SeedableRng;
    let uavs = scenario.uav_ids().len();
    let mut policies = vec![SoftmaxPolicy::new(observation_len(uavs)); uavs];
    let mut baselines = vec![0.0; uavs];
    let mut env_rng = environment_rng(seed);
    let mut act_rng = ChaCha8Rng::seed_from_u64(seed);
    act_rng.set_stream(0x400);
    let mut stats = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let mut positions = scenario.initial_uav_positions();
        let mut trace: Vec<Vec<(Vec<f64>, usize, f64)>> = vec![Vec::new(); uavs];
        for t in 0..config.cycles_per_episode {
            let obs: Vec<Vec<f64>> = (0..uavs).map(|k| encode(scenario, k, &positions)).collect();
            let actions: Vec<usize> = policies.iter().zip(&obs).map(|(p, x)| p.sample(x, &mut act_rng)).collect();
            let out = run_cycle(scenario, framework, &positions, &actions, rrm, t as u64, &mut env_rng)?;
            let r = rewards_by_uav(scenario, &out.reports);
            positions = out.positions;
            for (k, x) in obs.into_iter().enumerate() {
                trace[k].push((x, actions[k], r[k]));
            }
        }
        let mut per_agent = Vec::with_capacity(uavs);
        let mut undiscounted = 0.0;
        for k in 0..uavs {
            let rewards: Vec<f64> = trace[k].iter().map(|s| s.2).collect();
            undiscounted += rewards.iter().sum::<f64>();
            per_agent.push(discounted_return(&rewards, config.gamma));
            let mut g = 0.0;
            for (x, a, r) in trace[k].iter().rev() {
                g = r + config.gamma * g;
                policies[k].reinforce(x, *a, g - baselines[k], config.learning_rate);
            }
            baselines[k] += 0.1 * (per_agent[k] - baselines[k]);
        }
        stats.push(EpisodeStats {
            episode,
            total: per_agent.iter().sum(),
            per_agent,
            mean_valid: undiscounted / config.cycles_per_episode as f64,
            mean_loss: None,
        });
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_policy_is_uniform() {
        let p = SoftmaxPolicy::new(3).probabilities(&[0.3, -1.0, 2.0]);
        assert!(p.iter().all(|&x| (x - 1.0 / 27.0).abs() < 1e-15));
    }

    #[test]
    fn positive_advantage_raises_chosen_action() {
        let mut pi = SoftmaxPolicy::new(2);
        let x = [1.0, 0.5];
        let before = pi.probabilities(&x)[4];
        pi.reinforce(&x, 4, 1.0, 0.5);
        assert!(pi.probabilities(&x)[4] > before);
        let s: f64 = pi.probabilities(&x).iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
