use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encode::{encode, observation_len};
use super::net::{ActionTarget, Adam, ValueNet};
use super::replay::{ReplayBuffer, Transition};
use crate::error::{Error, Result};
use crate::model::{Vec3, ACTION_COUNT};
use crate::protocol::{run_cycle, CycleReport, Framework, ResourceManager};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    /// Exploitation probability at the first episode (see `greedy_prob_is_epsilon`).
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// When true, epsilon is the probability of acting greedily; otherwise
    /// it is the probability of a random action.
    pub greedy_prob_is_epsilon: bool,
    /// Episodes over which epsilon moves linearly from start to end; it
    /// stays at the end value afterwards.
    pub anneal_episodes: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Target network sync period, in cycles.
    pub target_sync_cycles: usize,
    pub hidden: usize,
    pub depth: usize,
    pub cycles_per_episode: usize,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            epsilon_start: 0.5,
            epsilon_end: 0.95,
            greedy_prob_is_epsilon: true,
            anneal_episodes: 100,
            learning_rate: 1e-3,
            batch_size: 32,
            replay_capacity: 10_000,
            target_sync_cycles: 20,
            hidden: 64,
            depth: 1,
            cycles_per_episode: 40,
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(format!("dqn.{field}"), msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", "must be in [0, 1)");
        }
        for (name, e) in [("epsilon_start", self.epsilon_start), ("epsilon_end", self.epsilon_end)] {
            if !(0.0..=1.0).contains(&e) {
                return bad(name, "must be in [0, 1]");
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity", "must be positive");
        }
        if self.target_sync_cycles == 0 {
            return bad("target_sync_cycles", "must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden", "must be positive");
        }
        if self.cycles_per_episode == 0 {
            return bad("cycles_per_episode", "must be positive");
        }
        Ok(())
    }

    /// Epsilon for `episode` under the linear anneal.
    pub fn epsilon(&self, episode: usize) -> f64 {
        if self.anneal_episodes <= 1 {
            return self.epsilon_end;
        }
        let f = episode.min(self.anneal_episodes - 1) as f64 / (self.anneal_episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * f
    }

    fn greedy_prob(&self, epsilon: f64) -> f64 {
        if self.greedy_prob_is_epsilon {
            epsilon
        } else {
            1.0 - epsilon
        }
    }
}

/// Lowest index among the maximal values.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Greedy with probability `greedy_prob`, otherwise uniform over all actions.
pub fn policy<R: Rng + ?Sized>(values: &[f64], greedy_prob: f64, rng: &mut R) -> usize {
    debug_assert!((0.0..=1.0).contains(&greedy_prob));
    if rng.gen::<f64>() < greedy_prob {
        argmax(values)
    } else {
        rng.gen_range(0..values.len())
    }
}

pub fn td_target(reward: f64, next_values: &[f64], gamma: f64, terminal: bool) -> f64 {
    if terminal {
        reward
    } else {
        reward + gamma * next_values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// One optimizer step on the batch's squared TD error. Returns the loss
/// before the step.
pub fn train_step(
    net: &mut ValueNet,
    target_net: &ValueNet,
    batch: &[&Transition],
    gamma: f64,
    optimizer: &mut Adam,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Domain("empty training batch".into()));
    }
    let mut targets = Vec::with_capacity(batch.len());
    for t in batch {
        let next = if t.terminal {
            Vec::new()
        } else {
            target_net.forward(&t.next_observation)?
        };
        targets.push(td_target(t.reward, &next, gamma, t.terminal));
    }
    let samples: Vec<ActionTarget> = batch
        .iter()
        .zip(&targets)
        .map(|(t, &y)| ActionTarget {
            input: &t.observation,
            action: t.action,
            target: y,
        })
        .collect();
    let (loss, grads) = net.loss_and_gradients(&samples)?;
    optimizer.apply(net, &grads);
    Ok(loss)
}

/// `Σ_t gamma^t r_t`.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    rewards.iter().rev().fold(0.0, |acc, r| r + gamma * acc)
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const ENV_STREAM: u64 = 1;
const INIT_STREAM: u64 = 0x100;
const POLICY_STREAM: u64 = 0x200;
const REPLAY_STREAM: u64 = 0x300;

/// RNG for the environment (sensing and fading draws) of a run.
pub fn environment_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, ENV_STREAM)
}

/// One UAV's learner.
#[derive(Debug, Clone)]
pub struct Agent {
    pub net: ValueNet,
    pub target: ValueNet,
    optimizer: Adam,
    pub replay: ReplayBuffer,
    policy_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(input: usize, config: &DqnConfig, seed: u64, index: u64) -> Self {
        let net = ValueNet::new(
            input,
            config.hidden,
            config.depth,
            ACTION_COUNT,
            &mut stream(seed, INIT_STREAM + index),
        );
        Self {
            target: net.clone(),
            optimizer: Adam::new(&net, config.learning_rate),
            net,
            replay: ReplayBuffer::new(config.replay_capacity),
            policy_rng: stream(seed, POLICY_STREAM + index),
            replay_rng: stream(seed, REPLAY_STREAM + index),
        }
    }

    pub fn act(&mut self, observation: &[f64], greedy_prob: f64) -> Result<usize> {
        let q = self.net.forward(observation)?;
        Ok(policy(&q, greedy_prob, &mut self.policy_rng))
    }

    pub fn greedy(&self, observation: &[f64]) -> Result<usize> {
        Ok(argmax(&self.net.forward(observation)?))
    }

    /// Samples a batch and trains once; `None` until the buffer holds a full batch.
    pub fn learn(&mut self, batch_size: usize, gamma: f64) -> Result<Option<f64>> {
        if self.replay.len() < batch_size {
            return Ok(None);
        }
        let batch = self.replay.sample(batch_size, &mut self.replay_rng);
        train_step(&mut self.net, &self.target, &batch, gamma, &mut self.optimizer).map(Some)
    }

    pub fn sync_target(&mut self) {
        self.target = self.net.clone();
    }
}

/// Sum of the expected valid transmissions per UAV for one cycle.
pub fn rewards_by_uav(scenario: &Scenario, reports: &[CycleReport]) -> Vec<f64> {
    let ids = scenario.uav_ids();
    let mut r = vec![0.0; ids.len()];
    for rep in reports {
        if let Some(k) = ids.iter().position(|&id| id == rep.uav_id) {
            r[k] += rep.reward;
        }
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Discounted return per agent.
    pub per_agent: Vec<f64>,
    pub total: f64,
    /// Undiscounted mean of the per-cycle expected valid transmissions.
    pub mean_valid: f64,
    pub mean_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Training {
    pub agents: Vec<Agent>,
    pub episodes: Vec<EpisodeStats>,
}

impl Training {
    pub fn utility_series(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.total).collect()
    }
}

/// Independent deep Q-learning, one agent per UAV. Every episode starts from
/// the scenario's initial UAV positions.
pub fn run_training(
    scenario: &Scenario,
    framework: Framework,
    config: &DqnConfig,
    episodes: usize,
    seed: u64,
    rrm: &dyn ResourceManager,
) -> Result<Training> {
    config.validate()?;
    let uavs = scenario.uav_ids().len();
    let input = observation_len(uavs);
    let mut agents: Vec<Agent> = (0..uavs).map(|k| Agent::new(input, config, seed, k as u64)).collect();
    let mut env_rng = environment_rng(seed);
    let mut stats = Vec::with_capacity(episodes);
    let mut global_cycle: u64 = 0;

    for episode in 0..episodes {
        let greedy_prob = config.greedy_prob(config.epsilon(episode));
        let mut positions = scenario.initial_uav_positions();
        let mut rewards: Vec<Vec<f64>> = vec![Vec::with_capacity(config.cycles_per_episode); uavs];
        let mut losses = Vec::new();
        let mut observations: Vec<Vec<f64>> = (0..uavs).map(|k| encode(scenario, k, &positions)).collect();
        for t in 0..config.cycles_per_episode {
            let actions = agents
                .iter_mut()
                .zip(&observations)
                .map(|(a, obs)| a.act(obs, greedy_prob))
                .collect::<Result<Vec<_>>>()?;
            let out = run_cycle(scenario, framework, &positions, &actions, rrm, global_cycle, &mut env_rng)?;
            let r = rewards_by_uav(scenario, &out.reports);
            positions = out.positions;
            let terminal = t + 1 == config.cycles_per_episode;
            for (k, agent) in agents.iter_mut().enumerate() {
                let next = encode(scenario, k, &positions);
                agent.replay.push(Transition {
                    observation: std::mem::replace(&mut observations[k], next.clone()),
                    action: actions[k],
                    reward: r[k],
                    next_observation: next,
                    terminal,
                });
                rewards[k].push(r[k]);
                if let Some(l) = agent.learn(config.batch_size, config.gamma)? {
                    losses.push(l);
                }
            }
            global_cycle += 1;
            if global_cycle % config.target_sync_cycles as u64 == 0 {
                agents.iter_mut().for_each(Agent::sync_target);
            }
        }
        let per_agent: Vec<f64> = rewards.iter().map(|r| discounted_return(r, config.gamma)).collect();
        let cycles = config.cycles_per_episode as f64;
        stats.push(EpisodeStats {
            episode,
            total: per_agent.iter().sum(),
            per_agent,
            mean_valid: rewards.iter().flatten().sum::<f64>() / cycles,
            mean_loss: (!losses.is_empty()).then(|| losses.iter().sum::<f64>() / losses.len() as f64),
        });
    }
    Ok(Training {
        agents,
        episodes: stats,
    })
}

/// Greedy roll-out of trained agents from the initial positions.
pub fn rollout_greedy(
    scenario: &Scenario,
    framework: Framework,
    agents: &[Agent],
    cycles: usize,
    rrm: &dyn ResourceManager,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<Vec<CycleReport>>, Vec<Vec<Vec3>>)> {
    let mut positions = scenario.initial_uav_positions();
    let mut reports = Vec::with_capacity(cycles);
    let mut tracks = Vec::with_capacity(cycles);
    for c in 0..cycles {
        let actions = agents
            .iter()
            .enumerate()
            .map(|(k, a)| a.greedy(&encode(scenario, k, &positions)))
            .collect::<Result<Vec<_>>>()?;
        let out = run_cycle(scenario, framework, &positions, &actions, rrm, c as u64, rng)?;
        positions = out.positions;
        tracks.push(positions.clone());
        reports.push(out.reports);
    }
    Ok((reports, tracks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn epsilon_one_is_greedy_and_zero_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut values = vec![0.0; ACTION_COUNT];
        values[7] = 1.0;
        for _ in 0..1000 {
            assert_eq!(policy(&values, 1.0, &mut rng), 7);
        }
        let draws = 100_000;
        let mut counts = [0usize; ACTION_COUNT];
        for _ in 0..draws {
            counts[policy(&values, 0.0, &mut rng)] += 1;
        }
        let expected = draws as f64 / ACTION_COUNT as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 26 degrees of freedom, 99.9th percentile is about 54.05
        assert!(chi2 < 54.05, "chi2 = {chi2}");
    }

    #[test]
    fn greedy_is_seed_independent_and_ties_pick_lowest() {
        let values: Vec<f64> = (0..ACTION_COUNT).map(|k| ((k * 7) % 27) as f64).collect();
        let want = argmax(&values);
        for s in 0..20 {
            assert_eq!(policy(&values, 1.0, &mut ChaCha8Rng::seed_from_u64(s)), want);
        }
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
    }

    #[test]
    fn conventional_flag_inverts_epsilon() {
        let c = DqnConfig {
            greedy_prob_is_epsilon: false,
            ..DqnConfig::default()
        };
        assert_eq!(c.greedy_prob(0.1), 0.9);
        assert_eq!(DqnConfig::default().greedy_prob(0.1), 0.1);
    }

    #[test]
    fn td_target_examples() {
        assert_eq!(td_target(0.3, &[5.0, 9.0], 0.0, false), 0.3);
        assert_eq!(td_target(0.3, &[5.0, 9.0], 0.9, true), 0.3);
        assert!((td_target(0.5, &[0.2, 1.0, -3.0], 0.9, false) - 1.4).abs() < 1e-12);
    }

    #[test]
    fn epsilon_schedule_endpoints() {
        let c = DqnConfig::default();
        assert_eq!(c.epsilon(0), 0.5);
        assert!((c.epsilon(99) - 0.95).abs() < 1e-12);
        assert!(c.epsilon(40) < c.epsilon(41));
        assert_eq!(c.epsilon(500), c.epsilon(99));
    }

    #[test]
    fn discounted_return_matches_direct_sum() {
        let r = [0.2, 0.0, 1.0, 0.7, 0.4];
        let direct: f64 = r.iter().enumerate().map(|(t, x)| 0.9f64.powi(t as i32) * x).sum();
        assert!((discounted_return(&r, 0.9) - direct).abs() < 1e-12);
    }

    fn transition(obs: Vec<f64>, action: usize, reward: f64) -> Transition {
        Transition {
            next_observation: obs.clone(),
            observation: obs,
            action,
            reward,
            terminal: true,
        }
    }

    #[test]
    fn matching_targets_leave_weights_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut net = ValueNet::new(4, 8, 1, ACTION_COUNT, &mut rng);
        let obs = vec![0.1, -0.2, 0.3, 0.4];
        let q = net.forward(&obs).unwrap();
        let t = transition(obs, 5, q[5]);
        let before = net.clone();
        let mut opt = Adam::new(&net, 1e-3);
        let loss = train_step(&mut net, &before, &[&t], 0.9, &mut opt).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn repeated_steps_shrink_td_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = ValueNet::new(4, 16, 1, ACTION_COUNT, &mut rng);
        let target = net.clone();
        let t = transition(vec![0.5, -0.5, 0.25, 1.0], 3, 2.0);
        let mut opt = Adam::new(&net, 1e-2);
        let mut losses = Vec::new();
        for _ in 0..300 {
            losses.push(train_step(&mut net, &target, &[&t], 0.9, &mut opt).unwrap());
        }
        assert!(losses[299] < 1e-3 * losses[0]);
        let windows: Vec<f64> = losses.chunks(50).map(|c| c.iter().sum::<f64>()).collect();
        assert!(windows.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn target_net_frozen_between_syncs() {
        let mut agent = Agent::new(24, &DqnConfig::default(), 1, 0);
        let x = vec![0.05; 24];
        let frozen = agent.target.forward(&x).unwrap();
        for k in 0..40 {
            agent.replay.push(transition(vec![0.01 * k as f64; 24], k % 27, 1.0));
        }
        for _ in 0..5 {
            agent.learn(32, 0.9).unwrap().unwrap();
        }
        assert_eq!(agent.target.forward(&x).unwrap(), frozen);
        assert_ne!(agent.net.forward(&x).unwrap(), frozen);
        agent.sync_target();
        assert_eq!(agent.target.forward(&x).unwrap(), agent.net.forward(&x).unwrap());
    }
}
