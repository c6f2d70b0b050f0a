use serde::{Deserialize, Serialize};

use super::config::Config;
use crate::error::{Error, Result};
use crate::model::Vec3;
use crate::protocol::{CycleReport, FrameOutcome, Framework, IterativeRrm, TransmissionMode};
use crate::rl::{rollout_greedy, run_training, Agent, EpisodeStats};
use crate::scenario::Scenario;

/// Frame outcomes tallied over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCounts {
    pub u2n: u64,
    pub u2u: u64,
    pub u2d: u64,
    pub idle: u64,
    pub no_subchannel: u64,
}

impl FrameCounts {
    pub fn add(&mut self, f: FrameOutcome) {
        match f {
            FrameOutcome::Transmit { mode, .. } => match mode {
                TransmissionMode::U2N => self.u2n += 1,
                TransmissionMode::U2U => self.u2u += 1,
                TransmissionMode::U2D => self.u2d += 1,
            },
            FrameOutcome::Idle => self.idle += 1,
            FrameOutcome::NoSubchannel => self.no_subchannel += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.u2n + self.u2u + self.u2d + self.idle + self.no_subchannel
    }
}

/// Greedy-policy evaluation phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cycles: usize,
    pub links: usize,
    pub frames_per_cycle: u32,
    /// Mean over cycles of the summed expected valid transmissions.
    pub mean_valid: f64,
    /// Mean over cycles of the realized valid-transmission count.
    pub mean_realized_valid: f64,
    pub frame_counts: FrameCounts,
    pub reports: Vec<CycleReport>,
    /// UAV positions at the end of every cycle.
    pub tracks: Vec<Vec<Vec3>>,
}

impl Evaluation {
    pub fn from_reports(scenario: &Scenario, reports: Vec<Vec<CycleReport>>, tracks: Vec<Vec<Vec3>>) -> Self {
        let cycles = reports.len();
        let mut counts = FrameCounts::default();
        let (mut expected, mut realized) = (0.0, 0usize);
        for r in reports.iter().flatten() {
            expected += r.reward;
            realized += usize::from(r.valid);
            r.frames.iter().for_each(|&f| counts.add(f));
        }
        let denom = cycles.max(1) as f64;
        Self {
            cycles,
            links: scenario.link_count(),
            frames_per_cycle: scenario.frames_per_cycle,
            mean_valid: expected / denom,
            mean_realized_valid: realized as f64 / denom,
            frame_counts: counts,
            reports: reports.into_iter().flatten().collect(),
            tracks,
        }
    }

    /// Every link has exactly one outcome per frame.
    pub fn accounting_holds(&self) -> bool {
        self.frame_counts.total() == self.frames_per_cycle as u64 * self.links as u64 * self.cycles as u64
    }
}

#[derive(Debug, Clone)]
pub struct Metrics {
    pub seed: u64,
    pub framework: Framework,
    pub subchannels: usize,
    pub training: Vec<EpisodeStats>,
    pub evaluation: Evaluation,
    pub agents: Vec<Agent>,
}

const EVAL_STREAM: u64 = 0x500;

fn eval_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(EVAL_STREAM);
    rng
}

/// Trains on `scenario`, then evaluates the greedy policy.
pub fn run_on_scenario(config: &Config, scenario: &Scenario, framework: Framework, seed: u64) -> Result<Metrics> {
    let rrm = IterativeRrm::new((&scenario.rrm).into());
    let training = run_training(scenario, framework, &config.dqn, config.experiment.episodes, seed, &rrm)?;
    let (reports, tracks) = rollout_greedy(
        scenario,
        framework,
        &training.agents,
        config.experiment.eval_cycles,
        &rrm,
        &mut eval_rng(seed),
    )?;
    let evaluation = Evaluation::from_reports(scenario, reports, tracks);
    Ok(Metrics {
        seed,
        framework,
        subchannels: scenario.subchannels,
        training: training.episodes,
        evaluation,
        agents: training.agents,
    })
}

/// Full pipeline for one seed under the configured framework.
pub fn run_experiment(config: &Config, seed: u64) -> Result<Metrics> {
    if config.experiment.eval_cycles < 20 {
        return Err(Error::config("experiment.eval_cycles", "must be >= 20"));
    }
    config.dqn.validate()?;
    let scenario = config.scenario.build(seed)?;
    run_on_scenario(config, &scenario, config.experiment.framework, seed)
}

/// Every link goes through the BS; non-BS destinations get a second
/// downlink hop on a dedicated channel.
pub fn baseline_cellular(config: &Config, seed: u64) -> Result<Metrics> {
    let mut c = config.clone();
    c.experiment.framework = Framework::Cellular;
    run_experiment(&c, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub subchannels: usize,
    pub framework: Framework,
    pub mean_valid: f64,
    pub std_error: f64,
    pub mean_realized_valid: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub points: Vec<SweepPoint>,
    /// Per seed, per sweep point: (U2X, cellular) mean valid transmissions.
    pub paired: Vec<(u64, usize, f64, f64)>,
}

impl SweepTable {
    pub fn point(&self, subchannels: usize, framework: Framework) -> Option<&SweepPoint> {
        self.points
            .iter()
            .find(|p| p.subchannels == subchannels && p.framework == framework)
    }

    /// `(u2x - cellular) / cellular` at a sweep point.
    pub fn relative_gap(&self, subchannels: usize) -> Option<f64> {
        let u = self.point(subchannels, Framework::U2x)?.mean_valid;
        let c = self.point(subchannels, Framework::Cellular)?.mean_valid;
        Some(if c > 0.0 { (u - c) / c } else if u > 0.0 { f64::INFINITY } else { 0.0 })
    }

    pub fn subchannel_counts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.points.iter().map(|p| p.subchannels).collect();
        v.dedup();
        v
    }
}

/// Sorted, duplicate-free sweep values.
pub fn sweep_values(values: &[usize]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Both frameworks at every subchannel count, on identical seeds and layouts.
pub fn sweep_subchannels(config: &Config) -> Result<SweepTable> {
    let counts = sweep_values(&config.experiment.subchannels);
    if counts.len() < 2 {
        return Err(Error::config("experiment.subchannels", "need at least two distinct sweep points"));
    }
    if let Some(k) = counts.iter().position(|&s| s == 0) {
        return Err(Error::config(format!("experiment.subchannels[{k}]"), "must be >= 1"));
    }
    let seeds = &config.experiment.seeds;
    let mut points = Vec::new();
    let mut paired = Vec::new();
    let mut per_point: Vec<[Vec<(f64, f64)>; 2]> = vec![[Vec::new(), Vec::new()]; counts.len()];
    for &seed in seeds {
        let base = config.scenario.build(seed)?;
        for (k, &s) in counts.iter().enumerate() {
            let scenario = base.with_subchannels(s);
            let u = run_on_scenario(config, &scenario, Framework::U2x, seed)?.evaluation;
            let c = run_on_scenario(config, &scenario, Framework::Cellular, seed)?.evaluation;
            paired.push((seed, s, u.mean_valid, c.mean_valid));
            per_point[k][0].push((u.mean_valid, u.mean_realized_valid));
            per_point[k][1].push((c.mean_valid, c.mean_realized_valid));
        }
    }
    for (k, &s) in counts.iter().enumerate() {
        for (f, framework) in [Framework::U2x, Framework::Cellular].into_iter().enumerate() {
            let expected: Vec<f64> = per_point[k][f].iter().map(|x| x.0).collect();
            let realized: Vec<f64> = per_point[k][f].iter().map(|x| x.1).collect();
            let (mean_valid, std_error) = mean_and_std_error(&expected);
            points.push(SweepPoint {
                subchannels: s,
                framework,
                mean_valid,
                std_error,
                mean_realized_valid: mean_and_std_error(&realized).0,
                seeds: seeds.len(),
            });
        }
    }
    Ok(SweepTable { points, paired })
}
