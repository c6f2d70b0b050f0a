//! Reference implementations used by the integration tests. Nothing here
//! calls into the allocation, learning or protocol code under test; only
//! plain data types and the path-loss model are shared.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use u2x::channel::{ChannelParams, LinkClass};
use u2x::model::{Vec3, GROUND_HEIGHT};
use u2x::protocol::TransmissionMode;
use u2x::rrm::{Assignment, Occupant, PowerVector, RrmLink, RrmProblem};

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Pr[X >= n] for X ~ Bin(f, q), summed term by term.
pub fn binomial_tail(f: u32, q: f64, n: u32) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if n > f {
        return 0.0;
    }
    let mut total = 0.0;
    for k in n..=f {
        let mut c = 1.0;
        for m in 0..k {
            c *= f64::from(f - m) / f64::from(m + 1);
        }
        total += c * q.powi(k as i32) * (1.0 - q).powi((f - k) as i32);
    }
    total
}

/// Rayleigh block fading: Pr[log2(1 + sinr * h) >= rho], h ~ Exp(1).
pub fn rayleigh_frame_prob(sinr: f64, rho: f64) -> f64 {
    if sinr <= 0.0 {
        return 0.0;
    }
    (-(2f64.powf(rho) - 1.0) / sinr).exp()
}

/// Log-distance gain computed from the model constants directly.
pub fn gain(ch: &ChannelParams, a: Vec3, b: Vec3, class: LinkClass) -> f64 {
    let m = ch.model(class);
    let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)).sqrt().max(1.0);
    10f64.powf(-(m.ref_loss_db + 10.0 * m.exponent * d.log10()) / 10.0)
}

/// Independent view of an allocation problem: gains, floors and the
/// per-link valid probability as a function of SINR.
pub struct Oracle<'a> {
    pub problem: &'a RrmProblem,
    /// `g[rx][tx]`
    pub g: Vec<Vec<f64>>,
    /// `floor[rx][subchannel]`, mW
    pub floor: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl<'a> Oracle<'a> {
    pub fn new(problem: &'a RrmProblem, weights: &[f64]) -> Self {
        let ch = &problem.channel;
        let noise = dbm_to_mw(ch.noise_dbm);
        let class = |air: bool| if air { LinkClass::AirToAir } else { LinkClass::AirToGround };
        let g = problem
            .links
            .iter()
            .map(|rx| problem.links.iter().map(|tx| gain(ch, tx.tx, rx.rx, class(rx.rx_airborne))).collect())
            .collect();
        let floor = problem
            .links
            .iter()
            .map(|rx| {
                problem
                    .occupants
                    .iter()
                    .map(|o| match o {
                        Some(o) => {
                            let c = if rx.rx_airborne { LinkClass::AirToGround } else { LinkClass::GroundDownlink };
                            noise + dbm_to_mw(o.power_dbm) * gain(ch, o.tx, rx.rx, c)
                        }
                        None => noise,
                    })
                    .collect()
            })
            .collect();
        Self {
            problem,
            g,
            floor,
            weights: weights.to_vec(),
        }
    }

    pub fn links(&self) -> usize {
        self.problem.links.len()
    }

    pub fn is_underlay(&self, i: usize) -> bool {
        self.problem.links[i].mode != TransmissionMode::U2N
    }

    pub fn sinr(&self, i: usize, j: usize, members: &[usize], powers: &[f64]) -> f64 {
        let interference: f64 = members.iter().filter(|&&k| k != i).map(|&k| self.g[i][k] * powers[k]).sum();
        self.g[i][i] * powers[i] / (interference + self.floor[i][j])
    }

    pub fn rate(&self, i: usize, j: usize, members: &[usize], powers: &[f64]) -> f64 {
        (1.0 + self.sinr(i, j, members, powers)).log2()
    }

    pub fn valid(&self, i: usize, j: usize, members: &[usize], powers: &[f64]) -> f64 {
        let l = &self.problem.links[i];
        let q = rayleigh_frame_prob(self.sinr(i, j, members, powers), l.rho);
        l.sensing_prob * binomial_tail(self.problem.frames, q, l.packets) * l.onward_prob
    }

    /// Unweighted sum of expected valid transmissions on `j`.
    pub fn subchannel_valid(&self, j: usize, members: &[usize], powers: &[f64]) -> f64 {
        members.iter().map(|&i| self.valid(i, j, members, powers)).sum()
    }

    pub fn weighted(&self, j: usize, members: &[usize], powers: &[f64]) -> f64 {
        members.iter().map(|&i| self.weights[i] * self.valid(i, j, members, powers)).sum()
    }

    pub fn members(&self, assignment: &Assignment, j: usize) -> Vec<usize> {
        (0..self.links()).filter(|&i| assignment.channel_of[i] == Some(j)).collect()
    }

    /// Weighted utility of a full allocation.
    pub fn utility(&self, assignment: &Assignment, powers: &PowerVector) -> f64 {
        (0..self.problem.subchannels())
            .map(|j| self.weighted(j, &self.members(assignment, j), &powers.mw))
            .sum()
    }

    /// Overlay and cap rules for the links on subchannel `j`.
    pub fn feasible(&self, j: usize, members: &[usize]) -> bool {
        let u2n = members.iter().filter(|&&i| !self.is_underlay(i)).count();
        let under = members.len() - u2n;
        u2n <= 1 && (u2n == 0 || self.problem.occupants[j].is_none()) && under <= self.problem.underlay_cap
    }

    /// Best weighted utility of `members` on `j` over the geometric power grid.
    ///
    /// Multiplying every power by the grid ratio raises every SINR, so some
    /// optimal grid point has at least one link at the top; only those
    /// points are visited.
    pub fn best_on_grid(&self, j: usize, members: &[usize], grid: &[f64]) -> f64 {
        let n = self.links();
        let top = grid.len() - 1;
        let mut best = 0.0f64;
        let mut idx = vec![0usize; members.len()];
        let mut powers = vec![0.0; n];
        loop {
            if idx.iter().any(|&k| k == top) {
                for (m, &i) in members.iter().enumerate() {
                    powers[i] = grid[idx[m]];
                }
                best = best.max(self.weighted(j, members, &powers));
            }
            let mut d = 0;
            loop {
                if d == idx.len() {
                    return best;
                }
                idx[d] += 1;
                if idx[d] <= top {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    /// Joint optimum over every feasible assignment (including leaving
    /// links idle) and a per-link geometric power grid.
    pub fn exhaustive_optimum(&self, grid_points: usize) -> f64 {
        let p_max = dbm_to_mw(self.problem.p_max_dbm);
        let lo = 1e-3 * p_max;
        let grid: Vec<f64> = (0..grid_points)
            .map(|k| lo * (p_max / lo).powf(k as f64 / (grid_points - 1) as f64))
            .collect();
        let n = self.links();
        let s = self.problem.subchannels();
        let mut cache: HashMap<(usize, u32), f64> = HashMap::new();
        let mut choice = vec![0usize; n]; // 0 = idle, j + 1 = subchannel j
        let mut best = 0.0f64;
        loop {
            let mut total = 0.0;
            let mut ok = true;
            for j in 0..s {
                let members: Vec<usize> = (0..n).filter(|&i| choice[i] == j + 1).collect();
                if members.is_empty() {
                    continue;
                }
                if !self.feasible(j, &members) {
                    ok = false;
                    break;
                }
                let mask = members.iter().fold(0u32, |m, &i| m | (1 << i));
                total += *cache
                    .entry((j, mask))
                    .or_insert_with(|| self.best_on_grid(j, &members, &grid));
            }
            if ok {
                best = best.max(total);
            }
            let mut d = 0;
            loop {
                if d == n {
                    return best;
                }
                choice[d] += 1;
                if choice[d] <= s {
                    break;
                }
                choice[d] = 0;
                d += 1;
            }
        }
    }

    /// Every (underlay link, subchannel) pair where the link strictly
    /// prefers the subchannel and the subchannel strictly gains by taking it.
    pub fn blocking_pairs(&self, assignment: &Assignment, powers: &[f64], margin: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in (0..self.links()).filter(|&i| self.is_underlay(i)) {
            let current = match assignment.channel_of[i] {
                Some(j) => self.rate(i, j, &self.members(assignment, j), powers),
                None => f64::NEG_INFINITY,
            };
            for j in 0..self.problem.subchannels() {
                if assignment.channel_of[i] == Some(j) {
                    continue;
                }
                let before: Vec<usize> = self.members(assignment, j);
                let under = before.iter().filter(|&&k| self.is_underlay(k)).count();
                if under >= self.problem.underlay_cap {
                    continue;
                }
                let mut after = before.clone();
                after.push(i);
                let prefers = self.rate(i, j, &after, powers) > current;
                let gains = self.subchannel_valid(j, &after, powers) > self.subchannel_valid(j, &before, powers) + margin;
                if prefers && gains {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

fn disc(rng: &mut impl Rng, radius: f64, z: f64) -> Vec3 {
    let r = radius * rng.gen::<f64>().sqrt();
    let t = rng.gen::<f64>() * std::f64::consts::TAU;
    Vec3::new(r * t.cos(), r * t.sin(), z)
}

/// Random allocation instance: links of random mode in a compact cell, and
/// occasionally a terrestrial occupant on a subchannel.
pub fn random_problem(rng: &mut impl Rng, links: usize, subchannels: usize) -> RrmProblem {
    let bs = Vec3::new(0.0, 0.0, GROUND_HEIGHT);
    let links = (0..links)
        .map(|i| {
            let z = rng.gen_range(50.0..150.0);
            let tx = disc(rng, 300.0, z);
            let mode = [TransmissionMode::U2N, TransmissionMode::U2D, TransmissionMode::U2U][rng.gen_range(0..3)];
            let (rx, rx_airborne) = match mode {
                TransmissionMode::U2N => (bs, false),
                TransmissionMode::U2D => {
                    let d = disc(rng, 150.0, 0.0);
                    (Vec3::new(tx.x + d.x, tx.y + d.y, GROUND_HEIGHT), false)
                }
                TransmissionMode::U2U => {
                    let d = disc(rng, 200.0, 0.0);
                    let z = rng.gen_range(50.0..150.0);
                    (Vec3::new(tx.x + d.x, tx.y + d.y, z), true)
                }
            };
            RrmLink {
                link: i,
                mode,
                tx,
                rx,
                rx_airborne,
                sensing_prob: rng.gen_range(0.2..1.0),
                packets: rng.gen_range(2..=5),
                rho: 1.0,
                onward_prob: if rng.gen_bool(0.3) { rng.gen_range(0.5..1.0) } else { 1.0 },
            }
        })
        .collect();
    let occupants = (0..subchannels)
        .map(|_| {
            rng.gen_bool(0.25).then(|| Occupant {
                tx: disc(rng, 400.0, GROUND_HEIGHT),
                power_dbm: 10.0,
            })
        })
        .collect();
    RrmProblem {
        links,
        occupants,
        channel: ChannelParams::default(),
        p_max_dbm: 10.0,
        frames: 10,
        underlay_cap: 2,
    }
}

/// Optimal action set of every state of a deterministic MDP by value iteration.
pub fn value_iteration(
    states: usize,
    actions: usize,
    step: impl Fn(usize, usize) -> (usize, f64),
    gamma: f64,
    tie_tol: f64,
) -> Vec<Vec<usize>> {
    let mut v = vec![0.0f64; states];
    loop {
        let mut delta = 0.0f64;
        let next: Vec<f64> = (0..states)
            .map(|s| {
                (0..actions)
                    .map(|a| {
                        let (t, r) = step(s, a);
                        r + gamma * v[t]
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        for (a, b) in v.iter().zip(&next) {
            delta = delta.max((a - b).abs());
        }
        v = next;
        if delta < 1e-13 {
            break;
        }
    }
    (0..states)
        .map(|s| {
            let q: Vec<f64> = (0..actions)
                .map(|a| {
                    let (t, r) = step(s, a);
                    r + gamma * v[t]
                })
                .collect();
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..actions).filter(|&a| q[a] >= best - tie_tol).collect()
        })
        .collect()
}
