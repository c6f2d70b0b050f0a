//! Radio resource management at the BS: subchannel allocation and power
//! control, alternated until the weighted utility stops improving.
//!
//! U2N links overlay free subchannels one-to-one ([`allocate_u2n_overlay`]);
//! U2U/U2D links underlay any subchannel through a propose/accept matching
//! ([`match_subchannels`]); powers are then set per subchannel by successive
//! convex approximation ([`power_control_subchannel`]). Only large-scale
//! fading enters any of these decisions.

mod matching;
mod overlay;
mod power;

pub use matching::{is_pairwise_stable, match_subchannels, MatchOutcome, ACCEPT_MARGIN};
use matching::{match_subchannels_with, RetuneCache};
pub use overlay::{allocate_u2n_overlay, max_weight_assignment};
pub use power::{power_control_subchannel, PowerOutcome};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel::{self, dbm_to_mw, mw_to_dbm, ChannelParams, LinkClass, MeanSinr};
use crate::model::Vec3;
use crate::protocol::{transmission_success_prob, valid_prob, TransmissionMode};
use crate::scenario::RrmParams;

/// One link as seen by the BS when it allocates resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrmLink {
    /// Index of the task this link serves.
    pub link: usize,
    pub mode: TransmissionMode,
    pub tx: Vec3,
    pub rx: Vec3,
    pub rx_airborne: bool,
    pub sensing_prob: f64,
    pub packets: u32,
    /// Spectral load of one packet, bit/s/Hz.
    pub rho: f64,
    /// Success probability of any hop after the UAV's own (1 when none).
    pub onward_prob: f64,
}

/// A terrestrial transmitter fixed on one subchannel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupant {
    pub tx: Vec3,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrmProblem {
    pub links: Vec<RrmLink>,
    /// Per subchannel: `Some` when a cellular UE occupies it.
    pub occupants: Vec<Option<Occupant>>,
    pub channel: ChannelParams,
    pub p_max_dbm: f64,
    pub frames: u32,
    pub underlay_cap: usize,
}

impl RrmProblem {
    pub fn subchannels(&self) -> usize {
        self.occupants.len()
    }

    pub fn p_max_mw(&self) -> f64 {
        dbm_to_mw(self.p_max_dbm)
    }

    pub fn is_free(&self, j: usize) -> bool {
        self.occupants[j].is_none()
    }
}

/// Linear gains precomputed from geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGains {
    /// `cross[i][k]`: gain from the transmitter of link `k` to the receiver
    /// of link `i`; the diagonal is the desired-signal gain.
    pub cross: Vec<Vec<f64>>,
    /// `floor[i][j]`: noise plus occupant interference at the receiver of
    /// link `i` on subchannel `j`, in mW.
    pub floor: Vec<Vec<f64>>,
}

impl ChannelGains {
    pub fn from_problem(problem: &RrmProblem) -> Self {
        let ch = &problem.channel;
        let noise = ch.noise_mw();
        let cross = problem
            .links
            .iter()
            .map(|rx| {
                problem
                    .links
                    .iter()
                    .map(|tx| ch.link_gain(tx.tx, rx.rx, LinkClass::between(true, rx.rx_airborne)))
                    .collect()
            })
            .collect();
        let floor = problem
            .links
            .iter()
            .map(|rx| {
                problem
                    .occupants
                    .iter()
                    .map(|occ| match occ {
                        Some(o) => {
                            let class = LinkClass::between(false, rx.rx_airborne);
                            noise + dbm_to_mw(o.power_dbm) * ch.link_gain(o.tx, rx.rx, class)
                        }
                        None => noise,
                    })
                    .collect()
            })
            .collect();
        Self { cross, floor }
    }

    pub fn len(&self) -> usize {
        self.cross.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cross.is_empty()
    }
}

/// Binary allocation: each link holds at most one subchannel per cycle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub channel_of: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(links: usize) -> Self {
        Self {
            channel_of: vec![None; links],
        }
    }

    /// The allocation indicator for link `i` on subchannel `j`.
    pub fn psi(&self, i: usize, j: usize) -> u8 {
        u8::from(self.channel_of[i] == Some(j))
    }

    pub fn members(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.channel_of
            .iter()
            .enumerate()
            .filter(move |(_, c)| **c == Some(j))
            .map(|(i, _)| i)
    }

    /// Checks the overlay rule: one U2N link per free subchannel, none on
    /// occupied subchannels, and at most `cap` underlay links per subchannel.
    pub fn check(&self, problem: &RrmProblem) -> Result<(), String> {
        if self.channel_of.len() != problem.links.len() {
            return Err("assignment length differs from link count".into());
        }
        for j in 0..problem.subchannels() {
            let mut u2n = 0;
            let mut underlay = 0;
            for i in self.members(j) {
                match problem.links[i].mode {
                    TransmissionMode::U2N => u2n += 1,
                    _ => underlay += 1,
                }
            }
            if u2n > 1 {
                return Err(format!("subchannel {j} carries {u2n} U2N links"));
            }
            if u2n == 1 && !problem.is_free(j) {
                return Err(format!("U2N link on cellular-occupied subchannel {j}"));
            }
            if underlay > problem.underlay_cap {
                return Err(format!("subchannel {j} carries {underlay} underlay links"));
            }
        }
        if let Some(j) = self.channel_of.iter().flatten().find(|&&j| j >= problem.subchannels()) {
            return Err(format!("subchannel {j} out of range"));
        }
        Ok(())
    }
}

/// Transmit powers in mW, one per link (unassigned links keep a nominal value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerVector {
    pub mw: Vec<f64>,
}

impl PowerVector {
    pub fn uniform(links: usize, mw: f64) -> Self {
        Self { mw: vec![mw; links] }
    }

    pub fn dbm(&self, i: usize) -> f64 {
        mw_to_dbm(self.mw[i])
    }
}

/// Weights proportional to data volume, normalized so they sum to the link count.
pub fn utility_weights(packets: &[u32]) -> Vec<f64> {
    if packets.is_empty() {
        return Vec::new();
    }
    let mean = packets.iter().map(|&p| f64::from(p)).sum::<f64>() / packets.len() as f64;
    if mean <= 0.0 {
        return vec![1.0; packets.len()];
    }
    packets.iter().map(|&p| f64::from(p) / mean).collect()
}

/// SINR of link `i` if it sits on `j` alongside the current members of `j`.
pub fn sinr_on(gains: &ChannelGains, assignment: &Assignment, powers: &PowerVector, i: usize, j: usize) -> MeanSinr {
    let interference: f64 = assignment
        .members(j)
        .filter(|&k| k != i)
        .map(|k| gains.cross[i][k] * powers.mw[k])
        .sum();
    MeanSinr::new(gains.cross[i][i] * powers.mw[i] / (interference + gains.floor[i][j]))
}

/// Rate (bit/s/Hz) of link `i` on subchannel `j` under the current co-channel interference.
pub fn link_utility(gains: &ChannelGains, assignment: &Assignment, powers: &PowerVector, i: usize, j: usize) -> f64 {
    channel::spectral_efficiency(sinr_on(gains, assignment, powers, i, j))
}

/// Expected valid transmission of link `i` on `j`.
pub fn link_valid_prob(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &PowerVector,
    i: usize,
    j: usize,
) -> f64 {
    let link = &problem.links[i];
    let q = channel::frame_success_prob(sinr_on(gains, assignment, powers, i, j), link.rho);
    let pt = transmission_success_prob(problem.frames, q, link.packets) * link.onward_prob;
    valid_prob(link.sensing_prob, pt)
}

/// Sum of expected valid transmissions over subchannel `j`.
pub fn subchannel_utility(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &PowerVector,
    j: usize,
) -> f64 {
    assignment
        .members(j)
        .map(|i| link_valid_prob(problem, gains, assignment, powers, i, j))
        .sum()
}

/// Weighted sum rate over all assigned links.
pub fn weighted_sum_rate(gains: &ChannelGains, assignment: &Assignment, powers: &PowerVector, weights: &[f64]) -> f64 {
    assignment
        .channel_of
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| weights[i] * link_utility(gains, assignment, powers, i, j)))
        .sum()
}

/// Weighted sum of expected valid transmissions over all assigned links.
pub fn weighted_utility(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &PowerVector,
    weights: &[f64],
) -> f64 {
    assignment
        .channel_of
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| weights[i] * link_valid_prob(problem, gains, assignment, powers, i, j)))
        .sum()
}

/// Per-link transmission success probability under an allocation (0 when unassigned).
pub fn transmission_probs(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &PowerVector,
) -> Vec<f64> {
    (0..problem.links.len())
        .map(|i| match assignment.channel_of[i] {
            Some(j) => {
                let link = &problem.links[i];
                let q = channel::frame_success_prob(sinr_on(gains, assignment, powers, i, j), link.rho);
                transmission_success_prob(problem.frames, q, link.packets) * link.onward_prob
            }
            None => 0.0,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub assignment: Assignment,
    pub powers: PowerVector,
    /// Weighted utility after each accepted outer iteration.
    pub utility_trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

impl Allocation {
    pub fn utility(&self) -> f64 {
        self.utility_trace.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLimits {
    pub tol: f64,
    pub max_iters: usize,
    pub match_max_rounds: usize,
    pub sca_tol: f64,
    pub sca_max_iters: usize,
}

impl From<&RrmParams> for IterationLimits {
    fn from(p: &RrmParams) -> Self {
        Self {
            tol: p.tol,
            max_iters: p.max_iters,
            match_max_rounds: p.match_max_rounds,
            sca_tol: p.sca_tol,
            sca_max_iters: p.sca_max_iters,
        }
    }
}

impl Default for IterationLimits {
    fn default() -> Self {
        (&RrmParams::default()).into()
    }
}

/// Sets per-subchannel powers for a fixed assignment. Unassigned links keep `p_max`.
pub fn control_powers(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    weights: &[f64],
    limits: &IterationLimits,
) -> (PowerVector, bool) {
    let p_max = problem.p_max_mw();
    let mut powers = PowerVector::uniform(problem.links.len(), p_max);
    let mut converged = true;
    for j in 0..problem.subchannels() {
        let members: Vec<usize> = assignment.members(j).collect();
        if members.is_empty() {
            continue;
        }
        let out = power_control_subchannel(&members, j, gains, weights, p_max, limits.sca_tol, limits.sca_max_iters);
        converged &= out.converged;
        for (&i, &p) in members.iter().zip(&out.powers_mw) {
            powers.mw[i] = p;
        }
    }
    (powers, converged)
}

const POLISH_LEVELS: usize = 12;
const POLISH_SWEEPS: usize = 20;
const GOLDEN_ITERS: usize = 10;

/// Coordinate ascent on each subchannel's weighted expected valid
/// transmissions. Never returns a worse point.
pub fn polish_powers(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    start: &PowerVector,
    weights: &[f64],
) -> PowerVector {
    polish_cached(problem, gains, assignment, start, weights, &mut PolishCache::new())
}

/// Polished member powers keyed by subchannel and members' start powers.
type PolishCache = HashMap<(usize, Vec<(usize, u64)>), Vec<f64>>;

fn polish_cached(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    start: &PowerVector,
    weights: &[f64],
    cache: &mut PolishCache,
) -> PowerVector {
    let mut powers = start.clone();
    for j in 0..problem.subchannels() {
        let key: Vec<(usize, u64)> = assignment.members(j).map(|i| (i, start.mw[i].to_bits())).collect();
        if key.is_empty() {
            continue;
        }
        let members: Vec<usize> = key.iter().map(|&(i, _)| i).collect();
        let polished = cache.entry((j, key)).or_insert_with(|| {
            let mut p = start.clone();
            polish_subchannel(problem, gains, assignment, &mut p, weights, j);
            members.iter().map(|&i| p.mw[i]).collect()
        });
        for (&i, &p) in members.iter().zip(polished.iter()) {
            powers.mw[i] = p;
        }
    }
    powers
}

/// Coordinate ascent on subchannel `j` alone, one member's power at a time:
/// a log-spaced scan over `[MIN_POWER_FRACTION * p_max, p_max]` followed by
/// golden-section refinement around the best level. Returns the final
/// weighted utility of `j`.
pub fn polish_subchannel(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &mut PowerVector,
    weights: &[f64],
    j: usize,
) -> f64 {
    let p_max = problem.p_max_mw();
    let lo = (power::MIN_POWER_FRACTION * p_max).ln();
    let hi = p_max.ln();
    let members: Vec<usize> = assignment.members(j).collect();
    // Same arithmetic as `link_valid_prob`, restricted to the members.
    let value = |x: &[f64]| -> f64 {
        members
            .iter()
            .enumerate()
            .map(|(a, &i)| {
                let interference: f64 = members
                    .iter()
                    .zip(x)
                    .filter(|&(&k, _)| k != i)
                    .map(|(&k, &p)| gains.cross[i][k] * p)
                    .sum();
                let sinr = MeanSinr::new(gains.cross[i][i] * x[a] / (interference + gains.floor[i][j]));
                let link = &problem.links[i];
                let q = channel::frame_success_prob(sinr, link.rho);
                let pt = transmission_success_prob(problem.frames, q, link.packets) * link.onward_prob;
                weights[i] * valid_prob(link.sensing_prob, pt)
            })
            .sum()
    };
    let mut x: Vec<f64> = members.iter().map(|&i| powers.mw[i]).collect();
    let mut best = value(&x);
    if members.is_empty() {
        return best;
    }
    if members.len() == 1 {
        // Alone on the subchannel, a link gains from every extra milliwatt.
        let v = value(&[p_max]);
        if v > best {
            powers.mw[members[0]] = p_max;
            best = v;
        }
        return best;
    }
    for _ in 0..POLISH_SWEEPS {
        let before = best;
        for a in 0..members.len() {
            let mut trial = x.clone();
            let mut at = |log_p: f64| {
                trial[a] = log_p.exp().min(p_max);
                value(&trial)
            };
            let step = (hi - lo) / (POLISH_LEVELS - 1) as f64;
            let (mut k_best, mut v_best) = (0, f64::NEG_INFINITY);
            for k in 0..POLISH_LEVELS {
                let v = at(lo + step * k as f64);
                if v > v_best {
                    (k_best, v_best) = (k, v);
                }
            }
            let (mut lo_b, mut hi_b) = (
                (lo + step * (k_best as f64 - 1.0)).max(lo),
                (lo + step * (k_best as f64 + 1.0)).min(hi),
            );
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let (mut c, mut d) = (hi_b - r * (hi_b - lo_b), lo_b + r * (hi_b - lo_b));
            let (mut fc, mut fd) = (at(c), at(d));
            for _ in 0..GOLDEN_ITERS {
                if fc >= fd {
                    hi_b = d;
                    (d, fd) = (c, fc);
                    c = hi_b - r * (hi_b - lo_b);
                    fc = at(c);
                } else {
                    lo_b = c;
                    (c, fc) = (d, fd);
                    d = lo_b + r * (hi_b - lo_b);
                    fd = at(d);
                }
            }
            let (log_p, v) = [(lo + step * k_best as f64, v_best), (c, fc), (d, fd)]
                .into_iter()
                .fold((f64::NAN, f64::NEG_INFINITY), |acc, t| if t.1 > acc.1 { t } else { acc });
            if v > best {
                x[a] = log_p.exp().min(p_max);
                best = v;
            }
        }
        if best <= before + 1e-12 {
            break;
        }
    }
    for (&i, &p) in members.iter().zip(&x) {
        powers.mw[i] = p;
    }
    best
}

/// Alternates subchannel allocation (powers frozen) and power control
/// (assignment frozen) until the weighted utility improves by less than
/// `tol` (relative) or `max_iters` is reached. The utility is the weighted
/// sum of expected valid transmissions. Power control maximizes the weighted
/// sum rate, and its result is then polished on the utility itself. A local
/// search over single-link moves and swaps finishes the allocation. The
/// returned utility trace is nondecreasing: an iteration that would lower it
/// is discarded.
pub fn rrm_iterate(problem: &RrmProblem, weights: &[f64], limits: &IterationLimits) -> Allocation {
    let n = problem.links.len();
    let gains = ChannelGains::from_problem(problem);
    let p_max = problem.p_max_mw();

    let u2n: Vec<usize> = (0..n).filter(|&i| problem.links[i].mode == TransmissionMode::U2N).collect();
    let overlay = allocate_u2n_overlay(problem, &gains, &u2n, weights);

    let mut best = Allocation {
        assignment: Assignment::empty(n),
        powers: PowerVector::uniform(n, p_max),
        utility_trace: Vec::new(),
        outer_iterations: 0,
        converged: false,
    };
    if n == 0 {
        best.converged = true;
        return best;
    }

    let mut start = overlay;
    let mut powers = PowerVector::uniform(n, p_max);
    let mut prev = f64::NEG_INFINITY;
    let mut cache = PolishCache::new();
    let retune = RetuneCache::default();
    for iter in 0..limits.max_iters {
        let matched = match_subchannels_with(problem, &gains, &start, &powers, limits.match_max_rounds, &retune);
        let (controlled, sca_ok) = control_powers(problem, &gains, &matched.assignment, weights, limits);
        let (new_powers, u) = best_polished(
            problem,
            &gains,
            &matched.assignment,
            &[controlled, matched.powers.clone()],
            weights,
            &mut cache,
        );
        best.outer_iterations = iter + 1;
        if u < prev {
            best.converged = true;
            break;
        }
        let improvement = u - prev;
        best.assignment = matched.assignment.clone();
        best.powers = new_powers.clone();
        best.utility_trace.push(u);
        best.converged = matched.converged && sca_ok;
        // Matching is quiescent under these powers, so another pass changes nothing.
        let fixed_point = matched.converged && new_powers == powers;
        if fixed_point || improvement <= limits.tol * u.abs().max(1e-12) {
            break;
        }
        prev = u;
        start = matched.assignment;
        powers = new_powers;
        if iter + 1 == limits.max_iters {
            best.converged = false;
        }
    }
    improve_by_relocation(problem, &gains, weights, limits, &retune, &mut best);
    best
}

/// Local search over single-link moves and pairwise swaps. The changed
/// links take their new subchannels, the matching may refill whatever was
/// freed, and powers are polished. The best candidate is kept while the
/// weighted utility rises.
fn improve_by_relocation(
    problem: &RrmProblem,
    gains: &ChannelGains,
    weights: &[f64],
    limits: &IterationLimits,
    retune: &RetuneCache,
    best: &mut Allocation,
) {
    let n = problem.links.len();
    let p_max = problem.p_max_mw();
    let mut current = best.utility();
    let mut cache = PolishCache::new();
    // Interference-free value at full power bounds what a link can add.
    let full = PowerVector::uniform(n, p_max);
    let alone: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..problem.subchannels())
                .map(|j| {
                    let mut a = Assignment::empty(n);
                    a.channel_of[i] = Some(j);
                    weights[i] * link_valid_prob(problem, gains, &a, &full, i, j)
                })
                .collect()
        })
        .collect();
    let best_alone: Vec<f64> = alone.iter().map(|r| r.iter().copied().fold(0.0, f64::max)).collect();
    for _ in 0..limits.max_iters {
        let from = &best.assignment.channel_of;
        let mut starts = Vec::new();
        for i in 0..n {
            for to in std::iter::once(None).chain((0..problem.subchannels()).map(Some)) {
                if to != from[i] {
                    let mut a = best.assignment.clone();
                    a.channel_of[i] = to;
                    starts.push(a);
                }
            }
            for k in i + 1..n {
                if from[i] != from[k] {
                    let mut a = best.assignment.clone();
                    a.channel_of.swap(i, k);
                    starts.push(a);
                }
            }
        }
        let mut winner: Option<(f64, Assignment, PowerVector)> = None;
        for start in starts.into_iter().filter(|a| a.check(problem).is_ok()) {
            let bar = |w: &Option<(f64, Assignment, PowerVector)>| {
                let b = w.as_ref().map_or(current, |w| w.0);
                b + limits.tol * b.abs().max(1e-12)
            };
            let placed: f64 = (0..n).filter_map(|i| start.channel_of[i].map(|j| alone[i][j])).sum();
            let joinable: f64 = (0..n)
                .filter(|&i| start.channel_of[i].is_none() && problem.links[i].mode != TransmissionMode::U2N)
                .map(|i| best_alone[i])
                .sum();
            if placed + joinable <= bar(&winner) {
                continue;
            }
            let mut powers = best.powers.clone();
            for i in (0..n).filter(|&i| from[i].is_none()) {
                powers.mw[i] = p_max;
            }
            // Refilling only matters when some link is left without a subchannel.
            let refilled = (joinable > 0.0).then(|| {
                let m = match_subchannels_with(problem, gains, &start, &powers, limits.match_max_rounds, retune);
                (m.assignment, m.powers)
            });
            let as_moved = (placed > bar(&winner)).then_some((start, powers));
            for (assignment, seed) in as_moved.into_iter().chain(refilled) {
                let (polished, u) = best_polished(problem, gains, &assignment, &[seed], weights, &mut cache);
                if u > bar(&winner) {
                    winner = Some((u, assignment, polished));
                }
            }
        }
        let Some((u, assignment, powers)) = winner else { break };
        best.assignment = assignment;
        best.powers = powers;
        best.utility_trace.push(u);
        best.outer_iterations += 1;
        current = u;
    }
}

/// Polishes from each start and from full power, keeping the best result.
fn best_polished(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    starts: &[PowerVector],
    weights: &[f64],
    cache: &mut PolishCache,
) -> (PowerVector, f64) {
    let full = PowerVector::uniform(problem.links.len(), problem.p_max_mw());
    starts
        .iter()
        .chain(std::iter::once(&full))
        .map(|start| {
            let p = polish_cached(problem, gains, assignment, start, weights, cache);
            let u = weighted_utility(problem, gains, assignment, &p, weights);
            (p, u)
        })
        .fold(None, |acc: Option<(PowerVector, f64)>, (p, u)| match acc {
            Some((_, v)) if v >= u => acc,
            _ => Some((p, u)),
        })
        .expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GROUND_HEIGHT;

    pub(crate) fn link(i: usize, mode: TransmissionMode, tx: Vec3, rx: Vec3, rx_air: bool) -> RrmLink {
        RrmLink {
            link: i,
            mode,
            tx,
            rx,
            rx_airborne: rx_air,
            sensing_prob: 1.0,
            packets: 3,
            rho: 1.0,
            onward_prob: 1.0,
        }
    }

    pub(crate) fn problem(links: Vec<RrmLink>, subchannels: usize) -> RrmProblem {
        RrmProblem {
            links,
            occupants: vec![None; subchannels],
            channel: ChannelParams::default(),
            p_max_dbm: 10.0,
            frames: 10,
            underlay_cap: 2,
        }
    }

    fn g(x: f64, y: f64) -> Vec3 {
        Vec3::new(x, y, GROUND_HEIGHT)
    }

    fn a(x: f64, y: f64) -> Vec3 {
        Vec3::new(x, y, 100.0)
    }

    #[test]
    fn sole_occupant_gets_interference_free_rate() {
        let p = problem(vec![link(0, TransmissionMode::U2D, a(0.0, 0.0), g(50.0, 0.0), false)], 1);
        let gains = ChannelGains::from_problem(&p);
        let asg = Assignment { channel_of: vec![Some(0)] };
        let pw = PowerVector::uniform(1, p.p_max_mw());
        let loss = p.channel.link_loss_db(a(0.0, 0.0), g(50.0, 0.0), LinkClass::AirToGround);
        let expected = channel::spectral_efficiency(channel::mean_sinr(10.0, loss, &[], -100.0));
        assert!((link_utility(&gains, &asg, &pw, 0, 0) - expected).abs() < 1e-12);
    }

    #[test]
    fn underlay_co_occupant_hurts_u2n_link() {
        let p = problem(
            vec![
                link(0, TransmissionMode::U2N, a(100.0, 0.0), g(0.0, 0.0), false),
                link(1, TransmissionMode::U2D, a(-200.0, 50.0), g(-250.0, 0.0), false),
            ],
            1,
        );
        let gains = ChannelGains::from_problem(&p);
        let pw = PowerVector::uniform(2, p.p_max_mw());
        let alone = Assignment { channel_of: vec![Some(0), None] };
        let shared = Assignment { channel_of: vec![Some(0), Some(0)] };
        assert!(link_utility(&gains, &shared, &pw, 0, 0) < link_utility(&gains, &alone, &pw, 0, 0));
    }

    #[test]
    fn three_link_utility_matches_hand_arithmetic() {
        let links = vec![
            link(0, TransmissionMode::U2N, a(100.0, 0.0), g(0.0, 0.0), false),
            link(1, TransmissionMode::U2D, a(-200.0, 50.0), g(-250.0, 0.0), false),
            link(2, TransmissionMode::U2U, a(200.0, 200.0), a(260.0, 180.0), true),
        ];
        let p = problem(links.clone(), 1);
        let gains = ChannelGains::from_problem(&p);
        let asg = Assignment { channel_of: vec![Some(0); 3] };
        let pw = PowerVector { mw: vec![10.0, 4.0, 2.5] };
        let ch = ChannelParams::default();
        // Receiver of link 2 is airborne: all paths into it are air-to-air.
        let loss = |tx: Vec3, rx: Vec3, air: bool| {
            let m = if air { ch.air_to_air } else { ch.air_to_ground };
            m.ref_loss_db + 10.0 * m.exponent * crate::model::distance(tx, rx).log10()
        };
        for i in 0..3 {
            let rx = links[i].rx;
            let air = links[i].rx_airborne;
            let mut interf = 0.0;
            for k in 0..3 {
                if k != i {
                    interf += pw.mw[k] * 10f64.powf(-loss(links[k].tx, rx, air) / 10.0);
                }
            }
            let s = pw.mw[i] * 10f64.powf(-loss(links[i].tx, rx, air) / 10.0);
            let expected = (1.0 + s / (interf + 1e-10)).log2();
            let got = link_utility(&gains, &asg, &pw, i, 0);
            assert!((got - expected).abs() < 1e-9 * expected, "link {i}: {got} vs {expected}");
        }
    }

    #[test]
    fn subchannel_utility_examples() {
        let p = problem(vec![link(0, TransmissionMode::U2D, a(0.0, 0.0), g(0.0, 10.0), false)], 2);
        let gains = ChannelGains::from_problem(&p);
        let pw = PowerVector::uniform(1, p.p_max_mw());
        let asg = Assignment { channel_of: vec![Some(0)] };
        assert_eq!(subchannel_utility(&p, &gains, &asg, &pw, 1), 0.0);
        // Very short link, certain sensing: one perfect valid transmission.
        assert!((subchannel_utility(&p, &gains, &asg, &pw, 0) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn subchannel_utility_composes_protocol_formulas() {
        let mut links = vec![
            link(0, TransmissionMode::U2D, a(0.0, 0.0), g(150.0, 0.0), false),
            link(1, TransmissionMode::U2U, a(300.0, 100.0), a(200.0, 0.0), true),
        ];
        links[0].sensing_prob = 0.7;
        links[1].sensing_prob = 0.4;
        links[1].packets = 6;
        let p = problem(links.clone(), 1);
        let gains = ChannelGains::from_problem(&p);
        let asg = Assignment { channel_of: vec![Some(0), Some(0)] };
        let pw = PowerVector { mw: vec![10.0, 3.0] };
        let ch = ChannelParams::default();
        let mut expected = 0.0;
        for i in 0..2 {
            let k = 1 - i;
            let class = LinkClass::between(true, links[i].rx_airborne);
            let s = channel::mean_sinr(
                pw.dbm(i),
                ch.link_loss_db(links[i].tx, links[i].rx, class),
                &[(pw.dbm(k), ch.link_loss_db(links[k].tx, links[i].rx, class))],
                ch.noise_dbm,
            );
            let q = channel::frame_success_prob(s, 1.0);
            expected += links[i].sensing_prob * transmission_success_prob(10, q, links[i].packets);
        }
        let got = subchannel_utility(&p, &gains, &asg, &pw, 0);
        assert!((got - expected).abs() < 1e-9, "{got} vs {expected}");
    }

    #[test]
    fn weights_are_normalized() {
        let w = utility_weights(&[2, 4, 6]);
        assert!((w.iter().sum::<f64>() - 3.0).abs() < 1e-12);
        assert!((w[2] / w[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn overlay_rule_is_checked() {
        let links = vec![
            link(0, TransmissionMode::U2N, a(100.0, 0.0), g(0.0, 0.0), false),
            link(1, TransmissionMode::U2N, a(-100.0, 0.0), g(0.0, 0.0), false),
        ];
        let p = problem(links, 2);
        assert!(Assignment { channel_of: vec![Some(0), Some(0)] }.check(&p).is_err());
        assert!(Assignment { channel_of: vec![Some(0), Some(1)] }.check(&p).is_ok());
    }

    #[test]
    fn single_link_single_subchannel() {
        let p = problem(vec![link(0, TransmissionMode::U2D, a(0.0, 0.0), g(80.0, 0.0), false)], 1);
        let out = rrm_iterate(&p, &[1.0], &IterationLimits::default());
        assert_eq!(out.assignment.channel_of, vec![Some(0)]);
        assert_eq!(out.powers.mw[0], p.p_max_mw());
        assert!(out.converged);
        assert_eq!(out.utility_trace.len(), 1);
    }

    #[test]
    fn two_links_one_subchannel_beats_single_occupancy() {
        let p = problem(
            vec![
                link(0, TransmissionMode::U2D, a(0.0, 0.0), g(60.0, 0.0), false),
                link(1, TransmissionMode::U2D, a(400.0, 0.0), g(330.0, 0.0), false),
            ],
            1,
        );
        let w = [1.0, 1.0];
        let limits = IterationLimits::default();
        let out = rrm_iterate(&p, &w, &limits);
        let gains = ChannelGains::from_problem(&p);
        let pw = PowerVector::uniform(2, p.p_max_mw());
        for i in 0..2 {
            let mut only = Assignment::empty(2);
            only.channel_of[i] = Some(0);
            let single = weighted_utility(&p, &gains, &only, &pw, &w);
            assert!(out.utility() >= single - limits.tol * single);
        }
        for win in out.utility_trace.windows(2) {
            assert!(win[1] >= win[0]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_link(i: usize) -> impl Strategy<Value = RrmLink> {
            (0..3usize, -400.0..400.0f64, -400.0..400.0f64, -80.0..80.0f64, -80.0..80.0f64, 1..6u32).prop_map(
                move |(m, x, y, dx, dy, packets)| {
                    let mode = [TransmissionMode::U2N, TransmissionMode::U2U, TransmissionMode::U2D][m];
                    let (rx, air) = match mode {
                        TransmissionMode::U2N => (g(0.0, 0.0), false),
                        TransmissionMode::U2U => (a(x + dx, y + dy + 20.0), true),
                        TransmissionMode::U2D => (g(x + dx, y + dy), false),
                    };
                    RrmLink { packets, ..link(i, mode, a(x, y), rx, air) }
                },
            )
        }

        fn arb_problem() -> impl Strategy<Value = RrmProblem> {
            (1..=4usize, 1..=3usize).prop_flat_map(|(n, s)| {
                (0..n).map(arb_link).collect::<Vec<_>>().prop_map(move |links| problem(links, s))
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn allocation_is_feasible_and_monotone(p in arb_problem()) {
                let packets: Vec<u32> = p.links.iter().map(|l| l.packets).collect();
                let w = utility_weights(&packets);
                let out = rrm_iterate(&p, &w, &IterationLimits::default());
                prop_assert!(out.assignment.check(&p).is_ok());
                for &mw in &out.powers.mw {
                    prop_assert!((0.0..=p.p_max_mw() * (1.0 + 1e-12)).contains(&mw));
                }
                for win in out.utility_trace.windows(2) {
                    prop_assert!(win[1] >= win[0]);
                }
                let gains = ChannelGains::from_problem(&p);
                let u = weighted_utility(&p, &gains, &out.assignment, &out.powers, &w);
                prop_assert!((u - out.utility()).abs() <= 1e-9 * u.max(1.0));
            }
        }
    }
}
