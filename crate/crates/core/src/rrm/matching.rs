//! Two-sided propose/accept matching between underlay links and subchannels.
//!
//! Links rank subchannels by their own rate; a subchannel admits a proposal
//! only when its sum of expected valid transmissions strictly increases.
//! Nobody is ever evicted. Matched links may also propose to a subchannel
//! they strictly prefer, leaving their old one on acceptance, so a quiescent
//! round is pairwise stable by construction.
//!
//! Powers of links already placed stay frozen while they compete. A link
//! without a subchannel enters at whichever of a few log-spaced power levels
//! (or its current power) suits the admitting subchannel best; failing that,
//! the subchannel may re-tune all its members' powers to make room.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};

use super::power::MIN_POWER_FRACTION;
use super::{link_utility, polish_subchannel, subchannel_utility, Assignment, ChannelGains, PowerVector, RrmProblem};
use crate::protocol::TransmissionMode;

/// Minimum utility gain that counts as a strict improvement.
pub const ACCEPT_MARGIN: f64 = 1e-12;

/// Entry power levels tried for a link without a subchannel.
const ENTRY_LEVELS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub assignment: Assignment,
    /// Input powers with the entry power of every newly placed link.
    pub powers: PowerVector,
    pub rounds: usize,
    pub accepted: usize,
    /// False when `max_rounds` ran out before a quiescent round.
    pub converged: bool,
}

fn is_underlay(problem: &RrmProblem, i: usize) -> bool {
    problem.links[i].mode != TransmissionMode::U2N
}

fn underlay_count(problem: &RrmProblem, assignment: &Assignment, j: usize, except: usize) -> usize {
    assignment
        .members(j)
        .filter(|&k| k != except && is_underlay(problem, k))
        .count()
}

/// Rate link `i` would get after moving to `j` (its old subchannel no longer matters).
fn rate_if_moved(gains: &ChannelGains, assignment: &Assignment, powers: &PowerVector, i: usize, j: usize) -> f64 {
    let mut moved = assignment.clone();
    moved.channel_of[i] = Some(j);
    link_utility(gains, &moved, powers, i, j)
}

fn current_rate(gains: &ChannelGains, assignment: &Assignment, powers: &PowerVector, i: usize) -> f64 {
    match assignment.channel_of[i] {
        Some(j) => link_utility(gains, assignment, powers, i, j),
        None => f64::NEG_INFINITY,
    }
}

/// Subchannels link `i` strictly prefers to its current one, best first
/// (ties broken by lower index).
fn preference_list(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &PowerVector,
    i: usize,
) -> Vec<(usize, f64)> {
    let current = current_rate(gains, assignment, powers, i);
    let mut prefs: Vec<(usize, f64)> = (0..problem.subchannels())
        .filter(|&j| assignment.channel_of[i] != Some(j))
        .filter(|&j| underlay_count(problem, assignment, j, i) < problem.underlay_cap)
        .map(|j| (j, rate_if_moved(gains, assignment, powers, i, j)))
        .filter(|&(_, r)| r > current)
        .collect();
    prefs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    prefs
}

struct Admission {
    gain: f64,
    assignment: Assignment,
    powers: PowerVector,
}

fn entry_powers(problem: &RrmProblem, powers: &PowerVector, i: usize, frozen: bool) -> Vec<f64> {
    if frozen {
        return vec![powers.mw[i]];
    }
    let p_max = problem.p_max_mw();
    let lo = MIN_POWER_FRACTION * p_max;
    let mut levels = vec![powers.mw[i], p_max];
    levels.extend((0..ENTRY_LEVELS - 1).map(|k| lo * (p_max / lo).powf(k as f64 / (ENTRY_LEVELS - 1) as f64)));
    levels
}

/// Best strict improvement of `j`'s utility from admitting `i`, if any.
fn admits(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &PowerVector,
    i: usize,
    j: usize,
    adapt_entry: bool,
    retune: &RetuneCache,
) -> Option<Admission> {
    let before = subchannel_utility(problem, gains, assignment, powers, j);
    let mut moved = assignment.clone();
    moved.channel_of[i] = Some(j);
    let frozen = assignment.channel_of[i].is_some() || !adapt_entry;
    let mut trial = powers.clone();
    let mut best: Option<(f64, f64)> = None;
    for p in entry_powers(problem, powers, i, frozen) {
        trial.mw[i] = p;
        let after = subchannel_utility(problem, gains, &moved, &trial, j);
        if after > before + ACCEPT_MARGIN && best.map_or(true, |(u, _)| after > u) {
            best = Some((after, p));
        }
    }
    if let Some((after, p)) = best {
        trial.mw[i] = p;
        return Some(Admission {
            gain: after - before,
            assignment: moved,
            powers: trial,
        });
    }
    if frozen {
        return None;
    }
    trial.mw[i] = problem.p_max_mw();
    let key: Vec<(usize, u64)> = moved.members(j).map(|k| (k, trial.mw[k].to_bits())).collect();
    let mut cache = retune.borrow_mut();
    let (tuned, after) = cache.entry((j, key)).or_insert_with(|| {
        let unit = vec![1.0; problem.links.len()];
        let after = polish_subchannel(problem, gains, &moved, &mut trial, &unit, j);
        (moved.members(j).map(|k| trial.mw[k]).collect(), after)
    });
    for (k, &p) in moved.members(j).zip(tuned.iter()) {
        trial.mw[k] = p;
    }
    let after = *after;
    (after > before + ACCEPT_MARGIN).then_some(Admission {
        gain: after - before,
        assignment: moved,
        powers: trial,
    })
}

/// Matches every U2U/U2D link in `start` against the subchannels with
/// powers frozen. U2N links keep whatever `start` gave them.
///
/// In each round every underlay link proposes to the most preferred
/// subchannel that would admit it. Each subchannel then accepts the single
/// proposal that raises its utility most; the rest try again next round.
///
/// Entry powers can leave no stable state at all, which shows up as a
/// revisited state. The matching then restarts from `start` with every
/// power held at its input value.
pub fn match_subchannels(
    problem: &RrmProblem,
    gains: &ChannelGains,
    start: &Assignment,
    powers: &PowerVector,
    max_rounds: usize,
) -> MatchOutcome {
    match_subchannels_with(problem, gains, start, powers, max_rounds, &RetuneCache::default())
}

/// Re-tuned powers per subchannel and starting powers, with the resulting
/// utility; valid for one problem.
pub(super) type RetuneCache = RefCell<HashMap<(usize, Vec<(usize, u64)>), (Vec<f64>, f64)>>;

pub(super) fn match_subchannels_with(
    problem: &RrmProblem,
    gains: &ChannelGains,
    start: &Assignment,
    powers: &PowerVector,
    max_rounds: usize,
    retune: &RetuneCache,
) -> MatchOutcome {
    let out = run_rounds(problem, gains, start, powers, max_rounds, true, retune);
    if out.converged || out.rounds == max_rounds {
        return out;
    }
    let mut retry = run_rounds(problem, gains, start, powers, max_rounds - out.rounds, false, retune);
    retry.rounds += out.rounds;
    retry.accepted += out.accepted;
    retry
}

fn run_rounds(
    problem: &RrmProblem,
    gains: &ChannelGains,
    start: &Assignment,
    powers: &PowerVector,
    max_rounds: usize,
    adapt_entry: bool,
    retune: &RetuneCache,
) -> MatchOutcome {
    let mut assignment = start.clone();
    let mut powers = powers.clone();
    let proposers: Vec<usize> = (0..problem.links.len()).filter(|&i| is_underlay(problem, i)).collect();
    let mut accepted = 0;
    let mut seen = HashSet::new();
    for round in 0..max_rounds {
        let state: Vec<_> = assignment.channel_of.iter().zip(&powers.mw).map(|(c, p)| (*c, p.to_bits())).collect();
        if !seen.insert(state) {
            return MatchOutcome {
                assignment,
                powers,
                rounds: round,
                accepted,
                converged: false,
            };
        }
        let mut proposals: Vec<(f64, usize, usize)> = proposers
            .iter()
            .filter_map(|&i| {
                preference_list(problem, gains, &assignment, &powers, i)
                    .into_iter()
                    .find_map(|(j, _)| admits(problem, gains, &assignment, &powers, i, j, adapt_entry, retune).map(|a| (a.gain, i, j)))
            })
            .collect();
        proposals.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut taken = vec![false; problem.subchannels()];
        let mut any = false;
        for (_, i, j) in proposals {
            if taken[j] {
                continue;
            }
            // Earlier acceptances this round may have changed the picture.
            let still_preferred = preference_list(problem, gains, &assignment, &powers, i)
                .iter()
                .any(|&(k, _)| k == j);
            if !still_preferred {
                continue;
            }
            if let Some(a) = admits(problem, gains, &assignment, &powers, i, j, adapt_entry, retune) {
                assignment = a.assignment;
                powers = a.powers;
                taken[j] = true;
                accepted += 1;
                any = true;
            }
        }
        if !any {
            return MatchOutcome {
                assignment,
                powers,
                rounds: round + 1,
                accepted,
                converged: true,
            };
        }
    }
    MatchOutcome {
        assignment,
        powers,
        rounds: max_rounds,
        accepted,
        converged: false,
    }
}

/// Pairwise stability: no underlay link strictly prefers an admissible
/// subchannel whose utility would strictly rise by taking it.
pub fn is_pairwise_stable(
    problem: &RrmProblem,
    gains: &ChannelGains,
    assignment: &Assignment,
    powers: &PowerVector,
) -> bool {
    (0..problem.links.len()).filter(|&i| is_underlay(problem, i)).all(|i| {
        preference_list(problem, gains, assignment, powers, i)
            .into_iter()
            .all(|(j, _)| admits(problem, gains, assignment, powers, i, j, false, &RetuneCache::default()).is_none())
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::{link, problem};
    use super::*;
    use crate::model::{Vec3, GROUND_HEIGHT};

    fn pw(n: usize, p: &RrmProblem) -> PowerVector {
        PowerVector::uniform(n, p.p_max_mw())
    }

    #[test]
    fn single_link_is_assigned() {
        let p = problem(
            vec![link(0, TransmissionMode::U2D, Vec3::new(0.0, 0.0, 100.0), Vec3::new(0.0, 50.0, GROUND_HEIGHT), false)],
            1,
        );
        let gains = ChannelGains::from_problem(&p);
        let out = match_subchannels(&p, &gains, &Assignment::empty(1), &pw(1, &p), 10);
        assert!(out.converged);
        assert_eq!(out.assignment.channel_of, vec![Some(0)]);
    }

    #[test]
    fn symmetric_pair_splits_across_subchannels() {
        let p = problem(
            vec![
                link(0, TransmissionMode::U2D, Vec3::new(-100.0, 0.0, 100.0), Vec3::new(-150.0, 0.0, GROUND_HEIGHT), false),
                link(1, TransmissionMode::U2D, Vec3::new(100.0, 0.0, 100.0), Vec3::new(150.0, 0.0, GROUND_HEIGHT), false),
            ],
            2,
        );
        let gains = ChannelGains::from_problem(&p);
        let powers = pw(2, &p);
        let out = match_subchannels(&p, &gains, &Assignment::empty(2), &powers, 10);
        let (c0, c1) = (out.assignment.channel_of[0], out.assignment.channel_of[1]);
        assert!(c0.is_some() && c1.is_some() && c0 != c1);
        assert!(is_pairwise_stable(&p, &gains, &out.assignment, &out.powers));
    }
}
