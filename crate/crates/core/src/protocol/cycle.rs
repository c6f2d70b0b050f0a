use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::mode::{select_mode, Framework, ModeChoice, TransmissionMode, WorldView};
use crate::channel::{dbm_to_mw, frame_success_prob, LinkClass, MeanSinr};
use crate::error::{Error, Result};
use crate::model::{apply_action, distance};
use crate::model::Vec3;
use crate::rrm::{
    rrm_iterate, utility_weights, Assignment, ChannelGains, IterationLimits, Occupant, PowerVector, RrmLink,
    RrmProblem,
};
use crate::scenario::Scenario;
use crate::sensing::{sample_sensing, sensing_success_prob};

/// `Pr[Binomial(frames, q) >= packets]`: all packets get through within the
/// allocated frames when each frame succeeds independently with `q`.
pub fn transmission_success_prob(frames: u32, per_frame_prob: f64, packets: u32) -> f64 {
    debug_assert!((0.0..=1.0).contains(&per_frame_prob));
    if packets == 0 {
        return 1.0;
    }
    if frames < packets {
        return 0.0;
    }
    let q = per_frame_prob;
    if q >= 1.0 {
        return 1.0;
    }
    let (k, n) = (frames as i32, packets as i32);
    // First term m = n, then term(m + 1) = term(m) * (k - m) / (m + 1) * q / (1 - q).
    let binom = (0..n).fold(1.0, |c, m| c * f64::from(k - m) / f64::from(m + 1));
    let ratio = q / (1.0 - q);
    let mut term = binom * q.powi(n) * (1.0 - q).powi(k - n);
    let mut total = term;
    for m in n..k {
        term *= f64::from(k - m) / f64::from(m + 1) * ratio;
        total += term;
    }
    total.clamp(0.0, 1.0)
}

/// Probability of a valid transmission: sensing and delivery both succeed.
pub fn valid_prob(p_sense: f64, p_transmit: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p_sense) && (0.0..=1.0).contains(&p_transmit));
    p_sense * p_transmit
}

/// Packets still waiting for delivery in the current cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataBuffer {
    pub remaining_packets: u32,
}

impl DataBuffer {
    pub fn new(packets: u32) -> Self {
        Self {
            remaining_packets: packets,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.remaining_packets == 0
    }

    pub fn deliver(&mut self) {
        self.remaining_packets = self.remaining_packets.saturating_sub(1);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrameOutcome {
    Transmit { mode: TransmissionMode, delivered: u32 },
    /// Buffer already empty.
    Idle,
    /// Data waiting but no subchannel this frame.
    NoSubchannel,
}

impl FrameOutcome {
    pub fn code(self) -> char {
        match self {
            FrameOutcome::Transmit { mode, .. } => mode.code(),
            FrameOutcome::Idle => 'I',
            FrameOutcome::NoSubchannel => 'X',
        }
    }
}

/// One subchannel and power granted to a link for the whole cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grant {
    /// Task index of the link.
    pub link: usize,
    pub subchannel: usize,
    pub power_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrmDecision {
    pub grants: Vec<Grant>,
    pub converged: bool,
    pub utility: f64,
}

/// The BS role: turns the large-scale picture into grants.
pub trait ResourceManager {
    fn allocate(&self, problem: &RrmProblem) -> RrmDecision;
}

/// Matching + SCA alternation with data-volume weights.
#[derive(Debug, Clone, Copy, Default)]
pub struct IterativeRrm {
    pub limits: IterationLimits,
}

impl IterativeRrm {
    pub fn new(limits: IterationLimits) -> Self {
        Self { limits }
    }
}

impl ResourceManager for IterativeRrm {
    fn allocate(&self, problem: &RrmProblem) -> RrmDecision {
        let packets: Vec<u32> = problem.links.iter().map(|l| l.packets).collect();
        let alloc = rrm_iterate(problem, &utility_weights(&packets), &self.limits);
        let grants = alloc
            .assignment
            .channel_of
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                c.map(|j| Grant {
                    link: problem.links[i].link,
                    subchannel: j,
                    power_mw: alloc.powers.mw[i],
                })
            })
            .collect();
        RrmDecision {
            grants,
            converged: alloc.converged,
            utility: alloc.utility(),
        }
    }
}

/// Replays a fixed list of grants regardless of the problem.
#[derive(Debug, Clone, Default)]
pub struct FixedGrants(pub Vec<Grant>);

impl ResourceManager for FixedGrants {
    fn allocate(&self, _problem: &RrmProblem) -> RrmDecision {
        RrmDecision {
            grants: self.0.clone(),
            converged: true,
            utility: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleReport {
    pub cycle: u64,
    pub uav_id: u32,
    pub mode: Option<TransmissionMode>,
    pub relay: Option<u32>,
    pub subchannel: Option<usize>,
    pub power_dbm: Option<f64>,
    pub sensing_prob: f64,
    pub sensed: bool,
    pub frames: Vec<FrameOutcome>,
    /// Closed-form probability of delivering every packet (and the onward hop).
    pub transmission_prob: f64,
    pub transmitted: bool,
    pub valid: bool,
    /// Expected valid transmissions, `sensing_prob * transmission_prob`.
    pub reward: f64,
}

impl CycleReport {
    pub fn frames_encoded(&self) -> String {
        self.frames.iter().map(|f| f.code()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CycleOutput {
    pub reports: Vec<CycleReport>,
    /// UAV positions during this cycle (after applying the actions).
    pub positions: Vec<Vec3>,
    pub rrm_converged: bool,
    pub rrm_utility: f64,
}

fn onward_prob(scenario: &Scenario, choice: &ModeChoice, rho: f64, packets: u32) -> f64 {
    let Some((dest, dest_air)) = choice.downlink_to else {
        return 1.0;
    };
    let ch = &scenario.channel;
    let bs = scenario.bs().position;
    let snr = dbm_to_mw(scenario.rrm.bs_power_dbm) * ch.link_gain(bs, dest, LinkClass::between(false, dest_air))
        / ch.noise_mw();
    let q = frame_success_prob(MeanSinr::new(snr), rho);
    transmission_success_prob(scenario.frames_per_cycle, q, packets)
}

fn downlink_frame_prob(scenario: &Scenario, choice: &ModeChoice, rho: f64) -> Option<f64> {
    let (dest, dest_air) = choice.downlink_to?;
    let ch = &scenario.channel;
    let bs = scenario.bs().position;
    let snr = dbm_to_mw(scenario.rrm.bs_power_dbm) * ch.link_gain(bs, dest, LinkClass::between(false, dest_air))
        / ch.noise_mw();
    Some(frame_success_prob(MeanSinr::new(snr), rho))
}

/// Transmission success probability of one link alone on a subchannel at
/// `p_max`, including any onward BS hop. Zero when no mode qualifies.
pub fn isolated_transmission_prob(scenario: &Scenario, link: usize, choice: Option<&ModeChoice>, tx: Vec3) -> f64 {
    let Some(choice) = choice else {
        return 0.0;
    };
    let task = &scenario.tasks[link];
    let ch = &scenario.channel;
    let gain = ch.link_gain(tx, choice.rx, LinkClass::between(true, choice.rx_airborne));
    let snr = dbm_to_mw(scenario.rrm.p_max_dbm) * gain / ch.noise_mw();
    let q = frame_success_prob(MeanSinr::new(snr), task.qos_threshold);
    transmission_success_prob(scenario.frames_per_cycle, q, task.data_packets)
        * onward_prob(scenario, choice, task.qos_threshold, task.data_packets)
}

/// Builds the BS's view of every link that selected a mode.
pub(crate) fn build_problem(
    scenario: &Scenario,
    world: &WorldView<'_>,
    choices: &[Option<ModeChoice>],
    sensing_probs: &[f64],
) -> RrmProblem {
    let links = choices
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let c = c.as_ref()?;
            let task = &scenario.tasks[i];
            let (_, tx) = world.locate(task.uav_id)?;
            Some(RrmLink {
                link: i,
                mode: c.mode,
                tx,
                rx: c.rx,
                rx_airborne: c.rx_airborne,
                sensing_prob: sensing_probs[i],
                packets: task.data_packets,
                rho: task.qos_threshold,
                onward_prob: onward_prob(scenario, c, task.qos_threshold, task.data_packets),
            })
        })
        .collect();
    let mut occupants = vec![None; scenario.subchannels];
    for occ in &scenario.rrm.cellular_occupancy {
        if let Some(e) = scenario.entity(occ.ue_id) {
            occupants[occ.subchannel] = Some(Occupant {
                tx: e.position,
                power_dbm: occ.power_dbm,
            });
        }
    }
    RrmProblem {
        links,
        occupants,
        channel: scenario.channel,
        p_max_dbm: scenario.rrm.p_max_dbm,
        frames: scenario.frames_per_cycle,
        underlay_cap: scenario.rrm.underlay_cap,
    }
}

/// Turns grants into an assignment over the problem's links, rejecting
/// anything the protocol cannot execute.
fn apply_grants(problem: &RrmProblem, decision: &RrmDecision) -> Result<(Assignment, PowerVector)> {
    let n = problem.links.len();
    let p_max = problem.p_max_mw();
    let mut assignment = Assignment::empty(n);
    let mut powers = PowerVector::uniform(n, p_max);
    for g in &decision.grants {
        let Some(i) = problem.links.iter().position(|l| l.link == g.link) else {
            return Err(Error::ProtocolViolation(format!(
                "subchannel {} granted to link {} which selected no mode",
                g.subchannel, g.link
            )));
        };
        if assignment.channel_of[i].is_some() {
            return Err(Error::ProtocolViolation(format!("link {} granted twice", g.link)));
        }
        if g.subchannel >= problem.subchannels() {
            return Err(Error::ProtocolViolation(format!("subchannel {} does not exist", g.subchannel)));
        }
        if !(g.power_mw > 0.0 && g.power_mw <= p_max * (1.0 + 1e-9)) {
            return Err(Error::ProtocolViolation(format!(
                "power {} mW for link {} outside (0, p_max]",
                g.power_mw, g.link
            )));
        }
        assignment.channel_of[i] = Some(g.subchannel);
        powers.mw[i] = g.power_mw;
    }
    assignment.check(problem).map_err(Error::ProtocolViolation)?;
    Ok((assignment, powers))
}

/// Runs one cycle. Each UAV first moves by its action (clipped to the cell),
/// then: mode selection, BS allocation, one sensing trial per link, and `F`
/// frames in which every granted link with data sends one packet through a
/// Rayleigh-faded channel against the links active on its subchannel.
pub fn run_cycle<R: Rng + ?Sized>(
    scenario: &Scenario,
    framework: Framework,
    positions: &[Vec3],
    actions: &[usize],
    rrm: &dyn ResourceManager,
    cycle: u64,
    rng: &mut R,
) -> Result<CycleOutput> {
    let uav_count = positions.len();
    if actions.len() != uav_count {
        return Err(Error::Shape {
            expected: uav_count,
            actual: actions.len(),
        });
    }
    let step = scenario.motion.lattice_step;
    let moved: Vec<Vec3> = positions
        .iter()
        .zip(actions)
        .map(|(&p, &a)| apply_action(p, a, step, &scenario.region))
        .collect();
    let world = WorldView::new(scenario, &moved);
    let n = scenario.tasks.len();
    let ch = &scenario.channel;

    // (1) decentralized mode selection, large-scale only, at p_max
    let choices: Vec<Option<ModeChoice>> = scenario
        .tasks
        .iter()
        .map(|t| select_mode(t, &world, ch, scenario.rrm.p_max_dbm, framework))
        .collect();
    let tx_pos: Vec<Vec3> = scenario
        .tasks
        .iter()
        .map(|t| world.locate(t.uav_id).map(|(_, p)| p).unwrap_or_default())
        .collect();
    let sensing_probs: Vec<f64> = scenario
        .tasks
        .iter()
        .zip(&tx_pos)
        .map(|(t, &p)| sensing_success_prob(distance(p, t.target), &scenario.sensing))
        .collect();

    // (2) BS allocation
    let problem = build_problem(scenario, &world, &choices, &sensing_probs);
    let decision = rrm.allocate(&problem);
    let (assignment, powers) = apply_grants(&problem, &decision)?;
    let gains = ChannelGains::from_problem(&problem);
    let pt_closed = crate::rrm::transmission_probs(&problem, &gains, &assignment, &powers);

    // Map problem rows back to task links.
    let mut row_of = vec![None; n];
    for (r, l) in problem.links.iter().enumerate() {
        row_of[l.link] = Some(r);
    }

    // (3) sensing
    let mut sensed = Vec::with_capacity(n);
    for &p in &sensing_probs {
        sensed.push(sample_sensing(p, rng)?);
    }

    // (4) frames
    let frames = scenario.frames_per_cycle as usize;
    let mut buffers: Vec<DataBuffer> = scenario.tasks.iter().map(|t| DataBuffer::new(t.data_packets)).collect();
    let mut outcomes: Vec<Vec<FrameOutcome>> = vec![Vec::with_capacity(frames); n];
    for _ in 0..frames {
        let active: Vec<bool> = (0..n)
            .map(|i| !buffers[i].is_empty() && row_of[i].and_then(|r| assignment.channel_of[r]).is_some())
            .collect();
        let mut delivered = vec![false; n];
        for i in 0..n {
            if buffers[i].is_empty() {
                outcomes[i].push(FrameOutcome::Idle);
                continue;
            }
            let Some((r, j)) = row_of[i].and_then(|r| assignment.channel_of[r].map(|j| (r, j))) else {
                outcomes[i].push(FrameOutcome::NoSubchannel);
                continue;
            };
            let interference: f64 = assignment
                .members(j)
                .filter(|&k| k != r && active[problem.links[k].link])
                .map(|k| gains.cross[r][k] * powers.mw[k])
                .sum();
            let fading: f64 = Exp1.sample(rng);
            let sinr = gains.cross[r][r] * powers.mw[r] * fading / (interference + gains.floor[r][j]);
            let ok = sinr.ln_1p() / std::f64::consts::LN_2 >= problem.links[r].rho;
            delivered[i] = ok;
            outcomes[i].push(FrameOutcome::Transmit {
                mode: problem.links[r].mode,
                delivered: u32::from(ok),
            });
        }
        for (b, d) in buffers.iter_mut().zip(&delivered) {
            if *d {
                b.deliver();
            }
        }
    }

    // onward BS hop on its dedicated downlink subchannel
    let mut onward_ok = vec![true; n];
    for i in 0..n {
        if let Some(q) = choices[i].as_ref().and_then(|c| downlink_frame_prob(scenario, c, scenario.tasks[i].qos_threshold)) {
            let hits = (0..frames).filter(|_| rng.gen::<f64>() < q).count();
            onward_ok[i] = hits >= scenario.tasks[i].data_packets as usize;
        }
    }

    // (5) reports
    let uav_ids: Vec<u32> = scenario.tasks.iter().map(|t| t.uav_id).collect();
    let reports = (0..n)
        .map(|i| {
            let row = row_of[i];
            let subchannel = row.and_then(|r| assignment.channel_of[r]);
            let transmission_prob = row.map_or(0.0, |r| pt_closed[r]);
            let transmitted = choices[i].is_some() && buffers[i].is_empty() && onward_ok[i];
            CycleReport {
                cycle,
                uav_id: uav_ids[i],
                mode: choices[i].as_ref().map(|c| c.mode),
                relay: choices[i].as_ref().and_then(|c| c.relay),
                subchannel,
                power_dbm: subchannel.and(row).map(|r| powers.dbm(r)),
                sensing_prob: sensing_probs[i],
                sensed: sensed[i],
                frames: std::mem::take(&mut outcomes[i]),
                transmission_prob,
                transmitted,
                valid: sensed[i] && transmitted,
                reward: valid_prob(sensing_probs[i], transmission_prob),
            }
        })
        .collect();

    Ok(CycleOutput {
        reports,
        positions: moved,
        rrm_converged: decision.converged,
        rrm_utility: decision.utility,
    })
}
