use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{dbm_to_mw, spectral_efficiency, ChannelParams, LinkClass, MeanSinr};
use crate::model::{EntityKind, SensingTask, Vec3};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransmissionMode {
    U2N,
    U2U,
    U2D,
}

impl TransmissionMode {
    /// Single-letter code used in frame strings.
    pub fn code(self) -> char {
        match self {
            TransmissionMode::U2N => 'N',
            TransmissionMode::U2U => 'U',
            TransmissionMode::U2D => 'D',
        }
    }
}

impl fmt::Display for TransmissionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TransmissionMode::U2N => "U2N",
            TransmissionMode::U2U => "U2U",
            TransmissionMode::U2D => "U2D",
        };
        f.write_str(s)
    }
}

/// Which link modes a UAV may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    /// All three modes.
    #[default]
    U2x,
    /// U2N only; the BS forwards to non-BS destinations over the downlink.
    Cellular,
}

impl fmt::Display for Framework {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Framework::U2x => "u2x",
            Framework::Cellular => "cellular",
        })
    }
}

/// Read-only snapshot of where everything is this cycle.
#[derive(Debug, Clone, Copy)]
pub struct WorldView<'a> {
    pub scenario: &'a Scenario,
    /// Positions of the UAVs, in scenario UAV order.
    pub uav_positions: &'a [Vec3],
}

impl<'a> WorldView<'a> {
    pub fn new(scenario: &'a Scenario, uav_positions: &'a [Vec3]) -> Self {
        debug_assert_eq!(scenario.uavs().count(), uav_positions.len());
        Self {
            scenario,
            uav_positions,
        }
    }

    pub fn locate(&self, id: u32) -> Option<(EntityKind, Vec3)> {
        let e = self.scenario.entity(id)?;
        match e.kind {
            EntityKind::Uav => self
                .scenario
                .uav_index(id)
                .map(|k| (EntityKind::Uav, self.uav_positions[k])),
            kind => Some((kind, e.position)),
        }
    }

    pub fn uavs(&self) -> impl Iterator<Item = (u32, Vec3)> + '_ {
        self.scenario.uavs().map(|e| e.id).zip(self.uav_positions.iter().copied())
    }
}

/// A selectable mode together with the first-hop receiver it implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeChoice {
    pub mode: TransmissionMode,
    /// Entity receiving the UAV's own transmission.
    pub receiver: u32,
    pub rx: Vec3,
    pub rx_airborne: bool,
    /// Set when a U2U link relays toward a BS/UE destination.
    pub relay: Option<u32>,
    /// Interference-free spectral efficiency used to rank the mode. For a
    /// relayed U2U link this is the weaker of the two hops.
    pub spectral_efficiency: f64,
    /// BS-to-destination hop that follows a U2N upload to a non-BS destination.
    pub downlink_to: Option<(Vec3, bool)>,
}

fn isolated_se(ch: &ChannelParams, power_dbm: f64, tx: Vec3, tx_air: bool, rx: Vec3, rx_air: bool) -> f64 {
    let gain = ch.link_gain(tx, rx, LinkClass::between(tx_air, rx_air));
    spectral_efficiency(MeanSinr::new(dbm_to_mw(power_dbm) * gain / ch.noise_mw()))
}

/// Every mode the framework allows for `task`, ranked by nothing yet and
/// regardless of the QoS threshold, in the fixed order U2N, U2D, U2U.
pub fn candidate_modes(
    task: &SensingTask,
    world: &WorldView<'_>,
    ch: &ChannelParams,
    assumed_power_dbm: f64,
    framework: Framework,
) -> Vec<ModeChoice> {
    let Some((_, me)) = world.locate(task.uav_id) else {
        return Vec::new();
    };
    let Some((dest_kind, dest)) = world.locate(task.destination) else {
        return Vec::new();
    };
    let dest_air = dest_kind.is_airborne();
    let bs = world.scenario.bs();
    let mut out = Vec::with_capacity(3);

    out.push(ModeChoice {
        mode: TransmissionMode::U2N,
        receiver: bs.id,
        rx: bs.position,
        rx_airborne: false,
        relay: None,
        spectral_efficiency: isolated_se(ch, assumed_power_dbm, me, true, bs.position, false),
        downlink_to: (dest_kind != EntityKind::Bs).then_some((dest, dest_air)),
    });
    if framework == Framework::Cellular {
        return out;
    }

    if dest_kind == EntityKind::Ue {
        out.push(ModeChoice {
            mode: TransmissionMode::U2D,
            receiver: task.destination,
            rx: dest,
            rx_airborne: false,
            relay: None,
            spectral_efficiency: isolated_se(ch, assumed_power_dbm, me, true, dest, false),
            downlink_to: None,
        });
    }

    if dest_kind == EntityKind::Uav {
        out.push(ModeChoice {
            mode: TransmissionMode::U2U,
            receiver: task.destination,
            rx: dest,
            rx_airborne: true,
            relay: None,
            spectral_efficiency: isolated_se(ch, assumed_power_dbm, me, true, dest, true),
            downlink_to: None,
        });
    } else {
        // Relay through the UAV with the best bottleneck hop.
        let best = world
            .uavs()
            .filter(|&(id, _)| id != task.uav_id)
            .map(|(id, pos)| {
                let first = isolated_se(ch, assumed_power_dbm, me, true, pos, true);
                let second = isolated_se(ch, assumed_power_dbm, pos, true, dest, dest_air);
                (id, pos, first.min(second))
            })
            .fold(None, |best: Option<(u32, Vec3, f64)>, c| match best {
                Some(b) if b.2 >= c.2 => Some(b),
                _ => Some(c),
            });
        if let Some((id, pos, se)) = best {
            out.push(ModeChoice {
                mode: TransmissionMode::U2U,
                receiver: id,
                rx: pos,
                rx_airborne: true,
                relay: Some(id),
                spectral_efficiency: se,
                downlink_to: None,
            });
        }
    }
    out
}

/// Picks the qualifying mode (spectral efficiency at or above the task's
/// QoS threshold) with the highest spectral efficiency. Ties keep the
/// earlier mode in U2N, U2D, U2U order. `None` when nothing qualifies.
pub fn select_mode(
    task: &SensingTask,
    world: &WorldView<'_>,
    ch: &ChannelParams,
    assumed_power_dbm: f64,
    framework: Framework,
) -> Option<ModeChoice> {
    let mut best: Option<ModeChoice> = None;
    for c in candidate_modes(task, world, ch, assumed_power_dbm, framework) {
        if c.spectral_efficiency < task.qos_threshold {
            continue;
        }
        if best.as_ref().map_or(true, |b| c.spectral_efficiency > b.spectral_efficiency) {
            best = Some(c);
        }
    }
    best
}
