//! Scenario description and its JSON configuration.
//!
//! A [`ScenarioConfig`] either lists entities and tasks explicitly or asks
//! for a random layout; [`ScenarioConfig::build`] resolves it for one seed
//! into an immutable [`Scenario`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Error, Result};
use crate::model::{CellRegion, Entity, EntityKind, MotionLimits, SensingTask, Vec3, GROUND_HEIGHT};
use crate::sensing::SensingParams;

/// A terrestrial UE whose uplink permanently occupies one subchannel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellularOccupant {
    pub ue_id: u32,
    pub subchannel: usize,
    pub power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrmParams {
    pub p_max_dbm: f64,
    /// BS transmit power per subchannel on the dedicated downlink.
    pub bs_power_dbm: f64,
    /// Maximum number of underlay (U2U/U2D) links sharing one subchannel.
    pub underlay_cap: usize,
    /// Relative improvement below which the outer alternation stops.
    pub tol: f64,
    pub max_iters: usize,
    pub match_max_rounds: usize,
    pub sca_tol: f64,
    pub sca_max_iters: usize,
    pub cellular_occupancy: Vec<CellularOccupant>,
}

impl Default for RrmParams {
    fn default() -> Self {
        Self {
            p_max_dbm: 10.0,
            bs_power_dbm: 26.0,
            underlay_cap: 2,
            tol: 1e-4,
            max_iters: 50,
            match_max_rounds: 100,
            sca_tol: 1e-6,
            sca_max_iters: 200,
            cellular_occupancy: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub region: CellRegion,
    pub entities: Vec<Entity>,
    /// One task per UAV; link `i` is `tasks[i]`.
    pub tasks: Vec<SensingTask>,
    pub channel: ChannelParams,
    pub sensing: SensingParams,
    pub motion: MotionLimits,
    pub subchannels: usize,
    pub frames_per_cycle: u32,
    pub rrm: RrmParams,
}

impl Scenario {
    pub fn entity(&self, id: u32) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn bs(&self) -> &Entity {
        self.entities
            .iter()
            .find(|e| e.kind == EntityKind::Bs)
            .expect("validated scenario has a BS")
    }

    pub fn uavs(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.kind == EntityKind::Uav)
    }

    pub fn uav_ids(&self) -> Vec<u32> {
        self.uavs().map(|e| e.id).collect()
    }

    /// Position of `id` in the UAV ordering used for position vectors.
    pub fn uav_index(&self, id: u32) -> Option<usize> {
        self.uavs().position(|e| e.id == id)
    }

    pub fn initial_uav_positions(&self) -> Vec<Vec3> {
        self.uavs().map(|e| e.position).collect()
    }

    pub fn link_count(&self) -> usize {
        self.tasks.len()
    }

    /// The same scenario with a different subchannel count.
    pub fn with_subchannels(&self, subchannels: usize) -> Self {
        let mut s = self.clone();
        s.subchannels = subchannels;
        s
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.region;
        if !(r.radius > 0.0) {
            return Err(Error::config("region.radius", "must be positive"));
        }
        if !(0.0 <= r.min_alt && r.min_alt <= r.max_alt) {
            return Err(Error::config("region.min_alt", "need 0 <= min_alt <= max_alt"));
        }
        if !r.center.is_finite() {
            return Err(Error::config("region.center", "must be finite"));
        }

        let mut bs_count = 0;
        for (k, e) in self.entities.iter().enumerate() {
            let path = format!("entities[{k}]");
            if !e.position.is_finite() {
                return Err(Error::config(format!("{path}.position"), "must be finite"));
            }
            if self.entities[..k].iter().any(|o| o.id == e.id) {
                return Err(Error::config(format!("{path}.id"), format!("duplicate id {}", e.id)));
            }
            match e.kind {
                EntityKind::Bs => bs_count += 1,
                EntityKind::Uav if !r.contains(e.position) => {
                    return Err(Error::config(format!("{path}.position"), "UAV outside the cell"));
                }
                _ => {}
            }
        }
        if bs_count != 1 {
            return Err(Error::config("entities", format!("need exactly one BS, found {bs_count}")));
        }

        let uavs = self.uav_ids();
        if self.tasks.len() != uavs.len() {
            return Err(Error::config(
                "tasks",
                format!("need one task per UAV ({} UAVs, {} tasks)", uavs.len(), self.tasks.len()),
            ));
        }
        for (k, t) in self.tasks.iter().enumerate() {
            let path = format!("tasks[{k}]");
            if self.entity(t.uav_id).map(|e| e.kind) != Some(EntityKind::Uav) {
                return Err(Error::config(format!("{path}.uav_id"), format!("{} is not a UAV", t.uav_id)));
            }
            if self.tasks[..k].iter().any(|o| o.uav_id == t.uav_id) {
                return Err(Error::config(format!("{path}.uav_id"), "UAV already has a task"));
            }
            if self.entity(t.destination).is_none() || t.destination == t.uav_id {
                return Err(Error::config(
                    format!("{path}.destination"),
                    format!("{} is not a valid destination", t.destination),
                ));
            }
            if t.data_packets < 1 {
                return Err(Error::config(format!("{path}.data_packets"), "must be >= 1"));
            }
            if !(t.qos_threshold > 0.0 && t.qos_threshold.is_finite()) {
                return Err(Error::config(format!("{path}.qos_threshold"), "must be positive"));
            }
            if !t.target.is_finite() {
                return Err(Error::config(format!("{path}.target"), "must be finite"));
            }
        }

        self.channel
            .validate()
            .map_err(|(field, msg)| Error::config(format!("channel.{field}"), msg))?;
        if !(self.sensing.lambda > 0.0 && self.sensing.lambda.is_finite()) {
            return Err(Error::config("sensing.lambda", "must be positive"));
        }
        if !(self.motion.lattice_step > 0.0) {
            return Err(Error::config("motion.lattice_step", "must be positive"));
        }
        if self.motion.lattice_step > self.motion.v_max {
            return Err(Error::config("motion.lattice_step", "must not exceed v_max"));
        }
        if self.subchannels < 1 {
            return Err(Error::config("subchannels", "must be >= 1"));
        }
        if self.frames_per_cycle < 1 {
            return Err(Error::config("frames_per_cycle", "must be >= 1"));
        }
        if !self.rrm.p_max_dbm.is_finite() {
            return Err(Error::config("rrm.p_max_dbm", "must be finite"));
        }
        if !self.rrm.bs_power_dbm.is_finite() {
            return Err(Error::config("rrm.bs_power_dbm", "must be finite"));
        }
        if !(self.rrm.tol > 0.0) || !(self.rrm.sca_tol > 0.0) {
            return Err(Error::config("rrm.tol", "tolerances must be positive"));
        }
        for (k, occ) in self.rrm.cellular_occupancy.iter().enumerate() {
            let path = format!("rrm.cellular_occupancy[{k}]");
            if self.entity(occ.ue_id).map(|e| e.kind) != Some(EntityKind::Ue) {
                return Err(Error::config(format!("{path}.ue_id"), "not a UE"));
            }
            if occ.subchannel >= self.subchannels {
                return Err(Error::config(format!("{path}.subchannel"), "out of range"));
            }
            if self.rrm.cellular_occupancy[..k].iter().any(|o| o.subchannel == occ.subchannel) {
                return Err(Error::config(format!("{path}.subchannel"), "already occupied"));
            }
        }
        Ok(())
    }
}

/// Probabilities used to draw task destinations in random layouts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DestinationMix {
    pub bs: f64,
    pub ue: f64,
    pub uav: f64,
}

impl Default for DestinationMix {
    fn default() -> Self {
        Self {
            bs: 0.2,
            ue: 0.6,
            uav: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    Random {
        uavs: usize,
        ues: usize,
        #[serde(default)]
        destinations: DestinationMix,
        #[serde(default = "default_packet_range")]
        packets: (u32, u32),
        #[serde(default = "default_qos")]
        qos_threshold: f64,
    },
    Explicit {
        entities: Vec<Entity>,
        tasks: Vec<SensingTask>,
    },
}

fn default_packet_range() -> (u32, u32) {
    (2, 5)
}

fn default_qos() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub layout: Layout,
    pub region: CellRegion,
    pub channel: ChannelParams,
    pub sensing: SensingParams,
    pub lattice_step: f64,
    pub subchannels: usize,
    pub frames_per_cycle: u32,
    pub rrm: RrmParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            layout: Layout::Random {
                uavs: 5,
                ues: 2,
                destinations: DestinationMix::default(),
                packets: default_packet_range(),
                qos_threshold: default_qos(),
            },
            region: CellRegion::default(),
            channel: ChannelParams::default(),
            sensing: SensingParams::default(),
            lattice_step: 25.0,
            subchannels: 4,
            frames_per_cycle: 10,
            rrm: RrmParams::default(),
        }
    }
}

impl ScenarioConfig {
    /// Resolves the layout for `seed` and validates the result.
    pub fn build(&self, seed: u64) -> Result<Scenario> {
        let (entities, tasks) = match &self.layout {
            Layout::Explicit { entities, tasks } => (entities.clone(), tasks.clone()),
            Layout::Random {
                uavs,
                ues,
                destinations,
                packets,
                qos_threshold,
            } => {
                let mix = destinations;
                if !(mix.bs >= 0.0 && mix.ue >= 0.0 && mix.uav >= 0.0 && mix.bs + mix.ue + mix.uav > 0.0) {
                    return Err(Error::config("layout.random.destinations", "weights must be nonnegative"));
                }
                if packets.0 < 1 || packets.0 > packets.1 {
                    return Err(Error::config("layout.random.packets", "need 1 <= min <= max"));
                }
                random_layout(&self.region, *uavs, *ues, mix, *packets, *qos_threshold, seed)
            }
        };
        let scenario = Scenario {
            region: self.region,
            entities,
            tasks,
            channel: self.channel,
            sensing: self.sensing,
            motion: MotionLimits::from_step(self.lattice_step),
            subchannels: self.subchannels,
            frames_per_cycle: self.frames_per_cycle,
            rrm: self.rrm.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

fn point_in_disc(rng: &mut impl Rng, region: &CellRegion, z: f64) -> Vec3 {
    let r = region.radius * rng.gen::<f64>().sqrt();
    let theta = rng.gen::<f64>() * std::f64::consts::TAU;
    Vec3::new(region.center.x + r * theta.cos(), region.center.y + r * theta.sin(), z)
}

fn random_layout(
    region: &CellRegion,
    uavs: usize,
    ues: usize,
    mix: &DestinationMix,
    packets: (u32, u32),
    qos_threshold: f64,
    seed: u64,
) -> (Vec<Entity>, Vec<SensingTask>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0x5ce0);

    let mut entities = vec![Entity {
        id: 0,
        kind: EntityKind::Bs,
        position: Vec3::new(region.center.x, region.center.y, GROUND_HEIGHT),
    }];
    let mut next_id = 1;
    let ue_ids: Vec<u32> = (0..ues)
        .map(|_| {
            let id = next_id;
            next_id += 1;
            entities.push(Entity {
                id,
                kind: EntityKind::Ue,
                position: point_in_disc(&mut rng, region, GROUND_HEIGHT),
            });
            id
        })
        .collect();
    let uav_ids: Vec<u32> = (0..uavs)
        .map(|_| {
            let id = next_id;
            next_id += 1;
            let z = rng.gen_range(region.min_alt..=region.max_alt);
            entities.push(Entity {
                id,
                kind: EntityKind::Uav,
                position: region.clip(point_in_disc(&mut rng, region, z)),
            });
            id
        })
        .collect();

    let total = mix.bs + mix.ue + mix.uav;
    let tasks = uav_ids
        .iter()
        .map(|&uav_id| {
            let others: Vec<u32> = uav_ids.iter().copied().filter(|&o| o != uav_id).collect();
            let u = rng.gen::<f64>() * total;
            let destination = if u < mix.ue && !ue_ids.is_empty() {
                *ue_ids.choose(&mut rng).unwrap()
            } else if u >= mix.ue && u < mix.ue + mix.uav && !others.is_empty() {
                *others.choose(&mut rng).unwrap()
            } else {
                0
            };
            SensingTask {
                uav_id,
                target: point_in_disc(&mut rng, region, 0.0),
                destination,
                data_packets: rng.gen_range(packets.0..=packets.1),
                qos_threshold,
            }
        })
        .collect();
    (entities, tasks)
}
