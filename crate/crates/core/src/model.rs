//! Geometry, entities, sensing tasks and the cycle/frame clock.
//!
//! Positions are in meters. The cell is a vertical cylinder around the base
//! station with an altitude band for airborne entities.

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

// Rounding slack on the radial bound; keeps `clip` idempotent.
const RADIAL_SLACK: f64 = 1e-12;

/// Height of every ground entity (BS and UEs).
pub const GROUND_HEIGHT: f64 = 1.5;

/// Number of lattice moves available to a UAV in one cycle.
pub const ACTION_COUNT: usize = 27;

/// Index of the "stay in place" action in [`lattice_offsets`] order.
pub const STAY_ACTION: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn horizontal_norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, k: f64) -> Vec3 {
        Vec3::new(self.x * k, self.y * k, self.z * k)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    (a - b).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellRegion {
    /// Ground position of the base station; the cylinder axis passes through it.
    pub center: Vec3,
    pub radius: f64,
    pub min_alt: f64,
    pub max_alt: f64,
}

impl Default for CellRegion {
    fn default() -> Self {
        Self {
            center: Vec3::new(0.0, 0.0, GROUND_HEIGHT),
            radius: 500.0,
            min_alt: 50.0,
            max_alt: 150.0,
        }
    }
}

impl CellRegion {
    /// Projects `p` onto the cylinder: radially toward the axis when outside
    /// the disc, then clamps the altitude into the band.
    pub fn clip(&self, p: Vec3) -> Vec3 {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let r = dx.hypot(dy);
        let (x, y) = if r > self.radius * (1.0 + RADIAL_SLACK) {
            let k = self.radius / r;
            (self.center.x + dx * k, self.center.y + dy * k)
        } else {
            (p.x, p.y)
        };
        Vec3::new(x, y, p.z.clamp(self.min_alt, self.max_alt))
    }

    pub fn contains(&self, p: Vec3) -> bool {
        let r = (p.x - self.center.x).hypot(p.y - self.center.y);
        r <= self.radius * (1.0 + RADIAL_SLACK) && p.z >= self.min_alt && p.z <= self.max_alt
    }
}

/// Free-function form of [`CellRegion::clip`].
pub fn clip_to_region(p: Vec3, region: &CellRegion) -> Vec3 {
    region.clip(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Bs,
    Ue,
    Uav,
}

impl EntityKind {
    pub fn is_airborne(self) -> bool {
        matches!(self, EntityKind::Uav)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub kind: EntityKind,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingTask {
    pub uav_id: u32,
    pub target: Vec3,
    /// Entity id of the BS, a UE or another UAV.
    pub destination: u32,
    /// Fixed-size packets produced per cycle.
    pub data_packets: u32,
    /// Minimum spectral efficiency in bit/s/Hz.
    pub qos_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleClock {
    pub cycle_index: u64,
    pub frames_per_cycle: u32,
    pub frame_index: u32,
}

impl CycleClock {
    pub fn new(frames_per_cycle: u32) -> Self {
        assert!(frames_per_cycle >= 1, "a cycle needs at least one frame");
        Self {
            cycle_index: 0,
            frames_per_cycle,
            frame_index: 0,
        }
    }

    /// Advances by one frame, rolling over into the next cycle.
    pub fn tick(&mut self) {
        self.frame_index += 1;
        if self.frame_index == self.frames_per_cycle {
            self.frame_index = 0;
            self.cycle_index += 1;
        }
    }

    pub fn next_cycle(&mut self) {
        self.frame_index = 0;
        self.cycle_index += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionLimits {
    /// Maximum displacement per cycle in meters.
    pub v_max: f64,
    pub lattice_step: f64,
}

impl MotionLimits {
    pub fn from_step(lattice_step: f64) -> Self {
        Self {
            v_max: lattice_step * 3f64.sqrt(),
            lattice_step,
        }
    }
}

impl Default for MotionLimits {
    fn default() -> Self {
        Self::from_step(25.0)
    }
}

/// The 27 unit offsets, ordered with `dz` fastest and `dx` slowest.
pub fn lattice_offsets() -> [(i8, i8, i8); ACTION_COUNT] {
    let mut out = [(0, 0, 0); ACTION_COUNT];
    let mut k = 0;
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                out[k] = (dx, dy, dz);
                k += 1;
            }
        }
    }
    out
}

/// Unclipped candidate positions one lattice step away from `p`.
pub fn lattice_moves(p: Vec3, step: f64) -> [Vec3; ACTION_COUNT] {
    lattice_offsets().map(|(dx, dy, dz)| {
        p + Vec3::new(f64::from(dx), f64::from(dy), f64::from(dz)) * step
    })
}

/// The 27 next-cycle positions reachable from `p`, clipped to the cell.
pub fn lattice_actions(p: Vec3, step: f64, region: &CellRegion) -> [Vec3; ACTION_COUNT] {
    debug_assert!(step > 0.0);
    lattice_moves(p, step).map(|q| region.clip(q))
}

/// Applies one action index to a position.
pub fn apply_action(p: Vec3, action: usize, step: f64, region: &CellRegion) -> Vec3 {
    let (dx, dy, dz) = lattice_offsets()[action];
    region.clip(p + Vec3::new(f64::from(dx), f64::from(dy), f64::from(dz)) * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_examples() {
        let o = Vec3::default();
        assert_eq!(distance(o, o), 0.0);
        assert_eq!(distance(o, Vec3::new(3.0, 4.0, 0.0)), 5.0);
        assert_eq!(distance(Vec3::new(1.0, 2.0, 2.0), o), 3.0);
    }

    #[test]
    fn stay_action_is_identity_at_center() {
        let region = CellRegion::default();
        let p = Vec3::new(0.0, 0.0, 100.0);
        let moves = lattice_actions(p, 25.0, &region);
        assert_eq!(moves.len(), 27);
        assert_eq!(moves[STAY_ACTION], p);
        assert_eq!(lattice_offsets()[STAY_ACTION], (0, 0, 0));
    }

    #[test]
    fn outward_move_on_boundary_projects_onto_cylinder() {
        let region = CellRegion::default();
        let p = Vec3::new(500.0, 0.0, 150.0);
        // (+1, +1, +1): outward in x and y, above max altitude.
        let q = lattice_actions(p, 25.0, &region)[26];
        let (hx, hy) = (525.0f64, 25.0f64);
        let r = hx.hypot(hy);
        let expected = Vec3::new(hx * 500.0 / r, hy * 500.0 / r, 150.0);
        assert!(distance(q, expected) < 1e-9);
        assert!(region.contains(q));
    }

    #[test]
    fn clip_examples() {
        let region = CellRegion::default();
        let inside = Vec3::new(10.0, -20.0, 80.0);
        assert_eq!(region.clip(inside), inside);
        assert_eq!(region.clip(Vec3::new(0.0, 0.0, 400.0)).z, 150.0);
        let far = Vec3::new(600.0, 800.0, 100.0); // horizontal distance 1000 = 2 radius
        let c = region.clip(far);
        assert!((c.x - 300.0).abs() < 1e-9 && (c.y - 400.0).abs() < 1e-9);
    }

    #[test]
    fn clock_rolls_over() {
        let mut clock = CycleClock::new(3);
        for _ in 0..3 {
            assert!(clock.frame_index < clock.frames_per_cycle);
            clock.tick();
        }
        assert_eq!((clock.cycle_index, clock.frame_index), (1, 0));
    }

    fn arb_point() -> impl Strategy<Value = Vec3> {
        (-2000.0..2000.0f64, -2000.0..2000.0f64, -100.0..400.0f64)
            .prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn lattice_moves_stay_within_reach(p in arb_point(), step in 1.0..50.0f64) {
            let region = CellRegion::default();
            let limits = MotionLimits::from_step(step);
            let raw = lattice_moves(p, step);
            prop_assert_eq!(raw.len(), 27);
            for q in raw {
                prop_assert!(distance(p, q) <= limits.v_max + 1e-9);
            }
            for q in lattice_actions(p, step, &region) {
                prop_assert!(region.contains(q));
            }
        }

        #[test]
        fn clip_is_idempotent(p in arb_point()) {
            let region = CellRegion::default();
            let once = region.clip(p);
            prop_assert_eq!(region.clip(once), once);
        }

        #[test]
        fn distance_triangle_inequality(a in arb_point(), b in arb_point(), c in arb_point()) {
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
            prop_assert_eq!(distance(a, b), distance(b, a));
        }
    }
}
