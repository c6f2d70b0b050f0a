use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub states: usize,
    pub actions: usize,
    pub values: Vec<f64>,
}

impl QTable {
    pub fn new(states: usize, actions: usize) -> Self {
        Self {
            states,
            actions,
            values: vec![0.0; states * actions],
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.actions..(s + 1) * self.actions]
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn greedy(&self, s: usize) -> usize {
        super::dqn::argmax(self.row(s))
    }
}

/// `Q(s,a) += alpha (r + gamma max_a' Q(s',a') - Q(s,a))`.
pub fn tabular_q_update(table: &mut QTable, s: usize, a: usize, reward: f64, next: usize, alpha: f64, gamma: f64) {
    let target = reward + gamma * table.max(next);
    let k = s * table.actions + a;
    table.values[k] += alpha * (target - table.values[k]);
}

/// Square 2-D lattice with the 9 planar moves (including staying put).
/// Moves off the edge are clipped; landing on the goal pays 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridWorld {
    pub size: usize,
    pub goal: (usize, usize),
}

impl GridWorld {
    pub const MOVES: usize = 9;

    pub fn states(&self) -> usize {
        self.size * self.size
    }

    pub fn cell(&self, s: usize) -> (usize, usize) {
        (s % self.size, s / self.size)
    }

    pub fn state(&self, x: usize, y: usize) -> usize {
        y * self.size + x
    }

    pub fn step(&self, s: usize, a: usize) -> (usize, f64) {
        let (x, y) = self.cell(s);
        let shift = |v: usize, d: i64| (v as i64 + d).clamp(0, self.size as i64 - 1) as usize;
        let dx = (a % 3) as i64 - 1;
        let dy = (a / 3) as i64 - 1;
        let next = self.state(shift(x, dx), shift(y, dy));
        let reward = if self.cell(next) == self.goal { 1.0 } else { 0.0 };
        (next, reward)
    }
}

/// Q-learning with a uniformly random behaviour policy from random starts.
pub fn train_tabular<R: Rng + ?Sized>(
    world: &GridWorld,
    episodes: usize,
    steps: usize,
    alpha: f64,
    gamma: f64,
    rng: &mut R,
) -> QTable {
    let mut table = QTable::new(world.states(), GridWorld::MOVES);
    for _ in 0..episodes {
        let mut s = rng.gen_range(0..world.states());
        for _ in 0..steps {
            let a = rng.gen_range(0..GridWorld::MOVES);
            let (next, r) = world.step(s, a);
            tabular_q_update(&mut table, s, a, r, next, alpha, gamma);
            s = next;
        }
    }
    table
}
