use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance, Vec3};
use crate::protocol::{isolated_transmission_prob, select_mode, valid_prob, Framework, TransmissionMode, WorldView};
use crate::scenario::Scenario;
use crate::sensing::sensing_success_prob;

/// Square planar grid centred on the cell, one sample per cell centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cell edge, m.
    pub cell: f64,
    pub altitude: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            cell: 25.0,
            altitude: 100.0,
        }
    }
}

/// Row-major values (`y` outer); `None` marks cells outside the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapGrid<T> {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell: f64,
    pub altitude: f64,
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<Option<T>>,
}

impl<T> HeatmapGrid<T> {
    pub fn point(&self, ix: usize, iy: usize) -> Vec3 {
        Vec3::new(
            self.origin_x + (ix as f64 + 0.5) * self.cell,
            self.origin_y + (iy as f64 + 0.5) * self.cell,
            self.altitude,
        )
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<&T> {
        self.values[iy * self.nx + ix].as_ref()
    }

    /// `(point, value)` for every cell inside the region.
    pub fn cells(&self) -> impl Iterator<Item = (Vec3, &T)> + '_ {
        (0..self.ny).flat_map(move |iy| {
            (0..self.nx).filter_map(move |ix| self.get(ix, iy).map(|v| (self.point(ix, iy), v)))
        })
    }
}

fn build_grid<T>(scenario: &Scenario, grid: &GridSpec, mut f: impl FnMut(Vec3) -> T) -> Result<HeatmapGrid<T>> {
    let r = &scenario.region;
    if !(grid.cell > 0.0) {
        return Err(Error::Domain("grid cell must be positive".into()));
    }
    if !(r.min_alt..=r.max_alt).contains(&grid.altitude) {
        return Err(Error::Domain(format!(
            "grid altitude {} outside [{}, {}]",
            grid.altitude, r.min_alt, r.max_alt
        )));
    }
    let n = (2.0 * r.radius / grid.cell).ceil() as usize;
    let origin = -(n as f64) * grid.cell / 2.0;
    let mut out = HeatmapGrid {
        origin_x: r.center.x + origin,
        origin_y: r.center.y + origin,
        cell: grid.cell,
        altitude: grid.altitude,
        nx: n,
        ny: n,
        values: Vec::with_capacity(n * n),
    };
    for iy in 0..n {
        for ix in 0..n {
            let p = out.point(ix, iy);
            let v = r.contains(p).then(|| f(p));
            out.values.push(v);
        }
    }
    Ok(out)
}

fn positions_with(scenario: &Scenario, link: usize, at: Vec3) -> Result<Vec<Vec3>> {
    let task = scenario
        .tasks
        .get(link)
        .ok_or_else(|| Error::Domain(format!("no task {link}")))?;
    let k = scenario.uav_index(task.uav_id).expect("validated task has a UAV");
    let mut positions = scenario.initial_uav_positions();
    positions[k] = at;
    Ok(positions)
}

/// Mode picked by task `link`'s UAV at each grid cell, the rest of the
/// world held at the scenario's positions.
pub fn mode_map(scenario: &Scenario, link: usize, grid: &GridSpec) -> Result<HeatmapGrid<Option<TransmissionMode>>> {
    positions_with(scenario, link, scenario.region.center)?;
    let task = &scenario.tasks[link];
    build_grid(scenario, grid, |p| {
        let positions = positions_with(scenario, link, p).expect("checked above");
        let world = WorldView::new(scenario, &positions);
        select_mode(task, &world, &scenario.channel, scenario.rrm.p_max_dbm, Framework::U2x).map(|c| c.mode)
    })
}

/// Valid-transmission probability of task `link` at each grid cell, with
/// the link alone on a subchannel at full power.
pub fn success_heatmap(scenario: &Scenario, link: usize, grid: &GridSpec, framework: Framework) -> Result<HeatmapGrid<f64>> {
    positions_with(scenario, link, scenario.region.center)?;
    let task = &scenario.tasks[link];
    build_grid(scenario, grid, |p| {
        let positions = positions_with(scenario, link, p).expect("checked above");
        let world = WorldView::new(scenario, &positions);
        let choice = select_mode(task, &world, &scenario.channel, scenario.rrm.p_max_dbm, framework);
        let p_s = sensing_success_prob(distance(p, task.target), &scenario.sensing);
        valid_prob(p_s, isolated_transmission_prob(scenario, link, choice.as_ref(), p))
    })
}
