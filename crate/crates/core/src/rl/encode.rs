use crate::model::{EntityKind, Vec3};
use crate::scenario::Scenario;

/// Feature count for a scenario with `uav_count` UAVs.
pub fn observation_len(uav_count: usize) -> usize {
    3 * (2 + 1 + uav_count.saturating_sub(1)) + 3
}

fn push_scaled(out: &mut Vec<f64>, v: Vec3, scale: f64) {
    out.extend([v.x / scale, v.y / scale, v.z / scale]);
}

/// Observation of the UAV at `agent` (index into the scenario's UAV order):
/// own position relative to the cell centre, then target, destination and
/// every other UAV relative to itself, all divided by the cell radius, and a
/// one-hot destination kind (BS, UE, UAV).
pub fn encode(scenario: &Scenario, agent: usize, positions: &[Vec3]) -> Vec<f64> {
    let scale = scenario.region.radius;
    let own = positions[agent];
    let uav_ids = scenario.uav_ids();
    let id = uav_ids[agent];
    let mut out = Vec::with_capacity(observation_len(positions.len()));
    push_scaled(&mut out, own - scenario.region.center, scale);

    let task = scenario.tasks.iter().find(|t| t.uav_id == id);
    let mut kind = [0.0; 3];
    match task {
        Some(t) => {
            push_scaled(&mut out, t.target - own, scale);
            let (dest_kind, dest) = match scenario.entity(t.destination) {
                Some(e) if e.kind == EntityKind::Uav => {
                    let k = scenario.uav_index(e.id).expect("UAV entity has an index");
                    (e.kind, positions[k])
                }
                Some(e) => (e.kind, e.position),
                None => (EntityKind::Bs, own),
            };
            push_scaled(&mut out, dest - own, scale);
            kind[match dest_kind {
                EntityKind::Bs => 0,
                EntityKind::Ue => 1,
                EntityKind::Uav => 2,
            }] = 1.0;
        }
        None => out.extend([0.0; 6]),
    }
    for (k, &p) in positions.iter().enumerate() {
        if k != agent {
            push_scaled(&mut out, p - own, scale);
        }
    }
    out.extend(kind);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::ScenarioConfig;

    #[test]
    fn five_uav_length() {
        assert_eq!(observation_len(5), 24);
        let s = ScenarioConfig::default().build(3).unwrap();
        let x = encode(&s, 0, &s.initial_uav_positions());
        assert_eq!(x.len(), 24);
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn everything_at_centre_is_zero() {
        let mut s = ScenarioConfig::default().build(3).unwrap();
        let c = s.region.center;
        for e in &mut s.entities {
            e.position = c;
        }
        for t in &mut s.tasks {
            t.target = c;
        }
        let positions = vec![c; 5];
        let x = encode(&s, 2, &positions);
        assert!(x[..21].iter().all(|&v| v == 0.0));
        assert_eq!(x[21..].iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn translation_leaves_features_unchanged() {
        let s = ScenarioConfig::default().build(8).unwrap();
        let shift = Vec3::new(1000.0, -250.0, 0.0);
        let mut t = s.clone();
        t.region.center = t.region.center + shift;
        for e in &mut t.entities {
            e.position = e.position + shift;
        }
        for task in &mut t.tasks {
            task.target = task.target + shift;
        }
        let p = s.initial_uav_positions();
        let q = t.initial_uav_positions();
        for a in 0..5 {
            let (x, y) = (encode(&s, a, &p), encode(&t, a, &q));
            for (u, v) in x.iter().zip(&y) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }
}
