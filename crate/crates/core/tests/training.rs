use u2x::channel::ChannelParams;
use u2x::harness::{run_on_scenario, Config};
use u2x::model::{
    apply_action, distance, CellRegion, Entity, EntityKind, MotionLimits, SensingTask, Vec3, GROUND_HEIGHT,
};
use u2x::protocol::{candidate_modes, isolated_transmission_prob, Framework, IterativeRrm, WorldView};
use u2x::rl::{encode, run_training, DqnConfig};
use u2x::scenario::{RrmParams, Scenario};
use u2x::sensing::SensingParams;

fn scenario(entities: Vec<Entity>, tasks: Vec<SensingTask>) -> Scenario {
    Scenario {
        region: CellRegion::default(),
        entities,
        tasks,
        channel: ChannelParams::default(),
        sensing: SensingParams::default(),
        motion: MotionLimits::default(),
        subchannels: 2,
        frames_per_cycle: 10,
        rrm: RrmParams::default(),
    }
}

fn bs() -> Entity {
    Entity { id: 0, kind: EntityKind::Bs, position: Vec3::new(0.0, 0.0, GROUND_HEIGHT) }
}

fn task(uav_id: u32, target: Vec3, destination: u32) -> SensingTask {
    SensingTask { uav_id, target, destination, data_packets: 3, qos_threshold: 1.0 }
}

fn small_config() -> Config {
    let mut c = Config::default();
    c.experiment.episodes = 3;
    c.experiment.eval_cycles = 20;
    c.dqn.cycles_per_episode = 10;
    c
}

#[test]
fn training_is_deterministic() {
    let config = small_config();
    let s = config.scenario.build(4).unwrap();
    let rrm = IterativeRrm::new((&s.rrm).into());
    let a = run_training(&s, Framework::U2x, &config.dqn, 3, 4, &rrm).unwrap();
    let b = run_training(&s, Framework::U2x, &config.dqn, 3, 4, &rrm).unwrap();
    assert_eq!(a.utility_series(), b.utility_series());
    for (x, y) in a.agents.iter().zip(&b.agents) {
        assert_eq!(x.net, y.net);
    }
}

#[test]
fn cellular_never_sends_direct_or_relayed_frames() {
    let config = small_config();
    for seed in 1..=3 {
        let s = config.scenario.build(seed).unwrap();
        let m = run_on_scenario(&config, &s, Framework::Cellular, seed).unwrap();
        let f = m.evaluation.frame_counts;
        assert_eq!((f.u2u, f.u2d), (0, 0), "seed {seed}");
        assert!(m.evaluation.accounting_holds());
    }
}

#[test]
fn lone_uav_reporting_to_bs_is_the_same_under_both_frameworks() {
    let s = scenario(
        vec![bs(), Entity { id: 1, kind: EntityKind::Uav, position: Vec3::new(150.0, 50.0, 100.0) }],
        vec![task(1, Vec3::new(150.0, 0.0, 0.0), 0)],
    );
    let config = small_config();
    let a = run_on_scenario(&config, &s, Framework::U2x, 3).unwrap();
    let b = run_on_scenario(&config, &s, Framework::Cellular, 3).unwrap();
    assert_eq!(a.evaluation, b.evaluation);
    assert_eq!(a.training, b.training);
}

#[test]
fn edge_ue_downlink_is_weaker_than_near_ue() {
    let s = scenario(
        vec![
            bs(),
            Entity { id: 1, kind: EntityKind::Ue, position: Vec3::new(50.0, 0.0, GROUND_HEIGHT) },
            Entity { id: 2, kind: EntityKind::Ue, position: Vec3::new(480.0, 0.0, GROUND_HEIGHT) },
            Entity { id: 3, kind: EntityKind::Uav, position: Vec3::new(0.0, 0.0, 60.0) },
            Entity { id: 4, kind: EntityKind::Uav, position: Vec3::new(0.0, 0.0, 60.0) },
        ],
        vec![task(3, Vec3::new(0.0, 0.0, 0.0), 1), task(4, Vec3::new(0.0, 0.0, 0.0), 2)],
    );
    let positions = s.initial_uav_positions();
    let world = WorldView::new(&s, &positions);
    let prob = |link: usize| {
        let c = candidate_modes(&s.tasks[link], &world, &s.channel, s.rrm.p_max_dbm, Framework::Cellular);
        assert_eq!(c.len(), 1);
        isolated_transmission_prob(&s, link, c.first(), positions[link])
    };
    assert!(prob(1) < prob(0), "edge {} near {}", prob(1), prob(0));
}

#[test]
fn myopic_agent_heads_for_its_target() {
    let ue = Vec3::new(200.0, 0.0, GROUND_HEIGHT);
    let start = Vec3::new(-250.0, 0.0, 100.0);
    let s = scenario(
        vec![
            bs(),
            Entity { id: 1, kind: EntityKind::Ue, position: ue },
            Entity { id: 2, kind: EntityKind::Uav, position: start },
        ],
        vec![task(2, Vec3::new(ue.x, ue.y, 0.0), 1)],
    );
    let dqn = DqnConfig { gamma: 0.0, ..DqnConfig::default() };
    let rrm = IterativeRrm::new((&s.rrm).into());
    let t = run_training(&s, Framework::U2x, &dqn, 200, 11, &rrm).unwrap();
    let action = t.agents[0].greedy(&encode(&s, 0, &[start])).unwrap();
    let next = apply_action(start, action, s.motion.lattice_step, &s.region);
    let target = s.tasks[0].target;
    assert!(distance(next, target) < distance(start, target), "action {action}");
}
