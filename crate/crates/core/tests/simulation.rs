use std::sync::OnceLock;

use soft_snake::contact::{ContactModel, WaterModel};
use soft_snake::dynamics::Model;
use soft_snake::export::trajectory_csv;
use soft_snake::gait::{evaluate_gait, GaitSpec, SwimSetup};
use soft_snake::kinematics::Chain;
use soft_snake::params::RobotParams;
use soft_snake::sim::{at_rest, run_drop_test, run_swim, FloatReport, SimSettings, Trajectory};

fn drop() -> &'static (Trajectory, FloatReport) {
    static DROP: OnceLock<(Trajectory, FloatReport)> = OnceLock::new();
    DROP.get_or_init(|| {
        run_drop_test(
            &RobotParams::default(),
            &WaterModel::default(),
            &SimSettings::default(),
        )
        .unwrap()
    })
}

#[test]
fn drop_is_deterministic() {
    let (again, _) = run_drop_test(
        &RobotParams::default(),
        &WaterModel::default(),
        &SimSettings::default(),
    )
    .unwrap();
    assert_eq!(trajectory_csv(&drop().0), trajectory_csv(&again));
}

#[test]
fn falls_monotonically_until_contact() {
    let samples = &drop().0.samples;
    let touch = samples
        .iter()
        .position(|s| s.active_contacts > 0)
        .expect("reaches the water");
    assert!(touch > 1);
    for w in samples[..touch].windows(2) {
        assert!(w[1].state.q[2] < w[0].state.q[2], "rose at t = {}", w[1].t);
    }
}

#[test]
fn contact_only_dissipates() {
    let params = RobotParams::default();
    let contact = ContactModel::new(&params, &WaterModel::default());
    let samples = &drop().0.samples;
    let touch = samples.iter().position(|s| s.active_contacts > 0).unwrap();
    let total: Vec<f64> = samples[touch - 1..]
        .iter()
        .map(|s| {
            let chain = Chain::new(&s.state.q, &params).unwrap();
            s.energy.total() + contact.spring_energy(&chain)
        })
        .collect();
    let worst = total
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = samples[0].energy.total().abs();
    assert!(worst < 1e-5 * scale, "energy rose by {worst} J");
}

#[test]
fn float_is_an_equilibrium() {
    let (trajectory, report) = drop();
    assert!(report.settle_time.is_some());
    let state = at_rest(&trajectory.last().unwrap().state);
    let model = Model::new(&RobotParams::default(), &WaterModel::default());
    let eval = model.evaluate(&state.q, &state.qdot, &[[0.0; 2]; 3]).unwrap();
    assert!(eval.qddot.amax() < 1e-3, "{}", eval.qddot);
}

#[test]
fn recording_rate_does_not_change_the_motion() {
    let params = RobotParams::default();
    let water = WaterModel::default();
    let start = at_rest(&drop().0.last().unwrap().state);
    let gait = GaitSpec::default();
    let coarse = SimSettings {
        record_rate: 10.0,
        ..SimSettings::default()
    };
    let fine = SimSettings {
        record_rate: 40.0,
        ..SimSettings::default()
    };
    let a = run_swim(&gait, 1.0, start, &params, &water, &coarse).unwrap();
    let b = run_swim(&gait, 1.0, start, &params, &water, &fine).unwrap();
    let (qa, qb) = (a.last().unwrap().state.q, b.last().unwrap().state.q);
    assert_eq!(a.last().unwrap().t, b.last().unwrap().t);
    assert_eq!(qa, qb);
}

#[test]
fn steady_gait_speed_holds_over_a_longer_swim() {
    let params = RobotParams::default();
    let water = WaterModel::default();
    let settings = SimSettings::default();
    let start = at_rest(&drop().0.last().unwrap().state);
    let setup = SwimSetup {
        start: &start,
        params: &params,
        water: &water,
        settings: &settings,
    };
    let gait = GaitSpec::default();
    let settle = 2.0 * gait.period();
    let short = evaluate_gait(&gait, 4.0 * gait.period(), settle, setup).unwrap();
    let long = evaluate_gait(&gait, 8.0 * gait.period(), settle, setup).unwrap();
    let change = (long.speed - short.speed).abs() / short.speed;
    assert!(change < 0.1, "{} vs {} m/s", short.speed, long.speed);
}
