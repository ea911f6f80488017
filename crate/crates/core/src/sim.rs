//! Scenario integration and fixed-rate trajectory recording.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::contact::WaterModel;
use crate::dynamics::{Energy, Model, Pressures};
use crate::error::{Result, SnakeError};
use crate::gait::GaitSpec;
use crate::kinematics::{BaseState, Coords, GeneralizedState, StateVector, BASE_DOF, DOF, SECTIONS};
use crate::ode::{self, Method, SolverStats, StepControl};
use crate::params::{invalid, RobotParams};

/// Integrator, recording and scenario settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSettings {
    pub method: Method,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Step cap while any skin point is submerged (s).
    pub max_step_contact: f64,
    /// Step cap otherwise (s).
    pub max_step_free: f64,
    /// Samples per second in the recorded trajectory.
    pub record_rate: f64,
    /// Initial base height of the drop test (m).
    pub drop_height: f64,
    /// Initial base roll. `-pi/2` lays the body along `+Y` with the bending
    /// plane horizontal.
    pub base_alpha: f64,
    /// Length of the drop test (s).
    pub drop_duration: f64,
    /// Swim length in gait periods.
    pub swim_periods: f64,
    /// Initial part of a swim excluded from the speed metric, in gait periods.
    pub settle_periods: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            method: Method::Rkc,
            rel_tol: 1e-5,
            abs_tol: 1e-7,
            max_step_contact: 1e-3,
            max_step_free: 1e-2,
            record_rate: 30.0,
            drop_height: 0.30,
            base_alpha: -FRAC_PI_2,
            drop_duration: 10.0,
            swim_periods: 4.0,
            settle_periods: 2.0,
        }
    }
}

impl SimSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step_contact", self.max_step_contact),
            ("max_step_free", self.max_step_free),
            ("record_rate", self.record_rate),
            ("drop_duration", self.drop_duration),
            ("swim_periods", self.swim_periods),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be positive and finite, got {value}")));
            }
        }
        if !(self.settle_periods.is_finite() && self.settle_periods >= 0.0) {
            return Err(invalid("settle_periods", "must be non-negative".into()));
        }
        if !(self.drop_height.is_finite() && self.base_alpha.is_finite()) {
            return Err(invalid("drop_height", "initial pose must be finite".into()));
        }
        Ok(())
    }

    pub fn step_control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            ..StepControl::default()
        }
    }
}

/// Pressure input of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Drive {
    Off,
    Gait(GaitSpec),
    /// Constant supply pressures (bar).
    Hold(Pressures),
}

/// One simulation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub initial: GeneralizedState,
    pub drive: Drive,
    pub duration: f64,
    pub params: RobotParams,
    pub water: WaterModel,
    pub settings: SimSettings,
}

impl Scenario {
    pub fn pressures(&self, t: f64) -> Result<Pressures> {
        match &self.drive {
            Drive::Off => Ok([[0.0; 2]; SECTIONS]),
            Drive::Gait(g) => g.pressures(t),
            Drive::Hold(p) => Ok(*p),
        }
    }
}

/// One recorded sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: GeneralizedState,
    pub pressures: Pressures,
    pub active_contacts: usize,
    pub contact_force_z: f64,
    pub energy: Energy,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub record_rate: f64,
    pub samples: Vec<Sample>,
    pub stats: SolverStats,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }
}

/// Integrates a scenario and records it at `record_rate`.
pub fn integrate(scenario: &Scenario) -> Result<Trajectory> {
    if !(scenario.duration.is_finite() && scenario.duration > 0.0) {
        return Err(invalid("duration", "must be positive".into()));
    }
    scenario.settings.validate()?;
    let model = Model::new(&scenario.params, &scenario.water);
    let settings = &scenario.settings;

    let mut rhs = |t: f64, y: &StateVector| -> Result<(StateVector, f64)> {
        let state = GeneralizedState::from_vector(y);
        let pressures = scenario.pressures(t)?;
        let eval = model.evaluate(&state.q, &state.qdot, &pressures)?;
        let mut dy = StateVector::zeros();
        dy.fixed_rows_mut::<DOF>(0).copy_from(&state.qdot);
        dy.fixed_rows_mut::<DOF>(DOF).copy_from(&eval.qddot);
        let cap = if eval.contact.active_count() > 0 {
            settings.max_step_contact
        } else {
            settings.max_step_free
        };
        Ok((dy, cap))
    };

    let rate = settings.record_rate;
    let n_samples = (scenario.duration * rate + 1e-9).floor() as usize + 1;
    let sample_time = |k: usize| (k as f64 / rate).min(scenario.duration);
    let mut next = 0usize;
    let mut recorded: Vec<(f64, StateVector)> = Vec::with_capacity(n_samples);
    let y0 = scenario.initial.to_vector();

    let (_, stats) = ode::integrate(
        settings.method,
        &mut rhs,
        0.0,
        y0,
        scenario.duration,
        &settings.step_control(),
        |step| {
            while next < n_samples {
                let t = sample_time(next);
                if t > step.end() {
                    break;
                }
                let y = if next == 0 { y0 } else { step.eval(t) };
                recorded.push((t, y));
                next += 1;
            }
            Ok(())
        },
    )?;

    let mut samples = Vec::with_capacity(recorded.len());
    let mut peak_extension: f64 = 0.0;
    for (t, y) in recorded {
        let state = GeneralizedState::from_vector(&y);
        samples.push(observe(&model, scenario, t, state)?);
        for i in BASE_DOF..DOF {
            peak_extension = peak_extension.max(state.q[i].abs());
        }
    }
    let mut warnings = Vec::new();
    if peak_extension > 1.5 * scenario.params.max_extension {
        warnings.push(format!(
            "actuator extension reached {peak_extension:.4} m, more than 1.5x the rated {} m",
            scenario.params.max_extension
        ));
    }
    Ok(Trajectory {
        record_rate: rate,
        samples,
        stats,
        warnings,
    })
}

fn observe(model: &Model, scenario: &Scenario, t: f64, state: GeneralizedState) -> Result<Sample> {
    let chain = model.chain(&state.q)?;
    let (_, report) = model.contact().generalized_force(&chain, &state.qdot);
    Ok(Sample {
        t,
        state,
        pressures: scenario.pressures(t)?,
        active_contacts: report.active_count(),
        contact_force_z: report.total_vertical,
        energy: model.energy(&state.q, &state.qdot)?,
    })
}

/// Summary of the floating equilibrium reached by the drop test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloatReport {
    /// First time after which the base stays still and the support carries
    /// the weight within 1 %.
    pub settle_time: Option<f64>,
    /// Final base height (m).
    pub base_z: f64,
    /// Deepest skin point at the end (m below the surface is negative).
    pub min_skin_z: f64,
    /// Final vertical support force (N).
    pub contact_force_z: f64,
    /// Robot weight (N).
    pub weight: f64,
    /// Final vertical base speed (m/s).
    pub final_vz: f64,
    /// Grid indices of the submerged skin points at the end.
    pub active_points: Vec<usize>,
}

/// Velocity bound on the base for the float to count as settled (m/s).
pub const SETTLED_SPEED: f64 = 1e-3;
/// Relative support-force error for the float to count as settled.
pub const SETTLED_FORCE: f64 = 0.01;

pub fn drop_scenario(params: &RobotParams, water: &WaterModel, settings: &SimSettings) -> Scenario {
    Scenario {
        initial: GeneralizedState::at_rest(BaseState {
            z: settings.drop_height,
            alpha: settings.base_alpha,
            ..BaseState::default()
        }),
        drive: Drive::Off,
        duration: settings.drop_duration,
        params: params.clone(),
        water: water.clone(),
        settings: settings.clone(),
    }
}

/// Drops the unactuated robot onto the water and reports the float.
pub fn run_drop_test(
    params: &RobotParams,
    water: &WaterModel,
    settings: &SimSettings,
) -> Result<(Trajectory, FloatReport)> {
    let scenario = drop_scenario(params, water, settings);
    let trajectory = integrate(&scenario)?;
    let report = float_report(&trajectory, params, water)?;
    Ok((trajectory, report))
}

pub fn float_report(
    trajectory: &Trajectory,
    params: &RobotParams,
    water: &WaterModel,
) -> Result<FloatReport> {
    let last = trajectory.last().ok_or(SnakeError::EmptyTrajectory)?;
    let weight = params.weight();
    let settled = |s: &Sample| {
        s.state.qdot[2].abs() < SETTLED_SPEED
            && (s.contact_force_z - weight).abs() < SETTLED_FORCE * weight
    };
    let mut settle_time = None;
    for s in trajectory.samples.iter().rev() {
        if settled(s) {
            settle_time = Some(s.t);
        } else {
            break;
        }
    }
    let model = Model::new(params, water);
    let chain = model.chain(&last.state.q)?;
    let positions = model.contact().positions(&chain);
    let (_, contact) = model.contact().generalized_force(&chain, &last.state.qdot);
    Ok(FloatReport {
        settle_time,
        base_z: last.state.q[2],
        min_skin_z: positions.iter().map(|p| p.z).fold(f64::INFINITY, f64::min),
        contact_force_z: last.contact_force_z,
        weight,
        final_vz: last.state.qdot[2],
        active_points: contact.active,
    })
}

/// Swims with `gait` for `duration` seconds from `initial`.
pub fn run_swim(
    gait: &GaitSpec,
    duration: f64,
    initial: GeneralizedState,
    params: &RobotParams,
    water: &WaterModel,
    settings: &SimSettings,
) -> Result<Trajectory> {
    gait.validate(params.max_pressure)?;
    integrate(&Scenario {
        initial,
        drive: Drive::Gait(*gait),
        duration,
        params: params.clone(),
        water: water.clone(),
        settings: settings.clone(),
    })
}

/// Horizontal centroid of the mass points for every sample.
pub fn centroid_path(trajectory: &Trajectory, params: &RobotParams) -> Result<Vec<Vector3<f64>>> {
    let model = Model::new(params, &WaterModel::default());
    trajectory
        .samples
        .iter()
        .map(|s| model.centroid(&s.state.q))
        .collect()
}

/// Horizontal distance between the centroids at two sample indices (m).
pub fn horizontal_displacement(path: &[Vector3<f64>], from: usize, to: usize) -> f64 {
    let d = path[to] - path[from];
    d.x.hypot(d.y)
}

/// Runs the drop test and returns its final state at rest, the start of
/// every swim.
pub fn floated_start(
    params: &RobotParams,
    water: &WaterModel,
    settings: &SimSettings,
) -> Result<GeneralizedState> {
    let (trajectory, _) = run_drop_test(params, water, settings)?;
    let last = trajectory.last().ok_or(SnakeError::EmptyTrajectory)?;
    Ok(at_rest(&last.state))
}

/// Zero-velocity copy of a state.
pub fn at_rest(state: &GeneralizedState) -> GeneralizedState {
    GeneralizedState {
        q: state.q,
        qdot: Coords::zeros(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ballistic_fall_matches_closed_form() {
        let params = RobotParams::default();
        let settings = SimSettings::default();
        let scenario = Scenario {
            initial: GeneralizedState::at_rest(BaseState {
                z: 0.5,
                alpha: -FRAC_PI_2,
                ..BaseState::default()
            }),
            drive: Drive::Off,
            duration: 0.1,
            params,
            water: WaterModel::default(),
            settings,
        };
        let traj = integrate(&scenario).unwrap();
        assert_eq!(traj.samples.len(), 4);
        for s in &traj.samples {
            let expected = 0.5 - 0.5 * 9.81 * s.t * s.t;
            assert!((s.state.q[2] - expected).abs() < 1e-6);
            assert_eq!(s.active_contacts, 0);
        }
        for w in traj.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
    }

    #[test]
    fn rejects_bad_duration() {
        let mut scenario = drop_scenario(
            &RobotParams::default(),
            &WaterModel::default(),
            &SimSettings::default(),
        );
        scenario.duration = 0.0;
        assert!(integrate(&scenario).is_err());
    }
}
