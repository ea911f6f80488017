use thiserror::Error;

use crate::kinematics::StateVector;

#[derive(Debug, Error)]
pub enum SnakeError {
    #[error("non-positive length in section {section}: arc length {arc_length}, actuator lengths ({inner}, {outer})")]
    NonPositiveLength {
        section: usize,
        arc_length: f64,
        inner: f64,
        outer: f64,
    },
    #[error("body coordinate {0} outside [0, 3]")]
    OutOfRange(f64),
    #[error("pressure {pressure} bar on actuator ({module}, {actuator}) outside [0, {limit}]")]
    PressureOutOfRange {
        module: usize,
        actuator: usize,
        pressure: f64,
        limit: f64,
    },
    #[error("bad gait index: module {module}, actuator {actuator}")]
    BadIndex { module: usize, actuator: usize },
    #[error("mass matrix is not positive definite after regularization")]
    SingularMass,
    #[error("step size underflow at t = {t} s (h = {step:e})")]
    StepSizeUnderflow {
        t: f64,
        step: f64,
        state: Box<StateVector>,
    },
    #[error("non-finite state at t = {t} s")]
    NonFiniteState { t: f64, state: Box<StateVector> },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("config error: {0}")]
    Config(String),
    #[error("plot error: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = SnakeError> = std::result::Result<T, E>;
