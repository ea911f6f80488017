//! Trajectory CSV and JSON summaries.

use std::fmt::Write as _;

use serde::Serialize;

use crate::sim::Trajectory;

/// Column names of the trajectory CSV, in order.
pub const TRAJECTORY_COLUMNS: [&str; 36] = [
    "t", "x", "y", "z", "alpha", "beta", "gamma", "l11", "l12", "l21", "l22", "l31", "l32",
    "xdot", "ydot", "zdot", "alphadot", "betadot", "gammadot", "l11dot", "l12dot", "l21dot",
    "l22dot", "l31dot", "l32dot", "p11", "p12", "p21", "p22", "p31", "p32", "n_active",
    "f_contact_z", "e_kin", "e_pot", "e_elastic",
];

/// One row per recorded sample. Floats use the shortest representation that
/// reads back to the same value, so equal runs give equal bytes.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    for s in &trajectory.samples {
        write!(out, "{}", s.t).unwrap();
        for v in s.state.q.iter().chain(s.state.qdot.iter()) {
            write!(out, ",{v}").unwrap();
        }
        for p in s.pressures.iter().flatten() {
            write!(out, ",{p}").unwrap();
        }
        writeln!(
            out,
            ",{},{},{},{},{}",
            s.active_contacts,
            s.contact_force_z,
            s.energy.kinetic,
            s.energy.gravitational,
            s.energy.elastic
        )
        .unwrap();
    }
    out
}

/// Net motion of a swim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwimSummary {
    pub dphi_rad: f64,
    pub duration_s: f64,
    /// Centroid displacement over the whole swim (m).
    pub displacement_m: f64,
    /// Start of the speed window, absent when the swim is too short (s).
    pub settle_s: Option<f64>,
    /// Centroid displacement over the speed window (m).
    pub window_displacement_m: Option<f64>,
    pub speed_mps: Option<f64>,
    pub warnings: Vec<String>,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("summaries serialize");
    text.push('\n');
    text
}
