//! Serpentine pressure gaits and the phase-offset sweep.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::WaterModel;
use crate::dynamics::Pressures;
use crate::error::{Result, SnakeError};
use crate::kinematics::{GeneralizedState, SECTIONS};
use crate::params::{invalid, RobotParams};
use crate::sim::{centroid_path, horizontal_displacement, run_swim, SimSettings, Trajectory};

/// Travelling-wave pressure signal
/// `P_jk(t) = A (1 + sin(w t + (k-1) intra + (j-1) inter))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitSpec {
    /// Pressure amplitude (bar).
    pub amplitude: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
    /// Phase between the two actuators of a module (rad).
    pub intra_phase: f64,
    /// Phase between adjacent modules (rad).
    pub inter_phase: f64,
}

impl Default for GaitSpec {
    fn default() -> Self {
        Self::with_inter_phase(PI / 8.0)
    }
}

impl GaitSpec {
    pub fn with_inter_phase(inter_phase: f64) -> Self {
        Self {
            amplitude: 1.5,
            omega: 0.5,
            intra_phase: PI,
            inter_phase,
        }
    }

    /// Gait period `2 pi / w` (s).
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Supply pressure of actuator `actuator` (1..=2) of module `module`
    /// (1..=3) at time `t`, in bar.
    pub fn pressure(&self, t: f64, module: usize, actuator: usize) -> Result<f64> {
        if !(1..=SECTIONS).contains(&module) || !(1..=2).contains(&actuator) {
            return Err(SnakeError::BadIndex { module, actuator });
        }
        let phase = self.omega * t
            + (actuator - 1) as f64 * self.intra_phase
            + (module - 1) as f64 * self.inter_phase;
        Ok((self.amplitude * (1.0 + phase.sin())).max(0.0))
    }

    pub fn pressures(&self, t: f64) -> Result<Pressures> {
        let mut out = [[0.0; 2]; SECTIONS];
        for (j, row) in out.iter_mut().enumerate() {
            for (k, p) in row.iter_mut().enumerate() {
                *p = self.pressure(t, j + 1, k + 1)?;
            }
        }
        Ok(out)
    }

    pub fn validate(&self, max_pressure: f64) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(invalid("amplitude", "must be non-negative".into()));
        }
        if 2.0 * self.amplitude > max_pressure + 1e-12 {
            return Err(invalid(
                "amplitude",
                format!(
                    "peak pressure {} exceeds {max_pressure} bar",
                    2.0 * self.amplitude
                ),
            ));
        }
        if !(self.omega.is_finite() && self.omega > 0.0) {
            return Err(invalid("omega", "must be positive".into()));
        }
        if !(self.intra_phase.is_finite() && self.inter_phase.is_finite()) {
            return Err(invalid("inter_phase", "phases must be finite".into()));
        }
        Ok(())
    }
}

/// Outcome of one swim evaluated for forward speed.
#[derive(Debug, Clone)]
pub struct GaitResult {
    pub spec: GaitSpec,
    /// Horizontal centroid displacement over the evaluation window (m).
    pub displacement: f64,
    /// `displacement / (duration - settle)` (m/s).
    pub speed: f64,
    /// Horizontal centroid displacement over the whole swim (m).
    pub total_displacement: f64,
    pub settle: f64,
    pub duration: f64,
    pub path: Vec<Vector3<f64>>,
    pub trajectory: Trajectory,
}

/// Robot, water and integrator settings shared by the swims of a sweep.
#[derive(Debug, Clone, Copy)]
pub struct SwimSetup<'a> {
    /// Floating equilibrium every swim starts from.
    pub start: &'a GeneralizedState,
    pub params: &'a RobotParams,
    pub water: &'a WaterModel,
    pub settings: &'a SimSettings,
}

/// Speed window rule: `duration > settle >= one gait period`.
pub fn check_window(spec: &GaitSpec, duration: f64, settle: f64) -> Result<()> {
    let period = spec.period();
    if settle >= period - 1e-9 && duration > settle {
        return Ok(());
    }
    Err(invalid(
        "duration",
        format!(
            "need duration > settle >= one gait period ({period:.3} s), got duration {duration}, settle {settle}"
        ),
    ))
}

/// Swims for `duration` seconds and measures the centroid speed after
/// `settle` seconds.
pub fn evaluate_gait(
    spec: &GaitSpec,
    duration: f64,
    settle: f64,
    setup: SwimSetup<'_>,
) -> Result<GaitResult> {
    check_window(spec, duration, settle)?;
    let trajectory = run_swim(
        spec,
        duration,
        *setup.start,
        setup.params,
        setup.water,
        setup.settings,
    )?;
    let path = centroid_path(&trajectory, setup.params)?;
    let last = path.len() - 1;
    // Samples sit on the record grid, so the window starts at the first one
    // at or after `settle`.
    let from = trajectory
        .samples
        .iter()
        .position(|s| s.t >= settle - 1e-9)
        .unwrap_or(last);
    let window = trajectory.samples[last].t - trajectory.samples[from].t;
    let displacement = horizontal_displacement(&path, from, last);
    Ok(GaitResult {
        spec: *spec,
        displacement,
        speed: if window > 0.0 { displacement / window } else { 0.0 },
        total_displacement: horizontal_displacement(&path, 0, last),
        settle,
        duration,
        path,
        trajectory,
    })
}

/// One row of a phase sweep. `outcome` holds the error text of a failed
/// swim.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub inter_phase: f64,
    pub outcome: std::result::Result<SweepValue, String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepValue {
    pub speed: f64,
    pub displacement: f64,
}

/// Sweep table sorted by phase offset.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub cells: Vec<SweepCell>,
    /// Index of the fastest successful cell. Ties go to the smaller offset.
    pub best: Option<usize>,
}

impl SweepTable {
    pub fn best_cell(&self) -> Option<&SweepCell> {
        self.best.map(|i| &self.cells[i])
    }

    /// CSV with columns `dphi_rad,speed_mps,displacement_m,status`. Failed
    /// cells leave the numeric columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dphi_rad,speed_mps,displacement_m,status\n");
        for cell in &self.cells {
            match &cell.outcome {
                Ok(v) => out.push_str(&format!(
                    "{},{},{},ok\n",
                    cell.inter_phase, v.speed, v.displacement
                )),
                Err(e) => out.push_str(&format!(
                    "{},,,failed: {}\n",
                    cell.inter_phase,
                    e.replace([',', '\n'], ";")
                )),
            }
        }
        out
    }
}

/// Evaluates `base` with every inter-module phase in `grid`. Cells run in
/// parallel; the table is sorted by phase so it does not depend on the
/// order of `grid` or on scheduling.
pub fn sweep_phase(
    base: &GaitSpec,
    grid: &[f64],
    duration: f64,
    settle: f64,
    setup: SwimSetup<'_>,
) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(invalid("grid", "must not be empty".into()));
    }
    if let Some(bad) = grid.iter().find(|d| !(0.0..=PI).contains(*d)) {
        return Err(invalid("grid", format!("phase {bad} is outside [0, pi]")));
    }
    check_window(base, duration, settle)?;
    let mut phases = grid.to_vec();
    phases.sort_by(f64::total_cmp);
    phases.dedup();

    let cells: Vec<SweepCell> = phases
        .par_iter()
        .map(|&inter_phase| {
            let spec = GaitSpec {
                inter_phase,
                ..*base
            };
            let outcome = evaluate_gait(&spec, duration, settle, setup)
                .map(|r| SweepValue {
                    speed: r.speed,
                    displacement: r.displacement,
                })
                .map_err(|e| e.to_string());
            SweepCell {
                inter_phase,
                outcome,
            }
        })
        .collect();

    let best = fastest(&cells);
    Ok(SweepTable { cells, best })
}

// First strictly fastest successful cell of a phase-sorted table.
fn fastest(cells: &[SweepCell]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, cell) in cells.iter().enumerate() {
        let Ok(v) = &cell.outcome else { continue };
        if best.is_none_or(|(_, top)| v.speed.total_cmp(&top) == Ordering::Greater) {
            best = Some((i, v.speed));
        }
    }
    best.map(|(i, _)| i)
}
