//! Physical constants of the robot.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SnakeError};

/// Geometry, inertia, actuator and environment constants of the three-section
/// soft snake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    /// Unactuated section length L0 (m).
    pub section_length: f64,
    /// Offset of the actuators from the neutral axis, also the skin radius (m).
    pub radius: f64,
    /// Mass of one soft module (kg).
    pub module_mass: f64,
    /// Elastic stiffness of one actuator (N/m).
    pub stiffness: f64,
    /// Viscous damping of one actuator (N s/m).
    pub damping: f64,
    /// Extension reached at full pressure (m).
    pub max_extension: f64,
    /// Supply pressure limit (bar).
    pub max_pressure: f64,
    /// Pressure-to-force gain (N/bar).
    pub pressure_gain: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
    /// Lumped mass stations along each section.
    pub mass_points_per_section: usize,
    /// Point masses spread around the cross-section at every station. One
    /// point puts the whole station mass on the backbone.
    pub cross_section_points: usize,
}

impl Default for RobotParams {
    fn default() -> Self {
        let stiffness = 1900.0;
        let max_extension = 0.065;
        let max_pressure = 3.0;
        Self {
            section_length: 0.15,
            radius: 0.0125,
            module_mass: 0.1,
            stiffness,
            damping: 90.0,
            max_extension,
            max_pressure,
            pressure_gain: stiffness * max_extension / max_pressure,
            gravity: 9.81,
            mass_points_per_section: 11,
            cross_section_points: 4,
        }
    }
}

impl RobotParams {
    pub fn total_mass(&self) -> f64 {
        3.0 * self.module_mass
    }

    pub fn weight(&self) -> f64 {
        self.total_mass() * self.gravity
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("section_length", self.section_length),
            ("radius", self.radius),
            ("module_mass", self.module_mass),
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("max_extension", self.max_extension),
            ("max_pressure", self.max_pressure),
            ("pressure_gain", self.pressure_gain),
            ("gravity", self.gravity),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }
        if self.mass_points_per_section == 0 {
            return Err(invalid(
                "mass_points_per_section",
                "must be at least 1".into(),
            ));
        }
        if self.cross_section_points == 0 || self.cross_section_points == 2 {
            return Err(invalid(
                "cross_section_points",
                "must be 1 (backbone only) or at least 3".into(),
            ));
        }
        let calibrated = self.pressure_gain * self.max_pressure / self.stiffness;
        if (calibrated - self.max_extension).abs() > 1e-6 {
            return Err(invalid(
                "pressure_gain",
                format!(
                    "pressure_gain * max_pressure / stiffness = {calibrated} must equal max_extension = {}",
                    self.max_extension
                ),
            ));
        }
        Ok(())
    }
}

pub(crate) fn invalid(name: &str, reason: String) -> SnakeError {
    SnakeError::InvalidParameter {
        name: name.to_string(),
        reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_consistent() {
        let p = RobotParams::default();
        p.validate().unwrap();
        assert!((p.pressure_gain - 41.166_666_666_666_664).abs() < 1e-9);
        assert!((p.weight() - 2.943).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_gain_is_rejected() {
        let p = RobotParams {
            pressure_gain: 50.0,
            ..RobotParams::default()
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn non_positive_values_are_rejected() {
        let p = RobotParams {
            damping: 0.0,
            ..RobotParams::default()
        };
        assert!(matches!(
            p.validate(),
            Err(SnakeError::InvalidParameter { ref name, .. }) if name == "damping"
        ));
    }
}
