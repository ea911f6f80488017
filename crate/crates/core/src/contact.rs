//! Water contact: spring-damper support and quadratic drag on the skin grid.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::kinematics::{Chain, Coords, GridSite, GridSpec, Pose, DOF};
use crate::params::{invalid, RobotParams};

/// Fluid and penalty-contact constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaterModel {
    /// Height of the free surface (m).
    pub surface_z: f64,
    /// Water density (kg/m^3).
    pub density: f64,
    /// Drag coefficient.
    pub drag_coefficient: f64,
    /// Wetted area represented by one skin point (m^2).
    pub point_area: f64,
    /// Support spring per submerged point (N/m).
    pub contact_stiffness: f64,
    /// Support damper per submerged point (N s/m).
    pub contact_damping: f64,
    /// Drag scale for the velocity component along the backbone. 1 gives
    /// isotropic drag.
    pub tangential_drag_scale: f64,
    /// Skin stations along the body.
    pub xi_points: usize,
    /// Skin stations around the circumference.
    pub sigma_points: usize,
}

impl Default for WaterModel {
    fn default() -> Self {
        Self {
            surface_z: 0.0,
            density: 1000.0,
            drag_coefficient: 1.0,
            point_area: 1e-4,
            contact_stiffness: 50.0,
            contact_damping: 5.0,
            tangential_drag_scale: 1.0,
            xi_points: 31,
            sigma_points: 10,
        }
    }
}

impl WaterModel {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            xi_points: self.xi_points,
            sigma_points: self.sigma_points,
            point_area: self.point_area,
        }
    }

    /// `0.5 C_D rho A`, the factor in front of `|v|^2`.
    pub fn drag_factor(&self) -> f64 {
        0.5 * self.drag_coefficient * self.density * self.point_area
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("density", self.density),
            ("drag_coefficient", self.drag_coefficient),
            ("point_area", self.point_area),
            ("contact_stiffness", self.contact_stiffness),
            ("contact_damping", self.contact_damping),
            ("tangential_drag_scale", self.tangential_drag_scale),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be positive and finite, got {value}"),
                ));
            }
        }
        if !self.surface_z.is_finite() {
            return Err(invalid("surface_z", "must be finite".into()));
        }
        if self.xi_points < 2 {
            return Err(invalid("xi_points", "must be at least 2".into()));
        }
        if self.sigma_points < 3 {
            return Err(invalid("sigma_points", "must be at least 3".into()));
        }
        Ok(())
    }
}

/// Quadratic drag opposing the point velocity.
pub fn drag_force(v: &Vector3<f64>, water: &WaterModel) -> Vector3<f64> {
    let speed = v.norm();
    if speed < 1e-12 {
        return Vector3::zeros();
    }
    -v * (water.drag_factor() * speed)
}

/// Drag with a separate scale on the component along `tangent` (unit).
pub fn drag_force_anisotropic(
    v: &Vector3<f64>,
    tangent: &Vector3<f64>,
    water: &WaterModel,
) -> Vector3<f64> {
    let speed = v.norm();
    if speed < 1e-12 {
        return Vector3::zeros();
    }
    let along = tangent * tangent.dot(v);
    let normal = v - along;
    -(normal + along * water.tangential_drag_scale) * (water.drag_factor() * speed)
}

/// Vertical spring-damper support of a point at height `z` moving up at `vz`.
/// Never pulls the point down.
pub fn buoyancy_force(z: f64, vz: f64, water: &WaterModel) -> Vector3<f64> {
    if z >= water.surface_z {
        return Vector3::zeros();
    }
    let push = -water.contact_stiffness * (z - water.surface_z) - water.contact_damping * vz;
    Vector3::new(0.0, 0.0, push.max(0.0))
}

/// Submerged skin points and the forces acting on them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactReport {
    /// Grid indices of points below the surface, ascending.
    pub active: Vec<usize>,
    /// Force on each active point, parallel to `active` (N).
    pub forces: Vec<Vector3<f64>>,
    /// Sum of the vertical force components (N).
    pub total_vertical: f64,
}

impl ContactReport {
    pub fn active_count(&self) -> usize {
        self.active.len()
    }

    /// Force on grid point `index`; zero for dry points.
    pub fn force(&self, index: usize) -> Vector3<f64> {
        match self.active.binary_search(&index) {
            Ok(k) => self.forces[k],
            Err(_) => Vector3::zeros(),
        }
    }
}

/// Precomputed skin grid used by the per-step force assembly.
#[derive(Debug, Clone)]
pub struct ContactModel {
    water: WaterModel,
    sites: Vec<GridSite>,
}

impl ContactModel {
    pub fn new(params: &RobotParams, water: &WaterModel) -> Self {
        Self {
            water: water.clone(),
            sites: water.grid().sites(params.radius),
        }
    }

    pub fn water(&self) -> &WaterModel {
        &self.water
    }

    pub fn sites(&self) -> &[GridSite] {
        &self.sites
    }

    /// World positions of all skin points.
    pub fn positions(&self, chain: &Chain) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity(self.sites.len());
        let mut cached: Option<(usize, f64, Pose)> = None;
        for site in &self.sites {
            let pose = match cached {
                Some((s, xi, pose)) if s == site.section && xi == site.xi => pose,
                _ => {
                    let pose = chain.backbone_pose(site.section, site.xi);
                    cached = Some((site.section, site.xi, pose));
                    pose
                }
            };
            out.push(pose.transform_point(&site.offset));
        }
        out
    }

    /// True if any skin point is below the surface.
    pub fn any_submerged(&self, chain: &Chain) -> bool {
        self.positions(chain)
            .iter()
            .any(|p| p.z < self.water.surface_z)
    }

    /// Energy held in the support springs, `sum k d^2 / 2` over submerged
    /// points at depth `d`. With it added to the body's energy the contact
    /// never does positive work, clamped or not.
    pub fn spring_energy(&self, chain: &Chain) -> f64 {
        let w = &self.water;
        self.positions(chain)
            .iter()
            .filter(|p| p.z < w.surface_z)
            .map(|p| 0.5 * w.contact_stiffness * (p.z - w.surface_z).powi(2))
            .sum()
    }

    /// Generalized contact force `sum J^T F` over submerged points. The sum
    /// runs in grid order so results are reproducible.
    pub fn generalized_force(&self, chain: &Chain, qdot: &Coords) -> (Coords, ContactReport) {
        let mut total = Coords::zeros();
        let mut report = ContactReport::default();
        let anisotropic = self.water.tangential_drag_scale != 1.0;
        for (index, (site, position)) in self.sites.iter().zip(self.positions(chain)).enumerate() {
            if position.z >= self.water.surface_z {
                continue;
            }
            let (_, jac) = chain.point_jacobian(site.section, site.xi, &site.offset);
            let v = jac * qdot;
            let drag = if anisotropic {
                let tangent = chain
                    .backbone_pose(site.section, site.xi)
                    .rotation
                    .column(2)
                    .into_owned();
                drag_force_anisotropic(&v, &tangent, &self.water)
            } else {
                drag_force(&v, &self.water)
            };
            let force = drag + buoyancy_force(position.z, v.z, &self.water);
            total += jac.tr_mul(&force);
            report.active.push(index);
            report.forces.push(force);
            report.total_vertical += force.z;
        }
        (total, report)
    }
}

/// Generalized contact force and the contact report for one state.
pub fn contact_generalized_force(
    q: &Coords,
    qdot: &Coords,
    params: &RobotParams,
    water: &WaterModel,
) -> Result<(Coords, ContactReport)> {
    let chain = Chain::new(q, params)?;
    Ok(ContactModel::new(params, water).generalized_force(&chain, qdot))
}

/// Generalized force from explicit per-point forces, for checks.
pub fn map_point_forces(
    chain: &Chain,
    sites: &[GridSite],
    forces: &[(usize, Vector3<f64>)],
) -> Coords {
    let mut total = Coords::zeros();
    for &(index, force) in forces {
        let site = &sites[index];
        let (_, jac) = chain.point_jacobian(site.section, site.xi, &site.offset);
        total += jac.tr_mul(&force);
    }
    debug_assert_eq!(total.len(), DOF);
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn drag_examples() {
        let w = WaterModel::default();
        assert_eq!(drag_force(&Vector3::zeros(), &w), Vector3::zeros());
        assert_relative_eq!(
            drag_force(&Vector3::new(1.0, 0.0, 0.0), &w),
            Vector3::new(-0.05, 0.0, 0.0),
            epsilon = 1e-15
        );
        assert_relative_eq!(
            drag_force(&Vector3::new(2.0, 0.0, 0.0), &w),
            Vector3::new(-0.2, 0.0, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn anisotropic_drag_reduces_to_isotropic() {
        let w = WaterModel::default();
        let v = Vector3::new(0.3, -0.2, 0.1);
        let t = Vector3::new(0.0, 1.0, 0.0);
        assert_relative_eq!(
            drag_force_anisotropic(&v, &t, &w),
            drag_force(&v, &w),
            epsilon = 1e-15
        );
        let w = WaterModel {
            tangential_drag_scale: 0.1,
            ..WaterModel::default()
        };
        let f = drag_force_anisotropic(&v, &t, &w);
        assert!(f.dot(&v) < 0.0);
        assert_relative_eq!(f.y, 0.2 * 0.1 * w.drag_factor() * v.norm(), epsilon = 1e-15);
    }

    #[test]
    fn buoyancy_examples() {
        let w = WaterModel::default();
        assert_eq!(buoyancy_force(0.1, 0.0, &w), Vector3::zeros());
        assert_relative_eq!(
            buoyancy_force(-0.01, 0.0, &w),
            Vector3::new(0.0, 0.0, 0.5),
            epsilon = 1e-15
        );
        assert_eq!(buoyancy_force(-0.001, 10.0, &w), Vector3::zeros());
        assert!(buoyancy_force(-1e-12, 0.0, &w).z < 1e-10);
    }

    #[test]
    fn dry_robot_has_no_contact() {
        let p = RobotParams::default();
        let w = WaterModel::default();
        let mut q = Coords::zeros();
        q[2] = 0.3;
        q[3] = -FRAC_PI_2;
        let (f, report) = contact_generalized_force(&q, &Coords::zeros(), &p, &w).unwrap();
        assert_eq!(f, Coords::zeros());
        assert!(report.active.is_empty());
    }

    #[test]
    fn resting_half_submerged_support_is_pure_spring() {
        let p = RobotParams::default();
        let w = WaterModel::default();
        let mut q = Coords::zeros();
        q[3] = -FRAC_PI_2;
        let chain = Chain::new(&q, &p).unwrap();
        let model = ContactModel::new(&p, &w);
        let positions = model.positions(&chain);
        let (f, report) = model.generalized_force(&chain, &Coords::zeros());
        let expected: f64 = positions
            .iter()
            .filter(|x| x.z < 0.0)
            .map(|x| -w.contact_stiffness * x.z)
            .sum();
        assert!(report.active_count() > 0 && report.active_count() < 310);
        assert_relative_eq!(f[2], expected, epsilon = 1e-12);
        assert_relative_eq!(report.total_vertical, expected, epsilon = 1e-12);
        for (k, &i) in report.active.iter().enumerate() {
            assert!(positions[i].z < 0.0);
            assert_eq!(report.forces[k].x, 0.0);
            assert_eq!(report.forces[k].y, 0.0);
        }
        assert_eq!(report.force(0), report.force(0));
    }
}
