//! Constant-curvature kinematics of the floating three-section chain.
//!
//! Each section is a planar circular arc driven by two antagonistic actuators
//! placed at `+X` (actuator 1) and `-X` (actuator 2) of the section frame, at
//! distance `radius` from the neutral axis. The local `Z` axis is the backbone
//! tangent at the section base and bending happens about local `+Y`. A longer
//! actuator 2 therefore bends the section towards `+X`.
//!
//! Generalized coordinates are ordered `[x, y, z, alpha, beta, gamma, l11,
//! l12, l21, l22, l31, l32]`.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Result, SnakeError};
use crate::params::RobotParams;

pub const SECTIONS: usize = 3;
pub const DOF: usize = 12;
pub const BASE_DOF: usize = 6;

pub type Coords = SVector<f64, DOF>;
pub type StateVector = SVector<f64, { 2 * DOF }>;
pub type PointJacobian = SMatrix<f64, 3, DOF>;

/// Switch to the Taylor expansion of the arc map below this bend angle.
const SERIES_ANGLE: f64 = 1e-2;

/// Actuator extensions of one section (m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SectionState {
    pub l1: f64,
    pub l2: f64,
}

impl SectionState {
    pub fn new(l1: f64, l2: f64) -> Self {
        Self { l1, l2 }
    }

    /// Extensions of section `index` (0-based) stored in `q`.
    pub fn from_coords(q: &Coords, index: usize) -> Self {
        Self {
            l1: q[BASE_DOF + 2 * index],
            l2: q[BASE_DOF + 2 * index + 1],
        }
    }
}

/// Arc length and signed curvature of a section's neutral axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcParams {
    pub s: f64,
    pub kappa: f64,
}

impl ArcParams {
    /// Reconstructs the actuator extensions that produce this arc.
    pub fn extensions(&self, params: &RobotParams) -> SectionState {
        SectionState {
            l1: self.s * (1.0 - params.radius * self.kappa) - params.section_length,
            l2: self.s * (1.0 + params.radius * self.kappa) - params.section_length,
        }
    }
}

fn check_lengths(state: SectionState, params: &RobotParams, section: usize) -> Result<()> {
    let arc_length = params.section_length + 0.5 * (state.l1 + state.l2);
    let inner = params.section_length + state.l1;
    let outer = params.section_length + state.l2;
    if arc_length > 0.0 && inner > 0.0 && outer > 0.0 {
        Ok(())
    } else {
        Err(SnakeError::NonPositiveLength {
            section,
            arc_length,
            inner,
            outer,
        })
    }
}

pub fn arc_params(state: SectionState, params: &RobotParams) -> Result<ArcParams> {
    check_lengths(state, params, 1)?;
    let s = params.section_length + 0.5 * (state.l1 + state.l2);
    Ok(ArcParams {
        s,
        kappa: (state.l2 - state.l1) / (2.0 * params.radius * s),
    })
}

/// Rigid transform: `x -> rotation * x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Largest deviation of `R^T R` from identity and of `det R` from one.
    pub fn rigidity_error(&self) -> f64 {
        let gram = self.rotation.transpose() * self.rotation - Matrix3::identity();
        gram.amax().max((self.rotation.determinant() - 1.0).abs())
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        Pose {
            rotation: self.rotation * rhs.rotation,
            translation: self.translation + self.rotation * rhs.translation,
        }
    }
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn d_rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn d_rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn d_rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Floating-base coordinates. Angles are kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BaseState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl BaseState {
    pub fn from_coords(q: &Coords) -> Self {
        Self {
            x: q[0],
            y: q[1],
            z: q[2],
            alpha: q[3],
            beta: q[4],
            gamma: q[5],
        }
    }
}

/// Base pose with extrinsic X-Y-Z Euler angles: `Rz(gamma) Ry(beta) Rx(alpha)`.
pub fn base_pose(base: &BaseState) -> Pose {
    Pose {
        rotation: rot_z(base.gamma) * rot_y(base.beta) * rot_x(base.alpha),
        translation: Vector3::new(base.x, base.y, base.z),
    }
}

/// Full configuration and velocity of the robot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedState {
    pub q: Coords,
    pub qdot: Coords,
}

impl Default for GeneralizedState {
    fn default() -> Self {
        Self {
            q: Coords::zeros(),
            qdot: Coords::zeros(),
        }
    }
}

impl GeneralizedState {
    pub fn at_rest(base: BaseState) -> Self {
        let mut q = Coords::zeros();
        q[0] = base.x;
        q[1] = base.y;
        q[2] = base.z;
        q[3] = base.alpha;
        q[4] = base.beta;
        q[5] = base.gamma;
        Self {
            q,
            qdot: Coords::zeros(),
        }
    }

    pub fn base(&self) -> BaseState {
        BaseState::from_coords(&self.q)
    }

    pub fn section(&self, index: usize) -> SectionState {
        SectionState::from_coords(&self.q, index)
    }

    pub fn to_vector(&self) -> StateVector {
        let mut y = StateVector::zeros();
        y.fixed_rows_mut::<DOF>(0).copy_from(&self.q);
        y.fixed_rows_mut::<DOF>(DOF).copy_from(&self.qdot);
        y
    }

    pub fn from_vector(y: &StateVector) -> Self {
        Self {
            q: y.fixed_rows::<DOF>(0).into_owned(),
            qdot: y.fixed_rows::<DOF>(DOF).into_owned(),
        }
    }
}

/// Pose of a backbone point of a single section, with its derivatives with
/// respect to the two actuator extensions.
#[derive(Debug, Clone, Copy)]
struct ArcPoint {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    d_rotation: [Matrix3<f64>; 2],
    d_translation: [Vector3<f64>; 2],
}

/// `(1 - cos t) / t`, `sin t / t` and their derivatives.
fn arc_shape(t: f64) -> (f64, f64, f64, f64) {
    if t.abs() < SERIES_ANGLE {
        arc_shape_series(t)
    } else {
        arc_shape_closed(t)
    }
}

fn arc_shape_series(t: f64) -> (f64, f64, f64, f64) {
    {
        let t2 = t * t;
        let t4 = t2 * t2;
        let t6 = t4 * t2;
        let f = t * (0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0);
        let g = 1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0;
        let df = 0.5 - t2 / 8.0 + t4 / 144.0 - t6 / 5760.0;
        let dg = t * (-1.0 / 3.0 + t2 / 30.0 - t4 / 840.0);
        (f, g, df, dg)
    }
}

fn arc_shape_closed(t: f64) -> (f64, f64, f64, f64) {
    {
        let (s, c) = t.sin_cos();
        let half = (0.5 * t).sin();
        let one_minus_cos = 2.0 * half * half;
        let f = one_minus_cos / t;
        let g = s / t;
        let df = (t * s - one_minus_cos) / (t * t);
        let dg = (t * c - s) / (t * t);
        (f, g, df, dg)
    }
}

fn arc_point(state: SectionState, xi: f64, section_length: f64, radius: f64) -> ArcPoint {
    let s = section_length + 0.5 * (state.l1 + state.l2);
    let arc = s * xi;
    let angle = xi * (state.l2 - state.l1) / (2.0 * radius);
    let d_arc = 0.5 * xi;
    let d_angle = [-xi / (2.0 * radius), xi / (2.0 * radius)];

    let (f, g, df, dg) = arc_shape(angle);
    let shape = Vector3::new(f, 0.0, g);
    let d_shape = Vector3::new(df, 0.0, dg);
    let rotation = rot_y(angle);
    let d_rot = d_rot_y(angle);

    ArcPoint {
        rotation,
        translation: shape * arc,
        d_rotation: [d_rot * d_angle[0], d_rot * d_angle[1]],
        d_translation: [
            shape * d_arc + d_shape * (arc * d_angle[0]),
            shape * d_arc + d_shape * (arc * d_angle[1]),
        ],
    }
}

/// Pose of the backbone at `xi` in the section's base frame.
pub fn section_pose(state: SectionState, xi: f64, params: &RobotParams) -> Result<Pose> {
    check_lengths(state, params, 1)?;
    let p = arc_point(state, xi, params.section_length, params.radius);
    Ok(Pose::new(p.rotation, p.translation))
}

/// Skin offset in the backbone frame: rotate by `sigma` about `+Z`, then move
/// `radius` along `+X`.
pub fn skin_offset(sigma: f64, radius: f64) -> Vector3<f64> {
    let (s, c) = sigma.sin_cos();
    Vector3::new(radius * c, radius * s, 0.0)
}

fn skin_frame(backbone: Pose, sigma: f64, radius: f64) -> Pose {
    Pose {
        rotation: backbone.rotation * rot_z(sigma),
        translation: backbone.transform_point(&skin_offset(sigma, radius)),
    }
}

/// Pose of a skin point in the section's base frame.
pub fn skin_pose(state: SectionState, xi: f64, sigma: f64, params: &RobotParams) -> Result<Pose> {
    Ok(skin_frame(
        section_pose(state, xi, params)?,
        sigma,
        params.radius,
    ))
}

/// Splits a body coordinate in `[0, 3]` into a section index and a local
/// coordinate in `[0, 1]`. Integer values belong to the tip of the lower
/// section.
pub fn locate(xi_global: f64) -> Result<(usize, f64)> {
    if !(0.0..=SECTIONS as f64).contains(&xi_global) {
        return Err(SnakeError::OutOfRange(xi_global));
    }
    if xi_global <= 1.0 {
        return Ok((0, xi_global));
    }
    let section = (xi_global.ceil() as usize - 1).min(SECTIONS - 1);
    Ok((section, xi_global - section as f64))
}

#[derive(Debug, Clone, Copy)]
struct SectionFrame {
    state: SectionState,
    origin: Pose,
    // Column of a downstream point for actuator a: lever[a] + sweep[a] * (p - pivot).
    lever: [Vector3<f64>; 2],
    sweep: [Matrix3<f64>; 2],
    pivot: Vector3<f64>,
}

/// World frames of the whole chain for one configuration. Building it costs
/// three arc evaluations; afterwards positions and Jacobians of arbitrary body
/// points are cheap.
#[derive(Debug, Clone)]
pub struct Chain {
    radius: f64,
    section_length: f64,
    base: Pose,
    // dR_b/d(angle) * R_b^T for alpha, beta, gamma.
    base_rate: [Matrix3<f64>; 3],
    sections: [SectionFrame; SECTIONS],
}

impl Chain {
    pub fn new(q: &Coords, params: &RobotParams) -> Result<Self> {
        let b = BaseState::from_coords(q);
        let (rx, ry, rz) = (rot_x(b.alpha), rot_y(b.beta), rot_z(b.gamma));
        let base = Pose::new(rz * ry * rx, Vector3::new(b.x, b.y, b.z));
        let rt = base.rotation.transpose();
        let base_rate = [
            rz * ry * d_rot_x(b.alpha) * rt,
            rz * d_rot_y(b.beta) * rx * rt,
            d_rot_z(b.gamma) * ry * rx * rt,
        ];

        let mut origin = base;
        let sections = std::array::from_fn(|i| {
            let state = SectionState::from_coords(q, i);
            let tip = arc_point(state, 1.0, params.section_length, params.radius);
            let next = origin * Pose::new(tip.rotation, tip.translation);
            let next_rt = next.rotation.transpose();
            let frame = SectionFrame {
                state,
                origin,
                lever: [
                    origin.rotation * tip.d_translation[0],
                    origin.rotation * tip.d_translation[1],
                ],
                sweep: [
                    origin.rotation * tip.d_rotation[0] * next_rt,
                    origin.rotation * tip.d_rotation[1] * next_rt,
                ],
                pivot: next.translation,
            };
            origin = next;
            frame
        });
        for (i, frame) in sections.iter().enumerate() {
            check_lengths(frame.state, params, i + 1)?;
        }

        Ok(Self {
            radius: params.radius,
            section_length: params.section_length,
            base,
            base_rate,
            sections,
        })
    }

    pub fn base(&self) -> Pose {
        self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// World pose of the base of `section`.
    pub fn section_origin(&self, section: usize) -> Pose {
        self.sections[section].origin
    }

    /// World pose of the backbone at local coordinate `xi` of `section`.
    pub fn backbone_pose(&self, section: usize, xi: f64) -> Pose {
        let frame = &self.sections[section];
        let arc = self.arc(frame.state, xi);
        frame.origin * Pose::new(arc.rotation, arc.translation)
    }

    fn arc(&self, state: SectionState, xi: f64) -> ArcPoint {
        arc_point(state, xi, self.section_length, self.radius)
    }

    /// World position of a body-fixed point given by its offset in the
    /// backbone frame at (`section`, `xi`).
    pub fn point(&self, section: usize, xi: f64, offset: &Vector3<f64>) -> Vector3<f64> {
        self.backbone_pose(section, xi).transform_point(offset)
    }

    /// Backbone station at local coordinate `xi` of `section`, for evaluating
    /// several body points that share it.
    pub fn station(&self, section: usize, xi: f64) -> Station<'_> {
        let frame = &self.sections[section];
        Station {
            chain: self,
            section,
            arc: self.arc(frame.state, xi),
        }
    }

    /// World position and position Jacobian of a body-fixed point.
    pub fn point_jacobian(
        &self,
        section: usize,
        xi: f64,
        offset: &Vector3<f64>,
    ) -> (Vector3<f64>, PointJacobian) {
        self.station(section, xi).jacobian(offset)
    }
}

/// A backbone cross-section of a [`Chain`].
#[derive(Debug, Clone, Copy)]
pub struct Station<'a> {
    chain: &'a Chain,
    section: usize,
    arc: ArcPoint,
}

impl Station<'_> {
    /// World pose of the backbone frame.
    pub fn pose(&self) -> Pose {
        self.chain.sections[self.section].origin
            * Pose::new(self.arc.rotation, self.arc.translation)
    }

    pub fn position(&self, offset: &Vector3<f64>) -> Vector3<f64> {
        let frame = &self.chain.sections[self.section];
        frame
            .origin
            .transform_point(&(self.arc.translation + self.arc.rotation * offset))
    }

    /// World position and `d position / dQ` of the point at `offset`.
    pub fn jacobian(&self, offset: &Vector3<f64>) -> (Vector3<f64>, PointJacobian) {
        let chain = self.chain;
        let frame = &chain.sections[self.section];
        let arc = &self.arc;
        let local = arc.translation + arc.rotation * offset;
        let p = frame.origin.transform_point(&local);

        let mut jac = PointJacobian::zeros();
        jac[(0, 0)] = 1.0;
        jac[(1, 1)] = 1.0;
        jac[(2, 2)] = 1.0;
        let rel = p - chain.base.translation;
        for (k, rate) in chain.base_rate.iter().enumerate() {
            jac.set_column(3 + k, &(rate * rel));
        }
        for (j, up) in chain.sections[..self.section].iter().enumerate() {
            let arm = p - up.pivot;
            for a in 0..2 {
                jac.set_column(BASE_DOF + 2 * j + a, &(up.lever[a] + up.sweep[a] * arm));
            }
        }
        for a in 0..2 {
            let col = frame.origin.rotation * (arc.d_translation[a] + arc.d_rotation[a] * offset);
            jac.set_column(BASE_DOF + 2 * self.section + a, &col);
        }
        (p, jac)
    }
}

/// Pose of the backbone at body coordinate `xi_global` in `[0, 3]`.
pub fn chain_pose(q: &Coords, xi_global: f64, params: &RobotParams) -> Result<Pose> {
    let (section, xi) = locate(xi_global)?;
    Ok(Chain::new(q, params)?.backbone_pose(section, xi))
}

/// World pose of the skin point at (`xi_global`, `sigma`).
pub fn chain_skin_pose(
    q: &Coords,
    xi_global: f64,
    sigma: f64,
    params: &RobotParams,
) -> Result<Pose> {
    let (section, xi) = locate(xi_global)?;
    let chain = Chain::new(q, params)?;
    Ok(skin_frame(
        chain.backbone_pose(section, xi),
        sigma,
        params.radius,
    ))
}

/// `d(world position) / dQ` of the skin point at (`xi_global`, `sigma`).
pub fn point_jacobian(
    q: &Coords,
    xi_global: f64,
    sigma: f64,
    params: &RobotParams,
) -> Result<PointJacobian> {
    let (section, xi) = locate(xi_global)?;
    let chain = Chain::new(q, params)?;
    Ok(chain
        .point_jacobian(section, xi, &skin_offset(sigma, params.radius))
        .1)
}

/// Resolution of the skin contact grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Stations along the body, both ends included.
    pub xi_points: usize,
    /// Stations around the circumference, `2 pi` excluded.
    pub sigma_points: usize,
    /// Area represented by one skin point (m^2).
    pub point_area: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            xi_points: 31,
            sigma_points: 10,
            point_area: 1e-4,
        }
    }
}

/// Where a skin point sits on the body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSite {
    pub xi_global: f64,
    pub sigma: f64,
    pub section: usize,
    pub xi: f64,
    pub offset: Vector3<f64>,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.xi_points * self.sigma_points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sites in row-major order: body coordinate outer, circumference inner.
    pub fn sites(&self, radius: f64) -> Vec<GridSite> {
        let mut sites = Vec::with_capacity(self.len());
        let span = SECTIONS as f64;
        for j in 0..self.xi_points {
            let xi_global = if self.xi_points > 1 {
                span * j as f64 / (self.xi_points - 1) as f64
            } else {
                0.0
            };
            let (section, xi) = locate(xi_global).expect("grid stays on the body");
            for k in 0..self.sigma_points {
                let sigma = 2.0 * PI * k as f64 / self.sigma_points as f64;
                sites.push(GridSite {
                    xi_global,
                    sigma,
                    section,
                    xi,
                    offset: skin_offset(sigma, radius),
                });
            }
        }
        sites
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkinPoint {
    pub site: GridSite,
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkinGrid {
    pub points: Vec<SkinPoint>,
    pub area: f64,
}

/// World positions and velocities of every skin contact point.
pub fn skin_grid(
    q: &Coords,
    qdot: &Coords,
    params: &RobotParams,
    grid: &GridSpec,
) -> Result<SkinGrid> {
    let chain = Chain::new(q, params)?;
    let points = grid
        .sites(params.radius)
        .into_iter()
        .map(|site| {
            let (position, jac) = chain.point_jacobian(site.section, site.xi, &site.offset);
            SkinPoint {
                site,
                position,
                velocity: jac * qdot,
            }
        })
        .collect();
    Ok(SkinGrid {
        points,
        area: grid.point_area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn params() -> RobotParams {
        RobotParams::default()
    }

    #[test]
    fn arc_params_examples() {
        let p = params();
        let a = arc_params(SectionState::new(0.0, 0.0), &p).unwrap();
        assert_eq!((a.s, a.kappa), (0.15, 0.0));
        let a = arc_params(SectionState::new(0.065, 0.065), &p).unwrap();
        assert_relative_eq!(a.s, 0.215, epsilon = 1e-15);
        assert_eq!(a.kappa, 0.0);
        let a = arc_params(SectionState::new(0.0, 0.065), &p).unwrap();
        assert_relative_eq!(a.s, 0.1825, epsilon = 1e-15);
        assert_relative_eq!(a.kappa, 14.246_575_342_465_754, epsilon = 1e-10);
        let back = a.extensions(&p);
        assert!(back.l1.abs() < 1e-12 && (back.l2 - 0.065).abs() < 1e-12);
    }

    #[test]
    fn arc_params_rejects_collapsed_actuators() {
        let p = params();
        assert!(matches!(
            arc_params(SectionState::new(-0.2, 0.0), &p),
            Err(SnakeError::NonPositiveLength { .. })
        ));
        // Moderate compression is accepted.
        arc_params(SectionState::new(-0.075, -0.01), &p).unwrap();
    }

    #[test]
    fn straight_section_poses() {
        let p = params();
        let tip = section_pose(SectionState::default(), 1.0, &p).unwrap();
        assert_relative_eq!(
            tip.translation,
            Vector3::new(0.0, 0.0, 0.15),
            epsilon = 1e-15
        );
        assert_relative_eq!(tip.rotation, Matrix3::identity());
        let mid = section_pose(SectionState::default(), 0.5, &p).unwrap();
        assert_relative_eq!(
            mid.translation,
            Vector3::new(0.0, 0.0, 0.075),
            epsilon = 1e-15
        );
        let base = section_pose(SectionState::new(0.01, 0.05), 0.0, &p).unwrap();
        assert_eq!(base, Pose::identity());
    }

    #[test]
    fn bent_section_matches_arc_integration() {
        // Integrate the unit tangent (sin t, 0, cos t) along the arc with
        // composite Simpson, independent of the closed form.
        let p = params();
        let state = SectionState::new(0.0, 0.065);
        let s = 0.1825;
        let kappa = 0.065 / (2.0 * 0.0125 * 0.1825);
        let n = 20_000;
        let h = s / n as f64;
        let mut acc = Vector3::zeros();
        for i in 0..=n {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let t = kappa * h * i as f64;
            acc += Vector3::new(t.sin(), 0.0, t.cos()) * w;
        }
        let expected = acc * (h / 3.0);
        let pose = section_pose(state, 1.0, &p).unwrap();
        assert!((pose.translation - expected).amax() < 1e-9);
        assert!((pose.rotation - rot_y(kappa * s)).amax() < 1e-12);
    }

    #[test]
    fn series_branch_is_continuous() {
        for t in [SERIES_ANGLE, -SERIES_ANGLE, 0.5 * SERIES_ANGLE] {
            let a = arc_shape_series(t);
            let b = arc_shape_closed(t);
            assert!((a.0 - b.0).abs() < 1e-14);
            assert!((a.1 - b.1).abs() < 1e-14);
            assert!((a.2 - b.2).abs() < 1e-13);
            assert!((a.3 - b.3).abs() < 1e-13);
        }
        let p = params();
        // kappa = 1e-8 * (1 +- 0.5) on a 0.15 m section.
        for dl in [0.5e-8, 1.5e-8] {
            let d = 2.0 * p.radius * p.section_length * dl;
            let a = section_pose(SectionState::new(0.0, d), 1.0, &p).unwrap();
            let b = section_pose(SectionState::new(0.0, 0.0), 1.0, &p).unwrap();
            assert!((a.translation - b.translation).amax() < 1e-9);
        }
    }

    #[test]
    fn skin_offsets() {
        let p = params();
        let s0 = skin_pose(SectionState::default(), 0.0, 0.0, &p).unwrap();
        assert_relative_eq!(
            s0.translation,
            Vector3::new(0.0125, 0.0, 0.0),
            epsilon = 1e-15
        );
        let s1 = skin_pose(SectionState::default(), 0.0, FRAC_PI_2, &p).unwrap();
        assert_relative_eq!(
            s1.translation,
            Vector3::new(0.0, 0.0125, 0.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn base_pose_examples() {
        assert_eq!(base_pose(&BaseState::default()), Pose::identity());
        let lifted = base_pose(&BaseState {
            z: 0.30,
            ..BaseState::default()
        });
        assert_eq!(lifted.translation, Vector3::new(0.0, 0.0, 0.30));
        assert_eq!(lifted.rotation, Matrix3::identity());
        let rolled = base_pose(&BaseState {
            alpha: FRAC_PI_2,
            ..BaseState::default()
        });
        assert_relative_eq!(rolled.rotation, rot_x(FRAC_PI_2));
        assert_relative_eq!(
            rolled.rotation * Vector3::y(),
            Vector3::z(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn chain_pose_examples() {
        let p = params();
        let mut q = Coords::zeros();
        let tip = chain_pose(&q, 3.0, &p).unwrap();
        assert_relative_eq!(
            tip.translation,
            Vector3::new(0.0, 0.0, 0.45),
            epsilon = 1e-15
        );
        q[2] = 0.30;
        let base = chain_pose(&q, 0.0, &p).unwrap();
        assert_eq!(base.translation, Vector3::new(0.0, 0.0, 0.30));
        assert!(matches!(
            chain_pose(&q, 3.5, &p),
            Err(SnakeError::OutOfRange(_))
        ));
        assert!(matches!(
            chain_pose(&q, -0.1, &p),
            Err(SnakeError::OutOfRange(_))
        ));
    }

    #[test]
    fn chain_pose_is_continuous_at_boundaries() {
        let p = params();
        let mut q = Coords::zeros();
        q.fixed_rows_mut::<6>(6)
            .copy_from(&SVector::<f64, 6>::new(0.01, 0.05, 0.06, 0.0, 0.02, 0.03));
        for b in [1.0, 2.0] {
            let at = chain_pose(&q, b, &p).unwrap();
            for x in [b - 1e-9, b + 1e-9] {
                let near = chain_pose(&q, x, &p).unwrap();
                assert!((near.translation - at.translation).amax() < 1e-6);
                assert!((near.rotation - at.rotation).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn locate_boundaries() {
        assert_eq!(locate(0.0).unwrap(), (0, 0.0));
        assert_eq!(locate(1.0).unwrap(), (0, 1.0));
        assert_eq!(locate(2.0).unwrap(), (1, 1.0));
        assert_eq!(locate(3.0).unwrap(), (2, 1.0));
        let (s, xi) = locate(2.25).unwrap();
        assert_eq!(s, 2);
        assert_relative_eq!(xi, 0.25);
    }

    #[test]
    fn skin_grid_default_size_and_rigid_translation() {
        let p = params();
        let q = Coords::zeros();
        let grid = skin_grid(&q, &Coords::zeros(), &p, &GridSpec::default()).unwrap();
        assert_eq!(grid.points.len(), 310);
        assert_eq!(grid.area, 1e-4);
        assert!(grid.points.iter().all(|pt| pt.velocity == Vector3::zeros()));

        let mut qdot = Coords::zeros();
        qdot[2] = 0.7;
        let grid = skin_grid(&q, &qdot, &p, &GridSpec::default()).unwrap();
        for pt in &grid.points {
            assert_relative_eq!(pt.velocity, Vector3::new(0.0, 0.0, 0.7), epsilon = 1e-15);
        }
        let sigmas: Vec<f64> = grid.points[..10].iter().map(|pt| pt.site.sigma).collect();
        assert!(sigmas.iter().all(|&s| s < 2.0 * PI));
        assert_eq!(grid.points.last().unwrap().site.xi_global, 3.0);
    }

    #[test]
    fn jacobian_base_translation_block_and_causality() {
        let p = params();
        let q = Coords::zeros();
        for &(x, s) in &[(0.5, 0.3), (1.5, 2.0), (2.7, 5.0)] {
            let jac = point_jacobian(&q, x, s, &p).unwrap();
            assert_eq!(
                jac.fixed_view::<3, 3>(0, 0).into_owned(),
                Matrix3::identity()
            );
            let (section, _) = locate(x).unwrap();
            for col in BASE_DOF + 2 * (section + 1)..DOF {
                assert_eq!(jac.column(col).amax(), 0.0);
            }
        }
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let p = params();
        let mut q = Coords::from_column_slice(&[
            0.1, -0.2, 0.3, 0.4, -0.3, 1.1, 0.01, 0.05, 0.06, 0.0, 0.02, 0.03,
        ]);
        for &(x, s) in &[(0.3, 0.2), (1.0, 1.0), (1.7, 3.3), (3.0, 5.9)] {
            let jac = point_jacobian(&q, x, s, &p).unwrap();
            for k in 0..DOF {
                let h = 1e-6;
                let orig = q[k];
                q[k] = orig + h;
                let plus = chain_skin_pose(&q, x, s, &p).unwrap().translation;
                q[k] = orig - h;
                let minus = chain_skin_pose(&q, x, s, &p).unwrap().translation;
                q[k] = orig;
                let fd = (plus - minus) / (2.0 * h);
                let err = (fd - jac.column(k)).amax();
                assert!(err < 1e-5 * fd.amax().max(1.0), "col {k}: err {err}");
            }
        }
    }
}
