//! Floating-base equations of motion
//!
//! `M(Q) Qdd + c(Q, Qd) + D Qd + G(Q) = [0; tau(P)] + sum J^T F_contact`
//!
//! with the inertia lumped into point masses: every section carries
//! `mass_points_per_section` stations, and each station's mass is spread over
//! `cross_section_points` points on a circle of radius `r / sqrt(2)`, which
//! reproduces the second moments of a solid cylinder cross-section.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SMatrix, Vector3};

use crate::contact::{ContactModel, ContactReport, WaterModel};
use crate::error::{Result, SnakeError};
use crate::gait::GaitSpec;
use crate::kinematics::{Chain, Coords, BASE_DOF, DOF, SECTIONS};
use crate::params::RobotParams;

pub type MassMatrix = SMatrix<f64, DOF, DOF>;

/// Supply pressure per module (row) and actuator (column), in bar.
pub type Pressures = [[f64; 2]; SECTIONS];

/// Added to `M` before the Cholesky solve.
pub const MASS_REGULARIZATION: f64 = 1e-9;

/// Shift along `Qd` (scaled by its max-norm) for the second difference that
/// gives the convective point accelerations.
const CONVECTIVE_SHIFT: f64 = 3e-5;

/// Step of the central differences of `M` in the Christoffel route.
pub const CHRISTOFFEL_STEP: f64 = 1e-6;

/// Pressure accepted above the nominal limit before it counts as an error.
const PRESSURE_SLACK: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassSite {
    pub section: usize,
    pub xi: f64,
    pub offset: Vector3<f64>,
}

/// Lumped-mass layout of the body.
pub fn mass_sites(params: &RobotParams) -> Vec<MassSite> {
    let n = params.mass_points_per_section;
    let ring = params.cross_section_points;
    let rho = if ring == 1 {
        0.0
    } else {
        params.radius / 2f64.sqrt()
    };
    let mut sites = Vec::with_capacity(SECTIONS * n * ring);
    for section in 0..SECTIONS {
        for i in 0..n {
            let xi = (i as f64 + 0.5) / n as f64;
            for k in 0..ring {
                let phi = 2.0 * PI * k as f64 / ring as f64;
                sites.push(MassSite {
                    section,
                    xi,
                    offset: Vector3::new(rho * phi.cos(), rho * phi.sin(), 0.0),
                });
            }
        }
    }
    sites
}

/// Energy split of one state (J).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy {
    pub kinetic: f64,
    pub gravitational: f64,
    pub elastic: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gravitational + self.elastic
    }
}

/// Inertial and gravity terms of one configuration.
#[derive(Debug, Clone)]
pub struct InertialTerms {
    pub mass_matrix: MassMatrix,
    /// Gravity part of `G`.
    pub gravity: Coords,
    /// Convective term `c = C(Q, Qd) Qd`.
    pub coriolis: Coords,
    /// `sum m g z` over the mass points.
    pub gravitational_energy: f64,
}

/// Everything the integrator needs from one right-hand-side evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub qddot: Coords,
    pub contact: ContactReport,
    pub energy: Energy,
}

/// Evaluates the equations of motion for a fixed robot and water model.
/// Immutable, so one instance can be shared between simulation workers.
#[derive(Debug, Clone)]
pub struct Model {
    params: RobotParams,
    sites: Vec<MassSite>,
    point_mass: f64,
    contact: ContactModel,
}

impl Model {
    pub fn new(params: &RobotParams, water: &WaterModel) -> Self {
        let sites = mass_sites(params);
        let point_mass = params.total_mass() / sites.len() as f64;
        Self {
            params: params.clone(),
            sites,
            point_mass,
            contact: ContactModel::new(params, water),
        }
    }

    pub fn params(&self) -> &RobotParams {
        &self.params
    }

    pub fn contact(&self) -> &ContactModel {
        &self.contact
    }

    pub fn mass_sites(&self) -> &[MassSite] {
        &self.sites
    }

    pub fn point_mass(&self) -> f64 {
        self.point_mass
    }

    pub fn chain(&self, q: &Coords) -> Result<Chain> {
        Chain::new(q, &self.params)
    }

    /// World positions of all mass points.
    pub fn mass_positions(&self, chain: &Chain) -> Vec<Vector3<f64>> {
        self.sites
            .iter()
            .map(|s| chain.station(s.section, s.xi).position(&s.offset))
            .collect()
    }

    /// Mass-weighted mean of the mass points.
    pub fn centroid(&self, q: &Coords) -> Result<Vector3<f64>> {
        let chain = self.chain(q)?;
        let positions = self.mass_positions(&chain);
        Ok(positions.iter().sum::<Vector3<f64>>() / positions.len() as f64)
    }

    /// `M`, gravity force and convective force. `qdot = None` skips the
    /// convective term.
    pub fn inertial_terms(&self, q: &Coords, qdot: Option<&Coords>) -> Result<InertialTerms> {
        let chain = self.chain(q)?;
        let speed = qdot.map_or(0.0, |v| v.amax());
        // Base translation enters positions linearly, so the second difference
        // is taken with it removed. Far from the origin it would otherwise
        // cancel to noise.
        let shifted = match qdot {
            Some(v) if speed > 0.0 => {
                let h = CONVECTIVE_SHIFT / speed;
                let mut local = *q;
                local.fixed_rows_mut::<3>(0).fill(0.0);
                let mut turn = *v;
                turn.fixed_rows_mut::<3>(0).fill(0.0);
                let centre = self.chain(&local)?;
                let plus = self.chain(&(local + turn * h))?;
                let minus = self.chain(&(local - turn * h))?;
                Some((centre, plus, minus, h))
            }
            _ => None,
        };

        // All point Jacobians stacked, so M and the force sums become one
        // dense product each.
        let rows = 3 * self.sites.len();
        let mut stacked = DMatrix::<f64>::zeros(rows, DOF);
        let mut accel = DVector::<f64>::zeros(rows);
        let mut gravity = Coords::zeros();
        let mut height = 0.0;
        let mut row = 0;
        for group in self.sites.chunk_by(|a, b| a.section == b.section && a.xi == b.xi) {
            let (section, xi) = (group[0].section, group[0].xi);
            let station = chain.station(section, xi);
            let around = shifted.as_ref().map(|(centre, plus, minus, h)| {
                (
                    centre.station(section, xi),
                    plus.station(section, xi),
                    minus.station(section, xi),
                    *h,
                )
            });
            for site in group {
                let (p, jac) = station.jacobian(&site.offset);
                stacked.fixed_view_mut::<3, DOF>(row, 0).copy_from(&jac);
                gravity += jac.row(2).transpose();
                height += p.z;
                if let Some((here, ahead, behind, h)) = &around {
                    let a = (ahead.position(&site.offset) - here.position(&site.offset) * 2.0
                        + behind.position(&site.offset))
                        / (h * h);
                    accel.fixed_rows_mut::<3>(row).copy_from(&a);
                }
                row += 3;
            }
        }
        let mut mass_matrix: MassMatrix = MassMatrix::from_iterator(stacked.tr_mul(&stacked).iter().copied());
        let coriolis = if shifted.is_some() {
            Coords::from_iterator(stacked.tr_mul(&accel).iter().copied())
        } else {
            Coords::zeros()
        };
        let m = self.point_mass;
        mass_matrix *= m;
        mass_matrix = (mass_matrix + mass_matrix.transpose()) * 0.5;
        Ok(InertialTerms {
            mass_matrix,
            gravity: gravity * (m * self.params.gravity),
            coriolis: coriolis * m,
            gravitational_energy: height * m * self.params.gravity,
        })
    }

    pub fn energy(&self, q: &Coords, qdot: &Coords) -> Result<Energy> {
        let terms = self.inertial_terms(q, None)?;
        Ok(Energy {
            kinetic: 0.5 * qdot.dot(&(terms.mass_matrix * qdot)),
            gravitational: terms.gravitational_energy,
            elastic: elastic_energy(q, &self.params),
        })
    }

    /// Right-hand side of the equations of motion.
    pub fn evaluate(&self, q: &Coords, qdot: &Coords, pressures: &Pressures) -> Result<Evaluation> {
        let terms = self.inertial_terms(q, Some(qdot))?;
        let chain = self.chain(q)?;
        let (contact_force, contact) = self.contact.generalized_force(&chain, qdot);
        let rhs = actuation_force(pressures, &self.params)? + contact_force
            - terms.coriolis
            - damping_force(qdot, &self.params)
            - terms.gravity
            - elastic_force(q, &self.params);
        let qddot = solve_spd(&terms.mass_matrix, &rhs)?;
        let energy = Energy {
            kinetic: 0.5 * qdot.dot(&(terms.mass_matrix * qdot)),
            gravitational: terms.gravitational_energy,
            elastic: elastic_energy(q, &self.params),
        };
        Ok(Evaluation {
            qddot,
            contact,
            energy,
        })
    }
}

/// Solves `(M + eps I) x = b` by Cholesky.
pub fn solve_spd(mass_matrix: &MassMatrix, rhs: &Coords) -> Result<Coords> {
    let reg = mass_matrix + MassMatrix::identity() * MASS_REGULARIZATION;
    let chol = reg.cholesky().ok_or(SnakeError::SingularMass)?;
    let x = chol.solve(rhs);
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(SnakeError::SingularMass)
    }
}

pub fn mass_matrix(q: &Coords, params: &RobotParams) -> Result<MassMatrix> {
    Ok(Model::new(params, &WaterModel::default())
        .inertial_terms(q, None)?
        .mass_matrix)
}

/// `C(Q, Qd) Qd` from the convective accelerations of the mass points.
pub fn coriolis_force(q: &Coords, qdot: &Coords, params: &RobotParams) -> Result<Coords> {
    Ok(Model::new(params, &WaterModel::default())
        .inertial_terms(q, Some(qdot))?
        .coriolis)
}

/// Partial derivatives `dM/dQ_i` by central differences.
pub fn mass_matrix_partials(q: &Coords, params: &RobotParams) -> Result<[MassMatrix; DOF]> {
    let model = Model::new(params, &WaterModel::default());
    let mut out = [MassMatrix::zeros(); DOF];
    for (i, d) in out.iter_mut().enumerate() {
        let mut plus = *q;
        let mut minus = *q;
        plus[i] += CHRISTOFFEL_STEP;
        minus[i] -= CHRISTOFFEL_STEP;
        let mp = model.inertial_terms(&plus, None)?.mass_matrix;
        let mm = model.inertial_terms(&minus, None)?.mass_matrix;
        *d = (mp - mm) / (2.0 * CHRISTOFFEL_STEP);
    }
    Ok(out)
}

/// Coriolis matrix built from Christoffel symbols of the first kind,
/// `C_kj = sum_i Gamma_kij Qd_i`, with
/// `Gamma_kij = (dM_kj/dQ_i + dM_ki/dQ_j - dM_ij/dQ_k) / 2`.
pub fn christoffel_matrix(q: &Coords, qdot: &Coords, params: &RobotParams) -> Result<MassMatrix> {
    let partials = mass_matrix_partials(q, params)?;
    let mut c = MassMatrix::zeros();
    for k in 0..DOF {
        for j in 0..DOF {
            let mut acc = 0.0;
            for i in 0..DOF {
                let gamma = 0.5 * (partials[i][(k, j)] + partials[j][(k, i)] - partials[k][(i, j)]);
                acc += gamma * qdot[i];
            }
            c[(k, j)] = acc;
        }
    }
    Ok(c)
}

/// Gravity plus actuator elasticity, as it appears on the left-hand side.
pub fn gravity_elastic_force(q: &Coords, params: &RobotParams) -> Result<Coords> {
    let terms = Model::new(params, &WaterModel::default()).inertial_terms(q, None)?;
    Ok(terms.gravity + elastic_force(q, params))
}

/// `k_e l` on the actuator coordinates.
pub fn elastic_force(q: &Coords, params: &RobotParams) -> Coords {
    let mut f = Coords::zeros();
    for i in BASE_DOF..DOF {
        f[i] = params.stiffness * q[i];
    }
    f
}

pub fn elastic_energy(q: &Coords, params: &RobotParams) -> f64 {
    0.5 * params.stiffness * q.rows(BASE_DOF, DOF - BASE_DOF).norm_squared()
}

/// Actuator damping; the base coordinates are undamped.
pub fn damping_force(qdot: &Coords, params: &RobotParams) -> Coords {
    let mut f = Coords::zeros();
    for i in BASE_DOF..DOF {
        f[i] = params.damping * qdot[i];
    }
    f
}

/// Generalized actuator forces `k_p P` for supply pressures in bar.
pub fn actuation_force(pressures: &Pressures, params: &RobotParams) -> Result<Coords> {
    let mut tau = Coords::zeros();
    for (j, module) in pressures.iter().enumerate() {
        for (k, &p) in module.iter().enumerate() {
            if !(0.0..=params.max_pressure + PRESSURE_SLACK).contains(&p) {
                return Err(SnakeError::PressureOutOfRange {
                    module: j + 1,
                    actuator: k + 1,
                    pressure: p,
                    limit: params.max_pressure + PRESSURE_SLACK,
                });
            }
            tau[BASE_DOF + 2 * j + k] = params.pressure_gain * p;
        }
    }
    Ok(tau)
}

/// `Qdd` at time `t`; pressures come from `gait` (zero when absent).
pub fn eom_rhs(
    t: f64,
    q: &Coords,
    qdot: &Coords,
    gait: Option<&GaitSpec>,
    params: &RobotParams,
    water: &WaterModel,
) -> Result<Coords> {
    let pressures = gait.map_or(Ok([[0.0; 2]; SECTIONS]), |g| g.pressures(t))?;
    Ok(Model::new(params, water)
        .evaluate(q, qdot, &pressures)?
        .qddot)
}
