//! Seeded self-checks of the model, grouped by subsystem. Each check reports
//! its worst observed error against a fixed tolerance.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contact::{buoyancy_force, drag_force, drag_force_anisotropic, ContactModel, WaterModel};
use crate::dynamics::{
    christoffel_matrix, mass_matrix, MassMatrix, Pressures, MASS_REGULARIZATION,
};
use crate::error::Result;
use crate::gait::GaitSpec;
use crate::ode::Method;
use crate::kinematics::{
    arc_params, chain_pose, chain_skin_pose, point_jacobian, skin_offset, Chain, Coords,
    GeneralizedState, SectionState, BASE_DOF, DOF, SECTIONS,
};
use crate::params::RobotParams;
use crate::sim::{integrate, Drive, Scenario, SimSettings};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn bound(name: &str, worst: f64, tol: f64, what: &str) -> Self {
        Self {
            name: name.into(),
            passed: worst.is_finite() && worst <= tol,
            detail: format!("{what} {worst:.3e} (limit {tol:.0e})"),
        }
    }

    fn flag(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Random configuration with moderate bending, anywhere in space.
pub fn random_coords(rng: &mut impl Rng) -> Coords {
    let mut q = Coords::zeros();
    for i in 0..3 {
        q[i] = rng.random_range(-0.5..0.5);
    }
    for i in 3..BASE_DOF {
        q[i] = rng.random_range(-PI..PI);
    }
    for i in BASE_DOF..DOF {
        q[i] = rng.random_range(-0.03..0.065);
    }
    q
}

pub fn random_velocity(rng: &mut impl Rng) -> Coords {
    let mut v = Coords::zeros();
    for i in 0..BASE_DOF {
        v[i] = rng.random_range(-1.0..1.0);
    }
    for i in BASE_DOF..DOF {
        v[i] = rng.random_range(-0.1..0.1);
    }
    v
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Pose orthonormality, arc round trip, Jacobian against central
/// differences and skin radius on 100 random states.
pub fn kinematics_suite(seed: u64) -> Result<Vec<Check>> {
    let params = RobotParams::default();
    let mut rng = rng(seed, 1);
    let started = Instant::now();
    let (mut ortho, mut round_trip, mut jac_err, mut radius_err) = (0f64, 0f64, 0f64, 0f64);
    for _ in 0..100 {
        let q = random_coords(&mut rng);
        let xi = rng.random_range(0.0..=3.0);
        let sigma = rng.random_range(0.0..2.0 * PI);

        ortho = ortho.max(chain_skin_pose(&q, xi, sigma, &params)?.rigidity_error());
        ortho = ortho.max(chain_pose(&q, xi, &params)?.rigidity_error());

        for i in 0..SECTIONS {
            let state = SectionState::from_coords(&q, i);
            let back = arc_params(state, &params)?.extensions(&params);
            round_trip = round_trip.max((back.l1 - state.l1).abs().max((back.l2 - state.l2).abs()));
        }

        let jac = point_jacobian(&q, xi, sigma, &params)?;
        let h = 1e-6;
        let mut fd = jac * 0.0;
        for k in 0..DOF {
            let mut plus = q;
            let mut minus = q;
            plus[k] += h;
            minus[k] -= h;
            let d = chain_skin_pose(&plus, xi, sigma, &params)?.translation
                - chain_skin_pose(&minus, xi, sigma, &params)?.translation;
            fd.set_column(k, &(d / (2.0 * h)));
        }
        jac_err = jac_err.max((jac - fd).amax() / jac.amax().max(1.0));

        let skin = chain_skin_pose(&q, xi, sigma, &params)?.translation;
        let axis = chain_pose(&q, xi, &params)?.translation;
        radius_err = radius_err.max(((skin - axis).norm() - params.radius).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    Ok(vec![
        Check::bound("kinematics/orthonormality", ortho, 1e-9, "max |R^T R - I|"),
        Check::bound("kinematics/arc-round-trip", round_trip, 1e-12, "max extension error (m)"),
        Check::bound("kinematics/jacobian-vs-fd", jac_err, 1e-5, "max relative error"),
        Check::bound("kinematics/skin-radius", radius_err, 1e-12, "max radius error (m)"),
        Check::flag(
            "kinematics/runtime",
            elapsed < 5.0,
            format!("{elapsed:.2} s for 100 states (limit 5 s)"),
        ),
    ])
}

/// Mass matrix symmetry and definiteness, skew symmetry of `dM/dt - 2C`,
/// energy conservation of a free ballistic body and static actuator balance.
pub fn dynamics_suite(seed: u64) -> Result<Vec<Check>> {
    let params = RobotParams::default();
    let mut rng = rng(seed, 2);

    let (mut asym, mut min_eig, mut skew) = (0f64, f64::INFINITY, 0f64);
    for _ in 0..50 {
        let q = random_coords(&mut rng);
        let qdot = random_velocity(&mut rng);
        let v = random_velocity(&mut rng);
        let m = mass_matrix(&q, &params)?;
        asym = asym.max((m - m.transpose()).amax());
        let reg = m + MassMatrix::identity() * MASS_REGULARIZATION;
        let chol_ok = reg.cholesky().is_some();
        min_eig = min_eig.min(if chol_ok {
            reg.symmetric_eigenvalues().min()
        } else {
            f64::NEG_INFINITY
        });

        // dM/dt along qdot by its own central difference, independent of the
        // partials inside the Christoffel route.
        let h = 1e-6;
        let m_dot = (mass_matrix(&(q + qdot * h), &params)?
            - mass_matrix(&(q - qdot * h), &params)?)
            / (2.0 * h);
        let c = christoffel_matrix(&q, &qdot, &params)?;
        skew = skew.max((v.transpose() * (m_dot - c * 2.0) * v)[(0, 0)].abs());
    }

    let drift = ballistic_energy_drift()?;
    let balance = static_balance(&params)?;
    let balance_worst = balance.iter().map(|b| b.1).fold(0.0, f64::max);
    Ok(vec![
        Check::bound("dynamics/mass-symmetry", asym, 1e-12, "max |M - M^T|"),
        Check::flag(
            "dynamics/positive-definite",
            min_eig > 0.0,
            format!("smallest eigenvalue after regularization {min_eig:.3e}"),
        ),
        Check::bound("dynamics/skew-symmetry", skew, 1e-6, "max |v^T (dM/dt - 2C) v|"),
        Check::bound("dynamics/ballistic-energy", drift, 1e-3, "relative energy drift over 1 s"),
        Check::bound(
            "dynamics/static-balance",
            balance_worst,
            0.01,
            &format!(
                "worst relative error of l11 at P = 1, 2, 3 bar ({})",
                balance
                    .iter()
                    .map(|(l, _)| format!("{l:.5} m"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        ),
    ])
}

// Water far below the body, so nothing touches it.
fn dry_water() -> WaterModel {
    WaterModel {
        surface_z: -1e3,
        ..WaterModel::default()
    }
}

/// Relative drift of the total energy over 1 s with no damping, pressure
/// or contact, starting from a bent, moving state.
pub fn ballistic_energy_drift() -> Result<f64> {
    ballistic_energy_drift_with(SimSettings {
        method: Method::Dopri5,
        ..SimSettings::default()
    })
}

pub fn ballistic_energy_drift_with(settings: SimSettings) -> Result<f64> {
    let params = RobotParams {
        damping: 0.0,
        ..RobotParams::default()
    };
    let mut q = Coords::zeros();
    q[3] = -PI / 2.0;
    q.fixed_rows_mut::<6>(BASE_DOF)
        .copy_from_slice(&[0.02, -0.01, 0.0, 0.03, -0.02, 0.01]);
    let mut qdot = Coords::zeros();
    qdot.fixed_rows_mut::<6>(0)
        .copy_from_slice(&[0.1, -0.2, 0.3, 0.5, -0.4, 0.2]);
    qdot.fixed_rows_mut::<6>(BASE_DOF)
        .copy_from_slice(&[0.05, -0.03, 0.02, 0.0, 0.04, -0.05]);
    let trajectory = integrate(&Scenario {
        initial: GeneralizedState { q, qdot },
        drive: Drive::Off,
        duration: 1.0,
        params,
        water: dry_water(),
        settings,
    })?;
    let e0 = trajectory.samples[0].energy.total();
    Ok(trajectory
        .samples
        .iter()
        .map(|s| (s.energy.total() - e0).abs() / e0.abs())
        .fold(0.0, f64::max))
}

/// Holds pressure `P` on actuator (1, 1) of a free body until it settles and
/// returns `(l11, relative error against 0.065 P / 3)` for `P = 1, 2, 3`.
pub fn static_balance(params: &RobotParams) -> Result<Vec<(f64, f64)>> {
    static_balance_with(params, SimSettings::default())
}

pub fn static_balance_with(params: &RobotParams, settings: SimSettings) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for p in [1.0, 2.0, 3.0] {
        let mut pressures: Pressures = [[0.0; 2]; SECTIONS];
        pressures[0][0] = p;
        let mut q = Coords::zeros();
        q[3] = -PI / 2.0;
        let trajectory = integrate(&Scenario {
            initial: GeneralizedState {
                q,
                qdot: Coords::zeros(),
            },
            drive: Drive::Hold(pressures),
            duration: 2.0,
            params: params.clone(),
            water: dry_water(),
            settings: settings.clone(),
        })?;
        let l = trajectory.samples[trajectory.samples.len() - 1].state.q[BASE_DOF];
        let expected = params.max_extension * p / params.max_pressure;
        out.push((l, (l - expected).abs() / expected));
    }
    Ok(out)
}

/// Drag dissipativity, buoyancy continuity at the surface and the
/// generalized contact force against a virtual-work difference.
pub fn contact_suite(seed: u64) -> Result<Vec<Check>> {
    let params = RobotParams::default();
    let water = WaterModel::default();
    let mut rng = rng(seed, 3);

    let mut worst_power = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let v = Vector3::new(
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
            rng.random_range(-5.0..5.0),
        );
        let t = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let aniso = WaterModel {
            tangential_drag_scale: rng.random_range(0.05..2.0),
            ..water.clone()
        };
        worst_power = worst_power
            .max(drag_force(&v, &water).dot(&v))
            .max(drag_force_anisotropic(&v, &t, &aniso).dot(&v));
    }

    // Force must vanish with depth: |F(z)| <= k |z| on approach, 0 at z = 0.
    let mut jump = buoyancy_force(water.surface_z, 0.0, &water).norm();
    for k in 3..16 {
        let depth = 10f64.powi(-k);
        let f = buoyancy_force(water.surface_z - depth, 0.0, &water).norm();
        jump = jump.max(f - water.contact_stiffness * depth);
    }

    let model = ContactModel::new(&params, &water);
    let mut work_err = 0f64;
    for _ in 0..20 {
        let mut q = random_coords(&mut rng);
        q[2] = rng.random_range(-0.01..0.01);
        let chain = Chain::new(&q, &params)?;
        let qdot = random_velocity(&mut rng);
        let (generalized, report) = model.generalized_force(&chain, &qdot);
        let forces: Vec<(usize, Vector3<f64>)> = report
            .active
            .iter()
            .copied()
            .zip(report.forces.iter().copied())
            .collect();
        // Work of the point forces along a small displacement of each
        // coordinate, with the forces held fixed.
        let h = 1e-6;
        for k in 0..DOF {
            let mut plus = q;
            let mut minus = q;
            plus[k] += h;
            minus[k] -= h;
            let cp = Chain::new(&plus, &params)?;
            let cm = Chain::new(&minus, &params)?;
            let mut work = 0.0;
            for &(i, f) in &forces {
                let site = &model.sites()[i];
                let d = cp.point(site.section, site.xi, &site.offset)
                    - cm.point(site.section, site.xi, &site.offset);
                work += f.dot(&d) / (2.0 * h);
            }
            let scale = generalized.amax().max(1e-3);
            work_err = work_err.max((work - generalized[k]).abs() / scale);
        }
    }

    Ok(vec![
        Check::flag(
            "contact/drag-dissipative",
            worst_power <= 0.0,
            format!("max F.v over 1000 velocities {worst_power:.3e} W"),
        ),
        Check::bound(
            "contact/buoyancy-continuity",
            jump,
            1e-12,
            "max excess of |F| over k*depth near the surface (N)",
        ),
        Check::bound("contact/virtual-work", work_err, 1e-4, "max relative error"),
    ])
}

/// Periodicity, bounds and antagonism of the pressure signals.
pub fn gait_suite(seed: u64) -> Result<Vec<Check>> {
    let mut rng = rng(seed, 4);
    let (mut period_err, mut sum_err) = (0f64, 0f64);
    let mut in_range = true;
    for _ in 0..1000 {
        let spec = GaitSpec::with_inter_phase(rng.random_range(0.0..=PI));
        let t = rng.random_range(0.0..200.0);
        for j in 1..=SECTIONS {
            let a = spec.pressure(t, j, 1)?;
            let b = spec.pressure(t, j, 2)?;
            in_range &= (0.0..=3.0).contains(&a) && (0.0..=3.0).contains(&b);
            sum_err = sum_err.max((a + b - 2.0 * spec.amplitude).abs());
            period_err = period_err.max((spec.pressure(t + spec.period(), j, 1)? - a).abs());
        }
    }
    Ok(vec![
        Check::bound("gait/periodicity", period_err, 1e-12, "max |P(t + T) - P(t)| (bar)"),
        Check::flag("gait/bounds", in_range, "all pressures within [0, 3] bar".into()),
        Check::bound("gait/antagonism", sum_err, 1e-12, "max |P1 + P2 - 2A| (bar)"),
    ])
}

/// Every suite, in a fixed order.
pub fn run_all(seed: u64) -> Result<Vec<Check>> {
    let mut checks = kinematics_suite(seed)?;
    checks.extend(dynamics_suite(seed)?);
    checks.extend(contact_suite(seed)?);
    checks.extend(gait_suite(seed)?);
    checks.push(skin_offset_check());
    Ok(checks)
}

fn skin_offset_check() -> Check {
    let r = RobotParams::default().radius;
    let worst = (0..360)
        .map(|k| (skin_offset(k as f64 * PI / 180.0, r).norm() - r).abs())
        .fold(0.0, f64::max);
    Check::bound("kinematics/skin-offset", worst, 1e-15, "max offset radius error (m)")
}
