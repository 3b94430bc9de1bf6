//! Lump-leg single rigid body model: state, centroidal inertia, dynamics
//! and a fixed-step integrator.
//!
//! The robot is a rigid body (mass `m_B`, inertia `I_B`) plus one point mass
//! per leg. Each leg lump sits on the segment from its contact point to the
//! system CoM at fraction `ρ_i` (`ρ=0`: at the contact, `ρ=1`: at the CoM).
//! Setting every lump mass to zero recovers the plain single rigid body
//! model with constant body-frame inertia.

mod quat;

pub use quat::{quat_rate, quat_to_rot, Quat, UNIT_NORM_TOL};

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Condition-number limit beyond which the centroidal inertia is treated
/// as singular.
pub const INERTIA_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("quaternion norm {norm} deviates from 1 beyond tolerance")]
    NonUnitQuaternion { norm: f64 },
    #[error("effective mass m - Σ m_l·ρ = {0} is not positive")]
    DegenerateMass(f64),
    #[error("centroidal inertia is singular (condition number {cond:.3e})")]
    SingularInertia { cond: f64 },
    #[error("force count {forces} does not match {expected} contact points")]
    ForceCountMismatch { forces: usize, expected: usize },
    #[error("foot position count {feet} does not match {expected} legs")]
    FootCountMismatch { feet: usize, expected: usize },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
}

/// Gravity vector, world frame.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Gravity(pub Vector3<f64>);

impl Default for Gravity {
    fn default() -> Self {
        Gravity(Vector3::new(0.0, 0.0, -9.81))
    }
}

/// One leg abstracted as a point mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LegLump {
    /// Lump mass, kg.
    pub mass: f64,
    /// Hip position in the body frame, m.
    pub attach_offset: Vector3<f64>,
    /// Fraction of the contact→CoM segment at which the lump sits, in [0, 1].
    pub mass_fraction: f64,
}

/// Foot geometry: point feet carry one contact force each, planar feet four
/// corner forces at body-frame offsets from the foot center.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum FootType {
    Point,
    Planar { corners: [Vector3<f64>; 4] },
}

impl FootType {
    pub fn contact_points_per_foot(&self) -> usize {
        match self {
            FootType::Point => 1,
            FootType::Planar { .. } => 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobotModel {
    /// Rigid-body mass, kg.
    pub body_mass: f64,
    /// Body inertia about the body CoM, body frame, kg·m².
    pub body_inertia: Matrix3<f64>,
    pub legs: Vec<LegLump>,
    pub foot_type: FootType,
    /// Leg length limits, m.
    pub l_min: f64,
    pub l_max: f64,
    /// Friction coefficient.
    pub mu: f64,
    /// Vertical ground-reaction-force limit per contact point, N.
    pub f_max_z: f64,
    /// Optional torque limits and default-configuration Jacobian, only used
    /// to derive `f_max_z` when no explicit value is configured.
    pub tau_max: Option<Vector3<f64>>,
    pub jacobian_q0: Option<Matrix3<f64>>,
}

impl RobotModel {
    pub fn n_feet(&self) -> usize {
        self.legs.len()
    }

    pub fn n_contact_points(&self) -> usize {
        self.legs.len() * self.foot_type.contact_points_per_foot()
    }

    pub fn total_mass(&self) -> f64 {
        self.body_mass + self.legs.iter().map(|l| l.mass).sum::<f64>()
    }

    /// Zero-leg-mass variant: the degenerate single rigid body model.
    pub fn srbm(&self) -> RobotModel {
        let mut m = self.clone();
        for leg in &mut m.legs {
            leg.mass = 0.0;
        }
        m
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |msg: &str| Err(ModelError::InvalidParameter(msg.to_string()));
        if self.body_mass <= 0.0 {
            return err("body_mass must be positive");
        }
        if self.total_mass() <= 0.0 {
            return err("total mass must be positive");
        }
        if (self.body_inertia - self.body_inertia.transpose()).norm() > 1e-9 {
            return err("body_inertia must be symmetric");
        }
        let eig = self.body_inertia.symmetric_eigenvalues();
        if eig.min() <= 0.0 {
            return err("body_inertia must be positive definite");
        }
        if !(0.0 < self.l_min && self.l_min < self.l_max) {
            return err("limits must satisfy 0 < l_min < l_max");
        }
        if self.mu <= 0.0 {
            return err("mu must be positive");
        }
        if self.f_max_z <= 0.0 {
            return err("f_max_z must be positive");
        }
        for (i, leg) in self.legs.iter().enumerate() {
            if leg.mass < 0.0 {
                return err(&format!("leg {i} mass must be nonnegative"));
            }
            if !(0.0..=1.0).contains(&leg.mass_fraction) {
                return err(&format!("leg {i} mass_fraction must be in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// Centroidal state: system CoM, body orientation, linear and angular
/// momentum (all world frame).
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct State {
    pub r: Vector3<f64>,
    pub q_b: Quat,
    pub h: Vector3<f64>,
    pub l: Vector3<f64>,
}

impl State {
    /// CoM velocity `ṙ = H / m`.
    pub fn com_velocity(&self, model: &RobotModel) -> Vector3<f64> {
        self.h / model.total_mass()
    }
}

/// Per-tick input: contact forces (world frame, one per contact point) and
/// foot positions (world frame, one per foot; the center for planar feet).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Control {
    pub forces: Vec<Vector3<f64>>,
    pub foot_positions: Vec<Vector3<f64>>,
}

impl Control {
    pub fn zero_forces(model: &RobotModel, foot_positions: Vec<Vector3<f64>>) -> Self {
        Self {
            forces: vec![Vector3::zeros(); model.n_contact_points()],
            foot_positions,
        }
    }

    pub fn validate(&self, model: &RobotModel) -> Result<(), ModelError> {
        if self.forces.len() != model.n_contact_points() {
            return Err(ModelError::ForceCountMismatch {
                forces: self.forces.len(),
                expected: model.n_contact_points(),
            });
        }
        if self.foot_positions.len() != model.n_feet() {
            return Err(ModelError::FootCountMismatch {
                feet: self.foot_positions.len(),
                expected: model.n_feet(),
            });
        }
        Ok(())
    }
}

/// Time derivative of a `State`; the quaternion part is a raw 4-vector.
#[derive(Clone, Copy, Debug)]
pub struct StateDerivative {
    pub r_dot: Vector3<f64>,
    pub q_dot: Vector4<f64>,
    pub h_dot: Vector3<f64>,
    pub l_dot: Vector3<f64>,
}

/// Position of a leg lump: `r_l = p + ρ·(r − p)`.
pub fn leg_lump_position(
    foot: &Vector3<f64>,
    com: &Vector3<f64>,
    leg: &LegLump,
) -> Vector3<f64> {
    foot + leg.mass_fraction * (com - foot)
}

/// System CoM for a given body CoM and foot positions.
///
/// Solves the fixed point `r = (r_B·m_B + Σ r_l^i(r)·m_l^i) / m` in closed
/// form: `r = (r_B·m_B + Σ m_l^i (1−ρ_i) p_i) / (m − Σ m_l^i ρ_i)`.
pub fn system_com(
    body_com: &Vector3<f64>,
    foot_positions: &[Vector3<f64>],
    model: &RobotModel,
) -> Result<Vector3<f64>, ModelError> {
    let m = model.total_mass();
    let mut numer = body_com * model.body_mass;
    let mut denom = m;
    for (leg, p) in model.legs.iter().zip(foot_positions) {
        numer += leg.mass * (1.0 - leg.mass_fraction) * p;
        denom -= leg.mass * leg.mass_fraction;
    }
    if denom <= 0.0 {
        return Err(ModelError::DegenerateMass(denom));
    }
    Ok(numer / denom)
}

/// Exact inverse of [`system_com`]: recovers the body CoM from the system CoM.
pub fn body_position_from_com(
    com: &Vector3<f64>,
    foot_positions: &[Vector3<f64>],
    model: &RobotModel,
) -> Result<Vector3<f64>, ModelError> {
    let m = model.total_mass();
    let denom = m
        - model
            .legs
            .iter()
            .map(|l| l.mass * l.mass_fraction)
            .sum::<f64>();
    if denom <= 0.0 {
        return Err(ModelError::DegenerateMass(denom));
    }
    let mut rb = com * m;
    for (leg, p) in model.legs.iter().zip(foot_positions) {
        rb -= leg.mass * leg_lump_position(p, com, leg);
    }
    Ok(rb / model.body_mass)
}

/// Point-mass inertia `m (‖d‖² E₃ − d dᵀ)` about the origin of `d`.
fn point_mass_inertia(mass: f64, d: &Vector3<f64>) -> Matrix3<f64> {
    mass * (d.norm_squared() * Matrix3::identity() - d * d.transpose())
}

/// Centroidal composite rigid body inertia in the world frame:
/// `I_W = R I_B Rᵀ + Σ m_i (‖d_i‖² E₃ − d_i d_iᵀ)` with `d_i = r − r_l^i`.
pub fn centroidal_inertia(
    q_b: &Quat,
    com: &Vector3<f64>,
    foot_positions: &[Vector3<f64>],
    model: &RobotModel,
) -> Result<Matrix3<f64>, ModelError> {
    let rot = quat_to_rot(q_b)?;
    Ok(centroidal_inertia_with_rot(&rot, com, foot_positions, model))
}

pub(crate) fn centroidal_inertia_with_rot(
    rot: &Matrix3<f64>,
    com: &Vector3<f64>,
    foot_positions: &[Vector3<f64>],
    model: &RobotModel,
) -> Matrix3<f64> {
    let mut iw = rot * model.body_inertia * rot.transpose();
    for (leg, p) in model.legs.iter().zip(foot_positions) {
        let d = com - leg_lump_position(p, com, leg);
        iw += point_mass_inertia(leg.mass, &d);
    }
    iw
}

/// Inertia about the body yaw axis: the body-frame zz entry of the
/// centroidal inertia, `(Rᵀ I_W R)_{zz}`. This is the quantity reduced by
/// tucking feet toward the spin axis.
pub fn inertia_about_body_yaw_axis(
    q_b: &Quat,
    com: &Vector3<f64>,
    foot_positions: &[Vector3<f64>],
    model: &RobotModel,
) -> Result<f64, ModelError> {
    let rot = quat_to_rot(q_b)?;
    let iw = centroidal_inertia_with_rot(&rot, com, foot_positions, model);
    let axis = rot.column(2);
    Ok((axis.transpose() * iw * axis)[0])
}

/// Eigenvalues of a symmetric 3×3 matrix, ascending (analytic, no allocation).
fn eigenvalues_sym3(m: &Matrix3<f64>) -> (f64, f64, f64) {
    let p1 = m[(0, 1)].powi(2) + m[(0, 2)].powi(2) + m[(1, 2)].powi(2);
    let q = m.trace() / 3.0;
    if p1 < 1e-300 {
        let mut d = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return (d[0], d[1], d[2]);
    }
    let p2 = (m[(0, 0)] - q).powi(2) + (m[(1, 1)] - q).powi(2) + (m[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (m - q * Matrix3::identity()) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e3 = q + 2.0 * p * phi.cos();
    let e1 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    (e1, e2, e3)
}

fn invert_inertia(iw: &Matrix3<f64>) -> Result<Matrix3<f64>, ModelError> {
    let (lo, _, hi) = eigenvalues_sym3(iw);
    if lo <= 0.0 || hi / lo > INERTIA_COND_LIMIT {
        return Err(ModelError::SingularInertia {
            cond: if lo <= 0.0 { f64::INFINITY } else { hi / lo },
        });
    }
    iw.try_inverse().ok_or(ModelError::SingularInertia { cond: f64::INFINITY })
}

/// World positions of the contact points carried by `u`: the foot positions
/// themselves for point feet, the four rotated corners per foot for planar
/// feet. Order matches the force layout (foot-major, corner-minor).
pub fn contact_point_positions(
    q_b: &Quat,
    u: &Control,
    model: &RobotModel,
) -> Vec<Vector3<f64>> {
    match &model.foot_type {
        FootType::Point => u.foot_positions.clone(),
        FootType::Planar { corners } => {
            let rot = rot_unchecked(&q_b.normalized());
            let mut pts = Vec::with_capacity(4 * u.foot_positions.len());
            for center in &u.foot_positions {
                for c in corners {
                    pts.push(center + rot * c);
                }
            }
            pts
        }
    }
}

/// Continuous dynamics: `ṙ = H/m`, `q̇ = ½ Q(q) I_W⁻¹ L`, `Ḣ = Σf + mg`,
/// `L̇ = Σ (p_i − r) × f_i` with the torque sum over all contact points.
///
/// Orientation-dependent quantities use the normalized quaternion so the
/// derivative stays well defined at the slightly off-unit intermediate
/// states of an integrator stage; the rate matrix uses `q` as is.
pub fn dynamics(
    x: &State,
    u: &Control,
    model: &RobotModel,
    gravity: &Gravity,
) -> Result<StateDerivative, ModelError> {
    u.validate(model)?;
    let m = model.total_mass();
    let qn = x.q_b.normalized();
    if !qn.norm().is_finite() {
        return Err(ModelError::NonUnitQuaternion { norm: x.q_b.norm() });
    }
    let rot = rot_unchecked(&qn);
    let iw = centroidal_inertia_with_rot(&rot, &x.r, &u.foot_positions, model);
    let omega = invert_inertia(&iw)? * x.l;

    let mut h_dot = m * gravity.0;
    let mut l_dot = Vector3::zeros();
    for (p, f) in contact_point_positions(&x.q_b, u, model)
        .iter()
        .zip(&u.forces)
    {
        h_dot += f;
        l_dot += (p - x.r).cross(f);
    }

    Ok(StateDerivative {
        r_dot: x.h / m,
        q_dot: quat_rate(&x.q_b, &omega),
        h_dot,
        l_dot,
    })
}

fn state_step(x: &State, d: &StateDerivative, dt: f64) -> State {
    State {
        r: x.r + dt * d.r_dot,
        q_b: Quat::from_vector(x.q_b.as_vector() + dt * d.q_dot),
        h: x.h + dt * d.h_dot,
        l: x.l + dt * d.l_dot,
    }
}

/// One classical RK4 step holding `u` constant over `[0, dt]`, followed by
/// quaternion renormalization.
pub fn integrate_step(
    x: &State,
    u: &Control,
    dt: f64,
    model: &RobotModel,
    gravity: &Gravity,
) -> Result<State, ModelError> {
    let k1 = dynamics(x, u, model, gravity)?;
    let k2 = dynamics(&state_step(x, &k1, 0.5 * dt), u, model, gravity)?;
    let k3 = dynamics(&state_step(x, &k2, 0.5 * dt), u, model, gravity)?;
    let k4 = dynamics(&state_step(x, &k3, dt), u, model, gravity)?;
    let combined = StateDerivative {
        r_dot: (k1.r_dot + 2.0 * k2.r_dot + 2.0 * k3.r_dot + k4.r_dot) / 6.0,
        q_dot: (k1.q_dot + 2.0 * k2.q_dot + 2.0 * k3.q_dot + k4.q_dot) / 6.0,
        h_dot: (k1.h_dot + 2.0 * k2.h_dot + 2.0 * k3.h_dot + k4.h_dot) / 6.0,
        l_dot: (k1.l_dot + 2.0 * k2.l_dot + 2.0 * k3.l_dot + k4.l_dot) / 6.0,
    };
    let mut next = state_step(x, &combined, dt);
    next.q_b = next.q_b.normalized();
    Ok(next)
}

#[cfg(test)]
mod tests;
