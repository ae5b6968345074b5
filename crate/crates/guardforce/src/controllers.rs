//! Nominal compliant controllers and the safety-filtered control steps.
//!
//! The nominal stack is a virtual mass-spring-damper (admittance) fed by
//! the measured wrench, optionally wrapped by a PI force loop that
//! offsets the pose reference along the pressing direction, and a
//! resolved-rate law turning the commanded pose into joint rates. The
//! filtered steps run the full pipeline: uncertainty measurement,
//! derivative estimation, barrier and constraint assembly, and the
//! projection QP. While separated the constraint set is empty and the
//! nominal command passes through bit for bit.

use crate::environment::{lumped_uncertainty, ContactAxis, Wrench};
use crate::estimator::{error_bound, sigma_vector, BoundMode, EstimatorError, EstimatorState};
use crate::qp::{self, QpError, QpProblem};
use crate::robot::{damped_inverse, JointState, Pose, RobotError, RobotModel, TaskSpace};
use crate::safety::{b_fc, dynamic_constraint, kinematic_constraint, SafetyConfig, SafetyError};
use crate::Vec6;
use nalgebra::{DVector, Matrix3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
    #[error("constraint projection failed: {0}")]
    Qp(#[from] QpError),
}

/// Virtual inertia, damping and stiffness of the admittance law
/// (diagonal, one entry per pose coordinate).
#[derive(Debug, Clone)]
pub struct AdmittanceParams {
    pub m_i: Vec6,
    pub d_i: Vec6,
    pub k_i: Vec6,
}

impl AdmittanceParams {
    pub fn uniform(m: f64, d: f64, k: f64) -> Self {
        Self { m_i: Vec6::repeat(m), d_i: Vec6::repeat(d), k_i: Vec6::repeat(k) }
    }
}

/// Commanded pose and velocity of the admittance law. The first three
/// coordinates are the commanded position, the last three small-angle
/// orientation offsets from the fixed commanded orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceState {
    pub x_c: Vec6,
    pub xdot_c: Vec6,
}

impl AdmittanceState {
    pub fn at_reference(x_ref: Vec6) -> Self {
        Self { x_c: x_ref, xdot_c: Vec6::zeros() }
    }
}

/// One RK4 step of the admittance dynamics
/// `M xddot_c + D (xdot_c - xdot_ref) + K (x_c - x_ref) = -h_e`
/// with the wrench and reference held constant over the step.
pub fn admittance_update(
    params: &AdmittanceParams,
    state: &AdmittanceState,
    h_e: &Vec6,
    x_ref: &Vec6,
    xdot_ref: &Vec6,
    dt: f64,
) -> AdmittanceState {
    debug_assert!(dt > 0.0);
    let accel = |x: &Vec6, v: &Vec6| -> Vec6 {
        let spring = params.k_i.component_mul(&(x - x_ref));
        let damper = params.d_i.component_mul(&(v - xdot_ref));
        (-h_e - damper - spring).component_div(&params.m_i)
    };
    let (x0, v0) = (state.x_c, state.xdot_c);
    let a1 = accel(&x0, &v0);
    let half = dt / 2.0;
    let a2 = accel(&(x0 + v0 * half), &(v0 + a1 * half));
    let a3 = accel(&(x0 + (v0 + a1 * half) * half), &(v0 + a2 * half));
    let a4 = accel(&(x0 + (v0 + a2 * half) * dt), &(v0 + a3 * dt));
    let k1x = v0;
    let k2x = v0 + a1 * half;
    let k3x = v0 + a2 * half;
    let k4x = v0 + a3 * dt;
    AdmittanceState {
        x_c: x0 + (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (dt / 6.0),
        xdot_c: v0 + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6.0),
    }
}

/// PI force loop producing a pose-reference offset along the pressing
/// direction (positive = press deeper).
#[derive(Debug, Clone, Copy)]
pub struct ForceLoopParams {
    /// Proportional gain (m/N).
    pub k_p: f64,
    /// Integral gain (m/(N s)).
    pub k_i: f64,
    /// Desired contact force (N).
    pub f_d: f64,
    /// Offset clamp; the integral freezes while saturated (m).
    pub clamp: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ForceLoopState {
    /// Accumulated force-error integral (N s).
    pub integral: f64,
    /// Current reference offset (m).
    pub offset: f64,
}

pub fn force_loop_update(
    params: &ForceLoopParams,
    state: &ForceLoopState,
    f_meas: f64,
    dt: f64,
) -> ForceLoopState {
    debug_assert!(dt > 0.0);
    let error = params.f_d - f_meas;
    let integral = state.integral + error * dt;
    let offset = params.k_p * error + params.k_i * integral;
    if offset.abs() > params.clamp {
        // Saturate and freeze the integral.
        ForceLoopState {
            integral: state.integral,
            offset: offset.clamp(-params.clamp, params.clamp),
        }
    } else {
        ForceLoopState { integral, offset }
    }
}

/// Joint and task feedback gains of the resolved-rate law.
#[derive(Debug, Clone, Copy)]
pub struct NominalGains {
    /// Joint-space feedback gain (1/s).
    pub k_c: f64,
    /// Task-space feedback gain (1/s); defaults to the joint gain.
    pub k_task: f64,
    /// Damping of the least-squares Jacobian inverse.
    pub dls_lambda: f64,
}

impl NominalGains {
    pub fn new(k_c: f64) -> Self {
        Self { k_c, k_task: k_c, dls_lambda: 1e-4 }
    }
}

/// Rotation-vector of R (axis * angle), for small-to-moderate angles.
fn rotation_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos_angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let angle = cos_angle.acos();
    let skew = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if angle < 1e-9 {
        skew * 0.5
    } else {
        skew * (angle / (2.0 * angle.sin()))
    }
}

/// Task-space error from the current pose to a commanded pose expressed
/// as position plus small-angle orientation offsets around `r0`.
fn task_error(
    model: &RobotModel,
    pose: &Pose,
    x_cmd: &Vec6,
    r0: &Matrix3<f64>,
) -> DVector<f64> {
    match model.task_space {
        TaskSpace::Planar2 => DVector::from_vec(vec![
            x_cmd[0] - pose.position[0],
            x_cmd[1] - pose.position[1],
        ]),
        TaskSpace::Spatial6 => {
            let pos_err = Vector3::new(x_cmd[0], x_cmd[1], x_cmd[2]) - pose.position;
            let theta = Vector3::new(x_cmd[3], x_cmd[4], x_cmd[5]);
            let r_cmd = if theta.norm() < 1e-12 {
                *r0
            } else {
                *r0 * nalgebra::Rotation3::from_scaled_axis(theta).into_inner()
            };
            let rot_err = rotation_log(&(r_cmd * pose.rotation.transpose()));
            let mut e = DVector::zeros(6);
            e.rows_mut(0, 3).copy_from(&pos_err);
            e.rows_mut(3, 3).copy_from(&rot_err);
            e
        }
    }
}

/// Resolved-rate nominal command:
/// `qdot = J_dls^+ (xdot_cmd + k_task * e_task) + k_c (q_ref - q)`.
/// Returns the command and a flag raised near singular configurations.
#[allow(clippy::too_many_arguments)]
pub fn resolved_rate_nominal(
    model: &RobotModel,
    q: &DVector<f64>,
    pose: &Pose,
    x_cmd: &Vec6,
    xdot_cmd: &Vec6,
    q_ref: &DVector<f64>,
    gains: &NominalGains,
    r0: &Matrix3<f64>,
) -> Result<(DVector<f64>, bool), RobotError> {
    let j = model.jacobian(q)?;
    let task_dim = model.task_dim();
    let e = task_error(model, pose, x_cmd, r0);
    let mut xdot = DVector::zeros(task_dim);
    for i in 0..task_dim.min(6) {
        xdot[i] = xdot_cmd[i];
    }
    let singular = crate::robot::min_singular_value(&j) < 1e-6;
    let j_pinv = damped_inverse(&j, gains.dls_lambda);
    let qdot = &j_pinv * (xdot + e * gains.k_task) + (q_ref - q) * gains.k_c;
    Ok((qdot, singular))
}

/// Damped-least-squares inverse kinematics seeded at `seed`. Returns the
/// solution and the final task-error norm.
pub fn ik_damped(
    model: &RobotModel,
    target_pos: &Vector3<f64>,
    target_rot: Option<&Matrix3<f64>>,
    seed: &DVector<f64>,
    iterations: usize,
    lambda: f64,
) -> Result<(DVector<f64>, f64), RobotError> {
    let mut q = seed.clone();
    let mut err_norm = f64::INFINITY;
    let mut x_cmd = Vec6::zeros();
    for i in 0..3 {
        x_cmd[i] = target_pos[i];
    }
    let r0 = target_rot.cloned().unwrap_or_else(Matrix3::identity);
    for _ in 0..iterations {
        let pose = model.forward_kinematics(&q)?;
        let mut e = task_error(model, &pose, &x_cmd, &r0);
        if target_rot.is_none() && model.task_space == TaskSpace::Spatial6 {
            // Position-only solve: ignore the orientation rows.
            for i in 3..6 {
                e[i] = 0.0;
            }
        }
        err_norm = e.norm();
        if err_norm < 1e-12 {
            break;
        }
        let j = model.jacobian(&q)?;
        q += damped_inverse(&j, lambda) * e;
    }
    Ok((q, err_norm))
}

/// Closed-form two-link planar inverse kinematics (elbow sign picks the
/// branch). Returns None when the target is out of reach.
pub fn planar2_ik(model: &RobotModel, x: f64, y: f64, elbow_up: bool) -> Option<DVector<f64>> {
    let l1 = model.dh_rows[0].a;
    let l2 = model.dh_rows[1].a;
    let r2 = x * x + y * y;
    let c2 = (r2 - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return None;
    }
    let s2 = (1.0 - c2 * c2).sqrt() * if elbow_up { 1.0 } else { -1.0 };
    let q2 = s2.atan2(c2);
    let q1 = y.atan2(x) - (l2 * s2).atan2(l1 + l2 * c2);
    Some(DVector::from_vec(vec![q1, q2]))
}

/// How QP infeasibility is handled inside the filtered steps.
#[derive(Debug, Clone, Copy)]
pub enum InfeasiblePolicy {
    /// Re-solve with a shared quadratic slack at this penalty.
    Slack { penalty: f64 },
    /// Propagate the error.
    Fail,
}

/// Diagnostics common to both filtered steps.
#[derive(Debug, Clone)]
pub struct StepDiagnostics {
    pub delta_e: Vec6,
    pub z1: Vec6,
    pub z2: Vec6,
    pub z3: Option<Vec6>,
    pub sigma: Vec6,
    pub b: Vec6,
    pub lambda: Vec<f64>,
    pub active_set: Vec<usize>,
    pub constraint_rows: usize,
    pub slack_used: bool,
    pub singular: bool,
}

/// Velocity-level filtered controller: admittance (optionally wrapped by
/// a PI force loop) -> resolved rate -> barrier-constrained projection.
#[derive(Debug, Clone)]
pub struct KinematicSc3 {
    pub model: RobotModel,
    pub axis: ContactAxis,
    pub safety: SafetyConfig,
    pub admittance: AdmittanceParams,
    pub adm_state: AdmittanceState,
    pub estimator: EstimatorState,
    pub bound: BoundMode,
    pub gains: NominalGains,
    pub force_loop: Option<(ForceLoopParams, ForceLoopState)>,
    /// Fixed commanded orientation.
    pub base_rotation: Matrix3<f64>,
    /// Observer sub-steps per control tick.
    pub td_substeps: usize,
    pub infeasible_policy: InfeasiblePolicy,
    /// False runs the bare nominal controller (baseline comparisons).
    pub filter_enabled: bool,
    pub t: f64,
}

/// Result of one velocity-level tick.
#[derive(Debug, Clone)]
pub struct KinematicStep {
    pub qdot_star: DVector<f64>,
    pub qdot_nom: DVector<f64>,
    pub x_cmd: Vec6,
    pub diagnostics: StepDiagnostics,
}

impl KinematicSc3 {
    /// Advance one control tick of length `dt`.
    pub fn step(
        &mut self,
        q: &DVector<f64>,
        h_mea: &Wrench,
        in_contact: bool,
        x_ref_pos: &Vector3<f64>,
        xdot_ref_pos: &Vector3<f64>,
        dt: f64,
    ) -> Result<KinematicStep, ControllerError> {
        let pose = self.model.forward_kinematics(q)?;
        let f_meas = self.axis.force_of(h_mea);

        // Optional PI force loop shifting the reference along the
        // pressing direction.
        let mut x_ref = Vec6::zeros();
        for i in 0..3 {
            x_ref[i] = x_ref_pos[i];
        }
        if let Some((params, state)) = &mut self.force_loop {
            *state = force_loop_update(params, state, f_meas, dt);
            x_ref[self.axis.index] += self.axis.direction * state.offset;
        }
        let mut xdot_ref = Vec6::zeros();
        for i in 0..3 {
            xdot_ref[i] = xdot_ref_pos[i];
        }

        // Measured lumped uncertainty, masked while separated so the
        // observer sees a quiet signal until re-contact.
        let delta_e = if in_contact {
            lumped_uncertainty(h_mea, &pose.position, &self.axis, &self.safety.prior)
        } else {
            Vec6::zeros()
        };
        let td_dt = dt / self.td_substeps as f64;
        for _ in 0..self.td_substeps {
            self.estimator = self.estimator.td_step(&delta_e, td_dt);
        }
        let z_bar = error_bound(&self.bound, self.t)?;
        let sigma = sigma_vector(z_bar);

        // The admittance consumes the wrench with base-frame signs
        // (pressing reads negative along a negative-direction axis), so
        // compliance backs away along the outward normal.
        let mut h_signed = h_mea.as_vec6();
        h_signed[self.axis.index] *= self.axis.direction;
        self.adm_state = admittance_update(
            &self.admittance,
            &self.adm_state,
            &h_signed,
            &x_ref,
            &xdot_ref,
            dt,
        );

        // Joint reference: inverse kinematics of the commanded pose
        // seeded at the current configuration.
        let x_c_pos = Vector3::new(
            self.adm_state.x_c[0],
            self.adm_state.x_c[1],
            self.adm_state.x_c[2],
        );
        let (q_ik, ik_err) = ik_damped(
            &self.model,
            &x_c_pos,
            Some(&self.base_rotation),
            q,
            5,
            self.gains.dls_lambda.max(1e-3),
        )?;
        let q_ref = if ik_err < 1e-3 { q_ik } else { q.clone() };

        let (qdot_nom, singular) = resolved_rate_nominal(
            &self.model,
            q,
            &pose,
            &self.adm_state.x_c,
            &self.adm_state.xdot_c,
            &q_ref,
            &self.gains,
            &self.base_rotation,
        )?;

        let b = b_fc(&self.safety, h_mea, in_contact);
        let set = if self.filter_enabled {
            kinematic_constraint(
                &self.safety,
                &self.model,
                q,
                &self.axis,
                &self.estimator.z2,
                &sigma,
                &b,
                in_contact,
            )?
        } else {
            crate::safety::ConstraintSet::empty(self.model.dof())
        };

        let (qdot_star, lambda, active_set, slack_used) =
            project_command(&qdot_nom, &set, self.infeasible_policy)?;

        self.t += dt;
        Ok(KinematicStep {
            qdot_star,
            qdot_nom,
            x_cmd: self.adm_state.x_c,
            diagnostics: StepDiagnostics {
                delta_e,
                z1: self.estimator.z1,
                z2: self.estimator.z2,
                z3: self.estimator.z3,
                sigma,
                b,
                lambda,
                active_set,
                constraint_rows: set.g.nrows(),
                slack_used,
                singular,
            },
        })
    }
}

/// Torque-level filtered controller: computed-torque tracking of a joint
/// reference, projected onto the second-order barrier constraint.
#[derive(Debug, Clone)]
pub struct DynamicSc3 {
    pub model: RobotModel,
    pub axis: ContactAxis,
    pub safety: SafetyConfig,
    pub estimator: EstimatorState,
    pub bound: BoundMode,
    /// PD gains of the computed-torque tracker.
    pub kp: f64,
    pub kd: f64,
    pub td_substeps: usize,
    pub infeasible_policy: InfeasiblePolicy,
    pub dls_lambda: f64,
    pub filter_enabled: bool,
    pub t: f64,
}

/// Result of one torque-level tick.
#[derive(Debug, Clone)]
pub struct DynamicStep {
    pub tau_star: DVector<f64>,
    pub tau_nom: DVector<f64>,
    pub diagnostics: StepDiagnostics,
}

impl DynamicSc3 {
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &mut self,
        state: &JointState,
        h_mea: &Wrench,
        in_contact: bool,
        q_ref: &DVector<f64>,
        qd_ref: &DVector<f64>,
        qdd_ref: &DVector<f64>,
        dt: f64,
    ) -> Result<DynamicStep, ControllerError> {
        let pose = self.model.forward_kinematics(&state.q)?;
        let delta_e = if in_contact {
            lumped_uncertainty(h_mea, &pose.position, &self.axis, &self.safety.prior)
        } else {
            Vec6::zeros()
        };
        let td_dt = dt / self.td_substeps as f64;
        for _ in 0..self.td_substeps {
            self.estimator = self.estimator.td_step(&delta_e, td_dt);
        }
        let z_bar = error_bound(&self.bound, self.t)?;
        let sigma = sigma_vector(z_bar);

        // Computed-torque nominal command.
        let terms = self.model.dynamics_terms(state)?;
        let v = qdd_ref + (qd_ref - &state.qdot) * self.kd + (q_ref - &state.q) * self.kp;
        let tau_nom = &terms.m * v + &terms.c_vec + &terms.g_vec;

        let b = b_fc(&self.safety, h_mea, in_contact);
        let z3 = self.estimator.z3.unwrap_or_else(Vec6::zeros);
        let set = if self.filter_enabled {
            dynamic_constraint(
                &self.safety,
                &self.model,
                state,
                h_mea,
                &self.estimator.z2,
                &z3,
                &sigma,
                &b,
                &self.axis,
                in_contact,
                Some(self.dls_lambda),
            )?
        } else {
            crate::safety::ConstraintSet::empty(self.model.dof())
        };

        let (tau_star, lambda, active_set, slack_used) =
            project_command(&tau_nom, &set, self.infeasible_policy)?;

        self.t += dt;
        Ok(DynamicStep {
            tau_star,
            tau_nom,
            diagnostics: StepDiagnostics {
                delta_e,
                z1: self.estimator.z1,
                z2: self.estimator.z2,
                z3: self.estimator.z3,
                sigma,
                b,
                lambda,
                active_set,
                constraint_rows: set.g.nrows(),
                slack_used,
                singular: false,
            },
        })
    }
}

/// Project a nominal command onto the constraint rows; empty rows pass
/// the command through unchanged (bit for bit).
fn project_command(
    u_nom: &DVector<f64>,
    set: &crate::safety::ConstraintSet,
    policy: InfeasiblePolicy,
) -> Result<(DVector<f64>, Vec<f64>, Vec<usize>, bool), ControllerError> {
    if set.is_empty() {
        return Ok((u_nom.clone(), Vec::new(), Vec::new(), false));
    }
    let problem = QpProblem::new(u_nom.clone(), set.g.clone(), set.h.clone())?;
    match qp::solve(&problem) {
        Ok(sol) => Ok((
            sol.u_star,
            sol.lambda.iter().cloned().collect(),
            sol.active_set,
            false,
        )),
        Err(QpError::Infeasible) => match policy {
            InfeasiblePolicy::Slack { penalty } => {
                let sol = qp::solve_with_slack(&problem, penalty);
                Ok((
                    sol.u_star,
                    sol.lambda.iter().cloned().collect(),
                    sol.active_set,
                    true,
                ))
            }
            InfeasiblePolicy::Fail => Err(QpError::Infeasible.into()),
        },
        Err(e) => Err(e.into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn admittance_equilibrium_is_fixed_point() {
        let params = AdmittanceParams::uniform(1.0, 40.0, 600.0);
        let x_ref = Vec6::repeat(0.3);
        let state = AdmittanceState::at_reference(x_ref);
        let next =
            admittance_update(&params, &state, &Vec6::zeros(), &x_ref, &Vec6::zeros(), 0.02);
        assert_eq!(next.x_c, state.x_c);
        assert_eq!(next.xdot_c, state.xdot_c);
    }

    #[test]
    fn admittance_static_offset() {
        // A constant load F on one axis settles at -F / K.
        let params = AdmittanceParams::uniform(1.0, 40.0, 600.0);
        let x_ref = Vec6::zeros();
        let mut state = AdmittanceState::at_reference(x_ref);
        let mut h = Vec6::zeros();
        h[2] = 3.0;
        for _ in 0..5000 {
            state = admittance_update(&params, &state, &h, &x_ref, &Vec6::zeros(), 0.005);
        }
        assert_abs_diff_eq!(state.x_c[2], -3.0 / 600.0, epsilon = 1e-9);
        // Doubling the stiffness halves the offset.
        let stiff = AdmittanceParams::uniform(1.0, 40.0, 1200.0);
        let mut state2 = AdmittanceState::at_reference(x_ref);
        for _ in 0..5000 {
            state2 = admittance_update(&stiff, &state2, &h, &x_ref, &Vec6::zeros(), 0.005);
        }
        assert_abs_diff_eq!(state2.x_c[2], state.x_c[2] / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn force_loop_zero_error_keeps_offset() {
        let params = ForceLoopParams { k_p: 1e-5, k_i: 1e-2, f_d: 4.0, clamp: 0.05 };
        let state = ForceLoopState { integral: 0.8, offset: 8e-3 };
        let next = force_loop_update(&params, &state, 4.0, 0.02);
        assert_abs_diff_eq!(next.offset, params.k_i * 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(next.integral, 0.8, epsilon = 1e-15);
    }

    #[test]
    fn force_loop_closed_form_ramp() {
        // Constant error e for time T without clamping:
        // offset = k_p e + k_i e T.
        let params = ForceLoopParams { k_p: 1e-5, k_i: 1e-2, f_d: 4.0, clamp: 1.0 };
        let mut state = ForceLoopState::default();
        let dt = 0.01;
        let steps = 500;
        for _ in 0..steps {
            state = force_loop_update(&params, &state, 2.0, dt);
        }
        let e = 2.0;
        let t = steps as f64 * dt;
        assert_abs_diff_eq!(
            state.offset,
            params.k_p * e + params.k_i * e * t,
            epsilon = 1e-12
        );
    }

    #[test]
    fn force_loop_anti_windup() {
        let params = ForceLoopParams { k_p: 0.0, k_i: 1.0, f_d: 10.0, clamp: 0.05 };
        let mut state = ForceLoopState::default();
        for _ in 0..1000 {
            state = force_loop_update(&params, &state, 0.0, 0.01);
        }
        assert_abs_diff_eq!(state.offset, 0.05, epsilon = 1e-12);
        // The integral froze once the clamp engaged.
        assert!(state.integral * params.k_i <= 0.05 + 0.1 + 1e-9);
    }

    #[test]
    fn resolved_rate_zero_at_target() {
        let model = RobotModel::ur3e_kinematic();
        let q = DVector::from_vec(vec![0.1, -1.2, 1.6, -1.9, -1.5, 0.2]);
        let pose = model.forward_kinematics(&q).unwrap();
        let mut x_cmd = Vec6::zeros();
        for i in 0..3 {
            x_cmd[i] = pose.position[i];
        }
        let gains = NominalGains::new(0.2);
        let (qdot, _) = resolved_rate_nominal(
            &model, &q, &pose, &x_cmd, &Vec6::zeros(), &q, &gains, &pose.rotation,
        )
        .unwrap();
        assert!(qdot.norm() < 1e-12);
    }

    #[test]
    fn resolved_rate_scalar_case() {
        // One joint, unit link, q = 0: tangent direction is y; an error
        // of 0.1 on y with gain 0.2 commands about 0.02 rad/s.
        let model = RobotModel::new(
            "one",
            vec![crate::robot::DhRow { a: 1.0, alpha: 0.0, d: 0.0, theta_offset: 0.0 }],
            TaskSpace::Planar2,
            Vector3::zeros(),
            None,
            None,
        )
        .unwrap();
        let q = DVector::zeros(1);
        let pose = model.forward_kinematics(&q).unwrap();
        let mut x_cmd = Vec6::zeros();
        x_cmd[0] = pose.position[0];
        x_cmd[1] = pose.position[1] + 0.1;
        let gains = NominalGains { k_c: 0.2, k_task: 0.2, dls_lambda: 1e-6 };
        let (qdot, _) = resolved_rate_nominal(
            &model, &q, &pose, &x_cmd, &Vec6::zeros(), &q, &gains, &Matrix3::identity(),
        )
        .unwrap();
        assert_abs_diff_eq!(qdot[0], 0.02, epsilon = 1e-6);
        // Linearity: doubling the error doubles the command.
        x_cmd[1] = pose.position[1] + 0.2;
        let (qdot2, _) = resolved_rate_nominal(
            &model, &q, &pose, &x_cmd, &Vec6::zeros(), &q, &gains, &Matrix3::identity(),
        )
        .unwrap();
        assert_abs_diff_eq!(qdot2[0], 2.0 * qdot[0], epsilon = 1e-9);
    }

    #[test]
    fn planar_ik_round_trip() {
        let model = RobotModel::planar2();
        for &(x, y) in &[(1.2, -0.6), (0.5, 1.1), (1.7, 0.2)] {
            let q = planar2_ik(&model, x, y, false).unwrap();
            let pose = model.forward_kinematics(&q).unwrap();
            assert_abs_diff_eq!(pose.position[0], x, epsilon = 1e-10);
            assert_abs_diff_eq!(pose.position[1], y, epsilon = 1e-10);
        }
        assert!(planar2_ik(&model, 3.0, 0.0, false).is_none());
    }

    #[test]
    fn ik_damped_converges_on_spatial_arm() {
        let model = RobotModel::ur3e_kinematic();
        let seed = DVector::from_vec(vec![0.1, -1.2, 1.6, -1.9, -1.5, 0.2]);
        let target_pose = model.forward_kinematics(&seed).unwrap();
        let start = &seed + DVector::from_vec(vec![0.05, -0.04, 0.03, 0.02, -0.05, 0.04]);
        let (q, err) = ik_damped(
            &model,
            &target_pose.position,
            Some(&target_pose.rotation),
            &start,
            20,
            1e-3,
        )
        .unwrap();
        assert!(err < 1e-8, "ik residual {err}");
        let pose = model.forward_kinematics(&q).unwrap();
        assert!((pose.position - target_pose.position).norm() < 1e-8);
    }
}
