//! Deterministic fixed-step closed-loop simulation.
//!
//! A [`Scenario`] fully describes one run: robot, hidden environment,
//! controller selection, safety and estimator settings, and the
//! reference trajectory. Control runs at a fixed tick (50 Hz default)
//! with zero-order hold; the plant and the environment's internal state
//! advance in smaller sub-steps between ticks. Identical scenarios
//! produce bit-identical traces.

pub mod builtins;
pub mod metrics;
pub mod reference;
pub mod trace;

pub use builtins::builtin_scenarios;
pub use metrics::{compute_metrics, metrics_to_kv, Metrics};
pub use reference::ReferenceSpec;
pub use trace::{Trace, TraceRow};

use crate::controllers::{
    planar2_ik, AdmittanceParams, AdmittanceState, ControllerError, DynamicSc3, ForceLoopParams,
    ForceLoopState, InfeasiblePolicy, KinematicSc3, NominalGains,
};
use crate::environment::EnvironmentModel;
use crate::estimator::{BoundMode, EstimatorError, EstimatorState};
use crate::robot::{JointState, RobotError, RobotModel, TaskSpace};
use crate::safety::SafetyConfig;
use crate::Vec6;
use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// Robot selection: a preset name or a full inline model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RobotSpec {
    Preset(String),
    Custom(RobotModel),
}

impl RobotSpec {
    pub fn build(&self) -> Result<RobotModel, SimError> {
        match self {
            RobotSpec::Custom(model) => Ok(model.clone()),
            RobotSpec::Preset(name) => match name.as_str() {
                "ur3e_kinematic" => Ok(RobotModel::ur3e_kinematic()),
                "planar2" => Ok(RobotModel::planar2()),
                other => Err(SimError::Invalid(format!(
                    "unknown robot preset `{other}` (available: ur3e_kinematic, planar2)"
                ))),
            },
        }
    }
}

/// Which controller closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    /// Bare admittance + resolved rate (no safety filter).
    Admittance,
    /// Admittance + resolved rate behind the velocity-level filter.
    AdmittanceSc3,
    /// Parallel force/position (PI force loop) behind the filter.
    ParallelFpSc3,
    /// Computed torque behind the torque-level filter.
    DynamicSc3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SafetySpec {
    /// Force limit on the contact axis (N).
    pub f_max: f64,
    /// Velocity-level barrier gain (1/s).
    #[serde(default = "default_l")]
    pub l: f64,
    /// Torque-level cascade gains; default to `l`.
    #[serde(default)]
    pub l1: Option<f64>,
    #[serde(default)]
    pub l2: Option<f64>,
    /// Assumed environment stiffness (N/m).
    pub prior_stiffness: f64,
    /// Assumed surface coordinate (m).
    pub prior_rest: f64,
    #[serde(default = "default_contact_threshold")]
    pub contact_threshold: f64,
}

fn default_l() -> f64 {
    10.0
}
fn default_contact_threshold() -> f64 {
    1e-5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorSpec {
    #[serde(default = "default_est_l1")]
    pub l1: f64,
    #[serde(default = "default_est_l2")]
    pub l2: f64,
    /// Third gain; required by the torque-level controller.
    #[serde(default)]
    pub l3: Option<f64>,
    #[serde(flatten)]
    pub bound: BoundMode,
    /// Observer sub-steps per control tick.
    #[serde(default = "default_td_substeps")]
    pub substeps: usize,
}

fn default_est_l1() -> f64 {
    110.0
}
fn default_est_l2() -> f64 {
    3000.0
}
fn default_td_substeps() -> usize {
    20
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmittanceSpec {
    pub m: f64,
    pub d: f64,
    pub k: f64,
}

impl Default for AdmittanceSpec {
    fn default() -> Self {
        Self { m: 1.0, d: 40.0, k: 600.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainsSpec {
    pub k_c: f64,
    #[serde(default)]
    pub k_task: Option<f64>,
    #[serde(default = "default_dls")]
    pub dls_lambda: f64,
}

fn default_dls() -> f64 {
    1e-4
}

impl Default for GainsSpec {
    fn default() -> Self {
        Self { k_c: 0.2, k_task: None, dls_lambda: 1e-4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForceLoopSpec {
    pub k_p: f64,
    pub k_i: f64,
    pub f_d: f64,
    #[serde(default = "default_clamp")]
    pub clamp: f64,
}

fn default_clamp() -> f64 {
    0.05
}

/// Computed-torque PD gains for the torque-level controller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdSpec {
    pub kp: f64,
    pub kd: f64,
}

impl Default for PdSpec {
    fn default() -> Self {
        Self { kp: 10.0, kd: 5.0 }
    }
}

/// Where the robot starts: explicit joints, or a position resolved
/// through inverse kinematics.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StartSpec {
    #[serde(default)]
    pub joints: Option<Vec<f64>>,
    #[serde(default)]
    pub position: Option<[f64; 3]>,
    /// Seed for the iterative inverse kinematics of spatial models.
    #[serde(default)]
    pub ik_seed: Option<Vec<f64>>,
    /// Elbow branch for the planar closed-form inverse kinematics.
    #[serde(default)]
    pub elbow_up: bool,
}

/// Parameter sweep rider: dotted path into the scenario plus the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

/// One complete run description; the on-disk scenario file is this
/// struct in TOML form with `schema = 1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_control_dt")]
    pub control_dt: f64,
    #[serde(default = "default_plant_substeps")]
    pub plant_substeps: usize,
    pub robot: RobotSpec,
    pub controller: ControllerKind,
    pub reference: ReferenceSpec,
    pub environment: EnvironmentModel,
    pub safety: SafetySpec,
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub admittance: AdmittanceSpec,
    #[serde(default)]
    pub gains: GainsSpec,
    #[serde(default)]
    pub force_loop: Option<ForceLoopSpec>,
    #[serde(default)]
    pub pd: PdSpec,
    pub start: StartSpec,
    #[serde(default = "default_slack_penalty")]
    pub slack_penalty: f64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_control_dt() -> f64 {
    0.02
}
fn default_plant_substeps() -> usize {
    20
}
fn default_slack_penalty() -> f64 {
    1e6
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.schema != 1 {
            return Err(SimError::Invalid(format!(
                "unsupported schema version {} (expected 1)",
                self.schema
            )));
        }
        if !(self.duration > 0.0) {
            return Err(SimError::Invalid("duration must be > 0".into()));
        }
        if !(self.control_dt > 0.0) || self.plant_substeps == 0 {
            return Err(SimError::Invalid("control_dt and plant_substeps must be positive".into()));
        }
        if self.safety.f_max <= 0.0 {
            return Err(SimError::Invalid("safety.f_max must be > 0".into()));
        }
        Ok(())
    }

    pub fn safety_config(&self) -> SafetyConfig {
        let mut cfg = SafetyConfig::single_axis(
            &self.environment.axis,
            self.safety.f_max,
            crate::environment::PriorModel {
                stiffness: self.safety.prior_stiffness,
                rest: self.safety.prior_rest,
            },
            self.safety.l,
        );
        cfg.l1 = self.safety.l1.unwrap_or(self.safety.l);
        cfg.l2 = self.safety.l2.unwrap_or(self.safety.l);
        cfg.contact_threshold = self.safety.contact_threshold;
        cfg
    }

    fn estimator_state(&self, order3: bool) -> Result<EstimatorState, SimError> {
        if order3 {
            let l3 = self.estimator.l3.ok_or_else(|| {
                SimError::Invalid("torque-level control needs estimator.l3".into())
            })?;
            Ok(EstimatorState::uniform_order3(self.estimator.l1, self.estimator.l2, l3)?)
        } else {
            Ok(EstimatorState::uniform_order2(self.estimator.l1, self.estimator.l2)?)
        }
    }

    /// Initial joint configuration.
    pub fn initial_joints(&self, model: &RobotModel) -> Result<DVector<f64>, SimError> {
        if let Some(joints) = &self.start.joints {
            if joints.len() != model.dof() {
                return Err(SimError::Invalid("start.joints length differs from dof".into()));
            }
            return Ok(DVector::from_vec(joints.clone()));
        }
        let position = self.start.position.ok_or_else(|| {
            SimError::Invalid("start needs either joints or position".into())
        })?;
        match model.task_space {
            TaskSpace::Planar2 if model.dof() == 2 => {
                planar2_ik(model, position[0], position[1], self.start.elbow_up)
                    .ok_or_else(|| SimError::Invalid("start position out of reach".into()))
            }
            _ => {
                let seed = self
                    .start
                    .ik_seed
                    .as_ref()
                    .ok_or_else(|| SimError::Invalid("spatial start position needs ik_seed".into()))?;
                let seed = DVector::from_vec(seed.clone());
                let target = Vector3::new(position[0], position[1], position[2]);
                let (q0, err) =
                    crate::controllers::ik_damped(model, &target, None, &seed, 200, 1e-3)?;
                if err > 1e-6 {
                    return Err(SimError::Invalid(format!(
                        "start-position inverse kinematics did not converge (residual {err:.2e})"
                    )));
                }
                Ok(q0)
            }
        }
    }
}

/// Run one scenario to completion.
pub fn run_scenario(scenario: &Scenario) -> Result<Trace, SimError> {
    scenario.validate()?;
    let model = scenario.robot.build()?;
    match scenario.controller {
        ControllerKind::DynamicSc3 => run_dynamic(scenario, model),
        _ => run_kinematic(scenario, model),
    }
}

fn run_kinematic(scenario: &Scenario, model: RobotModel) -> Result<Trace, SimError> {
    let axis = scenario.environment.axis;
    let safety = scenario.safety_config();
    let q0 = scenario.initial_joints(&model)?;
    let pose0 = model.forward_kinematics(&q0)?;
    let start_coord = pose0.position[axis.index];
    let start_pos = pose0.position;

    let mut x_ref0 = Vec6::zeros();
    for i in 0..3 {
        x_ref0[i] = start_pos[i];
    }
    x_ref0[axis.index] = scenario.reference.start(start_coord);

    let force_loop = match (scenario.controller, &scenario.force_loop) {
        (ControllerKind::ParallelFpSc3, Some(spec)) => Some((
            ForceLoopParams {
                k_p: spec.k_p,
                k_i: spec.k_i,
                f_d: spec.f_d,
                clamp: spec.clamp,
            },
            ForceLoopState::default(),
        )),
        (ControllerKind::ParallelFpSc3, None) => {
            return Err(SimError::Invalid(
                "parallel_fp_sc3 controller needs a [force_loop] section".into(),
            ))
        }
        _ => None,
    };

    let mut ctx = KinematicSc3 {
        model: model.clone(),
        axis,
        safety: safety.clone(),
        admittance: AdmittanceParams::uniform(
            scenario.admittance.m,
            scenario.admittance.d,
            scenario.admittance.k,
        ),
        adm_state: AdmittanceState::at_reference(x_ref0),
        estimator: scenario.estimator_state(false)?,
        bound: scenario.estimator.bound,
        gains: NominalGains {
            k_c: scenario.gains.k_c,
            k_task: scenario.gains.k_task.unwrap_or(scenario.gains.k_c),
            dls_lambda: scenario.gains.dls_lambda,
        },
        force_loop,
        base_rotation: pose0.rotation,
        td_substeps: scenario.estimator.substeps,
        infeasible_policy: InfeasiblePolicy::Slack { penalty: scenario.slack_penalty },
        filter_enabled: scenario.controller != ControllerKind::Admittance,
        t: 0.0,
    };

    let dt = scenario.control_dt;
    let dt_sub = dt / scenario.plant_substeps as f64;
    let n_ticks = (scenario.duration / dt).round() as usize;
    let mut env = scenario.environment.clone();
    let mut q = q0;
    let mut qdot_applied = DVector::zeros(model.dof());
    let mut rows = Vec::with_capacity(n_ticks);
    let mut peak = 0.0f64;

    for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        let pose = model.forward_kinematics(&q)?;
        let jv = model.position_jacobian(&q)?;
        let xdot = &jv * &qdot_applied;
        let xdot3 = Vector3::new(xdot[0], xdot[1], xdot[2]);
        let (wrench, _) = env.contact_force(&pose, &xdot3);
        let in_contact = env.penetration(&pose.position) > safety.contact_threshold;

        let (ref_pos_axis, ref_vel_axis) = scenario.reference.eval(t, start_coord);
        let mut x_ref = start_pos;
        x_ref[axis.index] = ref_pos_axis;
        let mut xdot_ref = Vector3::zeros();
        xdot_ref[axis.index] = ref_vel_axis;

        let step = ctx.step(&q, &wrench, in_contact, &x_ref, &xdot_ref, dt)?;
        let f_axis = wrench.force[axis.index];
        peak = peak.max(f_axis);
        rows.push(TraceRow {
            t,
            q: q.iter().cloned().collect(),
            u_star: step.qdot_star.iter().cloned().collect(),
            u_nom: step.qdot_nom.iter().cloned().collect(),
            x: [pose.position[0], pose.position[1], pose.position[2]],
            xdot: [xdot3[0], xdot3[1], xdot3[2]],
            x_ref: ref_pos_axis,
            h_e: wrench.as_vec6(),
            b_fc: step.diagnostics.b,
            sigma: step.diagnostics.sigma,
            z1: step.diagnostics.z1,
            z2: step.diagnostics.z2,
            z3: step.diagnostics.z3,
            active_set: step.diagnostics.active_set.clone(),
            lambda: step.diagnostics.lambda.clone(),
            in_contact,
            violation: f_axis > scenario.safety.f_max * (1.0 + metrics::VIOLATION_TOLERANCE),
            slack_used: step.diagnostics.slack_used,
        });

        // Ideal low-level execution: the commanded rates hold exactly
        // over the tick while the environment state advances.
        for _ in 0..scenario.plant_substeps {
            q += &step.qdot_star * dt_sub;
            let pose_s = model.forward_kinematics(&q)?;
            let jv_s = model.position_jacobian(&q)?;
            let xd = &jv_s * &step.qdot_star;
            let xd3 = Vector3::new(xd[0], xd[1], xd[2]);
            env = env.step_state(&pose_s.position, dt_sub);
            let (w_s, _) = env.contact_force(&pose_s, &xd3);
            peak = peak.max(w_s.force[axis.index]);
        }
        qdot_applied = step.qdot_star.clone();
    }

    Ok(Trace {
        dt,
        axis,
        f_max: scenario.safety.f_max,
        rows,
        substep_peak_force: peak,
    })
}

fn run_dynamic(scenario: &Scenario, model: RobotModel) -> Result<Trace, SimError> {
    if model.task_space != TaskSpace::Planar2 || !model.has_dynamics() {
        return Err(SimError::Invalid(
            "dynamic_sc3 needs a planar dynamics plant (preset planar2)".into(),
        ));
    }
    let axis = scenario.environment.axis;
    if axis.index > 1 {
        return Err(SimError::Invalid(
            "planar contact axis must be x (0) or y (1)".into(),
        ));
    }
    let safety = scenario.safety_config();
    let q0 = scenario.initial_joints(&model)?;
    let pose0 = model.forward_kinematics(&q0)?;
    let start_coord = pose0.position[axis.index];
    let start_pos = pose0.position;

    let mut ctx = DynamicSc3 {
        model: model.clone(),
        axis,
        safety: safety.clone(),
        estimator: scenario.estimator_state(true)?,
        bound: scenario.estimator.bound,
        kp: scenario.pd.kp,
        kd: scenario.pd.kd,
        td_substeps: scenario.estimator.substeps,
        infeasible_policy: InfeasiblePolicy::Slack { penalty: scenario.slack_penalty },
        dls_lambda: scenario.gains.dls_lambda,
        filter_enabled: true,
        t: 0.0,
    };

    // Joint-space reference from the task reference through the
    // closed-form inverse kinematics; derivatives by central differences.
    let elbow = scenario.start.elbow_up;
    let joint_ref = |t: f64| -> Result<DVector<f64>, SimError> {
        let (coord, _) = scenario.reference.eval(t.max(0.0), start_coord);
        let mut target = start_pos;
        target[axis.index] = coord;
        planar2_ik(&model, target[0], target[1], elbow)
            .ok_or_else(|| SimError::Invalid(format!("reference out of reach at t = {t}")))
    };

    let dt = scenario.control_dt;
    let dt_sub = dt / scenario.plant_substeps as f64;
    let n_ticks = (scenario.duration / dt).round() as usize;
    let mut env = scenario.environment.clone();
    let mut q = q0;
    let mut qdot = DVector::zeros(model.dof());
    let mut rows = Vec::with_capacity(n_ticks);
    let mut peak = 0.0f64;
    let fd_h = 1e-4;

    for tick in 0..n_ticks {
        let t = tick as f64 * dt;
        let pose = model.forward_kinematics(&q)?;
        let jv = model.position_jacobian(&q)?;
        let xdot = &jv * &qdot;
        let xdot3 = Vector3::new(xdot[0], xdot[1], xdot[2]);
        let (wrench, _) = env.contact_force(&pose, &xdot3);
        let in_contact = env.penetration(&pose.position) > safety.contact_threshold;

        let q_ref = joint_ref(t)?;
        let q_ref_p = joint_ref(t + fd_h)?;
        let q_ref_m = joint_ref((t - fd_h).max(0.0))?;
        let qd_ref = (&q_ref_p - &q_ref_m) / (2.0 * fd_h);
        let qdd_ref = (&q_ref_p - &q_ref * 2.0 + &q_ref_m) / (fd_h * fd_h);

        let state = JointState::new(q.clone(), qdot.clone());
        let step = ctx.step(&state, &wrench, in_contact, &q_ref, &qd_ref, &qdd_ref, dt)?;
        let (ref_pos_axis, _) = scenario.reference.eval(t, start_coord);
        let f_axis = wrench.force[axis.index];
        peak = peak.max(f_axis);
        rows.push(TraceRow {
            t,
            q: q.iter().cloned().collect(),
            u_star: step.tau_star.iter().cloned().collect(),
            u_nom: step.tau_nom.iter().cloned().collect(),
            x: [pose.position[0], pose.position[1], pose.position[2]],
            xdot: [xdot3[0], xdot3[1], xdot3[2]],
            x_ref: ref_pos_axis,
            h_e: wrench.as_vec6(),
            b_fc: step.diagnostics.b,
            sigma: step.diagnostics.sigma,
            z1: step.diagnostics.z1,
            z2: step.diagnostics.z2,
            z3: step.diagnostics.z3,
            active_set: step.diagnostics.active_set.clone(),
            lambda: step.diagnostics.lambda.clone(),
            in_contact,
            violation: f_axis > scenario.safety.f_max * (1.0 + metrics::VIOLATION_TOLERANCE),
            slack_used: step.diagnostics.slack_used,
        });

        // Integrate the joint-space dynamics under the held torque; the
        // environment's internal state advances once per sub-step.
        let tau = &step.tau_star;
        for _ in 0..scenario.plant_substeps {
            let accel = |q_s: &DVector<f64>, qd_s: &DVector<f64>| -> Result<DVector<f64>, SimError> {
                let terms = model.dynamics_terms(&JointState::new(q_s.clone(), qd_s.clone()))?;
                let pose_s = model.forward_kinematics(q_s)?;
                let j_task = model.jacobian(q_s)?;
                let jv_s = model.position_jacobian(q_s)?;
                let xd = &jv_s * qd_s;
                let xd3 = Vector3::new(xd[0], xd[1], xd[2]);
                let (w_s, _) = env.contact_force(&pose_s, &xd3);
                // Reaction on the tip opposes the pressing direction.
                let mut f_task = DVector::zeros(model.task_dim());
                f_task[axis.index] = -axis.direction * w_s.force[axis.index];
                let rhs = tau + j_task.transpose() * f_task - &terms.c_vec - &terms.g_vec;
                terms
                    .m
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| SimError::Invalid("singular inertia matrix".into()))
            };
            let k1q = qdot.clone();
            let k1v = accel(&q, &qdot)?;
            let k2q = &qdot + &k1v * (dt_sub / 2.0);
            let k2v = accel(&(&q + &k1q * (dt_sub / 2.0)), &k2q)?;
            let k3q = &qdot + &k2v * (dt_sub / 2.0);
            let k3v = accel(&(&q + &k2q * (dt_sub / 2.0)), &k3q)?;
            let k4q = &qdot + &k3v * dt_sub;
            let k4v = accel(&(&q + &k3q * dt_sub), &k4q)?;
            q += (k1q + &k2q * 2.0 + &k3q * 2.0 + k4q) * (dt_sub / 6.0);
            qdot += (k1v + &k2v * 2.0 + &k3v * 2.0 + k4v) * (dt_sub / 6.0);

            let pose_s = model.forward_kinematics(&q)?;
            env = env.step_state(&pose_s.position, dt_sub);
            let jv_s = model.position_jacobian(&q)?;
            let xd = &jv_s * &qdot;
            let (w_s, _) =
                env.contact_force(&pose_s, &Vector3::new(xd[0], xd[1], xd[2]));
            peak = peak.max(w_s.force[axis.index]);
        }
    }

    Ok(Trace {
        dt,
        axis,
        f_max: scenario.safety.f_max,
        rows,
        substep_peak_force: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::builtins::builtin_scenarios;

    #[test]
    fn builtin_scenarios_are_valid() {
        let all = builtin_scenarios();
        assert_eq!(all.len(), 9);
        for s in &all {
            s.validate().unwrap();
            let model = s.robot.build().unwrap();
            let q0 = s.initial_joints(&model).unwrap();
            // The start must be separated from the surface.
            let pose = model.forward_kinematics(&q0).unwrap();
            assert!(
                s.environment.penetration(&pose.position) < 0.0,
                "{} starts in contact",
                s.name
            );
        }
    }

    #[test]
    fn free_space_run_never_touches() {
        // Surface far away: no contact, no constraint activity, and the
        // filtered trace equals the unfiltered one bit for bit.
        let mut a = builtin_scenarios()
            .into_iter()
            .find(|s| s.name == "test1_spring")
            .unwrap();
        a.duration = 4.0;
        if let crate::environment::EnvironmentLaw::Spring { rest, .. } = &mut a.environment.law {
            *rest = -10.0;
        }
        let mut b = a.clone();
        b.controller = ControllerKind::Admittance;
        let trace_a = run_scenario(&a).unwrap();
        let trace_b = run_scenario(&b).unwrap();
        for (ra, rb) in trace_a.rows.iter().zip(trace_b.rows.iter()) {
            assert_eq!(ra.h_e[2], 0.0);
            assert!(!ra.in_contact);
            assert_eq!(ra.u_star, rb.u_star, "filtered and nominal diverged in free space");
        }
    }

    #[test]
    fn identical_configs_give_identical_traces() {
        let mut s = builtin_scenarios()
            .into_iter()
            .find(|s| s.name == "test1_spring")
            .unwrap();
        s.duration = 6.0;
        let t1 = run_scenario(&s).unwrap();
        let t2 = run_scenario(&s).unwrap();
        assert_eq!(crate::sim::trace::to_csv(&t1), crate::sim::trace::to_csv(&t2));
    }

    #[test]
    fn square_scenario_cycles_contact() {
        let mut s = builtin_scenarios()
            .into_iter()
            .find(|s| s.name == "test1_spring")
            .unwrap();
        s.duration = 40.0;
        let trace = run_scenario(&s).unwrap();
        let mut entries = 0;
        let mut prev = false;
        for row in &trace.rows {
            if row.in_contact && !prev {
                entries += 1;
            }
            prev = row.in_contact;
        }
        assert!(entries >= 2, "expected >= 2 contact cycles, got {entries}");
    }
}
