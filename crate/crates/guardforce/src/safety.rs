//! Force-limit barrier values and linear constraint assembly.
//!
//! During contact the barrier value per axis is `b = h_max - h_e`; while
//! separated it is zero and no constraint row is emitted. Keeping `b`
//! nonnegative keeps the measured force under its limit. Two constraint
//! levels are assembled, both normalized to `G u <= h` so one QP shape
//! serves each:
//!
//! - velocity level: the decision variable is qdot and the row caps the
//!   prior-model force rate `K_pri * j_press * qdot` by
//!   `-z2 - sigma + l * b`,
//! - torque level: the decision variable is tau and the row caps the
//!   prior-model force acceleration through the task-space dynamics,
//!   with the cascade gains l1, l2 shaping a second-order barrier.

use crate::environment::{ContactAxis, PriorModel, Wrench};
use crate::robot::{JointState, RobotError, RobotModel, TaskSpace};
use crate::Vec6;
use nalgebra::{DMatrix, DVector, RowDVector, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SafetyError {
    #[error("trace too short for finite differences (need >= 3 samples, got {0})")]
    TraceTooShort(usize),
    #[error("active axis {0} has no geometry on this model")]
    UnsupportedAxis(usize),
    #[error(transparent)]
    Robot(#[from] RobotError),
}

/// Force limits, prior model and barrier gains.
#[derive(Debug, Clone)]
pub struct SafetyConfig {
    /// Per-slot force/moment limits; meaningful on active axes only.
    pub h_e_max: Vec6,
    pub prior: PriorModel,
    /// Velocity-level barrier gain (1/s).
    pub l: f64,
    /// Torque-level cascade gains (1/s).
    pub l1: f64,
    pub l2: f64,
    /// Which wrench slots carry a constraint.
    pub active_axes: [bool; 6],
    /// Penetration depth below which contact is treated as separated,
    /// suppressing chattering right at the surface (m).
    pub contact_threshold: f64,
}

impl SafetyConfig {
    /// Single-axis configuration: one force limit on the contact axis.
    pub fn single_axis(axis: &ContactAxis, f_max: f64, prior: PriorModel, l: f64) -> Self {
        let mut h_e_max = Vec6::zeros();
        h_e_max[axis.index] = f_max;
        let mut active_axes = [false; 6];
        active_axes[axis.index] = true;
        Self {
            h_e_max,
            prior,
            l,
            l1: l,
            l2: l,
            active_axes,
            contact_threshold: 1e-5,
        }
    }

    pub fn active_slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.active_axes
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| i)
    }
}

/// Linear constraint rows in <= form over a decision vector.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    /// Source wrench slot of each row.
    pub axes: Vec<usize>,
}

impl ConstraintSet {
    pub fn empty(decision_dim: usize) -> Self {
        Self {
            g: DMatrix::zeros(0, decision_dim),
            h: DVector::zeros(0),
            axes: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.g.nrows() == 0
    }

    fn from_rows(rows: Vec<(usize, RowDVector<f64>, f64)>, decision_dim: usize) -> Self {
        let m = rows.len();
        let mut g = DMatrix::zeros(m, decision_dim);
        let mut h = DVector::zeros(m);
        let mut axes = Vec::with_capacity(m);
        for (i, (slot, row, rhs)) in rows.into_iter().enumerate() {
            g.row_mut(i).copy_from(&row);
            h[i] = rhs;
            axes.push(slot);
        }
        Self { g, h, axes }
    }
}

/// Barrier value per axis: `h_max - h_e` on active axes while in
/// contact, zero otherwise. Inactive slots are masked to zero so the
/// assembly never depends on their values.
pub fn b_fc(cfg: &SafetyConfig, h_e: &Wrench, in_contact: bool) -> Vec6 {
    let mut b = Vec6::zeros();
    if !in_contact {
        return b;
    }
    let h_vec = h_e.as_vec6();
    for slot in cfg.active_slots() {
        b[slot] = cfg.h_e_max[slot] - h_vec[slot];
    }
    b
}

/// Pressing-direction sign for a wrench slot: the configured contact
/// direction on the contact axis, +1 elsewhere.
fn slot_direction(axis: &ContactAxis, slot: usize) -> f64 {
    if slot == axis.index {
        axis.direction
    } else {
        1.0
    }
}

/// Velocity-level constraint rows `K_pri * j_press * qdot <= -z2 - sigma
/// + l * b` per active axis; empty while separated.
pub fn kinematic_constraint(
    cfg: &SafetyConfig,
    model: &RobotModel,
    q: &DVector<f64>,
    axis: &ContactAxis,
    z2: &Vec6,
    sigma: &Vec6,
    b: &Vec6,
    in_contact: bool,
) -> Result<ConstraintSet, SafetyError> {
    let n = model.dof();
    if !in_contact {
        return Ok(ConstraintSet::empty(n));
    }
    let jv = model.position_jacobian(q)?;
    let mut rows = Vec::new();
    for slot in cfg.active_slots() {
        if slot >= 3 {
            return Err(SafetyError::UnsupportedAxis(slot));
        }
        let dir = slot_direction(axis, slot);
        let j_press =
            RowDVector::from_iterator(n, jv.row(slot).iter().map(|v| v * dir));
        let g_row = j_press * cfg.prior.stiffness;
        let rhs = -z2[slot] - sigma[slot] + cfg.l * b[slot];
        rows.push((slot, g_row, rhs));
    }
    Ok(ConstraintSet::from_rows(rows, n))
}

/// Torque-level constraint rows per active axis; empty while separated.
/// The row caps `K_pri * d^T M_x^-1 * tau` by the cascade right-hand
/// side built from the force-rate estimate z2, the force-acceleration
/// estimate z3 and the margin sigma.
#[allow(clippy::too_many_arguments)]
pub fn dynamic_constraint(
    cfg: &SafetyConfig,
    model: &RobotModel,
    state: &JointState,
    h_e: &Wrench,
    z2: &Vec6,
    z3: &Vec6,
    sigma: &Vec6,
    b: &Vec6,
    axis: &ContactAxis,
    in_contact: bool,
    damping: Option<f64>,
) -> Result<ConstraintSet, SafetyError> {
    let n = model.dof();
    if !in_contact {
        return Ok(ConstraintSet::empty(n));
    }
    let cart = model.cartesian_dynamics(state, damping)?;
    let m_x_inv = cart
        .m_x
        .clone()
        .try_inverse()
        .ok_or(RobotError::SingularConfiguration(0.0))?;
    let xdot = &cart.jacobian * &state.qdot;

    // Signed task-space contact force (pressing direction positive).
    let task_dim = model.task_dim();
    let h_vec = h_e.as_vec6();
    let mut h_signed = DVector::zeros(task_dim);
    for slot in 0..task_dim.min(3) {
        h_signed[slot] = slot_direction(axis, slot) * h_vec[slot];
    }
    let bias = cart.jacobian.transpose() * &h_signed + &cart.c_x * &xdot + &cart.g_x;

    let mut rows = Vec::new();
    for slot in cfg.active_slots() {
        let task_row = task_row_for_slot(model, slot)?;
        let dir = slot_direction(axis, slot);
        // d^T M_x^-1 as a row over tau.
        let d_mxinv = RowDVector::from_iterator(
            n,
            m_x_inv.row(task_row).iter().map(|v| v * dir),
        );
        let g_row = &d_mxinv * cfg.prior.stiffness;
        // F term: K_pri * d^T M_x^-1 (J^T h_e + C_x xdot + G_x).
        let f_scalar = cfg.prior.stiffness * dir_dot(&m_x_inv, task_row, dir, &bias);
        let press_rate = dir * xdot[task_row];
        let rhs = f_scalar
            - z3[slot]
            - (cfg.l1 + cfg.l2 + 1.0) * sigma[slot]
            + (cfg.l1 + cfg.l2) * (-cfg.prior.stiffness * press_rate - z2[slot])
            + cfg.l1 * cfg.l2 * b[slot];
        rows.push((slot, g_row, rhs));
    }
    Ok(ConstraintSet::from_rows(rows, n))
}

fn dir_dot(m_x_inv: &DMatrix<f64>, row: usize, dir: f64, v: &DVector<f64>) -> f64 {
    dir * m_x_inv.row(row).dot(&v.transpose())
}

/// Task-coordinate row corresponding to a wrench slot.
fn task_row_for_slot(model: &RobotModel, slot: usize) -> Result<usize, SafetyError> {
    match model.task_space {
        TaskSpace::Spatial6 => Ok(slot),
        TaskSpace::Planar2 => {
            if slot < 2 {
                Ok(slot)
            } else {
                Err(SafetyError::UnsupportedAxis(slot))
            }
        }
    }
}

/// Membership flags of the two start sets required for torque-level
/// forward invariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InitialConditions {
    /// Force within limit at t = 0 (barrier nonnegative).
    pub force_within_limit: bool,
    /// Initial force rate admissible: -K_pri xdot - z2 - sigma
    /// + l1 * b >= 0 on active axes.
    pub rate_within_limit: bool,
}

/// Check the start-state conditions on each active axis. The initial
/// force is reconstructed from the prior prediction plus the measured
/// uncertainty; a nonpositive reconstruction means the tool starts
/// separated, which satisfies both conditions (zero-barrier branch).
pub fn check_initial_conditions(
    cfg: &SafetyConfig,
    axis: &ContactAxis,
    x0: &Vector3<f64>,
    xdot0: &Vector3<f64>,
    delta_e0: &Vec6,
    z2_0: &Vec6,
    sigma0: &Vec6,
) -> InitialConditions {
    let mut c0 = true;
    let mut c1 = true;
    for slot in cfg.active_slots() {
        if slot >= 3 {
            continue;
        }
        let dir = slot_direction(axis, slot);
        let prior_force = cfg.prior.stiffness * dir * (x0[slot] - cfg.prior.rest);
        let h_e0 = prior_force + delta_e0[slot];
        if h_e0 <= 0.0 {
            continue; // separated start: zero-barrier branch holds
        }
        let b0 = cfg.h_e_max[slot] - h_e0;
        if b0 < 0.0 {
            c0 = false;
        }
        let press_rate = dir * xdot0[slot];
        if -cfg.prior.stiffness * press_rate - z2_0[slot] - sigma0[slot] + cfg.l1 * b0 < 0.0 {
            c1 = false;
        }
    }
    InitialConditions { force_within_limit: c0, rate_within_limit: c1 }
}

/// Finite-difference cascade over a uniformly sampled barrier trace:
/// zeta0 = b, zeta1 = d/dt zeta0 + l1 zeta0, zeta2 = d/dt zeta1
/// + l2 zeta1. Used to audit second-order forward invariance.
#[derive(Debug, Clone)]
pub struct ZetaTraces {
    pub zeta0: Vec<f64>,
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
}

pub fn zeta_diagnostics(
    b_trace: &[f64],
    dt: f64,
    l1: f64,
    l2: f64,
) -> Result<ZetaTraces, SafetyError> {
    if b_trace.len() < 3 {
        return Err(SafetyError::TraceTooShort(b_trace.len()));
    }
    let zeta0 = b_trace.to_vec();
    let zeta1: Vec<f64> = derivative(&zeta0, dt)
        .iter()
        .zip(&zeta0)
        .map(|(d, z)| d + l1 * z)
        .collect();
    let zeta2: Vec<f64> = derivative(&zeta1, dt)
        .iter()
        .zip(&zeta1)
        .map(|(d, z)| d + l2 * z)
        .collect();
    Ok(ZetaTraces { zeta0, zeta1, zeta2 })
}

/// Second-order finite differences: central in the interior, one-sided
/// three-point stencils at the ends (exact for linear and quadratic
/// signals).
fn derivative(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
    }
    d
}
