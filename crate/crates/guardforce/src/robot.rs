//! Serial-robot geometry and dynamics.
//!
//! Robots are described by standard (non-modified) Denavit-Hartenberg
//! rows. Two presets are built in: a kinematics-only 6-DOF industrial
//! arm ([`RobotModel::ur3e_kinematic`]) and a two-link planar arm with
//! closed-form inertia, Coriolis and gravity terms ([`RobotModel::planar2`])
//! for torque-level control.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("model `{0}` has no inertial data")]
    MissingDynamics(String),
    #[error("jacobian is singular (min singular value {0:.3e})")]
    SingularConfiguration(f64),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// One standard DH row, SI units.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DhRow {
    /// Link length (m).
    pub a: f64,
    /// Link twist (rad).
    pub alpha: f64,
    /// Link offset (m).
    pub d: f64,
    /// Joint angle offset added to q (rad).
    pub theta_offset: f64,
}

/// Shape of the task space the end effector moves in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskSpace {
    /// Full 6-D: 3 linear + 3 angular velocity rows.
    Spatial6,
    /// Planar position only: x, y rows.
    Planar2,
}

/// Geometric and (optionally) inertial description of a serial arm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotModel {
    pub name: String,
    pub dh_rows: Vec<DhRow>,
    pub task_space: TaskSpace,
    /// Gravity vector in the base frame (m/s^2).
    pub gravity: Vector3<f64>,
    /// Point-mass of each link (kg); present only on dynamics plants.
    pub link_masses: Option<Vec<f64>>,
    /// Distance of each link's mass point from its joint (m).
    pub link_com_offsets: Option<Vec<f64>>,
}

impl RobotModel {
    pub fn new(
        name: impl Into<String>,
        dh_rows: Vec<DhRow>,
        task_space: TaskSpace,
        gravity: Vector3<f64>,
        link_masses: Option<Vec<f64>>,
        link_com_offsets: Option<Vec<f64>>,
    ) -> Result<Self, RobotError> {
        let model = Self {
            name: name.into(),
            dh_rows,
            task_space,
            gravity,
            link_masses,
            link_com_offsets,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), RobotError> {
        let n = self.dh_rows.len();
        if n == 0 || n > 6 {
            return Err(RobotError::InvalidModel(format!(
                "dof must be in 1..=6, got {n}"
            )));
        }
        if let Some(masses) = &self.link_masses {
            if masses.len() != n {
                return Err(RobotError::InvalidModel(
                    "link_masses length must equal dof".into(),
                ));
            }
            if masses.iter().any(|&m| !(m > 0.0)) {
                return Err(RobotError::InvalidModel("link masses must be > 0".into()));
            }
            let offsets = self.link_com_offsets.as_ref().ok_or_else(|| {
                RobotError::InvalidModel("dynamics needs link_com_offsets".into())
            })?;
            if offsets.len() != n {
                return Err(RobotError::InvalidModel(
                    "link_com_offsets length must equal dof".into(),
                ));
            }
        }
        Ok(())
    }

    /// Kinematics-only preset of a 6-DOF industrial arm (UR3e geometry).
    pub fn ur3e_kinematic() -> Self {
        use std::f64::consts::FRAC_PI_2;
        let rows = vec![
            DhRow { a: 0.0, alpha: FRAC_PI_2, d: 0.15185, theta_offset: 0.0 },
            DhRow { a: -0.24355, alpha: 0.0, d: 0.0, theta_offset: 0.0 },
            DhRow { a: -0.2132, alpha: 0.0, d: 0.0, theta_offset: 0.0 },
            DhRow { a: 0.0, alpha: FRAC_PI_2, d: 0.13105, theta_offset: 0.0 },
            DhRow { a: 0.0, alpha: -FRAC_PI_2, d: 0.08535, theta_offset: 0.0 },
            DhRow { a: 0.0, alpha: 0.0, d: 0.0921, theta_offset: 0.0 },
        ];
        Self {
            name: "ur3e_kinematic".into(),
            dh_rows: rows,
            task_space: TaskSpace::Spatial6,
            gravity: Vector3::new(0.0, 0.0, -9.81),
            link_masses: None,
            link_com_offsets: None,
        }
    }

    /// Two-link planar arm with unit links and full closed-form dynamics.
    /// The arm moves in the base x-y plane; gravity acts along -y.
    pub fn planar2() -> Self {
        let rows = vec![
            DhRow { a: 1.0, alpha: 0.0, d: 0.0, theta_offset: 0.0 },
            DhRow { a: 1.0, alpha: 0.0, d: 0.0, theta_offset: 0.0 },
        ];
        Self {
            name: "planar2".into(),
            dh_rows: rows,
            task_space: TaskSpace::Planar2,
            gravity: Vector3::new(0.0, -9.81, 0.0),
            link_masses: Some(vec![1.0, 1.0]),
            link_com_offsets: Some(vec![0.5, 0.5]),
        }
    }

    pub fn dof(&self) -> usize {
        self.dh_rows.len()
    }

    /// Number of task-space velocity coordinates (rows of the Jacobian).
    pub fn task_dim(&self) -> usize {
        match self.task_space {
            TaskSpace::Spatial6 => 6,
            TaskSpace::Planar2 => 2,
        }
    }

    pub fn has_dynamics(&self) -> bool {
        self.link_masses.is_some()
    }

    fn check_q(&self, q: &DVector<f64>) -> Result<(), RobotError> {
        if q.len() != self.dof() {
            return Err(RobotError::DimensionMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Pose of the end effector in the base frame via chained homogeneous
    /// transforms.
    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<Pose, RobotError> {
        self.check_q(q)?;
        let mut t = Matrix4::identity();
        for (row, &qi) in self.dh_rows.iter().zip(q.iter()) {
            t *= dh_transform(row, qi + row.theta_offset);
        }
        Ok(pose_from_homogeneous(&t))
    }

    /// Task Jacobian J with xdot = J qdot: 6 x n for spatial models
    /// (linear rows then angular rows), 2 x n for planar models.
    pub fn jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, RobotError> {
        let (jv, jw) = self.geometric_jacobian(q)?;
        let n = self.dof();
        Ok(match self.task_space {
            TaskSpace::Spatial6 => {
                let mut j = DMatrix::zeros(6, n);
                j.view_mut((0, 0), (3, n)).copy_from(&jv);
                j.view_mut((3, 0), (3, n)).copy_from(&jw);
                j
            }
            TaskSpace::Planar2 => jv.rows(0, 2).into_owned(),
        })
    }

    /// Linear-velocity rows of the Jacobian, always 3 x n (planar models
    /// carry a zero third row).
    pub fn position_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, RobotError> {
        let (jv, _) = self.geometric_jacobian(q)?;
        Ok(jv)
    }

    fn geometric_jacobian(
        &self,
        q: &DVector<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>), RobotError> {
        self.check_q(q)?;
        let n = self.dof();
        // Origins and z axes of every intermediate frame.
        let mut t = Matrix4::identity();
        let mut origins = Vec::with_capacity(n + 1);
        let mut z_axes = Vec::with_capacity(n + 1);
        origins.push(Vector3::zeros());
        z_axes.push(Vector3::z());
        for (row, &qi) in self.dh_rows.iter().zip(q.iter()) {
            t *= dh_transform(row, qi + row.theta_offset);
            origins.push(t.fixed_view::<3, 1>(0, 3).into_owned());
            z_axes.push(t.fixed_view::<3, 1>(0, 2).into_owned());
        }
        let tip = origins[n];
        let mut jv = DMatrix::zeros(3, n);
        let mut jw = DMatrix::zeros(3, n);
        for i in 0..n {
            let z = z_axes[i];
            let lin = z.cross(&(tip - origins[i]));
            jv.column_mut(i).copy_from(&lin);
            jw.column_mut(i).copy_from(&z);
        }
        Ok((jv, jw))
    }

    /// Time derivative of the task Jacobian, by central differences over q.
    pub fn jacobian_dot(
        &self,
        q: &DVector<f64>,
        qdot: &DVector<f64>,
    ) -> Result<DMatrix<f64>, RobotError> {
        self.check_q(q)?;
        self.check_q(qdot)?;
        let h = 1e-6;
        let rows = self.task_dim();
        let n = self.dof();
        let mut jdot = DMatrix::zeros(rows, n);
        for k in 0..n {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += h;
            qm[k] -= h;
            let dj = (self.jacobian(&qp)? - self.jacobian(&qm)?) / (2.0 * h);
            jdot += dj * qdot[k];
        }
        Ok(jdot)
    }

    /// Joint-space inertia, Coriolis and gravity terms. Only plants with
    /// inertial data support this; the planar two-link closed forms are
    /// used (point masses at the COM offsets, Christoffel-form C so that
    /// Mdot - 2C stays skew-symmetric).
    pub fn dynamics_terms(&self, state: &JointState) -> Result<DynamicsTerms, RobotError> {
        self.check_q(&state.q)?;
        self.check_q(&state.qdot)?;
        let masses = self
            .link_masses
            .as_ref()
            .ok_or_else(|| RobotError::MissingDynamics(self.name.clone()))?;
        let offsets = self.link_com_offsets.as_ref().unwrap();
        if self.dof() != 2 {
            return Err(RobotError::MissingDynamics(self.name.clone()));
        }
        let (m1, m2) = (masses[0], masses[1]);
        let (lc1, lc2) = (offsets[0], offsets[1]);
        let l1 = self.dh_rows[0].a;
        let (q1, q2) = (state.q[0], state.q[1]);
        let (qd1, qd2) = (state.qdot[0], state.qdot[1]);
        let (s1, c1) = q1.sin_cos();
        let c2 = q2.cos();
        let s2 = q2.sin();
        let (s12, c12) = (q1 + q2).sin_cos();

        let m11 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * c2);
        let m12 = m2 * (lc2 * lc2 + l1 * lc2 * c2);
        let m22 = m2 * lc2 * lc2;
        let m = DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22]);

        let h = -m2 * l1 * lc2 * s2;
        let c_mat = DMatrix::from_row_slice(2, 2, &[h * qd2, h * (qd1 + qd2), -h * qd1, 0.0]);
        let c_vec = &c_mat * &state.qdot;

        // Gravity torques from the COM Jacobians: G_i = -sum_k m_k g . dp_ck/dq_i
        let g = self.gravity;
        let dpc1_dq1 = Vector3::new(-lc1 * s1, lc1 * c1, 0.0);
        let dpc2_dq1 = Vector3::new(-l1 * s1 - lc2 * s12, l1 * c1 + lc2 * c12, 0.0);
        let dpc2_dq2 = Vector3::new(-lc2 * s12, lc2 * c12, 0.0);
        let g1 = -(m1 * g.dot(&dpc1_dq1) + m2 * g.dot(&dpc2_dq1));
        let g2 = -(m2 * g.dot(&dpc2_dq2));
        let g_vec = DVector::from_vec(vec![g1, g2]);

        Ok(DynamicsTerms { m, c_mat, c_vec, g_vec })
    }

    /// Task-space dynamics terms for torque-level control: with
    /// xdot = J qdot and the joint-space terms M, C, G, the task form is
    /// M_x = M J^-1, C_x = (-M J^-1 Jdot + C) J^-1, G_x = G, so that
    /// M_x xddot + C_x xdot + G_x = tau - J^T h_e.
    ///
    /// Requires a square task Jacobian. Near singularities a damped
    /// inverse is used when `damping` is set; with damping disabled a
    /// [`RobotError::SingularConfiguration`] is returned below the 1e-6
    /// singular-value threshold.
    pub fn cartesian_dynamics(
        &self,
        state: &JointState,
        damping: Option<f64>,
    ) -> Result<CartesianDynamics, RobotError> {
        let terms = self.dynamics_terms(state)?;
        let j = self.jacobian(&state.q)?;
        if j.nrows() != j.ncols() {
            return Err(RobotError::InvalidModel(
                "task-space dynamics needs a square jacobian".into(),
            ));
        }
        let min_sv = min_singular_value(&j);
        let damped = min_sv < 1e-6;
        let j_inv = if damped {
            let lambda = damping.ok_or(RobotError::SingularConfiguration(min_sv))?;
            damped_inverse(&j, lambda)
        } else {
            j.clone()
                .try_inverse()
                .ok_or(RobotError::SingularConfiguration(min_sv))?
        };
        let jdot = self.jacobian_dot(&state.q, &state.qdot)?;
        let m_x = &terms.m * &j_inv;
        let c_x = (-&terms.m * &j_inv * jdot + &terms.c_mat) * &j_inv;
        Ok(CartesianDynamics {
            m_x,
            c_x,
            g_x: terms.g_vec.clone(),
            jacobian: j,
            damped,
        })
    }
}

/// Homogeneous transform of one standard DH row at joint angle theta.
fn dh_transform(row: &DhRow, theta: f64) -> Matrix4<f64> {
    let (st, ct) = theta.sin_cos();
    let (sa, ca) = row.alpha.sin_cos();
    Matrix4::new(
        ct, -st * ca, st * sa, row.a * ct,
        st, ct * ca, -ct * sa, row.a * st,
        0.0, sa, ca, row.d,
        0.0, 0.0, 0.0, 1.0,
    )
}

fn pose_from_homogeneous(t: &Matrix4<f64>) -> Pose {
    Pose {
        position: t.fixed_view::<3, 1>(0, 3).into_owned(),
        rotation: t.fixed_view::<3, 3>(0, 0).into_owned(),
    }
}

/// Smallest singular value of a matrix.
pub fn min_singular_value(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Damped least-squares inverse J^T (J J^T + lambda^2 I)^-1.
pub fn damped_inverse(j: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let m = j.nrows();
    let jjt = j * j.transpose() + DMatrix::identity(m, m) * (lambda * lambda);
    let inv = jjt
        .try_inverse()
        .expect("J J^T + lambda^2 I is positive definite");
    j.transpose() * inv
}

/// Joint position and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub qdot: DVector<f64>,
}

impl JointState {
    pub fn new(q: DVector<f64>, qdot: DVector<f64>) -> Self {
        debug_assert!(q.iter().chain(qdot.iter()).all(|v| v.is_finite()));
        Self { q, qdot }
    }
}

/// End-effector pose: position plus a rotation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Pose {
    /// Build a pose, rejecting rotations that are not orthonormal with
    /// determinant +1 (tolerance 1e-9).
    pub fn new(position: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Self, RobotError> {
        let defect = (rotation.transpose() * rotation - Matrix3::identity()).norm();
        let det = rotation.determinant();
        if defect > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(RobotError::InvalidModel(format!(
                "rotation not orthonormal (defect {defect:.2e}, det {det})"
            )));
        }
        Ok(Self { position, rotation })
    }

    pub fn identity() -> Self {
        Self {
            position: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }
}

/// End-effector twist: linear (m/s) then angular (rad/s) velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

/// Joint-space dynamics terms: M qddot + C qdot + G = tau (+ contact).
#[derive(Debug, Clone)]
pub struct DynamicsTerms {
    /// Symmetric positive definite inertia matrix (n x n).
    pub m: DMatrix<f64>,
    /// Coriolis/centrifugal matrix in Christoffel form (n x n).
    pub c_mat: DMatrix<f64>,
    /// Coriolis/centrifugal force vector C qdot (n).
    pub c_vec: DVector<f64>,
    /// Gravity torque vector (n).
    pub g_vec: DVector<f64>,
}

/// Task-space dynamics terms; `m_x` is not symmetric in general.
#[derive(Debug, Clone)]
pub struct CartesianDynamics {
    pub m_x: DMatrix<f64>,
    pub c_x: DMatrix<f64>,
    pub g_x: DVector<f64>,
    /// The task Jacobian at the evaluated state.
    pub jacobian: DMatrix<f64>,
    /// True when the damped inverse was engaged near a singularity.
    pub damped: bool,
}
