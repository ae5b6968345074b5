//! Independent numerical oracles used by the acceptance suite and the
//! module tests. Nothing here calls the code paths being certified:
//! the grid search evaluates the QP objective directly, the
//! finite-difference checks use only the forward kinematics, and the
//! energy check integrates the raw equations of motion.

use crate::qp::QpProblem;
use crate::robot::{JointState, RobotModel};
use nalgebra::{DMatrix, DVector};

/// Multiresolution grid minimizer of 1/2 ||u - u_nom||^2 over
/// G u <= h. Stages refine around the running argmin down to
/// `final_step`; for these convex problems the argmin of each stage
/// stays within a couple of cells of the true minimizer. Returns None
/// when no feasible grid point exists.
pub fn grid_qp_oracle(p: &QpProblem, final_step: f64) -> Option<DVector<f64>> {
    let n = p.u_nom.len();
    let mut center = DVector::zeros(n);
    let mut best: Option<DVector<f64>> = None;
    // Coarse stage covers the whole region of interest, then two
    // refinements shrink the cell to final_step. Windows are generous
    // multiples of the previous pitch so the minimizer stays bracketed.
    let stages = [(0.2, 5.2), (0.02, 0.6), (final_step, 0.05)];
    for (stage, &(step, half_range)) in stages.iter().enumerate() {
        let points_per_dim = (2.0 * half_range / step).round() as usize + 1;
        let mut best_cost = f64::INFINITY;
        let mut best_point: Option<DVector<f64>> = None;
        let mut idx = vec![0usize; n];
        'grid: loop {
            let mut u = DVector::zeros(n);
            for d in 0..n {
                u[d] = center[d] - half_range + idx[d] as f64 * step;
            }
            let feasible = (0..p.g.nrows()).all(|r| {
                p.g.row(r).iter().zip(u.iter()).map(|(a, b)| a * b).sum::<f64>() <= p.h[r]
            });
            if feasible {
                let cost = (&u - &p.u_nom).norm_squared();
                if cost < best_cost {
                    best_cost = cost;
                    best_point = Some(u);
                }
            }
            // Odometer increment.
            for d in 0..n {
                idx[d] += 1;
                if idx[d] < points_per_dim {
                    continue 'grid;
                }
                idx[d] = 0;
            }
            break;
        }
        match best_point {
            Some(u) => {
                center = u.clone();
                best = Some(u);
            }
            None if stage == 0 => return None,
            None => return best,
        }
    }
    best
}

/// Largest |J[r,k] - central difference| over the position rows.
pub fn max_jacobian_fd_error(model: &RobotModel, q: &DVector<f64>) -> f64 {
    let j = model.position_jacobian(q).expect("valid q");
    let h = 1e-6;
    let mut max_err = 0.0f64;
    for k in 0..model.dof() {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[k] += h;
        qm[k] -= h;
        let fd = (model.forward_kinematics(&qp).unwrap().position
            - model.forward_kinematics(&qm).unwrap().position)
            / (2.0 * h);
        for r in 0..3 {
            max_err = max_err.max((j[(r, k)] - fd[r]).abs());
        }
    }
    max_err
}

/// Norm of the symmetric part of Mdot - 2C, with Mdot built from
/// central differences of the inertia matrix along qdot.
pub fn mdot_minus_2c_symmetric_part(
    model: &RobotModel,
    q: &DVector<f64>,
    qdot: &DVector<f64>,
) -> f64 {
    let h = 1e-6;
    let n = model.dof();
    let state = JointState::new(q.clone(), qdot.clone());
    let terms = model.dynamics_terms(&state).expect("dynamics plant");
    let mut mdot = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[k] += h;
        qm[k] -= h;
        let mp = model
            .dynamics_terms(&JointState::new(qp, qdot.clone()))
            .unwrap()
            .m;
        let mm = model
            .dynamics_terms(&JointState::new(qm, qdot.clone()))
            .unwrap()
            .m;
        mdot += (mp - mm) * (qdot[k] / (2.0 * h));
    }
    let skew = &mdot - 2.0 * &terms.c_mat;
    (&skew + skew.transpose()).norm()
}

/// Kinetic-energy drift of the planar arm in free motion (no torque, no
/// gravity) over one second of RK4 at 1e-4 s.
pub fn free_motion_energy_drift() -> f64 {
    let mut model = RobotModel::planar2();
    model.gravity = nalgebra::Vector3::zeros();
    let mut q = DVector::from_vec(vec![0.4, -0.9]);
    let mut qdot = DVector::from_vec(vec![0.7, -0.4]);
    let energy = |q: &DVector<f64>, qd: &DVector<f64>| {
        let m = model
            .dynamics_terms(&JointState::new(q.clone(), qd.clone()))
            .unwrap()
            .m;
        0.5 * qd.dot(&(&m * qd))
    };
    let accel = |q: &DVector<f64>, qd: &DVector<f64>| {
        let t = model
            .dynamics_terms(&JointState::new(q.clone(), qd.clone()))
            .unwrap();
        t.m.lu().solve(&(-&t.c_vec - &t.g_vec)).unwrap()
    };
    let e0 = energy(&q, &qdot);
    let dt = 1e-4;
    for _ in 0..10_000 {
        let k1q = qdot.clone();
        let k1v = accel(&q, &qdot);
        let k2q = &qdot + &k1v * (dt / 2.0);
        let k2v = accel(&(&q + &k1q * (dt / 2.0)), &k2q);
        let k3q = &qdot + &k2v * (dt / 2.0);
        let k3v = accel(&(&q + &k2q * (dt / 2.0)), &k3q);
        let k4q = &qdot + &k3v * dt;
        let k4v = accel(&(&q + &k3q * dt), &k4q);
        q += (k1q + &k2q * 2.0 + &k3q * 2.0 + k4q) * (dt / 6.0);
        qdot += (k1v + &k2v * 2.0 + &k3v * 2.0 + k4v) * (dt / 6.0);
    }
    (energy(&q, &qdot) - e0).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn grid_oracle_matches_hand_solution() {
        // Project (1, 1) onto u <= 0 on both axes: optimum (0, 0).
        let p = QpProblem::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        let u = grid_qp_oracle(&p, 1e-3).unwrap();
        assert_abs_diff_eq!(u[0], 0.0, epsilon = 2e-3);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 2e-3);
    }

    #[test]
    fn grid_oracle_halfspace() {
        // 200 u <= 2 from 0.05: optimum 0.01.
        let p = QpProblem::new(
            DVector::from_vec(vec![0.05]),
            DMatrix::from_row_slice(1, 1, &[200.0]),
            DVector::from_vec(vec![2.0]),
        )
        .unwrap();
        let u = grid_qp_oracle(&p, 1e-3).unwrap();
        assert_abs_diff_eq!(u[0], 0.01, epsilon = 2e-3);
    }
}
