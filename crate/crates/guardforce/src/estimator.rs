//! Tracking differentiators and their estimation error bounds.
//!
//! A tracking differentiator is a linear observer fed the measured
//! lumped uncertainty `delta_e`; its states estimate the signal and its
//! derivatives. The two-state form (z1 ~ delta_e, z2 ~ d/dt delta_e)
//! serves velocity-level control; the three-state cascade form adds
//! z3 ~ d^2/dt^2 delta_e for torque-level control.
//!
//! The observer error obeys a linear system Zdot = A Z + d. Whenever the
//! symmetric part of A is negative definite, a Lyapunov argument yields
//! the closed-form envelope [`error_bound`]; when it is not (which is the
//! case for every gain pair of the plain two-state form in the 2-norm),
//! [`compute_alpha`] reports failure and callers fall back to a constant
//! bound supplied per scenario.

use crate::Vec6;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("symmetric part of the error matrix is not negative definite (max eigenvalue {0:.3e})")]
    NotNegativeDefinite(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Observer state plus its diagonal gains (stored as the diagonals).
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    /// Estimate of the lumped uncertainty (N per axis).
    pub z1: Vec6,
    /// Estimate of its first derivative (N/s).
    pub z2: Vec6,
    /// Estimate of its second derivative (N/s^2); three-state form only.
    pub z3: Option<Vec6>,
    pub l1: Vec6,
    pub l2: Vec6,
    pub l3: Option<Vec6>,
}

impl EstimatorState {
    pub fn order2(l1: Vec6, l2: Vec6) -> Result<Self, EstimatorError> {
        check_gains(&l1)?;
        check_gains(&l2)?;
        Ok(Self { z1: Vec6::zeros(), z2: Vec6::zeros(), z3: None, l1, l2, l3: None })
    }

    pub fn order3(l1: Vec6, l2: Vec6, l3: Vec6) -> Result<Self, EstimatorError> {
        check_gains(&l1)?;
        check_gains(&l2)?;
        check_gains(&l3)?;
        Ok(Self {
            z1: Vec6::zeros(),
            z2: Vec6::zeros(),
            z3: Some(Vec6::zeros()),
            l1,
            l2,
            l3: Some(l3),
        })
    }

    /// Two-state observer with uniform diagonal gains l1*I, l2*I.
    pub fn uniform_order2(l1: f64, l2: f64) -> Result<Self, EstimatorError> {
        Self::order2(Vec6::repeat(l1), Vec6::repeat(l2))
    }

    /// Three-state observer with uniform diagonal gains.
    pub fn uniform_order3(l1: f64, l2: f64, l3: f64) -> Result<Self, EstimatorError> {
        Self::order3(Vec6::repeat(l1), Vec6::repeat(l2), Vec6::repeat(l3))
    }

    pub fn order(&self) -> usize {
        if self.z3.is_some() {
            3
        } else {
            2
        }
    }

    fn derivative(&self, delta_e: &Vec6) -> (Vec6, Vec6, Option<Vec6>) {
        let e = delta_e - self.z1;
        let innov1 = self.l1.component_mul(&e);
        let innov2 = self.l2.component_mul(&e);
        match (&self.z3, &self.l3) {
            (Some(z3), Some(l3)) => {
                (self.z2 + innov1, z3 + innov2, Some(l3.component_mul(&e)))
            }
            _ => (self.z2 + innov1, innov2, None),
        }
    }

    /// One RK4 step of the observer, holding the measured input constant
    /// over the step.
    pub fn td_step(&self, delta_e: &Vec6, dt: f64) -> Self {
        debug_assert!(dt > 0.0);
        let eval = |z1: &Vec6, z2: &Vec6, z3: &Option<Vec6>| {
            let probe = Self {
                z1: *z1,
                z2: *z2,
                z3: *z3,
                l1: self.l1,
                l2: self.l2,
                l3: self.l3,
            };
            probe.derivative(delta_e)
        };
        let (k1a, k1b, k1c) = eval(&self.z1, &self.z2, &self.z3);
        let half = dt / 2.0;
        let (k2a, k2b, k2c) = eval(
            &(self.z1 + k1a * half),
            &(self.z2 + k1b * half),
            &self.z3.map(|z| z + k1c.unwrap() * half),
        );
        let (k3a, k3b, k3c) = eval(
            &(self.z1 + k2a * half),
            &(self.z2 + k2b * half),
            &self.z3.map(|z| z + k2c.unwrap() * half),
        );
        let (k4a, k4b, k4c) = eval(
            &(self.z1 + k3a * dt),
            &(self.z2 + k3b * dt),
            &self.z3.map(|z| z + k3c.unwrap() * dt),
        );
        let sixth = dt / 6.0;
        Self {
            z1: self.z1 + (k1a + k2a * 2.0 + k3a * 2.0 + k4a) * sixth,
            z2: self.z2 + (k1b + k2b * 2.0 + k3b * 2.0 + k4b) * sixth,
            z3: self.z3.map(|z| {
                z + (k1c.unwrap() + k2c.unwrap() * 2.0 + k3c.unwrap() * 2.0 + k4c.unwrap())
                    * sixth
            }),
            l1: self.l1,
            l2: self.l2,
            l3: self.l3,
        }
    }
}

fn check_gains(g: &Vec6) -> Result<(), EstimatorError> {
    if g.iter().any(|&v| !(v > 0.0)) {
        return Err(EstimatorError::InvalidParams(
            "observer gains must be positive".into(),
        ));
    }
    Ok(())
}

/// Error matrix of the observer: block companion form with -L1 stacked
/// over -L2 (and -L3) in the first block column and identity couplings
/// above the diagonal.
pub fn error_matrix(l1: &Vec6, l2: &Vec6, l3: Option<&Vec6>) -> DMatrix<f64> {
    let order = if l3.is_some() { 3 } else { 2 };
    let n = 6 * order;
    let mut a = DMatrix::zeros(n, n);
    let gains = [Some(l1), Some(l2), l3];
    for (block, gain) in gains.iter().take(order).enumerate() {
        let gain = gain.unwrap();
        for i in 0..6 {
            a[(block * 6 + i, i)] = -gain[i];
            if block + 1 < order {
                a[(block * 6 + i, (block + 1) * 6 + i)] = 1.0;
            }
        }
    }
    a
}

/// Decay rate alpha = -lambda_max((A + A^T)/2) of a stable-by-symmetric-part
/// matrix. Fails when the symmetric part is not negative definite, in
/// which case no quadratic decay rate exists in the 2-norm and callers
/// must use a constant error bound instead.
pub fn alpha_from_matrix(a: &DMatrix<f64>) -> Result<f64, EstimatorError> {
    let sym = (a + a.transpose()) * 0.5;
    let lambda_max = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    if lambda_max >= 0.0 {
        return Err(EstimatorError::NotNegativeDefinite(lambda_max));
    }
    Ok(-lambda_max)
}

/// Decay rate for the observer error matrix built from the given gains.
pub fn compute_alpha(
    l1: &Vec6,
    l2: &Vec6,
    l3: Option<&Vec6>,
) -> Result<f64, EstimatorError> {
    check_gains(l1)?;
    check_gains(l2)?;
    if let Some(l3) = l3 {
        check_gains(l3)?;
    }
    alpha_from_matrix(&error_matrix(l1, l2, l3))
}

/// Parameters of the analytic estimation error envelope.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorBoundParams {
    /// Quadratic decay rate of the error system (1/s).
    pub alpha: f64,
    /// Young-inequality split, 0 < epsilon < 2 alpha (1/s).
    pub epsilon: f64,
    /// Bound on the driving derivative of the estimated signal.
    pub beta: f64,
    /// Norm of the initial estimation error.
    pub z0_norm: f64,
}

/// How the estimation error magnitude is bounded over time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BoundMode {
    /// Closed-form decaying envelope from the Lyapunov analysis.
    Analytic(ErrorBoundParams),
    /// Constant bound sigma_bar supplied per scenario.
    Constant { sigma_bar: f64 },
}

/// Estimation error envelope at time `t`:
/// sqrt(z0^2 e^{-a t} + (1 - e^{-a t}) b) with a = 2(alpha - epsilon/2)
/// and b = beta^2 / (2 alpha epsilon - epsilon^2). Constant mode returns
/// sigma_bar unchanged.
pub fn error_bound(mode: &BoundMode, t: f64) -> Result<f64, EstimatorError> {
    match mode {
        BoundMode::Constant { sigma_bar } => {
            if *sigma_bar < 0.0 {
                return Err(EstimatorError::InvalidParams("sigma_bar must be >= 0".into()));
            }
            Ok(*sigma_bar)
        }
        BoundMode::Analytic(p) => {
            if !(p.epsilon > 0.0 && p.epsilon < 2.0 * p.alpha) {
                return Err(EstimatorError::InvalidParams(format!(
                    "need 0 < epsilon < 2 alpha, got epsilon {} alpha {}",
                    p.epsilon, p.alpha
                )));
            }
            if p.beta < 0.0 || p.z0_norm < 0.0 {
                return Err(EstimatorError::InvalidParams(
                    "beta and z0_norm must be >= 0".into(),
                ));
            }
            let a = 2.0 * (p.alpha - p.epsilon / 2.0);
            let b = p.beta * p.beta / (2.0 * p.alpha * p.epsilon - p.epsilon * p.epsilon);
            let decay = (-a * t).exp();
            Ok((p.z0_norm * p.z0_norm * decay + (1.0 - decay) * b).sqrt())
        }
    }
}

/// Per-axis margin vector: the scalar envelope replicated on every slot.
pub fn sigma_vector(z_bar: f64) -> Vec6 {
    debug_assert!(z_bar >= 0.0);
    Vec6::repeat(z_bar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equilibrium_at_zero() {
        let state = EstimatorState::uniform_order2(110.0, 3000.0).unwrap();
        let next = state.td_step(&Vec6::zeros(), 1e-3);
        assert_eq!(next.z1, Vec6::zeros());
        assert_eq!(next.z2, Vec6::zeros());
    }

    #[test]
    fn constant_input_steady_state() {
        let mut state = EstimatorState::uniform_order2(110.0, 3000.0).unwrap();
        let c = Vec6::repeat(2.5);
        for _ in 0..20_000 {
            state = state.td_step(&c, 1e-4);
        }
        assert!((state.z1 - c).norm() < 1e-6, "z1 residual {}", (state.z1 - c).norm());
        assert!(state.z2.norm() < 1e-6, "z2 residual {}", state.z2.norm());
    }

    #[test]
    fn ramp_input_tracks_slope() {
        let mut state = EstimatorState::uniform_order2(110.0, 3000.0).unwrap();
        let r = 0.8;
        let dt = 1e-4;
        for k in 0..30_000 {
            let t = k as f64 * dt;
            state = state.td_step(&Vec6::repeat(r * t), dt);
        }
        for i in 0..6 {
            assert_abs_diff_eq!(state.z2[i], r, epsilon = 1e-4);
        }
    }

    #[test]
    fn order3_tracks_quadratic() {
        let mut state = EstimatorState::uniform_order3(120.0, 4700.0, 60_000.0).unwrap();
        let accel = 1.5;
        let dt = 1e-4;
        for k in 0..50_000 {
            let t = k as f64 * dt;
            state = state.td_step(&Vec6::repeat(0.5 * accel * t * t), dt);
        }
        let z3 = state.z3.unwrap();
        for i in 0..6 {
            assert_abs_diff_eq!(z3[i], accel, epsilon = 1e-3);
        }
    }

    #[test]
    fn alpha_fails_for_marginal_gains() {
        // Symmetric part [[-3, 0], [0, 0]] per channel: max eigenvalue 0.
        let err = compute_alpha(&Vec6::repeat(3.0), &Vec6::repeat(1.0), None);
        assert!(matches!(err, Err(EstimatorError::NotNegativeDefinite(_))));
    }

    #[test]
    fn alpha_fails_for_production_gains() {
        // The gains used in the built-in scenarios: the symmetric part
        // is indefinite, so the analytic envelope is unavailable and the
        // constant bound mode must be used.
        let err = compute_alpha(&Vec6::repeat(110.0), &Vec6::repeat(3000.0), None);
        assert!(matches!(err, Err(EstimatorError::NotNegativeDefinite(_))));
    }

    #[test]
    fn alpha_from_negative_definite_symmetric_part() {
        // Symmetric part exactly -I: alpha = 1.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.5, -0.5, -1.0]);
        assert_abs_diff_eq!(alpha_from_matrix(&a).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_at_zero_is_initial_norm() {
        let mode = BoundMode::Analytic(ErrorBoundParams {
            alpha: 2.0,
            epsilon: 1.0,
            beta: 0.5,
            z0_norm: 3.0,
        });
        assert_abs_diff_eq!(error_bound(&mode, 0.0).unwrap(), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn bound_limit_is_sqrt_b() {
        let p = ErrorBoundParams { alpha: 2.0, epsilon: 1.0, beta: 0.5, z0_norm: 3.0 };
        let mode = BoundMode::Analytic(p);
        let b = p.beta * p.beta / (2.0 * p.alpha * p.epsilon - p.epsilon * p.epsilon);
        assert_abs_diff_eq!(error_bound(&mode, 1e6).unwrap(), b.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn bound_strictly_decreasing_when_started_above_floor() {
        let mode = BoundMode::Analytic(ErrorBoundParams {
            alpha: 2.0,
            epsilon: 1.0,
            beta: 0.5,
            z0_norm: 3.0,
        });
        let mut prev = error_bound(&mode, 0.0).unwrap();
        for k in 1..200 {
            let v = error_bound(&mode, 0.05 * k as f64).unwrap();
            assert!(v < prev, "envelope not decreasing at step {k}");
            prev = v;
        }
    }

    #[test]
    fn invalid_epsilon_rejected() {
        let mode = BoundMode::Analytic(ErrorBoundParams {
            alpha: 1.0,
            epsilon: 2.0,
            beta: 0.5,
            z0_norm: 0.0,
        });
        assert!(error_bound(&mode, 1.0).is_err());
    }

    #[test]
    fn sigma_vector_is_constant() {
        assert_eq!(sigma_vector(0.0), Vec6::zeros());
        assert_eq!(sigma_vector(0.5), Vec6::repeat(0.5));
        assert_eq!(sigma_vector(1.0), Vec6::repeat(1.0));
    }

    #[test]
    fn superposition_holds() {
        let dt = 1e-3;
        let base = EstimatorState::uniform_order2(110.0, 3000.0).unwrap();
        let input_a = |t: f64| Vec6::repeat((2.0 * t).sin());
        let input_b = |t: f64| Vec6::repeat(0.7 * t);
        let mut sa = base.clone();
        let mut sb = base.clone();
        let mut sab = base.clone();
        for k in 0..2000 {
            let t = k as f64 * dt;
            sa = sa.td_step(&input_a(t), dt);
            sb = sb.td_step(&input_b(t), dt);
            sab = sab.td_step(&(input_a(t) + input_b(t)), dt);
        }
        assert!((sab.z1 - (sa.z1 + sb.z1)).norm() < 1e-10);
        assert!((sab.z2 - (sa.z2 + sb.z2)).norm() < 1e-10);
    }

    #[test]
    fn estimates_stay_finite_over_long_runs() {
        let mut state = EstimatorState::uniform_order2(110.0, 3000.0).unwrap();
        let dt = 1e-3;
        for k in 0..60_000 {
            let t = k as f64 * dt;
            let input = Vec6::repeat(3.0 * (0.5 * t).sin() + 0.2 * (7.0 * t).cos());
            state = state.td_step(&input, dt);
            assert!(state.z1.iter().all(|v| v.is_finite()));
            assert!(state.z2.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn simulated_error_stays_under_envelope() {
        // Synthetic error system zdot = A z + d with the symmetric part
        // of A negative definite and |d| <= beta: the simulated error
        // norm must stay below the closed-form envelope.
        let a = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, -1.0, -2.0]);
        let alpha = alpha_from_matrix(&a).unwrap();
        let beta: f64 = 0.4;
        let epsilon = alpha; // any value in (0, 2 alpha)
        let z0 = nalgebra::DVector::from_vec(vec![1.2, -0.7]);
        let mode = BoundMode::Analytic(ErrorBoundParams {
            alpha,
            epsilon,
            beta,
            z0_norm: z0.norm(),
        });
        let dt = 1e-4;
        let mut z = z0;
        for k in 0..100_000 {
            let t = k as f64 * dt;
            let d = nalgebra::DVector::from_vec(vec![0.0, beta * (3.0 * t).sin()]);
            // RK4 on the linear system with the disturbance frozen per step.
            let f = |z: &nalgebra::DVector<f64>| &a * z + &d;
            let k1 = f(&z);
            let k2 = f(&(&z + &k1 * (dt / 2.0)));
            let k3 = f(&(&z + &k2 * (dt / 2.0)));
            let k4 = f(&(&z + &k3 * dt));
            z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            let envelope = error_bound(&mode, t + dt).unwrap();
            assert!(
                z.norm() <= envelope + 1e-6,
                "envelope violated at t = {}: {} > {}",
                t + dt,
                z.norm(),
                envelope
            );
        }
    }
}
