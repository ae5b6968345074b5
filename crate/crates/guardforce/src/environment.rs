//! Ground-truth contact laws and the controller-side uncertainty signal.
//!
//! The environment is a surface the end effector presses into along a
//! single axis. Its true stiffness, damping and rest position are hidden
//! from the controller, which only sees the measured [`Wrench`]. Three
//! laws are available: a pure spring, a Kelvin-Voigt spring-damper, and
//! a spring in series with a Kelvin-Voigt element (stress relaxation).
//!
//! Sign conventions, used everywhere downstream:
//!
//! - the contact axis stores the *pressing direction* (default -z:
//!   pressing downward onto a horizontal surface),
//! - penetration is positive past the rest coordinate,
//! - the reported wrench holds the compression magnitude (>= 0) in the
//!   contact-axis slot, so force limits and barrier values read the way
//!   force plots do.

use crate::robot::Pose;
use crate::Vec6;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// Single-axis contact geometry: pressing direction along one base axis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContactAxis {
    /// Base-frame axis index (0 = x, 1 = y, 2 = z).
    pub index: usize,
    /// +1.0 when pressing along the positive axis, -1.0 otherwise.
    pub direction: f64,
}

impl Default for ContactAxis {
    fn default() -> Self {
        // Pressing down onto a horizontal surface.
        Self { index: 2, direction: -1.0 }
    }
}

impl ContactAxis {
    /// Penetration depth of `position` past the surface coordinate
    /// `rest`; positive when pressed into the material.
    pub fn penetration(&self, position: &Vector3<f64>, rest: f64) -> f64 {
        self.direction * (position[self.index] - rest)
    }

    /// Rate of change of the penetration depth.
    pub fn penetration_rate(&self, velocity: &Vector3<f64>) -> f64 {
        self.direction * velocity[self.index]
    }

    /// Compression magnitude stored at this axis' slot of a wrench.
    pub fn force_of(&self, w: &Wrench) -> f64 {
        w.force[self.index]
    }

    /// Row of the pressing-direction coordinate in a 3 x n position
    /// Jacobian: d/dt (penetration) = row . qdot.
    pub fn project_jacobian(&self, position_jacobian: &nalgebra::DMatrix<f64>) -> nalgebra::RowDVector<f64> {
        nalgebra::RowDVector::from_iterator(
            position_jacobian.ncols(),
            position_jacobian
                .row(self.index)
                .iter()
                .map(|v| v * self.direction),
        )
    }
}

/// Interaction force and moment at the end effector. The contact-axis
/// slot of `force` carries the compression magnitude (never negative for
/// the built-in laws: contacts push, they do not pull).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self { force: Vector3::zeros(), moment: Vector3::zeros() }
    }

    pub fn as_vec6(&self) -> Vec6 {
        Vec6::from_iterator(self.force.iter().chain(self.moment.iter()).cloned())
    }

    pub fn from_axis_value(axis: &ContactAxis, value: f64) -> Self {
        let mut w = Self::zero();
        w.force[axis.index] = value;
        w
    }
}

/// Contact law with its hidden true parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentLaw {
    /// Pure spring: F = K_e * penetration.
    Spring {
        /// True stiffness (N/m).
        stiffness: f64,
        /// True rest coordinate of the surface along the contact axis (m).
        rest: f64,
    },
    /// Spring-damper in parallel: F = K_e * p + D_e * pdot, clamped at
    /// zero from below (a sponge cannot pull the tool back).
    KelvinVoigt {
        stiffness: f64,
        /// Damping (N s/m).
        damping: f64,
        rest: f64,
        /// Clamp negative forces to zero (on unless studying retreat).
        #[serde(default = "default_true")]
        clamp: bool,
    },
    /// Spring in series with a Kelvin-Voigt element. The sponge
    /// deflection d_s relaxes with ddot_s = (k_spring (p - d_s)
    /// - k_sponge d_s) / d_sponge; the transmitted force is
    /// k_spring (p - d_s).
    SeriesHybrid {
        k_spring: f64,
        k_sponge: f64,
        d_sponge: f64,
        rest: f64,
        /// Internal sponge deflection (m); advanced by [`EnvironmentModel::step_state`].
        #[serde(default)]
        sponge_deflection: f64,
    },
}

fn default_true() -> bool {
    true
}

/// An environment instance: one law acting along one contact axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentModel {
    #[serde(flatten)]
    pub law: EnvironmentLaw,
    #[serde(default)]
    pub axis: ContactAxis,
}

impl EnvironmentModel {
    pub fn rest(&self) -> f64 {
        match self.law {
            EnvironmentLaw::Spring { rest, .. }
            | EnvironmentLaw::KelvinVoigt { rest, .. }
            | EnvironmentLaw::SeriesHybrid { rest, .. } => rest,
        }
    }

    pub fn penetration(&self, position: &Vector3<f64>) -> f64 {
        self.axis.penetration(position, self.rest())
    }

    /// Contact wrench at the given end-effector state, plus the contact
    /// flag. Zero wrench and `false` when separated (penetration <= 0).
    pub fn contact_force(&self, pose: &Pose, velocity: &Vector3<f64>) -> (Wrench, bool) {
        let p = self.penetration(&pose.position);
        if p <= 0.0 {
            return (Wrench::zero(), false);
        }
        let pdot = self.axis.penetration_rate(velocity);
        let magnitude = match &self.law {
            EnvironmentLaw::Spring { stiffness, .. } => stiffness * p,
            EnvironmentLaw::KelvinVoigt { stiffness, damping, clamp, .. } => {
                let raw = stiffness * p + damping * pdot;
                if *clamp {
                    raw.max(0.0)
                } else {
                    raw
                }
            }
            EnvironmentLaw::SeriesHybrid { k_spring, sponge_deflection, .. } => {
                (k_spring * (p - sponge_deflection)).max(0.0)
            }
        };
        (Wrench::from_axis_value(&self.axis, magnitude), true)
    }

    /// Advance internal environment state by `dt` (explicit Euler on the
    /// sponge deflection). Stateless laws are returned unchanged.
    pub fn step_state(mut self, position: &Vector3<f64>, dt: f64) -> Self {
        if let EnvironmentLaw::SeriesHybrid {
            k_spring,
            k_sponge,
            d_sponge,
            rest,
            ref mut sponge_deflection,
        } = self.law
        {
            if dt > 0.0 {
                let p = self.axis.penetration(position, rest).max(0.0);
                let rate = (k_spring * (p - *sponge_deflection) - k_sponge * *sponge_deflection)
                    / d_sponge;
                *sponge_deflection += rate * dt;
            }
        }
        self
    }
}

/// The controller's assumed environment: stiffness and rest coordinate
/// along the contact axis, generally wrong on purpose.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PriorModel {
    /// Assumed stiffness (N/m), >= 0.
    pub stiffness: f64,
    /// Assumed rest coordinate of the surface (m).
    pub rest: f64,
}

impl PriorModel {
    /// Deflection past the assumed rest coordinate (signed; negative
    /// above the assumed surface).
    pub fn deflection(&self, axis: &ContactAxis, position: &Vector3<f64>) -> f64 {
        axis.penetration(position, self.rest)
    }

    /// Force the prior spring predicts at this position (signed).
    pub fn predicted_force(&self, axis: &ContactAxis, position: &Vector3<f64>) -> f64 {
        self.stiffness * self.deflection(axis, position)
    }
}

/// Lumped uncertainty: measured wrench minus the prior-spring
/// prediction. The contact-axis slot is the only populated force slot in
/// single-axis scenarios; consumers mask the value with the contact flag
/// when the tool is separated.
pub fn lumped_uncertainty(
    measured: &Wrench,
    position: &Vector3<f64>,
    axis: &ContactAxis,
    prior: &PriorModel,
) -> Vec6 {
    let mut delta = measured.as_vec6();
    delta[axis.index] -= prior.predicted_force(axis, position);
    delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn pose_at_z(z: f64) -> Pose {
        Pose { position: Vector3::new(0.0, 0.0, z), rotation: Matrix3::identity() }
    }

    fn spring(k: f64, rest: f64) -> EnvironmentModel {
        EnvironmentModel {
            law: EnvironmentLaw::Spring { stiffness: k, rest },
            axis: ContactAxis::default(),
        }
    }

    #[test]
    fn separated_gives_zero_wrench() {
        let env = spring(200.0, 0.011);
        let (w, in_contact) = env.contact_force(&pose_at_z(0.02), &Vector3::zeros());
        assert!(!in_contact);
        assert_eq!(w, Wrench::zero());
    }

    #[test]
    fn spring_force_scalar_evaluation() {
        let env = spring(200.0, 0.01);
        // 0.01 m penetration below the rest coordinate.
        let (w, in_contact) = env.contact_force(&pose_at_z(0.0), &Vector3::zeros());
        assert!(in_contact);
        assert_abs_diff_eq!(w.force[2], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn kelvin_voigt_clamps_adhesion() {
        let env = EnvironmentModel {
            law: EnvironmentLaw::KelvinVoigt {
                stiffness: 200.0,
                damping: 10.0,
                rest: 0.01,
                clamp: true,
            },
            axis: ContactAxis::default(),
        };
        // Penetrated 0.01 m but retreating at 0.3 m/s: raw force
        // 200*0.01 + 10*(-0.3) = -1 N clamps to zero.
        let (w, in_contact) = env.contact_force(&pose_at_z(0.0), &Vector3::new(0.0, 0.0, 0.3));
        assert!(in_contact);
        assert_abs_diff_eq!(w.force[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn spring_variant_state_step_is_identity() {
        let env = spring(200.0, 0.0);
        let stepped = env.clone().step_state(&Vector3::new(0.0, 0.0, -0.01), 1e-3);
        assert_abs_diff_eq!(
            stepped.contact_force(&pose_at_z(-0.01), &Vector3::zeros()).0.force[2],
            env.contact_force(&pose_at_z(-0.01), &Vector3::zeros()).0.force[2],
            epsilon = 0.0
        );
    }

    #[test]
    fn series_hybrid_converges_to_series_stiffness() {
        let (ks, ksp, d) = (500.0, 300.0, 30.0);
        let mut env = EnvironmentModel {
            law: EnvironmentLaw::SeriesHybrid {
                k_spring: ks,
                k_sponge: ksp,
                d_sponge: d,
                rest: 0.0,
                sponge_deflection: 0.0,
            },
            axis: ContactAxis::default(),
        };
        let p = 0.01;
        let pos = Vector3::new(0.0, 0.0, -p);
        for _ in 0..200_000 {
            env = env.step_state(&pos, 1e-4);
        }
        let d_eq = ks * p / (ks + ksp);
        if let EnvironmentLaw::SeriesHybrid { sponge_deflection, .. } = env.law {
            assert_abs_diff_eq!(sponge_deflection, d_eq, epsilon = 1e-9);
        }
        let (w, _) = env.contact_force(&pose_at_z(-p), &Vector3::zeros());
        assert_abs_diff_eq!(w.force[2], ks * ksp / (ks + ksp) * p, epsilon = 1e-6);
    }

    #[test]
    fn zero_dt_leaves_state_unchanged() {
        let env = EnvironmentModel {
            law: EnvironmentLaw::SeriesHybrid {
                k_spring: 500.0,
                k_sponge: 300.0,
                d_sponge: 30.0,
                rest: 0.0,
                sponge_deflection: 0.002,
            },
            axis: ContactAxis::default(),
        };
        let stepped = env.clone().step_state(&Vector3::new(0.0, 0.0, -0.01), 0.0);
        if let (
            EnvironmentLaw::SeriesHybrid { sponge_deflection: a, .. },
            EnvironmentLaw::SeriesHybrid { sponge_deflection: b, .. },
        ) = (&env.law, &stepped.law)
        {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn series_force_never_exceeds_pure_spring() {
        let mut env = EnvironmentModel {
            law: EnvironmentLaw::SeriesHybrid {
                k_spring: 500.0,
                k_sponge: 300.0,
                d_sponge: 30.0,
                rest: 0.0,
                sponge_deflection: 0.0,
            },
            axis: ContactAxis::default(),
        };
        // Held penetration from rest: series compliance is softer.
        let p = 0.02;
        let pos = Vector3::new(0.0, 0.0, -p);
        for _ in 0..5000 {
            let (w, _) = env.contact_force(&pose_at_z(-p), &Vector3::zeros());
            assert!(w.force[2] <= 500.0 * p + 1e-12);
            assert!(w.force[2] >= 0.0);
            env = env.step_state(&pos, 1e-3);
        }
    }

    #[test]
    fn spring_force_continuous_at_boundary() {
        let env = spring(431.0, 0.004);
        let mut prev = None;
        for i in 0..200 {
            let z = 0.005 - 1e-7 * i as f64;
            let (w, _) = env.contact_force(&pose_at_z(z), &Vector3::zeros());
            if let Some(p) = prev {
                assert!((w.force[2] - p as f64).abs() < 1e-4);
            }
            prev = Some(w.force[2]);
        }
    }

    #[test]
    fn lumped_uncertainty_zero_for_exact_prior() {
        let env = spring(200.0, 0.011);
        let prior = PriorModel { stiffness: 200.0, rest: 0.011 };
        let pose = pose_at_z(0.003);
        let (w, _) = env.contact_force(&pose, &Vector3::zeros());
        let delta = lumped_uncertainty(&w, &pose.position, &env.axis, &prior);
        assert_abs_diff_eq!(delta.norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lumped_uncertainty_stiffness_mismatch() {
        // True 500 N/m vs assumed 200 N/m at 0.01 m penetration: 3 N.
        let env = spring(500.0, 0.011);
        let prior = PriorModel { stiffness: 200.0, rest: 0.011 };
        let pose = pose_at_z(0.001);
        let (w, in_contact) = env.contact_force(&pose, &Vector3::zeros());
        assert!(in_contact);
        let delta = lumped_uncertainty(&w, &pose.position, &env.axis, &prior);
        assert_abs_diff_eq!(delta[2], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn lumped_uncertainty_separated_is_minus_prior_prediction() {
        let prior = PriorModel { stiffness: 200.0, rest: 0.0 };
        let axis = ContactAxis::default();
        let pose = pose_at_z(0.02);
        let delta = lumped_uncertainty(&Wrench::zero(), &pose.position, &axis, &prior);
        assert_abs_diff_eq!(delta[2], -prior.predicted_force(&axis, &pose.position), epsilon = 1e-15);
        // Above the assumed surface the prediction is negative, so the
        // raw uncertainty is positive; callers mask it via the contact flag.
        assert!(delta[2] > 0.0);
    }
}
