//! Force-limited compliant control for serial robots interacting with
//! unknown environments.
//!
//! The library builds a safety filter around any nominal compliant
//! controller (admittance, parallel force/position, computed torque):
//! the measured interaction force is turned into a barrier value
//! `b = h_max - h_e`, a tracking differentiator estimates how fast the
//! un-modelled part of the contact force is changing, and a small dense
//! QP projects the nominal command onto the set of commands that keep
//! the barrier nonnegative. The result is a minimally invasive patch:
//! away from the force limit the nominal controller acts unchanged, near
//! the limit the commanded joint rates (or torques) are scaled back just
//! enough.
//!
//! Modules mirror the control stack:
//!
//! - [`robot`] — kinematics and dynamics of the plant (DH chains, a
//!   two-link planar arm with closed-form dynamics),
//! - [`environment`] — ground-truth contact laws (spring, Kelvin-Voigt,
//!   series hybrid) hidden from the controller,
//! - [`estimator`] — tracking differentiators and their error bounds,
//! - [`safety`] — barrier values and linear constraint assembly,
//! - [`qp`] — exact active-set solver for the projection QP,
//! - [`controllers`] — nominal controllers and the filtered control steps,
//! - [`sim`] — deterministic fixed-step closed-loop scenarios,
//! - [`config`] — scenario files and overrides,
//! - [`validate`] — the acceptance criteria suite behind `guardforce validate`.

pub mod config;
pub mod controllers;
pub mod environment;
pub mod estimator;
pub mod qp;
pub mod robot;
pub mod safety;
pub mod sim;
pub mod validate;

/// Fixed-size 6-vector used for wrench-shaped signals (3 force axes,
/// 3 moment axes).
pub type Vec6 = nalgebra::SVector<f64, 6>;

pub use controllers::{AdmittanceParams, AdmittanceState, ForceLoopParams, NominalGains};
pub use environment::{ContactAxis, EnvironmentModel, PriorModel, Wrench};
pub use estimator::{BoundMode, ErrorBoundParams, EstimatorState};
pub use qp::{QpProblem, QpSolution};
pub use robot::{JointState, Pose, RobotModel, Twist};
pub use safety::{ConstraintSet, SafetyConfig};
pub use sim::{Metrics, Scenario, Trace};
