//! The built-in scenario library.
//!
//! Controller-side settings (gains, limits, prior model, references)
//! follow the bench settings used across the interaction tests; the true
//! environment parameters are hidden from the controller and are bench
//! defaults chosen stiffer than the prior so the mismatch pushes toward
//! the force limit. Everything is overridable per run.

use super::reference::ReferenceSpec;
use super::{
    AdmittanceSpec, ControllerKind, EstimatorSpec, ForceLoopSpec, GainsSpec, PdSpec, RobotSpec,
    SafetySpec, Scenario, StartSpec, SweepSpec,
};
use crate::environment::{ContactAxis, EnvironmentLaw, EnvironmentModel};
use crate::estimator::BoundMode;

fn ur3e_start() -> StartSpec {
    StartSpec {
        joints: None,
        position: Some([0.30, 0.12, 0.045]),
        ik_seed: Some(vec![0.0, -1.2, 1.6, -2.0, -1.57, 0.0]),
        elbow_up: false,
    }
}

fn safety(f_max: f64, l: f64) -> SafetySpec {
    SafetySpec {
        f_max,
        l,
        l1: None,
        l2: None,
        prior_stiffness: 200.0,
        prior_rest: 0.0,
        contact_threshold: 1e-5,
    }
}

fn estimator_constant(sigma_bar: f64) -> EstimatorSpec {
    EstimatorSpec {
        l1: 110.0,
        l2: 3000.0,
        l3: None,
        bound: BoundMode::Constant { sigma_bar },
        substeps: 20,
    }
}

fn base_kinematic(name: &str, description: &str) -> Scenario {
    Scenario {
        schema: 1,
        name: name.into(),
        description: description.into(),
        duration: 40.0,
        seed: 0,
        control_dt: 0.02,
        plant_substeps: 20,
        robot: RobotSpec::Preset("ur3e_kinematic".into()),
        controller: ControllerKind::AdmittanceSc3,
        reference: ReferenceSpec::Square { high: 0.045, low: -0.005, period: 10.0, slew: 0.3 },
        environment: EnvironmentModel {
            law: EnvironmentLaw::Spring { stiffness: 500.0, rest: 0.011 },
            axis: ContactAxis { index: 2, direction: -1.0 },
        },
        safety: safety(5.0, 10.0),
        estimator: estimator_constant(0.5),
        admittance: AdmittanceSpec::default(),
        gains: GainsSpec::default(),
        force_loop: None,
        pd: PdSpec::default(),
        start: ur3e_start(),
        slack_penalty: 1e6,
        sweep: None,
    }
}

/// All built-in scenarios, by name:
/// `test1_spring`, `test2_sponge`, `test3_hybrid`, `sinusoid_medium`,
/// `sinusoid_high`, `force_control`, `sweep_l`, `sweep_sigma`.
pub fn builtin_scenarios() -> Vec<Scenario> {
    let mut out = Vec::new();

    out.push(base_kinematic(
        "test1_spring",
        "Repetitive pressing of an elastic surface; limit 5 N. True stiffness \
         500 N/m is a bench default (prior assumes 200 N/m).",
    ));

    let mut test2 = base_kinematic(
        "test2_sponge",
        "Repetitive pressing of a viscoelastic surface; limit 5 N. True \
         stiffness 800 N/m and damping 30 N s/m are bench defaults.",
    );
    test2.name = "test2_sponge".into();
    test2.environment.law = EnvironmentLaw::KelvinVoigt {
        stiffness: 800.0,
        damping: 30.0,
        rest: 0.011,
        clamp: true,
    };
    test2.reference = ReferenceSpec::Square { high: 0.045, low: -0.005, period: 10.0, slew: 0.05 };
    out.push(test2);

    let mut test3 = base_kinematic(
        "test3_hybrid",
        "Repetitive pressing of a spring in series with a dense sponge; \
         limit 3 N. Series parameters are bench defaults.",
    );
    test3.name = "test3_hybrid".into();
    test3.environment.law = EnvironmentLaw::SeriesHybrid {
        k_spring: 500.0,
        k_sponge: 2000.0,
        d_sponge: 30.0,
        rest: 0.011,
        sponge_deflection: 0.0,
    };
    test3.reference = ReferenceSpec::Square { high: 0.045, low: -0.005, period: 10.0, slew: 0.05 };
    test3.safety = safety(3.0, 10.0);
    out.push(test3);

    let mut sin_med = base_kinematic(
        "sinusoid_medium",
        "Sinusoidal vertical tracking over a medium-stiffness hybrid \
         surface; limit 4 N.",
    );
    sin_med.name = "sinusoid_medium".into();
    sin_med.environment.law = EnvironmentLaw::SeriesHybrid {
        k_spring: 500.0,
        k_sponge: 1000.0,
        d_sponge: 30.0,
        rest: 0.011,
        sponge_deflection: 0.0,
    };
    sin_med.reference = ReferenceSpec::Sinusoid {
        amplitude: -0.04,
        omega: 0.1 * std::f64::consts::PI,
        offset: 0.025,
    };
    sin_med.safety = safety(4.0, 10.0);
    sin_med.start.position = Some([0.30, 0.12, 0.025]);
    out.push(sin_med);

    let mut sin_high = out.last().unwrap().clone();
    sin_high.name = "sinusoid_high".into();
    sin_high.description = "Sinusoidal vertical tracking over a high-stiffness hybrid \
         surface; limit 4 N."
        .into();
    sin_high.environment.law = EnvironmentLaw::SeriesHybrid {
        k_spring: 500.0,
        k_sponge: 3000.0,
        d_sponge: 30.0,
        rest: 0.011,
        sponge_deflection: 0.0,
    };
    out.push(sin_high);

    let mut force_ctrl = base_kinematic(
        "force_control",
        "Parallel force/position control pressing to 4 N on the hybrid \
         surface; limit 9 N, barrier gain 1.2.",
    );
    force_ctrl.name = "force_control".into();
    force_ctrl.controller = ControllerKind::ParallelFpSc3;
    force_ctrl.environment.law = EnvironmentLaw::SeriesHybrid {
        k_spring: 500.0,
        k_sponge: 2000.0,
        d_sponge: 30.0,
        rest: 0.011,
        sponge_deflection: 0.0,
    };
    force_ctrl.reference = ReferenceSpec::Constant { value: 0.005, slew: 0.05 };
    force_ctrl.safety = safety(9.0, 1.2);
    force_ctrl.force_loop = Some(ForceLoopSpec { k_p: 1e-5, k_i: 1e-2, f_d: 4.0, clamp: 0.05 });
    force_ctrl.duration = 30.0;
    out.push(force_ctrl);

    // Parameter sweeps ride on a sustained-press variant of the hybrid
    // test so the steady interaction phase fills the measurement window.
    let mut sweep_base = out[2].clone();
    sweep_base.reference = ReferenceSpec::Constant { value: -0.005, slew: 0.05 };
    sweep_base.duration = 20.0;

    let mut sweep_l = sweep_base.clone();
    sweep_l.name = "sweep_l".into();
    sweep_l.description =
        "Sustained press on the hybrid surface swept over the barrier gain l.".into();
    sweep_l.sweep = Some(SweepSpec { param: "safety.l".into(), values: vec![2.0, 5.0, 10.0] });
    out.push(sweep_l);

    let mut sweep_sigma = sweep_base;
    sweep_sigma.name = "sweep_sigma".into();
    sweep_sigma.description =
        "Sustained press on the hybrid surface swept over the error bound sigma_bar.".into();
    sweep_sigma.sweep = Some(SweepSpec {
        param: "estimator.sigma_bar".into(),
        values: vec![0.0, 0.5, 1.0],
    });
    out.push(sweep_sigma);

    let mut dynamic = base_kinematic(
        "dynamic_planar",
        "Torque-level filtered pressing with the planar two-link arm on a \
         stiff spring below the workspace; limit 5 N.",
    );
    dynamic.name = "dynamic_planar".into();
    dynamic.robot = RobotSpec::Preset("planar2".into());
    dynamic.controller = ControllerKind::DynamicSc3;
    dynamic.environment = EnvironmentModel {
        law: EnvironmentLaw::Spring { stiffness: 500.0, rest: -0.35 },
        axis: ContactAxis { index: 1, direction: -1.0 },
    };
    dynamic.reference = ReferenceSpec::Square { high: -0.2, low: -0.5, period: 10.0, slew: 0.05 };
    dynamic.safety = SafetySpec {
        f_max: 5.0,
        l: 10.0,
        l1: Some(10.0),
        l2: Some(10.0),
        prior_stiffness: 200.0,
        prior_rest: -0.36,
        contact_threshold: 1e-5,
    };
    dynamic.estimator = EstimatorSpec {
        l1: 120.0,
        l2: 4700.0,
        l3: Some(60_000.0),
        bound: BoundMode::Constant { sigma_bar: 0.5 },
        substeps: 20,
    };
    dynamic.start = StartSpec {
        joints: None,
        position: Some([1.2, -0.2, 0.0]),
        ik_seed: None,
        elbow_up: true,
    };
    out.push(dynamic);

    out
}

/// Look up one built-in scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}
