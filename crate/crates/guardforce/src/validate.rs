//! The release acceptance suite behind `guardforce validate`.
//!
//! Each criterion is a standalone function returning a
//! [`CriterionOutcome`]; `run_all` executes them in order. Thresholds
//! are pinned here, in code. Expected values come from independent
//! oracles (grid search, finite differences, closed forms), never from
//! the implementation under test.

pub mod oracles;

use crate::config;
use crate::environment::EnvironmentLaw;
use crate::estimator::{alpha_from_matrix, compute_alpha, error_bound, BoundMode, ErrorBoundParams};
use crate::qp::{self, single_constraint_closed_form, QpProblem};
use crate::robot::{JointState, RobotModel};
use crate::safety::zeta_diagnostics;
use crate::sim::{builtins, compute_metrics, run_scenario, ControllerKind, ReferenceSpec};
use crate::Vec6;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn render(&self) -> String {
        format!(
            "{}  {:<32} ({:.2} s)  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ValidateOptions {
    /// Perturb QP solutions before certification; the oracle criterion
    /// must then fail (detector sanity check).
    pub corrupt_qp: bool,
}

/// Run the full suite in order.
pub fn run_all(opts: &ValidateOptions) -> Vec<CriterionOutcome> {
    vec![
        constraint_enforcement(),
        forward_invariance_randomized(),
        qp_oracle_equivalence(opts.corrupt_qp),
        td_bound(),
        force_mode_convergence(),
        dynamic_forward_invariance(),
        parameter_sweep_orderings(),
        force_control_tracking(),
        numerical_crosschecks(),
        determinism_csv(),
    ]
}

fn outcome(
    name: &'static str,
    started: Instant,
    passed: bool,
    detail: String,
) -> CriterionOutcome {
    CriterionOutcome { name, passed, detail, seconds: started.elapsed().as_secs_f64() }
}

/// Tests I-III: the filtered controller respects the limit while the
/// bare admittance baseline breaks it at least once, within the runtime
/// budget.
pub fn constraint_enforcement() -> CriterionOutcome {
    let started = Instant::now();
    let mut passed = true;
    let mut notes = Vec::new();
    for name in ["test1_spring", "test2_sponge", "test3_hybrid"] {
        let scenario = builtins::builtin(name).expect("builtin exists");
        let cfg = scenario.safety_config();
        let t0 = Instant::now();
        let filtered = match run_scenario(&scenario) {
            Ok(t) => t,
            Err(e) => {
                return outcome(
                    "constraint_enforcement",
                    started,
                    false,
                    format!("{name}: {e}"),
                )
            }
        };
        let filtered_secs = t0.elapsed().as_secs_f64();
        let mut baseline_scenario = scenario.clone();
        baseline_scenario.controller = ControllerKind::Admittance;
        let baseline = match run_scenario(&baseline_scenario) {
            Ok(t) => t,
            Err(e) => {
                return outcome(
                    "constraint_enforcement",
                    started,
                    false,
                    format!("{name} baseline: {e}"),
                )
            }
        };
        let mf = compute_metrics(&filtered, &cfg);
        let mb = compute_metrics(&baseline, &cfg);
        let limit = scenario.safety.f_max;
        let ok = mf.max_force <= limit * 1.01
            && mf.violation_count == 0
            && mb.violation_count >= 1
            && filtered_secs < 5.0;
        passed &= ok;
        notes.push(format!(
            "{name}: filtered max {:.3} N (limit {limit}), baseline max {:.3} N / {} violations, {:.2} s{}",
            mf.max_force,
            mb.max_force,
            mb.violation_count,
            filtered_secs,
            if ok { "" } else { " <-- FAIL" }
        ));
    }
    outcome("constraint_enforcement", started, passed, notes.join("; "))
}

/// 50 randomized pressing scenarios (stiffness 100-1000 N/m, rest
/// offsets +-0.02 m, both bound modes): the barrier never drops below
/// the one-step discretization allowance and no hard violations occur.
pub fn forward_invariance_randomized() -> CriterionOutcome {
    let started = Instant::now();
    let template = builtins::builtin("test1_spring").expect("builtin exists");
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_810);
    let mut passed = true;
    let mut worst_b = f64::INFINITY;
    let mut total_violations = 0usize;
    let mut failures = Vec::new();
    for k in 0..50 {
        let mut s = template.clone();
        s.duration = 20.0;
        s.name = format!("random_{k}");
        let stiffness = rng.random_range(100.0..1000.0);
        let rest = 0.011 + rng.random_range(-0.02..0.02);
        s.environment.law = EnvironmentLaw::Spring { stiffness, rest };
        s.estimator.bound = if k % 2 == 0 {
            BoundMode::Constant { sigma_bar: 0.5 }
        } else {
            BoundMode::Analytic(ErrorBoundParams {
                alpha: 1.5,
                epsilon: 1.0,
                beta: 0.6,
                z0_norm: 2.0,
            })
        };
        let cfg = s.safety_config();
        let trace = match run_scenario(&s) {
            Ok(t) => t,
            Err(e) => {
                passed = false;
                failures.push(format!("{}: {e}", s.name));
                continue;
            }
        };
        let m = compute_metrics(&trace, &cfg);
        let allowance = s.safety.l * s.safety.f_max * s.control_dt;
        let b0 = trace.rows[0].b_fc[trace.axis.index];
        worst_b = worst_b.min(m.min_b_fc);
        total_violations += m.violation_count;
        if b0 < 0.0 || m.min_b_fc < -allowance || m.violation_count > 0 {
            passed = false;
            failures.push(format!(
                "{} (K={stiffness:.0}, rest={rest:.4}): min_b={:.4}, violations={}",
                s.name, m.min_b_fc, m.violation_count
            ));
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let passed = passed && secs < 60.0;
    let detail = if failures.is_empty() {
        format!(
            "50 runs: min barrier {:.4} N (allowance -1.0), {} hard violations, {:.1} s",
            worst_b, total_violations, secs
        )
    } else {
        failures.join("; ")
    };
    outcome("forward_invariance_randomized", started, passed, detail)
}

/// 500 random small projection QPs against the multiresolution grid
/// oracle; single-active solutions against the halfspace closed form.
pub fn qp_oracle_equivalence(corrupt: bool) -> CriterionOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3_141_592);
    let mut passed = true;
    let mut max_grid_gap = 0.0f64;
    let mut max_kkt = 0.0f64;
    let mut single_active_checked = 0usize;
    let mut detail_fail = String::new();
    for i in 0..500 {
        let n = rng.random_range(1..=3usize);
        let m = rng.random_range(1..=3usize);
        let witness = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let g = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let h = &g * &witness + DVector::from_fn(m, |_, _| rng.random_range(0.5..1.2));
        let u_nom = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let p = QpProblem::new(u_nom.clone(), g.clone(), h.clone()).unwrap();
        let mut sol = match qp::solve(&p) {
            Ok(s) => s,
            Err(e) => {
                passed = false;
                detail_fail = format!("instance {i}: solver error {e}");
                break;
            }
        };
        if corrupt {
            sol.u_star[0] += 1e-3;
        }
        let kkt = qp::verify_kkt(&p, &sol).max();
        max_kkt = max_kkt.max(kkt);
        if kkt > 1e-8 {
            passed = false;
            detail_fail = format!("instance {i}: KKT residual {kkt:.2e}");
            break;
        }
        let oracle = oracles::grid_qp_oracle(&p, 1e-3);
        match oracle {
            Some(u_grid) => {
                let gap = (&sol.u_star - &u_grid).amax();
                max_grid_gap = max_grid_gap.max(gap);
                if gap > 2e-3 {
                    // Where two constraints meet, the best feasible
                    // lattice point can sit a few cells along the edge
                    // even though both answers agree at grid resolution.
                    // Accept the equivalent certificate: the solution is
                    // feasible and at least as close to u_nom as the
                    // best point the brute force found.
                    let primal = (0..p.g.nrows())
                        .map(|r| p.g.row(r).dot(&sol.u_star.transpose()) - p.h[r])
                        .fold(f64::NEG_INFINITY, f64::max);
                    let cost_sol = (&sol.u_star - &u_nom).norm_squared();
                    let cost_grid = (&u_grid - &u_nom).norm_squared();
                    if primal > 1e-9 || cost_sol > cost_grid + 1e-12 {
                        passed = false;
                        detail_fail = format!(
                            "instance {i}: grid gap {gap:.2e}, primal {primal:.2e}, \
                             cost excess {:.2e}",
                            cost_sol - cost_grid
                        );
                        break;
                    }
                }
            }
            None => {
                passed = false;
                detail_fail = format!("instance {i}: oracle found no feasible point");
                break;
            }
        }
        if sol.active_set.len() == 1 {
            let row = sol.active_set[0];
            let g_row = g.row(row).into_owned();
            let (u_cf, l_cf) = single_constraint_closed_form(&u_nom, &g_row, h[row]);
            if (&sol.u_star - u_cf).amax() > 1e-10 || (sol.lambda[row] - l_cf).abs() > 1e-10 {
                passed = false;
                detail_fail = format!("instance {i}: closed-form mismatch");
                break;
            }
            single_active_checked += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let passed = passed && secs < 30.0 && single_active_checked >= 50;
    let detail = if detail_fail.is_empty() {
        format!(
            "500 instances: max grid gap {max_grid_gap:.2e} (tol 2e-3), max KKT {max_kkt:.2e}, \
             {single_active_checked} single-active closed-form checks, {secs:.1} s"
        )
    } else {
        detail_fail
    };
    outcome("qp_oracle_equivalence", started, passed, detail)
}

/// Estimation error envelope: a simulated error system with a valid
/// decay rate stays under the closed-form bound at every sample, and the
/// production observer gains are correctly rejected by the decay-rate
/// test (engaging the constant bound mode).
pub fn td_bound() -> CriterionOutcome {
    let started = Instant::now();
    let mut passed = true;
    let mut notes = Vec::new();

    // Error system with negative definite symmetric part.
    let a = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, -1.0, -2.0]);
    let alpha = match alpha_from_matrix(&a) {
        Ok(v) => v,
        Err(e) => {
            return outcome("td_bound", started, false, format!("alpha failed: {e}"));
        }
    };
    let beta: f64 = 0.4;
    let z0 = DVector::from_vec(vec![1.2, -0.7]);
    let mode = BoundMode::Analytic(ErrorBoundParams {
        alpha,
        epsilon: alpha,
        beta,
        z0_norm: z0.norm(),
    });
    let dt = 1e-4;
    let mut z = z0;
    let mut max_excess = f64::NEG_INFINITY;
    for k in 0..100_000 {
        let t = k as f64 * dt;
        let d = DVector::from_vec(vec![0.0, beta * (3.0 * t).sin()]);
        let f = |z: &DVector<f64>| &a * z + &d;
        let k1 = f(&z);
        let k2 = f(&(&z + &k1 * (dt / 2.0)));
        let k3 = f(&(&z + &k2 * (dt / 2.0)));
        let k4 = f(&(&z + &k3 * dt));
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let envelope = error_bound(&mode, t + dt).unwrap();
        max_excess = max_excess.max(z.norm() - envelope);
        if z.norm() > envelope + 1e-6 {
            passed = false;
        }
    }
    notes.push(format!(
        "10 s simulated error vs envelope: max excess {max_excess:.2e} (tol 1e-6)"
    ));

    // The production gains admit no quadratic decay rate; the constant
    // bound mode must be what the built-in scenarios use.
    let reject = compute_alpha(&Vec6::repeat(110.0), &Vec6::repeat(3000.0), None);
    if reject.is_ok() {
        passed = false;
        notes.push("gains 110/3000 unexpectedly admitted a decay rate".into());
    } else {
        notes.push("gains 110/3000 rejected as expected".into());
    }
    let t1 = builtins::builtin("test1_spring").unwrap();
    match t1.estimator.bound {
        BoundMode::Constant { sigma_bar } => {
            notes.push(format!("constant bound engaged (sigma_bar = {sigma_bar})"));
        }
        _ => {
            passed = false;
            notes.push("built-in scenario does not use the constant bound".into());
        }
    }
    outcome("td_bound", started, passed, notes.join("; "))
}

/// Sustained press: with the constraint active, the force settles into a
/// band around the limit over the final quarter of the window.
pub fn force_mode_convergence() -> CriterionOutcome {
    let started = Instant::now();
    let mut s = builtins::builtin("test1_spring").expect("builtin exists");
    s.name = "sustained_press".into();
    s.reference = ReferenceSpec::Constant { value: -0.005, slew: 0.05 };
    s.duration = 20.0;
    let trace = match run_scenario(&s) {
        Ok(t) => t,
        Err(e) => return outcome("force_mode_convergence", started, false, e.to_string()),
    };
    let n = trace.rows.len();
    let tail = &trace.rows[n - n / 4..];
    let active_frac =
        tail.iter().filter(|r| !r.active_set.is_empty()).count() as f64 / tail.len() as f64;
    let sigma_bar = match s.estimator.bound {
        BoundMode::Constant { sigma_bar } => sigma_bar,
        _ => 0.0,
    };
    let band_limit = (0.1 * s.safety.f_max).max(2.0 * sigma_bar / s.safety.l);
    let band = tail
        .iter()
        .map(|r| (r.h_e[trace.axis.index] - s.safety.f_max).abs())
        .fold(0.0f64, f64::max);
    let passed = active_frac > 0.9 && band <= band_limit;
    outcome(
        "force_mode_convergence",
        started,
        passed,
        format!(
            "tail band {band:.3} N (limit {band_limit:.3}), constraint active {:.0}% of tail",
            100.0 * active_frac
        ),
    )
}

/// Torque-level run on the planar arm: valid start, barrier above the
/// discretization allowance, no hard violations, and the second-order
/// cascade diagnostic nonnegative (up to finite-difference tolerance)
/// inside contact windows.
pub fn dynamic_forward_invariance() -> CriterionOutcome {
    let started = Instant::now();
    let s = builtins::builtin("dynamic_planar").expect("builtin exists");
    let cfg = s.safety_config();
    let trace = match run_scenario(&s) {
        Ok(t) => t,
        Err(e) => return outcome("dynamic_forward_invariance", started, false, e.to_string()),
    };
    let m = compute_metrics(&trace, &cfg);
    let axis = trace.axis.index;
    let allowance = cfg.l1 * s.safety.f_max * s.control_dt;
    let mut passed = trace.rows[0].b_fc[axis] >= 0.0
        && m.min_b_fc >= -allowance
        && m.violation_count == 0;
    let mut notes = vec![format!(
        "min barrier {:.4} N (allowance {:.2}), max force {:.3} N, violations {}",
        m.min_b_fc, -allowance, m.max_force, m.violation_count
    )];

    // Cascade diagnostic per contiguous contact window (interior samples
    // only; the finite differences need clean neighborhoods).
    let tol_fd = 1e-2 * cfg.l1 * cfg.l2 * s.safety.f_max;
    let b_trace = trace.barrier_trace();
    let flags = trace.contact_flags();
    let mut min_zeta2 = f64::INFINITY;
    let mut idx = 0;
    while idx < flags.len() {
        if !flags[idx] {
            idx += 1;
            continue;
        }
        let seg_start = idx;
        while idx < flags.len() && flags[idx] {
            idx += 1;
        }
        let seg = &b_trace[seg_start..idx];
        if seg.len() < 8 {
            continue;
        }
        let zeta = match zeta_diagnostics(seg, trace.dt, cfg.l1, cfg.l2) {
            Ok(z) => z,
            Err(e) => {
                passed = false;
                notes.push(format!("cascade failed: {e}"));
                continue;
            }
        };
        // Skip two samples at each edge of the window.
        for &v in &zeta.zeta2[2..zeta.zeta2.len() - 2] {
            min_zeta2 = min_zeta2.min(v);
            if v < -tol_fd {
                passed = false;
            }
        }
    }
    if min_zeta2.is_finite() {
        notes.push(format!("min zeta2 {min_zeta2:.2} (tol -{tol_fd:.2})"));
    } else {
        passed = false;
        notes.push("no contact window long enough for the cascade".into());
    }
    outcome("dynamic_forward_invariance", started, passed, notes.join("; "))
}

/// Sweep orderings: the steady-state force gap shrinks as the barrier
/// gain grows and widens as the error bound grows (exact order match).
pub fn parameter_sweep_orderings() -> CriterionOutcome {
    let started = Instant::now();
    let gap_for = |scenario: &crate::sim::Scenario| -> Result<f64, String> {
        let cfg = scenario.safety_config();
        let trace = run_scenario(scenario).map_err(|e| e.to_string())?;
        let m = compute_metrics(&trace, &cfg);
        Ok(scenario.safety.f_max - m.steady_force_mean)
    };

    let sweep_l = builtins::builtin("sweep_l").expect("builtin exists");
    let spec = sweep_l.sweep.clone().unwrap();
    let mut gaps_l = Vec::new();
    for v in &spec.values {
        let s = match config::apply_value(&sweep_l, &spec.param, *v) {
            Ok(s) => s,
            Err(e) => return outcome("parameter_sweep_orderings", started, false, e.to_string()),
        };
        match gap_for(&s) {
            Ok(g) => gaps_l.push(g),
            Err(e) => return outcome("parameter_sweep_orderings", started, false, e),
        }
    }
    // Non-increasing in l: sorting by gap descending must preserve order.
    let l_ordered = gaps_l.windows(2).all(|w| w[0] >= w[1]);

    let sweep_s = builtins::builtin("sweep_sigma").expect("builtin exists");
    let spec_s = sweep_s.sweep.clone().unwrap();
    let mut gaps_s = Vec::new();
    for v in &spec_s.values {
        let s = match config::apply_value(&sweep_s, &spec_s.param, *v) {
            Ok(s) => s,
            Err(e) => return outcome("parameter_sweep_orderings", started, false, e.to_string()),
        };
        match gap_for(&s) {
            Ok(g) => gaps_s.push(g),
            Err(e) => return outcome("parameter_sweep_orderings", started, false, e),
        }
    }
    let s_ordered = gaps_s.windows(2).all(|w| w[0] <= w[1]);

    let passed = l_ordered && s_ordered;
    outcome(
        "parameter_sweep_orderings",
        started,
        passed,
        format!(
            "gaps over l {{2,5,10}}: {:?} (non-increasing: {}), over sigma {{0,0.5,1}}: {:?} (non-decreasing: {})",
            gaps_l.iter().map(|g| (g * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            l_ordered,
            gaps_s.iter().map(|g| (g * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            s_ordered
        ),
    )
}

/// Force-control scenario: steady tracking within 0.4 N of the 4 N
/// target and the 9 N limit respected with 1% tolerance.
pub fn force_control_tracking() -> CriterionOutcome {
    let started = Instant::now();
    let s = builtins::builtin("force_control").expect("builtin exists");
    let trace = match run_scenario(&s) {
        Ok(t) => t,
        Err(e) => return outcome("force_control_tracking", started, false, e.to_string()),
    };
    let f_d = s.force_loop.as_ref().unwrap().f_d;
    let n = trace.rows.len();
    let tail = &trace.rows[n - n / 4..];
    let max_err = tail
        .iter()
        .map(|r| (r.h_e[trace.axis.index] - f_d).abs())
        .fold(0.0f64, f64::max);
    let max_force = trace
        .rows
        .iter()
        .map(|r| r.h_e[trace.axis.index])
        .fold(0.0f64, f64::max);
    let passed = max_err <= 0.4 && max_force <= 9.09;
    outcome(
        "force_control_tracking",
        started,
        passed,
        format!("steady |F - {f_d}| max {max_err:.3} N (tol 0.4), max force {max_force:.3} N (tol 9.09)"),
    )
}

/// Kinematics and dynamics cross-checks against independent numerical
/// oracles.
pub fn numerical_crosschecks() -> CriterionOutcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(97);
    let mut passed = true;
    let mut notes = Vec::new();

    // Jacobian columns vs central differences of the forward kinematics.
    let mut max_jac_err = 0.0f64;
    for model in [RobotModel::planar2(), RobotModel::ur3e_kinematic()] {
        for _ in 0..100 {
            let q = DVector::from_fn(model.dof(), |_, _| rng.random_range(-3.0..3.0));
            let err = oracles::max_jacobian_fd_error(&model, &q);
            max_jac_err = max_jac_err.max(err);
            if err > 1e-5 {
                passed = false;
            }
        }
    }
    notes.push(format!("jacobian vs finite differences: max error {max_jac_err:.2e} (tol 1e-5)"));

    // Inertia symmetric positive definite; Mdot - 2C skew-symmetric.
    let model = RobotModel::planar2();
    let mut max_skew = 0.0f64;
    for _ in 0..100 {
        let q = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let qdot = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
        let state = JointState::new(q.clone(), qdot.clone());
        let terms = model.dynamics_terms(&state).unwrap();
        if (&terms.m - terms.m.transpose()).norm() > 1e-10 {
            passed = false;
        }
        if terms
            .m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .any(|&e| e <= 0.0)
        {
            passed = false;
        }
        let skew = oracles::mdot_minus_2c_symmetric_part(&model, &q, &qdot);
        max_skew = max_skew.max(skew);
        if skew > 1e-8 {
            passed = false;
        }
    }
    notes.push(format!("Mdot - 2C symmetric part: max {max_skew:.2e} (tol 1e-8)"));

    // Energy conservation in free motion.
    let drift = oracles::free_motion_energy_drift();
    if drift > 1e-6 {
        passed = false;
    }
    notes.push(format!("free-motion energy drift {drift:.2e} (tol 1e-6)"));

    outcome("numerical_crosschecks", started, passed, notes.join("; "))
}

/// Two identical runs serialize to byte-identical CSV.
pub fn determinism_csv() -> CriterionOutcome {
    let started = Instant::now();
    let s = builtins::builtin("test1_spring").expect("builtin exists");
    let t1 = match run_scenario(&s) {
        Ok(t) => t,
        Err(e) => return outcome("determinism_csv", started, false, e.to_string()),
    };
    let t2 = run_scenario(&s).expect("second run");
    let csv1 = crate::sim::trace::to_csv(&t1);
    let csv2 = crate::sim::trace::to_csv(&t2);
    let identical = csv1 == csv2;
    // Round trip: parse and re-serialize reproduces the bytes.
    let table = crate::sim::trace::parse_csv(&csv1).expect("parse own csv");
    let round = crate::sim::trace::table_to_csv(&table) == csv1;
    let passed = identical && round;
    outcome(
        "determinism_csv",
        started,
        passed,
        format!(
            "byte-identical: {identical}, parse/serialize round trip: {round}, {} rows",
            table.rows.len()
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corrupted_qp_is_detected() {
        let clean = qp_oracle_equivalence(false);
        assert!(clean.passed, "{}", clean.detail);
        let corrupted = qp_oracle_equivalence(true);
        assert!(!corrupted.passed, "corruption not detected");
    }
}
