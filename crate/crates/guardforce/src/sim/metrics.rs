//! Deterministic aggregation of a completed trace.

use super::trace::Trace;
use crate::safety::SafetyConfig;

/// Fraction of the force limit a sample may exceed it by before it
/// counts as a violation.
pub const VIOLATION_TOLERANCE: f64 = 0.01;

/// Scalar summary of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Largest contact-axis force over the sampled trace (N).
    pub max_force: f64,
    /// Largest force seen between samples (N).
    pub substep_peak_force: f64,
    /// Ticks where the force exceeded limit * (1 + tolerance).
    pub violation_count: usize,
    /// Violation ticks times the tick length (s).
    pub violation_duration: f64,
    /// Mean contact-axis force over the last quarter of the run (N).
    pub steady_force_mean: f64,
    /// Largest |force - limit| over the last quarter (N).
    pub steady_band: f64,
    /// RMS error between the contact-axis coordinate and its reference (m).
    pub rms_tracking_error: f64,
    /// Fraction of ticks with at least one active constraint.
    pub qp_active_fraction: f64,
    /// Smallest barrier value over the trace (N).
    pub min_b_fc: f64,
    /// Ticks where the infeasibility slack engaged.
    pub slack_ticks: usize,
}

pub fn compute_metrics(trace: &Trace, cfg: &SafetyConfig) -> Metrics {
    let axis = trace.axis.index;
    let limit = cfg.h_e_max[axis];
    let tol = VIOLATION_TOLERANCE * limit;
    let n = trace.rows.len();
    let tail_start = n - n / 4;

    let mut max_force = 0.0f64;
    let mut violation_count = 0;
    let mut min_b = f64::INFINITY;
    let mut active_ticks = 0;
    let mut slack_ticks = 0;
    let mut err_sq = 0.0;
    let mut steady_sum = 0.0;
    let mut steady_n = 0usize;
    let mut steady_band = 0.0f64;
    for (i, row) in trace.rows.iter().enumerate() {
        let f = row.h_e[axis];
        max_force = max_force.max(f);
        if f > limit + tol {
            violation_count += 1;
        }
        min_b = min_b.min(row.b_fc[axis]);
        if !row.active_set.is_empty() {
            active_ticks += 1;
        }
        if row.slack_used {
            slack_ticks += 1;
        }
        let e = row.x[axis] - row.x_ref;
        err_sq += e * e;
        if i >= tail_start {
            steady_sum += f;
            steady_n += 1;
            steady_band = steady_band.max((f - limit).abs());
        }
    }
    Metrics {
        max_force,
        substep_peak_force: trace.substep_peak_force,
        violation_count,
        violation_duration: violation_count as f64 * trace.dt,
        steady_force_mean: if steady_n > 0 { steady_sum / steady_n as f64 } else { 0.0 },
        steady_band,
        rms_tracking_error: if n > 0 { (err_sq / n as f64).sqrt() } else { 0.0 },
        qp_active_fraction: if n > 0 { active_ticks as f64 / n as f64 } else { 0.0 },
        min_b_fc: if min_b.is_finite() { min_b } else { 0.0 },
        slack_ticks,
    }
}

/// Flat `key=value` rendering, one entry per line.
pub fn metrics_to_kv(m: &Metrics) -> String {
    let mut out = String::new();
    let mut push = |k: &str, v: String| {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    push("max_force", super::trace::format_sig(m.max_force));
    push("substep_peak_force", super::trace::format_sig(m.substep_peak_force));
    push("violation_count", m.violation_count.to_string());
    push("violation_duration", super::trace::format_sig(m.violation_duration));
    push("steady_force_mean", super::trace::format_sig(m.steady_force_mean));
    push("steady_band", super::trace::format_sig(m.steady_band));
    push("rms_tracking_error", super::trace::format_sig(m.rms_tracking_error));
    push("qp_active_fraction", super::trace::format_sig(m.qp_active_fraction));
    push("min_b_fc", super::trace::format_sig(m.min_b_fc));
    push("slack_ticks", m.slack_ticks.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::ContactAxis;
    use crate::environment::PriorModel;
    use crate::sim::trace::TraceRow;
    use crate::Vec6;
    use approx::assert_abs_diff_eq;

    fn trace_from_forces(forces: &[f64]) -> Trace {
        let axis = ContactAxis::default();
        let rows = forces
            .iter()
            .enumerate()
            .map(|(k, &f)| TraceRow {
                t: k as f64 * 0.02,
                q: vec![0.0],
                u_star: vec![0.0],
                u_nom: vec![0.0],
                x: [0.0, 0.0, 0.0],
                xdot: [0.0; 3],
                x_ref: 0.0,
                h_e: Vec6::repeat(f),
                b_fc: Vec6::repeat(5.0 - f),
                sigma: Vec6::zeros(),
                z1: Vec6::zeros(),
                z2: Vec6::zeros(),
                z3: None,
                active_set: vec![],
                lambda: vec![],
                in_contact: f > 0.0,
                violation: false,
                slack_used: false,
            })
            .collect();
        Trace {
            dt: 0.02,
            axis,
            f_max: 5.0,
            rows,
            substep_peak_force: forces.iter().cloned().fold(0.0, f64::max),
        }
    }

    fn cfg() -> SafetyConfig {
        SafetyConfig::single_axis(
            &ContactAxis::default(),
            5.0,
            PriorModel { stiffness: 200.0, rest: 0.0 },
            10.0,
        )
    }

    #[test]
    fn silent_trace_has_zero_metrics() {
        let m = compute_metrics(&trace_from_forces(&[0.0; 40]), &cfg());
        assert_eq!(m.violation_count, 0);
        assert_eq!(m.max_force, 0.0);
    }

    #[test]
    fn single_overshoot_detected() {
        let mut forces = vec![4.0; 40];
        forces[10] = 5.2; // above 5 * 1.01
        let m = compute_metrics(&trace_from_forces(&forces), &cfg());
        assert_eq!(m.violation_count, 1);
        assert_abs_diff_eq!(m.violation_duration, 0.02, epsilon = 1e-12);
        assert_abs_diff_eq!(m.max_force, 5.2, epsilon = 1e-12);
    }

    #[test]
    fn boundary_sample_within_tolerance_is_not_violation() {
        let m = compute_metrics(&trace_from_forces(&[5.04; 20]), &cfg());
        assert_eq!(m.violation_count, 0);
    }

    #[test]
    fn steady_metrics_on_constant_tail() {
        let mut forces = vec![1.0; 30];
        forces.extend(vec![4.9; 10]);
        let m = compute_metrics(&trace_from_forces(&forces), &cfg());
        assert_abs_diff_eq!(m.steady_force_mean, 4.9, epsilon = 1e-12);
        assert_abs_diff_eq!(m.steady_band, 0.1, epsilon = 1e-9);
    }
}
